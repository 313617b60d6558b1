"""tripsift: telematics delivery-driving detection and review triage.

Stage one classifies individual GPS trips as delivery-like from engineered
stop features; stage two ranks policyholders by the posterior probability
of belonging to a rare high-alert-rate group under a Beta-Binomial mixture
fitted with Hamiltonian Monte Carlo.
"""

__version__ = "0.1.0"
