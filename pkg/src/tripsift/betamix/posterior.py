"""Log posterior of the mixture in constrained and unconstrained coordinates.

Sampling happens in the unconstrained space

    z = (logit mu0, logit mu1, log r0, log r1, logit theta)

with the log-Jacobian of the map added so that the density is with respect
to Lebesgue measure on R^5.  The gradient is analytic (digamma identities
for the Beta-Binomial terms); it feeds the Hamiltonian sampler.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import betaln, digamma, gammaln

from .likelihood import CountsTable
from .params import Hyperpriors, MixtureParams, NaturalParams, from_natural

DIM = 5
PARAM_NAMES = ("mu0", "mu1", "r0", "r1", "theta")


def _log_sigmoid(t: float) -> float:
    """log sigma(t), stable for large |t|."""
    return -math.log1p(math.exp(-t)) if t >= 0 else t - math.log1p(math.exp(t))


def _sigmoid(t: float) -> float:
    if t >= 0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def unconstrain(nat: NaturalParams) -> np.ndarray:
    """Map natural parameters to R^5."""
    logit = lambda v: math.log(v) - math.log1p(-v)
    return np.array([logit(nat.mu0), logit(nat.mu1),
                     math.log(nat.r0), math.log(nat.r1),
                     logit(nat.theta)], dtype=np.float64)


def constrain(z: np.ndarray) -> NaturalParams:
    """Inverse of :func:`unconstrain`."""
    return NaturalParams(mu0=_sigmoid(z[0]), mu1=_sigmoid(z[1]),
                         r0=math.exp(z[2]), r1=math.exp(z[3]),
                         theta=_sigmoid(z[4]))


def log_jacobian(z: np.ndarray) -> float:
    """log |d(constrained)/dz| for the sigmoid/exp coordinate map."""
    total = 0.0
    for i in (0, 1, 4):
        total += _log_sigmoid(z[i]) + _log_sigmoid(-z[i])
    total += z[2] + z[3]
    return float(total)


def _log_beta_prior(v: float, ab: tuple[float, float]) -> float:
    a, b = ab
    return (a - 1.0) * math.log(v) + (b - 1.0) * math.log1p(-v) - float(betaln(a, b))


def _log_gamma_prior(v: float, shape_rate: tuple[float, float]) -> float:
    k, lam = shape_rate
    if v <= 0:
        return -math.inf
    return k * math.log(lam) - float(gammaln(k)) + (k - 1.0) * math.log(v) - lam * v


def log_prior(nat: NaturalParams, priors: Hyperpriors) -> float:
    """Sum of the five prior log densities in constrained coordinates."""
    return (_log_beta_prior(nat.mu0, priors.mu0)
            + _log_beta_prior(nat.mu1, priors.mu1)
            + _log_gamma_prior(nat.r0, priors.r0)
            + _log_gamma_prior(nat.r1, priors.r1)
            + _log_beta_prior(nat.theta, priors.theta))


def log_posterior_density(nat: NaturalParams, counts: CountsTable,
                          priors: Hyperpriors) -> float:
    """Unnormalized log posterior over the constrained natural space."""
    from .likelihood import log_likelihood
    return log_likelihood(counts, from_natural(nat)) + log_prior(nat, priors)


def log_posterior_unconstrained(z: np.ndarray, counts: CountsTable,
                                priors: Hyperpriors) -> float:
    """Log posterior on R^5 (constrained density plus log-Jacobian)."""
    return log_posterior_density(constrain(z), counts, priors) + log_jacobian(z)


class PosteriorTarget:
    """Callable bundle (value, gradient) of the unconstrained log posterior.

    Instances precompute the collapsed counts so repeated evaluations during
    sampling touch only O(#unique (x, y) pairs) work.  Points where the
    density underflows report -inf with a zero gradient; the sampler treats
    the move as divergent.
    """

    def __init__(self, counts: CountsTable, priors: Hyperpriors):
        self.table = counts
        self.priors = priors
        self.dim = DIM

    def __call__(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        t = self.table
        pr = self.priors

        # 1 - mu computed as sigma(-z): never cancels to exactly zero
        mu = np.array([_sigmoid(z[0]), _sigmoid(z[1])])
        omm = np.array([_sigmoid(-z[0]), _sigmoid(-z[1])])
        r = np.array([math.exp(min(z[2], 700.0)), math.exp(min(z[3], 700.0))])
        theta = _sigmoid(z[4])

        with np.errstate(all="ignore"):
            # tau branch: 1/mu below the half point, 1/(1-mu) above
            lower = mu <= 0.5
            tau = np.where(lower, 1.0 / mu, 1.0 / omm)
            dtau = np.where(lower, -1.0 / mu**2, 1.0 / omm**2)
            s = r + tau
            alpha = mu * s
            beta = omm * s

            if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
                return -math.inf, np.zeros(DIM)

            # per-component Beta-Binomial log terms and digamma derivatives
            lb = np.empty((2, t.x.size))
            dl_da = np.empty_like(lb)
            dl_db = np.empty_like(lb)
            for k in range(2):
                a, b = alpha[k], beta[k]
                ay = a + t.y
                bxy = b + t.x - t.y
                abx = a + b + t.x
                lb[k] = t.log_choose + betaln(ay, bxy) - betaln(a, b)
                dig_ab = digamma(a + b)
                dig_abx = digamma(abx)
                dl_da[k] = digamma(ay) - dig_abx - digamma(a) + dig_ab
                dl_db[k] = digamma(bxy) - dig_abx - digamma(b) + dig_ab

            l0 = _log_sigmoid(-z[4]) + lb[0]
            l1 = _log_sigmoid(z[4]) + lb[1]
            m = np.logaddexp(l0, l1)
            loglik = float(np.dot(t.w, m))

            resp1 = np.exp(l1 - m)      # posterior weight of class 1 per row
            w1 = t.w * resp1
            w0 = t.w * (1.0 - resp1)

            # likelihood gradient wrt (alpha_k, beta_k), chained to (mu, r)
            dL_da = np.array([np.dot(w0, dl_da[0]), np.dot(w1, dl_da[1])])
            dL_db = np.array([np.dot(w0, dl_db[0]), np.dot(w1, dl_db[1])])
            dL_dmu = dL_da * (s + mu * dtau) + dL_db * (-s + omm * dtau)
            dL_dr = dL_da * mu + dL_db * omm
            dL_dtheta = float(np.dot(t.w, np.exp(lb[1] - m) - np.exp(lb[0] - m)))

            # priors plus Jacobian, directly in z-space.  A Beta(a, b) prior
            # with the logit Jacobian contributes a*log(v) + b*log(1-v); a
            # Gamma(k, lam) prior with the log Jacobian gives k*z - lam*e^z.
            logp = loglik
            grad = np.empty(DIM)
            for idx, (v, ab) in ((0, (mu[0], pr.mu0)), (1, (mu[1], pr.mu1)),
                                 (4, (theta, pr.theta))):
                a, b = ab
                logp += (a * _log_sigmoid(z[idx]) + b * _log_sigmoid(-z[idx])
                         - float(betaln(a, b)))
                grad[idx] = a * (1.0 - v) - b * v
            for idx, (v, kl) in ((2, (r[0], pr.r0)), (3, (r[1], pr.r1))):
                k_, lam = kl
                logp += (k_ * math.log(lam) - float(gammaln(k_))
                         + k_ * z[idx] - lam * v)
                grad[idx] = k_ - lam * v

            grad[0] += dL_dmu[0] * mu[0] * omm[0]
            grad[1] += dL_dmu[1] * mu[1] * omm[1]
            grad[2] += dL_dr[0] * r[0]
            grad[3] += dL_dr[1] * r[1]
            grad[4] += dL_dtheta * theta * (1.0 - theta)

        if not np.isfinite(logp):
            return -math.inf, np.zeros(DIM)
        if not np.all(np.isfinite(grad)):
            return -math.inf, np.zeros(DIM)
        return logp, grad

    def params_at(self, z: np.ndarray) -> MixtureParams:
        return from_natural(constrain(z))
