"""Beta-Binomial mixture ranking: parameters, likelihood, HMC fit, scoring."""

from .fit import PosteriorSamples, hmc_sample, load_artifact, save_artifact
from .hmc import FitDivergedError, HmcConfig
from .likelihood import (
    CountsTable,
    PolicyCounts,
    log_betabinomial,
    log_likelihood,
    read_counts_csv,
    responsibility,
    responsibility_over_draws,
    write_counts_csv,
)
from .params import (
    Hyperpriors,
    MixtureParams,
    NaturalParams,
    concentration_floor,
    from_natural,
    to_natural,
)
from .posterior import (
    PosteriorTarget,
    constrain,
    log_posterior_density,
    log_posterior_unconstrained,
    unconstrain,
)
from .scoring import (
    posterior_predictive,
    priority_score,
    render_score_table_csv,
    score_anchor,
    score_table,
)

__all__ = [
    "CountsTable",
    "FitDivergedError",
    "HmcConfig",
    "Hyperpriors",
    "MixtureParams",
    "NaturalParams",
    "PolicyCounts",
    "PosteriorSamples",
    "PosteriorTarget",
    "concentration_floor",
    "constrain",
    "from_natural",
    "hmc_sample",
    "load_artifact",
    "log_betabinomial",
    "log_likelihood",
    "log_posterior_density",
    "log_posterior_unconstrained",
    "posterior_predictive",
    "priority_score",
    "read_counts_csv",
    "render_score_table_csv",
    "responsibility",
    "responsibility_over_draws",
    "save_artifact",
    "write_counts_csv",
    "score_anchor",
    "score_table",
    "to_natural",
    "unconstrain",
]
