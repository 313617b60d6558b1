"""Fitting the mixture to policy counts and persisting the result."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import hmc
from .likelihood import CountsTable, PolicyCounts
from .params import Hyperpriors, MixtureParams, NaturalParams, from_natural
from .posterior import PARAM_NAMES, PosteriorTarget, constrain, unconstrain

ARTIFACT_FORMAT = "betamix-fit"
ARTIFACT_VERSION = 1


@dataclass
class PosteriorSamples:
    """Pooled post-warmup draws plus chain diagnostics."""

    draws_natural: np.ndarray          # (N, 5): mu0, mu1, r0, r1, theta
    diagnostics: dict
    hyperpriors: Hyperpriors
    seed: int
    _mixture_cache: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.draws_natural.shape[0]

    @property
    def draws(self) -> list[MixtureParams]:
        arr = self.draw_array()
        return [MixtureParams(*row) for row in arr]

    def draw_array(self) -> np.ndarray:
        """Draws as shape parameters: columns alpha0, beta0, alpha1, beta1, theta."""
        if self._mixture_cache is None:
            mu = self.draws_natural[:, 0:2]
            r = self.draws_natural[:, 2:4]
            theta = self.draws_natural[:, 4]
            tau = np.maximum(1.0 / mu, 1.0 / (1.0 - mu))
            s = r + tau
            alpha = mu * s
            beta = (1.0 - mu) * s
            self._mixture_cache = np.column_stack(
                [alpha[:, 0], beta[:, 0], alpha[:, 1], beta[:, 1], theta])
        return self._mixture_cache

    def natural_means(self) -> dict[str, float]:
        return {name: float(self.draws_natural[:, i].mean())
                for i, name in enumerate(PARAM_NAMES)}


def prior_init(priors: Hyperpriors):
    """Initial-point sampler: draw natural parameters from the priors."""

    def init(rng: np.random.Generator) -> np.ndarray:
        nat = NaturalParams(
            mu0=float(rng.beta(*priors.mu0)),
            mu1=float(rng.beta(*priors.mu1)),
            r0=float(rng.gamma(priors.r0[0], 1.0 / priors.r0[1])),
            r1=float(rng.gamma(priors.r1[0], 1.0 / priors.r1[1])),
            theta=float(rng.beta(*priors.theta)),
        )
        return unconstrain(nat)

    return init


def hmc_sample(counts: Sequence[PolicyCounts] | CountsTable,
               priors: Hyperpriors | None = None,
               config: hmc.HmcConfig | None = None) -> PosteriorSamples:
    """Sample the mixture posterior over the given counts."""
    table = counts if isinstance(counts, CountsTable) else CountsTable(counts)
    priors = priors or Hyperpriors()
    config = config or hmc.HmcConfig()
    target = PosteriorTarget(table, priors)
    result = hmc.sample(target, prior_init(priors), config)

    z = result.pooled
    mu = 1.0 / (1.0 + np.exp(-z[:, 0:2]))
    r = np.exp(z[:, 2:4])
    theta = 1.0 / (1.0 + np.exp(-z[:, 4:5]))
    natural = np.column_stack([mu, r, theta])

    diag = result.summary()
    diag["rhat"] = dict(zip(PARAM_NAMES, diag["rhat"]))
    diag["ess"] = dict(zip(PARAM_NAMES, diag["ess"]))
    diag["n_policies"] = table.n_policies
    return PosteriorSamples(draws_natural=natural, diagnostics=diag,
                            hyperpriors=priors, seed=config.seed)


def save_artifact(samples: PosteriorSamples, path: str,
                  score_table_csv: str | None = None) -> None:
    """Write the fit as a versioned JSON document (atomic replace)."""
    doc = {
        "format": ARTIFACT_FORMAT,
        "version": ARTIFACT_VERSION,
        "seed": samples.seed,
        "hyperpriors": samples.hyperpriors.to_dict(),
        "diagnostics": samples.diagnostics,
        "param_names": list(PARAM_NAMES),
        "draws_natural": [[float(v) for v in row] for row in samples.draws_natural],
    }
    if score_table_csv is not None:
        doc["score_table_csv"] = score_table_csv
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        json.dump(doc, f, sort_keys=True, separators=(",", ":"))
    os.replace(tmp, path)


def load_artifact(path: str) -> PosteriorSamples:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != ARTIFACT_FORMAT:
        raise ValueError(f"{path}: not a mixture-fit artifact")
    if doc.get("version") != ARTIFACT_VERSION:
        raise ValueError(f"{path}: unsupported artifact version {doc.get('version')}")
    return PosteriorSamples(
        draws_natural=np.array(doc["draws_natural"], dtype=np.float64),
        diagnostics=doc["diagnostics"],
        hyperpriors=Hyperpriors.from_dict(doc["hyperpriors"]),
        seed=doc["seed"],
    )
