"""Beta-Binomial mixture likelihood over per-policy trip counts."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import betaln, gammaln

from .params import MixtureParams


@dataclass(frozen=True)
class PolicyCounts:
    """Sufficient statistics for one policy in a window.

    x: total trips, y: trips the stage-one classifier flagged.
    """

    policy_id: str
    x: int
    y: int

    def __post_init__(self) -> None:
        if self.x < 0 or self.y < 0 or self.y > self.x:
            raise ValueError(
                f"counts must satisfy 0 <= y <= x, got x={self.x} y={self.y}")


class CountsTable:
    """Counts collapsed to unique (x, y) pairs with multiplicities.

    The likelihood only depends on counts through these sufficient
    statistics, so density and gradient evaluations scale with the number
    of distinct pairs rather than the number of policies.
    """

    def __init__(self, counts: Iterable[PolicyCounts]):
        pairs: dict[tuple[int, int], int] = {}
        n = 0
        for c in counts:
            pairs[(c.x, c.y)] = pairs.get((c.x, c.y), 0) + 1
            n += 1
        if n == 0:
            raise ValueError("counts must be non-empty")
        keys = sorted(pairs)
        self.x = np.array([k[0] for k in keys], dtype=np.float64)
        self.y = np.array([k[1] for k in keys], dtype=np.float64)
        self.w = np.array([pairs[k] for k in keys], dtype=np.float64)
        self.n_policies = n
        # binomial coefficient term, independent of the parameters
        self.log_choose = (gammaln(self.x + 1) - gammaln(self.y + 1)
                           - gammaln(self.x - self.y + 1))


def read_counts_csv(path: str) -> list[PolicyCounts]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {
                "policy_id", "x", "y"}.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected header policy_id,x,y")
        return [PolicyCounts(policy_id=row["policy_id"], x=int(row["x"]),
                             y=int(row["y"])) for row in reader]


def write_counts_csv(counts: Sequence[PolicyCounts], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy_id", "x", "y"])
        for c in counts:
            writer.writerow([c.policy_id, c.x, c.y])


def log_betabinomial(y, x, alpha: float, beta: float):
    """Log pmf of the Beta-Binomial: a Binomial whose rate is Beta-mixed.

    log[ C(x,y) * B(alpha+y, beta+x-y) / B(alpha,beta) ], broadcast over
    array inputs.
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if np.any(y < 0) or np.any(y > x):
        raise ValueError("require 0 <= y <= x")
    if not (alpha > 0 and beta > 0):
        raise ValueError("shape parameters must be positive")
    out = (gammaln(x + 1) - gammaln(y + 1) - gammaln(x - y + 1)
           + betaln(alpha + y, beta + x - y) - betaln(alpha, beta))
    return out if out.ndim else float(out)


def _mixture_log_terms(table: CountsTable, params: MixtureParams):
    """Per-unique-count log responsibilities: (log comp0, log comp1)."""
    lb0 = (table.log_choose
           + betaln(params.alpha0 + table.y, params.beta0 + table.x - table.y)
           - betaln(params.alpha0, params.beta0))
    lb1 = (table.log_choose
           + betaln(params.alpha1 + table.y, params.beta1 + table.x - table.y)
           - betaln(params.alpha1, params.beta1))
    with np.errstate(divide="ignore"):
        l0 = np.log1p(-params.theta) + lb0
        l1 = np.log(params.theta) + lb1
    return l0, l1


def log_likelihood(counts: Sequence[PolicyCounts] | CountsTable,
                   params: MixtureParams) -> float:
    """Total mixture log likelihood; the trip-count marginal p(x) is a
    parameter-free constant and is omitted."""
    table = counts if isinstance(counts, CountsTable) else CountsTable(counts)
    l0, l1 = _mixture_log_terms(table, params)
    return float(np.dot(table.w, np.logaddexp(l0, l1)))


def responsibility(x: int, y: int, params: MixtureParams) -> float:
    """Posterior probability that a policy with counts (x, y) is class 1."""
    table = CountsTable([PolicyCounts("_", x, y)])
    l0, l1 = _mixture_log_terms(table, params)
    if np.isneginf(l1[0]):
        return 0.0
    if np.isneginf(l0[0]):
        return 1.0
    return float(np.exp(l1[0] - np.logaddexp(l0[0], l1[0])))


def responsibility_over_draws(x: int, y: int,
                              alpha0: np.ndarray, beta0: np.ndarray,
                              alpha1: np.ndarray, beta1: np.ndarray,
                              theta: np.ndarray) -> np.ndarray:
    """Vectorized responsibility of (x, y) under many parameter draws."""
    lb0 = betaln(alpha0 + y, beta0 + x - y) - betaln(alpha0, beta0)
    lb1 = betaln(alpha1 + y, beta1 + x - y) - betaln(alpha1, beta1)
    with np.errstate(divide="ignore"):
        l0 = np.log1p(-theta) + lb0
        l1 = np.log(theta) + lb1
    return np.exp(l1 - np.logaddexp(l0, l1))
