"""Posterior-predictive class membership and the reviewer-facing score."""

from __future__ import annotations

import math

import numpy as np

from .likelihood import responsibility_over_draws

SCORE_MAX = 10.0
SCORE_AT_99 = 3.0        # a 99% posterior probability maps to a score of 3
_P99 = 0.99


def posterior_predictive(x: int, y: int, samples) -> float:
    """Mean responsibility of counts (x, y) over all posterior draws."""
    arr = samples.draw_array()
    if arr.shape[0] == 0:
        raise ValueError("no posterior draws")
    resp = responsibility_over_draws(
        x, y, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4])
    return float(resp.mean())


def _logit(p: float) -> float:
    return math.log(p) - math.log1p(-p)


def priority_score(p: float, anchor: float) -> float:
    """Map a posterior probability to the 0-10 display scale.

    Logit-linear: the anchor probability (no-evidence posterior) scores 0
    and p = 0.99 scores 3; clipped to [0, 10].
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    if not 0.0 < anchor < _P99:
        raise ValueError(f"anchor must lie in (0, 0.99), got {anchor}")
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return SCORE_MAX
    raw = SCORE_AT_99 * (_logit(p) - _logit(anchor)) / (_logit(_P99) - _logit(anchor))
    return min(max(raw, 0.0), SCORE_MAX)


def score_anchor(samples) -> float:
    """The no-evidence posterior probability: posterior mean of theta."""
    return posterior_predictive(0, 0, samples)


def score_table(samples, x_max: int, y_max: int | None = None) -> np.ndarray:
    """Score matrix indexed by (x, y); entries with y > x are NaN.

    Shape (x_max + 1, y_cap + 1) where y_cap = min(y_max, x_max).
    """
    y_cap = x_max if y_max is None else min(y_max, x_max)
    anchor = score_anchor(samples)
    table = np.full((x_max + 1, y_cap + 1), np.nan)
    for x in range(x_max + 1):
        for y in range(min(x, y_cap) + 1):
            table[x, y] = priority_score(posterior_predictive(x, y, samples), anchor)
    return table


def render_score_table_csv(table: np.ndarray) -> str:
    """Stable CSV rendering of a score table (regression fixture format)."""
    lines = ["x\\y," + ",".join(str(y) for y in range(table.shape[1]))]
    for x in range(table.shape[0]):
        cells = [f"{x}"]
        for y in range(table.shape[1]):
            v = table[x, y]
            cells.append("" if np.isnan(v) else f"{v:.6f}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
