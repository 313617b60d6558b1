"""Parameter spaces for the two-component Beta-Binomial mixture.

The model has five free parameters: Beta shapes (alpha, beta) for each of
the two latent policy classes, and the minority-class weight theta.  For
inference we work in a "natural" space (per-class mean mu, excess
concentration r, and theta) whose geometry keeps both Beta shapes >= 1:

    mu    = alpha / (alpha + beta)
    tau   = max(1/mu, 1/(1 - mu))      # concentration floor
    r     = alpha + beta - tau         # >= 0 on the valid domain
    alpha = mu * (r + tau),  beta = (1 - mu) * (r + tau)
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class MixtureParams:
    """Shape parameters of the two Beta components plus the mixing weight.

    Class 1 is the rare high-rate group, class 0 the majority.
    """

    alpha0: float
    beta0: float
    alpha1: float
    beta1: float
    theta: float

    def __post_init__(self) -> None:
        for name in ("alpha0", "beta0", "alpha1", "beta1"):
            v = getattr(self, name)
            if not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")


@dataclass(frozen=True)
class NaturalParams:
    """Mean/excess-concentration coordinates for the mixture."""

    mu0: float
    mu1: float
    r0: float
    r1: float
    theta: float

    def __post_init__(self) -> None:
        for name in ("mu0", "mu1", "theta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        for name in ("r0", "r1"):
            v = getattr(self, name)
            if v < 0:
                raise ValueError(f"{name} must be >= 0, got {v}")


def concentration_floor(mu: float) -> float:
    """Smallest total concentration keeping both Beta shapes >= 1 at mean mu."""
    return max(1.0 / mu, 1.0 / (1.0 - mu))


def to_natural(params: MixtureParams) -> NaturalParams:
    """Convert shape parameters to (mu, r, theta) coordinates.

    Only defined where min(alpha, beta) >= 1 per component, i.e. where the
    excess concentration r is non-negative.
    """
    out = {}
    for k, (a, b) in enumerate([(params.alpha0, params.beta0),
                                (params.alpha1, params.beta1)]):
        s = a + b
        mu = a / s
        r = s - concentration_floor(mu)
        if r < 0:
            raise ValueError(
                f"component {k} shapes ({a}, {b}) lie outside the natural "
                f"domain (excess concentration {r} < 0)")
        out[k] = (mu, r)
    return NaturalParams(mu0=out[0][0], mu1=out[1][0],
                         r0=out[0][1], r1=out[1][1], theta=params.theta)


def from_natural(nat: NaturalParams) -> MixtureParams:
    """Convert (mu, r, theta) back to Beta shape parameters."""
    shapes = []
    for mu, r in ((nat.mu0, nat.r0), (nat.mu1, nat.r1)):
        s = r + concentration_floor(mu)
        shapes.append((mu * s, (1.0 - mu) * s))
    return MixtureParams(alpha0=shapes[0][0], beta0=shapes[0][1],
                         alpha1=shapes[1][0], beta1=shapes[1][1],
                         theta=nat.theta)


@dataclass(frozen=True)
class Hyperpriors:
    """Prior hyperparameters over the natural mixture parameters.

    Beta priors (a, b) for mu0, mu1 and theta; Gamma priors (shape, rate)
    for the excess concentrations.  Defaults encode: majority rate low,
    minority rate high, minority class rare.  theta's prior is oriented so
    its mass sits near zero; pass theta=(30.0, 1.0) to flip it for
    comparison runs.
    """

    mu0: tuple[float, float] = (1.0, 3.0)
    mu1: tuple[float, float] = (4.0, 1.0)
    r0: tuple[float, float] = (4.0, 1.0)
    r1: tuple[float, float] = (8.0, 1.0)
    theta: tuple[float, float] = (1.0, 30.0)

    def __post_init__(self) -> None:
        for name in ("mu0", "mu1", "r0", "r1", "theta"):
            pair = getattr(self, name)
            if len(pair) != 2 or not all(v > 0 for v in pair):
                raise ValueError(f"{name} prior needs two positive values, got {pair}")

    def to_dict(self) -> dict:
        return {k: list(getattr(self, k)) for k in ("mu0", "mu1", "r0", "r1", "theta")}

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperpriors":
        return cls(**{k: tuple(v) for k, v in d.items()})
