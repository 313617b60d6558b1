"""Hamiltonian Monte Carlo: leapfrog integrator, dual-averaging step-size
adaptation, Metropolis correction, and chain diagnostics.

The sampler is generic over any target exposing ``target(z) -> (logp, grad)``
so tests can point it at closed-form densities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Target = Callable[[np.ndarray], tuple[float, np.ndarray]]


class FitDivergedError(RuntimeError):
    """Raised when too many post-warmup trajectories diverge."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class HmcConfig:
    chains: int = 4
    warmup: int = 1000
    draws_per_chain: int = 1250
    leapfrog_steps: int = 32
    target_accept: float = 0.8
    seed: int = 0
    max_divergence_rate: float = 0.10
    max_init_retries: int = 100
    divergence_energy: float = 1000.0   # |Delta H| beyond this is a divergence


@dataclass
class ChainStats:
    accept_rate: float
    divergences: int
    step_size: float


@dataclass
class HmcResult:
    draws: np.ndarray                 # (chains, draws_per_chain, dim)
    chain_stats: list[ChainStats]
    rhat: np.ndarray                  # per dimension
    ess: np.ndarray                   # per dimension
    seed: int = 0

    @property
    def pooled(self) -> np.ndarray:
        c, n, d = self.draws.shape
        return self.draws.reshape(c * n, d)

    def summary(self) -> dict:
        return {
            "chains": len(self.chain_stats),
            "draws": int(self.draws.shape[0] * self.draws.shape[1]),
            "accept_rates": [s.accept_rate for s in self.chain_stats],
            "divergences": [s.divergences for s in self.chain_stats],
            "step_sizes": [s.step_size for s in self.chain_stats],
            "rhat": self.rhat.tolist(),
            "ess": self.ess.tolist(),
            "seed": self.seed,
        }


def leapfrog(z: np.ndarray, p: np.ndarray, step_size: float, n_steps: int,
             target: Target) -> tuple[np.ndarray, np.ndarray, float]:
    """Integrate Hamilton's equations for n_steps; returns (z, p, logp)."""
    _, grad = target(z)
    z = z.copy()
    p = p + 0.5 * step_size * grad
    for i in range(n_steps):
        z = z + step_size * p
        logp, grad = target(z)
        if i < n_steps - 1:
            p = p + step_size * grad
    p = p + 0.5 * step_size * grad
    return z, p, logp


def _accept_prob(target: Target, z0: np.ndarray, logp0: float,
                 step_size: float, n_steps: int,
                 rng: np.random.Generator,
                 divergence_energy: float):
    """One proposal; returns (z_new, logp_new, accept_prob, diverged)."""
    p0 = rng.standard_normal(z0.size)
    h0 = logp0 - 0.5 * float(p0 @ p0)
    z1, p1, logp1 = leapfrog(z0, p0, step_size, n_steps, target)
    h1 = logp1 - 0.5 * float(p1 @ p1)
    delta = h1 - h0
    if not np.isfinite(delta) or delta < -divergence_energy:
        return z0, logp0, 0.0, True
    return z1, logp1, min(1.0, float(np.exp(min(delta, 0.0)))), False


def _find_initial_step_size(target: Target, z0: np.ndarray,
                            rng: np.random.Generator) -> float:
    """Double/halve until the one-step acceptance probability crosses 1/2."""
    eps = 1.0
    logp0, _ = target(z0)
    p0 = rng.standard_normal(z0.size)

    def log_ratio(e: float) -> float:
        z1, p1, logp1 = leapfrog(z0, p0, e, 1, target)
        h0 = logp0 - 0.5 * float(p0 @ p0)
        h1 = logp1 - 0.5 * float(p1 @ p1)
        return h1 - h0 if np.isfinite(h1) else -np.inf

    direction = 1.0 if log_ratio(eps) > np.log(0.5) else -1.0
    for _ in range(50):
        eps_next = eps * (2.0 ** direction)
        if direction > 0 and log_ratio(eps_next) <= np.log(0.5):
            break
        if direction < 0 and log_ratio(eps_next) > np.log(0.5):
            eps = eps_next
            break
        eps = eps_next
        if eps < 1e-10 or eps > 1e6:
            break
    return eps


def _run_chain(target: Target, z0: np.ndarray, cfg: HmcConfig,
               rng: np.random.Generator) -> tuple[np.ndarray, ChainStats]:
    dim = z0.size
    z = z0.copy()
    logp, _ = target(z)

    eps = _find_initial_step_size(target, z, rng)
    # dual averaging (shrinks towards mu0; standard constants)
    mu_da = np.log(10.0 * eps)
    log_eps_bar = 0.0
    h_bar = 0.0
    gamma, t0, kappa = 0.05, 10.0, 0.75

    for m in range(1, cfg.warmup + 1):
        z_new, logp_new, a_prob, diverged = _accept_prob(
            target, z, logp, eps, cfg.leapfrog_steps, rng,
            cfg.divergence_energy)
        if not diverged and rng.random() < a_prob:
            z, logp = z_new, logp_new
        frac = 1.0 / (m + t0)
        h_bar = (1.0 - frac) * h_bar + frac * (cfg.target_accept - a_prob)
        log_eps = mu_da - np.sqrt(m) / gamma * h_bar
        eta = m ** (-kappa)
        log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar
        eps = float(np.exp(log_eps))
    eps = float(np.exp(log_eps_bar))

    draws = np.empty((cfg.draws_per_chain, dim))
    accepted = 0
    divergences = 0
    for i in range(cfg.draws_per_chain):
        z_new, logp_new, a_prob, diverged = _accept_prob(
            target, z, logp, eps, cfg.leapfrog_steps, rng,
            cfg.divergence_energy)
        if diverged:
            divergences += 1
        elif rng.random() < a_prob:
            z, logp = z_new, logp_new
            accepted += 1
        draws[i] = z
    stats = ChainStats(accept_rate=accepted / cfg.draws_per_chain,
                       divergences=divergences, step_size=eps)
    return draws, stats


def sample(target: Target, init: Callable[[np.random.Generator], np.ndarray],
           cfg: HmcConfig) -> HmcResult:
    """Run ``cfg.chains`` independent chains and pool diagnostics.

    ``init`` draws a starting point; it is retried (up to
    ``max_init_retries`` times per chain) until the density is finite.
    Chains use independent child streams of the master seed, so serial and
    parallel execution orders agree.
    """
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.chains)
    all_draws = []
    all_stats = []
    for c in range(cfg.chains):
        rng = np.random.default_rng(streams[c])
        z0 = None
        for _ in range(cfg.max_init_retries):
            cand = init(rng)
            logp, _ = target(cand)
            if np.isfinite(logp):
                z0 = cand
                break
        if z0 is None:
            raise RuntimeError(
                f"no finite-density initial point found in "
                f"{cfg.max_init_retries} attempts (chain {c})")
        draws, stats = _run_chain(target, z0, cfg, rng)
        all_draws.append(draws)
        all_stats.append(stats)

    stacked = np.stack(all_draws)          # (chains, n, dim)
    result = HmcResult(draws=stacked, chain_stats=all_stats,
                       rhat=split_rhat(stacked), ess=effective_sample_size(stacked),
                       seed=cfg.seed)

    total = cfg.chains * cfg.draws_per_chain
    div_rate = sum(s.divergences for s in all_stats) / total
    if div_rate > cfg.max_divergence_rate:
        raise FitDivergedError(
            f"divergence rate {div_rate:.1%} exceeds "
            f"{cfg.max_divergence_rate:.0%}", diagnostics=result.summary())
    return result


def split_rhat(draws: np.ndarray) -> np.ndarray:
    """Split-R-hat per dimension for draws shaped (chains, n, dim).

    Each chain is halved, giving 2*chains sequences; R-hat compares
    between- to within-sequence variance.
    """
    c, n, d = draws.shape
    half = n // 2
    seqs = np.concatenate([draws[:, :half, :], draws[:, half:2 * half, :]])
    m, n2, _ = seqs.shape
    means = seqs.mean(axis=1)                        # (m, d)
    variances = seqs.var(axis=1, ddof=1)             # (m, d)
    w = variances.mean(axis=0)
    b = n2 * means.var(axis=0, ddof=1)
    var_plus = (n2 - 1) / n2 * w + b / n2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sqrt(var_plus / w)
    return np.where(w > 0, out, 1.0)


def effective_sample_size(draws: np.ndarray) -> np.ndarray:
    """Multi-chain ESS per dimension via Geyer's initial monotone sequence."""
    c, n, d = draws.shape
    out = np.empty(d)
    for j in range(d):
        out[j] = _ess_single(draws[:, :, j])
    return out


def _ess_single(chains: np.ndarray) -> float:
    c, n = chains.shape
    if n < 4:
        return float(c * n)
    means = chains.mean(axis=1, keepdims=True)
    centered = chains - means
    # per-chain autocovariance via FFT
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centered, size, axis=1)
    acov = np.fft.irfft(f * np.conj(f), size, axis=1)[:, :n].real / n
    w = chains.var(axis=1, ddof=1).mean()
    b = n * chains.mean(axis=1).var(ddof=0) if c > 1 else 0.0
    var_plus = (n - 1) / n * w + (b / n if c > 1 else 0.0)
    if var_plus <= 0:
        return float(c * n)
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # Geyer: sum consecutive pairs while positive and non-increasing
    tau = 0.0
    prev_pair = np.inf
    t = 1
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair < 0:
            break
        pair = min(pair, prev_pair)
        tau += pair
        prev_pair = pair
        t += 2
    ess = c * n / (1.0 + 2.0 * tau)
    return float(min(ess, c * n))
