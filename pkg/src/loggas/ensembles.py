"""Samplers for the invariant log-gas ensembles in one and two dimensions.

Both chains are Metropolis-adjusted Langevin (MALA) on the unnormalized log
density; the adjustment step keeps the stationary law exact, which matters
because downstream checks compare sampled statistics against exact limit
constants. Step sizes adapt toward a target acceptance during burn-in only,
so the kept samples form an honest Markov chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Config1D, Config2D, GameParams, spiral_sort

__all__ = [
    "ChainConfig",
    "ChainDiagnostics",
    "SamplerError",
    "log_density_1d",
    "log_density_2d",
    "grad_log_density_1d",
    "grad_log_density_2d",
    "mala_chain_1d",
    "mala_chain_2d",
    "ginibre_predicted_location",
]


class SamplerError(RuntimeError):
    pass


@dataclass(frozen=True)
class ChainConfig:
    step_size: float
    n_burn: int
    n_keep: int
    thin: int = 1
    seed: int = 0
    target_acceptance: float = 0.57

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.n_burn < 0 or self.n_keep < 1:
            raise ValueError("need n_burn >= 0 and n_keep >= 1")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not 0.0 < self.target_acceptance < 1.0:
            raise ValueError("target_acceptance must be in (0, 1)")


@dataclass(frozen=True)
class ChainDiagnostics:
    acceptance_rate: float
    iact_estimate: float
    ess: float
    step_size: float


def _v_dv_1d(params: GameParams):
    if params.potential is None:
        return (lambda x: 0.5 * x * x), (lambda x: x)
    return params.potential.v, params.potential.dv


def log_density_1d(config: Config1D, params: GameParams) -> float:
    """Unnormalized log density of the 1D ensemble:
    (beta/sigma^2) * sum_{k<l} log(x^l - x^k) - ((N-1)/sigma^2) * sum V(x^i).
    """
    x = config.points
    n = x.size
    v, _ = _v_dv_1d(params)
    iu = np.triu_indices(n, k=1)
    gaps = x[iu[1]] - x[iu[0]]
    s2 = params.sigma ** 2
    return float(
        (params.beta / s2) * np.log(gaps).sum() - ((n - 1) / s2) * v(x).sum()
    )


def grad_log_density_1d(x: np.ndarray, params: GameParams) -> np.ndarray:
    n = x.size
    _, dv = _v_dv_1d(params)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, np.inf)
    s2 = params.sigma ** 2
    return (params.beta / s2) * (1.0 / diff).sum(axis=1) - ((n - 1) / s2) * dv(x)


def log_density_2d(config: Config2D, params: GameParams) -> float:
    """Planar analog with V(z) = |z|^2 / 2."""
    if params.potential is not None:
        raise ValueError("2D sampler supports the quadratic potential only")
    z = config.points
    n = z.shape[0]
    d = z[:, None, :] - z[None, :, :]
    r2 = (d ** 2).sum(axis=-1)
    iu = np.triu_indices(n, k=1)
    s2 = params.sigma ** 2
    return float(
        (params.beta / s2) * 0.5 * np.log(r2[iu]).sum()
        - ((n - 1) / s2) * 0.5 * (z ** 2).sum()
    )


def grad_log_density_2d(z: np.ndarray, params: GameParams) -> np.ndarray:
    n = z.shape[0]
    d = z[:, None, :] - z[None, :, :]
    r2 = (d ** 2).sum(axis=-1)
    np.fill_diagonal(r2, np.inf)
    s2 = params.sigma ** 2
    return (params.beta / s2) * (d / r2[:, :, None]).sum(axis=1) - (
        (n - 1) / s2
    ) * z


def _initial_1d(params: GameParams) -> np.ndarray:
    from .equilibrium import semicircle, solve_one_cut

    if params.potential is None:
        mu = semicircle(params.beta)
    else:
        mu = solve_one_cut(params.potential, params.beta)
    n = params.n_players
    return np.array([mu.quantile((i - 0.5) / n) for i in range(1, n + 1)])


def _fibonacci_disk(count: int, r_lo: float, r_hi: float) -> np.ndarray:
    """Evenly scattered points on the annulus [r_lo, r_hi] (golden-angle layout)."""
    golden = math.pi * (3.0 - math.sqrt(5.0))
    k = np.arange(count)
    r = np.sqrt(r_lo ** 2 + (k + 0.5) / count * (r_hi ** 2 - r_lo ** 2))
    th = golden * k
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def _initial_2d(params: GameParams) -> np.ndarray:
    """Predicted spiral locations scaled to the equilibrium radius sqrt(beta),
    topped up with a golden-angle annulus for indices past the covered range."""
    n = params.n_players
    covered = int(math.isqrt(n)) ** 2
    scale = math.sqrt(params.beta)
    pts = np.array([ginibre_predicted_location(k, n) for k in range(1, covered + 1)])
    pts = scale * pts
    if covered < n:
        inner = (math.isqrt(n) - 1) / math.sqrt(n) * scale
        extra = _fibonacci_disk(n - covered, inner + 0.1 * scale, scale)
        pts = np.vstack([pts, extra])
    return pts


def _iact_initial_positive(series: np.ndarray) -> float:
    """Integrated autocorrelation time by the initial-positive-sequence rule."""
    x = np.asarray(series, dtype=float)
    m = x.size
    if m < 4:
        return 1.0
    x = x - x.mean()
    var = float(x @ x) / m
    if var == 0.0:
        return 1.0
    acf = np.correlate(x, x, mode="full")[m - 1 :] / (m * var)
    tau = 1.0
    k = 1
    while k + 1 < min(m, 2000):
        pair = acf[k] + acf[k + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        k += 2
    return max(tau, 1.0)


def _run_mala(x0, params, chain, log_pi, grad_log_pi, is_valid, wrap):
    rng = np.random.default_rng(chain.seed)
    x = np.array(x0, dtype=float)
    h = float(chain.step_size)
    lp = log_pi(x)
    g = grad_log_pi(x, params)

    n_total = chain.n_burn + chain.n_keep * chain.thin
    kept = []
    energies = np.empty(chain.n_keep)
    accepted_post = 0
    proposals_post = 0
    window_acc = 0
    window_n = 0

    for t in range(n_total):
        xi = rng.standard_normal(x.shape)
        prop = x + 0.5 * h * g + math.sqrt(h) * xi
        take = False
        if is_valid(prop):
            lp_p = log_pi(prop)
            g_p = grad_log_pi(prop, params)
            # asymmetric Gaussian proposal correction
            fwd = prop - x - 0.5 * h * g
            bwd = x - prop - 0.5 * h * g_p
            log_alpha = lp_p - lp + ((fwd ** 2).sum() - (bwd ** 2).sum()) / (2.0 * h)
            take = math.log(rng.uniform()) < log_alpha
        if take:
            x, lp, g = prop, lp_p, g_p
        if t < chain.n_burn:
            # Robbins-Monro on log h toward the target acceptance, frozen after
            gamma = (t + 1) ** -0.6
            h *= math.exp(gamma * ((1.0 if take else 0.0) - chain.target_acceptance))
        else:
            proposals_post += 1
            accepted_post += int(take)
            window_acc += int(take)
            window_n += 1
            if window_n == 10_000:
                if window_acc < 100:
                    raise SamplerError(
                        f"acceptance collapsed to {window_acc / window_n:.4f}"
                    )
                window_acc = 0
                window_n = 0
            j = t - chain.n_burn
            if (j + 1) % chain.thin == 0:
                idx = j // chain.thin
                kept.append(wrap(x.copy()))
                energies[idx] = lp

    rate = accepted_post / max(proposals_post, 1)
    tau = _iact_initial_positive(energies)
    diag = ChainDiagnostics(
        acceptance_rate=rate,
        iact_estimate=tau,
        ess=chain.n_keep / tau,
        step_size=h,
    )
    return {"samples": kept, "diag": diag}


def mala_chain_1d(params: GameParams, chain: ChainConfig) -> dict:
    """Sample the ordered 1D ensemble; proposals that break the ordering are
    rejected outright (the density vanishes on the boundary)."""

    def valid(x):
        return bool(np.all(x[1:] > x[:-1]))

    return _run_mala(
        _initial_1d(params),
        params,
        chain,
        lambda x: log_density_1d(Config1D(x), params),
        grad_log_density_1d,
        valid,
        Config1D,
    )


def mala_chain_2d(params: GameParams, chain: ChainConfig) -> dict:
    """Sample the planar ensemble; kept samples are spiral-sorted, which
    realizes the ordered ensemble since the density is symmetric."""

    def valid(z):
        d = z[:, None, :] - z[None, :, :]
        r2 = (d ** 2).sum(axis=-1)
        np.fill_diagonal(r2, np.inf)
        return bool(r2.min() > 0.0)

    def wrap(z):
        return spiral_sort(z)

    return _run_mala(
        _initial_2d(params),
        params,
        chain,
        lambda z: log_density_2d(Config2D(z), params),
        grad_log_density_2d,
        valid,
        wrap,
    )


def ginibre_predicted_location(k: int, n: int) -> np.ndarray:
    """Spiral slot k of n as a planar point: radius (ceil(sqrt(k))-1)/sqrt(n),
    angle 2*pi*(k - (ceil(sqrt(k))-1)^2) / (2*ceil(sqrt(k)) - 1).

    Only defined for k up to the last full shell, floor(sqrt(n))^2; the
    outermost partial shell has no predicted slots.
    """
    if not 1 <= k <= int(math.isqrt(n)) ** 2:
        raise ValueError(f"index {k} outside 1..floor(sqrt({n}))^2")
    s = math.isqrt(k)
    if s * s < k:
        s += 1  # ceil(sqrt(k))
    radius = (s - 1) / math.sqrt(n)
    angle = 2.0 * math.pi * (k - (s - 1) ** 2) / (2 * s - 1)
    return np.array([radius * math.cos(angle), radius * math.sin(angle)])
