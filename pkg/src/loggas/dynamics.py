"""Time integration of the singular-drift particle SDEs with hard constraint
preservation, and ergodic time-averaging of running costs.

Scheme: explicit Euler-Maruyama with adaptive rejection. A proposal that
breaks the state constraint (ordering in 1D, a pairwise-distance floor in 2D)
is retried on two half steps whose Brownian increments are the conditional
(bridge) split of the original one, so the increment law is preserved and the
trajectory stays a deterministic function of the seed.

Noise is drawn from a counter-based generator keyed by (seed, step), so
replicas and sub-steps are reproducible and independent trajectories can run
in parallel without shared state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Config1D, Config2D, GameParams

__all__ = [
    "SdeConfig",
    "Trajectory",
    "StepError",
    "step_rng",
    "drift_1d",
    "drift_2d",
    "step_dyson_1d",
    "step_coulomb_2d",
    "simulate",
    "ergodic_average",
]

COLLISION_FLOOR_2D = 1e-9


class StepError(RuntimeError):
    """Halving budget exhausted; carries the offending gap and time stamp."""

    def __init__(self, message, gap=None, time=None):
        super().__init__(message)
        self.gap = gap
        self.time = time


@dataclass(frozen=True)
class SdeConfig:
    dt: float
    horizon: float
    burn_in: float = 0.0
    max_halvings: int = 20
    seed: int = 0
    record_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not (self.horizon >= self.burn_in >= 0):
            raise ValueError("need horizon >= burn_in >= 0")
        if not 0 <= self.max_halvings <= 40:
            raise ValueError("max_halvings must be in [0, 40]")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    integrals: dict  # name -> accumulated integral at each recorded time
    burn_in: float
    horizon: float

    def integrals_json(self) -> str:
        return json.dumps(
            {k: v.tolist() for k, v in self.integrals.items()}
        )

    def write_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            first = self.states[0] if self.states else None
            if isinstance(first, Config2D):
                w.writerow(["t", "particle", "x", "y"])
                for t, s in zip(self.times, self.states):
                    for k, (x, y) in enumerate(s.points):
                        w.writerow([repr(float(t)), k + 1, repr(float(x)), repr(float(y))])
            else:
                w.writerow(["t", "particle", "x"])
                for t, s in zip(self.times, self.states):
                    for k, x in enumerate(s.points):
                        w.writerow([repr(float(t)), k + 1, repr(float(x))])


def step_rng(seed: int, step: int) -> np.random.Generator:
    """Counter-based stream for one time step."""
    key = np.array([np.uint64(seed), np.uint64(step)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _dv_1d(params: GameParams, x):
    if params.potential is None:
        return x
    return params.potential.dv(x)


def _grad_v_2d(params: GameParams, z):
    if params.potential is None:
        return z
    return params.potential.dv(z)


# scratch matrices reused across steps; a single trajectory is sequential,
# and parallel replicas live in separate processes, so this is safe
_SCRATCH_1D: dict = {}
_SCRATCH_2D: dict = {}


def drift_1d(x: np.ndarray, params: GameParams) -> np.ndarray:
    """(beta/2) * leave-one-out mean inverse gap - V'(x)/2, all particles."""
    n = x.size
    buf = _SCRATCH_1D.get(n)
    if buf is None:
        buf = _SCRATCH_1D[n] = np.empty((n, n))
    np.subtract(x[:, None], x[None, :], out=buf)
    np.fill_diagonal(buf, np.inf)
    np.reciprocal(buf, out=buf)
    h1 = buf.sum(axis=1)
    h1 *= params.beta / (2.0 * (n - 1))
    return h1 - _dv_1d(params, x) / 2.0


def drift_2d(z: np.ndarray, params: GameParams) -> np.ndarray:
    n = z.shape[0]
    bufs = _SCRATCH_2D.get(n)
    if bufs is None:
        bufs = _SCRATCH_2D[n] = (np.empty((n, n, 2)), np.empty((n, n)))
    d, r2 = bufs
    np.subtract(z[:, None, :], z[None, :, :], out=d)
    np.einsum("ijk,ijk->ij", d, d, out=r2)
    np.fill_diagonal(r2, np.inf)
    d /= r2[:, :, None]
    h1 = d.sum(axis=1)
    h1 *= params.beta / (2.0 * (n - 1))
    return h1 - _grad_v_2d(params, z) / 2.0


def _min_gap_1d(x: np.ndarray) -> float:
    return float(np.min(np.diff(x)))


def _min_dist_2d(z: np.ndarray) -> float:
    d = z[:, None, :] - z[None, :, :]
    r2 = (d ** 2).sum(axis=-1)
    np.fill_diagonal(r2, np.inf)
    return float(math.sqrt(r2.min()))


def _ordered(x: np.ndarray, prop: np.ndarray) -> bool:
    return bool(np.all(prop[1:] > prop[:-1]))


def _separated(z: np.ndarray, prop: np.ndarray) -> bool:
    return _min_dist_2d(prop) > COLLISION_FLOOR_2D


def _ordered_refine(x: np.ndarray, prop: np.ndarray) -> bool:
    # besides the ordering, never let the smallest gap shrink by more than
    # half within a single substep; running-cost integrands blow up like
    # 1/gap^2, so the quadrature resolution must track the stiff scale
    if not np.all(prop[1:] > prop[:-1]):
        return False
    return _min_gap_1d(prop) >= 0.5 * _min_gap_1d(x)


def _separated_refine(z: np.ndarray, prop: np.ndarray) -> bool:
    dmin = _min_dist_2d(prop)
    if dmin <= COLLISION_FLOOR_2D:
        return False
    return dmin >= 0.5 * _min_dist_2d(z)


def _advance(x, params, dt, dw, rng, depth, valid, drift, drift_override=None, leaves=None):
    """One adaptive step from x with Brownian increment dw over dt.

    On constraint violation (or a too-fast gap collapse) the increment is
    split by the conditional bridge dw1 = dw/2 + sqrt(dt)/2 * eta and the two
    halves are advanced recursively. Accepted substeps are appended to leaves
    as (state, dt) so running costs can be integrated at substep resolution.
    """
    dr = drift(x, params) if drift_override is None else drift_override(x, params)
    n = x.shape[0]
    prop = x + dr * dt + (params.sigma / math.sqrt(n - 1)) * dw
    if valid(x, prop):
        if leaves is not None:
            leaves.append((x, dt))
        return prop
    if depth <= 0:
        gap = _min_gap_1d(prop) if prop.ndim == 1 else _min_dist_2d(prop)
        raise StepError("halving budget exhausted", gap=gap)
    eta = rng.standard_normal(dw.shape)
    dw1 = 0.5 * dw + 0.5 * math.sqrt(dt) * eta
    dw2 = dw - dw1
    mid = _advance(
        x, params, dt / 2.0, dw1, rng, depth - 1, valid, drift, drift_override, leaves
    )
    return _advance(
        mid, params, dt / 2.0, dw2, rng, depth - 1, valid, drift, drift_override, leaves
    )


def step_dyson_1d(
    state: Config1D,
    params: GameParams,
    dt: float,
    noise: np.ndarray,
    rng: np.random.Generator | None = None,
    max_halvings: int = 20,
) -> Config1D:
    """One adaptive Euler-Maruyama step of the 1D interacting diffusion."""
    x = state.points
    noise = np.asarray(noise, dtype=float)
    if noise.shape != x.shape:
        raise ValueError("noise must have one standard normal per particle")
    if rng is None:
        rng = np.random.Generator(np.random.Philox(key=np.uint64(0)))
    out = _advance(
        x, params, dt, math.sqrt(dt) * noise, rng, max_halvings, _ordered, drift_1d
    )
    return Config1D(out)


def step_coulomb_2d(
    state: Config2D,
    params: GameParams,
    dt: float,
    noise: np.ndarray,
    rng: np.random.Generator | None = None,
    max_halvings: int = 20,
) -> Config2D:
    z = state.points
    noise = np.asarray(noise, dtype=float).reshape(z.shape)
    if rng is None:
        rng = np.random.Generator(np.random.Philox(key=np.uint64(0)))
    out = _advance(
        z, params, dt, math.sqrt(dt) * noise, rng, max_halvings, _separated, drift_2d
    )
    return Config2D(out)


def simulate(
    initial,
    params: GameParams,
    sde: SdeConfig,
    integrands: dict | None = None,
    drift_override=None,
) -> Trajectory:
    """Run the SDE to the horizon.

    integrands maps names to pure evaluators of the current configuration;
    each is accumulated by left-endpoint quadrature over (burn_in, horizon].
    Recording (states and accumulators) also starts after burn_in.
    drift_override, when given, replaces the equilibrium drift (used by the
    deviation experiments); it takes (points, params) and returns the drift.
    """
    integrands = integrands or {}
    two_d = isinstance(initial, Config2D)
    pts = initial.points.copy()
    valid_plain = _separated if two_d else _ordered
    valid_refine = _separated_refine if two_d else _ordered_refine
    drift = drift_2d if two_d else drift_1d

    n_steps = int(round(sde.horizon / sde.dt))
    burn_steps = int(round(sde.burn_in / sde.dt))
    times = []
    states = []
    acc = {name: 0.0 for name in integrands}
    series = {name: [] for name in integrands}

    wrap = Config2D if two_d else Config1D
    current = initial
    for step in range(n_steps):
        t_left = step * sde.dt
        rng = step_rng(sde.seed, step)
        noise = rng.standard_normal(pts.shape)
        leaves = [] if (integrands and step >= burn_steps) else None
        try:
            nxt = _advance(
                current.points,
                params,
                sde.dt,
                math.sqrt(sde.dt) * noise,
                rng,
                sde.max_halvings,
                valid_refine if leaves is not None else valid_plain,
                drift,
                drift_override,
                leaves,
            )
        except StepError as err:
            raise StepError(str(err), gap=err.gap, time=t_left + sde.dt) from None
        if leaves is not None:
            # left-endpoint quadrature on the accepted substeps, so the
            # resolution adapts together with the step size near collisions
            for name, fn in integrands.items():
                acc[name] += sum(fn(wrap(xs)) * h for xs, h in leaves)
        current = wrap(nxt)
        if step >= burn_steps and (step + 1 - burn_steps) % sde.record_stride == 0:
            times.append((step + 1) * sde.dt)
            states.append(current)
            for name in integrands:
                series[name].append(acc[name])

    return Trajectory(
        times=np.asarray(times),
        states=states,
        integrals={k: np.asarray(v) for k, v in series.items()},
        burn_in=sde.burn_in,
        horizon=sde.horizon,
    )


def ergodic_average(traj: Trajectory, name: str, n_batches: int = 20) -> dict:
    """Time average of a named accumulated integral over the post-burn-in
    window, with a batch-means standard error."""
    if name not in traj.integrals:
        raise KeyError(f"unknown integral {name!r}")
    acc = traj.integrals[name]
    if acc.size == 0:
        raise ValueError("empty recorded window")
    window = traj.horizon - traj.burn_in
    mean = float(acc[-1]) / window
    # batch means over the recorded accumulator
    edges = np.linspace(0, acc.size - 1, n_batches + 1).round().astype(int)
    edges = np.unique(edges)
    vals = np.concatenate([[0.0], acc[edges[1:]]])
    ts = np.concatenate([[traj.burn_in], traj.times[edges[1:]]])
    widths = np.diff(ts)
    ok = widths > 0
    batch_means = np.diff(vals)[ok] / widths[ok]
    k = batch_means.size
    se = float(batch_means.std(ddof=1) / math.sqrt(k)) if k > 1 else float("inf")
    return {"mean": mean, "std_error": se}
