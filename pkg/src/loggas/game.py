"""Cost functions, ergodic constants, the closed-vs-open-loop comparison
grid, Monte Carlo cost and deviation experiments, and the epsilon-Nash gap
estimator for the planar game."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .core import Config1D, Config2D, GameParams, inv_sq_circumdiameter, pair_sums_1d, pair_sums_2d
from .dynamics import SdeConfig, Trajectory, drift_1d, ergodic_average, simulate

__all__ = [
    "state_cost_1d",
    "running_cost_1d",
    "global_cost_1d",
    "state_cost_2d",
    "global_cost_2d",
    "beta_roots",
    "ergodic_constants",
    "avg_open_cost",
    "LoopComparison",
    "build_loop_comparison",
    "mc_player_cost",
    "deviation_experiment",
    "epsilon_nash_2d",
]


def state_cost_1d(config: Config1D, i: int, params: GameParams) -> float:
    ps = pair_sums_1d(config, i)
    n = len(config)
    return config.points[i - 1] ** 2 / 8.0 + params.c2 * ps.h2 / (n - 1)


def running_cost_1d(config: Config1D, i: int, control: float, params: GameParams) -> float:
    return state_cost_1d(config, i, params) + 0.5 * control ** 2


def global_cost_1d(config: Config1D, params: GameParams) -> float:
    n = len(config)
    x = config.points
    h2_total = sum(pair_sums_1d(config, i).h2 for i in range(1, n + 1))
    return float(x @ x) / 8.0 + (params.c2 / 2.0) * h2_total / (n - 1)


def _circ_double_sum(z: np.ndarray, i: int) -> float:
    """sum over ordered opponent pairs (j, k) of 2/D^2(z^i - z^j, z^i - z^k)."""
    d = np.delete(z[i - 1][None, :] - z, i - 1, axis=0)
    a2 = (d ** 2).sum(axis=1)
    cross = np.outer(d[:, 0], d[:, 1]) - np.outer(d[:, 1], d[:, 0])
    c2 = a2[:, None] + a2[None, :] - 2.0 * (d @ d.T)
    np.fill_diagonal(c2, np.inf)
    return float((2.0 * cross ** 2 / (a2[:, None] * a2[None, :] * c2)).sum())


def state_cost_2d(config: Config2D, i: int, params: GameParams) -> float:
    z = config.points
    n = z.shape[0]
    ps = pair_sums_2d(config, i)
    circ = _circ_double_sum(z, i) / (n - 1) ** 2
    zi = z[i - 1]
    return float(zi @ zi) / 8.0 + params.c1 * circ + params.c2 * ps.h2 / (n - 1)


def global_cost_2d(config: Config2D, params: GameParams) -> float:
    z = config.points
    n = z.shape[0]
    total = float((z ** 2).sum()) / 8.0
    for i in range(1, n + 1):
        ps = pair_sums_2d(config, i)
        total += (params.c1 / 3.0) * _circ_double_sum(z, i) / (n - 1) ** 2
        total += (params.c2 / 2.0) * ps.h2 / (n - 1)
    return total


def beta_roots(c2: float, sigma: float) -> dict:
    """Larger roots of the coefficient relations tying c2 to the repulsion.

    closed solves c2 = b*(3b/2 - 2*sigma^2)/4, open solves
    c2 = b*(b - 2*sigma^2)/4; NaN where the discriminant goes negative.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    s2 = sigma ** 2
    disc_c = s2 ** 2 + 6.0 * c2
    disc_o = s2 ** 2 + 4.0 * c2
    return {
        "closed": (2.0 / 3.0) * (s2 + math.sqrt(disc_c)) if disc_c >= 0 else float("nan"),
        "open": s2 + math.sqrt(disc_o) if disc_o >= 0 else float("nan"),
    }


def ergodic_constants(params: GameParams, model: str) -> float:
    b, s, n = params.beta, params.sigma, params.n_players
    if model == "closed1d":
        return b / 4.0 + s ** 2 / (4.0 * (n - 1))
    if model == "open1d":
        return b / 8.0 + s ** 2 / (4.0 * (n - 1))
    if model == "closed2d":
        return b / 4.0 + s ** 2 / (2.0 * (n - 1))
    if model == "open2d":
        return b / 8.0 + s ** 2 / (2.0 * (n - 1))
    raise ValueError(f"unknown model {model!r}")


def avg_open_cost(c2: float, sigma: float, n: int) -> float:
    """Large-N approximation of the average per-player cost at the open-loop
    root: the ergodic constant plus the singular-cost correction."""
    b = beta_roots(c2, sigma)["open"]
    if not b > sigma ** 2:
        raise ValueError("open root must exceed sigma^2")
    lam = b / 8.0 + sigma ** 2 / (4.0 * (n - 1))
    return lam + c2 / (4.0 * (b - sigma ** 2))


@dataclass
class LoopComparison:
    c2_grid: np.ndarray
    beta_closed: np.ndarray
    beta_open: np.ndarray
    beta_open_2c2: np.ndarray
    lambda_closed_avg: np.ndarray
    lambda_open_avg: np.ndarray
    lambda_open_matched: np.ndarray
    semicircle_radii: np.ndarray  # (len, 2): closed radius, open radius
    sigma: float
    n_players: int


def build_loop_comparison(c2_grid, sigma: float, n_players: int) -> LoopComparison:
    c2_grid = np.asarray(c2_grid, dtype=float)
    bc = np.empty_like(c2_grid)
    bo = np.empty_like(c2_grid)
    bo2 = np.empty_like(c2_grid)
    lc = np.empty_like(c2_grid)
    lo = np.empty_like(c2_grid)
    lom = np.empty_like(c2_grid)
    for k, c2 in enumerate(c2_grid):
        roots = beta_roots(c2, sigma)
        bc[k] = roots["closed"]
        bo[k] = roots["open"]
        bo2[k] = beta_roots(2.0 * c2, sigma)["open"]
        lc[k] = (
            bc[k] / 4.0 + sigma ** 2 / (4.0 * (n_players - 1))
            if np.isfinite(bc[k])
            else float("nan")
        )
        try:
            lo[k] = avg_open_cost(c2, sigma, n_players)
        except ValueError:
            lo[k] = float("nan")
        lom[k] = (
            bo2[k] / 8.0 + sigma ** 2 / (4.0 * (n_players - 1))
            if np.isfinite(bo2[k])
            else float("nan")
        )
    radii = np.column_stack([np.sqrt(2.0 * bc), np.sqrt(2.0 * bo)])
    return LoopComparison(
        c2_grid=c2_grid,
        beta_closed=bc,
        beta_open=bo,
        beta_open_2c2=bo2,
        lambda_closed_avg=lc,
        lambda_open_avg=lo,
        lambda_open_matched=lom,
        semicircle_radii=radii,
        sigma=sigma,
        n_players=n_players,
    )


def _fmt(v) -> str:
    return repr(float(v))


def write_loop_comparison_csvs(cmp: LoopComparison, outdir, q_grid=None, x_grid=None) -> list:
    """Emit the four comparison panels as CSV files; returns the paths."""
    from .equilibrium import limit_singular_stat, semicircle

    os.makedirs(outdir, exist_ok=True)
    paths = []

    p = os.path.join(outdir, "panel1_roots.csv")
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["c2", "beta_closed", "beta_open", "beta_open_2c2"])
        for row in zip(cmp.c2_grid, cmp.beta_closed, cmp.beta_open, cmp.beta_open_2c2):
            w.writerow([_fmt(v) for v in row])
    paths.append(p)

    p = os.path.join(outdir, "panel2_average_costs.csv")
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["c2", "lambda_closed", "lambda_open_avg", "lambda_open_matched"])
        for row in zip(cmp.c2_grid, cmp.lambda_closed_avg, cmp.lambda_open_avg, cmp.lambda_open_matched):
            w.writerow([_fmt(v) for v in row])
    paths.append(p)

    # per-player cost by equilibrium location at c2 = 0
    s2 = cmp.sigma ** 2
    b_c = beta_roots(0.0, cmp.sigma)["closed"]
    b_o = beta_roots(0.0, cmp.sigma)["open"]
    mu_o = semicircle(b_o)
    if q_grid is None:
        q_grid = np.linspace(0.02, 0.98, 49)
    p = os.path.join(outdir, "panel3_cost_by_location.csv")
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "gamma_q", "cost_closed", "cost_open"])
        for q in q_grid:
            g = mu_o.quantile(float(q))
            m = mu_o.density(g)
            control = math.pi ** 2 * b_o ** 2 * s2 / (24.0 * (b_o - s2)) * m ** 2
            cost_open = control + g ** 2 / 8.0
            w.writerow([_fmt(q), _fmt(g), _fmt(b_c / 4.0), _fmt(cost_open)])
    paths.append(p)

    mu_c = semicircle(b_c)
    if x_grid is None:
        x_grid = np.linspace(-math.sqrt(2.0 * b_o), math.sqrt(2.0 * b_o), 201)
    p = os.path.join(outdir, "panel4_densities.csv")
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "m_closed", "m_open"])
        for x in x_grid:
            w.writerow([_fmt(x), _fmt(mu_c.density(float(x))), _fmt(mu_o.density(float(x)))])
    paths.append(p)
    return paths


def _equilibrium_initial_1d(params: GameParams) -> Config1D:
    from .equilibrium import semicircle, solve_one_cut

    if params.potential is None:
        mu = semicircle(params.beta)
    else:
        mu = solve_one_cut(params.potential, params.beta)
    n = params.n_players
    return Config1D([mu.quantile((i - 0.5) / n) for i in range(1, n + 1)])


def mc_player_cost(params: GameParams, model: str, sde: SdeConfig, i=None) -> dict:
    """Time-averaged running cost along the equilibrium dynamics.

    model "closed1d" with an index i gives that player's cost; "open1d"
    gives the global per-player average (i is ignored). The control along
    the equilibrium path is the feedback drift itself.
    """
    initial = _equilibrium_initial_1d(params)

    if model == "closed1d":
        if i is None:
            raise ValueError("closed1d needs a player index")

        def integrand(cfg):
            a = drift_1d(cfg.points, params)[i - 1]
            return state_cost_1d(cfg, i, params) + 0.5 * a ** 2

    elif model == "open1d":

        def integrand(cfg):
            a = drift_1d(cfg.points, params)
            return (global_cost_1d(cfg, params) + 0.5 * float(a @ a)) / params.n_players

    else:
        raise ValueError(f"unsupported model {model!r}")

    traj = simulate(initial, params, sde, integrands={"cost": integrand})
    return ergodic_average(traj, "cost")


def _perturbed_drift(params: GameParams, i: int, perturbation):
    """Feedback families for deviation probes: an additive constant, a
    scaling of the player's own drift, or a shifted own repulsion."""
    kind, amount = perturbation

    def drift(x, p):
        base = drift_1d(x, p)
        if kind == "add":
            base[i - 1] += amount
        elif kind == "scale":
            base[i - 1] *= amount
        elif kind == "beta_shift":
            shifted = GameParams(
                n_players=p.n_players,
                beta=p.beta + amount,
                sigma=p.sigma,
                c1=p.c1,
                c2=p.c2,
                potential=p.potential,
            )
            base[i - 1] = drift_1d(x, shifted)[i - 1]
        else:
            raise ValueError(f"unknown perturbation {kind!r}")
        return base

    return drift


def deviation_experiment(
    params: GameParams, model: str, sde: SdeConfig, i: int, perturbation
) -> dict:
    """Paired (common random numbers) estimate of the cost change when player
    i deviates from the equilibrium feedback."""
    if model != "closed1d":
        raise ValueError("deviation probes implemented for the 1D closed loop")
    initial = _equilibrium_initial_1d(params)
    dev_drift = _perturbed_drift(params, i, perturbation)

    def cost_base(cfg):
        a = drift_1d(cfg.points, params)[i - 1]
        return state_cost_1d(cfg, i, params) + 0.5 * a ** 2

    def cost_dev(cfg):
        a = dev_drift(cfg.points, params)[i - 1]
        return state_cost_1d(cfg, i, params) + 0.5 * a ** 2

    base = simulate(initial, params, sde, integrands={"cost": cost_base})
    dev = simulate(
        initial, params, sde, integrands={"cost": cost_dev}, drift_override=dev_drift
    )
    window = sde.horizon - sde.burn_in
    delta = float(dev.integrals["cost"][-1] - base.integrals["cost"][-1]) / window

    # paired batch means on the accumulator difference
    diff = dev.integrals["cost"] - base.integrals["cost"]
    n_batches = 20
    edges = np.unique(np.linspace(0, diff.size - 1, n_batches + 1).round().astype(int))
    vals = np.concatenate([[0.0], diff[edges[1:]]])
    ts = np.concatenate([[sde.burn_in], base.times[edges[1:]]])
    widths = np.diff(ts)
    ok = widths > 0
    bm = np.diff(vals)[ok] / widths[ok]
    se = float(bm.std(ddof=1) / math.sqrt(bm.size)) if bm.size > 1 else float("inf")
    return {"cost_delta": delta, "std_error": se}


def epsilon_nash_2d(params: GameParams, samples, i=None) -> float:
    """Deviation bound for the planar dynamics used off their exact
    coefficient line: (c2 - 3*beta^2/8) times the sampled mean of the
    inverse-squared-gap statistic at a bulk index."""
    excess = params.c2 - 3.0 * params.beta ** 2 / 8.0
    if excess < 0:
        raise ValueError("need c2 >= 3*beta^2/8")
    if not samples:
        raise ValueError("empty sample list")
    n = len(samples[0])
    if i is None:
        i = (n + 1) // 2
    stat = np.mean([pair_sums_2d(s, i).h2 / (n - 1) for s in samples])
    return float(excess * stat)
