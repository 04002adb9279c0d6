"""Command-line front end: TOML-configured, seed-deterministic experiment
runs that emit CSV tables, JSON diagnostics, and a run manifest.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 verification-tolerance failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import time

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from . import __version__
from .core import (
    Config1D,
    Config2D,
    GameParams,
    inv_sq_circumdiameter,
    spiral_sort,
)
from .dynamics import SdeConfig, StepError, simulate, ergodic_average
from .ensembles import ChainConfig, SamplerError, ginibre_predicted_location, mala_chain_1d, mala_chain_2d
from .equilibrium import QuadratureError, SolverError
from .game import (
    build_loop_comparison,
    beta_roots,
    drift_1d,
    global_cost_1d,
    mc_player_cost,
    state_cost_1d,
    write_loop_comparison_csvs,
)
from .nash import identity_suite, residual_hjb_1d, residual_hjb_2d, residual_nash_1d, residual_nash_2d

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFY = 4


class ConfigError(ValueError):
    pass


_KNOWN = {
    "": {"command", "outdir", "seed", "workers", "dim", "count"},
    "game": {"n", "beta", "sigma", "c1", "c2"},
    "sde": {"dt", "horizon", "burn_in", "record_stride", "max_halvings"},
    "chain": {"step_size", "n_burn", "n_keep", "thin", "target_acceptance"},
    "grid": {"c2_min", "c2_max", "c2_points", "n_values", "q", "theta", "estimator"},
    "relax": {"snapshots", "player", "overlay_neighbors"},
    "simulate": {"player"},
}


def _check_keys(table: dict, section: str):
    known = _KNOWN.get(section)
    if known is None:
        raise ConfigError(f"unknown config section {section!r}")
    for key, val in table.items():
        if isinstance(val, dict):
            _check_keys(val, key)
        elif key not in known:
            where = section or "top level"
            raise ConfigError(f"unknown config key {key!r} in {where}")


def parse_config(path=None, overrides=None) -> dict:
    cfg = {}
    if path is not None:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    _check_keys(cfg, "")
    for dotted, value in (overrides or {}).items():
        parts = dotted.split(".")
        node = cfg
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    _check_keys(cfg, "")
    return cfg


def _game_params(cfg: dict, auto_c2: str | None = None) -> GameParams:
    g = cfg.get("game", {})
    if "n" not in g or "beta" not in g:
        raise ConfigError("config section [game] needs at least n and beta")
    beta = float(g["beta"])
    sigma = float(g.get("sigma", 1.0))
    c2 = g.get("c2")
    if c2 is None and auto_c2 == "closed1d":
        c2 = beta * (1.5 * beta - 2.0 * sigma ** 2) / 4.0
    try:
        return GameParams(
            n_players=int(g["n"]),
            beta=beta,
            sigma=sigma,
            c1=float(g.get("c1", 0.0)),
            c2=float(c2 if c2 is not None else 0.0),
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None


def _sde_config(cfg: dict, seed: int) -> SdeConfig:
    s = cfg.get("sde", {})
    try:
        return SdeConfig(
            dt=float(s.get("dt", 0.002)),
            horizon=float(s.get("horizon", 10.0)),
            burn_in=float(s.get("burn_in", 0.0)),
            max_halvings=int(s.get("max_halvings", 20)),
            seed=seed,
            record_stride=int(s.get("record_stride", 1)),
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None


def _chain_config(cfg: dict, seed: int) -> ChainConfig:
    c = cfg.get("chain", {})
    try:
        return ChainConfig(
            step_size=float(c.get("step_size", 0.01)),
            n_burn=int(c.get("n_burn", 2000)),
            n_keep=int(c.get("n_keep", 400)),
            thin=int(c.get("thin", 5)),
            seed=seed,
            target_acceptance=float(c.get("target_acceptance", 0.57)),
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None


def _write_manifest(outdir, cfg, seed, t0):
    manifest = {
        "config": cfg,
        "seed": seed,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "package": __version__,
        },
        "wall_time_s": time.time() - t0,
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)


def _random_config_1d(rng, n) -> Config1D:
    # reject ill-conditioned draws: the identities are exact but lose
    # floating-point relative accuracy when two points nearly coincide
    x = np.sort(rng.normal(scale=2.0, size=n))
    gaps = np.maximum(np.diff(x), 5e-2)
    return Config1D(np.concatenate([[x[0]], x[0] + np.cumsum(gaps)]))


def _random_config_2d(rng, n) -> Config2D:
    while True:
        z = rng.normal(scale=2.0, size=(n, 2))
        d2 = ((z[:, None, :] - z[None, :, :]) ** 2).sum(axis=-1)
        np.fill_diagonal(d2, np.inf)
        if d2.min() > 1e-4:
            return Config2D(z)


def cmd_verify_identities(cfg, outdir, seed) -> int:
    rng = np.random.default_rng(seed)
    count = int(cfg.get("count", 200))
    worst = {}
    for _ in range(count):
        n = int(rng.integers(3, 26))
        for conf in (_random_config_1d(rng, n), _random_config_2d(rng, n)):
            for key, val in identity_suite(conf).items():
                worst[key] = max(worst.get(key, 0.0), float(val))
    report = {"max_relative_errors": worst, "configs": count, "tolerance": 1e-12}
    with open(os.path.join(outdir, "identities.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    print(json.dumps(report))
    return EXIT_OK if max(worst.values()) <= 1e-12 else EXIT_VERIFY


def cmd_verify_nash(cfg, outdir, seed) -> int:
    rng = np.random.default_rng(seed)
    count = int(cfg.get("count", 200))
    g = cfg.get("game", {})
    beta = float(g.get("beta", 2.0))
    sigma = float(g.get("sigma", 1.0))
    n = int(g.get("n", 8))
    suites = {
        "nash_1d": GameParams(n, beta, sigma, c2=beta * (1.5 * beta - 2 * sigma ** 2) / 4),
        "hjb_1d": GameParams(n, beta, sigma, c2=beta * (beta - 2 * sigma ** 2) / 4),
        "nash_2d": GameParams(n, beta, sigma, c1=beta ** 2 / 8, c2=3 * beta ** 2 / 8),
        "hjb_2d": GameParams(n, beta, sigma, c1=beta ** 2 / 8, c2=beta ** 2 / 4),
    }
    worst = {k: 0.0 for k in suites}
    for _ in range(count):
        x = _random_config_1d(rng, n)
        z = _random_config_2d(rng, n)
        for i in range(1, n + 1):
            worst["nash_1d"] = max(worst["nash_1d"], residual_nash_1d(x, i, suites["nash_1d"]).relative)
            worst["nash_2d"] = max(worst["nash_2d"], residual_nash_2d(z, i, suites["nash_2d"]).relative)
        worst["hjb_1d"] = max(worst["hjb_1d"], residual_hjb_1d(x, suites["hjb_1d"]).relative)
        worst["hjb_2d"] = max(worst["hjb_2d"], residual_hjb_2d(z, suites["hjb_2d"]).relative)
    echo = {k: {"beta": p.beta, "sigma": p.sigma, "c1": p.c1, "c2": p.c2} for k, p in suites.items()}
    report = {"max_relative_residuals": worst, "coefficients": echo, "configs": count, "tolerance": 1e-10}
    with open(os.path.join(outdir, "nash_residuals.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    print(json.dumps(report))
    return EXIT_OK if max(worst.values()) <= 1e-10 else EXIT_VERIFY


def cmd_simulate(cfg, outdir, seed) -> int:
    params = _game_params(cfg, auto_c2="closed1d")
    sde = _sde_config(cfg, seed)
    dim = int(cfg.get("dim", 1))
    player = int(cfg.get("simulate", {}).get("player", (params.n_players + 1) // 2))
    if dim == 1:
        from .game import _equilibrium_initial_1d

        initial = _equilibrium_initial_1d(params)

        def cost(c):
            a = drift_1d(c.points, params)[player - 1]
            return state_cost_1d(c, player, params) + 0.5 * a ** 2

        traj = simulate(initial, params, sde, integrands={"cost": cost})
        avg = ergodic_average(traj, "cost")
    else:
        from .ensembles import _initial_2d

        initial = Config2D(_initial_2d(params))
        traj = simulate(initial, params, sde)
        avg = None
    traj.write_csv(os.path.join(outdir, "trajectory.csv"))
    with open(os.path.join(outdir, "integrals.json"), "w") as fh:
        fh.write(traj.integrals_json())
    if avg is not None:
        with open(os.path.join(outdir, "ergodic_cost.json"), "w") as fh:
            json.dump(avg, fh, indent=2)
        print(json.dumps(avg))
    return EXIT_OK


def cmd_sample(cfg, outdir, seed) -> int:
    params = _game_params(cfg)
    chain = _chain_config(cfg, seed)
    dim = int(cfg.get("dim", 1))
    out = mala_chain_1d(params, chain) if dim == 1 else mala_chain_2d(params, chain)
    path = os.path.join(outdir, "samples.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if dim == 1:
            w.writerow(["sample", "particle", "x"])
            for s_idx, s in enumerate(out["samples"]):
                for k, x in enumerate(s.points):
                    w.writerow([s_idx, k + 1, repr(float(x))])
        else:
            w.writerow(["sample", "particle", "x", "y"])
            for s_idx, s in enumerate(out["samples"]):
                for k, (x, y) in enumerate(s.points):
                    w.writerow([s_idx, k + 1, repr(float(x)), repr(float(y))])
    diag = out["diag"]
    report = {
        "acceptance_rate": diag.acceptance_rate,
        "iact_estimate": float(diag.iact_estimate),
        "ess": float(diag.ess),
        "step_size": diag.step_size,
    }
    with open(os.path.join(outdir, "diagnostics.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    print(json.dumps(report))
    return EXIT_OK


def cmd_stats(cfg, outdir, seed) -> int:
    from .stats import convergence_study

    params = _game_params(cfg)
    grid = cfg.get("grid", {})
    estimator = str(grid.get("estimator", "h2_1d"))
    n_values = [int(v) for v in grid.get("n_values", [50, 100, 200])]
    rule = {"q": float(grid.get("q", 0.5))}
    if estimator.endswith("_2d"):
        rule["theta"] = float(grid.get("theta", 0.0))
    chain = _chain_config(cfg, seed) if "chain" in cfg else None
    table = convergence_study(estimator, n_values, rule, params, chain=chain, seed=seed)
    table.write_csv(os.path.join(outdir, "convergence.csv"))
    with open(os.path.join(outdir, "convergence.json"), "w") as fh:
        fh.write(table.to_json())
    print(table.to_json())
    return EXIT_OK


def cmd_compare_loops(cfg, outdir, seed) -> int:
    g = cfg.get("game", {})
    grid = cfg.get("grid", {})
    sigma = float(g.get("sigma", 1.0))
    n = int(g.get("n", 8))
    lo = float(grid.get("c2_min", -0.1))
    hi = float(grid.get("c2_max", 1.0))
    pts = int(grid.get("c2_points", 56))
    c2_grid = np.linspace(lo, hi, pts)
    if not np.any(np.isclose(c2_grid, 0.0)):
        c2_grid = np.sort(np.append(c2_grid, 0.0))
    cmp = build_loop_comparison(c2_grid, sigma, n)
    paths = write_loop_comparison_csvs(cmp, outdir)
    print(json.dumps({"csv_files": [os.path.basename(p) for p in paths]}))
    return EXIT_OK


def cmd_coulomb_relax(cfg, outdir, seed) -> int:
    params = _game_params(cfg)
    sde = _sde_config(cfg, seed)
    relax = cfg.get("relax", {})
    snapshots = [float(t) for t in relax.get("snapshots", [0.0, 0.5, 2.0, sde.horizon])]
    player = int(relax.get("player", (params.n_players + 1) // 2))
    n_neigh = int(relax.get("overlay_neighbors", 8))

    rng = np.random.default_rng(seed)
    start = rng.normal(scale=0.3 * math.sqrt(params.beta), size=(params.n_players, 2))
    traj = simulate(Config2D(start), params, sde)

    overlay_rows = []
    for t_snap in snapshots:
        if t_snap <= 0.0:
            state = Config2D(start)
        else:
            idx = int(np.argmin(np.abs(traj.times - t_snap)))
            state = traj.states[idx]
        t_used = 0.0 if t_snap <= 0.0 else float(traj.times[idx])
        path = os.path.join(outdir, f"snapshot_t{t_snap:g}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "particle", "x", "y", "is_chosen"])
            for k, (x, y) in enumerate(state.points):
                w.writerow([repr(t_used), k + 1, repr(float(x)), repr(float(y)), int(k + 1 == player)])
        z = state.points
        zi = z[player - 1]
        d2 = ((z - zi) ** 2).sum(axis=1)
        d2[player - 1] = np.inf
        nearest = np.argsort(d2)[:n_neigh]
        for a_idx in range(len(nearest)):
            for b_idx in range(a_idx + 1, len(nearest)):
                j, k = int(nearest[a_idx]), int(nearest[b_idx])
                val = inv_sq_circumdiameter(zi - z[j], zi - z[k])
                overlay_rows.append([repr(t_used), j + 1, k + 1, repr(float(val))])
    with open(os.path.join(outdir, "circumcircle_overlay.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "opponent_j", "opponent_k", "inv_sq_circumdiameter"])
        w.writerows(overlay_rows)
    print(json.dumps({"snapshots": snapshots, "player": player}))
    return EXIT_OK


def cmd_ginibre_locations(cfg, outdir, seed) -> int:
    g = cfg.get("game", {})
    n = int(g.get("n", 64))
    covered = int(math.isqrt(n)) ** 2
    path = os.path.join(outdir, "predicted_locations.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "x", "y"])
        for k in range(1, covered + 1):
            p = ginibre_predicted_location(k, n)
            w.writerow([k, repr(float(p[0])), repr(float(p[1]))])
    print(json.dumps({"n": n, "covered": covered, "csv": os.path.basename(path)}))
    return EXIT_OK


_COMMANDS = {
    "verify-identities": cmd_verify_identities,
    "verify-nash": cmd_verify_nash,
    "simulate": cmd_simulate,
    "sample": cmd_sample,
    "stats": cmd_stats,
    "compare-loops": cmd_compare_loops,
    "coulomb-relax": cmd_coulomb_relax,
    "ginibre-locations": cmd_ginibre_locations,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="loggas")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="TOML experiment file")
    parser.add_argument("--outdir", default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config value, dotted keys (e.g. game.beta=4)",
    )
    args = parser.parse_args(argv)

    t0 = time.time()
    try:
        overrides = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"malformed override {item!r}, expected KEY=VALUE")
            key, raw = item.split("=", 1)
            try:
                overrides[key] = json.loads(raw)
            except json.JSONDecodeError:
                overrides[key] = raw
        cfg = parse_config(args.config, overrides)
        outdir = args.outdir or cfg.get("outdir", ".")
        os.makedirs(outdir, exist_ok=True)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        code = _COMMANDS[args.command](cfg, outdir, seed)
        _write_manifest(outdir, cfg, seed, t0)
        return code
    except (ConfigError, FileNotFoundError, tomllib.TOMLDecodeError) as err:
        print(json.dumps({"error": {"type": type(err).__name__, "message": str(err)}}), file=sys.stderr)
        return EXIT_CONFIG
    except (StepError, SolverError, QuadratureError, SamplerError, FloatingPointError) as err:
        print(json.dumps({"error": {"type": type(err).__name__, "message": str(err)}}), file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
