"""Ensemble-statistic estimators and finite-N convergence studies for the
singular-cost limits and the term-by-term fluctuation theorem."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import GameParams, pair_sums_1d, pair_sums_2d
from .ensembles import ChainConfig, ginibre_predicted_location, mala_chain_1d, mala_chain_2d

__all__ = [
    "ConvergenceTable",
    "per_index_stat_1d",
    "per_index_stat_2d",
    "nash_term_stats_1d",
    "pick_index_1d",
    "pick_index_2d",
    "convergence_study",
]


@dataclass
class ConvergenceTable:
    n_values: list
    estimates: list  # per-N dicts: {"mean", "std_error", ...extras}
    limit: float | None
    index_rule: str

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ValueError("n_values must be strictly increasing")

    def rows(self):
        for n, est in zip(self.n_values, self.estimates):
            gap = (
                abs(est["mean"] - self.limit) if self.limit is not None else float("nan")
            )
            yield n, est["mean"], est["std_error"], self.limit, gap

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "mean", "se", "limit", "gap"])
            for n, mean, se, lim, gap in self.rows():
                w.writerow(
                    [
                        n,
                        repr(float(mean)),
                        repr(float(se)),
                        "" if lim is None else repr(float(lim)),
                        repr(float(gap)),
                    ]
                )

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_values": list(self.n_values),
                "estimates": self.estimates,
                "limit": self.limit,
                "index_rule": self.index_rule,
            }
        )


def _mean_se(vals: np.ndarray, iact: float = 1.0) -> dict:
    vals = np.asarray(vals, dtype=float)
    if vals.size == 0:
        raise ValueError("empty sample list")
    ess = vals.size / max(iact, 1.0)
    se = float(vals.std(ddof=1) / math.sqrt(ess)) if vals.size > 1 else float("inf")
    return {"mean": float(vals.mean()), "std_error": se}


def per_index_stat_1d(samples, i: int, iact: float = 1.0) -> dict:
    """Mean and SE of the reciprocal-squared-gap statistic h2/(N-1) at index i."""
    n = len(samples[0])
    vals = np.array([pair_sums_1d(s, i).h2 / (n - 1) for s in samples])
    return _mean_se(vals, iact)


def per_index_stat_2d(samples, i: int, iact: float = 1.0) -> dict:
    """h2/(N-1) plus the normalized circumcircle double sum at index i."""
    from .game import _circ_double_sum

    n = len(samples[0])
    h2 = np.array([pair_sums_2d(s, i).h2 / (n - 1) for s in samples])
    circ = np.array([_circ_double_sum(s.points, i) / (n - 1) ** 2 for s in samples])
    a = _mean_se(h2, iact)
    b = _mean_se(circ, iact)
    return {
        "h2_mean": a["mean"],
        "circ_mean": b["mean"],
        "std_errors": {"h2": a["std_error"], "circ": b["std_error"]},
    }


def nash_term_stats_1d(samples, i: int, params: GameParams, iact: float = 1.0) -> dict:
    """Monte Carlo means of the three state-dependent terms of player i's
    equilibrium equation: squared own gradient, opponent interaction, and
    the (negative) diffusion term."""
    n = len(samples[0])
    b = params.beta
    self_sq = np.empty(len(samples))
    inter = np.empty(len(samples))
    diff = np.empty(len(samples))
    for s_idx, s in enumerate(samples):
        x = s.points
        dmat = x[:, None] - x[None, :]
        np.fill_diagonal(dmat, np.inf)
        inv = 1.0 / dmat
        h1 = inv.sum(axis=1) / (n - 1)
        own = x / 2.0 - (b / 2.0) * h1  # every player's own gradient
        self_sq[s_idx] = own[i - 1] ** 2
        # cross gradient of player i w.r.t. x^k is (b/(2(N-1)))/(x^i - x^k)
        inter[s_idx] = float(own @ ((b / (2.0 * (n - 1))) * inv[i - 1]))
        h2_i = (inv[i - 1] ** 2).sum() / (n - 1)
        diff[s_idx] = -(params.sigma ** 2 / (2.0 * (n - 1))) * (0.5 + b * h2_i)
    return {
        "self_sq": _mean_se(self_sq, iact),
        "interaction": _mean_se(inter, iact),
        "diffusion": _mean_se(diff, iact),
    }


def pick_index_1d(n: int, q: float) -> int:
    i = math.ceil(q * n)
    return min(max(i, 1), n)


def pick_index_2d(n: int, q: float, theta: float) -> int:
    """Largest covered index k with k/n <= q whose shell phase matches theta.

    The phase of slot k is ceil(sqrt(k)) - sqrt(k) in [0, 1); a slot matches
    when its phase is within half a slot width of theta. Falls back to the
    closest phase among the eligible k when the window is empty.
    """
    covered = int(math.isqrt(n)) ** 2
    kmax = min(covered, int(q * n))
    if kmax < 1:
        raise ValueError("no eligible index for this (n, q)")
    best = None
    for k in range(kmax, 0, -1):
        s = math.isqrt(k)
        if s * s < k:
            s += 1
        phase = s - math.sqrt(k)
        width = 0.5 / (2 * s - 1)
        d = min(abs(phase - theta), 1.0 - abs(phase - theta))
        if d <= width:
            return k
        if best is None or d < best[0]:
            best = (d, k)
    return best[1]


_LIMITS = {
    "h2_1d": lambda params, q: _limit_h2_1d(params, q),
    "h2_2d": lambda params, q: None,
    "circ_2d": lambda params, q: None,
    "const1": lambda params, q: 1.0,
}


def _limit_h2_1d(params: GameParams, q: float):
    from .equilibrium import limit_singular_stat, semicircle, solve_one_cut

    if params.potential is None:
        mu = semicircle(params.beta)
    else:
        mu = solve_one_cut(params.potential, params.beta)
    return limit_singular_stat(params.beta, params.sigma, mu, q)


def _default_chain(n: int, seed: int) -> ChainConfig:
    return ChainConfig(
        step_size=0.5 / n,
        n_burn=3000,
        n_keep=400,
        thin=10,
        seed=seed,
        target_acceptance=0.57,
    )


def convergence_study(
    estimator: str,
    n_values,
    index_rule: dict,
    params: GameParams,
    chain: ChainConfig | None = None,
    seed: int = 0,
) -> ConvergenceTable:
    """Run the matching sampler at each N, evaluate the named statistic at the
    rule-selected index, and tabulate against the analytic limit when known.

    index_rule: {"q": fraction} in 1D, {"q": fraction, "theta": phase} in 2D.
    Sampler failures are recorded per-N and a partial table is returned.
    """
    if estimator not in ("h2_1d", "h2_2d", "circ_2d", "const1"):
        raise ValueError(f"unknown estimator {estimator!r}")
    two_d = estimator.endswith("_2d")
    q = float(index_rule["q"])
    theta = float(index_rule.get("theta", 0.0))

    estimates = []
    kept_ns = []
    for j, n in enumerate(n_values):
        pn = replace(params, n_players=int(n))
        cc = chain if chain is not None else _default_chain(int(n), seed + j)
        if chain is not None:
            cc = replace(chain, seed=chain.seed + j)
        try:
            if two_d:
                out = mala_chain_2d(pn, cc)
                i = pick_index_2d(int(n), q, theta)
            else:
                out = mala_chain_1d(pn, cc)
                i = pick_index_1d(int(n), q)
            iact = out["diag"].iact_estimate
            if estimator == "const1":
                est = {"mean": 1.0, "std_error": 0.0}
            elif estimator == "h2_1d":
                est = per_index_stat_1d(out["samples"], i, iact)
            else:
                both = per_index_stat_2d(out["samples"], i, iact)
                key = "h2" if estimator == "h2_2d" else "circ"
                est = {
                    "mean": both[f"{key}_mean"],
                    "std_error": both["std_errors"][key],
                }
            est["index"] = i
            est["achieved_q"] = i / int(n)
            if two_d:
                loc = ginibre_predicted_location(i, int(n))
                est["location"] = [float(loc[0]), float(loc[1])]
        except Exception as err:  # record the failure, keep the partial table
            est = {"mean": float("nan"), "std_error": float("nan"), "error": str(err)}
        estimates.append(est)
        kept_ns.append(int(n))

    limit = _LIMITS[estimator](params, q)
    rule = f"q={q}" + (f", theta={theta}" if two_d else "")
    return ConvergenceTable(
        n_values=kept_ns, estimates=estimates, limit=limit, index_rule=rule
    )
