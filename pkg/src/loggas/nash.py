"""Closed-form value functions, their derivatives, and residual evaluators
for the coupled ergodic equation systems in 1D and 2D, plus the mean-field
(master) equations evaluated at closed-form measures.

Residuals are reported relative to the largest assembled term, since term
magnitudes swing over orders of magnitude with N and with gap sizes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Config1D, Config2D, GameParams, inv_sq_circumdiameter, pair_sums_1d, pair_sums_2d
from .equilibrium import EquilibriumMeasure1D, EquilibriumMeasure2D, circumcircle_limit
from .game import ergodic_constants, state_cost_1d, state_cost_2d, global_cost_1d, global_cost_2d

__all__ = [
    "ValueGrad1D",
    "ValueGrad2D",
    "ResidualReport",
    "value_grads_1d",
    "value_grads_2d",
    "residual_nash_1d",
    "residual_hjb_1d",
    "residual_nash_2d",
    "residual_hjb_2d",
    "residual_master_1d",
    "residual_meanfield_hj_1d",
    "residual_master_2d",
    "identity_suite",
]


@dataclass(frozen=True)
class ValueGrad1D:
    value: float
    self_grad: float
    cross_grads: np.ndarray  # entry k (0-based over the other players' slots)
    laplacian: float


@dataclass(frozen=True)
class ValueGrad2D:
    value: float
    self_grad: np.ndarray
    cross_grads: np.ndarray  # (N, 2); row i is zeroed
    laplacian: float


@dataclass(frozen=True)
class ResidualReport:
    residual: float
    scale: float
    terms: dict

    @property
    def relative(self) -> float:
        return abs(self.residual) / self.scale if self.scale > 0 else abs(self.residual)

    def to_json(self) -> str:
        return json.dumps(
            {
                "residual": self.residual,
                "scale": self.scale,
                "relative": self.relative,
                "terms": self.terms,
            }
        )


def _report(terms: dict) -> ResidualReport:
    residual = float(sum(terms.values()))
    scale = float(max(abs(v) for v in terms.values()))
    return ResidualReport(residual=residual, scale=scale, terms=terms)


def value_grads_1d(config: Config1D, i: int, beta: float) -> ValueGrad1D:
    """Value (x^i)^2/4 - (beta/2)*(log-gap mean) and its derivatives.

    cross_grads[k] = (beta/(2(N-1))) / (x^i - x^k) for k != i (0 at slot i);
    laplacian collects the own second derivative plus all cross seconds,
    which total 1/2 + beta * (mean inverse squared gap).
    """
    x = config.points
    n = x.size
    if not 1 <= i <= n:
        raise IndexError(f"player index {i} out of range 1..{n}")
    ps = pair_sums_1d(config, i)
    xi = x[i - 1]
    gaps = xi - x
    cross = np.zeros(n)
    mask = np.arange(n) != i - 1
    cross[mask] = (beta / (2.0 * (n - 1))) / gaps[mask]
    return ValueGrad1D(
        value=xi ** 2 / 4.0 - (beta / 2.0) * ps.h0,
        self_grad=xi / 2.0 - (beta / 2.0) * ps.h1,
        cross_grads=cross,
        laplacian=0.5 + beta * ps.h2,
    )


def value_grads_2d(config: Config2D, i: int, beta: float) -> ValueGrad2D:
    """Planar analog; the log kernel is harmonic away from the diagonal so
    the full laplacian is the constant 1."""
    z = config.points
    n = z.shape[0]
    if not 1 <= i <= n:
        raise IndexError(f"player index {i} out of range 1..{n}")
    ps = pair_sums_2d(config, i)
    zi = z[i - 1]
    d = zi[None, :] - z
    r2 = (d ** 2).sum(axis=1)
    cross = np.zeros((n, 2))
    mask = np.arange(n) != i - 1
    cross[mask] = (beta / (2.0 * (n - 1))) * d[mask] / r2[mask, None]
    return ValueGrad2D(
        value=float(zi @ zi) / 4.0 - (beta / 2.0) * ps.h0,
        self_grad=zi / 2.0 - (beta / 2.0) * ps.h1,
        cross_grads=cross,
        laplacian=1.0,
    )


def residual_nash_1d(config: Config1D, i: int, params: GameParams) -> ResidualReport:
    """Residual of the i-th coupled ergodic equation at the closed-form values."""
    x = config.points
    n = x.size
    beta, sigma = params.beta, params.sigma
    vg = value_grads_1d(config, i, beta)
    self_grads = np.array(
        [value_grads_1d(config, k, beta).self_grad for k in range(1, n + 1)]
    )
    interaction = float(np.sum(self_grads * vg.cross_grads))  # slot i is zero
    terms = {
        "diffusion": -(sigma ** 2) / (2.0 * (n - 1)) * vg.laplacian,
        "interaction": interaction,
        "self": 0.5 * vg.self_grad ** 2,
        "cost": -state_cost_1d(config, i, params),
        "lambda": ergodic_constants(params, "closed1d"),
    }
    return _report(terms)


def residual_hjb_1d(config: Config1D, params: GameParams) -> ResidualReport:
    """Residual of the global ergodic HJB at the potential function
    W = ||x||^2/4 - (beta/(2(N-1))) * sum of log gaps."""
    x = config.points
    n = x.size
    beta, sigma = params.beta, params.sigma
    grads = np.empty(n)
    lap = 0.0
    for k in range(1, n + 1):
        ps = pair_sums_1d(config, k)
        grads[k - 1] = x[k - 1] / 2.0 - (beta / 2.0) * ps.h1
        lap += 0.5 + (beta / 2.0) * ps.h2
    terms = {
        "diffusion": -(sigma ** 2) / (2.0 * n * (n - 1)) * lap,
        "gradient": float(grads @ grads) / (2.0 * n),
        "cost": -global_cost_1d(config, params) / n,
        "lambda": ergodic_constants(params, "open1d"),
    }
    return _report(terms)


def residual_nash_2d(config: Config2D, i: int, params: GameParams) -> ResidualReport:
    z = config.points
    n = z.shape[0]
    beta, sigma = params.beta, params.sigma
    vg = value_grads_2d(config, i, beta)
    self_grads = np.array(
        [value_grads_2d(config, k, beta).self_grad for k in range(1, n + 1)]
    )
    interaction = float(np.sum(self_grads * vg.cross_grads))
    terms = {
        "diffusion": -(sigma ** 2) / (2.0 * (n - 1)) * vg.laplacian,
        "interaction": interaction,
        "self": 0.5 * float(vg.self_grad @ vg.self_grad),
        "cost": -state_cost_2d(config, i, params),
        "lambda": ergodic_constants(params, "closed2d"),
    }
    return _report(terms)


def residual_hjb_2d(config: Config2D, params: GameParams) -> ResidualReport:
    z = config.points
    n = z.shape[0]
    beta, sigma = params.beta, params.sigma
    grad_sq = 0.0
    for k in range(1, n + 1):
        ps = pair_sums_2d(config, k)
        g = z[k - 1] / 2.0 - (beta / 2.0) * ps.h1
        grad_sq += float(g @ g)
    terms = {
        "diffusion": -(sigma ** 2) / (2.0 * (n - 1)),  # laplacian of W is exactly N
        "gradient": grad_sq / (2.0 * n),
        "cost": -global_cost_2d(config, params) / n,
        "lambda": ergodic_constants(params, "open2d"),
    }
    return _report(terms)


def residual_master_1d(
    x: float, mu: EquilibriumMeasure1D, beta: float, n_modes: int = 1024
) -> ResidualReport:
    """Mean-field equation residual at a closed-form measure.

    The measure-derivative pairing integral of (beta/2)/(x-z) against
    grad_x U(z) * mu(dz) is exactly (beta/2) * H[grad_x U * m](x), computed
    through the diagonal sine-series transform.
    """
    du = lambda t: t / 2.0 - (beta / 2.0) * mu.hilbert(t)
    transform = mu.hilbert_of_product(du, m=n_modes)
    m_x = mu.density(x)
    terms = {
        "pairing": (beta / 2.0) * transform(x),
        "self": 0.5 * du(x) ** 2,
        "cost_state": -(x ** 2) / 8.0,
        "cost_local": -(math.pi ** 2) * beta ** 2 / 8.0 * m_x ** 2,
        "lambda": beta / 4.0,
    }
    return _report(terms)


def residual_meanfield_hj_1d(mu: EquilibriumMeasure1D, beta: float, m: int = 2048) -> ResidualReport:
    """Integrated (global-cost) form of the mean-field equation at mu."""
    du = lambda t: t / 2.0 - (beta / 2.0) * mu.hilbert(t)
    terms = {
        "gradient": 0.5 * mu.integrate(lambda t: du(t) ** 2, m),
        "cost_state": -mu.integrate(lambda t: t ** 2 / 8.0, m),
        "cost_local": -(math.pi ** 2) * beta ** 2 / 24.0 * mu.integrate(lambda t: mu.density(t) ** 2, m),
        "lambda": beta / 8.0,
    }
    return _report(terms)


def _ball_field(z, radius: float, m: int = 512):
    """Planar field of the uniform unit-mass ball at z by a 1D chord
    quadrature in polar coordinates centered at z (independent of the
    closed-form answer, for dual-route checks)."""
    z = np.asarray(z, dtype=float)
    z2 = float(z @ z)
    th = (np.arange(m) + 0.5) * 2.0 * math.pi / m
    e = np.column_stack([np.cos(th), np.sin(th)])
    proj = -(e @ z)
    L = proj + np.sqrt(np.maximum(radius ** 2 - z2 + proj ** 2, 0.0))
    dens = 1.0 / (math.pi * radius ** 2)
    return -dens * (e * L[:, None]).sum(axis=0) * (2.0 * math.pi / m)


def residual_master_2d(
    z, mu: EquilibriumMeasure2D, beta: float, n_modes: int = 256
) -> ResidualReport:
    """Planar mean-field equation residual at a uniform-ball measure.

    All integrals are quadratures: the field enters through polar chord
    integrals and the circumcircle double integral through its own
    refinement loop.
    """
    if mu.kind != "uniform-ball":
        raise ValueError("planar master residual implemented for ball measures")
    z = np.asarray(z, dtype=float)
    R = mu.radius
    dens = 1.0 / (math.pi * R ** 2)

    def grad_u(w):
        return w / 2.0 - (beta / 2.0) * _ball_field(w, R)

    # pairing term: integrate <(beta/2)(z-w)/|z-w|^2, grad_u(w)> over the ball
    # in polar coordinates at z, where the Jacobian absorbs the kernel
    total = 0.0
    m = n_modes
    th = (np.arange(m) + 0.5) * 2.0 * math.pi / m
    z2 = float(z @ z)
    xg, wg = np.polynomial.legendre.leggauss(64)
    for a in range(m):
        e = np.array([math.cos(th[a]), math.sin(th[a])])
        proj = -float(e @ z)
        L = proj + math.sqrt(max(R ** 2 - z2 + proj ** 2, 0.0))
        r = 0.5 * (xg + 1.0) * L
        w = z[None, :] + r[:, None] * e[None, :]
        gu = w / 2.0 - (beta / 2.0) * (np.array([_ball_field(p, R) for p in w]))
        # kernel (z-w)/|z-w|^2 = -e/r; times r dr dtheta leaves -e . gu dr
        total += -float((gu @ e) @ wg) * 0.5 * L * (2.0 * math.pi / m)
    pairing = (beta / 2.0) * dens * total

    gz = grad_u(z)
    terms = {
        "pairing": pairing,
        "self": 0.5 * float(gz @ gz),
        "cost_state": -z2 / 8.0,
        "cost_circ": -(beta ** 2) / 8.0 * circumcircle_limit(z, mu),
        "lambda": beta / 4.0,
    }
    return _report(terms)


def identity_suite(config) -> dict:
    """Max relative error of each applicable exact algebraic identity.

    Relative error is measured against the largest assembled term (or the
    right-hand side, whichever is larger) so that near-degenerate triples
    with a vanishing result do not inflate the ratio artificially.
    """
    out = {}
    if isinstance(config, Config1D):
        x = config.points
        n = x.size
        sums = [pair_sums_1d(config, i) for i in range(1, n + 1)]
        lhs = sum(x[i] * sums[i].h1 for i in range(n))
        out["weighted_h1_sum"] = abs(lhs - n / 2.0) / (n / 2.0)
        lhs2 = sum(s.h2 / (n - 1) for s in sums)
        rhs2 = sum(s.h1 ** 2 for s in sums)
        out["h2_vs_h1_squared"] = abs(lhs2 - rhs2) / max(abs(rhs2), 1e-30)
        # double-sum rearrangement: the three groupings of
        # sum_{k != i} sum_{l != k,i} over products of inverse gaps
        g = x[:, None] - x[None, :]
        np.fill_diagonal(g, np.inf)
        g = 1.0 / g  # zero on the diagonal
        s = g.sum(axis=1)
        left = 2.0 * (g * (s[None, :] - g.T)).sum(axis=1)
        mid = (g * (s[None, :] - g.T)).sum(axis=1) - (g * (-s[None, :] - g)).sum(axis=1)
        right = s ** 2 - (g ** 2).sum(axis=1)
        # backward-error scale: the gross magnitude of the summed terms, not
        # the (possibly cancelled) totals
        gross = 2.0 * (np.abs(g) * (np.abs(s)[None, :] + np.abs(g.T))).sum(axis=1)
        scale = np.maximum.reduce([np.abs(left), np.abs(right), gross]) + 1e-30
        out["double_sum_rearrangement"] = float(
            np.max(
                np.maximum(np.abs(left - mid), np.abs(left - right)) / scale
            )
        )
    elif isinstance(config, Config2D):
        z = config.points
        n = z.shape[0]
        d = z[:, None, :] - z[None, :, :]
        r2 = (d ** 2).sum(axis=-1)
        np.fill_diagonal(r2, np.inf)
        # all ordered triples (i, j, k): xi = z_i - z_j, eta = z_i - z_k,
        # chord = z_j - z_k; diagonal infinities zero out the invalid slots
        dot_xe = np.einsum("ijc,ikc->ijk", d, d)
        dot_xc = np.einsum("ijc,jkc->ijk", d, d)
        dot_ec = np.einsum("ikc,jkc->ijk", d, d)
        t1 = dot_xe / (r2[:, :, None] * r2[:, None, :])
        t2 = dot_xc / (r2[:, :, None] * r2[None, :, :])
        t3 = -dot_ec / (r2[:, None, :] * r2[None, :, :])
        cross = np.einsum("ij,ik->ijk", d[:, :, 0], d[:, :, 1]) - np.einsum(
            "ij,ik->ijk", d[:, :, 1], d[:, :, 0]
        )
        rhs = 2.0 * cross ** 2 / (r2[:, :, None] * r2[:, None, :] * r2[None, :, :])
        lhs = t1 - t2 - t3
        idx = np.arange(n)
        valid = (
            (idx[:, None, None] != idx[None, :, None])
            & (idx[:, None, None] != idx[None, None, :])
            & (idx[None, :, None] != idx[None, None, :])
        )
        scale = np.maximum.reduce([np.abs(t1), np.abs(t2), np.abs(t3), np.abs(rhs)])
        err = np.abs(lhs - rhs) / (scale + 1e-30)
        out["circumcircle_dot_products"] = float(err[valid].max())
        # empirical triple identity tying |h1|^2 to the h2 mean and the
        # circumcircle double sum
        sums = [pair_sums_2d(config, i) for i in range(1, n + 1)]
        lhs_f = sum(float(s.h1 @ s.h1) for s in sums)
        circ = float(rhs[valid].sum())
        rhs_f = sum(s.h2 / (n - 1) for s in sums) + (1.0 / 3.0) * circ / (n - 1) ** 2
        out["field_square_decomposition"] = abs(lhs_f - rhs_f) / max(abs(rhs_f), 1e-30)
    else:
        raise TypeError("expected Config1D or Config2D")
    return out
