"""Limit measures of the interacting ensembles: one-cut measures on the line
with density/quantile/Hilbert-transform evaluators, the uniform planar law,
and the closed-form limit constants built from them.

The 1D machinery runs through the substitution x = m0 + rho*cos(theta) and
sine series

    mu(dx) -> f(theta) d(theta),  f(theta) = (2/pi) sin(theta) * sum_k g_k sin(k theta)

for which the finite Hilbert transform is diagonal:

    H mu(m0 + rho*cos(theta)) = (2/rho) * sum_k g_k cos(k theta),

by the principal-value integral of sin(k phi) sin(phi) / (cos theta - cos phi)
over [0, pi] being pi*cos(k theta) (the airfoil-equation inversion). Matching
beta*H mu = V' in Chebyshev coefficients gives the density, and the two
endpoint conditions (c_0 = 0, c_1 = 2*beta/rho in the cosine coefficients of
V'(m0 + rho*cos(theta))) pin the support. The square-root edge vanishing is
automatic in this representation, and smooth potentials converge spectrally.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

__all__ = [
    "PotentialSpec",
    "EquilibriumMeasure1D",
    "EquilibriumMeasure2D",
    "SolverError",
    "QuadratureError",
    "semicircle",
    "solve_one_cut",
    "circular_law",
    "uniform_ball",
    "limit_singular_stat",
    "circumcircle_limit",
]


class SolverError(RuntimeError):
    """One-cut solver failed; carries the last residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class QuadratureError(RuntimeError):
    """Refinement stalled; carries the achieved estimate and gap."""

    def __init__(self, message, estimate=None, gap=None):
        super().__init__(message)
        self.estimate = estimate
        self.gap = gap


@dataclass(frozen=True)
class PotentialSpec:
    """External potential V with its first two derivatives and a convexity
    floor c_V > 0 (V'' >= c_V is spot-checked on a grid by the solver)."""

    kind: str  # "quadratic" or "custom"
    v: object
    dv: object
    d2v: object
    c_v: float = 1.0

    @classmethod
    def quadratic(cls) -> "PotentialSpec":
        return cls(
            kind="quadratic",
            v=lambda x: 0.5 * np.asarray(x) ** 2,
            dv=lambda x: np.asarray(x, dtype=float),
            d2v=lambda x: np.ones_like(np.asarray(x, dtype=float)),
            c_v=1.0,
        )

    @classmethod
    def custom(cls, v, dv, d2v, c_v) -> "PotentialSpec":
        if not c_v > 0:
            raise ValueError("c_v must be positive")
        return cls(kind="custom", v=v, dv=dv, d2v=d2v, c_v=float(c_v))


class EquilibriumMeasure1D:
    """One-cut measure on [a, b] given by sine coefficients g_k (g_1 = 1).

    density(x)  = (2/(pi*rho)) * sum_k g_k sin(k theta)
    hilbert(x)  = (2/rho) * sum_k g_k cos(k theta)
    cdf/quantile from the closed-form antiderivative of the sine series.
    """

    def __init__(self, m0: float, rho: float, gk):
        gk = np.asarray(gk, dtype=float)
        if gk.size < 1 or abs(gk[0] - 1.0) > 1e-10:
            raise ValueError("g_1 must be 1 (unit total mass)")
        self.m0 = float(m0)
        self.rho = float(rho)
        self.gk = gk
        self.support = (self.m0 - self.rho, self.m0 + self.rho)

    # --- parametrization helpers -----------------------------------------
    def _theta(self, x):
        u = (np.asarray(x, dtype=float) - self.m0) / self.rho
        return np.arccos(np.clip(u, -1.0, 1.0))

    def density(self, x):
        th = self._theta(x)
        k = np.arange(1, self.gk.size + 1)
        s = np.sin(np.multiply.outer(th, k)) @ self.gk
        out = (2.0 / (math.pi * self.rho)) * s
        inside = np.abs(np.asarray(x, dtype=float) - self.m0) <= self.rho
        return np.where(inside, out, 0.0) if np.ndim(x) else (float(out) if inside else 0.0)

    def hilbert(self, x):
        """Hilbert transform on the support (off-support values not defined here)."""
        th = self._theta(x)
        k = np.arange(1, self.gk.size + 1)
        out = (2.0 / self.rho) * (np.cos(np.multiply.outer(th, k)) @ self.gk)
        return out if np.ndim(x) else float(out)

    def cdf(self, x):
        # integral of f(phi) from theta(x) to pi, via
        # int sin(k phi) sin(phi) dphi in closed form
        th = np.atleast_1d(self._theta(x))
        total = np.zeros_like(th)
        for j, g in enumerate(self.gk):
            k = j + 1
            if g == 0.0:
                continue
            if k == 1:
                prim = 0.5 * (th - 0.5 * np.sin(2 * th))  # antiderivative at theta
                seg = 0.5 * math.pi - prim
            else:
                prim = 0.5 * (
                    np.sin((k - 1) * th) / (k - 1) - np.sin((k + 1) * th) / (k + 1)
                )
                seg = -prim  # value at pi vanishes
            total += g * seg
        total *= 2.0 / math.pi
        xv = np.atleast_1d(np.asarray(x, dtype=float))
        total = np.where(xv <= self.support[0], 0.0, total)
        total = np.where(xv >= self.support[1], 1.0, total)
        return total if np.ndim(x) else float(total[0])

    def quantile(self, q):
        """gamma^q: Newton seeded at the mean with bisection fallback."""
        if np.ndim(q):
            return np.array([self.quantile(float(t)) for t in np.asarray(q)])
        q = float(q)
        if not 0.0 <= q <= 1.0:
            raise ValueError("q must be in [0, 1]")
        a, b = self.support
        if q == 0.0:
            return a
        if q == 1.0:
            return b
        x = self.mean()
        for _ in range(60):
            err = self.cdf(x) - q
            if abs(err) < 1e-12:
                return float(min(max(x, a), b))
            d = self.density(x)
            if d <= 0.0:
                break
            step = err / d
            nx = x - step
            if not a < nx < b:
                break
            x = nx
        return float(optimize.brentq(lambda t: self.cdf(t) - q, a, b, xtol=1e-14))

    # --- moments and grids -------------------------------------------------
    def theta_grid(self, m: int):
        """Midpoint theta grid with x values and integration weights for
        integrals of smooth functions against the measure."""
        th = (np.arange(m) + 0.5) * math.pi / m
        x = self.m0 + self.rho * np.cos(th)
        k = np.arange(1, self.gk.size + 1)
        f = (2.0 / math.pi) * np.sin(th) * (np.sin(np.multiply.outer(th, k)) @ self.gk)
        w = f * (math.pi / m)
        return th, x, w

    def integrate(self, func, m: int = 2048) -> float:
        """integral of func d(mu) by the spectral midpoint rule."""
        _, x, w = self.theta_grid(m)
        return float(np.sum(func(x) * w))

    def mean(self) -> float:
        return self.integrate(lambda x: x)

    def moment(self, p: int) -> float:
        return self.integrate(lambda x: x ** p)

    def hilbert_of_product(self, phi, m: int = 1024):
        """Return an evaluator for the principal-value transform H[phi*m](x)
        on the support, for smooth phi.

        Expands phi(x(theta)) * sum g_k sin(k theta) back into a sine series
        by the type-I discrete sine transform, then applies the diagonal
        cos(k theta) rule. Spectrally accurate for smooth phi.
        """
        j = np.arange(1, m)
        th = j * math.pi / m
        x = self.m0 + self.rho * np.cos(th)
        k = np.arange(1, self.gk.size + 1)
        s = np.sin(np.multiply.outer(th, k)) @ self.gk  # sum g_k sin(k theta)
        vals = np.asarray(phi(x), dtype=float) * s
        # DST-I: b_k = (2/m) * sum_j vals_j sin(pi j k / m)
        kk = np.arange(1, m)
        bk = (2.0 / m) * (np.sin(math.pi * np.outer(kk, j) / m) @ vals)

        def transform(xq):
            thq = self._theta(xq)
            out = (2.0 / self.rho) * (np.cos(np.multiply.outer(thq, kk)) @ bk)
            return out if np.ndim(xq) else float(out)

        return transform

    def density_table(self, path, n: int = 512):
        xs = np.linspace(self.support[0], self.support[1], n)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "m"])
            for x in xs:
                w.writerow([repr(float(x)), repr(float(self.density(x)))])


def semicircle(beta: float) -> EquilibriumMeasure1D:
    """Semicircle law: density sqrt(2*beta - x^2)/(pi*beta) on [-sqrt(2b), sqrt(2b)]."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    return EquilibriumMeasure1D(m0=0.0, rho=math.sqrt(2.0 * beta), gk=[1.0])


def _cheb_coeffs(dv, m0: float, rho: float, m: int):
    """Cosine coefficients c_k of V'(m0 + rho*cos(theta)), k = 0..m-1."""
    th = (np.arange(m) + 0.5) * math.pi / m
    vals = np.asarray(dv(m0 + rho * np.cos(th)), dtype=float)
    k = np.arange(m)
    c = (2.0 / m) * (np.cos(np.outer(k, th)) @ vals)
    c[0] *= 0.5
    return c


def solve_one_cut(
    potential: PotentialSpec,
    beta: float,
    n_modes: int = 128,
    max_iter: int = 80,
) -> EquilibriumMeasure1D:
    """Equilibrium measure for a uniformly convex potential and coupling beta.

    Solves the two endpoint conditions c_0 = 0, c_1 = 2*beta/rho for
    (m0, rho), then reads the density off the remaining coefficients.
    Rejects solutions whose density dips negative (would-be multi-cut).
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    # convexity spot check
    grid = np.linspace(-8.0, 8.0, 65)
    if np.min(potential.d2v(grid)) < 0.9 * potential.c_v:
        raise SolverError("potential fails its convexity floor on the probe grid")

    def conditions(p):
        m0, rho = p[0], abs(p[1])
        c = _cheb_coeffs(potential.dv, m0, rho, n_modes)
        return [c[0], c[1] - 2.0 * beta / rho]

    guess = np.array([0.0, math.sqrt(2.0 * beta / potential.c_v)])
    sol = optimize.root(conditions, guess, method="hybr", options={"maxfev": max_iter * 4})
    if not sol.success:
        raise SolverError(
            f"endpoint root-find did not converge: {sol.message}",
            residual=float(np.max(np.abs(sol.fun))),
        )
    m0, rho = float(sol.x[0]), float(abs(sol.x[1]))
    c = _cheb_coeffs(potential.dv, m0, rho, n_modes)
    gk = rho * c[1:] / (2.0 * beta)
    gk[np.abs(gk) < 1e-15] = 0.0
    if abs(gk[0] - 1.0) > 1e-8:
        raise SolverError("unit-mass condition failed after root-find", residual=float(gk[0] - 1.0))
    gk /= gk[0]
    last = int(np.max(np.nonzero(np.abs(gk) > 0)[0])) if np.any(gk != 0) else 0
    mu = EquilibriumMeasure1D(m0=m0, rho=rho, gk=gk[: last + 1])
    th = np.linspace(1e-3, math.pi - 1e-3, 512)
    dens = mu.density(m0 + rho * np.cos(th))
    if np.min(dens) < -1e-10:
        raise SolverError(
            "density dips negative: support is not a single interval",
            residual=float(np.min(dens)),
        )
    return mu


class EquilibriumMeasure2D:
    """Planar measure: either a uniform ball or an explicit weighted grid."""

    def __init__(self, kind, radius=None, density_value=None, points=None, weights=None):
        self.kind = kind
        if kind == "uniform-ball":
            if not radius or radius <= 0:
                raise ValueError("radius must be positive")
            self.radius = float(radius)
            self.density_value = 1.0 / (math.pi * self.radius ** 2)
            if density_value is not None and abs(density_value - self.density_value) > 1e-12:
                raise ValueError("density inconsistent with unit mass on the ball")
        elif kind == "custom-grid":
            self.points = np.asarray(points, dtype=float)
            self.weights = np.asarray(weights, dtype=float)
            if self.points.ndim != 2 or self.points.shape[1] != 2:
                raise ValueError("points must be (M, 2)")
            if abs(self.weights.sum() - 1.0) > 1e-6:
                raise ValueError("grid weights must sum to 1")
        else:
            raise ValueError(f"unknown kind {kind!r}")

    def mass(self) -> float:
        if self.kind == "uniform-ball":
            return math.pi * self.radius ** 2 * self.density_value
        return float(self.weights.sum())

    def hilbert_vec(self, z):
        """The planar field integral((z-w)/|z-w|^2) d(mu)(w), exact for the ball."""
        z = np.asarray(z, dtype=float)
        if self.kind == "uniform-ball":
            r2 = float(z @ z)
            R2 = self.radius ** 2
            if r2 == 0.0:
                return np.zeros(2)
            return z / R2 if r2 <= R2 else z / r2
        d = z[None, :] - self.points
        r2 = (d ** 2).sum(axis=1)
        return ((self.weights / r2)[:, None] * d).sum(axis=0)

    def mean_radius(self) -> float:
        if self.kind == "uniform-ball":
            return 2.0 * self.radius / 3.0
        return float(np.sum(self.weights * np.linalg.norm(self.points, axis=1)))

    def grid_table(self, path, n: int = 64):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "m"])
            if self.kind == "uniform-ball":
                xs = np.linspace(-self.radius, self.radius, n)
                for x in xs:
                    for y in xs:
                        m = self.density_value if x * x + y * y <= self.radius ** 2 else 0.0
                        w.writerow([repr(float(x)), repr(float(y)), repr(m)])
            else:
                for (x, y), wt in zip(self.points, self.weights):
                    w.writerow([repr(float(x)), repr(float(y)), repr(float(wt))])


def circular_law(beta: float) -> EquilibriumMeasure2D:
    """Uniform density 2/(pi*beta) on the ball of radius sqrt(beta/2)."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    return EquilibriumMeasure2D(kind="uniform-ball", radius=math.sqrt(beta / 2.0))


def uniform_ball(radius: float) -> EquilibriumMeasure2D:
    return EquilibriumMeasure2D(kind="uniform-ball", radius=radius)


def limit_singular_stat(beta: float, sigma: float, mu: EquilibriumMeasure1D, q: float) -> float:
    """Limit of the leave-one-out mean inverse-squared gap at quantile q:
    pi^2 * beta / (3*(beta - sigma^2)) * m(gamma^q)^2."""
    if not sigma > 0 or not beta > sigma ** 2:
        raise ValueError("need beta > sigma^2 > 0")
    m = mu.density(mu.quantile(q))
    return math.pi ** 2 * beta / (3.0 * (beta - sigma ** 2)) * m ** 2


def _circ_quad_ball(gamma, radius: float, m: int) -> float:
    """Tensor quadrature of the circumcircle double integral over a ball, in
    polar coordinates centered at gamma (the Jacobian cancels the gap
    singularity, leaving a bounded integrand)."""
    g = np.asarray(gamma, dtype=float)
    g2 = float(g @ g)
    R2 = radius ** 2
    if g2 > R2 + 1e-12:
        raise ValueError("gamma outside the support")
    dens = 1.0 / (math.pi * R2)
    # angular midpoint nodes, radial Gauss-Legendre on [0, L(theta)]
    th = (np.arange(m) + 0.5) * 2.0 * math.pi / m
    dth = 2.0 * math.pi / m
    proj = -(g[0] * np.cos(th) + g[1] * np.sin(th))
    L = proj + np.sqrt(np.maximum(R2 - g2 + proj ** 2, 0.0))
    xg, wg = np.polynomial.legendre.leggauss(m)
    # nodes r[i, a] for angle a, premultiplied by their dr*r weights
    r = 0.5 * np.outer(xg + 1.0, L)
    rw = r * (0.5 * np.outer(wg, L) * dth)
    total = 0.0
    # chunk over the first angle to keep memory at O(m^3)
    for a in range(m):
        cosd = np.cos(th[a] - th)  # (m,)
        sin2 = 1.0 - cosd ** 2
        r1 = r[:, a][:, None, None]
        denom = r1 ** 2 + r[None, :, :] ** 2 - 2.0 * r1 * r[None, :, :] * cosd[None, None, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            integrand = 2.0 * sin2[None, None, :] / denom
        integrand = np.where(denom <= 0.0, 0.0, integrand)
        total += np.einsum("i,ijk,jk->", rw[:, a], integrand, rw)
    return float(dens ** 2 * total)


def circumcircle_limit(gamma, mu: EquilibriumMeasure2D, tol: float = 1e-4) -> float:
    """Double integral of 2/D^2(gamma - w, gamma - u) over mu x mu, diagonal
    excluded, refined until successive quadrature levels agree to tol."""
    from .core import inv_sq_circumdiameter

    if mu.kind == "uniform-ball":
        # raw levels converge at O(1/m^2); pairwise Richardson extrapolation
        # of (m, 2m) levels is compared across successive m
        levels = (24, 32, 48, 64, 96)
        raw = {}
        prev = None
        gap = None
        for m in levels:
            for mm in (m, 2 * m):
                if mm not in raw:
                    raw[mm] = _circ_quad_ball(gamma, mu.radius, mm)
            val = (4.0 * raw[2 * m] - raw[m]) / 3.0
            if prev is not None:
                gap = abs(val - prev) / max(abs(val), 1e-30)
                if gap < tol:
                    return val
            prev = val
        raise QuadratureError("circumcircle quadrature did not settle", estimate=val, gap=gap)
    # custom grid: double sum with the diagonal zeroed
    g = np.asarray(gamma, dtype=float)
    pts = mu.points
    wts = mu.weights
    total = 0.0
    for a in range(pts.shape[0]):
        xi = g - pts[a]
        if xi @ xi == 0.0:
            continue
        for b in range(pts.shape[0]):
            if a == b:
                continue
            eta = g - pts[b]
            if eta @ eta == 0.0 or np.all(xi == eta):
                continue
            total += wts[a] * wts[b] * inv_sq_circumdiameter(xi, eta)
    return total
