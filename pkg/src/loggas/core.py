"""Configuration types, pairwise singular transforms, circumcircle geometry,
orderings, and empirical-measure distances.

Everything here is a pure function on immutable values. Pairwise sums are
direct O(N) loops per index (vectorized with numpy); no multipole tricks,
the target scales (N up to a couple thousand) don't need them.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Config1D",
    "Config2D",
    "GameParams",
    "PairSums",
    "pair_sums_1d",
    "pair_sums_2d",
    "inv_sq_circumdiameter",
    "spiral_less",
    "spiral_key",
    "spiral_sort",
    "wasserstein_1d",
]


class Config1D:
    """A strictly increasing N-tuple of real coordinates (N >= 2).

    Ordering is validated exactly (no gap floor); callers that need numerical
    slack apply it themselves.
    """

    __slots__ = ("points",)

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("Config1D needs a flat sequence of at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("Config1D coordinates must be finite")
        if not np.all(pts[1:] > pts[:-1]):
            raise ValueError("Config1D coordinates must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __setattr__(self, name, value):
        raise AttributeError("Config1D is immutable")

    @property
    def n(self) -> int:
        return self.points.size

    def __len__(self):
        return self.points.size

    def __repr__(self):
        return f"Config1D({self.points.tolist()!r})"

    def to_json(self) -> str:
        return json.dumps(self.points.tolist())

    @classmethod
    def from_json(cls, text: str) -> "Config1D":
        return cls(json.loads(text))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x"])
            for x in self.points:
                w.writerow([repr(float(x))])

    @classmethod
    def read_csv(cls, path) -> "Config1D":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        return cls([float(r[0]) for r in rows[1:] if r])


class Config2D:
    """N pairwise-distinct planar points, optionally spiral-sorted."""

    __slots__ = ("points", "ordered_flag")

    def __init__(self, points, ordered_flag: bool = False):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("Config2D needs an (N, 2) array with N >= 2")
        if not np.all(np.isfinite(pts)):
            raise ValueError("Config2D coordinates must be finite")
        diff = pts[:, None, :] - pts[None, :, :]
        d2 = (diff ** 2).sum(axis=-1)
        np.fill_diagonal(d2, np.inf)
        if d2.min() <= 0.0:
            raise ValueError("Config2D points must be pairwise distinct")
        if ordered_flag:
            n = pts.shape[0]
            for k in range(n - 1):
                if not spiral_less(pts[k], pts[k + 1], n):
                    raise ValueError(
                        f"points {k} and {k + 1} violate the spiral ordering"
                    )
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ordered_flag", bool(ordered_flag))

    def __setattr__(self, name, value):
        raise AttributeError("Config2D is immutable")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def __len__(self):
        return self.points.shape[0]

    def __repr__(self):
        return f"Config2D({self.points.tolist()!r}, ordered_flag={self.ordered_flag})"

    def to_json(self) -> str:
        return json.dumps(self.points.tolist())

    @classmethod
    def from_json(cls, text: str, ordered_flag: bool = False) -> "Config2D":
        return cls(json.loads(text), ordered_flag=ordered_flag)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y"])
            for x, y in self.points:
                w.writerow([repr(float(x)), repr(float(y))])

    @classmethod
    def read_csv(cls, path) -> "Config2D":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        return cls([[float(r[0]), float(r[1])] for r in rows[1:] if r])


@dataclass(frozen=True)
class GameParams:
    """Model coefficients: player count, repulsion, noise, and cost weights.

    c1 weighs the collinearity (circumcircle) cost and only matters in 2D;
    c2 weighs the reciprocal-squared-gap cost. The consistency predicates
    identify the coefficient choices for which the closed-form value
    functions solve the corresponding Nash/HJB systems.
    """

    n_players: int
    beta: float
    sigma: float = 1.0
    c1: float = 0.0
    c2: float = 0.0
    potential: object = None  # equilibrium.PotentialSpec; None means quadratic

    def __post_init__(self):
        if self.n_players < 2:
            raise ValueError("need at least 2 players")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    # coefficient choices under which the explicit solutions are exact
    def closed_loop_1d_consistent(self, tol: float = 1e-12) -> bool:
        b, s = self.beta, self.sigma
        return abs(self.c2 - b * (1.5 * b - 2 * s * s) / 4.0) <= tol

    def open_loop_1d_consistent(self, tol: float = 1e-12) -> bool:
        b, s = self.beta, self.sigma
        return abs(self.c2 - b * (b - 2 * s * s) / 4.0) <= tol

    def closed_loop_2d_consistent(self, tol: float = 1e-12) -> bool:
        b = self.beta
        return (
            abs(self.c1 - b * b / 8.0) <= tol and abs(self.c2 - 3 * b * b / 8.0) <= tol
        )

    def open_loop_2d_consistent(self, tol: float = 1e-12) -> bool:
        b = self.beta
        return abs(self.c1 - b * b / 8.0) <= tol and abs(self.c2 - b * b / 4.0) <= tol


@dataclass(frozen=True)
class PairSums:
    """Leave-one-out empirical transforms at one player's location.

    h0 is the mean log-distance, h1 the mean inverse gap (a scalar in 1D,
    a planar vector in 2D), h2 the mean inverse squared gap. All three are
    1/(N-1)-weighted sums over the other N-1 particles.
    """

    h0: float
    h1: object
    h2: float


def pair_sums_1d(config: Config1D, i: int) -> PairSums:
    """Leave-one-out log/inverse/inverse-squared gap sums for player i (1-based)."""
    x = config.points
    n = x.size
    if not 1 <= i <= n:
        raise IndexError(f"player index {i} out of range 1..{n}")
    xi = x[i - 1]
    gaps = np.delete(xi - x, i - 1)
    w = 1.0 / (n - 1)
    return PairSums(
        h0=w * np.log(np.abs(gaps)).sum(),
        h1=w * (1.0 / gaps).sum(),
        h2=w * (1.0 / gaps ** 2).sum(),
    )


def pair_sums_2d(config: Config2D, i: int) -> PairSums:
    """Planar analog of pair_sums_1d; h1 is the vector mean of (z^i-z^k)/|z^i-z^k|^2."""
    z = config.points
    n = z.shape[0]
    if not 1 <= i <= n:
        raise IndexError(f"player index {i} out of range 1..{n}")
    d = np.delete(z[i - 1][None, :] - z, i - 1, axis=0)
    r2 = (d ** 2).sum(axis=1)
    w = 1.0 / (n - 1)
    return PairSums(
        h0=w * 0.5 * np.log(r2).sum(),
        h1=w * (d / r2[:, None]).sum(axis=0),
        h2=w * (1.0 / r2).sum(),
    )


def inv_sq_circumdiameter(xi, eta) -> float:
    """2/D^2 where D is the circumdiameter of the triangle (0, xi, eta).

    Uses the cross-product form 2*cross(xi,eta)^2 / (|xi|^2 |eta|^2 |xi-eta|^2),
    which stays stable near collinearity (never forms D or angles directly).
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    a2 = float(xi @ xi)
    b2 = float(eta @ eta)
    d = xi - eta
    c2 = float(d @ d)
    if a2 == 0.0 or b2 == 0.0 or c2 == 0.0:
        raise ValueError("degenerate triple: xi, eta must be nonzero and distinct")
    cross = xi[0] * eta[1] - xi[1] * eta[0]
    return 2.0 * cross * cross / (a2 * b2 * c2)


def _spiral_arg(x: float, y: float) -> float:
    # angle in (0, 2*pi]: atan2's (-pi, pi] remapped so the positive x-axis
    # gets 2*pi and anything strictly below it wraps up
    a = math.atan2(y, x)
    return a + 2.0 * math.pi if a <= 0.0 else a


def spiral_less(w, z, n: int) -> bool:
    """Strict spiral comparison w < z with floor(sqrt(n)*|.|) shells.

    Shells compare first; within a shell the angle in (0, 2*pi] compares;
    on equal angles the point with the *larger* modulus comes first.
    The origin is the smallest element.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    wx, wy = float(w[0]), float(w[1])
    zx, zy = float(z[0]), float(z[1])
    if wx == zx and wy == zy:
        return False
    rw = math.hypot(wx, wy)
    rz = math.hypot(zx, zy)
    if rw == 0.0:
        return True
    if rz == 0.0:
        return False
    root = math.sqrt(n)
    sw, sz = math.floor(root * rw), math.floor(root * rz)
    if sw != sz:
        return sw < sz
    aw, az = _spiral_arg(wx, wy), _spiral_arg(zx, zy)
    if aw != az:
        return aw < az
    return rw >= rz


def spiral_key(p, n: int):
    """Sort key realizing the same order as spiral_less."""
    x, y = float(p[0]), float(p[1])
    r = math.hypot(x, y)
    if r == 0.0:
        return (-1, 0.0, 0.0)
    return (math.floor(math.sqrt(n) * r), _spiral_arg(x, y), -r)


def spiral_sort(points) -> Config2D:
    """Spiral-sort a point cloud into an ordered Config2D."""
    pts = np.asarray(points, dtype=float)
    order = sorted(range(pts.shape[0]), key=lambda k: spiral_key(pts[k], pts.shape[0]))
    return Config2D(pts[order], ordered_flag=True)


def wasserstein_1d(p: float, xs, ys) -> float:
    """Exact d_p between two equally weighted sorted samples of the same size."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("samples must be flat and of equal length")
    if p < 1:
        raise ValueError("order p must be >= 1")
    return float(np.mean(np.abs(xs - ys) ** p) ** (1.0 / p))
