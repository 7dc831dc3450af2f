"""Metric structure of the unit ball.

The ball carries the arccos distance obtained by lifting points to the
upper hemisphere of the unit sphere one dimension up; this module
provides that distance, its chord-equivalent companion, quasi-uniform
probe grids, and greedy maximal separated subsets.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import defaults
from .errors import DimensionMismatchError, InvalidArgumentError

NORM_SLACK = 1e-12
UNIT_SLACK = 1e-10


@dataclass(frozen=True)
class Point:
    """A point of the closed unit ball, clamped onto it on construction."""

    coords: tuple

    def __post_init__(self):
        arr = np.asarray(self.coords, dtype=float)
        if arr.ndim != 1 or arr.size not in (2, 3):
            raise InvalidArgumentError(f"expected a 2- or 3-vector, got shape {arr.shape}")
        r = float(np.linalg.norm(arr))
        if r > 1.0 + NORM_SLACK:
            raise InvalidArgumentError(f"point norm {r} exceeds 1 beyond tolerance")
        if r > 1.0:
            arr = arr / r
        object.__setattr__(self, "coords", tuple(float(c) for c in arr))

    @property
    def dimension(self) -> int:
        return len(self.coords)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


def as_coords(x, dim=None) -> np.ndarray:
    """Coerce a Point or array-like into a validated coordinate vector."""
    arr = x.array if isinstance(x, Point) else np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise InvalidArgumentError(f"expected a single point, got shape {arr.shape}")
    if dim is not None and arr.size != dim:
        raise DimensionMismatchError(f"expected dimension {dim}, got {arr.size}")
    r = float(np.linalg.norm(arr))
    if r > 1.0 + NORM_SLACK:
        raise InvalidArgumentError(f"point norm {r} exceeds 1 beyond tolerance")
    if r > 1.0:
        arr = arr / r
    return arr


def _heights(X: np.ndarray) -> np.ndarray:
    return np.sqrt(np.clip(1.0 - np.sum(X * X, axis=-1), 0.0, None))


def lift(X: np.ndarray) -> np.ndarray:
    """Upper-hemisphere lift x -> (x, sqrt(1-|x|^2))."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.concatenate([X, _heights(X)[:, None]], axis=1)


def dist(x, y) -> float:
    """Arccos distance on the ball; arguments may be Points or arrays.

    Evaluated in the half-angle form 2 atan2(|xbar - ybar|, |xbar + ybar|)
    of the lifted points, which is exact at both coincidence and antipodes
    where the raw arccos loses precision.
    """
    xv, yv = as_coords(x), as_coords(y)
    if xv.size != yv.size:
        raise DimensionMismatchError(f"dimensions {xv.size} and {yv.size} differ")
    hx = math.sqrt(max(0.0, 1.0 - xv @ xv))
    hy = math.sqrt(max(0.0, 1.0 - yv @ yv))
    minus = float(np.sum((xv - yv) ** 2)) + (hx - hy) ** 2
    plus = float(np.sum((xv + yv) ** 2)) + (hx + hy) ** 2
    return 2.0 * math.atan2(math.sqrt(minus), math.sqrt(plus))


def dist_many(X, Y) -> np.ndarray:
    """Pairwise arccos distances between rows of X (m, d) and Y (k, d)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatchError(f"dimensions {X.shape[1]} and {Y.shape[1]} differ")
    Xb, Yb = lift(X), lift(Y)
    inner = Xb @ Yb.T
    x2 = np.sum(Xb * Xb, axis=1)[:, None]
    y2 = np.sum(Yb * Yb, axis=1)[None, :]
    minus = np.sqrt(np.clip(x2 + y2 - 2.0 * inner, 0.0, None))
    plus = np.sqrt(np.clip(x2 + y2 + 2.0 * inner, 0.0, None))
    return 2.0 * np.arctan2(minus, plus)


def dist_tilde(x, y) -> float:
    """Chord-style distance; equals 2 sin(dist/2) identically."""
    xv, yv = as_coords(x), as_coords(y)
    if xv.size != yv.size:
        raise DimensionMismatchError(f"dimensions {xv.size} and {yv.size} differ")
    hx = math.sqrt(max(0.0, 1.0 - xv @ xv))
    hy = math.sqrt(max(0.0, 1.0 - yv @ yv))
    return math.sqrt(float(np.sum((xv - yv) ** 2)) + (hx - hy) ** 2)


def sphere_dist(xbar, ybar) -> float:
    """Geodesic distance between unit vectors of the ambient sphere."""
    xv = np.asarray(xbar, dtype=float)
    yv = np.asarray(ybar, dtype=float)
    if xv.shape != yv.shape or xv.ndim != 1:
        raise DimensionMismatchError("sphere points must be same-length vectors")
    for v in (xv, yv):
        if abs(np.linalg.norm(v) - 1.0) > UNIT_SLACK:
            raise InvalidArgumentError("sphere_dist requires unit vectors")
    return 2.0 * math.atan2(float(np.linalg.norm(xv - yv)), float(np.linalg.norm(xv + yv)))


def ball_grid(dim: int, resolution: int | None = None) -> np.ndarray:
    """Deterministic quasi-uniform grid on the ball (uniform for the arccos metric).

    Points are placed on latitude rings of the upper hemisphere and
    projected down, so the covering radius is roughly uniform in the
    metric rather than in the Euclidean distance.
    """
    if dim not in (2, 3):
        raise InvalidArgumentError("only dimensions 2 and 3 are supported")
    if resolution is None:
        resolution = defaults.GRID_RESOLUTION[dim]
    if resolution < 8:
        raise InvalidArgumentError("resolution too small")
    if dim == 2:
        spacing = math.sqrt(2.0 * math.pi / resolution)
        n_rings = max(2, int(math.ceil((math.pi / 2) / spacing)))
        step = (math.pi / 2) / n_rings
        pts = [np.zeros((1, 2))]
        for j in range(n_rings):
            theta = (j + 0.5) * step
            count = max(1, int(round(2.0 * math.pi * math.sin(theta) / step)))
            phis = 2.0 * math.pi * (np.arange(count) + 0.5 * (j % 2)) / count
            radius = math.sin(theta)
            ring = np.stack([radius * np.cos(phis), radius * np.sin(phis)], axis=1)
            pts.append(ring)
        return np.concatenate(pts, axis=0)
    # dim == 3: latitude shells, each a Fibonacci sphere scaled by sin(chi)
    spacing = (math.pi**2 / resolution) ** (1.0 / 3.0)
    n_shells = max(2, int(math.ceil((math.pi / 2) / spacing)))
    step = (math.pi / 2) / n_shells
    pts = [np.zeros((1, 3))]
    golden = math.pi * (3.0 - math.sqrt(5.0))
    for j in range(n_shells):
        chi = (j + 0.5) * step
        count = max(1, int(round(4.0 * math.pi * math.sin(chi) ** 2 / step**2)))
        k = np.arange(count)
        z = 1.0 - 2.0 * (k + 0.5) / count
        rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        phi = golden * k
        shell = math.sin(chi) * np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
        pts.append(shell)
    return np.concatenate(pts, axis=0)


@dataclass(frozen=True)
class SeparatedSet:
    """A pairwise separated center set together with its separation radius."""

    epsilon: float
    centers: np.ndarray  # (k, d)

    @property
    def dimension(self) -> int:
        return int(self.centers.shape[1])

    def __len__(self) -> int:
        return int(self.centers.shape[0])

    def covering_report(self, probes: np.ndarray) -> dict:
        """Min/max overlap counts of closed epsilon-balls over probe points."""
        d = dist_many(probes, self.centers)
        counts = np.sum(d <= self.epsilon + 1e-12, axis=1)
        return {
            "min_overlap": int(counts.min()),
            "max_overlap": int(counts.max()),
            "covered": bool(counts.min() >= 1),
        }

    def min_pairwise_dist(self) -> float:
        if len(self) < 2:
            return math.inf
        d = dist_many(self.centers, self.centers)
        np.fill_diagonal(d, np.inf)
        return float(d.min())

    def to_csv(self, path) -> None:
        dim = self.dimension
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epsilon", "center_index"] + [f"coord_{i}" for i in range(dim)])
            for i, c in enumerate(self.centers):
                writer.writerow([repr(self.epsilon), i] + [repr(float(v)) for v in c])

    @staticmethod
    def from_csv(path) -> "SeparatedSet":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        dim = len(header) - 2
        eps = float(body[0][0])
        centers = np.array([[float(v) for v in row[2 : 2 + dim]] for row in body])
        return SeparatedSet(epsilon=eps, centers=centers)


def maximal_separated_set(
    epsilon: float,
    seed: int = 0,
    dim: int = 2,
    resolution: int | None = None,
) -> SeparatedSet:
    """Greedy maximal epsilon-separated subset of a quasi-uniform candidate grid.

    Greedy insertion over a seed-shuffled candidate grid is maximal
    relative to that grid: every candidate ends up within epsilon of
    some accepted center, so covering holds exactly on the grid.
    """
    if not (0.0 < epsilon <= math.pi):
        raise InvalidArgumentError("epsilon must lie in (0, pi]")
    grid = ball_grid(dim, resolution)
    order = np.random.default_rng(seed).permutation(len(grid))
    centers: list[np.ndarray] = []
    center_arr = np.empty((0, dim))
    for idx in order:
        cand = grid[idx]
        if len(centers) == 0:
            centers.append(cand)
            center_arr = cand[None, :]
            continue
        if dist_many(cand[None, :], center_arr).min() >= epsilon:
            centers.append(cand)
            center_arr = np.vstack([center_arr, cand])
    return SeparatedSet(epsilon=float(epsilon), centers=center_arr)


def random_ball_points(count: int, dim: int, seed: int = 0) -> np.ndarray:
    """Seeded sample of ball points, boundary-heavy (pushforward of the
    uniform hemisphere measure), convenient for metric property checks."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, dim + 1))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    g[:, dim] = np.abs(g[:, dim])
    return g[:, :dim]
