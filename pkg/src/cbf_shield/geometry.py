"""Admissible-set representations and level-set samplers.

Input sets U are boxes or explicit vertex lists; state sets X are boxes.
Level sets {x : h(x) = c} are measure-zero, so they are sampled by
bisection root-finding along random rays from interior anchor points
(rejection sampling would never terminate).
"""

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

LEVEL_TOL = 1e-8
MAX_BISECT = 200
MAX_VERTEX_DIM = 16


@dataclass(frozen=True)
class InputPolytope:
    """Compact admissible input set: axis-aligned box or explicit vertex list."""

    kind: str  # "box" | "vertex-list"
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    vertex_array: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "box":
            lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
            hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
            if lo.shape != hi.shape:
                raise ValueError("box bounds must have matching shapes")
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise ValueError("input set must be bounded (finite bounds)")
            if np.any(lo > hi):
                raise ValueError("box lower bound exceeds upper bound")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        elif self.kind == "vertex-list":
            verts = np.atleast_2d(np.asarray(self.vertex_array, dtype=float))
            if verts.size == 0 or not np.all(np.isfinite(verts)):
                raise ValueError("vertex list must be nonempty and finite")
            object.__setattr__(self, "vertex_array", verts)
        else:
            raise ValueError(f"unknown input-set kind {self.kind!r}")

    @property
    def dim(self) -> int:
        if self.kind == "box":
            return self.lower.shape[0]
        return self.vertex_array.shape[1]

    @classmethod
    def box(cls, lower, upper) -> "InputPolytope":
        return cls(kind="box", lower=lower, upper=upper)

    @classmethod
    def from_vertices(cls, vertices) -> "InputPolytope":
        return cls(kind="vertex-list", vertex_array=vertices)

    def clip(self, u: np.ndarray) -> np.ndarray:
        """Project componentwise onto the box (vertex lists: nearest vertex)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "box":
            return np.clip(u, self.lower, self.upper)
        d = np.linalg.norm(self.vertex_array - u, axis=1)
        return self.vertex_array[np.argmin(d)].copy()

    def contains(self, u: np.ndarray, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        if self.kind == "box":
            return bool(np.all(u >= self.lower - tol) and np.all(u <= self.upper + tol))
        hull_dist = np.min(np.linalg.norm(self.vertex_array - u, axis=1))
        return bool(hull_dist <= tol)


@dataclass(frozen=True)
class StateBox:
    """Compact admissible state box."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("state box bounds must have matching shapes")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("state box must be bounded")
        if np.any(lo >= hi):
            raise ValueError("state box must have positive volume")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.logical_and(
            np.all(x >= self.lower - tol, axis=-1),
            np.all(x <= self.upper + tol, axis=-1),
        )

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)


@dataclass
class LevelSetSample:
    """Points found on {x in X : h(x) = c}, each within LEVEL_TOL of the level."""

    level: float
    points: np.ndarray  # (k, n); k == 0 when the sample is empty
    empty: bool = False
    requested: int = 0

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.size == 0:
            self.points = self.points.reshape(0, self.points.shape[-1] if self.points.ndim > 1 else 1)
            self.empty = True


def vertices(U: InputPolytope) -> np.ndarray:
    """All extreme points of U; for an m-dimensional box, the 2^m corners.

    Boxes above MAX_VERTEX_DIM dimensions are refused (combinatorial
    blowup); callers must supply an explicit vertex list instead.
    """
    if U.kind == "vertex-list":
        return U.vertex_array.copy()
    m = U.dim
    if m > MAX_VERTEX_DIM:
        raise ValueError(
            f"box vertex enumeration refused for m={m} > {MAX_VERTEX_DIM}; "
            "supply a vertex-list input set"
        )
    corners = np.array(list(product(*zip(U.lower, U.upper))), dtype=float)
    return corners


def h_range(
    h: Callable[[np.ndarray], np.ndarray],
    X: StateBox,
    grid_density: Optional[int] = None,
) -> tuple[float, float]:
    """Range of h over X: uniform grid search refined by bounded local descent/ascent.

    Returns (h_min, h_max). Raises if h is numerically constant on X.
    """
    n = X.dim
    if grid_density is None:
        grid_density = 200 if n <= 2 else 50
    if grid_density < 2:
        raise ValueError("grid_density must be >= 2")
    axes = [np.linspace(X.lower[i], X.upper[i], grid_density) for i in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    vals = np.asarray(h(pts), dtype=float)
    i_min, i_max = int(np.argmin(vals)), int(np.argmax(vals))

    def _refine(x0: np.ndarray, sign: float) -> float:
        res = minimize(
            lambda x: sign * float(h(x[None, :])[0]),
            x0,
            method="L-BFGS-B",
            bounds=list(zip(X.lower, X.upper)),
        )
        return sign * float(res.fun)

    h_min = min(float(vals[i_min]), _refine(pts[i_min], +1.0))
    h_max = max(float(vals[i_max]), _refine(pts[i_max], -1.0))
    if not h_max - h_min > 1e-12:
        raise ValueError("barrier is constant on X (degenerate)")
    return h_min, h_max


def _ray_exit_lengths(origins: np.ndarray, dirs: np.ndarray, X: StateBox) -> np.ndarray:
    """Distance along each ray until the state box is exited."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = (X.lower - origins) / dirs
        t_hi = (X.upper - origins) / dirs
    t_far = np.maximum(t_lo, t_hi)
    t_far[~np.isfinite(t_far)] = np.inf
    return np.min(t_far, axis=1)


def sample_level_set(
    h: Callable[[np.ndarray], np.ndarray],
    X: StateBox,
    c: float,
    n_samples: int,
    seed: int,
    maximizer: Optional[np.ndarray] = None,
    anchor_budget: int = 200,
    ray_batches: int = 40,
) -> LevelSetSample:
    """Sample up to n_samples points with |h(x) - c| <= LEVEL_TOL inside X.

    Anchors are interior points with h > c (the maximizer of h plus random
    draws); random rays from anchors are bisected where h - c changes sign.
    Deterministic given the seed. An empty result is flagged, not raised:
    the level set may simply not intersect X.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    n = X.dim

    anchors = []
    if maximizer is not None and float(h(np.asarray(maximizer)[None, :])[0]) > c:
        anchors.append(np.asarray(maximizer, dtype=float))
    cand = X.sample(anchor_budget, rng)
    cand_vals = np.asarray(h(cand), dtype=float)
    anchors.extend(cand[cand_vals > c])
    if not anchors:
        return LevelSetSample(level=c, points=np.zeros((0, n)), empty=True, requested=n_samples)
    anchors = np.asarray(anchors)

    found = []
    batch = max(n_samples, 64)
    for _ in range(ray_batches):
        if len(found) >= n_samples:
            break
        idx = rng.integers(0, len(anchors), size=batch)
        origins = anchors[idx]
        dirs = rng.normal(size=(batch, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        t_exit = _ray_exit_lengths(origins, dirs, X)
        ends = origins + t_exit[:, None] * dirs
        end_vals = np.asarray(h(ends), dtype=float)
        hit = end_vals < c  # sign change along the ray (anchor side has h > c)
        if not np.any(hit):
            continue
        lo = np.zeros(hit.sum())
        hi = t_exit[hit]
        o, d = origins[hit], dirs[hit]
        for _ in range(MAX_BISECT):
            mid = 0.5 * (lo + hi)
            mv = np.asarray(h(o + mid[:, None] * d), dtype=float) - c
            done = np.abs(mv) <= LEVEL_TOL
            if np.all(done):
                break
            above = mv > 0
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        mid = 0.5 * (lo + hi)
        pts = o + mid[:, None] * d
        resid = np.abs(np.asarray(h(pts), dtype=float) - c)
        pts = pts[resid <= LEVEL_TOL]
        found.extend(pts)
    if not found:
        return LevelSetSample(level=c, points=np.zeros((0, n)), empty=True, requested=n_samples)
    pts = np.asarray(found)[:n_samples]
    return LevelSetSample(level=c, points=pts, empty=False, requested=n_samples)
