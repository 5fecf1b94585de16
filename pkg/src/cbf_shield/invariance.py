"""Offline control-invariance verification under input constraints.

For each level c of the barrier, the worst-case best-achievable Lie
derivative over the level set bounds which class-K_e functions make the
barrier condition feasible:

    gamma_lower(c)  = -min over x in C_c of max over u in U of hdot(x, u)
    gamma_target(c) = -min over x in C_c and u in U of hdot(x, u)

A level is feasible iff gamma_lower(c) <= 0 (the worst state can still
achieve a nonnegative hdot). hdot is affine in u, so the max/min over a
polytopic U is attained at a vertex and vertex enumeration is exact. A
probabilistic bound model replaces hdot by its pessimistic estimate
mean - s * sigma; the sigma term is concave-in-u, handled by a scalar
ternary search (refining the best vertex for m > 1).
"""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from .barrier import BarrierCandidate, lie_derivative
from .dynamics import ControlAffineDynamics
from .geometry import InputPolytope, StateBox, h_range, sample_level_set, vertices

DEFAULT_LEVELS = 50
DEFAULT_SAMPLES = 500


class HdotBoundModel:
    """Affine(+concave) lower-bound model of hdot for verification.

    affine_terms(x) returns (base, lin) with hdot_bound(x, u) =
    base + lin @ u - s * ||L u + l|| where (L, l, s) come from cone_terms
    (deterministic models return None there).
    """

    def __init__(self, dyn: ControlAffineDynamics, h: BarrierCandidate,
                 ensemble=None, s: float = 0.0):
        self.dyn = dyn
        self.h = h
        self.ensemble = ensemble
        self.s = float(s)

    @property
    def probabilistic(self) -> bool:
        return self.ensemble is not None and self.s > 0

    def affine_terms(self, x: np.ndarray):
        ld = lie_derivative(self.dyn, self.h, x)
        base, lin = ld.lf, ld.lg
        if self.ensemble is not None:
            alpha, beta = self.ensemble.affine_coefficients(x)
            base = base + alpha
            lin = lin + beta
        return base, lin

    def cone_terms(self, x: np.ndarray):
        if not self.probabilistic:
            return None
        return self.ensemble.cone_batch(x)

    def max_over_u(self, x: np.ndarray, U: InputPolytope) -> np.ndarray:
        """max_u of the hdot bound per sample. Exact at vertices for the
        affine part; scalar inputs get an additional ternary search for the
        concave sigma term, m > 1 refines the best vertex by projected
        supergradient ascent."""
        base, lin = self.affine_terms(x)
        V = vertices(U)
        vals = base[:, None] + lin @ V.T
        if not self.probabilistic:
            return np.max(vals, axis=1)
        Ls, ls = self.cone_terms(x)
        pen = self.s * np.linalg.norm(
            np.einsum("nij,vj->nvi", Ls, V) + ls[:, None, :], axis=2)
        vals = vals - pen
        best = np.max(vals, axis=1)
        if U.kind == "box" and U.dim == 1:
            lo, hi = float(U.lower[0]), float(U.upper[0])
            best = np.maximum(best, _ternary_max_scalar(
                base, lin[:, 0], Ls, ls, self.s, lo, hi))
        return best

    def min_over_u(self, x: np.ndarray, U: InputPolytope) -> np.ndarray:
        """min_u of the hdot bound: affine minus a convex penalty is concave,
        so the minimum over a polytope is attained at a vertex (exact)."""
        base, lin = self.affine_terms(x)
        V = vertices(U)
        vals = base[:, None] + lin @ V.T
        if self.probabilistic:
            Ls, ls = self.cone_terms(x)
            pen = self.s * np.linalg.norm(
                np.einsum("nij,vj->nvi", Ls, V) + ls[:, None, :], axis=2)
            vals = vals - pen
        return np.min(vals, axis=1)


def _ternary_max_scalar(base, lin, Ls, ls, s, lo, hi, iters: int = 120):
    """Vectorized ternary search for max of a 1-D concave function on [lo, hi]."""
    a = np.full_like(base, lo)
    b = np.full_like(base, hi)
    L1 = Ls[:, :, 0]

    def val(u):
        return base + lin * u - s * np.linalg.norm(L1 * u[:, None] + ls, axis=1)

    for _ in range(iters):
        m1 = a + (b - a) / 3.0
        m2 = b - (b - a) / 3.0
        keep_left = val(m1) >= val(m2)
        b = np.where(keep_left, m2, b)
        a = np.where(keep_left, a, m1)
    return val(0.5 * (a + b))


@dataclass
class GammaProfile:
    """Sampled curves c_k -> gamma_lower, gamma_target over [h_min, h_max]."""

    levels: np.ndarray
    gamma_lower: np.ndarray
    gamma_target: np.ndarray
    missing: np.ndarray              # levels whose set had no usable samples
    samples_per_level: int
    seed: int
    provenance: str = "deterministic"   # or "probabilistic(s=...)"
    h_min: float = 0.0
    h_max: float = 0.0

    def __post_init__(self):
        self.levels = np.asarray(self.levels, dtype=float)
        self.gamma_lower = np.asarray(self.gamma_lower, dtype=float)
        self.gamma_target = np.asarray(self.gamma_target, dtype=float)
        self.missing = np.asarray(self.missing, dtype=bool)
        if self.levels.size < 2:
            raise ValueError("profile needs at least two levels")
        if np.any(np.diff(self.levels) <= 0):
            raise ValueError("levels must be strictly ascending")
        ok = ~self.missing
        if np.any(self.gamma_target[ok] < self.gamma_lower[ok] - 1e-9):
            raise ValueError("gamma_target must dominate gamma_lower")

    def present(self):
        ok = ~self.missing
        return self.levels[ok], self.gamma_lower[ok], self.gamma_target[ok]

    def restrict(self, c_min: float, shift: bool = False) -> "GammaProfile":
        """Sub-profile with levels >= c_min, optionally re-zeroed at c_min.

        Used to design a class-K_e for a superlevel set {h >= c_min}: the
        barrier becomes h - c_min, so profile levels shift accordingly.
        """
        keep = self.levels >= c_min - 1e-12
        if keep.sum() < 2:
            raise ValueError("restriction leaves fewer than two levels")
        lv = self.levels[keep] - (c_min if shift else 0.0)
        return GammaProfile(
            levels=lv, gamma_lower=self.gamma_lower[keep],
            gamma_target=self.gamma_target[keep], missing=self.missing[keep],
            samples_per_level=self.samples_per_level, seed=self.seed,
            provenance=self.provenance, h_min=float(lv[0]), h_max=float(lv[-1]))

    def to_dict(self) -> dict:
        return {
            "levels": self.levels.tolist(),
            "gamma_lower": [None if m else v for v, m in zip(self.gamma_lower, self.missing)],
            "gamma_target": [None if m else v for v, m in zip(self.gamma_target, self.missing)],
            "meta": {
                "samples_per_level": self.samples_per_level,
                "seed": self.seed,
                "provenance": self.provenance,
                "h_min": self.h_min,
                "h_max": self.h_max,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GammaProfile":
        levels = np.asarray(d["levels"], dtype=float)
        gl = np.array([np.nan if v is None else v for v in d["gamma_lower"]])
        gt = np.array([np.nan if v is None else v for v in d["gamma_target"]])
        meta = d.get("meta", {})
        return cls(levels=levels, gamma_lower=gl, gamma_target=gt,
                   missing=np.isnan(gl), samples_per_level=meta.get("samples_per_level", 0),
                   seed=meta.get("seed", 0), provenance=meta.get("provenance", "deterministic"),
                   h_min=meta.get("h_min", float(levels[0])), h_max=meta.get("h_max", float(levels[-1])))


@dataclass
class InvarianceCertificate:
    """Result of verifying which superlevel sets are control invariant."""

    verified_level: Optional[float]   # smallest certified level c*, None if none
    boundary_feasible: bool           # worst boundary state admits hdot >= 0
    margin: float                     # min over boundary samples of max_u hdot
    levels: int
    samples_per_level: int
    seed: int
    diagnosis: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _max_workers() -> int:
    cap = os.environ.get("CBF_SHIELD_THREADS")
    if cap:
        return max(1, int(cap))
    return min(8, os.cpu_count() or 1)


def boundary_feasibility(model: HdotBoundModel, U: InputPolytope, X: StateBox,
                         n_samples: int = DEFAULT_SAMPLES, seed: int = 0,
                         level: float = 0.0) -> tuple[bool, float]:
    """Whether every sampled boundary state admits an input with hdot >= 0.

    Returns (feasible, margin) with margin = min over samples of the
    best-achievable hdot bound.
    """
    sample = sample_level_set(model.h, X, level, n_samples, seed)
    if sample.empty:
        raise ValueError("safe set boundary not found in X")
    best = model.max_over_u(sample.points, U)
    margin = float(np.min(best))
    return margin >= 0.0, margin


def _profile_level(model, U, X, c, n_samples, seed):
    sample = sample_level_set(model.h, X, c, n_samples, seed)
    if sample.empty:
        return np.nan, np.nan
    g_low = -float(np.min(model.max_over_u(sample.points, U)))
    g_tgt = -float(np.min(model.min_over_u(sample.points, U)))
    return g_low, g_tgt


def gamma_profiles(model: HdotBoundModel, U: InputPolytope, X: StateBox,
                   n_levels: int = DEFAULT_LEVELS, n_samples: int = DEFAULT_SAMPLES,
                   seed: int = 0, extra_levels: Optional[list] = None,
                   level_range: Optional[tuple] = None) -> GammaProfile:
    """gamma_lower and gamma_target on a level grid spanning [h_min, h_max].

    The grid is uniform plus any caller-pinned extra levels (certification
    targets land exactly on a sampled level). Levels whose set has no
    samples inside X are flagged missing, never interpolated. Per-level
    seeds are fixed up front, so results are identical regardless of
    threading."""
    if n_levels < 2:
        raise ValueError("need at least two levels")
    if level_range is not None:
        h_lo, h_hi = level_range
    else:
        h_lo, h_hi = h_range(model.h, X)
    grid = set(np.linspace(h_lo, h_hi, n_levels).tolist())
    pinned = list(extra_levels or [])
    if h_lo <= 0.0 <= h_hi:
        pinned.append(0.0)  # the safe-set boundary is always of interest
    for c in pinned:
        if h_lo <= c <= h_hi:
            grid.add(float(c))
    levels = np.array(sorted(grid))
    seeds = np.random.SeedSequence(seed).spawn(len(levels))
    seeds = [int(s.generate_state(1)[0]) for s in seeds]

    workers = _max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(
                lambda args: _profile_level(model, U, X, *args),
                [(c, n_samples, sd) for c, sd in zip(levels, seeds)]))
    else:
        results = [_profile_level(model, U, X, c, n_samples, sd)
                   for c, sd in zip(levels, seeds)]
    g_low = np.array([r[0] for r in results])
    g_tgt = np.array([r[1] for r in results])
    prov = f"probabilistic(s={model.s})" if model.probabilistic else "deterministic"
    return GammaProfile(levels=levels, gamma_lower=g_low, gamma_target=g_tgt,
                        missing=np.isnan(g_low), samples_per_level=n_samples,
                        seed=seed, provenance=prov, h_min=h_lo, h_max=h_hi)


def verify_superlevel(profile: GammaProfile) -> InvarianceCertificate:
    """Smallest sampled level c* such that gamma_lower <= 0 from c* upward.

    gamma_lower(c) <= 0 means every sampled state of C_c admits an input
    with nonnegative hdot; requiring it for all higher levels makes the
    certified set a genuine superlevel set. Missing levels are excluded
    from certification (soundness over coverage).
    """
    lv, gl, _ = profile.present()
    if lv.size == 0:
        raise ValueError("profile has no usable levels")
    feasible = gl <= 0.0
    suffix_ok = np.flip(np.logical_and.accumulate(np.flip(feasible)))
    idx = np.where(suffix_ok)[0]

    zero_i = int(np.argmin(np.abs(lv - 0.0)))
    has_zero = abs(lv[zero_i]) <= 1e-9
    boundary_ok = bool(feasible[zero_i]) if has_zero else False
    margin_at_boundary = float(-gl[zero_i]) if has_zero else float("nan")

    if idx.size == 0:
        return InvarianceCertificate(
            verified_level=None, boundary_feasible=boundary_ok,
            margin=margin_at_boundary, levels=len(profile.levels),
            samples_per_level=profile.samples_per_level, seed=profile.seed,
            diagnosis=("no feasible superlevel set: every sampled level has "
                       "gamma_lower > 0; only a larger set could be rendered "
                       "safe, or the model needs more data"))
    c_star = float(lv[idx[0]])
    return InvarianceCertificate(
        verified_level=c_star, boundary_feasible=boundary_ok,
        margin=margin_at_boundary, levels=len(profile.levels),
        samples_per_level=profile.samples_per_level, seed=profile.seed,
        diagnosis="" if c_star <= 0 else
        f"zero level not certified; smallest certified superlevel at c*={c_star:.6g}")
