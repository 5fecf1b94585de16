"""Small dense solvers for the per-step filter problems.

solve_qp handles   min 1/2 ||u - target||^2  s.t.  a'u >= b,  lo <= u <= hi
exactly: the unique KKT multiplier of the halfspace constraint is the root
of a monotone piecewise-linear equation, found by bisection over its
breakpoints, so termination is exact up to floating point.

solve_socp handles  min ||u - target||  s.t.  ||L u + l|| <= a'u + b,
lo <= u <= hi  via ADMM on the standard conic form (alternating projection
onto the cones and the affine set with over-relaxation). Sizes here are
m <= 4, so robustness beats speed and no external solver is needed.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

QP_TOL = 1e-8
SOCP_TOL = 1e-8
SOCP_MAX_ITER = 20000
SOCP_RELAX = 1.6


@dataclass
class QpProblem:
    target: np.ndarray          # projection point (nominal input)
    a: np.ndarray               # halfspace a'u >= b
    b: float
    lower: np.ndarray           # box (entries may be +-inf)
    upper: np.ndarray

    def __post_init__(self):
        self.target = np.atleast_1d(np.asarray(self.target, dtype=float))
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float))
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if np.any(self.lower > self.upper):
            raise ValueError("empty box")
        if not np.isfinite(self.b) or not np.all(np.isfinite(self.a)):
            raise ValueError("constraint coefficients must be finite")


@dataclass
class SocpProblem:
    target: np.ndarray          # objective is ||u - target|| (epigraph internal)
    L: np.ndarray               # cone ||L u + l|| <= a'u + b
    l: np.ndarray
    a: np.ndarray
    b: float
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.target = np.atleast_1d(np.asarray(self.target, dtype=float))
        m = self.target.shape[0]
        self.L = np.atleast_2d(np.asarray(self.L, dtype=float))
        self.l = np.atleast_1d(np.asarray(self.l, dtype=float))
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float))
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if self.L.shape[1] != m or self.a.shape[0] != m:
            raise ValueError("cone dimensions inconsistent with input dimension")


@dataclass
class SolveResult:
    u: np.ndarray
    status: str                 # optimal | infeasible | max_iter
    iterations: int = 0
    residual: float = 0.0


def _clamp(u, lo, hi):
    return np.minimum(np.maximum(u, lo), hi)


def solve_qp(p: QpProblem, tol: float = QP_TOL) -> SolveResult:
    """Exact projection of target onto {a'u >= b} intersected with the box."""
    lo, hi, a, b = p.lower, p.upper, p.a, p.b
    u0 = _clamp(p.target, lo, hi)
    if a @ u0 >= b - tol:
        return SolveResult(u=u0, status="optimal")

    # best attainable value of a'u over the box
    best = float(np.sum(np.where(a >= 0, a * hi, a * lo)))
    if best < b - tol:
        u_best = np.where(a >= 0, hi, lo)
        return SolveResult(u=_clamp(u_best, lo, hi), status="infeasible")

    # g(lam) = a' clamp(target + lam a) is nondecreasing in lam >= 0
    def g(lam):
        return float(a @ _clamp(p.target + lam * a, lo, hi))

    lam_hi = 1.0
    for _ in range(200):
        if g(lam_hi) >= b:
            break
        lam_hi *= 2.0
    lam_lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lam_lo + lam_hi)
        if g(mid) < b:
            lam_lo = mid
        else:
            lam_hi = mid
        if lam_hi - lam_lo <= 1e-16 * max(1.0, lam_hi):
            break
    u = _clamp(p.target + lam_hi * a, lo, hi)
    return SolveResult(u=u, status="optimal")


def _proj_soc(t: float, z: np.ndarray) -> tuple[float, np.ndarray]:
    """Euclidean projection onto the second-order cone {(t, z) : ||z|| <= t}."""
    nz = float(np.linalg.norm(z))
    if nz <= t:
        return t, z
    if nz <= -t:
        return 0.0, np.zeros_like(z)
    alpha = 0.5 * (1.0 + t / nz)
    return alpha * nz, alpha * z


def solve_socp(p: SocpProblem, tol: float = SOCP_TOL,
               max_iter: int = SOCP_MAX_ITER) -> SolveResult:
    """ADMM / operator splitting on the conic form of the filter problem.

    Variables x = (u, j). Slack blocks: epigraph cone (j, (u - target)/sqrt2),
    filter cone (a'u + b, L u + l), and box slacks u - lo >= 0, hi - u >= 0.
    Infinite box entries are dropped from the slack blocks.
    """
    m = p.target.shape[0]
    k = p.L.shape[0]
    fin_lo = np.where(np.isfinite(p.lower))[0]
    fin_hi = np.where(np.isfinite(p.upper))[0]

    # rows: s = Ax + c with cone membership per block
    # epigraph block: (j, (u - target)/sqrt2)   in SOC_{m+1}
    # filter  block: (a'u + b, L u + l)         in SOC_{k+1}
    # box blocks:    u_i - lo_i,  hi_i - u_i    in R_+
    rows = []
    offsets = []
    sq2 = 1.0 / np.sqrt(2.0)
    A = np.zeros((1 + m + 1 + k + len(fin_lo) + len(fin_hi), m + 1))
    c = np.zeros(A.shape[0])
    r = 0
    A[r, m] = 1.0
    r += 1
    for i in range(m):
        A[r, i] = sq2
        c[r] = -sq2 * p.target[i]
        r += 1
    A[r, :m] = p.a
    c[r] = p.b
    r += 1
    A[r:r + k, :m] = p.L
    c[r:r + k] = p.l
    r += k
    for i in fin_lo:
        A[r, i] = 1.0
        c[r] = -p.lower[i]
        r += 1
    for i in fin_hi:
        A[r, i] = -1.0
        c[r] = p.upper[i]
        r += 1

    def proj_cones(s):
        out = s.copy()
        t, z = _proj_soc(s[0], s[1:1 + m])
        out[0], out[1:1 + m] = t, z
        base = 1 + m
        t, z = _proj_soc(s[base], s[base + 1:base + 1 + k])
        out[base], out[base + 1:base + 1 + k] = t, z
        out[base + 1 + k:] = np.maximum(s[base + 1 + k:], 0.0)
        return out

    obj = np.zeros(m + 1)
    obj[m] = 1.0  # minimize epigraph variable j

    rho = 1.0
    AtA = A.T @ A + 1e-12 * np.eye(m + 1)
    chol = np.linalg.cholesky(AtA)

    x = np.zeros(m + 1)
    x[:m] = _clamp(p.target, np.where(np.isfinite(p.lower), p.lower, -1e30),
                   np.where(np.isfinite(p.upper), p.upper, 1e30))
    s = proj_cones(A @ x + c)
    y = np.zeros_like(s)

    it = 0
    prim = dual = np.inf
    for it in range(1, max_iter + 1):
        rhs = A.T @ (s - c - y / rho) - obj / rho
        w = np.linalg.solve(chol, rhs)
        x = np.linalg.solve(chol.T, w)
        Ax = A @ x + c
        Ax_rel = SOCP_RELAX * Ax + (1.0 - SOCP_RELAX) * s
        s_new = proj_cones(Ax_rel + y / rho)
        y = y + rho * (Ax_rel - s_new)
        prim = float(np.linalg.norm(Ax - s_new))
        dual = float(rho * np.linalg.norm(A.T @ (s_new - s)))
        s = s_new
        if prim <= tol and dual <= tol:
            break

    u = x[:m]
    lo_f = np.where(np.isfinite(p.lower), p.lower, -np.inf)
    hi_f = np.where(np.isfinite(p.upper), p.upper, np.inf)
    u = _clamp(u, lo_f, hi_f)
    cone_resid = float(np.linalg.norm(p.L @ u + p.l) - (p.a @ u + p.b))
    if prim <= tol and dual <= tol:
        status = "optimal" if cone_resid <= 1e-6 else "infeasible"
    else:
        status = "max_iter" if cone_resid <= 1e-5 else "infeasible"
    return SolveResult(u=u, status=status, iterations=it,
                       residual=max(prim, dual, cone_resid))


def socp_feasible_interval(p: SocpProblem) -> Optional[tuple[float, float]]:
    """For scalar u: exact feasible interval of the filter cone within the box.

    ||L u + l|| <= a u + b with u scalar reduces to a quadratic inequality
    plus the sign condition a u + b >= 0. Returns None when empty.
    """
    if p.target.shape[0] != 1:
        raise ValueError("closed-form interval only available for scalar input")
    L = p.L[:, 0]
    a, b = float(p.a[0]), p.b
    lo = float(p.lower[0]) if np.isfinite(p.lower[0]) else -1e12
    hi = float(p.upper[0]) if np.isfinite(p.upper[0]) else 1e12

    # quadratic (||Lu + l||^2 - (au+b)^2) <= 0
    A = float(L @ L - a * a)
    B = float(2.0 * (L @ p.l - a * b))
    C = float(p.l @ p.l - b * b)
    if abs(A) < 1e-14:
        if abs(B) < 1e-14:
            qlo, qhi = (lo, hi) if C <= 1e-14 else (1.0, 0.0)
        elif B > 0:
            qlo, qhi = lo, min(hi, -C / B)
        else:
            qlo, qhi = max(lo, -C / B), hi
    else:
        disc = B * B - 4.0 * A * C
        if A > 0:
            if disc < 0:
                return None
            r1 = (-B - np.sqrt(disc)) / (2.0 * A)
            r2 = (-B + np.sqrt(disc)) / (2.0 * A)
            qlo, qhi = max(lo, r1), min(hi, r2)
        else:
            if disc < 0:
                qlo, qhi = lo, hi
            else:
                r1 = (-B + np.sqrt(disc)) / (2.0 * A)
                r2 = (-B - np.sqrt(disc)) / (2.0 * A)
                # feasible outside (r1, r2); intersect with sign condition below
                cands = []
                if r1 >= lo:
                    cands.append((lo, min(hi, r1)))
                if r2 <= hi:
                    cands.append((max(lo, r2), hi))
                best = None
                for clo, chi in cands:
                    slo, shi = _sign_clip(clo, chi, a, b)
                    if slo is not None and (best is None or shi - slo > best[1] - best[0]):
                        best = (slo, shi)
                return best
    if qlo > qhi:
        return None
    return _sign_clip(qlo, qhi, a, b)


def _sign_clip(lo, hi, a, b):
    if abs(a) < 1e-14:
        return (lo, hi) if b >= 0 and lo <= hi else None
    if a > 0:
        lo = max(lo, -b / a)
    else:
        hi = min(hi, -b / a)
    if lo > hi:
        return None
    return lo, hi
