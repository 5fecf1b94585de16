"""Barrier candidates h, gradients, and Lie derivatives along dynamics.

Descriptors:
  * ellipsoid       h(x) = 1 - (x - c)' P (x - c), P symmetric positive definite
  * gated_ellipsoid separable quadratic bowl whose velocity gradient is
                    smoothly attenuated inside a localized gate region, so
                    input authority (which enters through dh/dx2) is locally
                    weak near part of the zero level set
  * custom          arbitrary callable; gradient by central differences

The gated form exists because a plain centered quadratic gives every level
set the same feasibility sign under a bounded torque: reproducing a safe
set whose boundary is infeasible under input limits while slightly smaller
superlevel sets are certifiable requires breaking that self-similarity.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import erf

from .dynamics import ControlAffineDynamics
from .geometry import StateBox

FD_STEP = 1e-5
SQRT_2PI = float(np.sqrt(2.0 * np.pi))


@dataclass
class LieDerivativeValue:
    """Pair (L_f h, L_g h) reconstructing hdot(x, u) = lf + lg @ u."""

    lf: np.ndarray  # (...,)
    lg: np.ndarray  # (..., m)


class BarrierCandidate:
    """Scalar barrier h with gradient; safe set is {x : h(x) >= 0}."""

    def __init__(self, h: Callable[[np.ndarray], np.ndarray],
                 grad: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 descriptor: Optional[dict] = None):
        self._h = h
        self._grad = grad if grad is not None else self._fd_grad
        self.descriptor = descriptor or {"type": "custom"}

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self._h(np.asarray(x, dtype=float)), dtype=float)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self._grad(np.asarray(x, dtype=float)), dtype=float)

    def _fd_grad(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[-1]
        out = np.empty_like(x)
        for i in range(n):
            e = np.zeros(n)
            e[i] = FD_STEP
            out[..., i] = (self(x + e) - self(x - e)) / (2.0 * FD_STEP)
        return out if out.shape[0] > 1 else out[0]

    def validate_boundary_gradient(self, X: StateBox, n_samples: int = 200,
                                   seed: int = 0, h_tol: float = 1e-6,
                                   grad_floor: float = 1e-9) -> bool:
        """Numerically spot-check grad h != 0 near the zero level set."""
        from .geometry import sample_level_set

        sample = sample_level_set(self, X, 0.0, n_samples, seed)
        if sample.empty:
            return True  # boundary absent from X: nothing to check
        pts = sample.points[np.abs(self(sample.points)) <= h_tol]
        if pts.size == 0:
            return True
        norms = np.linalg.norm(self.grad(pts), axis=-1)
        return bool(np.all(norms > grad_floor))


def ellipsoid(center, P) -> BarrierCandidate:
    """h(x) = 1 - (x - center)' P (x - center) with P symmetric positive definite."""
    c = np.atleast_1d(np.asarray(center, dtype=float))
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if not np.allclose(P, P.T, atol=1e-12):
        raise ValueError("P must be symmetric")
    if np.any(np.linalg.eigvalsh(P) <= 0):
        raise ValueError("P must be positive definite")

    def h(x):
        d = np.asarray(x, dtype=float) - c
        return 1.0 - np.einsum("...i,ij,...j->...", d, P, d)

    def grad(x):
        d = np.asarray(x, dtype=float) - c
        return -2.0 * np.einsum("ij,...j->...i", P, d)

    return BarrierCandidate(h, grad, descriptor={
        "type": "ellipsoid", "center": c.tolist(), "P": P.tolist()})


def _gate_integral(x2: np.ndarray, b2: float, s2: float) -> np.ndarray:
    """Closed form of int_0^{x2} 2 t exp(-(t-b2)^2/(2 s2^2)) dt."""
    def antideriv(t):
        w = (t - b2) / s2
        return -2.0 * s2 * s2 * np.exp(-0.5 * w * w) \
            + SQRT_2PI * b2 * s2 * erf(w / np.sqrt(2.0))

    return antideriv(x2) - antideriv(np.zeros_like(x2))


def gated_ellipsoid(p1: float, p2: float, gate_amp: float,
                    gate_center, gate_width,
                    coupling: float = 0.0) -> BarrierCandidate:
    """Quadratic bowl 1 - p1 x1^2 - 2 cpl x1 x2 - p2 x2^2 with a gradient gate.

    The gate attenuates the velocity-direction gradient inside a Gaussian
    window: dh/dx2 = -2 cpl x1 - 2 p2 x2 (1 - gate_amp g1(x1) g2(x2)).
    gate_amp < 1 and the coupling keep the gradient nonzero on the gated
    arc; the small coupling also tilts the L_g h = 0 set off the x1-axis so
    the drift is strictly increasing h there (validity without input
    constraints survives the gate).
    """
    b1, b2 = float(gate_center[0]), float(gate_center[1])
    s1, s2 = float(gate_width[0]), float(gate_width[1])
    if not 0.0 <= gate_amp < 1.0:
        raise ValueError("gate_amp must lie in [0, 1)")
    if min(p1, p2, s1, s2) <= 0:
        raise ValueError("p1, p2 and gate widths must be positive")
    if coupling * coupling >= p1 * p2:
        raise ValueError("coupling too strong: quadratic part must stay definite")

    def g1(x1):
        return np.exp(-0.5 * ((x1 - b1) / s1) ** 2)

    def g2(x2):
        return np.exp(-0.5 * ((x2 - b2) / s2) ** 2)

    def h(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        gate = gate_amp * g1(x1) * _gate_integral(x2, b2, s2)
        return (1.0 - p1 * x1 * x1 - 2.0 * coupling * x1 * x2
                - p2 * (x2 * x2 - gate))

    def grad(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        out = np.empty_like(x)
        dg1 = -(x1 - b1) / (s1 * s1) * g1(x1)
        out[..., 0] = (-2.0 * p1 * x1 - 2.0 * coupling * x2
                       + p2 * gate_amp * dg1 * _gate_integral(x2, b2, s2))
        out[..., 1] = (-2.0 * coupling * x1
                       - 2.0 * p2 * x2 * (1.0 - gate_amp * g1(x1) * g2(x2)))
        return out

    return BarrierCandidate(h, grad, descriptor={
        "type": "gated_ellipsoid", "p": [p1, p2], "gate_amp": gate_amp,
        "gate_center": [b1, b2], "gate_width": [s1, s2], "coupling": coupling})


# Defaults reproducing the two study systems. Neither barrier is published
# with its experiment; both are our constructions, config-overridable.
PENDULUM_GATE = {
    "p1": 0.35, "p2": 0.19, "gate_amp": 0.995,
    "gate_center": [0.55, 1.92], "gate_width": [0.35, 0.06],
}
QUADROTOR_ELLIPSE = {
    "center": [0.9, 0.0],
    "P": [[1.5625, 1.2], [1.2, 2.4]],
}


def pendulum_default_barrier() -> BarrierCandidate:
    return gated_ellipsoid(**PENDULUM_GATE)


def quadrotor_default_barrier() -> BarrierCandidate:
    return ellipsoid(**QUADROTOR_ELLIPSE)


def from_descriptor(desc: dict) -> BarrierCandidate:
    kind = desc.get("type")
    if kind == "ellipsoid":
        return ellipsoid(desc["center"], desc["P"])
    if kind == "gated_ellipsoid":
        return gated_ellipsoid(desc["p"][0], desc["p"][1], desc["gate_amp"],
                               desc["gate_center"], desc["gate_width"],
                               desc.get("coupling", 0.0))
    raise ValueError(f"unknown barrier descriptor type {kind!r}")


def lie_derivative(dyn: ControlAffineDynamics, h: BarrierCandidate,
                   x: np.ndarray) -> LieDerivativeValue:
    """L_f h = grad h . f(x); L_g h = grad h' g(x). Batched over leading axes."""
    x = np.asarray(x, dtype=float)
    gh = h.grad(x)
    lf = np.einsum("...i,...i->...", gh, dyn.f(x))
    lg = np.einsum("...i,...ij->...j", gh, dyn.g(x))
    return LieDerivativeValue(lf=lf, lg=lg)


def hdot(dyn: ControlAffineDynamics, h: BarrierCandidate,
         x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Time derivative of h along the dynamics: L_f h + L_g h . u."""
    ld = lie_derivative(dyn, h, x)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return ld.lf + np.einsum("...j,...j->...", ld.lg, u)


def validate_unconstrained(dyn: ControlAffineDynamics, h: BarrierCandidate,
                           X: StateBox, gamma_lin: float,
                           n_grid: int = 400, lg_tol: float = 1e-10) -> float:
    """Minimum of L_f h + gamma_lin * h over the set where L_g h vanishes.

    A nonnegative return certifies (numerically) that h admits the linear
    class-K_e with slope gamma_lin when the input is unconstrained: wherever
    the input has authority the condition is vacuous, so only the L_g h = 0
    set matters. Sampled on a dense grid; exact-zero rows only.
    """
    axes = [np.linspace(X.lower[i], X.upper[i], n_grid) for i in range(X.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    ld = lie_derivative(dyn, h, pts)
    on_zero = np.max(np.abs(ld.lg), axis=-1) <= lg_tol
    if not np.any(on_zero):
        return np.inf
    vals = ld.lf[on_zero] + gamma_lin * h(pts[on_zero])
    return float(np.min(vals))
