"""Control-affine dynamics xdot = f(x) + g(x) u.

Two concrete systems: a damped pendulum (nonlinear drift, torque input)
and a thrust-controlled vertical double integrator in delta-thrust
convention (hover thrust pre-subtracted, so gravity is absent from the
nominal model). A residual wrapper adds a smooth synthetic disturbance to
emulate model mismatch for the learned-filter experiments.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class PendulumParams:
    mass: float = 1.0       # [kg]
    length: float = 0.5     # [m]
    damping: float = 0.1    # [N/m]
    gravity: float = 9.81   # [m/s^2]

    def __post_init__(self):
        if min(self.mass, self.length, self.damping, self.gravity) <= 0:
            raise ValueError("pendulum parameters must be strictly positive")


@dataclass(frozen=True)
class DoubleIntegratorParams:
    gain: float = 1.0 / 0.03  # input channel gain (1/mass) [1/kg]

    def __post_init__(self):
        if self.gain <= 0:
            raise ValueError("input gain must be strictly positive")


class ControlAffineDynamics:
    """Immutable pair (f, g) with batched evaluation.

    f maps (..., n) -> (..., n); g maps (..., n) -> (..., n, m).
    """

    def __init__(self, n: int, m: int,
                 f: Callable[[np.ndarray], np.ndarray],
                 g: Callable[[np.ndarray], np.ndarray],
                 name: str = "custom"):
        self.n = int(n)
        self.m = int(m)
        self._f = f
        self._g = g
        self.name = name

    def f(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self._f(np.asarray(x, dtype=float)), dtype=float)

    def g(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self._g(np.asarray(x, dtype=float)), dtype=float)

    def eval(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """xdot = f(x) + g(x) u, exactly affine in u. Supports batching."""
        x = np.asarray(x, dtype=float)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if x.shape[-1] != self.n:
            raise ValueError(f"state dimension {x.shape[-1]} != {self.n}")
        if u.shape[-1] != self.m:
            raise ValueError(f"input dimension {u.shape[-1]} != {self.m}")
        return self.f(x) + np.einsum("...ij,...j->...i", self.g(x), u)


def pendulum(params: Optional[PendulumParams] = None) -> ControlAffineDynamics:
    """Damped pendulum: x1dot = x2, x2dot = (-m g l sin x1 - b x2 + u) / (m l^2)."""
    p = params or PendulumParams()
    ml2 = p.mass * p.length**2
    grav = p.mass * p.gravity * p.length

    def f(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        out[..., 0] = x[..., 1]
        out[..., 1] = (-grav * np.sin(x[..., 0]) - p.damping * x[..., 1]) / ml2
        return out

    def g(x):
        x = np.asarray(x, dtype=float)
        col = np.zeros(x.shape[:-1] + (2, 1))
        col[..., 1, 0] = 1.0 / ml2
        return col

    return ControlAffineDynamics(2, 1, f, g, name="pendulum")


def double_integrator(params: Optional[DoubleIntegratorParams] = None) -> ControlAffineDynamics:
    """Vertical double integrator in delta-thrust form: zdot = v, vdot = gain * du."""
    p = params or DoubleIntegratorParams()

    def f(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 0] = x[..., 1]
        return out

    def g(x):
        x = np.asarray(x, dtype=float)
        col = np.zeros(x.shape[:-1] + (2, 1))
        col[..., 1, 0] = p.gain
        return col

    return ControlAffineDynamics(2, 1, f, g, name="double_integrator")


@dataclass(frozen=True)
class ResidualParams:
    """Synthetic disturbance on the velocity channel.

    accel(v) = -drag_coeff * v * |v| + thrust_offset / mass.  The default
    offset models a 5% hover-thrust deficit; both constants are stand-ins
    for real-flight mismatch and are config-exposed.
    """

    drag_coeff: float = 0.15          # [1/m]
    thrust_offset: float = -0.05 * 0.03 * 9.8  # [N]
    mass: float = 0.03                # [kg]

    def accel(self, v: np.ndarray) -> np.ndarray:
        return -self.drag_coeff * v * np.abs(v) + self.thrust_offset / self.mass


def with_residual(dyn: ControlAffineDynamics, residual: ResidualParams) -> ControlAffineDynamics:
    """True-plant wrapper: adds the residual acceleration to the drift."""

    def f(x):
        x = np.asarray(x, dtype=float)
        out = np.array(dyn.f(x), copy=True)
        out[..., 1] = out[..., 1] + residual.accel(x[..., 1])
        return out

    return ControlAffineDynamics(dyn.n, dyn.m, f, dyn.g, name=dyn.name + "+residual")


def affine_check(dyn: ControlAffineDynamics, x, u1, u2, lam: float, tol: float = 1e-10) -> bool:
    """Whether eval(x, lam*u1 + (1-lam)*u2) matches the input-interpolated value."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    u1 = np.atleast_1d(np.asarray(u1, dtype=float))
    u2 = np.atleast_1d(np.asarray(u2, dtype=float))
    mixed = dyn.eval(x, lam * u1 + (1.0 - lam) * u2)
    interp = lam * dyn.eval(x, u1) + (1.0 - lam) * dyn.eval(x, u2)
    return bool(np.max(np.abs(mixed - interp)) <= tol)
