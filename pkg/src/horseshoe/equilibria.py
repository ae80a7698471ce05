"""Euler collinear and Lagrange equilateral relative equilibria.

Configurations are built in canonical form (barycenter at the origin,
rigid rotation at ``angular_rate``) and can be turned into an inertial
``SystemState`` for the integrator. Linear stability comes from a
finite-difference Jacobian of the rotating-frame equations of motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import InvalidInputError, NumericalError, SystemState
from .integrator import _acc

FD_STEP = 1e-7


class EquilibriumKind(str, Enum):
    EULER_L1 = "euler_L1"
    EULER_L2 = "euler_L2"
    EULER_L3 = "euler_L3"
    LAGRANGE_L4 = "lagrange_L4"
    LAGRANGE_L5 = "lagrange_L5"

    @property
    def is_euler(self):
        return self.value.startswith("euler")


# ordering along the line (left to right) for each collinear kind, with
# central=0, moon1=1, moon2=2; names follow the restricted-problem habit
# where moon2 plays the small third body
EULER_ORDERINGS = {
    EquilibriumKind.EULER_L1: (0, 2, 1),
    EquilibriumKind.EULER_L2: (0, 1, 2),
    EquilibriumKind.EULER_L3: (2, 0, 1),
}


@dataclass(frozen=True)
class EquilibriumConfig:
    kind: EquilibriumKind
    masses: np.ndarray
    separation: float
    angular_rate: float
    positions: np.ndarray

    def state(self, t: float = 0.0, radius_phys=None) -> SystemState:
        """Inertial state of the rigidly rotating configuration at time ``t``."""
        c, s = math.cos(self.angular_rate * t), math.sin(self.angular_rate * t)
        rot = np.array([[c, -s], [s, c]])
        pos = self.positions @ rot.T
        vel = self.angular_rate * np.column_stack([-pos[:, 1], pos[:, 0]])
        return SystemState.from_arrays(t, pos, vel, self.masses, radius_phys)

    @property
    def period(self):
        return 2.0 * math.pi / self.angular_rate

    def residual(self) -> float:
        """Largest rotating-frame acceleration at the configuration."""
        return float(np.max(np.abs(_rotating_accel(self.positions, self.masses, self.angular_rate))))


def _masses(masses):
    m = np.asarray(masses, dtype=float).reshape(-1)
    if m.shape != (3,) or not np.all(np.isfinite(m)):
        raise InvalidInputError("masses must be three finite gravitational parameters")
    if np.any(m < 0):
        raise InvalidInputError("masses must be non-negative")
    if m.sum() <= 0:
        raise InvalidInputError("total mass must be positive")
    return m


def _rotating_accel(pos, gm, omega):
    acc = np.empty((3, 2))
    _acc(np.ascontiguousarray(pos, dtype=float), gm, acc)
    return acc + omega**2 * pos


def _barycentric(pos, m):
    return pos - m @ pos / m.sum()


def euler_quintic(rho, m_left, m_mid, m_right):
    """Collinear balance polynomial in rho = (right gap) / (left gap)."""
    a, b, c = m_left, m_mid, m_right
    return ((a + b) * rho**5 + (3 * a + 2 * b) * rho**4 + (3 * a + b) * rho**3
            - (b + 3 * c) * rho**2 - (2 * b + 3 * c) * rho - (b + c))


def _euler_quintic_deriv(rho, a, b, c):
    return (5 * (a + b) * rho**4 + 4 * (3 * a + 2 * b) * rho**3 + 3 * (3 * a + b) * rho**2
            - 2 * (b + 3 * c) * rho - (2 * b + 3 * c))


def solve_euler_quintic(m_left, m_mid, m_right, lo=1e-6, hi=1e6):
    """Unique positive root: log-space bisection to 1e-8 then Newton to 1e-14."""
    p_lo = euler_quintic(lo, m_left, m_mid, m_right)
    p_hi = euler_quintic(hi, m_left, m_mid, m_right)
    if not (p_lo < 0 < p_hi):
        raise NumericalError("Euler quintic root not bracketed in (1e-6, 1e6)")
    steps = 0
    while hi / lo - 1.0 > 1e-8:
        mid = math.sqrt(lo * hi)
        if euler_quintic(mid, m_left, m_mid, m_right) < 0:
            lo = mid
        else:
            hi = mid
        steps += 1
    rho = math.sqrt(lo * hi)
    while steps < 200:
        d = _euler_quintic_deriv(rho, m_left, m_mid, m_right)
        delta = euler_quintic(rho, m_left, m_mid, m_right) / d
        rho -= delta
        steps += 1
        if abs(delta) <= 1e-14 * rho:
            return rho
    raise NumericalError("Euler quintic: no convergence after 200 steps")


def euler_collinear(masses, ordering=EquilibriumKind.EULER_L1, separation: float = 1.0) -> EquilibriumConfig:
    """Collinear relative equilibrium.

    ``ordering`` is either a collinear EquilibriumKind or a permutation of
    body indices listed left to right along the line. ``separation`` is the
    central-moon1 distance.
    """
    m = _masses(masses)
    if np.count_nonzero(m) < 2:
        raise InvalidInputError("a collinear configuration needs at least two positive masses")
    if not separation > 0:
        raise InvalidInputError("separation must be positive")
    if isinstance(ordering, (str, EquilibriumKind)):
        kind = EquilibriumKind(ordering)
        if not kind.is_euler:
            raise InvalidInputError(f"{kind.value} is not a collinear kind")
        order = EULER_ORDERINGS[kind]
    else:
        order = tuple(int(i) for i in ordering)
        if sorted(order) != [0, 1, 2]:
            raise InvalidInputError(f"ordering must be a permutation of (0, 1, 2), got {ordering}")
        middle = order[1]
        kind = {2: EquilibriumKind.EULER_L1, 1: EquilibriumKind.EULER_L2, 0: EquilibriumKind.EULER_L3}[middle]

    rho = solve_euler_quintic(*m[list(order)])
    x = np.empty(3)
    x[order[0]], x[order[1]], x[order[2]] = 0.0, 1.0, 1.0 + rho
    x *= separation / abs(x[1] - x[0])
    pos = _barycentric(np.column_stack([x, np.zeros(3)]), m)
    acc = np.empty((3, 2))
    _acc(pos, m, acc)
    omega2 = -float(np.sum(acc[:, 0] * pos[:, 0]) / np.sum(pos[:, 0] ** 2))
    if not omega2 > 0:
        raise NumericalError("collinear configuration has no positive rotation rate")
    return EquilibriumConfig(kind, m, float(separation), math.sqrt(omega2), pos)


def lagrange_equilateral(masses, separation: float = 1.0, sense="L4") -> EquilibriumConfig:
    """Equilateral triangle with side ``separation`` rotating at sqrt(G M / d^3).

    L4 puts moon2 60 degrees ahead of moon1 as seen from the central body,
    L5 60 degrees behind.
    """
    m = _masses(masses)
    if not separation > 0:
        raise InvalidInputError("separation must be positive")
    sense = str(getattr(sense, "value", sense)).upper().replace("LAGRANGE_", "")
    if sense not in ("L4", "L5"):
        raise InvalidInputError(f"sense must be L4 or L5, got {sense}")
    sign = 1.0 if sense == "L4" else -1.0
    d = float(separation)
    pos = np.array([
        [0.0, 0.0],
        [d, 0.0],
        [0.5 * d, sign * math.sqrt(3.0) / 2.0 * d],
    ])
    pos = _barycentric(pos, m)
    omega = math.sqrt(m.sum() / d**3)
    kind = EquilibriumKind.LAGRANGE_L4 if sign > 0 else EquilibriumKind.LAGRANGE_L5
    return EquilibriumConfig(kind, m, d, omega, pos)


def gascheau_stable(masses) -> tuple[bool, float]:
    """Routh/Gascheau test for the equilateral configuration.

    margin = 27 (m1 m2 + m1 m3 + m2 m3) / (m1 + m2 + m3)^2, stable iff < 1.
    """
    m = _masses(masses)
    pairs = m[0] * m[1] + m[0] * m[2] + m[1] * m[2]
    margin = 27.0 * pairs / m.sum() ** 2
    return margin < 1.0, float(margin)


def rotating_jacobian(cfg: EquilibriumConfig, h: float = FD_STEP) -> np.ndarray:
    """12x12 Jacobian of the rotating-frame flow at the configuration.

    State ordering is (x0, y0, x1, y1, x2, y2, vx0, ..., vy2); derivatives
    by central differences with step ``h`` (relative to the separation).
    """
    m, om = cfg.masses, cfg.angular_rate
    scale = cfg.separation
    x0 = np.concatenate([cfg.positions.ravel(), np.zeros(6)])

    def field(x):
        pos = x[:6].reshape(3, 2)
        vel = x[6:].reshape(3, 2)
        coriolis = 2.0 * om * np.column_stack([vel[:, 1], -vel[:, 0]])
        return np.concatenate([vel.ravel(), (_rotating_accel(pos, m, om) + coriolis).ravel()])

    jac = np.empty((12, 12))
    for k in range(12):
        dx = np.zeros(12)
        dx[k] = h * (scale if k < 6 else scale * om)
        jac[:, k] = (field(x0 + dx) - field(x0 - dx)) / (2.0 * dx[k])
    return jac


def max_growth_rate(cfg: EquilibriumConfig) -> tuple[float, np.ndarray]:
    """Largest real part of the linearised spectrum and its eigenvector."""
    vals, vecs = np.linalg.eig(rotating_jacobian(cfg))
    k = int(np.argmax(vals.real))
    return float(vals[k].real), vecs[:, k]


def linear_stable(cfg: EquilibriumConfig, rel_tol: float = 1e-3) -> bool:
    """True when no eigenvalue has real part above ``rel_tol * angular_rate``.

    The tolerance absorbs the spurious splitting of the symmetry-induced
    zero eigenvalues (order sqrt of the finite-difference error, up to about
    5e-5 * angular_rate at the default step). Genuine growth rates below the
    tolerance, such as the collinear configuration opposite a very small
    pair of masses, are reported as stable; use ``euler_unstable_check``
    for those.
    """
    rate, _ = max_growth_rate(cfg)
    return rate < rel_tol * cfg.angular_rate


def euler_unstable_check(cfg: EquilibriumConfig) -> float:
    """Growth rate (1/time) of the fastest unstable mode of a collinear configuration."""
    if not EquilibriumKind(cfg.kind).is_euler:
        raise InvalidInputError(f"{cfg.kind} is not a collinear configuration")
    rate, _ = max_growth_rate(cfg)
    return rate


def unstable_perturbation(cfg: EquilibriumConfig, size: float = 1e-8) -> SystemState:
    """Inertial state displaced by ``size`` along the fastest-growing mode."""
    _, vec = max_growth_rate(cfg)
    vec = np.real(vec)
    vec = vec / np.linalg.norm(vec[:6])
    pos = cfg.positions + size * cfg.separation * vec[:6].reshape(3, 2)
    vel_rot = size * cfg.separation * vec[6:].reshape(3, 2)
    om = cfg.angular_rate
    vel = vel_rot + om * np.column_stack([-pos[:, 1], pos[:, 0]])
    return SystemState.from_arrays(0.0, pos, vel, cfg.masses)
