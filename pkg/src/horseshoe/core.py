"""Domain types, unit handling and small Keplerian helpers.

Everything downstream works in canonical units: the central body has
``gm = 1`` and a chosen reference radius is 1. Physical units only show
up at the I/O boundary (config parsing and CSV/JSON output).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CENTRAL, MOON1, MOON2 = 0, 1, 2
BODY_NAMES = ("central", "moon1", "moon2")


class HorseshoeError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(HorseshoeError, ValueError):
    pass


class SingularityError(HorseshoeError, ZeroDivisionError):
    """Raised when a quantity is evaluated at a coincidence/collision point."""


class InfiniteDriftError(InvalidInputError):
    pass


class UnboundOrbitError(HorseshoeError, ValueError):
    pass


class DivergentPeriodError(HorseshoeError, ValueError):
    pass


class NumericalError(HorseshoeError, ArithmeticError):
    pass


class CollisionError(HorseshoeError):
    def __init__(self, message, t=None, pair=None, distance=None):
        super().__init__(message)
        self.t = t
        self.pair = pair
        self.distance = distance


def _vec2(v, name):
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (2,):
        raise InvalidInputError(f"{name} must be a 2-vector, got shape {np.shape(v)}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite, got {arr}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BodyState:
    """Planar point mass: position, velocity, G*m and an optional radius."""

    position: np.ndarray
    velocity: np.ndarray
    gm: float
    radius_phys: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", _vec2(self.position, "position"))
        object.__setattr__(self, "velocity", _vec2(self.velocity, "velocity"))
        gm = float(self.gm)
        radius = float(self.radius_phys)
        if not (math.isfinite(gm) and gm >= 0.0):
            raise InvalidInputError(f"gm must be finite and >= 0, got {self.gm}")
        if not (math.isfinite(radius) and radius >= 0.0):
            raise InvalidInputError(f"radius_phys must be finite and >= 0, got {self.radius_phys}")
        object.__setattr__(self, "gm", gm)
        object.__setattr__(self, "radius_phys", radius)

    def __eq__(self, other):
        if not isinstance(other, BodyState):
            return NotImplemented
        return (
            np.array_equal(self.position, other.position)
            and np.array_equal(self.velocity, other.velocity)
            and self.gm == other.gm
            and self.radius_phys == other.radius_phys
        )

    __hash__ = None


@dataclass(frozen=True)
class SystemState:
    """Three bodies ordered (central, moon1, moon2) at time ``t``."""

    t: float
    bodies: tuple[BodyState, BodyState, BodyState]

    def __post_init__(self):
        bodies = tuple(self.bodies)
        if len(bodies) != 3:
            raise InvalidInputError(f"a system needs exactly 3 bodies, got {len(bodies)}")
        if not all(isinstance(b, BodyState) for b in bodies):
            raise InvalidInputError("bodies must be BodyState instances")
        object.__setattr__(self, "bodies", bodies)
        object.__setattr__(self, "t", float(self.t))
        pos = self.positions
        for i in range(3):
            for j in range(i + 1, 3):
                if np.array_equal(pos[i], pos[j]):
                    raise SingularityError(f"bodies {i} and {j} coincide")

    @classmethod
    def from_arrays(cls, t, positions, velocities, gm, radius_phys=None):
        positions = np.asarray(positions, dtype=float)
        velocities = np.asarray(velocities, dtype=float)
        if radius_phys is None:
            radius_phys = np.zeros(3)
        return cls(
            t,
            tuple(
                BodyState(positions[i], velocities[i], gm[i], radius_phys[i]) for i in range(3)
            ),
        )

    @property
    def positions(self):
        return np.array([b.position for b in self.bodies])

    @property
    def velocities(self):
        return np.array([b.velocity for b in self.bodies])

    @property
    def gm(self):
        return np.array([b.gm for b in self.bodies])

    @property
    def radius_phys(self):
        return np.array([b.radius_phys for b in self.bodies])

    def replace(self, t=None, positions=None, velocities=None, gm=None):
        return SystemState.from_arrays(
            self.t if t is None else t,
            self.positions if positions is None else positions,
            self.velocities if velocities is None else velocities,
            self.gm if gm is None else gm,
            self.radius_phys,
        )

    def to_barycentric(self):
        """Shift so that barycenter position and momentum are zero."""
        gm = self.gm
        total = gm.sum()
        pos, vel = self.positions, self.velocities
        rc = gm @ pos / total
        vc = gm @ vel / total
        return self.replace(positions=pos - rc, velocities=vel - vc)


@dataclass(frozen=True)
class UnitSystem:
    """Scale factors from canonical units to physical units.

    ``length_unit`` and ``time_unit`` are the physical size of one canonical
    unit; ``gm_unit`` follows as length**3 / time**2.
    """

    length_unit: float
    time_unit: float
    gm_unit: float = field(init=False)

    def __post_init__(self):
        if not (self.length_unit > 0 and self.time_unit > 0):
            raise InvalidInputError("unit scales must be positive")
        object.__setattr__(self, "gm_unit", self.length_unit**3 / self.time_unit**2)

    @property
    def velocity_unit(self):
        return self.length_unit / self.time_unit

    def to_physical(self, system: SystemState) -> SystemState:
        return SystemState.from_arrays(
            system.t * self.time_unit,
            system.positions * self.length_unit,
            system.velocities * self.velocity_unit,
            system.gm * self.gm_unit,
            system.radius_phys * self.length_unit,
        )

    def to_canonical(self, system: SystemState) -> SystemState:
        return SystemState.from_arrays(
            system.t / self.time_unit,
            system.positions / self.length_unit,
            system.velocities / self.velocity_unit,
            system.gm / self.gm_unit,
            system.radius_phys / self.length_unit,
        )


def normalize(system: SystemState, ref_radius: float) -> tuple[SystemState, UnitSystem]:
    """Rescale ``system`` so the central gm is 1 and ``ref_radius`` maps to 1."""
    gm_c = system.bodies[CENTRAL].gm
    if not gm_c > 0:
        raise InvalidInputError("central body gm must be positive")
    if not ref_radius > 0:
        raise InvalidInputError("ref_radius must be positive")
    units = UnitSystem(float(ref_radius), math.sqrt(ref_radius**3 / gm_c))
    return units.to_canonical(system), units


def kepler_period(a: float, gm_total: float) -> float:
    if not (a > 0 and gm_total > 0):
        raise InvalidInputError(f"kepler_period needs a > 0 and gm > 0, got a={a}, gm={gm_total}")
    return 2.0 * math.pi * math.sqrt(a**3 / gm_total)


def mean_motion(a: float, gm_total: float) -> float:
    return 2.0 * math.pi / kepler_period(a, gm_total)


def synodic_catchup_time(a: float, delta_a: float, gm_total: float) -> float:
    """Time for two circular orbits ``delta_a`` apart to drift one full turn.

    Uses the linearised third-law drift ``dn/n = -(3/2) da/a``.
    """
    if delta_a == 0:
        raise InfiniteDriftError("delta_a = 0: orbits never drift apart")
    return kepler_period(a, gm_total) / (1.5 * abs(delta_a) / a)
