"""Averaged one-degree-of-freedom model of the 1:1 resonance.

State is ``(zeta, u)``: ``zeta`` is the angle moon1-central-moon2 (radians,
counter-clockwise) and ``u = dzeta/dt / (n * sqrt(3 mu))``. In the rescaled
time ``tau = n sqrt(3 mu) t`` the dynamics is the Hamiltonian flow of

    E = u**2 / 2 - V(zeta),   V(zeta) = cos(zeta) - (2 - 2 cos(zeta))**-0.5

so a single portrait covers every mass ratio; ``mu`` only enters when
converting back to physical time or semi-major axis offsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from .core import (
    DivergentPeriodError,
    InvalidInputError,
    SingularityError,
    SystemState,
)

E_L4 = 0.5
E_L3 = 1.5
# mu-free fallback; when mu is known the cutoff scales with the pair's Hill radius
DEFAULT_ZETA_CUTOFF = math.radians(10.0)
# full-model horseshoes break up at 3.9-4.6 Hill radii for 1e-9 <= mu <= 1e-5
HILL_CUTOFF_FACTOR = 4.0
SEPARATRIX_TOL = 1e-9


class Regime(str, Enum):
    TADPOLE = "tadpole"
    TADPOLE_L4 = "tadpole_L4"
    TADPOLE_L5 = "tadpole_L5"
    HORSESHOE = "horseshoe"
    CIRCULATING = "circulating"
    SEPARATRIX = "separatrix"
    INFEASIBLE = "infeasible"
    UNDETERMINED = "undetermined"

    @property
    def is_tadpole(self):
        return self in (Regime.TADPOLE, Regime.TADPOLE_L4, Regime.TADPOLE_L5)


def _check_zeta(zeta):
    # sin(pi) in floating point is ~1e-16 rather than 0
    s = np.abs(np.sin(np.asarray(zeta) / 2.0))
    if np.any(s < 1e-15):
        raise SingularityError("zeta = 0 (mod 2 pi): the moons coincide in the averaged model")


def potential_v(zeta):
    """V(zeta) = cos zeta - 1/sqrt(2 - 2 cos zeta). Accepts scalars or arrays."""
    _check_zeta(zeta)
    # 2 - 2 cos z = 4 sin^2(z/2), better conditioned near 0
    d = 2.0 * np.abs(np.sin(np.asarray(zeta) / 2.0))
    v = np.cos(zeta) - 1.0 / d
    return float(v) if np.ndim(v) == 0 else v


def potential_dv(zeta):
    """dV/dzeta = sin zeta * ((2 - 2 cos zeta)**-1.5 - 1)."""
    _check_zeta(zeta)
    d = 2.0 * np.abs(np.sin(np.asarray(zeta) / 2.0))
    dv = np.sin(zeta) * (d**-3 - 1.0)
    return float(dv) if np.ndim(dv) == 0 else dv


def energy(zeta, u):
    return 0.5 * np.asarray(u) ** 2 - potential_v(zeta)


def hill_cutoff(mu: float) -> float:
    """Closest-approach angle below which the averaged model stops holding.

    The moons' mutual L1/L2 points sit about one Hill radius (mu/3)**(1/3)
    apart; horseshoes of the full problem survive down to roughly four.
    """
    if not mu > 0:
        raise InvalidInputError("mu must be positive")
    return HILL_CUTOFF_FACTOR * (mu / 3.0) ** (1.0 / 3.0)


def resolve_cutoff(zeta_cutoff: float | None = None, mu: float | None = None) -> float:
    if zeta_cutoff is not None:
        if not 0 < zeta_cutoff < math.pi / 3:
            raise InvalidInputError("zeta_cutoff must lie in (0, 60 deg)")
        return float(zeta_cutoff)
    if mu is not None:
        return hill_cutoff(mu)
    return DEFAULT_ZETA_CUTOFF


def separatrix_energy(zeta_cutoff: float | None = None, mu: float | None = None) -> float:
    """Energy at which horseshoe orbits reach the cutoff angle: the horseshoe/circulating boundary."""
    return -potential_v(resolve_cutoff(zeta_cutoff, mu))


@dataclass(frozen=True)
class CoorbitalPoint:
    zeta: float
    u: float
    energy: float
    regime: Regime

    @classmethod
    def at(cls, zeta, u, zeta_cutoff=None, mu=None, tol=SEPARATRIX_TOL):
        e = float(energy(zeta, u))
        return cls(float(zeta), float(u), e, classify_energy(e, zeta, zeta_cutoff, mu, tol))


def reduced_flow(point, mu: float, n: float = 1.0):
    """Time derivatives (dzeta/dt, du/dt) in physical time for mean motion ``n``.

    ``point`` is a CoorbitalPoint or a (zeta, u) pair. With ``n * sqrt(3 mu)``
    factored out this is the canonical flow dzeta/dtau = u, du/dtau = V'(zeta).
    """
    zeta, u = (point.zeta, point.u) if isinstance(point, CoorbitalPoint) else point
    scale = n * math.sqrt(3.0 * mu)
    return scale * u, scale * potential_dv(zeta)


def classify_energy(E: float, zeta: float | None = None, zeta_cutoff: float | None = None,
                    mu: float | None = None, tol: float = SEPARATRIX_TOL) -> Regime:
    """Regime of a reduced-model orbit from its energy.

    Tadpoles get their L4/L5 side from ``zeta`` when it is given. The
    horseshoe/circulating cutoff is ``zeta_cutoff`` if given, else the
    Hill-scaled angle for ``mu``, else 10 degrees.
    """
    e_cut = separatrix_energy(zeta_cutoff, mu)
    if abs(E - E_L3) < tol or abs(E - e_cut) < tol:
        return Regime.SEPARATRIX
    if E < E_L4 - tol:
        return Regime.INFEASIBLE
    if E < E_L3:
        if zeta is None:
            return Regime.TADPOLE
        return Regime.TADPOLE_L4 if (zeta % (2 * math.pi)) < math.pi else Regime.TADPOLE_L5
    if E < e_cut:
        return Regime.HORSESHOE
    return Regime.CIRCULATING


def _bisect_turning(E, lo, hi):
    """Root of E + V(zeta) on [lo, hi]; returns the endpoint on the allowed side.

    Assumes exactly one sign change. Runs to machine resolution.
    """
    f_lo = E + potential_v(lo)
    f_hi = E + potential_v(hi)
    if f_lo * f_hi > 0:
        raise InvalidInputError("turning point not bracketed")
    allowed_hi = f_hi > 0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        f_mid = E + potential_v(mid)
        if (f_mid > 0) == allowed_hi:
            hi = mid
        else:
            lo = mid
    return hi if allowed_hi else lo


def turning_points(E: float, zeta_side: float = math.pi / 3) -> tuple[float, float]:
    """Range [zeta_lo, zeta_hi] visited at energy ``E``.

    For tadpoles ``zeta_side`` selects the L4 (< pi) or L5 island.
    """
    if E <= E_L4:
        raise InvalidInputError(f"E={E} is at or below the L4/L5 minimum {E_L4}")
    if abs(E - E_L3) < SEPARATRIX_TOL:
        raise DivergentPeriodError("E lies on the L3 separatrix")
    l4 = math.pi / 3
    z_lo = _bisect_turning(E, 1e-300 + 1e-12, l4)
    if E < E_L3:
        z_hi = _bisect_turning(E, math.pi, l4)
        if zeta_side % (2 * math.pi) > math.pi:
            return 2 * math.pi - z_hi, 2 * math.pi - z_lo
        return z_lo, z_hi
    return z_lo, 2 * math.pi - z_lo


def reduced_period(E: float, nodes: int = 512) -> float:
    """Libration period in rescaled time tau.

    T = 2 * integral dzeta / sqrt(2 (E + V)) between turning points, with
    zeta = c + h sin(theta) absorbing the square-root endpoint singularity
    and a midpoint rule in theta.
    """
    z1, z2 = turning_points(E)
    c, h = 0.5 * (z1 + z2), 0.5 * (z2 - z1)
    theta = -0.5 * math.pi + (np.arange(nodes) + 0.5) * (math.pi / nodes)
    z = c + h * np.sin(theta)
    kinetic = np.maximum(E + potential_v(z), 0.0)
    integrand = h * np.cos(theta) / np.sqrt(2.0 * kinetic)
    return 2.0 * float(integrand.sum()) * (math.pi / nodes)


def libration_period(E: float, mu: float, n: float, zeta_cutoff: float | None = None,
                     nodes: int = 512) -> float:
    """Physical libration period of a tadpole or horseshoe orbit of energy E."""
    if not (mu > 0 and n > 0):
        raise InvalidInputError("mu and n must be positive")
    if abs(E - E_L3) < SEPARATRIX_TOL or abs(E - separatrix_energy(zeta_cutoff, mu)) < SEPARATRIX_TOL:
        raise DivergentPeriodError(f"E={E} lies on a separatrix; the period diverges")
    regime = classify_energy(E, zeta_cutoff=zeta_cutoff, mu=mu)
    if regime is Regime.INFEASIBLE or E <= E_L4:
        raise InvalidInputError(f"E={E} is below the L4/L5 minimum")
    if regime is Regime.CIRCULATING:
        raise InvalidInputError(f"E={E} is outside the resonance (circulating)")
    return reduced_period(E, nodes) / (n * math.sqrt(3.0 * mu))


def small_oscillation_period(mu: float, n: float) -> float:
    """Limit of the tadpole period at L4/L5: 2 pi / (n sqrt(27 mu / 4))."""
    return 2.0 * math.pi / (n * math.sqrt(27.0 * mu / 4.0))


def delta_a_from_u(u, mu: float, a_ref: float):
    """Semi-major axis offset a_moon2 - a_moon1 for normalised drift rate u."""
    return -(2.0 / 3.0) * math.sqrt(3.0 * mu) * np.asarray(u) * a_ref


def u_from_delta_a(delta_a, mu: float, a_ref: float):
    return -1.5 * np.asarray(delta_a) / (a_ref * math.sqrt(3.0 * mu))


@dataclass(frozen=True)
class PhasePortrait:
    """Energy and regime labels of the reduced model on a (zeta, u) grid.

    ``labels`` holds Regime values, shape (len(u), len(zeta)). Separatrix
    curves are sampled as ``(zeta, +u)`` arrays; the lower branch is -u.
    """

    zeta: np.ndarray
    u: np.ndarray
    energy: np.ndarray
    labels: np.ndarray
    mu: float
    levels: dict
    separatrices: dict

    def point(self, i, j) -> CoorbitalPoint:
        return CoorbitalPoint(float(self.zeta[j]), float(self.u[i]), float(self.energy[i, j]),
                              Regime(self.labels[i, j]))

    def mask(self, regime: Regime) -> np.ndarray:
        return self.labels == regime.value

    def components(self, regime: Regime) -> int:
        """Number of 4-connected regions carrying ``regime``."""
        _, count = ndimage.label(self.mask(regime))
        return count


def phase_portrait(mu: float, n_zeta: int = 361, n_u: int = 201, u_max: float | None = None,
                   guard: float = math.radians(1.0), zeta_cutoff: float | None = None,
                   tol: float = SEPARATRIX_TOL) -> PhasePortrait:
    """Fill a (zeta, u) grid with energies and regime labels.

    ``zeta`` spans [guard, 2 pi - guard]; ``u`` spans [-u_max, u_max]. By
    default ``u_max`` reaches 25% past the circulating separatrix so that
    every regime appears on the grid.
    """
    if not mu > 0:
        raise InvalidInputError("mu must be positive")
    if not (0 < guard < math.pi):
        raise InvalidInputError("guard band must exclude zeta = 0 (0 < guard < pi)")
    e_cut = separatrix_energy(zeta_cutoff, mu)
    if u_max is None:
        u_max = 1.25 * math.sqrt(2.0 * (e_cut - E_L4))
    if n_zeta < 3 or n_u < 2 or u_max <= 0:
        raise InvalidInputError("grid needs n_zeta >= 3, n_u >= 2 and u_max > 0")
    zeta = np.linspace(guard, 2 * math.pi - guard, n_zeta)
    u = np.linspace(-u_max, u_max, n_u)
    E = 0.5 * u[:, None] ** 2 - potential_v(zeta)[None, :]

    labels = np.full(E.shape, Regime.CIRCULATING.value, dtype=object)
    labels[E < e_cut] = Regime.HORSESHOE.value
    left = np.broadcast_to(zeta[None, :] < math.pi, E.shape)
    labels[(E < E_L3) & left] = Regime.TADPOLE_L4.value
    labels[(E < E_L3) & ~left] = Regime.TADPOLE_L5.value
    labels[(np.abs(E - E_L3) < tol) | (np.abs(E - e_cut) < tol)] = Regime.SEPARATRIX.value
    labels = labels.astype(str)

    fine = np.linspace(guard, 2 * math.pi - guard, 4 * n_zeta)
    seps = {}
    for name, level in (("L3", E_L3), ("L12", e_cut)):
        k = np.maximum(level + potential_v(fine), 0.0)
        seps[name] = np.column_stack([fine, np.sqrt(2.0 * k)])
    return PhasePortrait(zeta, u, E, labels, float(mu), {"E_L4": E_L4, "E_L3": E_L3, "E_L12": e_cut}, seps)


# --------------------------------------------------------------------------
# reduced trajectories and full-model initial conditions


def integrate_reduced(zeta0: float, u0: float, tau_end: float, n_samples: int = 2001,
                      rtol: float = 1e-12, atol: float = 1e-14):
    """Integrate the reduced flow in rescaled time. Returns (tau, zeta, u)."""
    from scipy.integrate import solve_ivp

    def rhs(_, y):
        return (y[1], potential_dv(y[0]))

    tau = np.linspace(0.0, tau_end, n_samples)
    sol = solve_ivp(rhs, (0.0, tau_end), (zeta0, u0), method="DOP853",
                    t_eval=tau, rtol=rtol, atol=atol)
    if not sol.success:
        raise InvalidInputError(sol.message)
    return sol.t, sol.y[0], sol.y[1]


def initial_state(gm, a_ref: float, delta_a: float, zeta: float,
                  radius_phys=None, t: float = 0.0) -> SystemState:
    """Two moons on circular orbits about the central body, ``zeta`` apart.

    ``delta_a`` (= a_moon2 - a_moon1) is split with mass weights so that
    ``a_ref`` is the mass-weighted mean radius; moon1 sits on the +x axis.
    The result is shifted to barycentric coordinates.
    """
    gm = np.asarray(gm, dtype=float)
    m1, m2 = gm[1], gm[2]
    if m1 + m2 > 0:
        w1, w2 = m1 / (m1 + m2), m2 / (m1 + m2)
    else:
        w1, w2 = 0.5, 0.5
    radii = (a_ref - w2 * delta_a, a_ref + w1 * delta_a)
    angles = (0.0, zeta)
    pos = np.zeros((3, 2))
    vel = np.zeros((3, 2))
    for k, (r, lam) in enumerate(zip(radii, angles), start=1):
        if r <= 0:
            raise InvalidInputError("moon orbit radius must be positive")
        v = math.sqrt((gm[0] + gm[k]) / r)
        pos[k] = r * math.cos(lam), r * math.sin(lam)
        vel[k] = -v * math.sin(lam), v * math.cos(lam)
    return SystemState.from_arrays(t, pos, vel, gm, radius_phys).to_barycentric()


def state_from_point(gm, zeta: float, u: float, a_ref: float = 1.0, radius_phys=None) -> SystemState:
    """Full three-body initial condition matching the reduced point (zeta, u)."""
    gm = np.asarray(gm, dtype=float)
    mu = (gm[1] + gm[2]) / gm[0]
    return initial_state(gm, a_ref, float(delta_a_from_u(u, mu, a_ref)), zeta, radius_phys)
