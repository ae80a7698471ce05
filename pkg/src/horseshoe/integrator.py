"""Fixed-step symplectic propagation of the planar three-body problem.

Kick-drift-kick leapfrog in barycentric Cartesian coordinates, optionally
composed into Yoshida's 4th-order scheme. The inner loop is compiled with
numba; the Python layer only handles configuration and bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numba
import numpy as np

from .core import CollisionError, InvalidInputError, SingularityError, SystemState, UnitSystem

ZERO_RADIUS_THRESHOLD = 1e-6

_CBRT2 = 2.0 ** (1.0 / 3.0)
_Y1 = 1.0 / (2.0 - _CBRT2)
_Y0 = -_CBRT2 / (2.0 - _CBRT2)


class Scheme(str, Enum):
    VERLET2 = "verlet2"
    YOSHIDA4 = "yoshida4"


# leapfrog sub-step weights per scheme
_WEIGHTS = {
    Scheme.VERLET2: np.array([1.0]),
    Scheme.YOSHIDA4: np.array([_Y1, _Y0, _Y1]),
}


@dataclass(frozen=True)
class IntegratorConfig:
    step: float
    scheme: Scheme = Scheme.VERLET2
    output_stride: int = 1
    max_steps: int = 10**9
    collision_check: bool = True

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not (self.step > 0 and math.isfinite(self.step)):
            raise InvalidInputError(f"step must be positive, got {self.step}")
        if int(self.output_stride) < 1:
            raise InvalidInputError(f"output_stride must be >= 1, got {self.output_stride}")
        if int(self.max_steps) < 1:
            raise InvalidInputError(f"max_steps must be >= 1, got {self.max_steps}")
        object.__setattr__(self, "output_stride", int(self.output_stride))
        object.__setattr__(self, "max_steps", int(self.max_steps))


@dataclass(frozen=True)
class ConservationReport:
    energy_rel_drift: float
    ang_momentum_rel_drift: float
    barycenter_drift: float


@dataclass(frozen=True)
class CollisionEvent:
    t: float
    pair: tuple[int, int]
    distance: float


@dataclass(frozen=True)
class TrajectoryRecord:
    """Sampled trajectory. Arrays are in the units of the input state.

    ``positions`` and ``velocities`` have shape (n_samples, 3, 2).
    """

    t: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    gm: np.ndarray
    radius_phys: np.ndarray
    report: ConservationReport
    collision: CollisionEvent | None = None
    truncated: bool = False
    units: UnitSystem | None = None

    def __len__(self):
        return len(self.t)

    def state(self, k: int) -> SystemState:
        return SystemState.from_arrays(
            self.t[k], self.positions[k], self.velocities[k], self.gm, self.radius_phys
        )

    @property
    def final_state(self) -> SystemState:
        return self.state(-1)


# --------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True, nogil=True)
def _acc(pos, gm, out):
    for i in range(3):
        out[i, 0] = 0.0
        out[i, 1] = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            dx = pos[j, 0] - pos[i, 0]
            dy = pos[j, 1] - pos[i, 1]
            r2 = dx * dx + dy * dy
            inv3 = 1.0 / (r2 * math.sqrt(r2))
            out[i, 0] += gm[j] * dx * inv3
            out[i, 1] += gm[j] * dy * inv3
            out[j, 0] -= gm[i] * dx * inv3
            out[j, 1] -= gm[i] * dy * inv3


@numba.njit(cache=True, nogil=True)
def _energy(pos, vel, gm):
    e = 0.0
    for i in range(3):
        e += 0.5 * gm[i] * (vel[i, 0] ** 2 + vel[i, 1] ** 2)
    for i in range(3):
        for j in range(i + 1, 3):
            dx = pos[j, 0] - pos[i, 0]
            dy = pos[j, 1] - pos[i, 1]
            e -= gm[i] * gm[j] / math.sqrt(dx * dx + dy * dy)
    return e


@numba.njit(cache=True, nogil=True)
def _ang_momentum(pos, vel, gm):
    h = 0.0
    for i in range(3):
        h += gm[i] * (pos[i, 0] * vel[i, 1] - pos[i, 1] * vel[i, 0])
    return h


@numba.njit(cache=True, nogil=True)
def _min_gap(pos, threshold):
    """Return (pair index, distance) of the worst pairwise violation, or (-1, inf)."""
    worst = -1
    worst_ratio = 1.0
    dist = np.inf
    k = 0
    for i in range(3):
        for j in range(i + 1, 3):
            dx = pos[j, 0] - pos[i, 0]
            dy = pos[j, 1] - pos[i, 1]
            d = math.sqrt(dx * dx + dy * dy)
            ratio = d / threshold[k]
            if ratio < worst_ratio:
                worst_ratio = ratio
                worst = k
                dist = d
            k += 1
    return worst, dist


@numba.njit(cache=True, nogil=True)
def _run(pos, vel, gm, t0, h, n_steps, stride, weights, check, threshold,
         out_t, out_pos, out_vel, out_energy, out_ang):
    """Advance ``n_steps`` steps in place; sample every ``stride`` steps.

    Returns (n_samples_written, steps_done, collided_pair, collision_distance).
    The final state is always sampled.
    """
    acc = np.empty((3, 2))
    _acc(pos, gm, acc)
    out_t[0] = t0
    out_pos[0] = pos
    out_vel[0] = vel
    out_energy[0] = _energy(pos, vel, gm)
    out_ang[0] = _ang_momentum(pos, vel, gm)
    n_out = 1
    nw = weights.shape[0]
    for s in range(1, n_steps + 1):
        for w in range(nw):
            hw = h * weights[w]
            for i in range(3):
                vel[i, 0] += 0.5 * hw * acc[i, 0]
                vel[i, 1] += 0.5 * hw * acc[i, 1]
                pos[i, 0] += hw * vel[i, 0]
                pos[i, 1] += hw * vel[i, 1]
            _acc(pos, gm, acc)
            for i in range(3):
                vel[i, 0] += 0.5 * hw * acc[i, 0]
                vel[i, 1] += 0.5 * hw * acc[i, 1]
        collided = -1
        dist = np.inf
        if check:
            collided, dist = _min_gap(pos, threshold)
        if s % stride == 0 or s == n_steps or collided >= 0:
            out_t[n_out] = t0 + s * h
            out_pos[n_out] = pos
            out_vel[n_out] = vel
            out_energy[n_out] = _energy(pos, vel, gm)
            out_ang[n_out] = _ang_momentum(pos, vel, gm)
            n_out += 1
        if collided >= 0:
            return n_out, s, collided, dist
    return n_out, n_steps, -1, np.inf


# --------------------------------------------------------------------------

_PAIRS = ((0, 1), (0, 2), (1, 2))


def _thresholds(radius_phys):
    out = np.empty(3)
    for k, (i, j) in enumerate(_PAIRS):
        s = radius_phys[i] + radius_phys[j]
        out[k] = s if s > 0 else ZERO_RADIUS_THRESHOLD
    return out


def accelerations(state: SystemState) -> np.ndarray:
    """Newtonian accelerations of the three bodies, shape (3, 2)."""
    pos = state.positions
    for i, j in _PAIRS:
        if np.hypot(*(pos[j] - pos[i])) == 0.0:
            raise SingularityError(f"bodies {i} and {j} coincide")
    out = np.empty((3, 2))
    _acc(pos, state.gm, out)
    return out


def total_energy(state: SystemState) -> float:
    return float(_energy(state.positions, state.velocities, state.gm))


def angular_momentum(state: SystemState) -> float:
    return float(_ang_momentum(state.positions, state.velocities, state.gm))


def step(state: SystemState, cfg: IntegratorConfig) -> SystemState:
    """Advance one step of size ``cfg.step``.

    Raises CollisionError if ``cfg.collision_check`` and two bodies end the
    step closer than their radius sum.
    """
    pos = state.positions.copy()
    vel = state.velocities.copy()
    buf = (np.empty(2), np.empty((2, 3, 2)), np.empty((2, 3, 2)), np.empty(2), np.empty(2))
    _, _, pair, dist = _run(
        pos, vel, state.gm, state.t, cfg.step, 1, 1, _WEIGHTS[cfg.scheme],
        cfg.collision_check, _thresholds(state.radius_phys), *buf,
    )
    if pair >= 0:
        raise CollisionError(
            f"bodies {_PAIRS[pair]} collided at t={state.t + cfg.step}",
            t=state.t + cfg.step, pair=_PAIRS[pair], distance=dist,
        )
    return SystemState.from_arrays(state.t + cfg.step, pos, vel, state.gm, state.radius_phys)


def _report(t, pos, gm, energy, ang, p0):
    e0, h0 = energy[0], ang[0]
    de = np.max(np.abs(energy - e0)) / abs(e0) if e0 != 0 else float(np.max(np.abs(energy)))
    dh = np.max(np.abs(ang - h0)) / abs(h0) if h0 != 0 else float(np.max(np.abs(ang)))
    total = gm.sum()
    rc = np.einsum("i,nij->nj", gm, pos) / total
    expected = rc[0] + np.outer(t - t[0], p0 / total)
    drift = float(np.max(np.hypot(*(rc - expected).T)))
    return ConservationReport(float(de), float(dh), drift)


def propagate(state: SystemState, cfg: IntegratorConfig, t_end: float,
              units: UnitSystem | None = None) -> TrajectoryRecord:
    """Integrate from ``state.t`` to ``t_end``.

    The step is shrunk slightly (never grown) so that an integer number of
    steps lands exactly on ``t_end``. A collision stops the run and the
    partial record carries a ``collision`` event; hitting ``cfg.max_steps``
    sets ``truncated``.
    """
    duration = t_end - state.t
    if duration < 0:
        raise InvalidInputError(f"t_end={t_end} is before state.t={state.t}")
    n_steps = int(math.ceil(duration / cfg.step - 1e-9)) if duration > 0 else 0
    h = duration / n_steps if n_steps else cfg.step
    truncated = n_steps > cfg.max_steps
    if truncated:
        n_steps = cfg.max_steps

    pos = state.positions.copy()
    vel = state.velocities.copy()
    gm = state.gm
    thr = _thresholds(state.radius_phys)

    if cfg.collision_check:
        pair, dist = _min_gap(pos, thr)
        if pair >= 0:
            return _single_sample(state, CollisionEvent(state.t, _PAIRS[pair], float(dist)), units)

    n_buf = n_steps // cfg.output_stride + 2
    out_t = np.empty(n_buf)
    out_pos = np.empty((n_buf, 3, 2))
    out_vel = np.empty((n_buf, 3, 2))
    out_e = np.empty(n_buf)
    out_h = np.empty(n_buf)
    n_out, _, pair, dist = _run(
        pos, vel, gm, state.t, h, n_steps, cfg.output_stride, _WEIGHTS[cfg.scheme],
        cfg.collision_check, thr, out_t, out_pos, out_vel, out_e, out_h,
    )
    t = out_t[:n_out]
    collision = CollisionEvent(float(t[-1]), _PAIRS[pair], float(dist)) if pair >= 0 else None
    p0 = gm @ state.velocities
    return TrajectoryRecord(
        t=t,
        positions=out_pos[:n_out],
        velocities=out_vel[:n_out],
        gm=gm,
        radius_phys=state.radius_phys,
        report=_report(t, out_pos[:n_out], gm, out_e[:n_out], out_h[:n_out], p0),
        collision=collision,
        truncated=truncated,
        units=units,
    )


def _single_sample(state, collision, units):
    return TrajectoryRecord(
        t=np.array([state.t]),
        positions=state.positions[None],
        velocities=state.velocities[None],
        gm=state.gm,
        radius_phys=state.radius_phys,
        report=ConservationReport(0.0, 0.0, 0.0),
        collision=collision,
        units=units,
    )
