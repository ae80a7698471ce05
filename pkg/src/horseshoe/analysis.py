"""Resonant variables, orbit swaps, regime classification and frequency analysis.

All functions take canonical-unit trajectories (see ``integrator``) but
nothing here depends on the scale; angles are radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .coorbital import Regime
from .core import CENTRAL, MOON1, MOON2, BodyState, InvalidInputError, UnboundOrbitError
from .integrator import TrajectoryRecord

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OrbitalElements:
    a: float
    e: float
    longitude: float


def osculating_elements(body: BodyState, gm_central: float) -> OrbitalElements:
    """Osculating Keplerian elements of ``body`` relative to a central mass at the origin.

    ``body`` must already be expressed relative to the central body, and
    ``gm_central`` should include the body's own gm for a two-body fit.
    """
    if not gm_central > 0:
        raise InvalidInputError("gm_central must be positive")
    r = body.position
    v = body.velocity
    rn = math.hypot(*r)
    if rn == 0.0:
        raise InvalidInputError("state at the origin has no elements")
    inv_a = 2.0 / rn - (v @ v) / gm_central
    if inv_a <= 0.0:
        raise UnboundOrbitError(f"orbit is not bound (2/r - v^2/gm = {inv_a:g})")
    h = r[0] * v[1] - r[1] * v[0]
    # planar eccentricity vector: (v x h)/gm - r/|r|
    ecc = np.array([v[1] * h, -v[0] * h]) / gm_central - r / rn
    return OrbitalElements(1.0 / inv_a, float(math.hypot(*ecc)), math.atan2(r[1], r[0]))


def _semi_major_axis(r, v, gm):
    """Vectorised vis-viva; NaN where unbound."""
    inv_a = 2.0 / np.hypot(r[..., 0], r[..., 1]) - np.einsum("...i,...i->...", v, v) / gm
    with np.errstate(divide="ignore"):
        return np.where(inv_a > 0, 1.0 / inv_a, np.nan)


@dataclass(frozen=True)
class ResonantSeries:
    """Slow variables of a co-orbital pair, one entry per trajectory sample.

    ``zeta`` is unwrapped (radians), ``delta_a = a_moon2 - a_moon1``,
    ``r_rel`` is the moon-moon distance. ``valid`` is False where either
    moon was momentarily unbound (``delta_a`` is NaN there).
    """

    t: np.ndarray
    zeta: np.ndarray
    delta_a: np.ndarray
    r_rel: np.ndarray
    valid: np.ndarray
    orbital_period: float
    a_mean: float

    def __len__(self):
        return len(self.t)

    @property
    def dt(self):
        return float(np.median(np.diff(self.t)))

    @property
    def zeta_wrapped(self):
        return np.mod(self.zeta, 2 * math.pi)


def _unwrap(zeta_wrapped):
    """Unwrap to within (0, 2 pi) of the first sample by accumulating minimal increments."""
    return np.unwrap(zeta_wrapped)


def resonant_series(traj: TrajectoryRecord) -> ResonantSeries:
    if len(traj) < 2:
        raise InvalidInputError("trajectory needs at least 2 samples")
    pos, vel, gm = traj.positions, traj.velocities, traj.gm
    rel_p = pos[:, (MOON1, MOON2)] - pos[:, CENTRAL][:, None, :]
    rel_v = vel[:, (MOON1, MOON2)] - vel[:, CENTRAL][:, None, :]
    lam = np.arctan2(rel_p[..., 1], rel_p[..., 0])
    zeta = _unwrap(np.mod(lam[:, 1] - lam[:, 0], 2 * math.pi))
    a1 = _semi_major_axis(rel_p[:, 0], rel_v[:, 0], gm[CENTRAL] + gm[MOON1])
    a2 = _semi_major_axis(rel_p[:, 1], rel_v[:, 1], gm[CENTRAL] + gm[MOON2])
    delta_a = a2 - a1
    r_rel = np.hypot(*(rel_p[:, 1] - rel_p[:, 0]).T)
    valid = np.isfinite(delta_a)
    w = gm[(MOON1, MOON2),]
    w = w / w.sum() if w.sum() > 0 else np.array([0.5, 0.5])
    a_mean = float(np.nanmedian(w[0] * a1 + w[1] * a2))
    period = 2 * math.pi * math.sqrt(a_mean**3 / (gm[CENTRAL] + gm[MOON1] + gm[MOON2]))
    return ResonantSeries(traj.t.copy(), zeta, delta_a, r_rel, valid, period, a_mean)


def relabel(series: ResonantSeries) -> ResonantSeries:
    """The same series with moon1 and moon2 swapped."""
    zeta = _unwrap(np.mod(-series.zeta, 2 * math.pi))
    return ResonantSeries(series.t, zeta, -series.delta_a, series.r_rel, series.valid,
                          series.orbital_period, series.a_mean)


def moving_average(x, width: int):
    """Centred rectangular running mean; edges use the partial window."""
    width = max(int(width), 1)
    if width == 1:
        return np.asarray(x, dtype=float).copy()
    x = np.asarray(x, dtype=float)
    csum = np.concatenate([[0.0], np.cumsum(x)])
    n = len(x)
    half_lo = width // 2
    half_hi = width - half_lo
    lo = np.clip(np.arange(n) - half_lo, 0, n)
    hi = np.clip(np.arange(n) + half_hi, 0, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def _window_samples(series, window):
    dt = series.dt
    return max(int(round(window / dt)), 1)


class SwapDirection(str, Enum):
    INNER_TO_OUTER = "inner_to_outer"
    OUTER_TO_INNER = "outer_to_inner"


@dataclass(frozen=True)
class SwapEvent:
    """An orbit exchange. ``direction`` describes what moon1 does."""

    t_swap: float
    min_distance: float
    direction: SwapDirection


def detect_swaps(series: ResonantSeries, smoothing_window: float | None = None) -> list[SwapEvent]:
    """Sign changes of the window-averaged semi-major axis difference.

    The default window is one orbital period, which removes the short-period
    wiggle of the osculating elements.
    """
    if len(series) < 2:
        raise InvalidInputError("series is empty or degenerate")
    window = series.orbital_period if smoothing_window is None else smoothing_window
    if not window > 0:
        raise InvalidInputError("smoothing_window must be positive")
    if series.t[-1] - series.t[0] <= window:
        raise InvalidInputError("series is shorter than the smoothing window")
    t = series.t[series.valid]
    da = moving_average(series.delta_a[series.valid], _window_samples(series, window))
    r_rel = series.r_rel[series.valid]

    sign = np.sign(da)
    nz = np.flatnonzero(sign != 0)
    idx = [nz[k] for k in range(1, len(nz)) if sign[nz[k]] != sign[nz[k - 1]]]
    crossings = []
    for k in idx:
        j = k - 1
        while sign[j] == 0:
            j -= 1
        frac = da[j] / (da[j] - da[k])
        crossings.append((j, k, t[j] + frac * (t[k] - t[j])))

    events = []
    for m, (j, k, t_swap) in enumerate(crossings):
        lo = 0 if m == 0 else (crossings[m - 1][1] + j) // 2
        hi = len(t) if m == len(crossings) - 1 else (k + crossings[m + 1][0]) // 2 + 1
        # moon1 goes inner -> outer when a2 - a1 turns negative
        direction = SwapDirection.INNER_TO_OUTER if da[k] < 0 else SwapDirection.OUTER_TO_INNER
        events.append(SwapEvent(float(t_swap), float(np.min(r_rel[lo:hi])), direction))
    return events


def turning_points(x, threshold: float):
    """Indices of alternating extrema of ``x`` with hysteresis ``threshold``.

    Returns a list of (index, kind) with kind +1 for a maximum, -1 for a
    minimum. Excursions smaller than ``threshold`` are ignored, and the
    series end points never count as extrema.
    """
    x = np.asarray(x, dtype=float)
    out = []
    direction = 0
    i_max = i_min = i_ext = 0
    for i in range(1, len(x)):
        if direction == 0:
            if x[i] > x[i_max]:
                i_max = i
            if x[i] < x[i_min]:
                i_min = i
            if x[i] - x[i_min] > threshold:
                if i_min > 0:
                    out.append((i_min, -1))
                direction, i_ext = 1, i
            elif x[i_max] - x[i] > threshold:
                if i_max > 0:
                    out.append((i_max, 1))
                direction, i_ext = -1, i
        elif direction == 1:
            if x[i] > x[i_ext]:
                i_ext = i
            elif x[i_ext] - x[i] > threshold:
                out.append((i_ext, 1))
                direction, i_ext = -1, i
        else:
            if x[i] < x[i_ext]:
                i_ext = i
            elif x[i] - x[i_ext] > threshold:
                out.append((i_ext, -1))
                direction, i_ext = 1, i
    return out


def _smoothed_zeta(series):
    return moving_average(series.zeta, _window_samples(series, series.orbital_period))


def _extrema(series, rel_threshold=0.05, abs_threshold=1e-6):
    z = _smoothed_zeta(series)
    span = float(np.ptp(z))
    return z, turning_points(z, max(rel_threshold * span, abs_threshold))


def classify_trajectory(series: ResonantSeries) -> Regime:
    """tadpole_L4/L5, horseshoe or circulating from the unwrapped angle.

    Librating regimes need at least one full libration (two turning
    points); otherwise the result is ``Regime.UNDETERMINED``.
    """
    z, ext = _extrema(series)
    two_pi = 2 * math.pi
    # express the unwrapped angle relative to the (0, 2 pi) cell of the first sample
    offset = math.floor(z[0] / two_pi) * two_pi
    lo, hi = float(z.min()) - offset, float(z.max()) - offset
    if hi - lo >= two_pi:
        return Regime.CIRCULATING
    if lo <= 0.0 or hi >= two_pi:
        # crossed the encounter direction without a full turn yet
        return Regime.UNDETERMINED
    if len(ext) < 2:
        return Regime.UNDETERMINED
    if hi < math.pi:
        return Regime.TADPOLE_L4
    if lo > math.pi:
        return Regime.TADPOLE_L5
    return Regime.HORSESHOE


def libration_period_from_series(series: ResonantSeries) -> float:
    """Mean spacing of like extrema of the smoothed angle (full libration period)."""
    _, ext = _extrema(series)
    gaps = []
    for kind in (1, -1):
        idx = [i for i, k in ext if k == kind]
        gaps.extend(np.diff(series.t[idx]))
    if not gaps:
        raise InvalidInputError("series covers less than one full libration")
    return float(np.mean(gaps))


def rotating_frame(traj: TrajectoryRecord, omega: float) -> TrajectoryRecord:
    """Express ``traj`` in a frame rotating at ``omega`` about the barycenter.

    Positions are rotated by -omega*t; velocities are rotated and corrected
    by -omega x r.
    """
    gm = traj.gm
    rc = np.einsum("i,nij->nj", gm, traj.positions) / gm.sum()
    vc = np.einsum("i,nij->nj", gm, traj.velocities) / gm.sum()
    r = traj.positions - rc[:, None, :]
    v = traj.velocities - vc[:, None, :]
    c = np.cos(omega * traj.t)[:, None]
    s = np.sin(omega * traj.t)[:, None]
    rx = c * r[..., 0] + s * r[..., 1]
    ry = -s * r[..., 0] + c * r[..., 1]
    vx = c * v[..., 0] + s * v[..., 1] + omega * ry
    vy = -s * v[..., 0] + c * v[..., 1] - omega * rx
    return TrajectoryRecord(
        t=traj.t, positions=np.stack([rx, ry], axis=-1), velocities=np.stack([vx, vy], axis=-1),
        gm=traj.gm, radius_phys=traj.radius_phys, report=traj.report,
        collision=traj.collision, truncated=traj.truncated, units=traj.units,
    )


# --------------------------------------------------------------------------
# frequency analysis


def _hann(n):
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * (k + 0.5) / n))


def _correlation(f_w, tc, omega):
    """<f, e^{i omega t}> with the window already folded into ``f_w``."""
    return np.sum(f_w * np.exp(-1j * omega * tc))


def naff_frequency(signal, dt: float, min_samples: int = 64, image_passes: int = 3):
    """Dominant frequency (rad / time unit) and amplitude of a sampled signal.

    The Hann-windowed correlation |<f, exp(i w t)>| is maximised: an FFT
    peak gives the starting bracket (+-2 bins), golden-section search
    narrows it, and the zero of the analytic derivative polishes it.

    For real input the returned frequency is >= 0 and the amplitude is that
    of the cosine. The mirror component at -w is estimated and subtracted
    before re-maximising (``image_passes`` times) together with any constant
    offset, which removes their leakage into the peak. A DC-dominated signal gives frequency 0 with amplitude
    equal to its mean.
    """
    f = np.asarray(signal)
    n = len(f)
    if n < min_samples:
        raise InvalidInputError(f"need at least {min_samples} samples, got {n}")
    if not dt > 0:
        raise InvalidInputError("dt must be positive")
    is_real = not np.iscomplexobj(f)
    f = f.astype(complex)
    mean = f.mean()
    dc = float(mean.real) if is_real else complex(mean)
    scale = float(np.max(np.abs(f)))
    if scale == 0.0 or np.max(np.abs(f - mean)) <= 1e-14 * scale:
        return 0.0, dc

    w = _hann(n)
    w = w / w.sum()
    tc = (np.arange(n) - 0.5 * (n - 1)) * dt
    bin_w = 2.0 * np.pi / (n * dt)

    pad = 4
    mag = np.abs(np.fft.fft(f * w, pad * n))
    freqs = np.fft.fftfreq(pad * n, d=dt) * 2.0 * np.pi
    if is_real:
        mag = mag[: pad * n // 2 + 1]
        freqs = np.abs(freqs[: pad * n // 2 + 1])
    w0 = float(freqs[int(np.argmax(mag))])
    if w0 == 0.0:
        return 0.0, dc

    lo, hi = w0 - 2 * bin_w, w0 + 2 * bin_w
    if is_real:
        lo = max(lo, 0.5 * bin_w)
    g = f
    omega = _maximise(g * w, tc, lo, hi, bin_w)
    c = _correlation(g * w, tc, omega)
    if is_real:
        for _ in range(image_passes):
            # windowed constant left after removing both tone images
            tone = c * np.exp(1j * omega * tc)
            offset = np.sum(w * (f - tone - np.conj(tone)))
            g = f - np.conj(tone) - offset
            # keep the search centred on the current estimate
            omega = _maximise(g * w, tc, max(omega - bin_w, 0.5 * bin_w), omega + bin_w, bin_w)
            c = _correlation(g * w, tc, omega)
        return float(omega), 2.0 * abs(c)
    # complex amplitude referred to the first sample rather than the window centre
    return float(omega), complex(c * np.exp(1j * omega * tc[0]))


def _maximise(f_w, tc, lo, hi, bin_w):
    """Golden-section search for the peak of |<f, e^{iwt}>|^2, then derivative polish."""

    def power(om):
        return abs(_correlation(f_w, tc, om)) ** 2

    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    p1, p2 = power(x1), power(x2)
    while hi - lo > 1e-4 * bin_w:
        if p1 < p2:
            lo, x1, p1 = x1, x2, p2
            x2 = lo + _GOLDEN * (hi - lo)
            p2 = power(x2)
        else:
            hi, x2, p2 = x2, x1, p1
            x1 = hi - _GOLDEN * (hi - lo)
            p1 = power(x1)
    return _polish(f_w, tc, lo, hi)


def _polish(f_w, tc, lo, hi):
    """Root of d|c|^2/dw on [lo, hi] by safeguarded secant; falls back to the midpoint."""

    def deriv(om):
        e = np.exp(-1j * om * tc)
        c = np.sum(f_w * e)
        dc = np.sum(-1j * tc * f_w * e)
        return 2.0 * (c.real * dc.real + c.imag * dc.imag)

    d_lo, d_hi = deriv(lo), deriv(hi)
    if d_lo * d_hi > 0:
        return 0.5 * (lo + hi)
    for _ in range(60):
        mid = hi - d_hi * (hi - lo) / (d_hi - d_lo)
        if not lo < mid < hi:
            mid = 0.5 * (lo + hi)
        d_mid = deriv(mid)
        if d_mid == 0.0:
            return mid
        if d_mid * d_lo > 0:
            lo, d_lo = mid, d_mid
        else:
            hi, d_hi = mid, d_mid
        if hi - lo <= 4 * np.finfo(float).eps * abs(mid):
            break
    return 0.5 * (lo + hi)


def libration_frequency(zeta, dt: float) -> float:
    """Fundamental frequency of a librating angle (mean removed first)."""
    zeta = np.asarray(zeta, dtype=float)
    nu, _ = naff_frequency(zeta - zeta.mean(), dt)
    return nu


def quasiperiodicity_index(series: ResonantSeries, min_librations: float = 4.0) -> float:
    """Relative drift |nu1 - nu2| / mean(nu) of the libration frequency between halves.

    Values near zero indicate regular (quasi-periodic) motion.
    """
    regime = classify_trajectory(series)
    if regime in (Regime.CIRCULATING, Regime.UNDETERMINED):
        raise InvalidInputError(f"no libration to measure (regime: {regime.value})")
    return _frequency_drift(series.zeta[series.valid], series.dt, min_librations)


def _frequency_drift(zeta, dt, min_librations=4.0):
    n = len(zeta) // 2
    nu1 = libration_frequency(zeta[:n], dt)
    nu2 = libration_frequency(zeta[n: 2 * n], dt)
    nu = 0.5 * (nu1 + nu2)
    if nu == 0.0:
        raise InvalidInputError("libration frequency is zero")
    if nu * 2 * n * dt / (2 * math.pi) < min_librations - 1e-9:
        raise InvalidInputError(
            f"series spans {nu * 2 * n * dt / (2 * math.pi):.2f} librations, need {min_librations}")
    return abs(nu1 - nu2) / nu


def frequency_drift(zeta, dt: float, min_librations: float = 4.0) -> float:
    """quasiperiodicity_index for a bare angle series (no regime check)."""
    return _frequency_drift(np.asarray(zeta, dtype=float), dt, min_librations)
