import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from horseshoe import analysis, coorbital as co, core
from horseshoe.coorbital import E_L3, E_L4, Regime

DEG = math.pi / 180
PRESET_GM = np.array([3.7931187e7, 0.1266, 0.03513])
PRESET_MU = (PRESET_GM[1] + PRESET_GM[2]) / PRESET_GM[0]
A_REF = 151440.0
N_PRESET = 2 * math.pi / core.kepler_period(A_REF, PRESET_GM.sum())
YEAR = 365.25 * 86400


def test_potential_values():
    # oracle: cos 60 = 1/2 and (2 - 1)^-1/2 = 1; cos 180 = -1 and 4^-1/2 = 1/2
    assert co.potential_v(60 * DEG) == pytest.approx(-0.5, abs=1e-15)
    assert co.potential_v(180 * DEG) == pytest.approx(-1.5, abs=1e-15)
    assert co.potential_v(1e-8) < -1e7
    with pytest.raises(core.SingularityError):
        co.potential_v(0.0)
    with pytest.raises(core.SingularityError):
        co.potential_dv(2 * math.pi)
    with pytest.raises(core.SingularityError):
        co.potential_v(np.array([0.5, 0.0]))


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, math.pi))
def test_potential_symmetry(z):
    assert co.potential_v(z) == pytest.approx(co.potential_v(2 * math.pi - z), rel=1e-12)
    assert co.potential_dv(z) == pytest.approx(-co.potential_dv(2 * math.pi - z), rel=1e-9, abs=1e-12)


def test_dv_matches_finite_difference():
    z = np.linspace(5 * DEG, 355 * DEG, 200)
    h = 1e-6
    fd = (co.potential_v(z + h) - co.potential_v(z - h)) / (2 * h)
    assert np.allclose(co.potential_dv(z), fd, rtol=1e-7, atol=1e-7)


def test_dv_zeros_by_sign_scan():
    z = np.arange(1, 3_600_000) * (1e-4 * DEG)
    dv = co.potential_dv(z)
    zeros = np.flatnonzero(dv == 0.0)
    flips = np.flatnonzero(np.sign(dv[:-1]) * np.sign(dv[1:]) < 0)
    found = sorted(set(np.round(np.degrees(z[zeros]), 3)) |
                   set(np.round(np.degrees(0.5 * (z[flips] + z[flips + 1])), 3)))
    assert len(flips) + len(zeros) == 3 or len(found) == 3
    assert found == pytest.approx([60.0, 180.0, 300.0], abs=1e-3)
    for zc in (60, 180, 300):
        assert abs(co.potential_dv(zc * DEG)) < 1e-15


def test_second_derivative_signs():
    h = 1e-4

    def d2(z):
        return (co.potential_v(z + h) - 2 * co.potential_v(z) + co.potential_v(z - h)) / h**2

    assert d2(60 * DEG) == pytest.approx(-9 / 4, rel=1e-6)
    assert d2(300 * DEG) == pytest.approx(-9 / 4, rel=1e-6)
    assert d2(180 * DEG) > 0


def test_separatrix_energies():
    assert -co.potential_v(math.pi / 3) == pytest.approx(E_L4, abs=1e-12)
    assert -co.potential_v(math.pi) == pytest.approx(E_L3, abs=1e-12)
    assert co.separatrix_energy() == pytest.approx(-co.potential_v(10 * DEG))
    cut = co.hill_cutoff(PRESET_MU)
    assert cut == pytest.approx(4 * (PRESET_MU / 3) ** (1 / 3))
    assert co.separatrix_energy(mu=PRESET_MU) == pytest.approx(-co.potential_v(cut))
    assert co.separatrix_energy(zeta_cutoff=5 * DEG, mu=PRESET_MU) == pytest.approx(-co.potential_v(5 * DEG))
    with pytest.raises(core.InvalidInputError):
        co.resolve_cutoff(zeta_cutoff=70 * DEG)


def test_reduced_flow_fixed_points_and_linear_frequency():
    mu, n = 1e-4, 2.0
    for z in (60, 180, 300):
        dz, du = co.reduced_flow((z * DEG, 0.0), mu, n)
        assert dz == 0.0 and abs(du) < 1e-15
    # oracle: finite-difference slope of du/dt against zeta at L4 gives -omega^2 / (n sqrt(3 mu))
    h = 1e-6
    _, dup = co.reduced_flow((60 * DEG + h, 0.0), mu, n)
    _, dum = co.reduced_flow((60 * DEG - h, 0.0), mu, n)
    scale = n * math.sqrt(3 * mu)
    omega2 = -(dup - dum) / (2 * h) * scale
    assert math.sqrt(omega2) == pytest.approx(n * math.sqrt(27 * mu / 4), rel=1e-7)
    p = co.CoorbitalPoint.at(1.0, 0.3)
    assert co.reduced_flow(p, mu, n)[0] == pytest.approx(scale * 0.3)


def test_reduced_flow_conserves_energy():
    e0 = 0.8
    z0 = co.turning_points(e0)[1]
    period = co.reduced_period(e0)
    _, z, u = co.integrate_reduced(z0, 0.0, 100 * period, n_samples=20001)
    e = co.energy(z, u)
    assert np.max(np.abs(e - e0)) < 1e-10


@pytest.mark.parametrize("E, zeta, expected", [
    (0.6, None, Regime.TADPOLE),
    (0.6, 1.0, Regime.TADPOLE_L4),
    (0.6, 5.0, Regime.TADPOLE_L5),
    (2.0, None, Regime.HORSESHOE),
    (E_L3, None, Regime.SEPARATRIX),
    (0.3, None, Regime.INFEASIBLE),
    (50.0, None, Regime.CIRCULATING),
])
def test_classify_energy(E, zeta, expected):
    assert co.classify_energy(E, zeta=zeta) is expected


def test_classify_energy_with_mu():
    e_cut = co.separatrix_energy(mu=PRESET_MU)
    assert co.classify_energy(50.0, mu=PRESET_MU) is Regime.HORSESHOE
    assert co.classify_energy(e_cut * 1.01, mu=PRESET_MU) is Regime.CIRCULATING
    assert co.classify_energy(e_cut, mu=PRESET_MU) is Regime.SEPARATRIX
    assert co.classify_energy(E_L4, zeta=1.0) is Regime.TADPOLE_L4


def test_coorbital_point_energy_identity():
    p = co.CoorbitalPoint.at(2.0, -1.3)
    assert p.energy == 0.5 * 1.3**2 - co.potential_v(2.0)
    assert p.regime is co.classify_energy(p.energy, 2.0)


def test_turning_points():
    z1, z2 = co.turning_points(1.0)
    assert z1 < 60 * DEG < z2 < math.pi
    assert 1.0 + co.potential_v(z1) == pytest.approx(0.0, abs=1e-12)
    assert 1.0 + co.potential_v(z2) == pytest.approx(0.0, abs=1e-12)
    w1, w2 = co.turning_points(1.0, zeta_side=5.0)
    assert w1 == pytest.approx(2 * math.pi - z2) and w2 == pytest.approx(2 * math.pi - z1)
    h1, h2 = co.turning_points(3.0)
    assert h2 == pytest.approx(2 * math.pi - h1)
    with pytest.raises(core.InvalidInputError):
        co.turning_points(0.4)
    with pytest.raises(core.DivergentPeriodError):
        co.turning_points(E_L3)


def _period_by_integration(e):
    """Oracle: time between successive downward u = 0 crossings of the reduced flow."""
    z0 = co.turning_points(e)[1]

    def rhs(_, y):
        return (y[1], co.potential_dv(y[0]))

    def event(_, y):
        return y[1]

    event.direction = -1
    sol = solve_ivp(rhs, (0, 200), (z0 - 1e-9, 0.0), method="DOP853", rtol=1e-12, atol=1e-13,
                    events=event)
    t = sol.t_events[0]
    return float(np.mean(np.diff(t)))


@pytest.mark.parametrize("e", [0.55, 1.0, 1.4, 2.0, 10.0])
def test_reduced_period_matches_integration(e):
    assert co.reduced_period(e) == pytest.approx(_period_by_integration(e), rel=1e-7)


@pytest.mark.parametrize("e", [0.5 + 1e-6, 0.7, 1.2, 1.49, 1.51, 3.0, 30.0, 200.0])
def test_quadrature_converges(e):
    t1 = co.reduced_period(e, nodes=512)
    t2 = co.reduced_period(e, nodes=1024)
    assert abs(t2 - t1) / t1 < 1e-8


def test_small_oscillation_limit():
    mu, n = 1e-6, 1.0
    expected = 2 * math.pi / (n * math.sqrt(27 * mu / 4))
    assert co.small_oscillation_period(mu, n) == pytest.approx(expected)
    assert co.libration_period(E_L4 + 1e-8, mu, n) == pytest.approx(expected, rel=1e-3)


def test_libration_period_errors():
    with pytest.raises(core.DivergentPeriodError):
        co.libration_period(E_L3, 1e-6, 1.0)
    with pytest.raises(core.DivergentPeriodError):
        co.libration_period(co.separatrix_energy(mu=1e-6), 1e-6, 1.0)
    with pytest.raises(core.InvalidInputError):
        co.libration_period(0.2, 1e-6, 1.0)
    with pytest.raises(core.InvalidInputError):
        co.libration_period(1e4, 1e-6, 1.0)


def test_preset_horseshoe_period_about_eight_years():
    u = co.u_from_delta_a(47.0, PRESET_MU, A_REF)
    e = float(co.energy(math.pi, u))
    assert co.classify_energy(e, mu=PRESET_MU) is Regime.HORSESHOE
    period = co.libration_period(e, PRESET_MU, N_PRESET) / YEAR
    assert period == pytest.approx(8.0, rel=0.15)
    # the same energy from the observed closest approach angle (about 5 degrees)
    e_obs = -co.potential_v(5.2 * DEG)
    assert co.libration_period(e_obs, PRESET_MU, N_PRESET) / YEAR == pytest.approx(8.0, rel=0.15)


def test_delta_a_map():
    assert co.delta_a_from_u(0.0, PRESET_MU, A_REF) == 0.0
    u = co.u_from_delta_a(50.0, PRESET_MU, A_REF)
    # oracle: (3/2)(50 / 151440) / sqrt(3 mu)
    assert abs(u) == pytest.approx(1.5 * 50 / A_REF / math.sqrt(3 * PRESET_MU), rel=1e-14)
    assert abs(u) == pytest.approx(4.4, abs=0.15)
    assert co.delta_a_from_u(u, PRESET_MU, A_REF) == pytest.approx(50.0, rel=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.floats(-100, 100), st.floats(1e-12, 1e-2), st.floats(1e-3, 1e9))
def test_delta_a_odd(u, mu, a):
    assert co.delta_a_from_u(-u, mu, a) == -co.delta_a_from_u(u, mu, a)


def test_portrait_topology():
    pp = co.phase_portrait(PRESET_MU)
    assert pp.components(Regime.TADPOLE_L4) == 1
    assert pp.components(Regime.TADPOLE_L5) == 1
    assert pp.components(Regime.HORSESHOE) == 1
    assert pp.mask(Regime.HORSESHOE).mean() > 0
    assert pp.mask(Regime.CIRCULATING).any()
    # tadpole islands sit around 60 and 300 degrees
    for regime, centre in ((Regime.TADPOLE_L4, 60), (Regime.TADPOLE_L5, 300)):
        zs = np.degrees(pp.zeta[np.any(pp.mask(regime), axis=0)])
        assert zs.min() < centre < zs.max()
        assert (zs.max() < 180) if centre == 60 else (zs.min() > 180)
    # the horseshoe band surrounds all three equilibria
    i0 = len(pp.u) // 2
    hs_cols = np.flatnonzero(pp.mask(Regime.HORSESHOE)[i0 + 5])
    assert np.degrees(pp.zeta[hs_cols]).min() < 60 and np.degrees(pp.zeta[hs_cols]).max() > 300
    assert pp.levels == {"E_L4": 0.5, "E_L3": 1.5, "E_L12": co.separatrix_energy(mu=PRESET_MU)}


def test_portrait_equilibria_labels():
    assert co.CoorbitalPoint.at(60 * DEG, 0.0).regime is Regime.TADPOLE_L4
    assert co.CoorbitalPoint.at(300 * DEG, 0.0).regime is Regime.TADPOLE_L5
    assert co.CoorbitalPoint.at(180 * DEG, 0.0).regime is Regime.SEPARATRIX
    pp = co.phase_portrait(1e-6, n_zeta=7, n_u=5, guard=60 * DEG)
    # the grid hits zeta = 60, 180, 300 and u = 0 exactly
    assert np.degrees(pp.zeta) == pytest.approx([60, 100, 140, 180, 220, 260, 300])
    assert pp.point(2, 0).regime is Regime.TADPOLE_L4
    assert pp.point(2, 3).regime is Regime.SEPARATRIX
    assert pp.point(2, 6).regime is Regime.TADPOLE_L5


def test_portrait_symmetry():
    pp = co.phase_portrait(PRESET_MU, n_zeta=181, n_u=101)
    flipped = pp.labels[::-1, ::-1]
    swap = {"tadpole_L4": "tadpole_L5", "tadpole_L5": "tadpole_L4"}
    mirrored = np.vectorize(lambda s: swap.get(s, s))(flipped)
    assert np.array_equal(mirrored, pp.labels)


def test_portrait_rejects_bad_grid():
    with pytest.raises(core.InvalidInputError):
        co.phase_portrait(1e-6, guard=0.0)
    with pytest.raises(core.InvalidInputError):
        co.phase_portrait(0.0)
    with pytest.raises(core.InvalidInputError):
        co.phase_portrait(1e-6, n_zeta=2)


def test_separatrix_curves_lie_on_levels():
    pp = co.phase_portrait(1e-6)
    for name, level in (("L3", E_L3), ("L12", pp.levels["E_L12"])):
        z, u = pp.separatrices[name].T
        inside = u > 0
        assert np.allclose(co.energy(z[inside], u[inside]), level, rtol=1e-10)


def test_librating_orbits_cross_equal_radii():
    # every tadpole and horseshoe orbit passes through u = 0 (equal semi-major axes)
    for e in (0.7, 1.3, 5.0):
        z0 = co.turning_points(e)[1] - 1e-9
        _, _, u = co.integrate_reduced(z0, 0.0, 2 * co.reduced_period(e), n_samples=4001)
        assert u.min() < 0 < u.max() or abs(u[0]) < 1e-6


def test_initial_state_geometry():
    s = co.initial_state(PRESET_GM, A_REF, -47.0, math.pi)
    assert np.allclose(s.gm @ s.positions, 0.0, atol=1e-6)
    assert np.allclose(s.gm @ s.velocities, 0.0, atol=1e-12)
    rel = s.positions[1:] - s.positions[0]
    r1, r2 = np.hypot(*rel.T)
    assert r2 - r1 == pytest.approx(-47.0, rel=1e-9)
    w1 = PRESET_GM[1] / PRESET_GM[1:].sum()
    assert (w1 * r1 + (1 - w1) * r2) == pytest.approx(A_REF, rel=1e-12)
    # opposite sides of the planet, moon1 on +x
    assert rel[0, 0] > 0 and rel[1, 0] < 0
    assert abs(rel[0, 1]) < 1e-9 and abs(rel[1, 1]) < 1e-9
    for k in (1, 2):
        body = core.BodyState(rel[k - 1], s.velocities[k] - s.velocities[0], 0.0)
        el = analysis.osculating_elements(body, PRESET_GM[0] + PRESET_GM[k])
        assert el.e < 1e-12


def test_state_from_point_round_trip():
    gm = np.array([1.0, 3e-9, 1e-9])
    mu = 4e-9
    s = co.state_from_point(gm, 2.0, 3.0)
    rel = s.positions[1:] - s.positions[0]
    r1, r2 = np.hypot(*rel.T)
    assert co.u_from_delta_a(r2 - r1, mu, 1.0) == pytest.approx(3.0, rel=1e-9)
    zeta = math.atan2(rel[1, 1], rel[1, 0]) - math.atan2(rel[0, 1], rel[0, 0])
    assert zeta == pytest.approx(2.0)
