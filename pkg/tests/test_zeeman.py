import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from qdspin.qmath import DegenerateFitError
from qdspin.zeeman import (BRANCHES, ELECTRON, HOLE, BranchPoint, FieldConfig, GTensor,
                           ZeemanModel, compose_bloch, effective_g, equator_pulse_angle,
                           fit_zeeman, geometric_ramsey_offset, larmor_frequency, pole_transfer,
                           read_branches_csv, rotate, rotation_axis, solve_g_tensor,
                           synthetic_branches, transition_energies, write_branches_csv)
from qdspin.validation import zeeman_roundtrip

MODEL = ZeemanModel(1.3466e6, 6.021, ELECTRON, HOLE)
angles = st.floats(0.0, 90.0)


def test_effective_g_limits():
    assert effective_g(GTensor(2.0, 0.5), 0.0) == 2.0
    assert effective_g(GTensor(2.0, 0.5), 90.0) == 0.5
    assert effective_g(GTensor(1.0, 1.0), 37.0) == pytest.approx(1.0)


def test_effective_g_for_measured_dot():
    assert effective_g(ELECTRON, 60.0) == pytest.approx(0.459, abs=1e-3)
    assert effective_g(HOLE, 60.0) == pytest.approx(0.919, abs=2e-3)


def test_larmor_frequency():
    assert larmor_frequency(0.459, 5.0) == pytest.approx(32.1, abs=0.1)
    assert larmor_frequency(2.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        larmor_frequency(1.0, -1.0)


def test_zero_field_degenerate_branches():
    e = transition_energies(MODEL, FieldConfig(0.0, 60.0))
    assert set(e.values()) == {MODEL.E0}


def test_branch_energies_closed_form():
    b, theta = 3.0, 60.0
    e = transition_energies(MODEL, FieldConfig(b, theta))
    ge, gh = effective_g(ELECTRON, theta), effective_g(HOLE, theta)
    mu = 57.8838
    for se, sh in BRANCHES:
        want = MODEL.E0 + MODEL.gamma_dia * b * b + 0.5 * (se * ge + sh * gh) * mu * b
        assert e[(se, sh)] == pytest.approx(want, abs=1e-9)
    # splitting between electron partners is g_e mu_B B
    assert e[(1, 1)] - e[(-1, 1)] == pytest.approx(ge * mu * b)


def test_noise_free_fit_is_exact():
    pts = synthetic_branches(MODEL, 60.0, np.linspace(0, 5, 11))
    fit = fit_zeeman(pts)
    assert fit.E0 == pytest.approx(MODEL.E0, rel=1e-12)
    assert fit.gamma_dia == pytest.approx(MODEL.gamma_dia, rel=1e-8)
    assert fit.g_e == pytest.approx(effective_g(ELECTRON, 60.0), rel=1e-8)
    assert fit.g_h == pytest.approx(effective_g(HOLE, 60.0), rel=1e-8)
    assert fit.rms < 1e-6


def test_fit_matches_numpy_on_noisy_data():
    rng = np.random.default_rng(5)
    pts = synthetic_branches(MODEL, 90.0, np.linspace(0, 5, 11), 1.0, rng)
    fit = fit_zeeman(pts)
    mu = 57.8838
    x = np.array([[1, p.B ** 2, p.branch[0] * mu * p.B / 2, p.branch[1] * mu * p.B / 2]
                  for p in pts])
    ref = np.linalg.lstsq(x, [p.energy for p in pts], rcond=None)[0]
    assert np.allclose([fit.E0, fit.gamma_dia, fit.g_e, fit.g_h], ref, rtol=1e-9)


def test_fit_degenerate_inputs():
    few = synthetic_branches(MODEL, 60.0, [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateFitError, match="distinct fields"):
        fit_zeeman(few)
    one_branch = [p for p in synthetic_branches(MODEL, 60.0, range(6)) if p.branch == (1, 1)]
    with pytest.raises(DegenerateFitError):
        fit_zeeman(one_branch)


def test_branch_point_validation():
    with pytest.raises(ValueError):
        BranchPoint(1.0, (1, 0), 0.0)
    with pytest.raises(ValueError):
        FieldConfig(-1.0, 0.0)
    with pytest.raises(ValueError):
        GTensor(-1.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.05, 3.0), angles, angles)
def test_g_tensor_recovery(gf, gv, t1, t2):
    if abs(math.cos(math.radians(t1)) ** 2 - math.cos(math.radians(t2)) ** 2) < 0.05:
        return
    g = GTensor(gf, gv)
    got = solve_g_tensor(effective_g(g, t1), t1, effective_g(g, t2), t2)
    assert got.gF == pytest.approx(gf, rel=1e-6) and got.gV == pytest.approx(gv, rel=1e-6)


def test_g_tensor_same_angle_is_degenerate():
    with pytest.raises(DegenerateFitError):
        solve_g_tensor(0.4, 60.0, 0.4, 60.0)


def test_csv_round_trip(tmp_path):
    pts = synthetic_branches(MODEL, 60.0, np.linspace(0, 5, 6), 1.0, np.random.default_rng(1))
    path = tmp_path / "branches.csv"
    write_branches_csv(path, pts)
    assert path.read_text().splitlines()[0] == "B_tesla,s_e,s_h,energy_ueV"
    assert read_branches_csv(path) == pts


def test_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("B,energy\n1,2\n")
    with pytest.raises(ValueError, match="expected header"):
        read_branches_csv(path)


def test_roundtrip_bias_is_small():
    worst = zeeman_roundtrip(MODEL, 60.0, reps=10)
    assert worst[0] < 0.02


@settings(max_examples=50, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), angles, st.floats(-360, 360))
def test_rotation_matches_scipy(x, y, z, theta, angle):
    axis = rotation_axis(theta)
    ref = Rotation.from_rotvec(math.radians(angle) * axis).apply([x, y, z])
    assert np.allclose(rotate([x, y, z], axis, angle), ref, atol=1e-12)


def test_rotation_axis_limits():
    assert rotation_axis(0.0).tolist() == [0.0, 0.0, 1.0]
    assert rotation_axis(90.0).tolist() == [1.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        rotation_axis(100.0)


def test_equator_angle():
    assert equator_pulse_angle(60.0) == pytest.approx(109.4712, abs=1e-3)
    assert equator_pulse_angle(90.0) == 90.0
    assert equator_pulse_angle(45.0) == pytest.approx(180.0)
    with pytest.raises(ValueError, match="unreachable"):
        equator_pulse_angle(30.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(45.0, 90.0))
def test_equator_angle_lands_on_equator(theta):
    v = rotate([0, 0, 1], rotation_axis(theta), equator_pulse_angle(theta))
    assert abs(v[2]) < 1e-9


@settings(max_examples=40, deadline=None)
@given(angles, st.floats(0, 360))
def test_pole_transfer_matches_rotation(theta, a):
    v = rotate([0, 0, 1], rotation_axis(theta), a)
    assert pole_transfer(theta, a) == pytest.approx((1 - v[2]) / 2, abs=1e-12)


def test_pole_transfer_ceiling_below_equator_tilt():
    # the largest transfer about a 60 deg tilted axis is sin^2(60)
    assert pole_transfer(60.0, 180.0) == pytest.approx(0.75)
    assert pole_transfer(90.0, 180.0) == pytest.approx(1.0)


def test_compose_bloch_trivial():
    assert np.allclose(compose_bloch(90.0, 0.0, 0.0, 0.0), [0, 0, 1])
    # two quarter turns about x in sequence flip the pole
    assert np.allclose(compose_bloch(90.0, 90.0, 0.0, 90.0), [0, 0, -1], atol=1e-12)


def test_ramsey_offset_voigt_is_zero_phase():
    assert abs(geometric_ramsey_offset(90.0)) < 0.01


def test_ramsey_offset_minimizes_final_z():
    theta = 60.0
    phi = geometric_ramsey_offset(theta, step=0.01)
    a = equator_pulse_angle(theta)
    grid = np.linspace(-180, 180, 721)
    zs = [compose_bloch(theta, a, p, a)[2] for p in grid]
    assert compose_bloch(theta, a, phi, a)[2] <= min(zs) + 1e-8
    assert phi == pytest.approx(-70.53, abs=0.02)


def test_voigt_larmor_and_trion_splitting():
    assert larmor_frequency(0.446, 5.0) == pytest.approx(31.21, abs=0.01)
    # excited splitting implied by the hole g-factor at 5 T, in GHz
    assert larmor_frequency(effective_g(HOLE, 60.0), 5.0) == pytest.approx(64.3, abs=0.1)


def test_rotation_axis_tilted():
    assert np.allclose(rotation_axis(60.0), [math.sqrt(3) / 2, 0.0, 0.5])


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(0.01, 3.0), st.floats(0.0, 1.0), angles)
def test_effective_g_monotone(gf, gv, bump, theta):
    g = effective_g(GTensor(gf, gv), theta)
    assert effective_g(GTensor(gf + bump, gv), theta) >= g
    assert effective_g(GTensor(gf, gv + bump), theta) >= g


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 8.0), angles)
def test_branch_energies_sum_cancels_zeeman_terms(b, theta):
    e = transition_energies(MODEL, FieldConfig(b, theta))
    assert sum(e.values()) == pytest.approx(4 * (MODEL.E0 + MODEL.gamma_dia * b * b), rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(angles, st.floats(0, 360), st.floats(-180, 180), st.floats(0, 360))
def test_compose_bloch_properties(theta, a1, phi, a2):
    v = compose_bloch(theta, a1, phi, a2)
    assert abs(np.linalg.norm(v) - 1) < 1e-12
    single = rotate([0, 0, 1], rotation_axis(theta), a1 + a2)
    assert np.allclose(compose_bloch(theta, a1, 0.0, a2), single, atol=1e-12)


def test_compose_bloch_zero_angles_keep_pole():
    assert np.allclose(compose_bloch(0.0, 0.0, 30.0, 0.0), [0, 0, 1])


def test_equator_transfer_is_one_half():
    assert pole_transfer(60.0, equator_pulse_angle(60.0)) == pytest.approx(0.5, abs=1e-12)
    assert pole_transfer(90.0, 180.0) == pytest.approx(1.0)


def test_voigt_noise_free_fit():
    model = ZeemanModel(1.3466e6, 4.395, ELECTRON, HOLE)
    fit = fit_zeeman(synthetic_branches(model, 90.0, np.linspace(0, 5, 11)))
    assert fit.gamma_dia == pytest.approx(4.395, rel=1e-8)
