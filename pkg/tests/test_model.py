import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdspin.lindblad import evolve, integrate_observable
from qdspin.model import (DIM, DoubleLambdaParams, Geometry, PulseOverlapWarning, PulseSpec,
                          assemble, build_collapse, build_h0, build_hcw, build_pulse_terms,
                          cosd, initial_state, preset, pulse_coefficients, pulses_overlap,
                          readout, readout_rate, resonant_cw_offset, sigma_t, sind)
from qdspin.qmath import projector
from qdspin.validation import oracle_equivalence, radiative_rates, two_level_error


@pytest.fixture(params=["oblique", "voigt"])
def params(request):
    return preset(request.param)


def test_exact_degree_trig():
    assert cosd(90.0) == 0.0 and sind(180.0) == 0.0 and cosd(-180.0) == -1.0
    assert cosd(60.0) == pytest.approx(0.5, abs=1e-15)


def test_presets():
    ob, vo = preset("oblique"), preset(Geometry.VOIGT)
    assert ob.geometry is Geometry.OBLIQUE and vo.geometry is Geometry.VOIGT
    assert (ob.dE_gs, ob.k14, ob.k24) == (32.0, 0.75, 0.25)
    assert (vo.dE_gs, vo.beta_pol, vo.theta_field) == (31.0, 90.0, 90.0)
    with pytest.raises(ValueError):
        preset("faraday")


def test_sigma_t():
    assert sigma_t(preset("oblique")) == pytest.approx(1 / (2 * math.pi * 98))


def test_parameter_validation():
    p = preset("oblique")
    for bad in (dict(k14=1.2), dict(gamma0=-1.0), dict(dE_gs=0.0), dict(t_window=20.0),
                dict(theta_field=120.0)):
        with pytest.raises(ValueError):
            p.replace(**bad)
    with pytest.raises(ValueError):
        PulseSpec(1.0, -1.0)


def test_static_hamiltonian_levels(params):
    h = build_h0(params)
    e = np.diag(h).real / (2 * math.pi)
    assert e[1] - e[0] == pytest.approx(params.dE_gs)
    assert e[3] - e[2] == pytest.approx(params.dE_es)
    # the CW frame puts |1> and |4> on resonance
    assert e[3] == pytest.approx(e[0])
    assert resonant_cw_offset(params.dE_gs, params.dE_es) == pytest.approx(params.d_cw)
    hcw = build_hcw(params)
    assert np.count_nonzero(hcw) == 2
    assert hcw[0, 3] == pytest.approx(math.pi * params.omega_cw * params.k14)


def test_polarization_weights_are_unit():
    for geo in ("oblique", "voigt"):
        w = pulse_coefficients(preset(geo))
        assert abs(w[0]) ** 2 + abs(w[1]) ** 2 == pytest.approx(1.0)


def test_pulse_terms_amplitudes(params):
    terms = build_pulse_terms(params, [PulseSpec(1.0, 100.0)])
    assert len(terms) == 4
    w = pulse_coefficients(params)
    for (op, coef), wi, (i, j) in zip(terms, w, ((1, 3), (1, 4), (2, 3), (2, 4))):
        assert op[i - 1, j - 1] == 1
        expected = 0.5 * params.k(i, j) * wi * 2 * math.pi * 100.0
        assert abs(coef(1.0)) == pytest.approx(abs(expected), rel=1e-12)


def test_pulse_outside_window_rejected(params):
    with pytest.raises(ValueError, match="outside the window"):
        build_pulse_terms(params, [PulseSpec(0.001, 10.0)])


def test_overlap_warning(params):
    pulses = [PulseSpec(1.0, 10.0), PulseSpec(1.005, 10.0)]
    assert pulses_overlap(params, pulses)
    assert not pulses_overlap(params, [PulseSpec(1.0, 10.0), PulseSpec(1.03, 10.0)])
    with pytest.warns(PulseOverlapWarning):
        build_pulse_terms(params, pulses)


def test_radiative_rates_follow_branching(params):
    rates = radiative_rates(params)
    for (e, g), r in rates.items():
        assert r == pytest.approx(params.k(g, e) ** 2 * params.gamma0)
    total4 = rates[(4, 1)] + rates[(4, 2)]
    assert total4 == pytest.approx((params.k14 ** 2 + params.k24 ** 2) * params.gamma0)
    assert readout_rate(params) == pytest.approx(params.k24 ** 2 * params.gamma0)


def test_phonon_channel_only_with_live_pulses(params):
    base = len(build_collapse(params))
    assert len(build_collapse(params, [PulseSpec(1.0, 0.0)])) == base
    assert len(build_collapse(params, [PulseSpec(1.0, 10.0)])) == base + 2
    assert len(build_collapse(params.replace(alpha_phonon=0.0), [PulseSpec(1.0, 10.0)])) == base


def test_dark_ground_state_gives_no_counts(params):
    # starting in |2> with nothing coupling it, |4> is never populated
    n = readout(params, (), cw_scale=0.0)
    assert abs(n) < 1e-6 * readout_rate(params) * params.t_window


def test_cw_alone_leaves_initial_state_dark(params):
    # the CW couples only 1<->4, so |2> stays dark without a pulse
    assert readout(params) == 0.0


def test_pulsed_readout_is_positive_and_bounded(params):
    n = readout(params, [PulseSpec(1.0, 800.0)])
    assert 0 < n < readout_rate(params) * params.t_window


def test_two_level_cw_closed_form(params):
    assert two_level_error(params) < 1e-8


def test_master_equation_agrees_with_schroedinger(params):
    assert oracle_equivalence(params) < 1e-6


@settings(max_examples=8, deadline=None)
@given(st.sampled_from(["oblique", "voigt"]), st.floats(50.0, 2500.0))
def test_density_matrix_stays_physical(geo, omega):
    p = preset(geo)
    traj = evolve(assemble(p, [PulseSpec(1.0, omega)]), initial_state(), (0.0, 2.0),
                  np.linspace(0.0, 2.0, 21))
    for rho in traj.states:
        assert abs(np.trace(rho).real - 1) < 1e-8
        assert np.max(np.abs(rho - rho.conj().T)) < 1e-10
        assert np.linalg.eigvalsh(rho)[0] > -1e-8


def test_ground_dephasing_flag():
    p = preset("oblique")
    n_excited = len(build_collapse(p))
    assert len(build_collapse(p.replace(dephase_ground=True))) == n_excited + 2


def test_assemble_rejects_negative_cw_scale():
    with pytest.raises(ValueError):
        assemble(preset("voigt"), cw_scale=-1.0)


def test_as_dict_round_trip():
    p = preset("voigt")
    assert DoubleLambdaParams(**p.as_dict()) == p
    assert initial_state()[1, 1] == 1 and initial_state().shape == (DIM, DIM)
    assert np.array_equal(initial_state(), projector(DIM, 1))


def test_cw_coupling_values():
    p = preset("oblique")
    hcw = build_hcw(p)
    assert hcw[0, 3].real / (2 * math.pi) == pytest.approx(0.375)
    assert np.trace(hcw) == 0 and np.array_equal(hcw, hcw.conj().T)


def test_polarization_weights_per_geometry():
    w13, w14, w23, w24 = pulse_coefficients(preset("oblique"))
    assert w14 == 0 and w24 == 0
    assert w13 == pytest.approx(np.exp(1j * math.radians(10.0)))
    assert w23 == w13
    w13, w14, w23, w24 = pulse_coefficients(preset("voigt"))
    r = 1 / math.sqrt(2)
    assert w14 == pytest.approx(r) and w23 == pytest.approx(r)
    assert w13 == pytest.approx(1j * r) and w24 == pytest.approx(1j * r)
    assert pulse_coefficients(preset("voigt").replace(alpha_pol=0.0)) == (0, 1, 1, 0)


def test_oblique_pulse_drives_only_the_lower_trion():
    terms = build_pulse_terms(preset("oblique"), [PulseSpec(1.0, 500.0)])
    live = [tuple(np.argwhere(op)[0]) for op, c in terms if c(1.0) != 0]
    assert live == [(0, 2), (1, 2)]


def test_zero_amplitude_pulse_has_zero_drive():
    terms = build_pulse_terms(preset("voigt"), [PulseSpec(1.0, 0.0)])
    assert all(c(1.0) == 0 for _, c in terms)


def test_preset_rate_examples():
    ob = radiative_rates(preset("oblique"))
    assert ob[(4, 1)] / ob[(4, 2)] == pytest.approx(9.0)
    vo = radiative_rates(preset("voigt"))
    assert vo[(4, 1)] == pytest.approx(0.25) and vo[(4, 2)] == pytest.approx(0.25)


def test_dissipation_free_system_has_no_channels(params):
    p = params.replace(gamma0=0.0, gamma_dephasing=0.0, alpha_phonon=0.0)
    assert build_collapse(p, [PulseSpec(1.0, 100.0)]) == []
    assert readout(params.replace(gamma0=0.0), [PulseSpec(1.0, 800.0)]) == 0.0


def test_hamiltonian_hermitian_through_pulse(params):
    system = assemble(params, [PulseSpec(1.0, 1500.0), PulseSpec(1.05, 1500.0)])
    for t in np.linspace(0.98, 1.07, 37):
        h = system.hamiltonian(t)
        assert np.max(np.abs(h - h.conj().T)) <= 1e-12 * np.max(np.abs(h))


@pytest.mark.parametrize("shift", [0.5013, 2.0007])
def test_readout_time_translation(params, shift):
    # |2> is frozen until the first pulse, so delaying the train by `shift`
    # only removes the last `shift` ns of counting from the unshifted run. The
    # carrier phase picked up by the shift interferes weakly with the CW where
    # both drive 1<->4 (voigt), hence the loose tolerance.
    pulses = [PulseSpec(1.0, 900.0), PulseSpec(1.05, 900.0)]
    moved = readout(params, [PulseSpec(p.t0 + shift, p.omega_p) for p in pulses])
    short = integrate_observable(assemble(params, pulses), initial_state(),
                                 (0.0, params.t_window - shift), readout_rate(params),
                                 projector(DIM, 3))
    assert moved == pytest.approx(short, rel=1e-4)
