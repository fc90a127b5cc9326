"""Invariant and oracle checks shared by ``qdspin validate`` and the tests.

Every check takes a :class:`~qdspin.config.Config` and returns a
:class:`CheckResult`; none of them raise on a failed comparison.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .config import Config
from .experiments import SU2Scan, fringe_analysis, run_su2_map
from .lindblad import LindbladSystem, density_check, evolve, evolve_unitary, pure_state
from .model import (DIM, PulseOverlapWarning, PulseSpec, assemble, build_collapse,
                    build_h0, build_hcw, initial_state, sigma_t)
from .qmath import expm, herm_eigen, hermiticity_defect, projector
from .zeeman import (ZeemanModel, effective_g, equator_pulse_angle, fit_zeeman,
                     larmor_frequency, synthetic_branches)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _result(name, passed, detail):
    return CheckResult(name, bool(passed), detail)


def check_eigen(cfg: Config) -> CheckResult:
    rng = np.random.default_rng(7)
    worst = 0.0
    for n in (2, 4, 8, 16):
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        h = a + a.conj().T
        w, v = herm_eigen(h)
        worst = max(worst, float(np.max(np.abs(v @ np.diag(w) @ v.conj().T - h)))
                    / float(np.max(np.abs(h))))
    return _result("eigen-reconstruction", worst < 1e-12, f"relative error {worst:.2e}")


def check_expm(cfg: Config) -> CheckResult:
    h = build_h0(cfg.model) + build_hcw(cfg.model)
    u = expm(-1j * 0.37 * h)
    err = float(np.max(np.abs(u @ u.conj().T - np.eye(DIM))))
    return _result("expm-unitarity", err < 1e-12, f"|U U^H - I| = {err:.2e}")


def oracle_equivalence(params, omega_p=1500.0, t0=1.0, dt_fraction=5e-3):
    """Largest ground-population gap between the master equation (dissipation
    switched off) and direct Schroedinger propagation, at the end of the window."""
    p = params.replace(gamma0=0.0, gamma_dephasing=0.0, alpha_phonon=0.0)
    system = assemble(p, [PulseSpec(t0, omega_p)])
    traj = evolve(system, initial_state(), (0.0, p.t_window))
    psi0 = np.zeros(DIM, dtype=complex)
    psi0[1] = 1.0
    psi = evolve_unitary(system.h_static, system.h_terms, psi0, (0.0, p.t_window),
                         dt_fraction * sigma_t(p))
    pops = np.abs(psi) ** 2
    return float(np.max(np.abs(np.real(np.diag(traj.final))[:2] - pops[:2])))


def check_oracle(cfg: Config) -> CheckResult:
    gap = oracle_equivalence(cfg.model)
    return _result("oracle-equivalence", gap < 1e-6, f"max ground-population gap {gap:.2e}")


def two_level_error(params, t_end=3.0, samples=301):
    """CW-only drive of 1<->4 against sin^2(k14 Omega_cw t / 2)."""
    h = build_h0(params) + build_hcw(params)
    system = LindbladSystem(h)
    times = np.linspace(0.0, t_end, samples)
    traj = evolve(system, projector(DIM, 0), (0.0, t_end), times,
                  rel_tol=1e-12, abs_tol=1e-14)
    omega = 2 * math.pi * params.omega_cw * params.k14
    exact = np.sin(omega * times / 2) ** 2
    return float(np.max(np.abs(traj.populations()[:, 3] - exact)))


def check_two_level(cfg: Config) -> CheckResult:
    err = two_level_error(cfg.model)
    return _result("two-level-analytic", err < 1e-8, f"max deviation {err:.2e}")


def larmor_fit(params, span=1.0, step=1.33e-3):
    """Fitted precession frequency (GHz) of (|1>+|2>)/sqrt 2 with the CW off."""
    system = assemble(params, (), cw_scale=0.0)
    times = np.arange(0.0, span + 1e-12, step)
    rho0 = pure_state(np.array([1, 1, 0, 0]) / math.sqrt(2))
    traj = evolve(system, rho0, (0.0, times[-1]), times)
    coh = np.real(traj.states[:, 0, 1])
    return fringe_analysis((times * 1e3, coh), baseline_degree=0).frequency


def check_larmor(cfg: Config) -> CheckResult:
    f = larmor_fit(cfg.model)
    target = cfg.model.dE_gs
    rel = abs(f - target) / target
    return _result("larmor-frequency", rel < 1e-3, f"{f:.6f} GHz vs {target:g} GHz")


# Rates of the constructed radiative channels must follow Gamma = k^2 x 1/ns.
REFERENCE_GAMMA0 = 1.0


def radiative_rates(params):
    """``{(excited, ground): rate}`` read back from the constructed channels."""
    rates = {}
    for op, coef in build_collapse(params):
        rows, cols = np.nonzero(op)
        if len(rows) == 1 and rows[0] != cols[0]:
            rates[(cols[0] + 1, rows[0] + 1)] = abs(coef(0.0)) ** 2
    return rates


def check_branching(cfg: Config) -> CheckResult:
    p = cfg.model
    rates = radiative_rates(p)
    out4 = rates.get((4, 1), 0.0) + rates.get((4, 2), 0.0)
    want = (p.k14 ** 2 + p.k24 ** 2) * REFERENCE_GAMMA0
    ratio_ok = True
    if p.k24 > 0 and rates.get((4, 2)):
        ratio_ok = math.isclose(rates[(4, 1)] / rates[(4, 2)], (p.k14 / p.k24) ** 2,
                                rel_tol=1e-12)
    ok = math.isclose(out4, want, rel_tol=1e-12, abs_tol=1e-15) and ratio_ok
    return _result("radiative-branching", ok,
                   f"total rate out of |4> {out4:.6g}/ns, expected {want:.6g}/ns")


def check_hermitian_hamiltonian(cfg: Config) -> CheckResult:
    p = cfg.model
    t0 = cfg.scan.pulse_t0
    system = assemble(p, [PulseSpec(t0, 1000.0)])
    ts = t0 + sigma_t(p) * np.linspace(-7, 7, 57)
    worst = max(hermiticity_defect(system.hamiltonian(t)) for t in ts)
    scale = max(float(np.max(np.abs(system.hamiltonian(t0)))), 1.0)
    return _result("hamiltonian-hermiticity", worst <= 1e-12 * scale, f"defect {worst:.2e}")


def conservation(params, omegas, t0=1.0, samples=125):
    """(max trace drift, max Hermiticity defect, min eigenvalue) over readout runs."""
    drift, herm, low = 0.0, 0.0, math.inf
    times = np.linspace(0.0, params.t_window, samples)
    for om in omegas:
        system = assemble(params, [PulseSpec(t0, om)])
        traj = evolve(system, initial_state(), (0.0, params.t_window), times)
        drift = max(drift, traj.max_trace_drift)
        for rho in traj.states:
            herm = max(herm, hermiticity_defect(rho))
            low = min(low, float(np.linalg.eigvalsh(rho)[0]))
            drift = max(drift, abs(np.trace(rho).real - 1.0))
    return drift, herm, low


def check_conservation(cfg: Config) -> CheckResult:
    omegas = np.linspace(cfg.scan.omega_max / 4, cfg.scan.omega_max, 4)
    drift, herm, low = conservation(cfg.model, omegas, cfg.scan.pulse_t0)
    ok = drift < 1e-8 and herm < 1e-10 and low > -1e-8
    return _result("conservation", ok,
                   f"trace drift {drift:.1e}, hermiticity {herm:.1e}, min eigenvalue {low:.1e}")


def check_density_samples(cfg: Config) -> CheckResult:
    p = cfg.model
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PulseOverlapWarning)
        system = assemble(p, [PulseSpec(1.0, 1200.0), PulseSpec(1.01, 1200.0)])
    traj = evolve(system, initial_state(), (0.0, 2.0), np.linspace(0, 2.0, 41))
    problems = [msg for rho in traj.states for msg in density_check(rho)]
    return _result("density-matrix", not problems, problems[0] if problems else "ok")


def check_g_factors(cfg: Config) -> CheckResult:
    z = cfg.zeeman
    ge = effective_g(z.electron, 60.0)
    gh = effective_g(z.hole, 60.0)
    f = larmor_frequency(0.459, 5.0)
    ok = abs(ge - 0.459) <= 1e-3 and abs(gh - 0.919) <= 2e-3 and abs(f - 32.1) <= 0.1
    return _result("g-factors", ok, f"g_e {ge:.4f}, g_h {gh:.4f}, f_L(0.459, 5 T) {f:.3f} GHz")


def check_equator_angle(cfg: Config) -> CheckResult:
    a60, a90 = equator_pulse_angle(60.0), equator_pulse_angle(90.0)
    ok = abs(a60 - 109.471) <= 0.01 and a90 == 90.0
    return _result("equator-angle", ok, f"{a60:.4f} deg at 60 deg, {a90!r} deg at 90 deg")


def zeeman_errors(model: ZeemanModel, theta, reps=100, noise=1.0, seed=2024,
                  fields=np.linspace(0.0, 5.0, 11)):
    """Signed relative errors of (gamma, g_e, g_h), one row per noisy synthetic fit."""
    rng = np.random.default_rng(seed)
    truth = np.array([model.gamma_dia, effective_g(model.electron, theta),
                      effective_g(model.hole, theta)])
    out = np.empty((reps, 3))
    for k in range(reps):
        fit = fit_zeeman(synthetic_branches(model, theta, fields, noise, rng))
        out[k] = (np.array([fit.gamma_dia, abs(fit.g_e), abs(fit.g_h)]) - truth) / truth
    return out


def zeeman_roundtrip(model: ZeemanModel, theta, reps=100, noise=1.0, seed=2024,
                     fields=np.linspace(0.0, 5.0, 11)):
    """Worst relative errors of (gamma, g_e, g_h) over noisy synthetic fits."""
    return np.max(np.abs(zeeman_errors(model, theta, reps, noise, seed, fields)), axis=0)


def check_zeeman_fit(cfg: Config) -> CheckResult:
    z = cfg.zeeman
    theta = cfg.model.theta_field
    worst = zeeman_roundtrip(z, theta, reps=20)
    ok = worst[0] < 0.02 and max(worst[1:]) < 0.01
    return _result("zeeman-roundtrip", ok,
                   f"worst relative error gamma {worst[0]:.2%}, g_e {worst[1]:.2%}, "
                   f"g_h {worst[2]:.2%}")


def check_sweep_determinism(cfg: Config) -> CheckResult:
    scan = SU2Scan(cfg.model, omegas=[600.0, 1200.0], delays_ps=[20.0, 40.0],
                   cw_scale=cfg.scan.su2_cw_scale, t0=cfg.scan.pulse_t0)
    a = run_su2_map(scan, workers=1).rows
    b = run_su2_map(scan, workers=4).rows
    return _result("sweep-determinism", np.array_equal(a, b),
                   "serial and threaded rows identical" if np.array_equal(a, b)
                   else "serial and threaded rows differ")


CHECKS = (
    check_eigen, check_expm, check_hermitian_hamiltonian, check_branching,
    check_two_level, check_oracle, check_larmor, check_density_samples,
    check_conservation, check_g_factors, check_equator_angle, check_zeeman_fit,
    check_sweep_determinism,
)


def run_checks(cfg: Config, checks=CHECKS):
    results = []
    for check in checks:
        start = time.perf_counter()
        try:
            res = check(cfg)
        except Exception as exc:  # a crashing check is a failed check
            res = CheckResult(check.__name__.removeprefix("check_").replace("_", "-"),
                              False, f"{type(exc).__name__}: {exc}")
        results.append(CheckResult(res.name, res.passed, res.detail,
                                   time.perf_counter() - start))
    return results
