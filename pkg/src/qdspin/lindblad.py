"""Master-equation propagation with windowed time-dependent terms.

Units are hbar = 1 with times in ns and angular frequencies in rad/ns.

The generator is

    drho/dt = -i [H(t), rho] + sum_m (c_m rho c_m^H - 1/2 {c_m^H c_m, rho})

with ``H(t) = h_static + sum_k (f_k(t) A_k + conj(f_k(t)) A_k^H)`` and
``c_m = a_m(t) C_m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernel
from .qmath import as_ket, as_matrix, dag, expm, hermiticity_defect, ket_norm

FREE_STEP_CAP = 1e-3  # ns, i.e. 1 ps between pulses
WINDOW_RESOLUTION = 50  # steps per Gaussian width inside a support window
DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-11
MAX_STEPS = 50_000_000


class IntegrationError(RuntimeError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class DivergenceError(IntegrationError):
    pass


class StiffnessError(IntegrationError):
    pass


class OracleStepError(IntegrationError):
    pass


@dataclass(frozen=True)
class TimeCoefficient:
    """Scalar coefficient ``f(t)`` of a Hamiltonian term or collapse channel.

    ``f(t) = amplitude * exp(-(t-center)^2 / 2 width^2) * exp(-i carrier t)``
    on ``support`` and exactly 0 outside it. ``width = 0`` means no envelope.
    """

    amplitude: complex = 1.0
    center: float = 0.0
    width: float = 0.0
    carrier: float = 0.0
    support: tuple[float, float] | None = None

    def __post_init__(self):
        if self.width < 0:
            raise ValueError("width must be >= 0")
        if self.support is not None and not self.support[0] < self.support[1]:
            raise ValueError(f"empty support window {self.support}")

    @classmethod
    def constant(cls, value: complex = 1.0) -> "TimeCoefficient":
        return cls(amplitude=value)

    @classmethod
    def gaussian(cls, amplitude, center, width, carrier=0.0, cutoff=6.0):
        return cls(amplitude=amplitude, center=center, width=width,
                   carrier=carrier,
                   support=(center - cutoff * width, center + cutoff * width))

    def __call__(self, t: float) -> complex:
        if self.support is not None and not (self.support[0] <= t <= self.support[1]):
            return 0j
        v = complex(self.amplitude)
        if self.width > 0:
            x = (t - self.center) / self.width
            v *= math.exp(-0.5 * x * x)
        if self.carrier != 0:
            v *= complex(math.cos(self.carrier * t), -math.sin(self.carrier * t))
        return v

    @property
    def max_step(self) -> float:
        """Step cap inside the support window."""
        if self.width > 0:
            return self.width / WINDOW_RESOLUTION
        return FREE_STEP_CAP

    @property
    def is_zero(self) -> bool:
        return self.amplitude == 0

    def row(self) -> np.ndarray:
        lo, hi = self.support if self.support is not None else (-np.inf, np.inf)
        a = complex(self.amplitude)
        return np.array([a.real, a.imag, self.center, self.width, self.carrier, lo, hi])


@dataclass(frozen=True)
class CoefficientSum:
    """Pointwise sum of coefficients, e.g. the total envelope of a pulse train."""

    parts: tuple

    def __call__(self, t: float) -> complex:
        return sum((p(t) for p in self.parts), 0j)

    @property
    def is_zero(self) -> bool:
        return all(p.is_zero for p in self.parts)


def _parts(coef):
    return coef.parts if isinstance(coef, CoefficientSum) else (coef,)


@dataclass(frozen=True, eq=False)
class LindbladSystem:
    h_static: np.ndarray
    h_terms: tuple = ()
    collapse: tuple = ()

    def __post_init__(self):
        h = as_matrix(self.h_static)
        scale = max(1.0, float(np.max(np.abs(h))))
        if hermiticity_defect(h) > 1e-12 * scale:
            raise ValueError("h_static is not Hermitian")
        n = h.shape[0]
        terms = tuple((as_matrix(op), coef) for op, coef in self.h_terms)
        chans = tuple((as_matrix(op), coef) for op, coef in self.collapse)
        for op, _ in terms + chans:
            if op.shape != (n, n):
                raise ValueError(f"operator shape {op.shape} != {(n, n)}")
        for _, coef in chans:
            for part in _parts(coef):
                a = complex(part.amplitude)
                if a.imag != 0 or a.real < 0 or part.carrier != 0:
                    raise ValueError("collapse amplitudes must be real and >= 0")
        object.__setattr__(self, "h_static", h)
        object.__setattr__(self, "h_terms", terms)
        object.__setattr__(self, "collapse", chans)

    @property
    def dim(self) -> int:
        return self.h_static.shape[0]

    def hamiltonian(self, t: float) -> np.ndarray:
        h = self.h_static.copy()
        for op, coef in self.h_terms:
            c = coef(t)
            if c != 0:
                h += c * op + np.conj(c) * dag(op)
        return h

    def collapse_operators(self, t: float):
        return [coef(t).real * op for op, coef in self.collapse]

    def without_dissipation(self) -> "LindbladSystem":
        return LindbladSystem(self.h_static, self.h_terms, ())

    def windows(self) -> np.ndarray:
        """Rows ``(lo, hi, max_step)`` for every windowed coefficient."""
        rows = [(c.support[0], c.support[1], c.max_step)
                for _, coef in self.h_terms + self.collapse
                for c in _parts(coef)
                if c.support is not None and not c.is_zero]
        rows.sort()
        return np.array(rows, dtype=np.float64).reshape(-1, 3)

    @cached_property
    def packed(self):
        live_terms = [(op, part) for op, c in self.h_terms if not c.is_zero
                      for part in _parts(c)]
        live_chans = [(op, c) for op, c in self.collapse if not c.is_zero]
        t_ptr, t_idx, t_val = _sparse([op for op, _ in live_terms])
        t_par = np.array([c.row() for _, c in live_terms]).reshape(-1, 7)
        c_ops = [op for op, _ in live_chans]
        c_ptr, c_idx, c_val = _sparse(c_ops)
        d_ptr, d_idx, d_val = _sparse([dag(c) @ c for c in c_ops])
        c_rows = [[p.row() for p in _parts(c)] for _, c in live_chans]
        c_par = np.array([r for rows in c_rows for r in rows]).reshape(-1, 7)
        c_start = np.cumsum([0] + [len(rows) for rows in c_rows]).astype(np.int64)
        return (np.ascontiguousarray(self.h_static), t_ptr, t_idx, t_val, t_par,
                c_ptr, c_idx, c_val, d_ptr, d_idx, d_val, c_par, c_start)


def _sparse(ops):
    """Concatenated coordinate lists of a sequence of matrices."""
    ptr, idx, val = [0], [], []
    for op in ops:
        rows, cols = np.nonzero(op)
        idx.extend(zip(rows, cols))
        val.extend(op[rows, cols])
        ptr.append(len(val))
    return (np.array(ptr, dtype=np.int64), np.array(idx, dtype=np.int64).reshape(-1, 2),
            np.array(val, dtype=np.complex128))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    steps: int
    rejected: int
    max_trace_drift: float
    final: np.ndarray = field(repr=False, default=None)
    integral: float = 0.0

    def populations(self) -> np.ndarray:
        return np.real(np.einsum("kii->ki", self.states))

    def expectation(self, op) -> np.ndarray:
        return np.real(np.einsum("ij,kji->k", np.asarray(op), self.states))


def density_check(rho, herm_tol=1e-10, trace_tol=1e-8, pos_tol=1e-8):
    """Return a list of violated density-matrix invariants (empty if valid)."""
    problems = []
    d = hermiticity_defect(rho)
    if d > herm_tol:
        problems.append(f"hermiticity defect {d:.3e}")
    tr = np.trace(rho).real
    if abs(tr - 1) > trace_tol:
        problems.append(f"trace {tr:.12f}")
    w = np.linalg.eigvalsh(0.5 * (rho + dag(rho)))
    if w[0] < -pos_tol:
        problems.append(f"min eigenvalue {w[0]:.3e}")
    return problems


def pure_state(psi) -> np.ndarray:
    psi = as_ket(psi)
    return np.outer(psi, np.conj(psi))


def rhs(system: LindbladSystem, rho, t: float) -> np.ndarray:
    """Right-hand side of the master equation at time ``t``."""
    rho = np.asarray(rho, dtype=np.complex128)
    h = system.hamiltonian(t)
    out = -1j * (h @ rho - rho @ h)
    for c in system.collapse_operators(t):
        cd = dag(c)
        cdc = cd @ c
        out += c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc)
    if not np.all(np.isfinite(out)):
        raise IntegrationError(f"numeric overflow in rhs at t={t}", t)
    return out


def _check_span(t_span, rel_tol, abs_tol):
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ValueError(f"t_span must be increasing, got {t_span}")
    if rel_tol <= 0 or abs_tol <= 0:
        raise ValueError("tolerances must be positive")
    return t0, t1


def _run(system, rho0, t0, t1, samples, rel_tol, abs_tol, projector, weight):
    rho0 = as_matrix(rho0)
    if rho0.shape != (system.dim, system.dim):
        raise ValueError("rho0 dimension does not match the system")
    proj = np.zeros_like(rho0) if projector is None else as_matrix(projector)
    status, t_fail, states, steps, rej, drift, integral, final = _kernel.integrate(
        system.packed, rho0, t0, t1, samples, float(rel_tol), float(abs_tol),
        proj, float(weight), system.windows(), FREE_STEP_CAP, MAX_STEPS)
    if status == _kernel.STATUS_DIVERGED:
        raise DivergenceError(f"integration diverged: trace drift >= "
                              f"{_kernel.RENORM_LIMIT:g} at t={t_fail:.6g} ns", t_fail)
    if status == _kernel.STATUS_STIFF:
        raise StiffnessError(f"stiffness failure: step below {_kernel.MIN_STEP:g} ns "
                             f"at t={t_fail:.9g} ns", t_fail)
    if status == _kernel.STATUS_MAX_STEPS:
        raise IntegrationError(f"step budget exhausted at t={t_fail:.6g} ns", t_fail)
    return Trajectory(times=samples, states=states, steps=int(steps), rejected=int(rej),
                      max_trace_drift=float(drift), final=final, integral=float(integral))


def evolve(system: LindbladSystem, rho0, t_span, sample_times=None,
           rel_tol: float = DEFAULT_RTOL, abs_tol: float = DEFAULT_ATOL) -> Trajectory:
    """Integrate the master equation over ``t_span`` with DOPRI5.

    Steps are capped at ``width/50`` inside every support window and at
    1 ps elsewhere. After each accepted step the state is re-symmetrized and
    its trace renormalized; a trace drift of 1e-6 or more aborts with
    :class:`DivergenceError`.
    """
    t0, t1 = _check_span(t_span, rel_tol, abs_tol)
    samples = np.array([t1] if sample_times is None else sample_times, dtype=np.float64)
    if samples.size and (samples.min() < t0 or samples.max() > t1):
        raise ValueError("sample_times must lie inside t_span")
    if np.any(np.diff(samples) <= 0):
        raise ValueError("sample_times must be strictly increasing")
    return _run(system, rho0, t0, t1, samples, rel_tol, abs_tol, None, 0.0)


def integrate_observable(system: LindbladSystem, rho0, t_span, weight: float,
                         projector, rel_tol: float = DEFAULT_RTOL,
                         abs_tol: float = DEFAULT_ATOL) -> float:
    """``weight * integral of Tr(projector rho(t)) dt`` over ``t_span``.

    The integral uses the trapezoidal rule on the integrator's accepted steps.
    """
    t0, t1 = _check_span(t_span, rel_tol, abs_tol)
    if weight < 0:
        raise ValueError("weight must be >= 0")
    p = as_matrix(projector)
    if hermiticity_defect(p) > 1e-10 or np.max(np.abs(p @ p - p)) > 1e-10:
        raise ValueError("projector must be Hermitian and idempotent")
    if weight == 0:
        return 0.0
    traj = _run(system, rho0, t0, t1, np.empty(0), rel_tol, abs_tol, p, weight)
    return max(traj.integral, 0.0)


_GL_NODES = (0.5 - math.sqrt(3.0) / 6.0, 0.5 + math.sqrt(3.0) / 6.0)
_CF4_WEIGHTS = (0.25 - math.sqrt(3.0) / 6.0, 0.25 + math.sqrt(3.0) / 6.0)


def evolve_unitary(h_static, h_terms, psi0, t_span, dt: float) -> np.ndarray:
    """Schroedinger propagation by fourth-order commutator-free Magnus steps.

    Each step of length ``dt`` inside a support window is a product of two
    exponentials of Hamiltonians sampled at the Gauss-Legendre nodes. Between
    windows the Hamiltonian is constant, so each gap is crossed by one exact
    exponential.
    """
    sys_ = LindbladSystem(h_static, tuple(h_terms))
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    psi = as_ket(psi0).copy()
    n0 = ket_norm(psi)

    edges = {t0, t1}
    for lo, hi, _ in sys_.windows():
        edges.update(x for x in (lo, hi) if t0 < x < t1)
    edges = sorted(edges)
    wins = sys_.windows()

    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        windowed = any(lo <= mid <= hi for lo, hi, _ in wins)
        if not windowed:
            psi = expm(-1j * (b - a) * sys_.hamiltonian(mid)) @ psi
            continue
        nsteps = max(1, int(math.ceil((b - a) / dt - 1e-9)))
        h = (b - a) / nsteps
        for i in range(nsteps):
            t = a + i * h
            h1 = sys_.hamiltonian(t + _GL_NODES[0] * h)
            h2 = sys_.hamiltonian(t + _GL_NODES[1] * h)
            psi = expm(-1j * h * (_CF4_WEIGHTS[1] * h1 + _CF4_WEIGHTS[0] * h2)) @ psi
            psi = expm(-1j * h * (_CF4_WEIGHTS[0] * h1 + _CF4_WEIGHTS[1] * h2)) @ psi
        drift = abs(ket_norm(psi) - n0)
        if drift > 1e-6:
            raise OracleStepError(f"oracle step too coarse: norm drift {drift:.3e}", b)
    return psi
