"""Four-level double-Lambda model of a negatively charged quantum dot.

Level labels (1-based, as in the physics; arrays are 0-based):

    |1> spin-up ground, |2> spin-down ground, |3> lower trion, |4> upper trion.

The CW laser drives 1<->4, the readout counts photons on 4->2, and every
run starts in |2><2|. All user-facing frequencies are ordinary frequencies
f = omega / 2 pi in GHz; internally everything is rad/ns.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np

from .lindblad import (DEFAULT_ATOL, DEFAULT_RTOL, CoefficientSum, LindbladSystem,
                       TimeCoefficient, integrate_observable)
from .qmath import projector

TWO_PI = 2.0 * math.pi
DIM = 4
GROUND = (1, 2)
EXCITED = (3, 4)
TRANSITIONS = ((1, 3), (1, 4), (2, 3), (2, 4))
PULSE_CUTOFF = 6.0  # support half-width in units of sigma_t


class Geometry(str, enum.Enum):
    OBLIQUE = "oblique"
    VOIGT = "voigt"


class PulseOverlapWarning(UserWarning):
    pass


def cosd(deg: float) -> float:
    """cos of an angle in degrees, exact at multiples of 90."""
    r = math.fmod(deg, 360.0)
    exact = {0.0: 1.0, 90.0: 0.0, 180.0: -1.0, 270.0: 0.0,
             -90.0: 0.0, -180.0: -1.0, -270.0: 0.0}
    return exact.get(r, math.cos(math.radians(deg)))


def sind(deg: float) -> float:
    return cosd(90.0 - deg)


@dataclass(frozen=True)
class DoubleLambdaParams:
    geometry: Geometry
    dE_gs: float            # GHz
    dE_es: float            # GHz
    d_cw: float             # GHz
    omega_cw: float         # GHz
    d_p: float              # GHz
    sigma_f: float          # GHz
    alpha_pol: float        # deg
    beta_pol: float         # deg
    k13: float
    k14: float
    k23: float
    k24: float
    gamma0: float           # 1/ns
    gamma_dephasing: float  # 1/ns
    alpha_phonon: float
    t_window: float = 12.4  # ns
    rep_rate: float = 0.0802  # GHz
    theta_field: float = 60.0  # deg from the growth axis
    dephase_ground: bool = False

    def __post_init__(self):
        object.__setattr__(self, "geometry", Geometry(self.geometry))
        for name in ("dE_gs", "dE_es", "omega_cw", "sigma_f"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("k13", "k14", "k23", "k24"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("gamma0", "gamma_dephasing", "alpha_phonon"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 < self.t_window <= 1.0 / self.rep_rate + 1e-12:
            raise ValueError("t_window must fit inside one repetition period")
        if not 0.0 <= self.theta_field <= 90.0:
            raise ValueError("theta_field must lie in [0, 90] degrees")

    def k(self, i: int, j: int) -> float:
        return getattr(self, f"k{i}{j}")

    def gamma(self, excited: int, ground: int) -> float:
        """Radiative rate excited -> ground in 1/ns."""
        return self.k(ground, excited) ** 2 * self.gamma0

    def replace(self, **changes) -> "DoubleLambdaParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["geometry"] = self.geometry.value
        return d


@dataclass(frozen=True)
class PulseSpec:
    t0: float        # ns
    omega_p: float   # GHz

    def __post_init__(self):
        if self.omega_p < 0:
            raise ValueError("omega_p must be >= 0")


def resonant_cw_offset(dE_gs: float, dE_es: float) -> float:
    """CW frame offset putting |1> and |4> at the same rotating-frame energy."""
    return -(dE_es + dE_gs / 2.0)


def preset(geometry) -> DoubleLambdaParams:
    geometry = Geometry(geometry)
    common = dict(omega_cw=1.0, d_p=-500.0, sigma_f=98.0, gamma0=1.0,
                  gamma_dephasing=1.0, alpha_phonon=28e-6, t_window=12.4,
                  rep_rate=0.0802)
    if geometry is Geometry.OBLIQUE:
        dE_gs, dE_es = 32.0, 63.4
        return DoubleLambdaParams(
            geometry=geometry, dE_gs=dE_gs, dE_es=dE_es,
            d_cw=resonant_cw_offset(dE_gs, dE_es), alpha_pol=90.0, beta_pol=10.0,
            k13=0.25, k14=0.75, k23=0.75, k24=0.25, theta_field=60.0, **common)
    dE_gs, dE_es = 31.0, 9.7
    return DoubleLambdaParams(
        geometry=geometry, dE_gs=dE_gs, dE_es=dE_es,
        d_cw=resonant_cw_offset(dE_gs, dE_es), alpha_pol=45.0, beta_pol=90.0,
        k13=0.5, k14=0.5, k23=0.5, k24=0.5, theta_field=90.0, **common)


def sigma_t(params: DoubleLambdaParams) -> float:
    """Temporal width (ns) of the Gaussian field envelope, 1 / (2 pi sigma_f)."""
    return 1.0 / (TWO_PI * params.sigma_f)


def build_h0(params: DoubleLambdaParams) -> np.ndarray:
    e = [-params.dE_gs / 2, params.dE_gs / 2, params.d_cw, params.d_cw + params.dE_es]
    return np.diag(TWO_PI * np.array(e)).astype(np.complex128)


def build_hcw(params: DoubleLambdaParams) -> np.ndarray:
    h = np.zeros((DIM, DIM), dtype=np.complex128)
    h[0, 3] = h[3, 0] = TWO_PI * params.omega_cw * params.k14 / 2.0
    return h


def pulse_coefficients(params: DoubleLambdaParams):
    """Unit-amplitude polarization weights ``(w13, w14, w23, w24)``."""
    c = cosd(params.alpha_pol)
    s = sind(params.alpha_pol) * complex(cosd(params.beta_pol), sind(params.beta_pol))
    if params.geometry is Geometry.OBLIQUE:
        return (s, c, s, c)
    return (s, c, c, s)


def _check_pulses(params, pulses):
    st = sigma_t(params)
    margin = PULSE_CUTOFF * st
    for p in pulses:
        if p.t0 - margin < 0 or p.t0 + margin > params.t_window:
            raise ValueError(f"pulse at t0={p.t0} ns lies outside the window "
                             f"[{margin:.4g}, {params.t_window - margin:.4g}] ns")
    centers = sorted(p.t0 for p in pulses)
    if any(b - a < 2 * margin for a, b in zip(centers[:-1], centers[1:])):
        warnings.warn("overlapping pulses (separation below 12 sigma_t)",
                      PulseOverlapWarning, stacklevel=3)


def pulses_overlap(params: DoubleLambdaParams, pulses) -> bool:
    centers = sorted(p.t0 for p in pulses)
    sep = 2 * PULSE_CUTOFF * sigma_t(params)
    return any(b - a < sep for a, b in zip(centers[:-1], centers[1:]))


def build_pulse_terms(params: DoubleLambdaParams, pulses):
    """One ``(|i><j|, coefficient)`` term per transition and pulse."""
    _check_pulses(params, pulses)
    st = sigma_t(params)
    weights = dict(zip(TRANSITIONS, pulse_coefficients(params)))
    terms = []
    for p in pulses:
        for (i, j) in TRANSITIONS:
            amp = 0.5 * params.k(i, j) * weights[(i, j)] * TWO_PI * p.omega_p
            coef = TimeCoefficient.gaussian(amp, p.t0, st, carrier=TWO_PI * params.d_p,
                                            cutoff=PULSE_CUTOFF)
            terms.append((projector(DIM, i - 1, j - 1), coef))
    return terms


def build_collapse(params: DoubleLambdaParams, pulses=()):
    """Radiative decay, static dephasing and pulse-driven phonon dephasing."""
    chans = []
    if params.gamma0 > 0:
        for i in GROUND:
            for j in EXCITED:
                rate = params.gamma(j, i)
                if rate > 0:
                    chans.append((projector(DIM, i - 1, j - 1),
                                  TimeCoefficient.constant(math.sqrt(rate))))
    dephased = EXCITED + (GROUND if params.dephase_ground else ())
    if params.gamma_dephasing > 0:
        for j in dephased:
            chans.append((projector(DIM, j - 1),
                          TimeCoefficient.constant(math.sqrt(params.gamma_dephasing))))
    live = [p for p in pulses if p.omega_p > 0]
    if params.alpha_phonon > 0 and live:
        st = sigma_t(params)
        amp = math.sqrt(params.alpha_phonon) * TWO_PI
        envelope = CoefficientSum(tuple(
            TimeCoefficient.gaussian(amp * p.omega_p, p.t0, st, cutoff=PULSE_CUTOFF)
            for p in live))
        for j in EXCITED:
            chans.append((projector(DIM, j - 1), envelope))
    return chans


def assemble(params: DoubleLambdaParams, pulses=(), cw_scale: float = 1.0) -> LindbladSystem:
    if cw_scale < 0:
        raise ValueError("cw_scale must be >= 0")
    pulses = tuple(pulses)
    return LindbladSystem(
        h_static=build_h0(params) + cw_scale * build_hcw(params),
        h_terms=tuple(build_pulse_terms(params, pulses)),
        collapse=tuple(build_collapse(params, pulses)))


def initial_state() -> np.ndarray:
    return projector(DIM, 1)


def readout_rate(params: DoubleLambdaParams) -> float:
    return params.gamma(4, 2)


def readout(params: DoubleLambdaParams, pulses=(), cw_scale: float = 1.0,
            rel_tol: float = DEFAULT_RTOL, abs_tol: float = DEFAULT_ATOL) -> float:
    """Time-integrated photon number on the 4 -> 2 channel over one window."""
    system = assemble(params, pulses, cw_scale)
    return integrate_observable(system, initial_state(), (0.0, params.t_window),
                                readout_rate(params), projector(DIM, 3),
                                rel_tol, abs_tol)
