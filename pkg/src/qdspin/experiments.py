"""Rabi, Ramsey and two-dimensional control-map sweeps over the dot model.

Pulse amplitudes are Omega_p / 2 pi in GHz and stand in linearly for the
square root of the pulse power. Delays are in picoseconds at the interface
and nanoseconds internally. Counts are time-integrated 4 -> 2 photon numbers
over one repetition window.
"""

from __future__ import annotations

import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, least_squares, minimize_scalar

from .lindblad import IntegrationError, evolve
from .model import (DoubleLambdaParams, PulseOverlapWarning, PulseSpec, assemble,
                    initial_state, preset, pulses_overlap, readout, sigma_t)
from .zeeman import equator_pulse_angle, pole_transfer

log = logging.getLogger(__name__)

PULSE_T0 = 1.0            # ns
OMEGA_MAX = 2550.0        # GHz
DELAY_STEP_PS = 1.33
RAMSEY_SPAN_PS = 1000.0
SU2_DELAYS_PS = (20.0, 140.0)
RAMSEY_CW_SCALE = 1.0 / math.sqrt(3.0)
SU2_CW_SCALE = 0.5
CALIBRATION_TOL = 1e-3
CALIBRATION_POINTS = 256


class CalibrationError(RuntimeError):
    def __init__(self, message, best_transfer=None, best_omega=None):
        super().__init__(message)
        self.best_transfer = best_transfer
        self.best_omega = best_omega


class SweepError(RuntimeError):
    def __init__(self, message, failures=()):
        super().__init__(message)
        self.failures = list(failures)


class NoFringeError(ValueError):
    pass


def _params(p) -> DoubleLambdaParams:
    return p if isinstance(p, DoubleLambdaParams) else preset(p)


def amplitude_grid(n: int, top: float = OMEGA_MAX) -> np.ndarray:
    """``n`` evenly spaced amplitudes on (0, top]."""
    if n < 1 or top <= 0:
        raise ValueError("need n >= 1 and top > 0")
    return top * np.arange(1, n + 1) / n


def delay_grid(start: float, span: float, step: float = DELAY_STEP_PS) -> np.ndarray:
    """Delays ``start + k * step`` (ps) for ``k < span / step``."""
    if step <= 0 or span < 0 or start < 0:
        raise ValueError("need step > 0, span >= 0 and start >= 0")
    n = max(1, int(math.floor(span / step + 1e-9)))
    return start + step * np.arange(n)


def _check_grid(name, grid, allow_zero=False):
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D grid")
    if np.any(np.diff(g) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    if (g.min() < 0) if allow_zero else (g.min() <= 0):
        raise ValueError(f"{name} must be {'non-negative' if allow_zero else 'positive'}")
    return g


@dataclass(frozen=True)
class RabiScan:
    params: DoubleLambdaParams
    omegas: np.ndarray = field(default_factory=lambda: amplitude_grid(128))
    cw_scale: float = 1.0
    t0: float = PULSE_T0

    def __post_init__(self):
        object.__setattr__(self, "params", _params(self.params))
        object.__setattr__(self, "omegas", _check_grid("amplitude grid", self.omegas))


@dataclass(frozen=True)
class RamseyScan:
    params: DoubleLambdaParams
    omega_p: float | None = None  # None: calibrate to the equator angle
    delays_ps: np.ndarray = field(
        default_factory=lambda: delay_grid(0.0, RAMSEY_SPAN_PS))
    cw_scale: float = RAMSEY_CW_SCALE
    t0: float = PULSE_T0

    def __post_init__(self):
        object.__setattr__(self, "params", _params(self.params))
        object.__setattr__(self, "delays_ps",
                           _check_grid("delay grid", self.delays_ps, allow_zero=True))
        if self.omega_p is not None and self.omega_p < 0:
            raise ValueError("omega_p must be >= 0")


@dataclass(frozen=True)
class SU2Scan:
    params: DoubleLambdaParams
    omegas: np.ndarray = field(default_factory=lambda: amplitude_grid(64))
    delays_ps: np.ndarray = field(
        default_factory=lambda: delay_grid(SU2_DELAYS_PS[0], SU2_DELAYS_PS[1] - SU2_DELAYS_PS[0]))
    cw_scale: float = SU2_CW_SCALE
    t0: float = PULSE_T0

    def __post_init__(self):
        object.__setattr__(self, "params", _params(self.params))
        object.__setattr__(self, "omegas", _check_grid("amplitude grid", self.omegas))
        object.__setattr__(self, "delays_ps",
                           _check_grid("delay grid", self.delays_ps, allow_zero=True))


@dataclass
class SweepResult:
    columns: tuple
    rows: np.ndarray
    params: dict
    metadata: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    @property
    def counts(self) -> np.ndarray:
        return self.column("counts")

    def grid(self) -> np.ndarray:
        """Counts of a two-axis sweep reshaped to (first axis, second axis)."""
        a = np.unique(self.rows[:, 0])
        return self.counts.reshape(a.size, -1)


def default_workers() -> int:
    return os.cpu_count() or 1


def _sweep(jobs, workers):
    """Evaluate zero-argument callables, keeping submission order."""
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1 or len(jobs) == 1:
        return [_guard(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_guard, jobs))


def _guard(job):
    try:
        return job(), None
    except (IntegrationError, ValueError, ArithmeticError) as exc:
        return math.nan, exc


def _counts(params, pulses, cw_scale):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PulseOverlapWarning)
        return readout(params, pulses, cw_scale)


def run_rabi(scan: RabiScan, workers: int | None = None) -> SweepResult:
    p = scan.params
    jobs = [lambda om=om: _counts(p, [PulseSpec(scan.t0, om)], scan.cw_scale)
            for om in scan.omegas]
    out = _sweep(jobs, workers)
    for om, (_, exc) in zip(scan.omegas, out):
        if exc is not None:
            raise SweepError(f"solver failure at omega_p={om:g} GHz: {exc}",
                             [((float(om),), str(exc))]) from exc
    rows = np.column_stack([scan.omegas, [n for n, _ in out]])
    return SweepResult(("omega_p_GHz", "counts"), rows, p.as_dict(),
                       {"experiment": "rabi", "cw_scale": scan.cw_scale, "t0_ns": scan.t0})


# Calibration

def pulse_transfer(params, omega_p: float, t0: float = PULSE_T0) -> float:
    """|1>-population after one dissipation-free pulse on |2>, CW off."""
    params = _params(params)
    if omega_p == 0:
        return 0.0
    system = assemble(params, [PulseSpec(t0, omega_p)], cw_scale=0.0).without_dissipation()
    half = 6.0 * sigma_t(params)
    traj = evolve(system, initial_state(), (t0 - half, t0 + half))
    return float(traj.final[0, 0].real)


@dataclass(frozen=True)
class FirstLobe:
    omega_peak: float
    transfer_peak: float
    omegas: np.ndarray
    transfers: np.ndarray


def first_lobe(params, omega_max: float = OMEGA_MAX, points: int = CALIBRATION_POINTS,
               t0: float = PULSE_T0) -> FirstLobe:
    """Locate the first maximum of the single-pulse transfer curve."""
    params = _params(params)
    omegas = amplitude_grid(points, omega_max)
    transfers = np.array([pulse_transfer(params, om, t0) for om in omegas])
    i = 0
    while i + 1 < len(transfers) and transfers[i + 1] >= transfers[i]:
        i += 1
    lo = omegas[i - 1] if i > 0 else 0.0
    hi = omegas[min(i + 1, len(omegas) - 1)]
    if hi > lo and i + 1 < len(omegas):
        res = minimize_scalar(lambda om: -pulse_transfer(params, om, t0),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-6 * omega_max})
        om_peak, tr_peak = float(res.x), float(-res.fun)
        if tr_peak < transfers[i]:
            om_peak, tr_peak = float(omegas[i]), float(transfers[i])
    else:
        om_peak, tr_peak = float(omegas[i]), float(transfers[i])
    return FirstLobe(om_peak, tr_peak, omegas, transfers)


def calibrate_pulse(params, target_angle: float, omega_max: float = OMEGA_MAX,
                    points: int = CALIBRATION_POINTS, t0: float = PULSE_T0) -> float:
    """Smallest amplitude whose transfer matches a geometric rotation angle.

    The target transfer is that of a rotation by ``target_angle`` degrees
    about the axis tilted by the field angle. The root is bracketed on the
    rising side of the first lobe and refined by Brent's method.
    """
    params = _params(params)
    if not 0.0 < target_angle <= 180.0:
        raise ValueError("target angle must lie in (0, 180] degrees")
    target = pole_transfer(params.theta_field, target_angle)
    lobe = first_lobe(params, omega_max, points, t0)
    if lobe.transfer_peak < target - CALIBRATION_TOL:
        raise CalibrationError(
            f"calibration failed: target transfer {target:.4f} unreachable on the "
            f"first lobe (peak {lobe.transfer_peak:.4f} at {lobe.omega_peak:.1f} GHz)",
            lobe.transfer_peak, lobe.omega_peak)
    if lobe.transfer_peak <= target:
        return lobe.omega_peak
    rising = lobe.omegas <= lobe.omega_peak
    grid = np.concatenate([[0.0], lobe.omegas[rising], [lobe.omega_peak]])
    vals = np.concatenate([[0.0], lobe.transfers[rising], [lobe.transfer_peak]])
    k = int(np.argmax(vals >= target))
    return float(brentq(lambda om: pulse_transfer(params, om, t0) - target,
                        grid[k - 1], grid[k], xtol=1e-9 * omega_max))


def ramsey_amplitude(params, t0: float = PULSE_T0):
    """Pulse amplitude for the Ramsey sequence and a note on how it was chosen.

    The amplitude is calibrated to the pulse angle that takes the pole to the
    equator. When that transfer is out of reach, the first-lobe maximum (the
    closest approach) is used instead.
    """
    params = _params(params)
    angle = equator_pulse_angle(params.theta_field)
    try:
        return calibrate_pulse(params, angle, t0=t0), {"calibration": "equator",
                                                       "target_angle_deg": angle}
    except CalibrationError as exc:
        log.warning("%s; using the first-lobe maximum instead", exc)
        return exc.best_omega, {"calibration": "first-lobe-maximum",
                                "target_angle_deg": angle,
                                "reached_transfer": exc.best_transfer}


def run_ramsey(scan: RamseyScan, workers: int | None = None) -> SweepResult:
    p = scan.params
    if scan.omega_p is None:
        omega, meta = ramsey_amplitude(p, scan.t0)
    else:
        omega, meta = float(scan.omega_p), {"calibration": "fixed"}
    delays_ns = scan.delays_ps * 1e-3
    jobs = [lambda d=d: _counts(p, [PulseSpec(scan.t0, omega),
                                    PulseSpec(scan.t0 + d, omega)], scan.cw_scale)
            for d in delays_ns]
    out = _sweep(jobs, workers)
    for d, (_, exc) in zip(scan.delays_ps, out):
        if exc is not None:
            raise SweepError(f"solver failure at tau={d:g} ps: {exc}",
                             [((float(d),), str(exc))]) from exc
    overlap = [float(d) for d, dn in zip(scan.delays_ps, delays_ns)
               if pulses_overlap(p, [PulseSpec(scan.t0, omega), PulseSpec(scan.t0 + dn, omega)])]
    rows = np.column_stack([scan.delays_ps, [n for n, _ in out]])
    meta.update(experiment="ramsey", omega_p_GHz=omega, cw_scale=scan.cw_scale,
                t0_ns=scan.t0, overlapping_delays_ps=overlap)
    return SweepResult(("tau_ps", "counts"), rows, p.as_dict(), meta)


def run_su2_map(scan: SU2Scan, workers: int | None = None) -> SweepResult:
    """Outer-product sweep over amplitude and delay, rows in row-major order.

    Failed points are recorded as NaN and listed in ``metadata["failures"]``;
    the sweep then raises :class:`SweepError` carrying the partial result.
    """
    p = scan.params
    coords = [(om, d) for om in scan.omegas for d in scan.delays_ps]
    jobs = [lambda om=om, d=d: _counts(
        p, [PulseSpec(scan.t0, om), PulseSpec(scan.t0 + d * 1e-3, om)], scan.cw_scale)
        for om, d in coords]
    out = _sweep(jobs, workers)
    failures = [((float(om), float(d)), str(exc))
                for (om, d), (_, exc) in zip(coords, out) if exc is not None]
    rows = np.column_stack([np.array(coords).reshape(-1, 2), [n for n, _ in out]])
    result = SweepResult(("omega_p_GHz", "tau_ps", "counts"), rows, p.as_dict(),
                         {"experiment": "su2map", "cw_scale": scan.cw_scale,
                          "t0_ns": scan.t0, "failures": failures})
    if failures:
        err = SweepError(f"{len(failures)} of {len(coords)} grid points failed; first at "
                         f"omega_p={failures[0][0][0]:g} GHz, tau={failures[0][0][1]:g} ps: "
                         f"{failures[0][1]}", failures)
        err.result = result
        raise err
    return result


# Fringe analysis

@dataclass(frozen=True)
class FringeFit:
    frequency: float   # GHz
    phase: float       # rad, in (-pi, pi]
    amplitude: float
    decay: float       # ns; inf for undamped fringes
    offset: float
    residual: float    # rms of the fit residual

    @property
    def visibility(self) -> float:
        return abs(self.amplitude) / abs(self.offset) if self.offset else math.inf


def _fft_seed(t, y, f_min, pad=16):
    """Strongest spectral line at or above ``f_min``, with the band median."""
    n = len(t)
    dt = float(np.median(np.diff(t)))
    x = y * np.hanning(n)
    size = 1 << int(math.ceil(math.log2(n * pad)))
    spec = np.abs(np.fft.rfft(x, size))
    freqs = np.fft.rfftfreq(size, dt)
    band = np.flatnonzero(freqs >= f_min)
    if band.size < 2:
        return None, 0.0, 0.0
    k = band[int(np.argmax(spec[band]))]
    return freqs[k], spec[k], float(np.median(spec[band]))


def fringe_analysis(result, tau_min_ps: float | None = None, min_periods: float = 4.0,
                    baseline_degree: int = 3) -> FringeFit:
    """Fit ``A exp(-tau/T) cos(2 pi f tau + phi) + C + slow baseline`` to a delay scan.

    ``result`` is a :class:`SweepResult` with a ``tau_ps`` column or a
    ``(tau_ps, counts)`` pair. Delays with overlapping pulses are dropped
    unless ``tau_min_ps`` says otherwise. The baseline is a polynomial of
    ``baseline_degree`` in the delay (0 gives a constant), which absorbs slow
    incoherent drifts under the fringes. The fit is seeded from the strongest
    FFT line of the detrended trace among frequencies that fit at least
    ``min_periods`` cycles into the scan, then refined by least squares with
    the frequency held inside that band.
    ``offset`` is the baseline at zero delay.
    """
    if isinstance(result, SweepResult):
        tau_ps, y = result.column("tau_ps"), result.counts
        if tau_min_ps is None:
            skip = result.metadata.get("overlapping_delays_ps", [])
            mask = tau_ps > max(skip) if skip else np.ones(tau_ps.size, bool)
        else:
            mask = tau_ps >= tau_min_ps
    else:
        tau_ps, y = (np.asarray(a, dtype=float) for a in result)
        mask = tau_ps >= (tau_min_ps or 0.0)
    t, y = tau_ps[mask] * 1e-3, y[mask]
    if t.size < 8 + baseline_degree:
        raise NoFringeError("no fringe: too few delay points")
    span = t[-1] - t[0]
    s = (t - t[0]) / span
    powers = np.vander(s, baseline_degree + 1, increasing=True)

    trend = powers @ np.linalg.lstsq(powers, y, rcond=None)[0]
    if np.std(y - trend) <= 1e-12 * max(float(np.max(np.abs(y))), 1e-300):
        raise NoFringeError("no fringe: the trace is a pure baseline")
    # slower oscillations would cover fewer than min_periods and are not fringes
    f0, peak, median = _fft_seed(t, y - trend, min_periods / span)
    if f0 is None:
        raise NoFringeError(f"no fringe: the scan cannot hold {min_periods:g} periods")
    if not peak > 3.0 * median:
        raise NoFringeError(f"no fringe: spectral peak {peak:.3g} is not 3x above "
                            f"the median {median:.3g}")

    z = 2.0 * np.mean((y - trend) * np.exp(-2j * math.pi * f0 * t))
    scale = max(float(np.std(y - trend)), 1e-300)
    coef0 = np.linalg.lstsq(powers, y, rcond=None)[0]

    def model(x):
        a, rate, f, phi = x[:4]
        return (a * np.exp(-rate * (t - t[0])) * np.cos(2 * math.pi * f * t + phi)
                + powers @ x[4:])

    x0 = np.concatenate([[abs(z), 0.0, f0, np.angle(z)], coef0])
    f_max = 0.5 / float(np.median(np.diff(t)))
    lower = np.full(x0.size, -np.inf)
    upper = np.full(x0.size, np.inf)
    lower[2], upper[2] = min_periods / span, f_max
    fit = least_squares(lambda x: (model(x) - y) / scale, x0, bounds=(lower, upper),
                        method="trf", xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=20000)
    a, rate, f, phi = fit.x[:4]
    # Fold the decay origin back to tau = 0.
    a *= math.exp(rate * t[0])
    if a < 0:
        a, phi = -a, phi + math.pi
    if f <= lower[2] * (1 + 1e-6):
        raise NoFringeError(f"no fringe: the fit runs into the {min_periods:g}-period limit")
    phi = math.remainder(phi, 2 * math.pi)
    if phi == -math.pi:
        phi = math.pi
    c_at_zero = float(np.polyval(fit.x[4:][::-1], -t[0] / span))
    rms = float(np.sqrt(np.mean((model(fit.x) - y) ** 2)))
    decay = math.inf if rate <= 0 else 1.0 / rate
    return FringeFit(float(f), float(phi), float(a), decay, c_at_zero, rms)


def _detrend(y, degree):
    if degree == 0:
        return y - y.mean()
    s = np.linspace(0.0, 1.0, y.size)
    powers = np.vander(s, degree + 1, increasing=True)
    return y - powers @ np.linalg.lstsq(powers, y, rcond=None)[0]


def delay_autocorrelation(counts, step_ps: float, detrend_degree: int = 0):
    """Unbiased autocorrelation of a delay trace.

    The trace has its mean removed, or with ``detrend_degree > 0`` a
    least-squares polynomial of that degree. Returns ``(lags_ps, acf)``
    normalized to 1 at zero lag.
    """
    y = _detrend(np.asarray(counts, dtype=float), detrend_degree)
    n = y.size
    full = np.correlate(y, y, mode="full")[n - 1:]
    acf = full / (n - np.arange(n))
    if acf[0] == 0:
        return step_ps * np.arange(n), np.zeros(n)
    return step_ps * np.arange(n), acf / acf[0]


def _acf_peak(acf, step_ps: float) -> float:
    neg = np.flatnonzero(acf < 0)
    if neg.size == 0:
        raise NoFringeError("no fringe: autocorrelation never changes sign")
    for k in range(int(neg[0]) + 1, len(acf) - 1):
        if acf[k] >= acf[k - 1] and acf[k] > acf[k + 1] and acf[k] > 0:
            denom = acf[k - 1] - 2 * acf[k] + acf[k + 1]
            shift = 0.5 * (acf[k - 1] - acf[k + 1]) / denom if denom else 0.0
            return float((k + shift) * step_ps)
    raise NoFringeError("no fringe: no autocorrelation peak within the lag range")


def autocorrelation_period(counts, step_ps: float, max_lag_fraction: float = 0.5,
                           detrend_degree: int = 0) -> float:
    """Lag (ps) of the first autocorrelation maximum after the first zero crossing,
    refined by parabolic interpolation."""
    _, acf = delay_autocorrelation(counts, step_ps, detrend_degree)
    return _acf_peak(acf[:max(3, int(len(acf) * max_lag_fraction))], step_ps)


def map_periods(result: SweepResult, max_lag_fraction: float = 0.5,
                detrend_degree: int = 0) -> np.ndarray:
    """Autocorrelation period (ps) of every fixed-amplitude row of a control map.

    Rows without a period (flat, or no autocorrelation peak) give NaN.
    """
    tau = np.unique(result.column("tau_ps"))
    step = float(np.median(np.diff(tau)))
    periods = []
    for row in result.grid():
        try:
            periods.append(autocorrelation_period(row, step, max_lag_fraction,
                                                  detrend_degree))
        except NoFringeError:
            periods.append(math.nan)
    return np.array(periods)
