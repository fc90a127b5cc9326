"""Zeeman structure of the charged dot and Bloch-sphere rotation geometry.

Energies are in micro-eV, fields in tesla, angles in degrees. A transition
between ground electron spin ``s_e`` and trion hole spin ``s_h`` (both +-1)
sits at

    E = E0 + gamma * B^2 + (s_e * g_e + s_h * g_h) * mu_B * B / 2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import cosd, sind
from .qmath import DegenerateFitError, condition_number, lstsq

MU_B_GHZ_PER_T = 13.9962449  # mu_B / h
MU_B_UEV_PER_T = 57.8838     # mu_B in micro-eV per tesla
BRANCHES = ((1, 1), (1, -1), (-1, 1), (-1, -1))
CSV_COLUMNS = ("B_tesla", "s_e", "s_h", "energy_ueV")


@dataclass(frozen=True)
class GTensor:
    gF: float  # along the growth axis
    gV: float  # in plane

    def __post_init__(self):
        if self.gF < 0 or self.gV < 0:
            raise ValueError("g-tensor components are magnitudes (>= 0)")


# Measured tensors of the studied dot (electron, heavy hole).
ELECTRON = GTensor(0.497, 0.446)
HOLE = GTensor(1.823, 0.129)


@dataclass(frozen=True)
class FieldConfig:
    B: float
    theta: float

    def __post_init__(self):
        if self.B < 0:
            raise ValueError("B must be >= 0")
        if not 0.0 <= self.theta <= 90.0:
            raise ValueError("theta must lie in [0, 90] degrees")


@dataclass(frozen=True)
class ZeemanModel:
    E0: float
    gamma_dia: float
    electron: GTensor
    hole: GTensor

    def __post_init__(self):
        if self.gamma_dia < 0:
            raise ValueError("gamma_dia must be >= 0")


@dataclass(frozen=True)
class BranchPoint:
    B: float
    branch: tuple
    energy: float

    def __post_init__(self):
        if tuple(self.branch) not in BRANCHES:
            raise ValueError(f"invalid branch label {self.branch}")
        object.__setattr__(self, "branch", tuple(int(s) for s in self.branch))


@dataclass(frozen=True)
class ZeemanFit:
    E0: float
    gamma_dia: float
    g_e: float
    g_h: float
    rms: float
    condition: float

    def model(self) -> ZeemanModel:
        """Isotropic model reproducing the fitted effective g-factors."""
        ge, gh = abs(self.g_e), abs(self.g_h)
        return ZeemanModel(self.E0, max(self.gamma_dia, 0.0),
                           GTensor(ge, ge), GTensor(gh, gh))


def effective_g(g: GTensor, theta: float) -> float:
    return math.hypot(g.gF * cosd(theta), g.gV * sind(theta))


def larmor_frequency(g_eff: float, B: float) -> float:
    """Precession frequency in GHz."""
    if B < 0:
        raise ValueError("B must be >= 0")
    return g_eff * MU_B_GHZ_PER_T * B


def transition_energies(model: ZeemanModel, field: FieldConfig) -> dict:
    """Map ``(s_e, s_h) -> energy`` in micro-eV."""
    ge = effective_g(model.electron, field.theta)
    gh = effective_g(model.hole, field.theta)
    base = model.E0 + model.gamma_dia * field.B ** 2
    half = MU_B_UEV_PER_T * field.B / 2.0
    return {(se, sh): base + (se * ge + sh * gh) * half for se, sh in BRANCHES}


def _design(points):
    b = np.array([p.B for p in points], dtype=float)
    se = np.array([p.branch[0] for p in points], dtype=float)
    sh = np.array([p.branch[1] for p in points], dtype=float)
    half = MU_B_UEV_PER_T * b / 2.0
    return np.column_stack([np.ones_like(b), b ** 2, se * half, sh * half])


def fit_zeeman(points) -> ZeemanFit:
    """Joint linear fit of all four branches for (E0, gamma, g_e, g_h)."""
    points = list(points)
    if len({p.B for p in points}) < 4:
        raise DegenerateFitError("degenerate fit: need at least 4 distinct fields")
    if {p.branch for p in points} != set(BRANCHES):
        raise DegenerateFitError("degenerate fit: all four branches are required")
    x = _design(points)
    y = np.array([p.energy for p in points], dtype=float)
    coef, resid = lstsq(x, y)
    rms = resid / math.sqrt(len(points))
    return ZeemanFit(*map(float, coef), rms=rms, condition=condition_number(x))


def solve_g_tensor(g_eff_1: float, theta_1: float, g_eff_2: float, theta_2: float) -> GTensor:
    """Recover (gF, gV) from effective g-factors measured at two tilt angles."""
    a = np.array([[cosd(theta_1) ** 2, sind(theta_1) ** 2],
                  [cosd(theta_2) ** 2, sind(theta_2) ** 2]])
    if abs(np.linalg.det(a)) < 1e-12:
        raise DegenerateFitError("degenerate fit: the two angles coincide")
    gf2, gv2 = np.linalg.solve(a, [g_eff_1 ** 2, g_eff_2 ** 2])
    if gf2 < 0 or gv2 < 0:
        raise DegenerateFitError("effective g-factors are inconsistent with a g-tensor")
    return GTensor(math.sqrt(gf2), math.sqrt(gv2))


def solve_g_tensors(fit_1: ZeemanFit, theta_1: float, fit_2: ZeemanFit, theta_2: float):
    """Electron and hole tensors from two geometry fits."""
    e = solve_g_tensor(abs(fit_1.g_e), theta_1, abs(fit_2.g_e), theta_2)
    h = solve_g_tensor(abs(fit_1.g_h), theta_1, abs(fit_2.g_h), theta_2)
    return e, h


def synthetic_branches(model: ZeemanModel, theta: float, fields, noise: float = 0.0,
                       rng: np.random.Generator | None = None):
    points = []
    for b in fields:
        energies = transition_energies(model, FieldConfig(float(b), theta))
        for branch in BRANCHES:
            e = energies[branch]
            if noise:
                e += rng.normal(0.0, noise)
            points.append(BranchPoint(float(b), branch, e))
    return points


def write_branches_csv(path, points) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for p in points:
            w.writerow([repr(float(p.B)), p.branch[0], p.branch[1], repr(float(p.energy))])


def read_branches_csv(path):
    with open(Path(path), newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ValueError(f"expected header {','.join(CSV_COLUMNS)}, "
                             f"got {reader.fieldnames}")
        points = []
        for lineno, row in enumerate(reader, start=2):
            try:
                points.append(BranchPoint(float(row["B_tesla"]),
                                          (int(row["s_e"]), int(row["s_h"])),
                                          float(row["energy_ueV"])))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row ({exc})") from None
    return points


# Bloch-sphere geometry

def rotation_axis(theta: float) -> np.ndarray:
    if not 0.0 <= theta <= 90.0:
        raise ValueError("theta must lie in [0, 90] degrees")
    return np.array([sind(theta), 0.0, cosd(theta)])


def rotate(v, axis, angle: float) -> np.ndarray:
    """Rodrigues rotation of ``v`` by ``angle`` degrees about unit ``axis``."""
    v = np.asarray(v, dtype=float)
    k = np.asarray(axis, dtype=float)
    c, s = cosd(angle), sind(angle)
    return v * c + np.cross(k, v) * s + k * np.dot(k, v) * (1.0 - c)


def equator_pulse_angle(theta: float) -> float:
    """Pulse angle about the tilted axis that takes the pole to the equator."""
    if theta < 45.0:
        raise ValueError(f"equator unreachable for axis tilt {theta} deg < 45 deg")
    if theta > 90.0:
        raise ValueError("theta must lie in [45, 90] degrees")
    cot = cosd(theta) / sind(theta)
    return math.degrees(math.acos(-cot * cot))


def pole_transfer(theta: float, pulse_angle: float) -> float:
    """Population moved off the starting pole by one rotation about n(theta)."""
    z = cosd(theta) ** 2 + sind(theta) ** 2 * cosd(pulse_angle)
    return 0.5 * (1.0 - z)


def compose_bloch(theta_axis: float, pulse_angle: float, precession_phase: float,
                  pulse_angle2: float) -> np.ndarray:
    """R(n, a2) R(z, phi) R(n, a1) applied to the north pole."""
    n = rotation_axis(theta_axis)
    v = rotate([0.0, 0.0, 1.0], n, pulse_angle)
    v = rotate(v, [0.0, 0.0, 1.0], precession_phase)
    return rotate(v, n, pulse_angle2)


def geometric_ramsey_offset(theta_axis: float, pulse_angle: float | None = None,
                            step: float = 0.01) -> float:
    """Precession phase (degrees, in [-180, 180)) minimizing the final z.

    Brute-force scan with ``step`` degree resolution.
    """
    if pulse_angle is None:
        pulse_angle = equator_pulse_angle(theta_axis)
    n = rotation_axis(theta_axis)
    v1 = rotate([0.0, 0.0, 1.0], n, pulse_angle)
    phis = np.arange(-180.0, 180.0, step)
    c, s = np.cos(np.radians(phis)), np.sin(np.radians(phis))
    # v1 rotated about z for every phi, then the second pulse; only z matters.
    x = v1[0] * c - v1[1] * s
    y = v1[0] * s + v1[1] * c
    z = np.full_like(phis, v1[2])
    ca, sa = cosd(pulse_angle), sind(pulse_angle)
    dot = n[0] * x + n[2] * z
    cross_z = n[0] * y  # z-component of n x v with n_y = 0
    zf = z * ca + cross_z * sa + n[2] * dot * (1.0 - ca)
    return float(phis[int(np.argmin(zf))])
