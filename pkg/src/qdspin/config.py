"""Flat ``key = value`` configuration files.

One assignment per line, ``#`` starts a comment, keys are namespaced and
carry their unit in the name (``model.dE_gs_GHz``, ``scan.delay_step_ps``).
A file only needs the keys it changes: everything else comes from the preset
named by ``model.geometry``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .experiments import (DELAY_STEP_PS, OMEGA_MAX, PULSE_T0, RAMSEY_CW_SCALE,
                          RAMSEY_SPAN_PS, SU2_CW_SCALE, SU2_DELAYS_PS)
from .model import DoubleLambdaParams, Geometry, preset
from .zeeman import ELECTRON, HOLE, GTensor, ZeemanModel


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScanSettings:
    omega_max: float = OMEGA_MAX
    rabi_points: int = 128
    su2_points: int = 64
    pulse_t0: float = PULSE_T0
    delay_step: float = DELAY_STEP_PS
    ramsey_span: float = RAMSEY_SPAN_PS
    ramsey_omega_p: float | None = None
    su2_delay_min: float = SU2_DELAYS_PS[0]
    su2_delay_max: float = SU2_DELAYS_PS[1]
    rabi_cw_scale: float = 1.0
    ramsey_cw_scale: float = RAMSEY_CW_SCALE
    su2_cw_scale: float = SU2_CW_SCALE

    def __post_init__(self):
        if self.rabi_points < 1 or self.su2_points < 1:
            raise ValueError("point counts must be >= 1")
        if self.omega_max <= 0 or self.delay_step <= 0 or self.ramsey_span < 0:
            raise ValueError("omega_max and delay_step must be > 0, ramsey_span >= 0")
        if not 0 <= self.su2_delay_min <= self.su2_delay_max:
            raise ValueError("need 0 <= su2_delay_min <= su2_delay_max")
        if self.ramsey_omega_p is not None and self.ramsey_omega_p < 0:
            raise ValueError("ramsey_omega_p must be >= 0")
        if min(self.rabi_cw_scale, self.ramsey_cw_scale, self.su2_cw_scale) < 0:
            raise ValueError("CW scale factors must be >= 0")


ZEEMAN_GAMMA = {Geometry.OBLIQUE: 6.021, Geometry.VOIGT: 4.395}  # ueV/T^2
ZEEMAN_E0 = 1.3466e6  # ueV


def zeeman_preset(geometry) -> ZeemanModel:
    return ZeemanModel(ZEEMAN_E0, ZEEMAN_GAMMA[Geometry(geometry)], ELECTRON, HOLE)


@dataclass(frozen=True)
class Config:
    model: DoubleLambdaParams
    zeeman: ZeemanModel
    scan: ScanSettings = field(default_factory=ScanSettings)

    @classmethod
    def preset(cls, geometry) -> "Config":
        return cls(preset(geometry), zeeman_preset(geometry))


@dataclass(frozen=True)
class Key:
    name: str
    kind: type
    comment: str


SCHEMA = (
    Key("model.geometry", Geometry, "oblique or voigt"),
    Key("model.dE_gs_GHz", float, "ground-state Zeeman splitting"),
    Key("model.dE_es_GHz", float, "trion Zeeman splitting"),
    Key("model.d_cw_GHz", float, "CW rotating-frame offset, -(dE_es + dE_gs/2) on resonance"),
    Key("model.omega_cw_GHz", float, "CW Rabi frequency"),
    Key("model.d_p_GHz", float, "pulse detuning (red)"),
    Key("model.sigma_f_GHz", float, "pulse spectral width"),
    Key("model.alpha_pol_deg", float, "pulse polarization angle"),
    Key("model.beta_pol_deg", float, "pulse polarization phase"),
    Key("model.k13", float, "relative dipole strength 1-3"),
    Key("model.k14", float, "relative dipole strength 1-4"),
    Key("model.k23", float, "relative dipole strength 2-3"),
    Key("model.k24", float, "relative dipole strength 2-4"),
    Key("model.gamma0_per_ns", float, "trion radiative rate"),
    Key("model.gamma_dephasing_per_ns", float, "static trion dephasing rate"),
    Key("model.alpha_phonon", float, "phonon-induced dephasing strength"),
    Key("model.t_window_ns", float, "integration window (one repetition period)"),
    Key("model.rep_rate_GHz", float, "laser repetition rate"),
    Key("model.theta_field_deg", float, "field angle from the growth axis"),
    Key("model.dephase_ground", bool, "also dephase the ground states"),
    Key("zeeman.E0_ueV", float, "zero-field transition energy"),
    Key("zeeman.gamma_dia_ueV_per_T2", float, "diamagnetic coefficient"),
    Key("zeeman.ge_F", float, "electron g-factor along the growth axis"),
    Key("zeeman.ge_V", float, "electron g-factor in plane"),
    Key("zeeman.gh_F", float, "hole g-factor along the growth axis"),
    Key("zeeman.gh_V", float, "hole g-factor in plane"),
    Key("scan.omega_max_GHz", float, "top of the amplitude grids"),
    Key("scan.rabi_points", int, "Rabi amplitude grid size"),
    Key("scan.su2_points", int, "control-map amplitude grid size"),
    Key("scan.pulse_t0_ns", float, "first pulse center"),
    Key("scan.delay_step_ps", float, "delay grid step"),
    Key("scan.ramsey_span_ps", float, "Ramsey delay span from zero"),
    Key("scan.ramsey_omega_p_GHz", float, "Ramsey pulse amplitude, 'auto' to calibrate"),
    Key("scan.su2_delay_min_ps", float, "control-map first delay"),
    Key("scan.su2_delay_max_ps", float, "control-map delay span end"),
    Key("scan.rabi_cw_scale", float, "CW amplitude factor, Rabi"),
    Key("scan.ramsey_cw_scale", float, "CW amplitude factor, Ramsey"),
    Key("scan.su2_cw_scale", float, "CW amplitude factor, control map"),
)
KEYS = {k.name: k for k in SCHEMA}

_MODEL_ATTR = {
    "geometry": "geometry", "dE_gs_GHz": "dE_gs", "dE_es_GHz": "dE_es",
    "d_cw_GHz": "d_cw", "omega_cw_GHz": "omega_cw", "d_p_GHz": "d_p",
    "sigma_f_GHz": "sigma_f", "alpha_pol_deg": "alpha_pol", "beta_pol_deg": "beta_pol",
    "k13": "k13", "k14": "k14", "k23": "k23", "k24": "k24",
    "gamma0_per_ns": "gamma0", "gamma_dephasing_per_ns": "gamma_dephasing",
    "alpha_phonon": "alpha_phonon", "t_window_ns": "t_window",
    "rep_rate_GHz": "rep_rate", "theta_field_deg": "theta_field",
    "dephase_ground": "dephase_ground",
}
_SCAN_ATTR = {
    "omega_max_GHz": "omega_max", "rabi_points": "rabi_points",
    "su2_points": "su2_points", "pulse_t0_ns": "pulse_t0",
    "delay_step_ps": "delay_step", "ramsey_span_ps": "ramsey_span",
    "ramsey_omega_p_GHz": "ramsey_omega_p", "su2_delay_min_ps": "su2_delay_min",
    "su2_delay_max_ps": "su2_delay_max", "rabi_cw_scale": "rabi_cw_scale",
    "ramsey_cw_scale": "ramsey_cw_scale", "su2_cw_scale": "su2_cw_scale",
}


def _format(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Geometry):
        return value.value
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _parse(key: Key, text: str):
    if key.kind is Geometry:
        try:
            return Geometry(text.lower())
        except ValueError:
            raise ConfigError(f"{key.name}: expected oblique or voigt, got {text!r}") from None
    if key.kind is bool:
        low = text.lower()
        if low not in ("true", "false"):
            raise ConfigError(f"{key.name}: expected true or false, got {text!r}")
        return low == "true"
    if key.name == "scan.ramsey_omega_p_GHz" and text.lower() == "auto":
        return None
    try:
        value = int(text) if key.kind is int else float(text)
    except ValueError:
        raise ConfigError(f"{key.name}: expected {key.kind.__name__}, got {text!r}") from None
    if key.kind is float and not math.isfinite(value):
        raise ConfigError(f"{key.name}: value must be finite")
    return value


def to_items(cfg: Config) -> dict:
    """Flat key -> value view of a configuration."""
    items = {f"model.{k}": getattr(cfg.model, a) for k, a in _MODEL_ATTR.items()}
    z = cfg.zeeman
    items.update({
        "zeeman.E0_ueV": z.E0, "zeeman.gamma_dia_ueV_per_T2": z.gamma_dia,
        "zeeman.ge_F": z.electron.gF, "zeeman.ge_V": z.electron.gV,
        "zeeman.gh_F": z.hole.gF, "zeeman.gh_V": z.hole.gV,
    })
    items.update({f"scan.{k}": getattr(cfg.scan, a) for k, a in _SCAN_ATTR.items()})
    return {k.name: items[k.name] for k in SCHEMA}


def from_items(items: dict) -> Config:
    unknown = sorted(set(items) - set(KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(unknown)}; valid keys are:\n"
                          + schema_text())
    geometry = items.get("model.geometry", Geometry.OBLIQUE)
    base = Config.preset(geometry)
    sub = lambda prefix: {k.split(".", 1)[1]: v for k, v in items.items()
                          if k.startswith(prefix)}
    try:
        model = base.model.replace(**{_MODEL_ATTR[k]: v for k, v in sub("model.").items()})
        zs = sub("zeeman.")
        z = base.zeeman
        zeeman = ZeemanModel(
            zs.get("E0_ueV", z.E0), zs.get("gamma_dia_ueV_per_T2", z.gamma_dia),
            GTensor(zs.get("ge_F", z.electron.gF), zs.get("ge_V", z.electron.gV)),
            GTensor(zs.get("gh_F", z.hole.gF), zs.get("gh_V", z.hole.gV)))
        scan = replace(base.scan, **{_SCAN_ATTR[k]: v for k, v in sub("scan.").items()})
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return Config(model, zeeman, scan)


def parse_config(text: str, source: str = "<config>") -> Config:
    items = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, value = (s.strip() for s in line.partition("="))
        if not sep or not name or not value:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if name not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {name!r} (keys carry their "
                              f"unit suffix); valid keys are:\n" + schema_text())
        if name in items:
            raise ConfigError(f"{source}:{lineno}: duplicate key {name!r}")
        try:
            items[name] = _parse(KEYS[name], value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return from_items(items)


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def format_config(cfg: Config) -> str:
    lines = [f"# {cfg.model.geometry.value} configuration", ""]
    section = None
    for key, value in to_items(cfg).items():
        head = key.split(".", 1)[0]
        if head != section:
            if section is not None:
                lines.append("")
            lines.append(f"# [{head}]")
            section = head
        lines.append(f"{key} = {_format(value)}  # {KEYS[key].comment}")
    return "\n".join(lines) + "\n"


def write_config(cfg: Config, path) -> None:
    Path(path).write_text(format_config(cfg), encoding="utf-8")


def schema_text() -> str:
    return "\n".join(f"  {k.name}  ({k.comment})" for k in SCHEMA)
