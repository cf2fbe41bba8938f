"""Plain ``key = value`` run configuration.

Lines starting with ``#`` or ``;`` are comments. Unknown keys are rejected by
name and every physical range is checked while parsing. Command-line flags
override file values.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace

from .dispersion import FiberSpec, SellmeierModel, FUSED_SILICA
from .errors import ConfigError, PcfPairError
from .hom import FilterSpec
from .pairstats import PhotonStatistics, SourceParams

_SECTION = "pcfpair"


def _float(key, lo=None, hi=None, lo_open=False, hi_open=False):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {text!r}") from None
        if not math.isfinite(v):
            raise ConfigError(f"{key}: must be finite, got {text!r}")
        if lo is not None and (v < lo or (lo_open and v == lo)):
            raise ConfigError(f"{key}: must be {'>' if lo_open else '>='} {lo}, got {v}")
        if hi is not None and (v > hi or (hi_open and v == hi)):
            raise ConfigError(f"{key}: must be {'<' if hi_open else '<='} {hi}, got {v}")
        return v
    return conv


def _int(key, lo=None):
    def conv(text):
        try:
            v = int(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
        if lo is not None and v < lo:
            raise ConfigError(f"{key}: must be >= {lo}, got {v}")
        return v
    return conv


def _triple(key):
    def conv(text):
        parts = [p for p in text.replace(" ", "").split(",") if p]
        if len(parts) != 3:
            raise ConfigError(f"{key}: expected 3 comma-separated numbers, got {text!r}")
        return tuple(_float(key, 0.0, lo_open=True)(p) for p in parts)
    return conv


def _stats(text):
    try:
        return PhotonStatistics(text.strip().lower())
    except ValueError:
        raise ConfigError(f"photon_statistics: expected thermal or poissonian, got {text!r}") from None


KEYS = {
    "core_diameter_um": _float("core_diameter_um"),
    "length_m": _float("length_m", 0.0, lo_open=True),
    "n2_m2_per_W": _float("n2_m2_per_W", 0.0, lo_open=True),
    "sellmeier_b": _triple("sellmeier_b"),
    "sellmeier_c": _triple("sellmeier_c"),
    "mu": _float("mu", 0.0),
    "raman_per_pulse": _float("raman_per_pulse", 0.0),
    "eta_s": _float("eta_s", 0.0, 1.0),
    "eta_i": _float("eta_i", 0.0, 1.0),
    "rep_rate_hz": _float("rep_rate_hz", 0.0, lo_open=True),
    "photon_statistics": _stats,
    "signal_center_nm": _float("signal_center_nm", 0.0, lo_open=True),
    "signal_fwhm_nm": _float("signal_fwhm_nm", 0.0, lo_open=True),
    "idler_center_nm": _float("idler_center_nm", 0.0, lo_open=True),
    "idler_fwhm_nm": _float("idler_fwhm_nm", 0.0, lo_open=True),
    "pump_center_nm": _float("pump_center_nm", 0.0, lo_open=True),
    "pump_fwhm_nm": _float("pump_fwhm_nm", 0.0, lo_open=True),
    "pump_power_W": _float("pump_power_W", 0.0),
    "scan_step_nm": _float("scan_step_nm", 0.0, lo_open=True),
    "n_pulses": _int("n_pulses", 1),
    "seed": _int("seed", 0),
    "output_path": str,
}


@dataclass(frozen=True)
class PumpConfig:
    center_nm: float | None = None  # None: energy conjugate of the filter centres
    fwhm_nm: float = 0.5
    power_W: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    fiber: FiberSpec = field(default_factory=lambda: FiberSpec(2.0))
    source: SourceParams = field(default_factory=lambda: SourceParams(0.1))
    signal_filter: FilterSpec = field(default_factory=lambda: FilterSpec(583.0, 0.2))
    idler_filter: FilterSpec = field(default_factory=lambda: FilterSpec(900.0, 2.0))
    pump: PumpConfig = field(default_factory=PumpConfig)
    scan_step_nm: float = 0.5
    n_pulses: int = 2_000_000
    seed: int = 0
    output_path: str | None = None

    @property
    def pump_center_nm(self) -> float:
        if self.pump.center_nm is not None:
            return self.pump.center_nm
        return 2.0 / (1.0 / self.signal_filter.center + 1.0 / self.idler_filter.center)


def parse_values(text: str) -> dict:
    """Raw ``key -> converted value`` map; unknown or duplicated keys raise."""
    cp = configparser.ConfigParser(interpolation=None, strict=True,
                                   comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.optionxform = str  # keys are case sensitive
    try:
        cp.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}".replace(f"[{_SECTION}]", "")) from None
    if cp.sections() != [_SECTION]:
        raise ConfigError("section headers are not supported")
    out = {}
    for key, raw in cp.items(_SECTION):
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = KEYS[key](raw.strip())
    return out


def build(values: dict) -> RunConfig:
    """Assemble a validated RunConfig from converted values."""
    for key in values:
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}")
    base = RunConfig()
    v = dict(values)
    try:
        material = FUSED_SILICA
        if "sellmeier_b" in v or "sellmeier_c" in v:
            material = SellmeierModel(b=v.get("sellmeier_b", FUSED_SILICA.b),
                                      c=v.get("sellmeier_c", FUSED_SILICA.c))
        fiber = FiberSpec(v.get("core_diameter_um", base.fiber.core_diameter),
                          length=v.get("length_m", base.fiber.length),
                          n2=v.get("n2_m2_per_W", base.fiber.n2), material=material)
        src = SourceParams(v.get("mu", base.source.mu),
                           v.get("raman_per_pulse", base.source.raman_per_pulse),
                           v.get("eta_s", base.source.eta_s), v.get("eta_i", base.source.eta_i),
                           v.get("rep_rate_hz", base.source.rep_rate),
                           v.get("photon_statistics", base.source.photon_statistics))
        sf = FilterSpec(v.get("signal_center_nm", base.signal_filter.center),
                        v.get("signal_fwhm_nm", base.signal_filter.fwhm))
        idf = FilterSpec(v.get("idler_center_nm", base.idler_filter.center),
                         v.get("idler_fwhm_nm", base.idler_filter.fwhm))
    except ConfigError:
        raise
    except PcfPairError as exc:
        raise ConfigError(str(exc)) from None
    pump = PumpConfig(v.get("pump_center_nm"), v.get("pump_fwhm_nm", base.pump.fwhm_nm),
                      v.get("pump_power_W", base.pump.power_W))
    return RunConfig(fiber, src, sf, idf, pump, v.get("scan_step_nm", base.scan_step_nm),
                     v.get("n_pulses", base.n_pulses), v.get("seed", base.seed),
                     v.get("output_path"))


def parse(text: str) -> RunConfig:
    return build(parse_values(text))


def load(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse(text)


def with_overrides(cfg: RunConfig, values: dict, **top) -> RunConfig:
    """Re-validate ``cfg`` with flag overrides (flags win)."""
    merged = to_values(cfg)
    merged.update({k: v for k, v in values.items() if v is not None})
    out = build(merged)
    top = {k: v for k, v in top.items() if v is not None}
    return replace(out, **top) if top else out


def to_values(cfg: RunConfig) -> dict:
    v = {
        "core_diameter_um": cfg.fiber.core_diameter, "length_m": cfg.fiber.length,
        "n2_m2_per_W": cfg.fiber.n2, "sellmeier_b": tuple(cfg.fiber.material.b),
        "sellmeier_c": tuple(cfg.fiber.material.c), "mu": cfg.source.mu,
        "raman_per_pulse": cfg.source.raman_per_pulse, "eta_s": cfg.source.eta_s,
        "eta_i": cfg.source.eta_i, "rep_rate_hz": cfg.source.rep_rate,
        "photon_statistics": cfg.source.photon_statistics,
        "signal_center_nm": cfg.signal_filter.center, "signal_fwhm_nm": cfg.signal_filter.fwhm,
        "idler_center_nm": cfg.idler_filter.center, "idler_fwhm_nm": cfg.idler_filter.fwhm,
        "pump_fwhm_nm": cfg.pump.fwhm_nm, "pump_power_W": cfg.pump.power_W,
        "scan_step_nm": cfg.scan_step_nm, "n_pulses": cfg.n_pulses, "seed": cfg.seed,
    }
    if cfg.pump.center_nm is not None:
        v["pump_center_nm"] = cfg.pump.center_nm
    if cfg.output_path is not None:
        v["output_path"] = cfg.output_path
    return v
