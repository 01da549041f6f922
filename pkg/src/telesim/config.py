"""Experiment configuration: dataclass, validation, TOML round-trip, hashing.

Unit conventions are fixed package-wide: times in ns, rates in Hz,
fibre lengths in km, attenuation in dB/km.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .exceptions import ConfigError
from .qubit import PureQubit, named_state

DETECTOR_IDS = ("D1", "D2", "D3", "D4")


@dataclass(frozen=True)
class DetectorConfig:
    efficiency: float = 0.75
    jitter_sigma_ns: float = 0.212
    dark_rate_hz: float = 300.0

    def validate(self, name: str) -> None:
        if not 0.0 <= self.efficiency <= 1.0:
            raise ConfigError(f"{name}: efficiency {self.efficiency} outside [0, 1]")
        if self.jitter_sigma_ns < 0:
            raise ConfigError(f"{name}: negative jitter")
        if self.dark_rate_hz < 0:
            raise ConfigError(f"{name}: negative dark rate")


@dataclass(frozen=True)
class ExperimentConfig:
    # source
    p: float = 0.01
    mu: float = 0.011
    phi: float = 0.0
    v_src: float = 0.93
    tau_i: float = 1.4
    # paths
    eta_i: float = 0.13
    eta_s: float = 6.3e-3
    # memory
    mem_efficiency: float = 0.05
    mem_storage_ns: float = 50.0
    mem_transmission: float = 0.10
    # pump timing
    pump_pulse_fwhm_ns: float = 25.0
    pump_period_ns: float = 100.0
    # fibre
    fibre_km_idler: float = 0.0
    fibre_km_wcs: float = 0.0
    attenuation_db_per_km: float = 0.35
    # detectors
    detectors: dict = field(
        default_factory=lambda: {d: DetectorConfig() for d in DETECTOR_IDS}
    )
    # input state and analysis
    wcs_pol: str = "-"
    analyzer_basis: str = "X"
    # interference model
    xi_max: float = 1.0
    n_max: int = 4
    # timing model: "binned" quantizes emissions to pump slots (exact overlap
    # bookkeeping); "continuous" draws real emission times within the pulse
    temporal_mode: str = "continuous"
    wcs_bin_halfwidth: int = 0
    wcs_bin_ns: float = 0.486
    pair_bin_halfwidth: int = 0
    phi_drift_rad_per_window: float = 0.0
    seed: int = 0

    def __post_init__(self):
        dets = {k: (DetectorConfig(**v) if isinstance(v, dict) else v)
                for k, v in self.detectors.items()}
        object.__setattr__(self, "detectors", dets)
        self.validate()

    def validate(self) -> None:
        unit = {
            "p": self.p,
            "mu": self.mu,
            "v_src": self.v_src,
            "eta_i": self.eta_i,
            "eta_s": self.eta_s,
            "mem_efficiency": self.mem_efficiency,
            "mem_transmission": self.mem_transmission,
            "xi_max": self.xi_max,
        }
        for name, x in unit.items():
            if not 0.0 <= x <= 1.0:
                raise ConfigError(f"{name}={x} outside [0, 1]")
        if self.mem_efficiency + self.mem_transmission > 1.0 + 1e-12:
            raise ConfigError("memory branch probabilities exceed 1")
        positive = {
            "tau_i": self.tau_i,
            "mem_storage_ns": self.mem_storage_ns,
            "pump_pulse_fwhm_ns": self.pump_pulse_fwhm_ns,
            "pump_period_ns": self.pump_period_ns,
        }
        for name, x in positive.items():
            if not x > 0:
                raise ConfigError(f"{name}={x} must be > 0")
        for name, x in (
            ("fibre_km_idler", self.fibre_km_idler),
            ("fibre_km_wcs", self.fibre_km_wcs),
            ("attenuation_db_per_km", self.attenuation_db_per_km),
        ):
            if x < 0:
                raise ConfigError(f"{name}={x} must be >= 0")
        if set(self.detectors) != set(DETECTOR_IDS):
            raise ConfigError(f"detectors must be exactly {DETECTOR_IDS}")
        for name, det in self.detectors.items():
            det.validate(name)
        try:
            named_state(self.wcs_pol)
        except Exception:
            raise ConfigError(f"unknown wcs_pol {self.wcs_pol!r}")
        if self.analyzer_basis not in ("X", "Y", "Z"):
            raise ConfigError(f"analyzer_basis {self.analyzer_basis!r} not in X/Y/Z")
        if self.temporal_mode not in ("binned", "continuous"):
            raise ConfigError(f"temporal_mode {self.temporal_mode!r} unknown")
        if self.wcs_bin_halfwidth < 0 or self.wcs_bin_halfwidth != int(self.wcs_bin_halfwidth):
            raise ConfigError("wcs_bin_halfwidth must be a non-negative integer")
        if self.pair_bin_halfwidth < 0 or self.pair_bin_halfwidth != int(self.pair_bin_halfwidth):
            raise ConfigError("pair_bin_halfwidth must be a non-negative integer")
        if self.wcs_bin_ns <= 0:
            raise ConfigError("wcs_bin_ns must be > 0")
        if self.n_max < 2:
            raise ConfigError("n_max must be at least 2")

    def wcs_state(self) -> PureQubit:
        return named_state(self.wcs_pol)

    def fibre_transmission(self, arm: str) -> float:
        km = {"idler": self.fibre_km_idler, "wcs": self.fibre_km_wcs}.get(arm)
        if km is None:
            raise ConfigError(f"unknown arm {arm!r}")
        return 10.0 ** (-km * self.attenuation_db_per_km / 10.0)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["detectors"] = {k: dataclasses.asdict(v) for k, v in self.detectors.items()}
        return d


def config_from_dict(data: dict) -> ExperimentConfig:
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}")
    return config_from_dict(data)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    raise ConfigError(f"cannot serialize {type(v).__name__} to TOML")


def save_config(cfg: ExperimentConfig, path) -> None:
    d = cfg.to_dict()
    detectors = d.pop("detectors")
    lines = [f"{k} = {_toml_value(v)}" for k, v in d.items()]
    for det_id in DETECTOR_IDS:
        lines.append("")
        lines.append(f"[detectors.{det_id}]")
        lines.extend(f"{k} = {_toml_value(v)}" for k, v in detectors[det_id].items())
    Path(path).write_text("\n".join(lines) + "\n")


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
