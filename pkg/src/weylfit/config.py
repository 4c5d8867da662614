"""Run configuration: a strict YAML document with fixed sections.

Unknown keys are rejected so typos fail loudly; every command writes the
fully resolved configuration (defaults expanded) next to its outputs.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigError
from .sampler import (
    OMEGA_B_DEFAULT,
    OMEGA_ETA_DEFAULT,
    PREP_DETUNING_DEFAULT,
    ProtocolConfig,
)

DEFAULTS: dict = {
    "model": {
        "n": 2,
        "n_B": 0.0,
        "heating": False,
    },
    "grid": {
        "xi_max": 2.0,
        "r_max": 0.78,
        "d_xi": 0.02,
        "d_r": 0.02,
        # order-3 alternative: ranges of the 3-D complex grid
        "re_xi_max": 1.7,
        "im_xi_max": 1.7,
        "n_re": 10,
        "n_im": 10,
        "n_r": 3,
    },
    "shots": {
        "total": 1_600_000,
        "allocation": "equal",
    },
    "protocol": {
        "omega_b": OMEGA_B_DEFAULT,
        "omega_eta": OMEGA_ETA_DEFAULT,
        "heating_rate": 0.0,
        "cutoff": 100,
        "prep_detuning": PREP_DETUNING_DEFAULT,
        "ramp_time": 5.0 / PREP_DETUNING_DEFAULT,
        "prep_hold": 80e-6,
        "idle_time": 480e-6,
    },
    "rng": {
        "seed": 20240901,
    },
    "output": {
        "directory": "out",
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration for one command invocation."""

    model: dict
    grid: dict
    shots: dict
    protocol: dict
    rng: dict
    output: dict

    def as_dict(self) -> dict:
        return {
            "model": dict(self.model),
            "grid": dict(self.grid),
            "shots": dict(self.shots),
            "protocol": dict(self.protocol),
            "rng": dict(self.rng),
            "output": dict(self.output),
        }

    def protocol_config(self) -> ProtocolConfig:
        p = self.protocol
        return ProtocolConfig(
            omega_eta=float(p["omega_eta"]),
            omega_b=float(p["omega_b"]),
            heating_rate=float(p["heating_rate"]),
            cutoff=int(p["cutoff"]),
            prep_detuning=float(p["prep_detuning"]),
            ramp_time=float(p["ramp_time"]),
            prep_hold=float(p["prep_hold"]),
            idle_time=float(p["idle_time"]),
        )

    @property
    def seed(self) -> int:
        return int(self.rng["seed"])

    @property
    def out_dir(self) -> Path:
        return Path(self.output["directory"])


def _merge_section(name: str, defaults: dict, given: dict) -> dict:
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in section '{name}': {sorted(unknown)}")
    merged = copy.deepcopy(defaults)
    merged.update(given)
    return merged


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Read a YAML config file, merge defaults, and validate strictly."""
    raw: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        loaded = yaml.safe_load(text)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {path} must be a mapping of sections")
        raw = loaded

    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    sections = {}
    for name, defaults in DEFAULTS.items():
        given = raw.get(name, {})
        if not isinstance(given, dict):
            raise ConfigError(f"section '{name}' must be a mapping")
        sections[name] = _merge_section(name, defaults, given)

    if overrides:
        for name, entries in overrides.items():
            sections[name] = _merge_section(name, sections[name], entries)

    cfg = RunConfig(**sections)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.model["n"] not in (2, 3):
        raise ConfigError(f"model.n must be 2 or 3, got {cfg.model['n']}")
    if cfg.model["n_B"] < 0:
        raise ConfigError("model.n_B must be non-negative")
    if cfg.shots["total"] < 1:
        raise ConfigError("shots.total must be positive")
    if cfg.shots["allocation"] not in ("equal", "proportional-to-variance"):
        raise ConfigError(f"unknown allocation policy {cfg.shots['allocation']!r}")
    for key in ("d_xi", "d_r"):
        if cfg.grid[key] <= 0:
            raise ConfigError(f"grid.{key} must be positive")
    if cfg.protocol["cutoff"] < 2:
        raise ConfigError("protocol.cutoff must be at least 2")
    if cfg.protocol["heating_rate"] < 0:
        raise ConfigError("protocol.heating_rate must be non-negative")


def resolved_yaml(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.as_dict(), sort_keys=True)


def write_resolved(cfg: RunConfig, directory: Path, stem: str) -> Path:
    """Persist the fully resolved config next to a command's outputs."""
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{stem}.config.yaml"
    tmp = path.with_suffix(".tmp")
    tmp.write_text(resolved_yaml(cfg))
    tmp.replace(path)
    return path
