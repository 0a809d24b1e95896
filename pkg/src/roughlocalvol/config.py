"""Experiment configuration: profiles, strict INI parsing, environment overrides."""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, replace
from typing import Mapping

from .errors import ConfigError
from .params import ModelParams
from .rate_function import RitzConfig

ENV_PREFIX = "ROUGHLOCALVOL_"

_DESK_MATURITIES = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5)
_DESK_Y_GRID = tuple(round(-0.3 + 0.05 * i, 2) for i in range(13))

#: profile presets; the paper-scale profile reproduces full-resolution figures
#: and is deliberately unbounded in runtime
PROFILES: dict[str, dict] = {
    "desk": dict(n_samples=200_000, n_steps=256,
                 maturities=_DESK_MATURITIES, y_grid=_DESK_Y_GRID),
    "paper": dict(n_samples=1_500_000, n_steps=500,
                  maturities=_DESK_MATURITIES, y_grid=_DESK_Y_GRID),
    "smoke": dict(n_samples=20_000, n_steps=64,
                  maturities=(0.1, 0.3), y_grid=(-0.2, -0.1, 0.0, 0.1, 0.2)),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs: model, grids, sample counts, seeds, outputs."""

    params: ModelParams
    maturities: tuple[float, ...]
    y_grid: tuple[float, ...]
    n_samples: int
    n_steps: int
    seed: int
    ritz: RitzConfig
    bandwidth_delta: float | None = None
    out_dir: str = "out"
    threads: int = 1
    profile: str = "desk"

    def __post_init__(self) -> None:
        if any(t <= 0 for t in self.maturities):
            raise ConfigError("maturities must be strictly positive")
        if list(self.maturities) != sorted(self.maturities):
            raise ConfigError("maturities must be sorted ascending")
        if self.n_samples < 1 or self.n_steps < 1:
            raise ConfigError("n_samples and n_steps must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")


# section -> key -> parser
_SCHEMA = {
    "model": {"xi0": float, "eta": float, "rho": float, "hurst": float},
    "experiment": {
        "maturities": "float_list", "y_grid": "float_list",
        "n_samples": int, "n_steps": int, "seed": int,
    },
    "estimators": {"bandwidth_delta": float},
    "ritz": {"n_basis": int, "quad_nodes": int, "tol": float},
    "output": {"directory": str},
}


def _parse_value(kind, raw: str):
    if kind == "float_list":
        parts = raw.replace(",", " ").split()
        return tuple(float(p) for p in parts)
    return kind(raw)


def default_config(profile: str = "desk", seed: int = 20240 * 6) -> ExperimentConfig:
    """Built-in defaults for a named profile."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    preset = PROFILES[profile]
    return ExperimentConfig(
        params=ModelParams(), maturities=preset["maturities"],
        y_grid=preset["y_grid"], n_samples=preset["n_samples"],
        n_steps=preset["n_steps"], seed=seed, ritz=RitzConfig(),
        profile=profile,
    )


def _apply_sections(config: ExperimentConfig,
                    sections: Mapping[str, Mapping[str, str]]) -> ExperimentConfig:
    model_kwargs: dict = {}
    ritz_kwargs: dict = {}
    updates: dict = {}
    for section, keys in sections.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in keys.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            value = _parse_value(_SCHEMA[section][key], raw)
            if section == "model":
                model_kwargs[key] = value
            elif section == "ritz":
                ritz_kwargs[key] = value
            elif section == "estimators":
                updates["bandwidth_delta"] = value
            elif section == "output":
                updates["out_dir"] = value
            else:
                updates[key] = value
    if model_kwargs:
        updates["params"] = replace(config.params, **model_kwargs)
    if ritz_kwargs:
        updates["ritz"] = replace(config.ritz, **ritz_kwargs)
    return replace(config, **updates)


def _env_sections(env: Mapping[str, str]) -> dict[str, dict[str, str]]:
    sections: dict[str, dict[str, str]] = {}
    for name, raw in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):].lower()
        section, _, key = rest.partition("_")
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"unrecognized override variable {name}")
        sections.setdefault(section, {})[key] = raw
    return sections


def load_config(path: str | None = None, profile: str = "desk",
                seed: int | None = None, out_dir: str | None = None,
                threads: int | None = None,
                env: Mapping[str, str] | None = None) -> ExperimentConfig:
    """
    Resolve a run configuration: profile defaults, then the INI file, then
    ROUGHLOCALVOL_SECTION_KEY environment overrides, then CLI-level flags.
    Unknown sections or keys are rejected.
    """
    config = default_config(profile)
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        config = _apply_sections(
            config, {s: dict(parser.items(s)) for s in parser.sections()})
    env = os.environ if env is None else env
    config = _apply_sections(config, _env_sections(env))
    updates: dict = {}
    if seed is not None:
        updates["seed"] = seed
    if out_dir is not None:
        updates["out_dir"] = out_dir
    if threads is not None:
        updates["threads"] = threads
    return replace(config, **updates) if updates else config


def canonical_text(config: ExperimentConfig) -> str:
    """Stable key=value rendering used for hashing and manifests."""
    p = config.params
    lines = [
        f"model.xi0={p.xi0!r}", f"model.eta={p.eta!r}", f"model.rho={p.rho!r}",
        f"model.hurst={p.hurst!r}",
        f"experiment.maturities={','.join(repr(t) for t in config.maturities)}",
        f"experiment.y_grid={','.join(repr(y) for y in config.y_grid)}",
        f"experiment.n_samples={config.n_samples}",
        f"experiment.n_steps={config.n_steps}",
        f"experiment.seed={config.seed}",
        f"estimators.bandwidth_delta={config.bandwidth_delta!r}",
        f"ritz.n_basis={config.ritz.n_basis}",
        f"ritz.quad_nodes={config.ritz.quad_nodes}",
        f"ritz.tol={config.ritz.tol!r}",
        f"profile={config.profile}",
    ]
    return "\n".join(lines) + "\n"


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_text(config).encode()).hexdigest()[:16]
