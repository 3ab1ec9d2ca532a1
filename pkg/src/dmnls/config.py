"""JSON run configuration: parsing with full error collection and round-tripping."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .dispersion_map import DispersionMap
from .experiments import KINDS, ExperimentError, ExperimentSpec

__all__ = ["RunConfig", "SimulationSpec", "ConfigError", "parse_config", "config_from_dict", "config_to_dict"]

CONFIG_VERSION = 1
_EXPONENT_KEYS = ("q", "r", "q_tilde", "r_tilde")
_TOP_KEYS = {"version", "out", "seed", "verbosity", "profile_cache", "experiments", "experiment",
             "simulation"}


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class SimulationSpec:
    """Plain evolution of one datum, used by the ``simulate`` subcommand."""

    map: DispersionMap
    grid: dict
    datum: dict
    t0: float = 0.0
    t1: float = 1.0
    dt_max: float = 1e-3
    snapshot_every: int = 100
    power: int = 2
    phase_cfl: float | None = None
    zoom_points: int | None = None

    def to_json(self) -> dict:
        return {
            "map": self.map.to_json(), "grid": dict(self.grid), "datum": dict(self.datum),
            "t0": self.t0, "t1": self.t1, "dt_max": self.dt_max, "snapshot_every": self.snapshot_every,
            "power": self.power, "phase_cfl": self.phase_cfl, "zoom_points": self.zoom_points,
        }


@dataclass
class RunConfig:
    experiments: list[ExperimentSpec] = field(default_factory=list)
    out: str = "out"
    seed: int = 0
    verbosity: int = 1
    profile_cache: str | None = None
    simulation: SimulationSpec | None = None


def _normalize_params(params: dict) -> dict:
    out = dict(params)
    for k in _EXPONENT_KEYS:
        if isinstance(out.get(k), str):
            out[k] = float(out[k])
    return out


def _writable(path: Path) -> bool:
    p = path.resolve()
    while not p.exists():
        p = p.parent
    return p.is_dir() and os.access(p, os.W_OK)


def _parse_experiment(obj, index: int, seed: int, errors: list[str]) -> ExperimentSpec | None:
    where = f"experiments[{index}]"
    if not isinstance(obj, dict):
        errors.append(f"{where}: must be an object")
        return None
    kind = obj.get("kind")
    if kind not in KINDS:
        errors.append(f"{where}: kind must be one of {', '.join(KINDS)} (got {kind!r})")
        return None
    if "map" not in obj:
        errors.append(f"{where}: missing 'map'")
        return None
    try:
        gmap = DispersionMap.from_json(obj["map"])
    except (ValueError, TypeError) as exc:
        errors.append(f"{where}.map: {exc}")
        return None
    try:
        spec = ExperimentSpec(
            kind=kind,
            map=gmap,
            grid=dict(obj.get("grid", {})),
            datum=dict(obj.get("datum", {})),
            params=_normalize_params(obj.get("params", {})),
            seed=int(obj.get("seed", seed)),
        )
    except (ExperimentError, ValueError, TypeError) as exc:
        errors.append(f"{where}: {exc}")
        return None
    errors.extend(f"{where}: {e}" for e in spec.validate())
    return spec


def _parse_simulation(obj, errors: list[str]) -> SimulationSpec | None:
    try:
        gmap = DispersionMap.from_json(obj["map"])
        sim = SimulationSpec(
            map=gmap, grid=dict(obj["grid"]), datum=dict(obj.get("datum", {"family": "gaussian"})),
            **{k: obj[k] for k in ("t0", "t1", "dt_max", "snapshot_every", "power", "phase_cfl", "zoom_points")
               if k in obj},
        )
    except (KeyError, ValueError, TypeError) as exc:
        errors.append(f"simulation: {exc!s}")
        return None
    if not sim.t1 > sim.t0:
        errors.append("simulation: t1 must exceed t0")
    return sim


def config_from_dict(obj: dict, base_dir: Path | None = None) -> RunConfig:
    """Validate a config mapping; raises :class:`ConfigError` listing every problem."""
    errors: list[str] = []
    if not isinstance(obj, dict):
        raise ConfigError(["config must be a JSON object"])
    if "kind" in obj:  # a bare experiment
        obj = {"experiments": [obj]}
    unknown = set(obj) - _TOP_KEYS
    if unknown:
        errors.append(f"unknown top-level keys: {sorted(unknown)}")
    if obj.get("version", CONFIG_VERSION) != CONFIG_VERSION:
        errors.append(f"unsupported config version {obj.get('version')!r}")
    seed = obj.get("seed", 0)
    if not (isinstance(seed, int) and not isinstance(seed, bool) and 0 <= seed < 2**64):
        errors.append("seed must be an unsigned 64-bit integer")
        seed = 0
    out = str(obj.get("out", "out"))
    out_path = Path(out) if base_dir is None or Path(out).is_absolute() else base_dir / out
    if not _writable(out_path):
        errors.append(f"output directory {out!r} is not writable")
    items = obj.get("experiments", [obj["experiment"]] if "experiment" in obj else [])
    if not isinstance(items, list):
        errors.append("experiments must be a list")
        items = []
    specs = [_parse_experiment(e, i, seed, errors) for i, e in enumerate(items)]
    sim = _parse_simulation(obj["simulation"], errors) if "simulation" in obj else None
    if not items and sim is None:
        errors.append("config defines no experiments and no simulation")
    if errors:
        raise ConfigError(errors)
    return RunConfig(
        experiments=[s for s in specs if s is not None],
        out=out,
        seed=seed,
        verbosity=int(obj.get("verbosity", 1)),
        profile_cache=obj.get("profile_cache"),
        simulation=sim,
    )


def parse_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([f"invalid JSON in {path}: {exc}"]) from None
    return config_from_dict(obj)


def _json_float(x):
    return "inf" if isinstance(x, float) and math.isinf(x) else x


def config_to_dict(cfg: RunConfig) -> dict:
    exps = []
    for s in cfg.experiments:
        d = s.to_json()
        d["params"] = {k: _json_float(v) if k in _EXPONENT_KEYS else v for k, v in d["params"].items()}
        exps.append(d)
    obj = {
        "version": CONFIG_VERSION,
        "out": cfg.out,
        "seed": cfg.seed,
        "verbosity": cfg.verbosity,
        "profile_cache": cfg.profile_cache,
        "experiments": exps,
    }
    if cfg.simulation is not None:
        obj["simulation"] = cfg.simulation.to_json()
    return obj
