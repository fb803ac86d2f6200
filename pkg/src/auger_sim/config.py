"""JSON run configurations: schema validation and loaders for the domain types."""
from __future__ import annotations

import copy
import json
import math
from pathlib import Path
from typing import Any, Mapping

import jsonschema
import numpy as np

from .lambda_sim import Dissipators, HamiltonianSpec, default_spec
from .qdcore import (LevelSystem, Pulse, PulseSequence, level_system_from_dict,
                     default_level_system, pulse_from_dict)

EXPERIMENTS = ("rabi", "map", "ramsey", "cascade", "phonon", "wkb", "fit")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_opt_pos = {"type": ["number", "null"], "exclusiveMinimum": 0}

# numbers given either explicitly or as an evenly spaced range
_grid = {
    "oneOf": [
        {"type": "array", "items": _num},
        {"type": "object", "additionalProperties": False,
         "required": ["start", "stop", "num"],
         "properties": {"start": _num, "stop": _num, "num": {"type": "integer", "minimum": 0},
                        "unit": {"enum": ["rad", "pi"]}}},
    ]
}

LEVEL_SYSTEM_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["orbital_energy", "trion_lifetime"],
    "properties": {
        "levels": {"type": "array", "items": {"type": "string"}, "minItems": 2},
        "orbital_energy": {"type": "object", "additionalProperties": _num},
        "dipole_rel": {"type": "object", "additionalProperties": _pos},
        "trion_lifetime": _pos,
        "hole_lifetime": {"type": "object", "additionalProperties": _pos},
        "approximate": {"type": "array", "items": {"type": "string"}},
    },
}

PULSE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["target", "area", "fwhm"],
    "properties": {
        "target": {"type": "string"},
        "area": {"type": "number", "minimum": 0},
        "fwhm": _pos,
        "arrival": _num,
        "detuning": _num,
        "phase": _num,
        "shape": {"enum": ["gaussian", "square"]},
        "fwhm_convention": {"enum": ["field", "intensity"]},
    },
}

DISSIPATION_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"trion_lifetime": _opt_pos, "hole_lifetime": _opt_pos, "pure_dephasing": _opt_pos},
}

_driven = {
    "cross_coupling": {"type": "boolean"},
    "dipole_ratio": _pos,
    "target": {"type": "string"},
    "dissipation": DISSIPATION_SCHEMA,
    "rtol": _pos,
    "atol": _pos,
}

PARAM_SCHEMAS: dict[str, dict] = {
    "rabi": {
        "required": ["areas"],
        "properties": {**_driven, "areas": _grid, "compare": {"type": "boolean"},
                       "delta_opt": {"oneOf": [_num, {"const": "auto"}]}},
    },
    "map": {
        "required": ["areas", "deltas"],
        "properties": {**_driven, "areas": _grid, "deltas": _grid, "argmin": {"type": "boolean"}},
    },
    "ramsey": {
        "properties": {
            "tau_h2": _pos, "t2_star": _pos, "nu": _pos,
            "fine_delays": _grid, "coarse_delays": _grid,
            "noise": {"type": "number", "minimum": 0},
            "data_path": {"type": "string"},
            "simulate": {"type": "boolean"},
            "dipole_ratio": _pos, "cross_coupling": {"type": "boolean"},
            "rtol": _pos, "atol": _pos,
        },
    },
    "cascade": {
        "properties": {
            "initial": {"type": "string", "pattern": "^h[2-9]$"},
            "lifetimes": {"type": "array", "items": _pos},
            "t_max": _pos, "dt": _pos,
            "window": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
            "model": {"enum": ["exponential_fill", "pure"]},
            "sensitivity_starts": {"type": "array", "items": {"type": "number", "minimum": 0}},
        },
    },
    "phonon": {
        "properties": {
            "data": {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
            "data_path": {"type": "string"},
            "synthetic": {"type": "object", "additionalProperties": False,
                          "required": ["alpha", "hbar_omega_c", "energies"],
                          "properties": {"alpha": _pos, "hbar_omega_c": _pos, "energies": _grid,
                                         "noise": {"type": "number", "minimum": 0}}},
            "energies_out": _grid,
        },
    },
    "wkb": {
        "required": ["barrier"],
        "properties": {
            "barrier": {"type": "object", "additionalProperties": False,
                        "properties": {"height": _pos, "width": _pos, "z": {"type": "array", "items": _num},
                                       "ev": {"type": "array", "items": _num}, "l_qd": _pos,
                                       "m_b": _pos, "m_dot": _pos, "slope_per_volt": _num}},
            "energy": _pos,
            "energies": _grid,
            "biases": _grid,
        },
    },
    "fit": {
        "required": ["model"],
        "properties": {
            "model": {"type": "string"},
            "data_path": {"type": "string"},
            "synthetic": {"type": "object", "additionalProperties": False,
                          "required": ["params", "x"],
                          "properties": {"params": {"type": "array", "items": _num}, "x": _grid,
                                         "noise": {"type": "number", "minimum": 0}}},
            "p0": {"type": "array", "items": _num},
            "fixed": {"type": "object", "additionalProperties": _num},
        },
    },
}

RUN_CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "system": LEVEL_SYSTEM_SCHEMA,
        "pulses": {"type": "array", "items": PULSE_SCHEMA},
        "params": {"type": "object"},
        "output": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "description": {"type": "string"},
    },
}


class ConfigError(ValueError):
    pass


def _params_schema(experiment: str) -> dict:
    s = {"type": "object", "additionalProperties": False}
    s.update(copy.deepcopy(PARAM_SCHEMAS[experiment]))
    return s


def validate(doc: Mapping[str, Any]) -> dict:
    """Validate a run configuration; returns a plain dict with defaults filled in."""
    try:
        jsonschema.validate(doc, RUN_CONFIG_SCHEMA)
        jsonschema.validate(doc.get("params", {}), _params_schema(doc["experiment"]))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    out = dict(doc)
    out.setdefault("params", {})
    out.setdefault("seed", 0)
    return out


def load_config(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    cfg = validate(doc)
    cfg["_base_dir"] = str(path.resolve().parent)
    return cfg


def resolve_path(cfg: Mapping, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else Path(cfg.get("_base_dir", ".")) / path


def expand_grid(g, name: str = "grid") -> np.ndarray:
    if isinstance(g, Mapping):
        arr = np.linspace(g["start"], g["stop"], g["num"])
        if g.get("unit") == "pi":
            arr = arr * math.pi
    else:
        arr = np.asarray(g, dtype=float)
    if arr.size == 0:
        raise ConfigError(f"{name} is empty")
    return arr


def level_system(cfg: Mapping) -> LevelSystem:
    if "system" not in cfg:
        return default_level_system()
    return level_system_from_dict(cfg["system"])


def dissipators(params: Mapping) -> Dissipators | None:
    d = params.get("dissipation")
    if d is None:
        return None
    return Dissipators.standard(trion_lifetime=d.get("trion_lifetime"),
                                hole_lifetime=d.get("hole_lifetime"),
                                hole=params.get("target", "h2"),
                                pure_dephasing=d.get("pure_dephasing"))


def hamiltonian_spec(cfg: Mapping) -> HamiltonianSpec:
    """Pump/control template from ``pulses`` (pump first) and the level system."""
    params = cfg.get("params", {})
    system = level_system(cfg)
    target = params.get("target")
    pulses = [pulse_from_dict(p) for p in cfg.get("pulses", [])]
    if pulses and len(pulses) != 2:
        raise ConfigError("driven experiments take exactly two pulses (pump, control)")
    if target is None:
        target = pulses[1].target if pulses else "h2"
    if target not in system.orbital_energy or target == "h1":
        raise ConfigError(f"control target {target!r} is not an excited hole level of the system")
    ratio = params.get("dipole_ratio", system.dipole_ratio(target) if target in system.dipole_rel else 5.0)
    if not pulses:
        spec = default_spec(cross_coupling=params.get("cross_coupling", False), dipole_ratio=ratio,
                            delta12=system.splitting(target), target=target)
        return spec
    pump, control = pulses
    if pump.target != "h1" or control.target != target:
        raise ConfigError("first pulse must address h1 and second the control target")
    return HamiltonianSpec(pump=pump, control=control, delta12=system.splitting(target),
                           cross_coupling=params.get("cross_coupling", False), dipole_ratio=ratio,
                           basis=("h1", "T+", target))


def pulse_sequence(cfg: Mapping) -> PulseSequence:
    return PulseSequence(tuple(pulse_from_dict(p) for p in cfg.get("pulses", [])))


def spec_from_json(text: str) -> HamiltonianSpec:
    """HamiltonianSpec from a JSON document with ``pump``, ``control`` and optional scalars."""
    doc = json.loads(text)
    keys = {"pump", "control", "delta12", "cross_coupling", "dipole_ratio", "basis", "extra_pulses"}
    unknown = set(doc) - keys
    if unknown:
        raise ConfigError(f"unknown HamiltonianSpec keys: {sorted(unknown)}")
    for k in ("pump", "control"):
        jsonschema.validate(doc[k], PULSE_SCHEMA)
    kw = {k: doc[k] for k in ("delta12", "cross_coupling", "dipole_ratio") if k in doc}
    if "basis" in doc:
        kw["basis"] = tuple(doc["basis"])
    return HamiltonianSpec(pump=pulse_from_dict(doc["pump"]), control=pulse_from_dict(doc["control"]),
                           extra_pulses=tuple(pulse_from_dict(p) for p in doc.get("extra_pulses", [])),
                           **kw)


def pulse_to_dict(p: Pulse) -> dict:
    from dataclasses import asdict
    return asdict(p)
