"""Run configuration: built-in scenarios, TOML loading and strict validation.

A config file is TOML with the sections below; every key is optional and
falls back to the scenario default. Unknown sections or keys are errors.

.. code-block:: toml

    scenario = "dirac0"          # constant | dirac0 | dirac-half | smooth
    seed = 0
    out = "out"

    [rates]
    lambda_c = { kind = "dirac", location = 0.0, mass = 0.5 }
    lambda_d = { kind = "constant", value = 0.5 }
    # other kinds: { kind = "tabulated", path = "rate.csv" }
    #              { kind = "cosine", mean = 0.5, amplitude = 0.5 }

    [solver]
    method = "spectral"          # spectral | crank_nicolson
    basis = "cosine"             # cosine | numeric
    n_trunc = 1000
    grid = 2001
    fd_steps_per_unit = 1000
    fd_grid = 16001
    mollify_width = 1e-3

    [time]
    t_end = 4.0
    snapshots = 200

    [output]
    x_points = 101
    rho2_x2 = [0.0, 0.25, 0.5]
    rho2_time = 0.25
    n_max = 50

    [simulation]
    trajectories = 10000
    dt = 1e-4
    bins = 50
    mode_bins = 5
    snapshots = [0.25, 0.5, 1.0, 2.0, 4.0]
    batch_size = 2000

    [validation]
    simulate = false
    fd_compare = true
    convergence_t = 0.25
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

SCENARIOS = ("constant", "dirac0", "dirac-half", "smooth")

_RATE_KEYS = {
    "constant": {"value"},
    "dirac": {"location", "mass"},
    "tabulated": {"path"},
    "cosine": {"mean", "amplitude"},
}


def _pos_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v >= 1


def _pos_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0


def _num_list(v):
    return isinstance(v, list) and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)


def _bool(v):
    return isinstance(v, bool)


# section -> key -> (validator, description)
SCHEMA = {
    "solver": {
        "method": (lambda v: v in ("spectral", "crank_nicolson"), "'spectral' or 'crank_nicolson'"),
        "basis": (lambda v: v in ("cosine", "numeric"), "'cosine' or 'numeric'"),
        "n_trunc": (_pos_int, "integer >= 1"),
        "grid": (lambda v: _pos_int(v) and v >= 3, "integer >= 3"),
        "fd_steps_per_unit": (_pos_int, "integer >= 1"),
        "fd_grid": (lambda v: _pos_int(v) and v >= 3, "integer >= 3"),
        "mollify_width": (lambda v: _pos_num(v) and v < 0.5, "number in (0, 0.5)"),
    },
    "time": {
        "t_end": (_pos_num, "number > 0"),
        "snapshots": (lambda v: _pos_int(v) and v >= 3, "integer >= 3"),
    },
    "output": {
        "x_points": (lambda v: _pos_int(v) and v >= 2, "integer >= 2"),
        "rho2_x2": (lambda v: _num_list(v) and all(0 <= x <= 1 for x in v), "list of numbers in [0, 1]"),
        "rho2_time": (_pos_num, "number > 0"),
        "n_max": (lambda v: isinstance(v, int) and v >= 0, "integer >= 0"),
    },
    "simulation": {
        "trajectories": (_pos_int, "integer >= 1"),
        "dt": (_pos_num, "number > 0"),
        "bins": (_pos_int, "integer >= 1"),
        "mode_bins": (_pos_int, "integer >= 1 dividing bins"),
        "snapshots": (lambda v: _num_list(v) and len(v) > 0 and all(x >= 0 for x in v), "non-empty list of times >= 0"),
        "batch_size": (_pos_int, "integer >= 1"),
    },
    "validation": {
        "simulate": (_bool, "boolean"),
        "fd_compare": (_bool, "boolean"),
        "convergence_t": (_pos_num, "number > 0"),
    },
}

_TOP_KEYS = {"scenario", "seed", "out", "rates"} | set(SCHEMA)


def _defaults():
    return {
        "scenario": "constant",
        "seed": 0,
        "out": "out",
        "rates": {
            "lambda_c": {"kind": "constant", "value": 0.5},
            "lambda_d": {"kind": "constant", "value": 0.5},
        },
        "solver": {
            "method": "spectral",
            "basis": "cosine",
            "n_trunc": 1000,
            "grid": 2001,
            "fd_steps_per_unit": 1000,
            "fd_grid": 16001,
            "mollify_width": 1e-3,
        },
        "time": {"t_end": 4.0, "snapshots": 200},
        "output": {"x_points": 101, "rho2_x2": [0.0, 0.25, 0.5], "rho2_time": 0.25, "n_max": 50},
        "simulation": {
            "trajectories": 10_000,
            "dt": 1e-4,
            "bins": 50,
            "mode_bins": 5,
            "snapshots": [0.25, 0.5, 1.0, 2.0, 4.0],
            "batch_size": 2000,
        },
        "validation": {"simulate": False, "fd_compare": True, "convergence_t": 0.25},
    }


_SCENARIO_CREATION = {
    "constant": {"kind": "constant", "value": 0.5},
    "dirac0": {"kind": "dirac", "location": 0.0, "mass": 0.5},
    "dirac-half": {"kind": "dirac", "location": 0.5, "mass": 0.5},
    "smooth": {"kind": "cosine", "mean": 0.5, "amplitude": 0.5},
}


def scenario_config(name):
    """Default configuration dictionary for a built-in scenario."""
    if name not in SCENARIOS:
        raise ConfigError(f"scenario: unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}")
    cfg = _defaults()
    cfg["scenario"] = name
    cfg["rates"]["lambda_c"] = dict(_SCENARIO_CREATION[name])
    return cfg


def _merge(base, override, path=""):
    for key, value in override.items():
        where = f"{path}{key}"
        if isinstance(base.get(key), dict) and key != "rates":
            if not isinstance(value, dict):
                raise ConfigError(f"{where}: expected a table")
            _merge(base[key], value, where + ".")
        elif key == "rates":
            if not isinstance(value, dict):
                raise ConfigError("rates: expected a table")
            for name, spec in value.items():
                base["rates"][name] = spec
        else:
            base[key] = value


def _check_rate(name, spec, base_dir):
    where = f"rates.{name}"
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{where}: expected a table with a 'kind' key")
    kind = spec["kind"]
    if kind not in _RATE_KEYS:
        raise ConfigError(f"{where}.kind: unknown kind {kind!r}; expected one of {', '.join(_RATE_KEYS)}")
    keys = set(spec) - {"kind"}
    if keys != _RATE_KEYS[kind]:
        extra, missing = keys - _RATE_KEYS[kind], _RATE_KEYS[kind] - keys
        raise ConfigError(f"{where}: unexpected keys {sorted(extra)}, missing keys {sorted(missing)}")
    if kind == "tabulated":
        path = Path(spec["path"])
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"{where}.path: file not found: {path}")
        spec["path"] = str(path)
        return
    for key in _RATE_KEYS[kind]:
        v = spec[key]
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    if kind == "constant" and spec["value"] < 0:
        raise ConfigError(f"{where}.value: must be >= 0")
    if kind == "dirac" and not (0 <= spec["location"] <= 1 and spec["mass"] >= 0):
        raise ConfigError(f"{where}: need location in [0, 1] and mass >= 0")
    if kind == "cosine" and spec["mean"] < abs(spec["amplitude"]):
        raise ConfigError(f"{where}: mean must be >= |amplitude| for a non-negative rate")


def validate_config(cfg, base_dir=None):
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if cfg["scenario"] not in SCENARIOS:
        raise ConfigError(f"scenario: unknown scenario {cfg['scenario']!r}")
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool) or not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed: expected an unsigned 64-bit integer")
    if not isinstance(cfg["out"], str):
        raise ConfigError("out: expected a path string")
    if set(cfg["rates"]) != {"lambda_c", "lambda_d"}:
        raise ConfigError(f"rates: expected exactly lambda_c and lambda_d, got {sorted(cfg['rates'])}")
    for name, spec in cfg["rates"].items():
        _check_rate(name, spec, base_dir)
    for section, keys in SCHEMA.items():
        unknown = set(cfg[section]) - set(keys)
        if unknown:
            raise ConfigError(f"{section}: unknown keys {sorted(unknown)}")
        for key, (check, desc) in keys.items():
            if not check(cfg[section][key]):
                raise ConfigError(f"{section}.{key}: expected {desc}, got {cfg[section][key]!r}")
    sim = cfg["simulation"]
    if sim["bins"] % sim["mode_bins"]:
        raise ConfigError("simulation.mode_bins: must divide simulation.bins")
    if sim["dt"] > max(sim["snapshots"] or [1.0]) and max(sim["snapshots"]) > 0:
        raise ConfigError("simulation.dt: larger than the last snapshot time")
    return cfg


def load_config(path=None, scenario=None, overrides=None):
    """Resolve a configuration: scenario defaults <- file <- explicit overrides.

    ``overrides`` is a nested dict (CLI flags). Raises :class:`ConfigError`
    with the offending field, or the TOML line and column on parse errors.
    """
    raw = {}
    base_dir = None
    if path is not None:
        path = Path(path)
        base_dir = path.parent
        try:
            raw = tomllib.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(raw.get("scenario", ""), str):
            raise ConfigError("scenario: expected a string")
    name = scenario or raw.get("scenario", "constant")
    cfg = scenario_config(name)
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    _merge(cfg, copy.deepcopy(raw))
    if overrides:
        _merge(cfg, overrides)
    cfg["scenario"] = name
    return validate_config(cfg, base_dir)


def config_hash(cfg):
    """Short digest of everything that affects results (the output path does not)."""
    settings = {k: v for k, v in cfg.items() if k != "out"}
    blob = json.dumps(settings, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
