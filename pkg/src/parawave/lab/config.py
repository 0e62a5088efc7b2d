"""Experiment configuration: flat ``section.key = value`` files with CLI overrides."""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigInvalid

EXPERIMENTS = (
    "dn_check",
    "paralin_order",
    "symcalc_order",
    "parabolic_check",
    "taylor_check",
    "dispersion",
    "evolve",
    "contraction",
)

SCENARIOS = ("rest", "traveling", "rough", "regularized")

BASE = {
    "grid": {"dim": 1, "n": 128, "L": 1.0},
    "physics": {"g": 1.0, "h": 1.0, "bottom_kind": "flat_bottom", "eps": 0.0},
    "numerics": {"nz": 32, "krylov_tol": 1e-10, "cfl": 0.5, "delta": "auto"},
    "run": {"seed": 0, "output_dir": "parawave_out", "workers": 1},
}

# experiment-specific sections and the per-experiment overrides of BASE
EXTRA = {
    "dn_check": {"dn_check": {"modes": [1, 2, 4, 8, 16], "amplitude": 0.0, "trials": 0, "steepness": 0.1}},
    "paralin_order": {
        "grid": {"n": 256},
        "physics": {"bottom_kind": "infinite_depth_truncation"},
        "paralin_order": {"amplitude": 0.1, "width": 1.0, "power": 1.5, "kmin": 8, "kmax": 64},
    },
    "symcalc_order": {"grid": {"n": 512}, "symcalc_order": {"kmin": 8, "coef_amplitude": 0.5}},
    "parabolic_check": {"numerics": {"nz": 64}, "parabolic_check": {"variation": 0.3, "levels": [64, 128, 256]}},
    "taylor_check": {"taylor_check": {"states": 10, "steepness": 0.05, "decay": 3.0}},
    "dispersion": {"dispersion": {"mode": 4, "amplitude": 1e-4, "periods": 5}},
    "evolve": {
        "evolve": {
            "scenario": "rest",
            "steps": 100,
            "steepness": 0.05,
            "mode": 1,
            "s": 1.6,
            "periods": 1.0,
            "taylor_floor": 0.5,
            "eps_list": [1e-3, 1e-4, 0.0],
            "eps_steps": 40,
        }
    },
    "contraction": {"contraction": {"eps_list": [1e-2, 1e-3, 1e-4], "steepness": 0.1, "decay": 3.0, "s": 2.0}},
}


def _merge(dst: dict, src: dict):
    for sec, vals in src.items():
        dst.setdefault(sec, {}).update(vals)
    return dst


def defaults(experiment: str) -> dict:
    if experiment not in EXPERIMENTS:
        raise ConfigInvalid("experiment", f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    return _merge(copy.deepcopy(BASE), copy.deepcopy(EXTRA[experiment]))


def parse_value(text: str):
    t = text.strip()
    if t.startswith("[") and t.endswith("]"):
        inner = t[1:-1].strip()
        return [parse_value(p) for p in inner.split(",")] if inner else []
    low = t.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    if len(t) >= 2 and t[0] == t[-1] and t[0] in "\"'":
        return t[1:-1]
    return t


def parse_assignment(line: str, where: str = "--set"):
    if "=" not in line:
        raise ConfigInvalid(where, f"expected 'section.key = value', got {line!r}")
    key, value = line.split("=", 1)
    key = key.strip()
    if key.count(".") != 1 or not all(key.split(".")):
        raise ConfigInvalid(key or where, "keys must have the form section.key")
    return key, parse_value(value)


def read_config_file(path) -> list:
    out = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(parse_assignment(line, f"{path}:{lineno}"))
    return out


@dataclass
class ExperimentConfig:
    experiment: str
    values: dict = field(default_factory=dict)

    def get(self, key: str):
        sec, name = key.split(".")
        return self.values[sec][name]

    def section(self, name: str) -> dict:
        return self.values.get(name, {})

    @property
    def seed(self) -> int:
        return self.get("run.seed")

    @property
    def output_dir(self) -> Path:
        return Path(self.get("run.output_dir"))

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, **copy.deepcopy(self.values)}

    def to_lines(self) -> list:
        lines = []
        for sec, vals in self.values.items():
            for k, v in vals.items():
                if isinstance(v, list):
                    v = "[" + ", ".join(str(x) for x in v) + "]"
                lines.append(f"{sec}.{k} = {v}")
        return lines


def _require(cond, key, msg):
    if not cond:
        raise ConfigInvalid(key, msg)


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    v = cfg.values
    n = v["grid"]["n"]
    _require(isinstance(n, int) and not isinstance(n, bool) and n >= 16 and n & (n - 1) == 0, "grid.n", f"must be a power of two >= 16, got {n!r}")
    _require(v["grid"]["dim"] in (1, 2), "grid.dim", "must be 1 or 2")
    _require(_is_number(v["grid"]["L"]) and v["grid"]["L"] > 0, "grid.L", "must be a positive number")
    _require(_is_number(v["physics"]["g"]) and v["physics"]["g"] > 0, "physics.g", "must be positive")
    _require(_is_number(v["physics"]["h"]) and v["physics"]["h"] > 0, "physics.h", "must be positive")
    _require(
        v["physics"]["bottom_kind"] in ("flat_bottom", "infinite_depth_truncation"),
        "physics.bottom_kind",
        "must be flat_bottom or infinite_depth_truncation",
    )
    _require(_is_number(v["physics"]["eps"]) and v["physics"]["eps"] >= 0, "physics.eps", "must be >= 0")
    nz = v["numerics"]["nz"]
    _require(isinstance(nz, int) and nz >= 4, "numerics.nz", "must be an integer >= 4")
    tol = v["numerics"]["krylov_tol"]
    _require(_is_number(tol) and 0 < tol < 1, "numerics.krylov_tol", "must lie in (0, 1)")
    _require(_is_number(v["numerics"]["cfl"]) and v["numerics"]["cfl"] > 0, "numerics.cfl", "must be positive")
    d = v["numerics"]["delta"]
    _require(d == "auto" or (_is_number(d) and d > 0), "numerics.delta", "must be 'auto' or a positive number")
    _require(isinstance(v["run"]["seed"], int) and v["run"]["seed"] >= 0, "run.seed", "must be a nonnegative integer")
    _require(isinstance(v["run"]["workers"], int) and v["run"]["workers"] >= 1, "run.workers", "must be >= 1")
    if cfg.experiment == "evolve":
        _require(v["evolve"]["scenario"] in SCENARIOS, "evolve.scenario", f"must be one of {', '.join(SCENARIOS)}")
        _require(isinstance(v["evolve"]["steps"], int) and v["evolve"]["steps"] >= 1, "evolve.steps", "must be >= 1")
    if cfg.experiment == "dn_check":
        modes = v["dn_check"]["modes"]
        _require(isinstance(modes, list) and all(isinstance(k, int) and 0 < k < n // 2 for k in modes), "dn_check.modes", "must be integers in (0, n/2)")
    return cfg


def load_config(experiment: str, path=None, overrides=(), env=None) -> ExperimentConfig:
    """Defaults, then the file, then ``--set`` overrides, then PARAWAVE_OUT."""
    values = defaults(experiment)
    assignments = read_config_file(path) if path else []
    assignments += [parse_assignment(o) for o in overrides]
    for key, val in assignments:
        sec, name = key.split(".")
        if sec not in values or name not in values[sec]:
            raise ConfigInvalid(key, f"unknown setting for experiment {experiment}")
        values[sec][name] = val
    env = os.environ if env is None else env
    if env.get("PARAWAVE_OUT"):
        values["run"]["output_dir"] = env["PARAWAVE_OUT"]
    return validate(ExperimentConfig(experiment, values))
