"""Run reports and golden-file regression."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import GoldenMismatch

# per-field tolerances (matched on the last dotted component); (rel, abs)
DEFAULT_TOL = (1e-6, 1e-12)
FIELD_TOL = {
    "fitted_slope": (0.0, 1e-3),
    "slope": (0.0, 1e-3),
    "wall_clock": None,
}


@dataclass
class Criterion:
    name: str
    value: float
    bound: float
    passed: bool
    relation: str = "<="

    def to_dict(self):
        return {"value": self.value, "bound": self.bound, "relation": self.relation, "passed": self.passed}


@dataclass
class RunReport:
    experiment: str
    config: dict
    measured: dict = field(default_factory=dict)
    criteria: list = field(default_factory=list)
    wall_clock: float = 0.0
    artifacts: list = field(default_factory=list)
    golden: dict = field(default_factory=dict)

    def check(self, name: str, value, bound, relation: str = "<=") -> bool:
        value = float(value)
        ok = {"<=": value <= bound, ">=": value >= bound, "==": value == bound}[relation]
        ok = bool(ok) and not math.isnan(value)
        self.criteria.append(Criterion(name, value, float(bound), ok, relation))
        return ok

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": self.config,
            "measured": self.measured,
            "criteria": {c.name: c.to_dict() for c in self.criteria},
            "passed": self.passed,
            "wall_clock": self.wall_clock,
            "artifacts": [str(a) for a in self.artifacts],
            "golden": self.golden,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json() + "\n")
        return path


def flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        elif isinstance(v, (list, tuple)):
            for i, x in enumerate(v):
                if isinstance(x, dict):
                    out.update(flatten(x, f"{key}.{i}."))
                else:
                    out[f"{key}.{i}"] = x
        else:
            out[key] = v
    return out


def _tolerance(key: str, tolerances: dict):
    last = key.rsplit(".", 1)[-1]
    for table in (tolerances, FIELD_TOL):
        if key in table:
            return table[key]
        if last in table:
            return table[last]
    return DEFAULT_TOL


def _close(a, b, tol) -> bool:
    if isinstance(a, bool) or isinstance(b, bool) or isinstance(a, str) or isinstance(b, str):
        return a == b
    if a is None or b is None:
        return a is b
    a, b = float(a), float(b)
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    rel, ab = tol
    return abs(a - b) <= ab + rel * max(abs(a), abs(b))


def golden_payload(report: RunReport) -> dict:
    return {"experiment": report.experiment, "measured": report.measured}


def compare_golden(report: RunReport, golden_path, tolerances=None, bless: bool = False) -> dict:
    """Field-by-field comparison of ``report.measured`` with a golden file.

    Returns ``{field: (golden, current)}`` for fields within tolerance that
    differ at all; raises GoldenMismatch for fields outside tolerance.
    ``bless`` rewrites the golden file instead.
    """
    golden_path = Path(golden_path)
    tolerances = tolerances or {}
    if bless:
        golden_path.parent.mkdir(parents=True, exist_ok=True)
        golden_path.write_text(json.dumps(golden_payload(report), indent=2, sort_keys=True) + "\n")
        return {}
    if not golden_path.exists():
        raise FileNotFoundError(f"golden file {golden_path} does not exist (use --bless to create it)")
    ref = flatten(json.loads(golden_path.read_text())["measured"])
    cur = flatten(report.measured)
    bad, diff = [], {}
    for key in sorted(set(ref) | set(cur)):
        tol = _tolerance(key, tolerances)
        if tol is None:
            continue
        if key not in ref or key not in cur:
            bad.append(key)
            continue
        if ref[key] != cur[key]:
            diff[key] = (ref[key], cur[key])
            if not _close(ref[key], cur[key], tol):
                bad.append(key)
    if bad:
        raise GoldenMismatch(bad)
    return diff
