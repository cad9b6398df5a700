"""Pass/fail reports with worst residuals and witnesses, serializable to JSON."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

SCHEMA_VERSION = "1.0.0"


def report_schema_version():
    return SCHEMA_VERSION


def jsonable(v):
    """Plain JSON data with deterministic float text."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in sorted(v.items(), key=lambda kv: str(kv[0]))}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else v.numerator
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        # 12 significant digits keep reruns byte-identical across BLAS noise
        return float("%.12g" % f)
    if v is None or isinstance(v, str):
        return v
    return str(v)


@dataclass
class Check:
    name: str
    passed: bool
    residual: float | None = None
    witness: object = None
    detail: str = ""

    def to_json(self):
        d = {"name": self.name, "passed": bool(self.passed)}
        if self.residual is not None:
            d["residual"] = jsonable(self.residual)
        if self.witness is not None:
            d["witness"] = jsonable(self.witness)
        if self.detail:
            d["detail"] = self.detail
        return d


@dataclass
class Report:
    subject: str
    checks: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, name, passed, residual=None, witness=None, detail=""):
        c = Check(name, bool(passed), residual, witness, detail)
        self.checks.append(c)
        return c

    def extend(self, other, prefix=""):
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.passed, c.residual, c.witness, c.detail))
        return self

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __bool__(self):
        return self.passed

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self):
        return [c.name for c in self.checks]

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def to_json(self):
        return {"schema_version": SCHEMA_VERSION, "subject": self.subject,
                "passed": self.passed, "checks": [c.to_json() for c in self.checks],
                "meta": jsonable(self.meta)}

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def summary(self):
        lines = ["%s: %s" % (self.subject, "PASS" if self.passed else "FAIL")]
        for c in self.checks:
            r = "" if c.residual is None else " (residual %.3g)" % float(c.residual)
            lines.append("  [%s] %s%s" % ("ok" if c.passed else "FAIL", c.name, r))
        return "\n".join(lines)
