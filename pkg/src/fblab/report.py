"""Experiment reports: deterministic JSON/CSV output validated against the shipped schema."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .config import load_schema

FORMAT = "fblab-report/1"


def plain(obj):
    """JSON-ready copy: numpy scalars/arrays unwrapped, nan -> None, inf -> "inf"."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj):
    return json.dumps(plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


@dataclass
class ExperimentReport:
    command: str
    config: dict
    provenance: dict = field(default_factory=lambda: {"kind": "none"})
    certificates: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    stop_reasons: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    exit_code: int | None = None

    def add(self, name, cert, passed=None):
        """Attach a certificate dict (must carry ``paper_anchor``)."""
        d = dict(cert)
        if "paper_anchor" not in d:
            raise ValueError(f"certificate {name!r} has no paper_anchor")
        if passed is not None:
            d["passed"] = bool(passed)
        d.setdefault("passed", True)
        self.certificates[name] = d
        return d

    @property
    def passed(self):
        return all(c.get("passed", False) for c in self.certificates.values()) and not self.errors

    def to_dict(self):
        code = self.exit_code if self.exit_code is not None else (0 if self.passed else 1)
        return plain({
            "format": FORMAT,
            "version": __version__,
            "command": self.command,
            "config": self.config,
            "provenance": self.provenance,
            "certificates": self.certificates,
            "results": self.results,
            "stop_reasons": self.stop_reasons,
            "errors": self.errors,
            "outputs": sorted(self.outputs),
            "passed": self.passed and code == 0,
            "exit_code": code,
        })

    def validate(self):
        validate_report(self.to_dict())

    def write(self, path):
        d = self.to_dict()
        validate_report(d)
        Path(path).write_text(dumps(d))
        return path


def validate_report(d):
    jsonschema.validate(d, load_schema("report.schema.json"))


def format_float(x):
    """Shortest round-trip text; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return ""
        return repr(x)
    return str(x)


def csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_float(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, columns, rows):
    Path(path).write_text(csv_text(columns, rows))
    return path


CASCADE_COLUMNS = ("k", "radius", "a", "b", "width", "shrink_factor")
SWEEP_COLUMNS = ("eps", "r", "epsilon_new", "pass")
