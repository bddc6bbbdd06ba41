"""Experiment configuration: JSON file, schema check, command-line overrides."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from importlib import resources

import jsonschema

from .grid import GridSpec
from .variational import MinimizeParams

DEFAULTS = {
    "grid": {"dim_n": 2, "dim_m": 1, "per_unit": None, "pad": 4},
    "constants": {
        "c0": 0.1,
        "C_cfg": 10.0,
        "eps_bar": 0.05,
        "zero_tol": None,
        "tol": None,
        "gamma": None,
        "slope_margin": 1e-4,
        "shrink_max": 0.99,
        "iof_slack_nodes": 4.0,
        "fbgrad_C": 3.0,
    },
    "minimize": {
        "continuation_schedule": [0.2, 0.1, 0.05, 0.02],
        "max_sweeps": 400,
        "max_active_set_iter": 60,
        "sharpen": True,
        "coarse_start": True,
    },
    "certify": {
        "probe_budget": 64,
        "curvature_bound": 0.25,
        "n_dirs": 512,
        "k_max": 3,
        "min_radius_nodes": 8,
    },
    "seed": 0,
}


class ConfigError(ValueError):
    """Configuration file unreadable or invalid."""


def load_schema(name):
    text = resources.files("fblab").joinpath("schemas", name).read_text()
    return json.loads(text)


@dataclass(frozen=True)
class Constants:
    c0: float = 0.1
    C_cfg: float = 10.0
    eps_bar: float = 0.05
    zero_tol: float | None = None
    tol: float | None = None
    gamma: float | None = None
    slope_margin: float = 1e-4
    shrink_max: float = 0.99
    iof_slack_nodes: float = 4.0
    fbgrad_C: float = 3.0


@dataclass(frozen=True)
class CertifyParams:
    probe_budget: int = 64
    curvature_bound: float = 0.25
    n_dirs: int = 512
    k_max: int = 3
    min_radius_nodes: float = 8


@dataclass(frozen=True)
class LabConfig:
    grid: GridSpec
    constants: Constants = field(default_factory=Constants)
    minimize: MinimizeParams = field(default_factory=MinimizeParams)
    certify: CertifyParams = field(default_factory=CertifyParams)
    seed: int = 0
    pad: int = 4

    @classmethod
    def from_dict(cls, raw=None):
        """Merge ``raw`` over the defaults after validating it against the schema."""
        raw = {} if raw is None else raw
        try:
            jsonschema.validate(raw, load_schema("config.schema.json"))
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
        merged = copy.deepcopy(DEFAULTS)
        for key, val in raw.items():
            if isinstance(val, dict):
                merged[key].update(val)
            else:
                merged[key] = val
        g = merged["grid"]
        h = None if g["per_unit"] is None else 1.0 / g["per_unit"]
        try:
            spec = GridSpec.unit(g["dim_n"], g["dim_m"], h, pad=g["pad"])
            mp = dict(merged["minimize"])
            mp["continuation_schedule"] = tuple(mp["continuation_schedule"])
            mp["tol"] = merged["constants"]["tol"]
            minimize = MinimizeParams(**mp)
        except ValueError as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        return cls(
            spec, Constants(**merged["constants"]), minimize,
            CertifyParams(**merged["certify"]), int(merged["seed"]), int(g["pad"]),
        )

    @classmethod
    def load(cls, path=None, overrides=None):
        """Read a JSON file (optional) and apply dotted-key ``overrides`` on top."""
        raw = {}
        if path is not None:
            try:
                with open(path) as fh:
                    raw = json.load(fh)
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
            if not isinstance(raw, dict):
                raise ConfigError("config must be a JSON object")
        for key, val in (overrides or {}).items():
            if val is None:
                continue
            node = raw
            *parents, leaf = key.split(".")
            for p in parents:
                node = node.setdefault(p, {})
            node[leaf] = val
        return cls.from_dict(raw)

    @property
    def h(self):
        return self.grid.h

    def to_dict(self):
        mp = asdict(self.minimize)
        mp["continuation_schedule"] = list(mp["continuation_schedule"])
        mp.pop("tol", None)
        return {
            "grid": {
                "dim_n": self.grid.dim_n,
                "dim_m": self.grid.dim_m,
                "per_unit": int(round(1.0 / self.grid.h)),
                "pad": self.pad,
            },
            "constants": asdict(self.constants),
            "minimize": mp,
            "certify": asdict(self.certify),
            "seed": self.seed,
        }
