"""JSON configuration documents and CSV output."""

from __future__ import annotations

import csv
import json
from typing import Any, Iterable, Optional

import numpy as np
from jsonschema import Draft202012Validator

from .model import (
    ExplicitGamma,
    Linear,
    ModelSpec,
    PowerLaw,
    SigmaCorrelation,
    Tabulated,
)
from .sde import SimConfig

SCHEMA_VERSION = 1

_vector = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}, "minItems": 1}

_competition = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"kind": {"const": "linear"}, "kappa": {"type": "number"}},
            "required": ["kind", "kappa"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "power"},
                "kappa": {"type": "number"},
                "p": {"type": "number"},
            },
            "required": ["kind", "kappa", "p"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "table"}, "x": _vector, "y": _vector},
            "required": ["kind", "x", "y"],
            "additionalProperties": False,
        },
    ]
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "patchdyn configuration",
    "type": "object",
    "properties": {
        "model": {
            "type": "object",
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "a": _vector,
                "D": _matrix,
                "competition": {"oneOf": [_competition, {"type": "array", "items": _competition}]},
                "noise": {
                    "oneOf": [
                        {
                            "type": "object",
                            "properties": {"gamma": _matrix},
                            "required": ["gamma"],
                            "additionalProperties": False,
                        },
                        {
                            "type": "object",
                            "properties": {"sigma": _vector, "R": _matrix},
                            "required": ["sigma", "R"],
                            "additionalProperties": False,
                        },
                        {
                            "type": "object",
                            "properties": {"sigma": _vector, "rho": {"type": "number"}},
                            "required": ["sigma", "rho"],
                            "additionalProperties": False,
                        },
                    ]
                },
            },
            "required": ["a", "D", "competition", "noise"],
            "additionalProperties": False,
        },
        "sim": {
            "type": "object",
            "properties": {
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "t_end": {"type": "number", "exclusiveMinimum": 0},
                "burn_in": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "scheme": {"enum": ["euler_log", "euler_clamp"]},
                "record_stride": {"type": ["integer", "null"], "minimum": 1},
            },
            "additionalProperties": False,
        },
        "analysis": {
            "type": "object",
            "properties": {
                "eta": {"type": "number", "exclusiveMinimum": 0},
                "band": {"type": "number", "minimum": 0},
                "checkpoints": _vector,
                "x0": _vector,
                "y0": _vector,
            },
            "additionalProperties": False,
        },
    },
    "required": ["model"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Malformed or schema-invalid configuration."""


def _where(err) -> str:
    path = ".".join(str(p) for p in err.absolute_path)
    return path or "<root>"


def _pick(err):
    """Most informative error of a ``oneOf`` failure, from the branch that came closest."""
    while err.context:
        branches: dict = {}
        for sub in err.context:
            branches.setdefault(sub.relative_schema_path[0], []).append(sub)
        best = min(branches.values(), key=len)
        extra = [e for e in best if e.validator == "additionalProperties"]
        err = extra[0] if extra else max(best, key=lambda e: len(e.absolute_path))
    return err


def check_config(doc: dict) -> None:
    """Raise :class:`ConfigError` naming the offending path of the first schema violation."""
    errors = list(Draft202012Validator(CONFIG_SCHEMA).iter_errors(doc))
    if not errors:
        return
    err = _pick(min(errors, key=lambda e: list(map(str, e.absolute_path))))
    where = _where(err)
    if err.validator == "additionalProperties":
        unknown = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        where = ", ".join(f"{where}.{k}" if where != "<root>" else k for k in unknown)
        raise ConfigError(f"config error: unknown key {where}")
    raise ConfigError(f"config error at {where}: {err.message}")


def _competition_from(d: dict):
    kind = d["kind"]
    if kind == "linear":
        return Linear(d["kappa"])
    if kind == "power":
        return PowerLaw(d["kappa"], d["p"])
    return Tabulated(d["x"], d["y"])


def _competition_to(f) -> dict:
    if isinstance(f, Linear):
        return {"kind": "linear", "kappa": f.kappa}
    if isinstance(f, PowerLaw):
        return {"kind": "power", "kappa": f.kappa, "p": f.p}
    return {"kind": "table", "x": list(map(float, f.x)), "y": list(map(float, f.y))}


def spec_from_dict(m: dict) -> ModelSpec:
    comp = m["competition"]
    comp = _competition_from(comp) if isinstance(comp, dict) else tuple(map(_competition_from, comp))
    noise = m["noise"]
    if "gamma" in noise:
        ns = ExplicitGamma(noise["gamma"])
    elif "R" in noise:
        ns = SigmaCorrelation(noise["sigma"], noise["R"])
    else:
        k = len(noise["sigma"])
        R = np.full((k, k), float(noise["rho"]))
        np.fill_diagonal(R, 1.0)
        ns = SigmaCorrelation(noise["sigma"], R)
    spec = ModelSpec(a=m["a"], competition=comp, D=m["D"], noise=ns)
    if "n" in m and m["n"] != spec.n:
        raise ConfigError(f"config error at model.n: {m['n']} does not match len(a) = {spec.n}")
    return spec


def spec_to_dict(spec: ModelSpec) -> dict:
    noise = spec.noise
    if isinstance(noise, SigmaCorrelation):
        nd = {"sigma": list(map(float, noise.sigma)), "R": np.asarray(noise.R, float).tolist()}
    else:
        nd = {"gamma": np.asarray(spec.gamma, float).tolist()}
    return {
        "n": spec.n,
        "a": spec.a.tolist(),
        "D": spec.D.tolist(),
        "competition": [_competition_to(f) for f in spec.competition],
        "noise": nd,
    }


def sim_from_dict(s: Optional[dict]) -> SimConfig:
    return SimConfig(**(s or {}))


def sim_to_dict(cfg: SimConfig) -> dict:
    return {
        "dt": cfg.dt,
        "t_end": cfg.t_end,
        "burn_in": cfg.burn_in,
        "seed": cfg.seed,
        "scheme": cfg.scheme.value,
        "record_stride": cfg.record_stride,
    }


class Config:
    """Parsed configuration document."""

    def __init__(self, spec: ModelSpec, sim: SimConfig, analysis: dict):
        self.spec = spec
        self.sim = sim
        self.analysis = analysis

    @classmethod
    def from_dict(cls, doc: Any) -> "Config":
        check_config(doc)
        try:
            spec = spec_from_dict(doc["model"])
            sim = sim_from_dict(doc.get("sim"))
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"config error: {exc}") from exc
        return cls(spec, sim, dict(doc.get("analysis", {})))

    def to_dict(self) -> dict:
        return {"model": spec_to_dict(self.spec), "sim": sim_to_dict(self.sim), "analysis": self.analysis}


def load_config(path) -> Config:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return Config.from_dict(doc)


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path, subcommand: str, seed: int, header: list, rows: Iterable) -> None:
    """CSV with a provenance comment line and 17-significant-digit floats."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# patchdyn {subcommand} seed={seed} schema={SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path) -> tuple:
    """Header and float rows of a file written by :func:`write_csv`."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    r = csv.reader(lines)
    header = next(r)
    return header, [row for row in r]


def dumps(obj) -> str:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.generic):
            return o.item()
        raise TypeError(type(o).__name__)

    return json.dumps(obj, default=default, indent=2, sort_keys=True)


def write_path_csv(path, out, subcommand: str = "simulate") -> None:
    """Recorded trajectory as ``t,x1,...`` (or ``t,y1,...,s`` / ``t,u``)."""
    rows = (np.concatenate([[t], s]) for t, s in zip(path.times, path.states))
    write_csv(out, subcommand, path.seed, path.columns(), rows)


def write_density_csv(density, out, seed: int = 0) -> None:
    """Stationary density on its grid as ``y,log_density,density``."""
    rows = zip(density.grid, density.log_density, np.exp(density.log_density))
    write_csv(out, "density", seed, ["y", "log_density", "density"], rows)
