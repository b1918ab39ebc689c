"""Run configuration: a single JSON document describing the model, the
quadrature and simulation settings, and an optional sweep."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .analysis import QuadratureSettings
from .model import (
    CacheDesign,
    ModelBundle,
    NetworkConfig,
    Popularity,
    SchemeConfig,
    ValidationError,
    db_to_linear,
    validate_inputs,
    zipf_popularity,
)
from .simulator import SimulationSettings

SWEEP_AXES = ("theta", "period_t", "lambda_u")

# Reference operating point used when no config is given.
DEFAULT_MODEL = {
    "lambda_b": 0.01,
    "lambda_u": 0.1,
    "alpha": 4.0,
    "bandwidth_w": 1e7,
    "snr_ratio_db": 30.0,
    "n_files": 5,
    "cache_size": 4,
    "gamma": 2.0,
    "caching": [0.7, 0.2, 0.06, 0.02, 0.02],
    "period_t": 2,
    "rate_theta": 1e6,
}

MODEL_KEYS = (
    "lambda_b",
    "lambda_u",
    "alpha",
    "bandwidth_w",
    "snr_ratio_db",
    "n_files",
    "cache_size",
    "gamma",
    "popularity",
    "caching",
    "period_t",
    "rate_theta",
)


@dataclass(frozen=True)
class Sweep:
    axis: str
    grid: tuple[float, ...]

    def __post_init__(self):
        bad = []
        if self.axis not in SWEEP_AXES:
            bad.append(f"sweep axis one of {SWEEP_AXES} (got {self.axis!r})")
        steps = np.diff(self.grid)
        if len(self.grid) == 0 or not (np.all(steps > 0) or np.all(steps < 0)):
            bad.append(f"sweep grid must be non-empty and strictly monotone (got {list(self.grid)})")
        if bad:
            raise ValidationError(bad)

    @classmethod
    def parse(cls, text: str) -> Sweep:
        """``AXIS:START:STOP:POINTS[:log]``."""
        parts = text.split(":")
        if len(parts) not in (4, 5) or (len(parts) == 5 and parts[4] != "log"):
            raise ValidationError([f"sweep must look like AXIS:START:STOP:POINTS[:log] (got {text!r})"])
        try:
            start, stop, points = float(parts[1]), float(parts[2]), int(parts[3])
        except ValueError as exc:
            raise ValidationError([f"bad sweep {text!r}: {exc}"]) from None
        return cls.from_range(parts[0], start, stop, points, len(parts) == 5)

    @classmethod
    def from_range(cls, axis: str, start: float, stop: float, points: int, log: bool = False) -> Sweep:
        if points < 1:
            raise ValidationError(["sweep needs at least one point"])
        if log:
            if start <= 0 or stop <= 0:
                raise ValidationError(["log sweep needs positive bounds"])
            grid = np.geomspace(start, stop, points)
        else:
            grid = np.linspace(start, stop, points)
        if axis == "period_t":
            grid = np.rint(grid)
        return cls(axis, tuple(float(v) for v in grid))

    @classmethod
    def from_dict(cls, d: dict) -> Sweep:
        if "values" in d:
            return cls(d["axis"], tuple(float(v) for v in d["values"]))
        return cls.from_range(d["axis"], d["start"], d["stop"], d["points"], d.get("log", False))

    def to_dict(self) -> dict:
        return {"axis": self.axis, "values": list(self.grid)}


def default_theta_sweep() -> Sweep:
    return Sweep.from_range("theta", 1e5, 1e7, 20, log=True)


def build_bundle(model: dict) -> ModelBundle:
    """Turn the model fragment of a config into a validated bundle, reporting
    every problem at once."""
    problems = []
    unknown = sorted(set(model) - set(MODEL_KEYS))
    if unknown:
        problems.append(f"unknown model keys: {unknown}")
    missing = [
        k
        for k in ("lambda_b", "lambda_u", "alpha", "bandwidth_w", "snr_ratio_db", "n_files", "cache_size", "caching")
        if k not in model
    ]
    if missing:
        problems.append(f"missing model keys: {missing}")
    if ("gamma" in model) == ("popularity" in model):
        problems.append("give exactly one of gamma or popularity")
    if problems:
        raise ValidationError(problems)

    n, k = int(model["n_files"]), int(model["cache_size"])
    caching = model["caching"]

    def attempt(label, make):
        try:
            return make()
        except ValidationError as exc:
            problems.extend(f"{label}: {v}" for v in exc.violations)
        except (TypeError, KeyError) as exc:
            problems.append(f"{label}: {exc}")
        return None

    net = attempt(
        "network",
        lambda: NetworkConfig(
            float(model["lambda_b"]),
            float(model["lambda_u"]),
            float(model["alpha"]),
            float(model["bandwidth_w"]),
            db_to_linear(float(model["snr_ratio_db"])),
        ),
    )
    if "gamma" in model:
        pop = attempt("popularity", lambda: zipf_popularity(n, float(model["gamma"])))
    else:
        pop = attempt("popularity", lambda: Popularity([float(a) for a in model["popularity"]]))
    if caching and isinstance(caching[0], dict):
        design = attempt(
            "caching", lambda: CacheDesign.sparse(n, k, [(e["members"], e["probability"]) for e in caching])
        )
    else:
        design = attempt("caching", lambda: CacheDesign.dense(n, k, [float(p) for p in caching]))
    scheme = attempt(
        "scheme", lambda: SchemeConfig(model.get("period_t", 1), float(model.get("rate_theta", 0.0)))
    )
    if problems:
        raise ValidationError(problems)
    return validate_inputs(net, pop, design, scheme)


@dataclass
class RunConfig:
    model: dict = field(default_factory=lambda: dict(DEFAULT_MODEL))
    quadrature: QuadratureSettings = field(default_factory=QuadratureSettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    sweep: Sweep | None = None

    def __post_init__(self):
        self.bundle = build_bundle(self.model)

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        d = dict(d)
        quad = d.pop("quadrature", {})
        sim = d.pop("simulation", {})
        sweep = d.pop("sweep", None)
        model = d.pop("model", None)
        if model is None:
            model = {k: d.pop(k) for k in list(d) if k in MODEL_KEYS}
        if d:
            raise ValidationError([f"unknown config keys: {sorted(d)}"])
        try:
            quad_settings = QuadratureSettings(**quad)
            sim_settings = SimulationSettings(**sim)
        except TypeError as exc:
            raise ValidationError([str(exc)]) from None
        return cls(
            model=model,
            quadrature=quad_settings,
            simulation=sim_settings,
            sweep=Sweep.from_dict(sweep) if sweep else None,
        )

    @classmethod
    def load(cls, path) -> RunConfig:
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError([f"{path}: invalid JSON ({exc})"]) from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {"model": dict(self.model)}
        out["quadrature"] = asdict(self.quadrature)
        out["simulation"] = asdict(self.simulation)
        if self.sweep is not None:
            out["sweep"] = self.sweep.to_dict()
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def with_model(self, **changes) -> RunConfig:
        model = dict(self.model)
        model.update(changes)
        return RunConfig(model, self.quadrature, self.simulation, self.sweep)

    def with_simulation(self, **changes) -> RunConfig:
        return RunConfig(self.model, self.quadrature, replace(self.simulation, **changes), self.sweep)

    def with_sweep(self, sweep: Sweep | None) -> RunConfig:
        return RunConfig(self.model, self.quadrature, self.simulation, sweep)

    def at(self, axis: str, value: float) -> RunConfig:
        """Config with one sweep coordinate applied."""
        key = {"theta": "rate_theta", "period_t": "period_t", "lambda_u": "lambda_u"}[axis]
        if axis == "period_t":
            if value != math.floor(value):
                raise ValidationError([f"period_t must be an integer (got {value})"])
            value = int(value)
        return self.with_model(**{key: value})
