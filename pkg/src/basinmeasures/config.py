"""Run configuration: a single JSON document with per-model defaults and dotted overrides."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .core import ConfigurationError
from .integrate import IntegratorConfig
from .models import FAMILIES

# Per-model defaults. Sample counts follow the case-study conventions:
# 10^4 for a single point, 1000 per wagon sweep point, 2000 per fish point.
MODEL_DEFAULTS: dict[str, dict] = {
    "solow": {
        "attractor": {"capture_radius": 0.01, "capture_norm": "euclidean", "dwell_time": 0.0},
        "perturbation": {"count": 2000, "std": [1.5], "frozen_dims": []},
        "distance": {"kind": "euclidean"},
        "measures": {"tau": 35.0, "t_eps": 1.0,
                     "restricted": {"scale": "equilibrium", "radius_sq": 0.25}},
        "sweep": {"count": 2000},
    },
    "wagon": {
        "attractor": {"capture_radius": 0.01, "capture_norm": "euclidean", "dwell_time": 0.0},
        "perturbation": {"count": 10_000, "std": [5.0, 5.0], "frozen_dims": []},
        "distance": {"kind": "energy"},
        "measures": {"tau": 20.0, "t_eps": 1.0,
                     "restricted": {"scale": [1.0, 1.0], "radius_sq": 1.0}},
        "sweep": {"count": 1000},
    },
    "fish": {
        "attractor": {"capture_radius": 0.1, "capture_norm": "relative-ellipsoid", "dwell_time": 0.0},
        "perturbation": {"count": 2000, "std_rel": [0.5, 0.5, 0.5], "frozen_dims": []},
        "distance": {"kind": "relative"},
        "measures": {"tau": 5.0, "t_eps": 1.0,
                     "restricted": {"scale": "equilibrium", "radius_sq": 0.25}},
        "sweep": {"count": 2000},
    },
}

BASE = {
    "model": {"name": "wagon", "params": {}},
    "attractor": "auto",
    "perturbation": {"seed": 0},
    "distance": {},
    "measures": {},
    "integrator": {},
    "sweep": None,
    "pareto": None,
    "output": {"dir": "out"},
    "workers": 1,
}

TOP_KEYS = set(BASE)


def _merge(base: dict, extra: Mapping) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_value(text: str) -> Any:
    """Interpret an override value as JSON when possible, else as a plain string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def coerce_number(v: Any) -> Any:
    """Accept "inf", "-inf" and numeric strings where JSON cannot express the value."""
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            return v
    return v


def set_path(doc: dict, dotted: str, value: Any) -> None:
    """Set ``doc["a"]["b"] = value`` for ``dotted = "a.b"``, creating mappings on the way."""
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = value


@dataclass(frozen=True)
class RunConfig:
    """Validated, fully defaulted configuration document."""

    doc: dict

    @classmethod
    def from_dict(cls, raw: Mapping, overrides: Mapping[str, Any] | None = None) -> "RunConfig":
        unknown = set(raw) - TOP_KEYS
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
        user = copy.deepcopy(dict(raw))
        for path, value in (overrides or {}).items():
            set_path(user, path, value)
        name = user.get("model", {}).get("name", BASE["model"]["name"])
        if name not in FAMILIES:
            raise ConfigurationError(f"unknown model {name!r}; choose from {sorted(FAMILIES)}")
        doc = _merge(BASE, MODEL_DEFAULTS[name])
        doc = _merge(doc, {k: v for k, v in user.items() if k not in ("sweep", "pareto")})
        for key in ("sweep", "pareto"):
            if user.get(key) is not None:
                doc[key] = _merge(MODEL_DEFAULTS[name].get("sweep", {}) if key == "sweep" else {}, user[key])
            else:
                doc[key] = None
        cfg = cls(doc)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, overrides: Mapping[str, Any] | None = None) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw, overrides)

    # convenient accessors
    @property
    def model_name(self) -> str:
        return self.doc["model"]["name"]

    @property
    def model_params(self) -> dict:
        return {k: coerce_number(v) for k, v in self.doc["model"].get("params", {}).items()}

    @property
    def seed(self) -> int:
        return int(self.doc["perturbation"]["seed"])

    @property
    def count(self) -> int:
        return int(self.doc["perturbation"]["count"])

    @property
    def workers(self) -> int:
        return int(self.doc["workers"])

    @property
    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(**self.doc["integrator"])

    def validate(self) -> None:
        module, params_cls = FAMILIES[self.model_name]
        fields = set(params_cls.__dataclass_fields__)
        bad = set(self.model_params) - fields
        if bad:
            raise ConfigurationError(f"model {self.model_name!r} has no parameters {sorted(bad)}")
        try:
            params_cls(**self.model_params)
            self.integrator
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc
        if self.count < 1:
            raise ConfigurationError("perturbation.count must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("perturbation.seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")
        meas = self.doc["measures"]
        if not meas.get("tau", 0) > 0 or not meas.get("t_eps", 0) > 0:
            raise ConfigurationError("measures.tau and measures.t_eps must be positive")
        sweep = self.doc["sweep"]
        if sweep is not None:
            if "param" not in sweep:
                raise ConfigurationError("sweep.param is required")
            for name in sweep_params(sweep):
                if name not in fields:
                    raise ConfigurationError(f"model {self.model_name!r} has no parameter {name!r}")
            if not sweep_values(sweep):
                raise ConfigurationError("sweep range is empty")
            if int(sweep.get("count", 1)) < 1:
                raise ConfigurationError("sweep.count must be at least 1")
        pareto = self.doc["pareto"]
        if pareto is not None:
            from .models.fish import STRATEGIES

            if self.model_name != "fish":
                raise ConfigurationError("pareto comparisons are defined for the fish model")
            strategies = pareto.get("strategies", ["equal", "adult"])
            for s in strategies:
                if s not in STRATEGIES:
                    raise ConfigurationError(f"unknown harvest strategy {s!r}; choose from {sorted(STRATEGIES)}")
            grids = strategies.values() if isinstance(strategies, dict) else [pareto]
            if not all(sweep_values(g) for g in grids):
                raise ConfigurationError("pareto range is empty")


def sweep_params(spec: Mapping) -> list[str]:
    """Names set to the swept value; a list ties several parameters together (e.g. h_J = h_A)."""
    names = spec["param"]
    names = [names] if isinstance(names, str) else list(names)
    if not names:
        raise ConfigurationError("sweep.param names no parameter")
    return names


def sweep_values(spec: Mapping) -> list[float]:
    """Grid of parameter values: explicit ``values`` or ``start``/``stop``/``step`` (stop inclusive)."""
    if "values" in spec:
        return sorted(float(v) for v in spec["values"])
    try:
        start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
    except KeyError as exc:
        raise ConfigurationError(f"range needs start, stop and step (missing {exc.args[0]})") from None
    if not step > 0:
        raise ConfigurationError("step must be positive")
    n = int(round((stop - start) / step + 1e-9)) + 1 if stop >= start else 0
    # round to suppress accumulated representation error in the grid
    return [round(start + i * step, 12) for i in range(n)]
