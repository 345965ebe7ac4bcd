"""JSON experiment configuration."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

from .errors import InvalidInput
from .grid import Domain
from .problem import (DEFAULT_LEVELS, NonlinearitySpec, ProblemSpec, SourceSpec, map_from_dict)

CHECKS = ("talenti", "bounds", "uniqueness", "equiintegrability", "energy")

DEFAULTS = {
    "problem": {
        "s": 0.5,
        "gamma": 0.5,
        "q": 1.0,
        "theta": None,
        "m": 2.0,
        "mode": "model",
        "f": {"kind": "constant", "value": 1.0},
        "levels": list(DEFAULT_LEVELS),
        "k_start": 10.0,
        "h_form": None,
        "constants": {},
    },
    "grid": {"N": 64, "domain": {"kind": "interval", "bounds": [-1.0, 1.0]}},
    "checks": {"talenti": True, "bounds": True, "uniqueness": False,
               "equiintegrability": True, "energy": True},
    "tolerances": {"newton": 1e-10, "levels": 1e-8, "talenti": None, "max_newton": 50},
    "output": "mixsing-out",
}

CONSTANT_KEYS = ("C_low", "C_up", "s_low", "s_up", "nu", "s1")


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "f":
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass
class ExperimentConfig:
    problem: dict
    grid: dict
    checks: dict
    tolerances: dict
    output: str
    raw: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {"problem": self.problem, "grid": self.grid, "checks": self.checks,
                "tolerances": self.tolerances, "output": self.output}

    def domain(self) -> Domain:
        return Domain.from_dict(self.grid["domain"])

    def problem_spec(self) -> ProblemSpec:
        p = self.problem
        consts = {k: float(v) for k, v in p.get("constants", {}).items()}
        mode = p.get("mode", "model")
        kw = dict(gamma=float(p["gamma"]), q=float(p["q"]),
                  theta=None if p.get("theta") is None else float(p["theta"]),
                  mode=mode, absorption_off=bool(p.get("absorption_off", False)), **consts)
        if mode == "custom":
            kw.update(g=map_from_dict(p["g"], "g"), h=map_from_dict(p["h"], "h"),
                      singular_at_zero=bool(p.get("singular_at_zero", p["h"].get("kind") == "power")),
                      descriptors={"g": p["g"], "h": p["h"]})
        nl = NonlinearitySpec(**kw)
        return ProblemSpec(self.domain(), float(p["s"]), nl, SourceSpec.from_dict(p["f"]),
                           m=float(p["m"]), levels=tuple(float(x) for x in p["levels"]),
                           k_start=float(p["k_start"]), h_form=p.get("h_form"),
                           tol_newton=float(self.tolerances["newton"]),
                           tol_levels=float(self.tolerances["levels"]),
                           max_newton=int(self.tolerances["max_newton"]))


def load_config(source) -> ExperimentConfig:
    """Build a config from a path, a JSON string or a dict, filling defaults."""
    if isinstance(source, dict):
        raw = source
    else:
        text = str(source)
        try:
            if text.lstrip().startswith("{"):
                raw = json.loads(text)
            else:
                with open(text) as fh:
                    raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInput(f"cannot read config: {exc}", code="config-parse") from exc
    if not isinstance(raw, dict):
        raise InvalidInput("config must be a JSON object", code="config-parse")
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise InvalidInput(f"unknown config sections {sorted(unknown)}", code="config-parse")
    merged = _merge(DEFAULTS, raw)
    bad = set(merged["checks"]) - set(CHECKS)
    if bad:
        raise InvalidInput(f"unknown checks {sorted(bad)}", code="config-parse")
    bad = set(merged["problem"].get("constants", {})) - set(CONSTANT_KEYS)
    if bad:
        raise InvalidInput(f"unknown constants {sorted(bad)}", code="config-parse")
    for key, val in merged["tolerances"].items():
        if val is not None and not val > 0:
            raise InvalidInput(f"tolerance {key} must be positive", code="config-parse")
    cfg = ExperimentConfig(merged["problem"], merged["grid"], merged["checks"],
                           merged["tolerances"], str(merged["output"]), raw)
    cfg.problem_spec()  # presets and ranges are checked eagerly
    return cfg


def set_path(d: dict, dotted: str, value):
    """Return a copy of ``d`` with ``a.b.c`` set to ``value``."""
    out = copy.deepcopy(d)
    node = out
    keys = dotted.split(".")
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value
    return out
