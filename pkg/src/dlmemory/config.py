"""YAML scenario configuration with units, validated in one pass.

Every physical value may be a bare number (SI) or a string ``"<expr> <unit>"``
such as ``"80 us"``, ``"2 MHz"`` (cyclic, converted to rad/s), ``"pi/4"`` or
``"45 deg"``. All values are converted to SI once at parse time; the parsed
config stores plain floats.
"""
from __future__ import annotations

import ast
import copy
import hashlib
import json
import math
import operator
from dataclasses import dataclass, field

import yaml

from .controls import Segment, segment_problems

SCENARIOS = ("store-release", "cat-entangle", "single-photon", "algebra-check", "adiabatic-scan",
             "propagate-1d", "pulse-matching", "bandwidth-scan")

_UNITS = {
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9, "ps": 1e-12},
    "rate": {"rad/s": 1.0, "1/s": 1.0, "/s": 1.0, "s^-1": 1.0, "krad/s": 1e3, "Mrad/s": 1e6,
             "Grad/s": 1e9, "Hz": 2 * math.pi, "kHz": 2e3 * math.pi, "MHz": 2e6 * math.pi,
             "GHz": 2e9 * math.pi},
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "nm": 1e-9, "km": 1e3},
    "velocity": {"m/s": 1.0, "km/s": 1e3},
    "angle": {"rad": 1.0, "deg": math.pi / 180},
    "number": {},
}

# section -> key -> kind
SCHEMA = {
    "engine": {"g1": "rate", "g2": "rate", "N": "number", "gamma": "rate", "cutoff": "int",
               "c": "velocity", "L": "length", "nz": "int", "pad": "length"},
    "protocol": {"input": "str", "alpha": "number", "sign": "sign", "input_mode": "int", "phi_e": "angle",
                 "ramp": "time", "hold": "time", "dt": "time", "omega_max": "rate", "omega_knee": "rate",
                 "fast_fraction": "number", "samples": "int"},
    "options": {"draws": "int", "ramps": "time_list", "thetas": "angle_list", "theta": "angle",
                "theta0": "angle", "theta1": "angle", "omega1": "rate", "omega2": "rate", "tau": "time",
                "omega": "rate", "record_every": "int", "phi_grid": "angle_list", "release_ramp": "time",
                "release_hold": "time"},
    "output": {"dir": "str", "csv": "bool", "npz": "bool"},
}
TOP_KEYS = {"scenario", "seed", "engine", "protocol", "options", "output", "schedule", "tolerances"}
SEGMENT_KEYS = {"t_start": "time", "t_end": "time", "omega1": "rate_pair", "omega2": "rate_pair", "shape": "str"}

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
        ast.Pow: operator.pow, ast.USub: operator.neg, ast.UAdd: operator.pos}


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config:\n  " + "\n  ".join(self.problems))


def _eval_expr(text: str) -> float:
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(f"unsupported expression {text!r}")
    return ev(ast.parse(text.strip(), mode="eval"))


def parse_quantity(value, dim: str) -> float:
    """Number or ``"<expr> <unit>"`` string to an SI float."""
    if isinstance(value, bool):
        raise ValueError(f"expected a {dim} value, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"expected a {dim} value, got {value!r}")
    text = value.strip()
    units = _UNITS[dim]
    for unit in sorted(units, key=len, reverse=True):
        if text.endswith(unit) and (len(text) == len(unit) or not text[-len(unit) - 1].isalnum()):
            return _eval_expr(text[: -len(unit)]) * units[unit]
    try:
        return _eval_expr(text)
    except (ValueError, SyntaxError):
        pass
    tail = text.split()[-1] if text.split() else text
    raise ValueError(f"unit {tail!r} is not a {dim} unit (allowed: {', '.join(units) or 'none'})")


def _convert(kind: str, value):
    if kind in ("time", "rate", "length", "velocity", "angle", "number"):
        return parse_quantity(value, kind)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"expected an integer, got {value!r}")
        return int(value)
    if kind == "str":
        if not isinstance(value, str):
            raise ValueError(f"expected a string, got {value!r}")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ValueError(f"expected true/false, got {value!r}")
        return value
    if kind == "sign":
        if value in ("+", 1, "plus"):
            return 1
        if value in ("-", -1, "minus"):
            return -1
        raise ValueError(f"sign must be + or -, got {value!r}")
    if kind.endswith("_list"):
        if not isinstance(value, (list, tuple)):
            raise ValueError(f"expected a list, got {value!r}")
        return [parse_quantity(v, kind[:-5]) for v in value]
    if kind == "rate_pair":
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ValueError(f"expected [start, end], got {value!r}")
        return [parse_quantity(v, "rate") for v in value]
    raise AssertionError(kind)


@dataclass
class ScenarioConfig:
    scenario: str
    seed: int = 0
    engine: dict = field(default_factory=dict)
    protocol: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    schedule: list | None = None
    tolerances: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"scenario": self.scenario, "seed": self.seed}
        for name in ("engine", "protocol", "options", "output", "tolerances"):
            if getattr(self, name):
                d[name] = copy.deepcopy(getattr(self, name))
        if self.schedule is not None:
            d["schedule"] = copy.deepcopy(self.schedule)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _check_ranges(cfg: dict, problems: list) -> None:
    eng, prot, opt = cfg.get("engine", {}), cfg.get("protocol", {}), cfg.get("options", {})
    for k in ("g1", "g2", "c", "L"):
        if k in eng and not eng[k] > 0:
            problems.append(f"engine.{k}: must be positive")
    if "N" in eng and not eng["N"] >= 1:
        problems.append("engine.N: must be >= 1")
    if "gamma" in eng and not eng["gamma"] >= 0:
        problems.append("engine.gamma: must be non-negative")
    if "cutoff" in eng and not 1 <= eng["cutoff"] <= 16:
        problems.append("engine.cutoff: must lie in 1..16")
    if "nz" in eng and not eng["nz"] >= 3:
        problems.append("engine.nz: must be >= 3")
    if "phi_e" in prot and not 0 <= prot["phi_e"] <= math.pi / 2 + 1e-12:
        problems.append(f"protocol.phi_e: {prot['phi_e']} rad outside [0, pi/2]")
    if "input" in prot and prot["input"] not in ("coherent", "cat", "single-photon"):
        problems.append(f"protocol.input: {prot['input']!r} must be coherent, cat or single-photon")
    if "input_mode" in prot and prot["input_mode"] not in (1, 2):
        problems.append("protocol.input_mode: must be 1 or 2")
    for k in ("ramp", "dt", "omega_max", "omega_knee", "samples"):
        if k in prot and not prot[k] > 0:
            problems.append(f"protocol.{k}: must be positive")
    if "hold" in prot and not prot["hold"] >= 0:
        problems.append("protocol.hold: must be non-negative")
    if "fast_fraction" in prot and not 0 < prot["fast_fraction"] < 1:
        problems.append("protocol.fast_fraction: must lie in (0, 1)")
    for k in ("theta", "theta0", "theta1"):
        if k in opt and not 0 < opt[k] < math.pi / 2:
            problems.append(f"options.{k}: must lie strictly between 0 and pi/2")
    for k in ("thetas",):
        for v in opt.get(k, []):
            if not 0 < v < math.pi / 2:
                problems.append(f"options.{k}: {v} must lie strictly between 0 and pi/2")
    for v in opt.get("phi_grid", []):
        if not 0 <= v <= math.pi / 2 + 1e-12:
            problems.append(f"options.phi_grid: {v} outside [0, pi/2]")
    for v in opt.get("ramps", []):
        if not v > 0:
            problems.append("options.ramps: durations must be positive")


def validate(raw) -> ScenarioConfig:
    """Validate a raw mapping and convert units; raises ConfigError listing every problem."""
    problems = []
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a mapping"])
    for k in raw:
        if k not in TOP_KEYS:
            problems.append(f"unknown key {k!r}")
    scenario = raw.get("scenario")
    if scenario is None:
        problems.append("missing field 'scenario'")
    elif scenario not in SCENARIOS:
        problems.append(f"unknown scenario {scenario!r} (choose from {', '.join(SCENARIOS)})")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        problems.append("seed must be a non-negative integer")
    out = {}
    for section, keys in SCHEMA.items():
        body = raw.get(section, {}) or {}
        if not isinstance(body, dict):
            problems.append(f"{section}: must be a mapping")
            continue
        parsed = {}
        for k, v in body.items():
            if k not in keys:
                problems.append(f"{section}: unknown key {k!r}")
                continue
            try:
                parsed[k] = _convert(keys[k], v)
            except ValueError as exc:
                problems.append(f"{section}.{k}: {exc}")
        out[section] = parsed
    schedule = None
    if raw.get("schedule") is not None:
        schedule, segs = [], []
        if not isinstance(raw["schedule"], list) or not raw["schedule"]:
            problems.append("schedule: must be a non-empty list of segments")
        else:
            for n, seg in enumerate(raw["schedule"]):
                if not isinstance(seg, dict):
                    problems.append(f"schedule[{n}]: must be a mapping")
                    continue
                parsed, ok = {}, True
                for k in seg:
                    if k not in SEGMENT_KEYS:
                        problems.append(f"schedule[{n}]: unknown key {k!r}")
                for k, kind in SEGMENT_KEYS.items():
                    if k not in seg:
                        if k == "shape":
                            parsed[k] = "cosine"
                            continue
                        problems.append(f"schedule[{n}]: missing field {k!r}")
                        ok = False
                        continue
                    try:
                        parsed[k] = _convert(kind, seg[k])
                    except ValueError as exc:
                        problems.append(f"schedule[{n}].{k}: {exc}")
                        ok = False
                schedule.append(parsed)
                if ok:
                    segs.append(Segment(parsed["t_start"], parsed["t_end"], tuple(parsed["omega1"]),
                                        tuple(parsed["omega2"]), parsed["shape"]))
            if len(segs) == len(raw["schedule"]):
                problems.extend(f"schedule: {p}" for p in segment_problems(segs))
        if scenario is not None and scenario != "propagate-1d":
            problems.append("schedule: only the propagate-1d scenario takes an explicit schedule")
    tolerances = {}
    tol_raw = raw.get("tolerances", {}) or {}
    if not isinstance(tol_raw, dict):
        problems.append("tolerances: must be a mapping")
    else:
        from .scenarios import DEFAULT_TOLERANCES
        allowed = DEFAULT_TOLERANCES.get(scenario, {})
        for k, v in tol_raw.items():
            if k not in allowed:
                problems.append(f"tolerances: unknown metric {k!r} for scenario {scenario!r}")
                continue
            try:
                tolerances[k] = parse_quantity(v, "number")
            except ValueError as exc:
                problems.append(f"tolerances.{k}: {exc}")
    _check_ranges(out, problems)
    if problems:
        raise ConfigError(problems)
    return ScenarioConfig(scenario=scenario, seed=seed, engine=out["engine"], protocol=out["protocol"],
                          options=out["options"], output=out["output"], schedule=schedule, tolerances=tolerances)


def parse_config(text: str) -> ScenarioConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"YAML syntax error: {exc}"]) from exc
    return validate(raw if raw is not None else {})


def serialize(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=False)


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def set_path(raw: dict, dotted: str, value) -> None:
    """Set ``a.b.c`` inside a raw (unparsed) mapping, creating sections as needed."""
    keys = dotted.split(".")
    cur = raw
    for k in keys[:-1]:
        if not isinstance(cur.get(k), dict):
            cur[k] = {}
        cur = cur[k]
    cur[keys[-1]] = value


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``key=value`` strings; values are read as YAML scalars or lists."""
    raw = copy.deepcopy(raw)
    problems = []
    for item in overrides or []:
        if "=" not in item:
            problems.append(f"override {item!r} is not key=value")
            continue
        key, text = item.split("=", 1)
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError:
            value = text
        set_path(raw, key.strip(), value)
    if problems:
        raise ConfigError(problems)
    return raw
