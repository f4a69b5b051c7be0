"""Run configuration: grammar, defaults and validation.

Grammar (line oriented)::

    # comment            ; also a comment
    scenario = rabi      top-level keys come before the first section
    [model]
    omega_1 = 9 GHz      value, optionally followed by its unit
    [sweep]
    values = 0.05, 0.1, 0.2

Each key has one unit family; a suffix from another family is an error.
Frequencies accept GHz or MHz and are stored in GHz.  Unknown sections or
keys, duplicate keys and unparsable values are errors naming the line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import CircuitParams, ModelParams, circuit_to_model, ghz_to_angular

SCENARIOS = ("rabi", "correlations", "emission-sweep", "validate", "design")

# unit family -> accepted suffix -> multiplier into the stored unit
UNITS = {
    "freq": {"ghz": 1.0, "mhz": 1e-3},
    "nh": {"nh": 1.0},
    "ff": {"ff": 1.0},
    "uv": {"uv": 1.0, "µv": 1.0, "μv": 1.0},
    "ns": {"ns": 1.0},
    None: {},
}

CANONICAL_SUFFIX = {"freq": "GHz", "nh": "nH", "ff": "fF", "uv": "uV", "ns": "ns"}

# key -> (kind, unit family, lower bound, lower bound inclusive)
SCHEMA = {
    "": {
        "scenario": ("str", None, None, True),
    },
    "model": {
        "omega_1": ("float", "freq", 0.0, False),
        "omega_2": ("float", "freq", 0.0, False),
        "delta": ("float", "freq", 0.0, False),
        "e_j": ("float", "freq", 0.0, True),
        "lambda_1": ("float", None, 0.0, True),
        "lambda_2": ("float", None, 0.0, True),
        "omega_j": ("float", "freq", 0.0, False),
        "kappa": ("float", "freq", 0.0, False),
        "gamma": ("float", "freq", 0.0, True),
        "gamma_over_kappa": ("float", None, 0.0, True),
        "cutoff": ("int", None, 2, True),
    },
    "circuit": {
        "inductance_1": ("float", "nh", 0.0, False),
        "inductance_2": ("float", "nh", 0.0, False),
        "capacitance_1": ("float", "ff", 0.0, False),
        "capacitance_2": ("float", "ff", 0.0, False),
        "e_j0": ("float", "freq", 0.0, False),
        "flux_ratio": ("float", None, 0.0, True),
        "e_c": ("float", "freq", 0.0, False),
        "e_jq": ("float", "freq", 0.0, False),
        "bias": ("float", "uv", 0.0, False),
    },
    "sweep": {
        "parameter": ("str", None, None, True),
        "start": ("float", None, None, True),
        "stop": ("float", None, None, True),
        "count": ("int", None, 1, True),
        "spacing": ("str", None, None, True),
        "values": ("floats", None, None, True),
    },
    "grid": {
        "t_stop": ("float", "ns", 0.0, False),
        "t_points": ("int", None, 2, True),
        "kappa_tau_stop": ("float", None, 0.0, False),
        "tau_points": ("int", None, 2, True),
    },
    "output": {
        "dir": ("str", None, None, True),
    },
    "tolerances": {name: ("float", None, 0.0, True) for name in (
        "rtol", "atol", "resonance", "rwa_threshold", "two_level_threshold", "convergence",
        "displacement", "frank_condon", "laguerre", "regression", "trace", "hermiticity",
        "positivity", "norm", "steady_residual", "long_time")},
}

MODEL_DEFAULTS = {
    "omega_1": 9.0, "omega_2": 7.0, "delta": 5.0, "e_j": 0.5, "lambda_1": 0.2, "lambda_2": 0.2,
    "omega_j": None, "kappa": 0.1, "gamma": None, "gamma_over_kappa": 0.1, "cutoff": 5,
}
CIRCUIT_OWNED = ("omega_1", "omega_2", "delta", "e_j", "lambda_1", "lambda_2", "omega_j")
SWEEPABLE = ("gamma_over_kappa", "kappa", "e_j", "lambda_1", "lambda_2")

TOLERANCE_DEFAULTS = {
    "rtol": 1e-8, "atol": 1e-10, "resonance": 1e-9, "rwa_threshold": 0.05, "two_level_threshold": 10.0,
    "convergence": 1e-6, "displacement": 1e-8, "frank_condon": 1e-12, "laguerre": 1e-10,
    "regression": 1e-8, "trace": 1e-8, "hermiticity": 1e-8, "positivity": 1e-6, "norm": 1e-6,
    "steady_residual": 1e-10, "long_time": 1e-6,
}


@dataclass(frozen=True)
class SweepSpec:
    parameter: str = "gamma_over_kappa"
    start: float = 0.02
    stop: float = 0.5
    count: int = 25
    spacing: str = "linear"
    values: tuple[float, ...] | None = None

    def points(self) -> np.ndarray:
        if self.values is not None:
            return np.array(self.values, dtype=float)
        if self.count == 1:
            return np.array([self.start])
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class GridSpec:
    t_stop: float | None = None       # ns; None means two Rabi periods
    t_points: int = 801
    kappa_tau_stop: float = 10.0
    tau_points: int = 400


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    model: dict = field(default_factory=lambda: dict(MODEL_DEFAULTS))
    circuit: dict | None = None
    sweep: SweepSpec | None = None
    grid: GridSpec = GridSpec()
    output_dir: str = "output"
    tolerances: dict = field(default_factory=lambda: dict(TOLERANCE_DEFAULTS))

    def gamma_ghz(self) -> float:
        if self.model["gamma"] is not None:
            return self.model["gamma"]
        return self.model["gamma_over_kappa"] * self.model["kappa"]

    def circuit_params(self) -> CircuitParams | None:
        if self.circuit is None:
            return None
        c = self.circuit
        return CircuitParams((c["inductance_1"], c["inductance_2"]), (c["capacitance_1"], c["capacitance_2"]),
                             c["e_j0"], c["flux_ratio"], c["e_c"], c["e_jq"], c.get("bias"))

    def model_params(self, **overrides) -> ModelParams:
        """Resolved ModelParams; ``overrides`` replace user-unit model values."""
        m = dict(self.model)
        m.update(overrides)
        if "gamma_over_kappa" in overrides:
            m["gamma"] = None
        gamma = m["gamma"] if m["gamma"] is not None else m["gamma_over_kappa"] * m["kappa"]
        if self.circuit is not None:
            base = circuit_to_model(self.circuit_params(), ghz_to_angular(m["kappa"]),
                                    ghz_to_angular(gamma), m["cutoff"])
            lam = {k: m[k] for k in ("lambda_1", "lambda_2", "e_j") if k in overrides}
            if lam:
                base = replace(base, **{k: (ghz_to_angular(v) if k == "e_j" else v) for k, v in lam.items()})
            return base
        return ModelParams.from_ghz(omega_1=m["omega_1"], omega_2=m["omega_2"], delta=m["delta"], e_j=m["e_j"],
                                    lambda_1=m["lambda_1"], lambda_2=m["lambda_2"], omega_j=m["omega_j"],
                                    kappa=m["kappa"], gamma=gamma, cutoff=m["cutoff"])


def _parse_value(raw: str, kind: str, unit, key: str, where: str):
    text = raw.strip()
    if kind == "str":
        if not text:
            raise ConfigError(f"{where}: empty value for {key!r}")
        return text
    if kind == "floats":
        try:
            return tuple(float(v) for v in text.split(",") if v.strip())
        except ValueError:
            raise ConfigError(f"{where}: {key!r} needs a comma-separated list of numbers, got {text!r}") from None
    parts = text.split()
    if not parts or len(parts) > 2:
        raise ConfigError(f"{where}: cannot parse value {text!r} for {key!r}")
    scale = 1.0
    if len(parts) == 2:
        suffix = parts[1].lower()
        accepted = UNITS[unit]
        if suffix not in accepted:
            expected = CANONICAL_SUFFIX.get(unit, "no unit")
            raise ConfigError(f"{where}: unit {parts[1]!r} does not match {key!r} (expected {expected})")
        scale = accepted[suffix]
    try:
        if kind == "int":
            val = int(parts[0])
            if scale != 1.0:
                raise ValueError
            return val
        return float(parts[0]) * scale
    except ValueError:
        raise ConfigError(f"{where}: {key!r} needs {'an integer' if kind == 'int' else 'a number'}, "
                          f"got {parts[0]!r}") from None


def parse_text(text: str, scenario: str | None = None, source: str = "<config>") -> RunConfig:
    """Parse config text; ``scenario`` (from the command line) may supply or must match the file's."""
    sections: dict[str, dict] = {name: {} for name in SCHEMA}
    lines: dict[tuple[str, str], int] = {}
    current = ""
    for lineno, line in enumerate(text.splitlines(), start=1):
        where = f"{source}:{lineno}"
        body = line.split("#", 1)[0].split(";", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]"):
                raise ConfigError(f"{where}: malformed section header {body!r}")
            current = body[1:-1].strip().lower()
            if current not in SCHEMA or current == "":
                raise ConfigError(f"{where}: unknown section [{current}]")
            continue
        if "=" not in body:
            raise ConfigError(f"{where}: expected 'key = value', got {body!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        key = key.lower()
        spec = SCHEMA[current].get(key)
        if spec is None:
            sect = f"[{current}]" if current else "top level"
            raise ConfigError(f"{where}: unknown key {key!r} in {sect}")
        if key in sections[current]:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        kind, unit, lower, inclusive = spec
        val = _parse_value(raw, kind, unit, key, where)
        if lower is not None and kind in ("float", "int"):
            if not math.isfinite(val) or val < lower or (val == lower and not inclusive):
                op = ">=" if inclusive else ">"
                raise ConfigError(f"{where}: {key!r} must be {op} {lower}, got {val}")
        sections[current][key] = val
        lines[(current, key)] = lineno

    def fail(sect, key, msg):
        ln = lines.get((sect, key))
        raise ConfigError(f"{source}:{ln}: {msg}" if ln else f"{source}: {msg}")

    file_scenario = sections[""].get("scenario")
    if scenario and file_scenario and scenario != file_scenario:
        fail("", "scenario", f"scenario {file_scenario!r} in file conflicts with requested {scenario!r}")
    chosen = scenario or file_scenario
    if not chosen:
        raise ConfigError(f"{source}: missing scenario (give it on the command line or as 'scenario = ...')")
    if chosen not in SCENARIOS:
        fail("", "scenario", f"unknown scenario {chosen!r}; choose one of {', '.join(SCENARIOS)}")

    model = dict(MODEL_DEFAULTS)
    model.update(sections["model"])
    for k in ("lambda_1", "lambda_2"):
        if model[k] >= 1:
            fail("model", k, f"{k!r} must be < 1, got {model[k]}")
    if "gamma" in sections["model"] and "gamma_over_kappa" in sections["model"]:
        fail("model", "gamma", "give either 'gamma' or 'gamma_over_kappa', not both")
    if "gamma" in sections["model"]:
        model["gamma_over_kappa"] = None

    circuit = None
    if sections["circuit"]:
        required = [k for k in SCHEMA["circuit"] if k != "bias"]
        missing = [k for k in required if k not in sections["circuit"]]
        if missing:
            raise ConfigError(f"{source}: [circuit] is missing {', '.join(missing)}")
        clash = [k for k in CIRCUIT_OWNED if k in sections["model"]]
        if clash:
            fail("model", clash[0], f"{clash[0]!r} is derived from [circuit]; remove it from [model]")
        circuit = dict(sections["circuit"])
        circuit.setdefault("bias", None)
        if circuit["flux_ratio"] >= 1:
            fail("circuit", "flux_ratio", "flux_ratio must be < 1")

    sweep = None
    if sections["sweep"]:
        s = sections["sweep"]
        spacing = s.get("spacing", "linear").lower()
        if spacing not in ("linear", "log"):
            fail("sweep", "spacing", f"spacing must be 'linear' or 'log', got {spacing!r}")
        param = s.get("parameter", "gamma_over_kappa").lower()
        if param not in SWEEPABLE:
            fail("sweep", "parameter", f"cannot sweep {param!r}; choose one of {', '.join(SWEEPABLE)}")
        values = s.get("values")
        if values is not None:
            if any(k in s for k in ("start", "stop", "count")):
                fail("sweep", "values", "give either 'values' or start/stop/count, not both")
            if not values:
                fail("sweep", "values", "sweep values are empty")
            sweep = SweepSpec(parameter=param, spacing=spacing, values=values, start=values[0],
                              stop=values[-1], count=len(values))
        else:
            sweep = SweepSpec(parameter=param, start=s.get("start", SweepSpec.start),
                              stop=s.get("stop", SweepSpec.stop), count=s.get("count", SweepSpec.count),
                              spacing=spacing)
            if sweep.stop < sweep.start:
                fail("sweep", "stop", f"sweep bounds out of order: start {sweep.start} > stop {sweep.stop}")
            if spacing == "log" and sweep.start <= 0:
                fail("sweep", "start", "log spacing needs a positive start")
    grid = GridSpec(**sections["grid"])
    tolerances = dict(TOLERANCE_DEFAULTS)
    tolerances.update(sections["tolerances"])
    cfg = RunConfig(chosen, model, circuit, sweep, grid, sections["output"].get("dir", "output"), tolerances)
    try:
        cfg.model_params()
        if circuit is not None:
            cfg.circuit_params()
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def parse_config(path, scenario: str | None = None) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_text(text, scenario, str(p))


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def serialize(cfg: RunConfig) -> str:
    """Render a RunConfig in the config grammar; parsing the result reproduces it."""
    out = [f"scenario = {cfg.scenario}", "", "[model]"]
    for key in MODEL_DEFAULTS:
        val = cfg.model[key]
        if val is None or (cfg.circuit is not None and key in CIRCUIT_OWNED):
            continue
        unit = SCHEMA["model"][key][1]
        out.append(f"{key} = {_fmt(val)}" + (f" {CANONICAL_SUFFIX[unit]}" if unit else ""))
    if cfg.circuit is not None:
        out += ["", "[circuit]"]
        for key, (_, unit, _, _) in SCHEMA["circuit"].items():
            val = cfg.circuit.get(key)
            if val is not None:
                out.append(f"{key} = {_fmt(val)}" + (f" {CANONICAL_SUFFIX[unit]}" if unit else ""))
    if cfg.sweep is not None:
        s = cfg.sweep
        out += ["", "[sweep]", f"parameter = {s.parameter}", f"spacing = {s.spacing}"]
        if s.values is not None:
            out.append("values = " + ", ".join(_fmt(v) for v in s.values))
        else:
            out += [f"start = {_fmt(s.start)}", f"stop = {_fmt(s.stop)}", f"count = {s.count}"]
    g = cfg.grid
    out += ["", "[grid]"]
    if g.t_stop is not None:
        out.append(f"t_stop = {_fmt(g.t_stop)} ns")
    out += [f"t_points = {g.t_points}", f"kappa_tau_stop = {_fmt(g.kappa_tau_stop)}", f"tau_points = {g.tau_points}"]
    out += ["", "[output]", f"dir = {cfg.output_dir}", "", "[tolerances]"]
    out += [f"{k} = {_fmt(v)}" for k, v in cfg.tolerances.items()]
    return "\n".join(out) + "\n"
