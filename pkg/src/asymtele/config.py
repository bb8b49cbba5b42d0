"""Experiment configuration: a flat TOML document with strict validation.

Example::

    scenario = "estimate-fidelity"
    input_state = "phi1"              # or {kind = "custom", amps = [[re, im], ...]}
    noise_p = 0.298666666667          # mixed weight; 0 is the ideal resource
    counts_override = 1830            # or duration_s = 10000.0, never both
    seed = 7
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import tomli
import tomli_w

SCENARIOS = ("prepare", "teleport-forward", "teleport-reverse", "estimate-fidelity", "noise-sweep")
NAMED_INPUTS = ("phi1", "phi2", "phi3", "phi-all")
DEFAULT_RATE_HZ = 0.183
DEFAULT_DURATION_S = 10_000.0


class ConfigError(ValueError):
    def __init__(self, message: str, field: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        super().__init__(message)
        self.field = field
        self.line = line
        self.column = column

    def record(self) -> dict:
        rec = {"type": "config", "message": str(self)}
        for key in ("field", "line", "column"):
            if getattr(self, key) is not None:
                rec[key] = getattr(self, key)
        return rec


@dataclass(frozen=True)
class InputSpec:
    kind: str = "phi1"  # phi1 | phi2 | phi3 | phi-all | custom | random
    amps: Optional[tuple[tuple[float, float], ...]] = None
    seed: Optional[int] = None

    def to_toml(self):
        if self.kind in NAMED_INPUTS:
            return self.kind
        if self.kind == "custom":
            return {"kind": "custom", "amps": [list(a) for a in self.amps]}
        out = {"kind": "random"}
        if self.seed is not None:
            out["seed"] = self.seed
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    input_state: InputSpec = field(default_factory=InputSpec)
    noise_p: float = 0.0
    rate_hz: float = DEFAULT_RATE_HZ
    duration_s: Optional[float] = None
    counts_override: Optional[int] = None
    bootstrap_iters: int = 1000
    seed: int = 0
    output_dir: str = "out"
    postselect_outcome: str = "Phi+,Phi+"
    pipeline: Optional[tuple[dict, ...]] = None

    @property
    def resolved_duration_s(self) -> float:
        return self.duration_s if self.duration_s is not None else DEFAULT_DURATION_S

    @property
    def totals(self) -> int:
        from .estimation import expected_counts

        if self.counts_override is not None:
            return self.counts_override
        return expected_counts(self.rate_hz, self.resolved_duration_s)

    @property
    def white_noise_weight(self) -> float:
        """Weight of the ideal state in the white-noise mixture."""
        return 1.0 - self.noise_p

    def echo(self) -> dict:
        d = asdict(self)
        d["input_state"] = self.input_state.to_toml()
        d["pipeline"] = list(self.pipeline) if self.pipeline is not None else None
        d["resolved_duration_s"] = None if self.counts_override is not None else self.resolved_duration_s
        d["totals"] = self.totals
        return d


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def _parse_input(value) -> InputSpec:
    if isinstance(value, str):
        if value in NAMED_INPUTS:
            return InputSpec(value)
        if value == "random":
            return InputSpec("random")
        raise ConfigError(f"unknown input_state {value!r}", "input_state")
    if not isinstance(value, dict):
        raise ConfigError("input_state must be a name or a table", "input_state")
    unknown = set(value) - {"kind", "amps", "seed"}
    if unknown:
        raise ConfigError(f"unknown input_state keys {sorted(unknown)}", "input_state")
    kind = value.get("kind")
    if kind in NAMED_INPUTS and set(value) == {"kind"}:
        return InputSpec(kind)
    if kind == "custom":
        amps = value.get("amps")
        if not isinstance(amps, list) or len(amps) != 4:
            raise ConfigError("custom amps must list four [re, im] pairs", "input_state.amps")
        pairs = []
        for a in amps:
            if not (isinstance(a, list) and len(a) == 2 and all(_is_num(x) for x in a)):
                raise ConfigError("each amplitude must be [re, im]", "input_state.amps")
            pairs.append((float(a[0]), float(a[1])))
        if all(re == 0 and im == 0 for re, im in pairs):
            raise ConfigError("custom amplitudes are all zero", "input_state.amps")
        if "seed" in value:
            raise ConfigError("seed applies to random inputs only", "input_state.seed")
        return InputSpec("custom", tuple(pairs))
    if kind == "random":
        seed = value.get("seed")
        if seed is not None and (not _is_int(seed) or seed < 0):
            raise ConfigError("input seed must be a non-negative integer", "input_state.seed")
        if "amps" in value:
            raise ConfigError("amps apply to custom inputs only", "input_state.amps")
        return InputSpec("random", seed=seed)
    raise ConfigError(f"unknown input_state kind {kind!r}", "input_state.kind")


_KEYS = {f.name for f in fields(ExperimentConfig)}


def config_from_mapping(data: dict) -> ExperimentConfig:
    unknown = sorted(set(data) - _KEYS)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", unknown[0])
    if "scenario" not in data:
        raise ConfigError("missing required key 'scenario'", "scenario")
    kw = {}
    scenario = data["scenario"]
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}", "scenario")
    kw["scenario"] = scenario
    if "input_state" in data:
        kw["input_state"] = _parse_input(data["input_state"])

    def number(name, lo=None, hi=None, lo_open=False):
        v = data[name]
        if not _is_num(v):
            raise ConfigError(f"{name} must be a number", name)
        if lo is not None and (v < lo or (lo_open and v == lo)):
            raise ConfigError(f"{name}={v} out of range", name)
        if hi is not None and v > hi:
            raise ConfigError(f"{name}={v} out of range", name)
        return float(v)

    def integer(name, lo):
        v = data[name]
        if not _is_int(v):
            raise ConfigError(f"{name} must be an integer", name)
        if v < lo:
            raise ConfigError(f"{name}={v} out of range", name)
        return v

    if "noise_p" in data:
        kw["noise_p"] = number("noise_p", 0.0, 1.0)
    if "rate_hz" in data:
        kw["rate_hz"] = number("rate_hz", 0.0, lo_open=True)
    if "duration_s" in data:
        kw["duration_s"] = number("duration_s", 0.0, lo_open=True)
    if "counts_override" in data:
        kw["counts_override"] = integer("counts_override", 1)
    if "duration_s" in kw and "counts_override" in kw:
        raise ConfigError("ambiguous totals: set duration_s or counts_override, not both",
                          "counts_override")
    if "bootstrap_iters" in data:
        iters = integer("bootstrap_iters", 0)
        if 0 < iters < 100:
            raise ConfigError("bootstrap_iters must be 0 or at least 100", "bootstrap_iters")
        kw["bootstrap_iters"] = iters
    if "seed" in data:
        kw["seed"] = integer("seed", 0)
    if "output_dir" in data:
        if not isinstance(data["output_dir"], str) or not data["output_dir"]:
            raise ConfigError("output_dir must be a non-empty string", "output_dir")
        kw["output_dir"] = data["output_dir"]
    if "postselect_outcome" in data:
        from .teleport import BellOutcomePair

        try:
            BellOutcomePair.parse(str(data["postselect_outcome"]))
        except (ValueError, KeyError):
            raise ConfigError("postselect_outcome must look like 'Phi+,Psi-'",
                              "postselect_outcome") from None
        kw["postselect_outcome"] = str(data["postselect_outcome"])
    if "pipeline" in data:
        from .photonics import OpticalElement
        from .state import StateError

        elements = data["pipeline"]
        if not isinstance(elements, list) or not all(isinstance(e, dict) for e in elements):
            raise ConfigError("pipeline must be a list of element tables", "pipeline")
        for i, e in enumerate(elements):
            try:
                OpticalElement.from_dict(e)
            except (StateError, TypeError, ValueError) as exc:
                raise ConfigError(f"pipeline[{i}]: {exc}", f"pipeline[{i}]") from None
        kw["pipeline"] = tuple(dict(e) for e in elements)
    return ExperimentConfig(**kw)


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"syntax error: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    return config_from_mapping(data)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(config: ExperimentConfig) -> str:
    d = {"scenario": config.scenario, "input_state": config.input_state.to_toml()}
    for f in fields(ExperimentConfig):
        if f.name in d:
            continue
        v = getattr(config, f.name)
        if v is None:
            continue
        d[f.name] = list(v) if f.name == "pipeline" else v
    return tomli_w.dumps(d)


def with_overrides(config: ExperimentConfig, seed=None, output_dir=None) -> ExperimentConfig:
    kw = {}
    if seed is not None:
        if seed < 0:
            raise ConfigError("seed must be non-negative", "seed")
        kw["seed"] = seed
    if output_dir is not None:
        kw["output_dir"] = str(output_dir)
    return replace(config, **kw)
