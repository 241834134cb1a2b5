"""JSON experiment configuration with defaults and field-level diagnostics.

Schema (every key optional; absent keys take the defaults below)::

    {
      "experiment": "cell_sweep" | "ssb_attack" | "mobility_trace",
      "seeds": [0],
      "output_dir": "results",
      "cell":  {Scenario fields, "jammers": [JAMMER], "mobility": {StepsConfig fields} | null,
                "mcs_table": [{"name", "modulation", "code_rate", "threshold_db"}]},
      "sweep": {"axis": "jam_power" | "jam_distance" | "n_jammers", "values": [...]},
      "link":  {LinkScenario fields, "jammers": [JAMMER]},
      "trace": {"n_nodes": 20, "duration_s": 1.0, "steps": {StepsConfig fields}}
    }

    JAMMER = {"kind": "barrage" | "smart_ssb" | "smart_pbch",
              "power_dbm": 20, "x": 224, "y": 0, "gain_db": 0}
"""
from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cellsim import Scenario, SweepAxis, Traffic, default_mobility
from .jammer import JammerKind, JammerSpec
from .link import LinkScenario
from .mobility import StepsConfig
from .receiver import McsEntry

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


class ExperimentKind(enum.Enum):
    SSB_ATTACK = "ssb_attack"
    CELL_SWEEP = "cell_sweep"
    MOBILITY_TRACE = "mobility_trace"

    @classmethod
    def parse(cls, text: str) -> "ExperimentKind":
        return cls(text.replace("-", "_").lower())


DEFAULT_SWEEP_VALUES = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0)
DEFAULT_LINK_JAMMERS = (JammerSpec(JammerKind.BARRAGE, 30.0, (100.0, 100.0)),)


@dataclass(frozen=True)
class TraceConfig:
    n_nodes: int = 20
    duration_s: float = 1.0
    steps: StepsConfig = field(default_factory=default_mobility)

    def __post_init__(self):
        if self.n_nodes < 1 or self.duration_s <= 0:
            raise ValueError("n_nodes must be >= 1 and duration_s positive")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: ExperimentKind = ExperimentKind.CELL_SWEEP
    cell: Scenario = field(default_factory=Scenario)
    sweep_axis: SweepAxis = SweepAxis.JAM_POWER
    sweep_values: tuple = DEFAULT_SWEEP_VALUES
    link: LinkScenario = field(default_factory=lambda: LinkScenario(jammers=DEFAULT_LINK_JAMMERS))
    trace: TraceConfig = field(default_factory=TraceConfig)
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "results"

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seeds must be non-empty")

    def resolved(self) -> dict:
        """Plain-JSON view of every setting (output directory excluded)."""
        return {
            "experiment": self.kind.value,
            "seeds": [int(s) for s in self.seeds],
            "cell": _plain(self.cell),
            "sweep": {"axis": self.sweep_axis.value, "values": _plain(self.sweep_values)},
            "link": _plain(self.link),
            "trace": _plain(self.trace),
        }

    def canonical_json(self) -> str:
        return json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def _plain(obj):
    if isinstance(obj, JammerSpec):
        return {"kind": obj.kind.value, "power_dbm": obj.tx_power_dbm, "x": obj.position[0],
                "y": obj.position[1], "gain_db": obj.gain_db}
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _expect(value, kind, path: str):
    ok = {
        "number": isinstance(value, (int, float)) and not isinstance(value, bool),
        "int": isinstance(value, int) and not isinstance(value, bool),
        "bool": isinstance(value, bool),
        "str": isinstance(value, str),
        "object": isinstance(value, dict),
        "list": isinstance(value, list),
    }[kind]
    if not ok:
        raise ConfigError(f"field '{path}': expected {kind}, got {type(value).__name__}")
    return value


def _type_of(default) -> str | None:
    if isinstance(default, bool):
        return "bool"
    if isinstance(default, int):
        return "int"
    if isinstance(default, float):
        return "number"
    if isinstance(default, str):
        return "str"
    return None


def _check_keys(data: dict, allowed, path: str):
    for k in data:
        if k not in allowed:
            raise ConfigError(f"unknown field '{path}.{k}'" if path else f"unknown field '{k}'")


def _tupled(v):
    return tuple(_tupled(x) for x in v) if isinstance(v, list) else v


def _build(cls, data, path: str, special=None, base=None):
    """Instantiate dataclass ``cls`` from ``data``; ``special`` maps field -> converter."""
    _expect(data, "object", path)
    special = special or {}
    flds = {f.name: f for f in dataclasses.fields(cls)}
    _check_keys(data, flds, path)
    base = base if base is not None else cls()
    kwargs = {}
    for name, value in data.items():
        p = f"{path}.{name}"
        if name in special:
            kwargs[name] = special[name](value, p)
            continue
        t = _type_of(getattr(base, name))
        if t is not None and value is not None:
            if t == "number":
                _expect(value, "number", p)
                value = float(value)
            else:
                _expect(value, t, p)
        kwargs[name] = _tupled(value)
    try:
        return dataclasses.replace(base, **kwargs)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{path}: {e}") from None


def _nonneg_power(value, path: str) -> float:
    _expect(value, "number", path)
    if value < 0:
        raise ConfigError(f"field '{path}': power must be >= 0 dBm, got {value}")
    return float(value)


JAMMER_FIELDS = ("kind", "power_dbm", "x", "y", "gain_db")


def _jammer(data, path: str) -> JammerSpec:
    _expect(data, "object", path)
    _check_keys(data, JAMMER_FIELDS, path)
    kind = _expect(data.get("kind", "barrage"), "str", f"{path}.kind")
    try:
        kind = JammerKind(kind)
    except ValueError:
        raise ConfigError(f"field '{path}.kind': unknown jammer kind {kind!r}") from None
    power = _nonneg_power(data.get("power_dbm", 20.0), f"{path}.power_dbm")
    x = _expect(data.get("x", 0.0), "number", f"{path}.x")
    y = _expect(data.get("y", 0.0), "number", f"{path}.y")
    gain = _expect(data.get("gain_db", 0.0), "number", f"{path}.gain_db")
    try:
        return JammerSpec(kind, power, (x, y), float(gain))
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from None


def _jammers(data, path: str) -> tuple[JammerSpec, ...]:
    _expect(data, "list", path)
    return tuple(_jammer(d, f"{path}[{i}]") for i, d in enumerate(data))


def _steps(default: StepsConfig):
    def conv(data, path):
        if data is None:
            return None
        return _build(StepsConfig, data, path, {"origin_m": _pair, "cell_radius_m": _opt_number},
                      base=default)
    return conv


def _pair(data, path):
    _expect(data, "list", path)
    if len(data) != 2:
        raise ConfigError(f"field '{path}': expected [x, y]")
    return tuple(float(_expect(v, "number", path)) for v in data)


def _opt_number(data, path):
    return None if data is None else float(_expect(data, "number", path))


def _mcs_table(data, path):
    _expect(data, "list", path)
    out = []
    for i, d in enumerate(data):
        p = f"{path}[{i}]"
        _expect(d, "object", p)
        _check_keys(d, ("name", "modulation", "code_rate", "threshold_db"), p)
        missing = [k for k in ("name", "modulation", "code_rate", "threshold_db") if k not in d]
        if missing:
            raise ConfigError(f"{p}: missing field '{missing[0]}'")
        try:
            out.append(McsEntry(str(d["name"]), str(d["modulation"]), float(d["code_rate"]),
                                float(d["threshold_db"])))
        except (ValueError, TypeError) as e:
            raise ConfigError(f"{p}: {e}") from None
    return tuple(out)


def _enum(cls):
    def conv(value, path):
        try:
            return cls(_expect(value, "str", path))
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ConfigError(f"field '{path}': {value!r} not one of {choices}") from None
    return conv


def _positions(data, path):
    if data is None:
        return None
    _expect(data, "list", path)
    return tuple(_pair(p, f"{path}[{i}]") for i, p in enumerate(data))


def _build_cell(data) -> Scenario:
    radius = data.get("cell_radius_m", Scenario.cell_radius_m) if isinstance(data, dict) else 500.0
    if not isinstance(radius, (int, float)) or isinstance(radius, bool) or radius <= 0:
        raise ConfigError("field 'cell.cell_radius_m': expected a positive number")
    base = Scenario(cell_radius_m=float(radius), mobility=default_mobility(float(radius)))
    sc = _build(Scenario, data, "cell", {
        "jammers": _jammers,
        "mobility": _steps(default_mobility(float(radius))),
        "mcs_table": _mcs_table,
        "traffic": _enum(Traffic),
        "gnb_power_dbm": _nonneg_power,
        "ue_positions": _positions,
        "seed": lambda v, p: int(_expect(v, "int", p)),
    }, base=base)
    for i, j in enumerate(sc.jammers):
        if np.hypot(*j.position) > sc.cell_radius_m:
            log.warning("cell.jammers[%d] at %s lies outside the %.0f m cell", i, j.position,
                        sc.cell_radius_m)
    return sc


def _build_link(data) -> LinkScenario:
    return _build(LinkScenario, data, "link", {
        "jammers": _jammers,
        "gnb_position": _pair,
        "ue_position": _pair,
        "gnb_power_dbm": _nonneg_power,
        "mib_bits": lambda v, p: tuple(int(b) for b in _expect(v, "list", p)),
    }, base=LinkScenario(jammers=DEFAULT_LINK_JAMMERS))


def _build_trace(data) -> TraceConfig:
    return _build(TraceConfig, data, "trace", {"steps": _steps(default_mobility())})


TOP_FIELDS = ("experiment", "seeds", "output_dir", "cell", "sweep", "link", "trace")


def config_from_dict(data: dict) -> ExperimentConfig:
    _expect(data, "object", "<root>")
    _check_keys(data, TOP_FIELDS, "")
    kw = {}
    if "experiment" in data:
        try:
            kw["kind"] = ExperimentKind.parse(_expect(data["experiment"], "str", "experiment"))
        except ValueError:
            raise ConfigError(f"field 'experiment': unknown kind {data['experiment']!r}") from None
    if "seeds" in data:
        seeds = _expect(data["seeds"], "list", "seeds")
        if not seeds:
            raise ConfigError("field 'seeds': must be non-empty")
        kw["seeds"] = tuple(_expect(s, "int", f"seeds[{i}]") for i, s in enumerate(seeds))
    if "output_dir" in data:
        kw["output_dir"] = _expect(data["output_dir"], "str", "output_dir")
    if "cell" in data:
        kw["cell"] = _build_cell(data["cell"])
    if "sweep" in data:
        sw = _expect(data["sweep"], "object", "sweep")
        _check_keys(sw, ("axis", "values"), "sweep")
        if "axis" in sw:
            kw["sweep_axis"] = _enum(SweepAxis)(sw["axis"], "sweep.axis")
        if "values" in sw:
            vals = _expect(sw["values"], "list", "sweep.values")
            kw["sweep_values"] = tuple(_expect(v, "number", f"sweep.values[{i}]")
                                       for i, v in enumerate(vals))
    if "link" in data:
        kw["link"] = _build_link(data["link"])
    if "trace" in data:
        kw["trace"] = _build_trace(data["trace"])
    cfg = ExperimentConfig(**kw)
    if cfg.sweep_axis is SweepAxis.N_JAMMERS and any(
            v < 0 or v != int(v) for v in cfg.sweep_values):
        raise ConfigError("field 'sweep.values': jammer counts must be non-negative integers")
    if cfg.sweep_axis is SweepAxis.JAM_DISTANCE and any(v <= 0 for v in cfg.sweep_values):
        raise ConfigError("field 'sweep.values': distances must be positive")
    return cfg


def load_config(path) -> ExperimentConfig:
    """Parse and validate a JSON config file; an empty file yields the defaults."""
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        return ExperimentConfig()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    return config_from_dict(data)
