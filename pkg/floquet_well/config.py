"""
Run configuration: JSON recipe files, --mode and dotted --override values
resolved into a validated, frozen RunConfig.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .channels import EMISSION, BOUNDARY_KINDS, WellModel, well_from_A
from .continuation import StepControl
from .errors import ConfigError
from .matching import MatchingProblem, SolverSettings
from .waves import TruncationScheme

MODES = (
    "static-spectrum",
    "pole-trace",
    "critical-point",
    "scatter",
    "scatter-grid",
    "emission",
    "verify",
    "ep-scan",
)

RangeLike = Union[None, float, List[float], Dict[str, float]]


def expand_range(value: RangeLike, key: str) -> List[float]:
    """
    Expand a list, a scalar, or a {"start", "stop", "step"|"num"} mapping
    (stop included) into a list of floats.
    """
    if value is None:
        return []
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, list):
        return [float(v) for v in value]
    if not isinstance(value, dict):
        raise ConfigError("expected a number, list or range", key=key)
    unknown = set(value) - {"start", "stop", "step", "num"}
    if unknown:
        raise ConfigError(f"unknown range keys {sorted(unknown)}", key=key)
    try:
        start, stop = float(value["start"]), float(value["stop"])
    except KeyError as e:
        raise ConfigError(f"range needs {e.args[0]!r}", key=key) from e
    if "num" in value:
        num = int(value["num"])
        if num < 0:
            raise ConfigError("num must be nonnegative", key=key)
        return [float(v) for v in np.linspace(start, stop, num)]
    step = float(value.get("step", 0.0))
    if step <= 0:
        raise ConfigError("range step must be positive", key=key)
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(max(count, 0))]


@dataclass(frozen=True)
class WellSpec:
    V0: float = 0.0
    d: Optional[float] = None
    A_over_pi: Optional[float] = None
    variant: int = 1
    m: int = 0

    def __post_init__(self):
        if self.V0 <= 0:
            raise ConfigError("must be positive", key="well.V0")
        if (self.d is None) == (self.A_over_pi is None):
            raise ConfigError(
                "give exactly one of well.d and well.A_over_pi", key="well"
            )

    def build(self) -> WellModel:
        if self.d is not None:
            return WellModel.from_depth_radius(
                self.V0, self.d, self.variant, self.m
            )
        return well_from_A(self.A_over_pi, self.V0, self.variant, self.m)


@dataclass(frozen=True)
class DriveSpec:
    F2: float = 0.0
    F2_target: Optional[float] = None
    F2_values: RangeLike = None


@dataclass(frozen=True)
class SeedSpec:
    omega: Optional[List[float]] = None
    l: Optional[int] = None
    index: Optional[int] = None
    solution_file: Optional[str] = None
    resume: Optional[str] = None


@dataclass(frozen=True)
class ScatterSpec:
    omega: RangeLike = None
    input_channel: Tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class SpectrumSpec:
    sweep: str = "A_over_pi"
    values: RangeLike = None
    d: Optional[float] = None
    A_over_pi: Optional[float] = None
    l_max: int = 3
    l_pair: Tuple[int, int] = (1, 0)
    levels: Optional[List[List[int]]] = None


@dataclass(frozen=True)
class EmissionSpec:
    theta_points: int = 19


@dataclass(frozen=True)
class VerifySpec:
    points: int = 20
    rng_seed: int = 0
    threshold: float = 1e-6
    r_max_factor: float = 2.0


@dataclass(frozen=True)
class ChecksSpec:
    truncation_points: int = 0
    truncation_threshold: float = 1e-6


@dataclass(frozen=True)
class RunConfig:
    mode: str
    well: WellSpec
    drive: DriveSpec = field(default_factory=DriveSpec)
    truncation: TruncationScheme = field(default_factory=TruncationScheme)
    solver: SolverSettings = field(default_factory=SolverSettings)
    boundary: str = EMISSION
    continuation: StepControl = field(default_factory=StepControl)
    seed: SeedSpec = field(default_factory=SeedSpec)
    scatter: ScatterSpec = field(default_factory=ScatterSpec)
    spectrum: SpectrumSpec = field(default_factory=SpectrumSpec)
    emission: EmissionSpec = field(default_factory=EmissionSpec)
    verify: VerifySpec = field(default_factory=VerifySpec)
    checks: ChecksSpec = field(default_factory=ChecksSpec)
    out: str = "results"
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(
                f"unknown mode {self.mode!r}; valid modes: "
                + ", ".join(MODES),
                key="mode",
            )
        if self.boundary not in BOUNDARY_KINDS[1:]:
            raise ConfigError(
                "boundary must be emission or capture", key="boundary"
            )
        if self.workers < 1:
            raise ConfigError("must be at least 1", key="workers")
        if self.verify.threshold <= 0:
            raise ConfigError("must be positive", key="verify.threshold")

    def well_model(self) -> WellModel:
        return self.well.build()

    def problem(self, F2: Optional[float] = None) -> MatchingProblem:
        return MatchingProblem(
            well=self.well_model(),
            F2=self.drive.F2 if F2 is None else F2,
            truncation=self.truncation,
            boundary=self.boundary,
            solver=self.solver,
        )

    def resolved(self) -> Dict[str, Any]:
        """Every field with defaults materialized and d/A_over_pi echoed."""
        data = asdict(self)
        model = self.well_model()
        data["well"]["d"] = model.d
        data["well"]["A_over_pi"] = model.A_over_pi
        return data


SECTIONS = {
    "well": WellSpec,
    "drive": DriveSpec,
    "truncation": TruncationScheme,
    "solver": SolverSettings,
    "continuation": StepControl,
    "seed": SeedSpec,
    "scatter": ScatterSpec,
    "spectrum": SpectrumSpec,
    "emission": EmissionSpec,
    "verify": VerifySpec,
    "checks": ChecksSpec,
}
TOP_LEVEL = {"mode", "boundary", "out", "workers"}


def _field_names(cls) -> set:
    return {f.name for f in fields(cls)}


def _as_tuple_fields(cls, values: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(values)
    for f in fields(cls):
        if f.name in out and isinstance(out[f.name], list):
            if "Tuple" in str(f.type):
                out[f.name] = tuple(out[f.name])
    return out


def _build_section(name: str, values: Any):
    cls = SECTIONS[name]
    if is_dataclass(values):
        return values
    if not isinstance(values, dict):
        raise ConfigError("expected an object", key=name)
    unknown = set(values) - _field_names(cls)
    if unknown:
        raise ConfigError(
            f"unknown key(s) {sorted(unknown)}", key=name
        )
    try:
        return cls(**_as_tuple_fields(cls, values))
    except ConfigError as e:
        if e.key and not e.key.startswith(name):
            raise ConfigError(str(e), key=name) from e
        raise
    except TypeError as e:
        raise ConfigError(str(e), key=name) from e


def parse_value(text: str) -> Any:
    """JSON literal, falling back to the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(data: Dict[str, Any], override: str) -> None:
    """Apply one dotted key=value override in place."""
    if "=" not in override:
        raise ConfigError(
            f"override {override!r} is not key=value", key="override"
        )
    key, text = override.split("=", 1)
    parts = key.strip().split(".")
    if len(parts) == 1:
        if parts[0] not in TOP_LEVEL:
            raise ConfigError("unknown key", key=parts[0])
        data[parts[0]] = parse_value(text)
        return
    if len(parts) != 2 or parts[0] not in SECTIONS:
        raise ConfigError("unknown key", key=key)
    section, name = parts
    if name not in _field_names(SECTIONS[section]):
        raise ConfigError("unknown key", key=key)
    data.setdefault(section, {})[name] = parse_value(text)


def config_from_dict(data: Dict[str, Any]) -> RunConfig:
    unknown = set(data) - TOP_LEVEL - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)}", key="config")
    if "mode" not in data or data["mode"] is None:
        raise ConfigError(
            "missing; valid modes: " + ", ".join(MODES), key="mode"
        )
    if "well" not in data:
        raise ConfigError("missing well section", key="well")
    kwargs = {key: data[key] for key in TOP_LEVEL if key in data}
    for name in SECTIONS:
        if name in data:
            kwargs[name] = _build_section(name, data[name])
    return RunConfig(**kwargs)


def parse_config(
    path: Optional[Union[str, Path]] = None,
    mode: Optional[str] = None,
    overrides: Sequence[str] = (),
) -> RunConfig:
    """
    Resolve a RunConfig: file values, then mode, then overrides.

    Raises:
        ConfigError: naming the offending key
    """
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}", key="config")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {path}: {e}") from e
    data = copy.deepcopy(data)
    if mode is not None:
        data["mode"] = mode
    for override in overrides:
        apply_override(data, override)
    return config_from_dict(data)
