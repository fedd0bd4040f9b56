"""Scenario files: YAML text validated into a fully-defaulted :class:`ScenarioConfig`.

The grammar is documented in ``docs/scenario-format.md``. Unknown keys are
rejected; every error names the offending field and, where possible, the
line it came from.
"""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .exceptions import ScenarioParseError, ScenarioValidationError

BUNDLED = ("paper_scenario", "paper_calibrated")

Vec = List[float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _vec3(v):
    if len(v) != 3:
        raise ValueError("must have exactly 3 components")
    return [float(x) for x in v]


class RoomConfig(_Strict):
    length: float = Field(8.0, gt=0)
    width: float = Field(4.0, gt=0)
    height: float = Field(3.0, gt=0)
    wall_reflectivity: float = Field(0.8, ge=0, le=1)
    ceiling_reflectivity: float = Field(0.8, ge=0, le=1)
    floor_reflectivity: float = Field(0.3, ge=0, le=1)
    include_floor: bool = True


class TracingConfig(_Strict):
    first_order_element: float = Field(0.05, gt=0)
    second_order_element: float = Field(0.20, gt=0)
    element_semiangle: float = Field(60.0, gt=0, lt=90)
    max_order: Literal[0, 1, 2] = 2
    bin_width: float = Field(1e-10, gt=0)
    scan_limit: float = Field(5e9, gt=0)
    pad_factor: int = Field(16, ge=16)


class AccessPointConfig(_Strict):
    id: Optional[str] = None
    position: Vec
    orientation: Vec = [0.0, 0.0, -1.0]
    semiangle: float = Field(60.0, gt=0, lt=90)
    transmit_power: float = Field(1.9, gt=0)
    efficiency: float = Field(1.0, gt=0, le=1)

    _v = field_validator("position", "orientation")(_vec3)

    @field_validator("orientation")
    @classmethod
    def _nonzero(cls, v):
        if not any(v):
            raise ValueError("orientation must be a non-zero vector")
        return v


class UserConfig(_Strict):
    id: Optional[str] = None
    position: Vec
    receiver: Literal["adr", "wide"] = "adr"

    _v = field_validator("position")(_vec3)


class ADRConfig(_Strict):
    elevation: float = Field(70.0, ge=-90, le=90)
    azimuths: List[float] = [45.0, 135.0, 225.0, 315.0]
    fov: float = Field(25.0, gt=0, le=90)
    area: float = Field(2e-5, gt=0)
    responsivity: float = Field(0.4, gt=0)

    @field_validator("azimuths")
    @classmethod
    def _az(cls, v):
        if not v:
            raise ValueError("at least one azimuth is required")
        for a in v:
            if not 0 <= a < 360:
                raise ValueError(f"azimuth {a} outside [0, 360)")
        return [float(a) for a in v]


class WideConfig(_Strict):
    fov: float = Field(85.0, gt=0, le=90)
    area: float = Field(2e-5, gt=0)
    responsivity: float = Field(0.4, gt=0)


class ReceiverConfig(_Strict):
    adr: ADRConfig = ADRConfig()
    wide: WideConfig = WideConfig()


class NoiseConfig(_Strict):
    noise_power_density: float = Field(4.7e-28, ge=0)
    receiver_bandwidth: float = Field(100e6, gt=0)
    dark_current: float = Field(1e-9, ge=0)
    background_power_ref: float = Field(1e-6, ge=0)
    reference_fov: float = Field(85.0, gt=0, le=90)


class NomaConfig(_Strict):
    mode: Literal["literal", "sic"] = "literal"
    objective: Literal["sum-sinr", "sum-rate"] = "sum-sinr"
    inter_ap_interference: bool = False
    enumeration_cap: int = Field(10 ** 6, ge=1)
    power_budget: Literal["per-ap", "total"] = "per-ap"
    fallback: Literal["error", "greedy"] = "error"


class GridConfig(_Strict):
    height: float = Field(1.0, ge=0)


class RunConfig(_Strict):
    receiver: Literal["adr", "wide", "compare", "per-user"] = "compare"
    output_dir: str = "results"


class ScenarioConfig(_Strict):
    name: str = "scenario"
    room: RoomConfig = RoomConfig()
    tracing: TracingConfig = TracingConfig()
    access_points: List[AccessPointConfig]
    users: List[UserConfig]
    receiver: ReceiverConfig = ReceiverConfig()
    noise: NoiseConfig = NoiseConfig()
    noma: NomaConfig = NomaConfig()
    grid: GridConfig = GridConfig()
    run: RunConfig = RunConfig()

    @model_validator(mode="after")
    def _semantic(self):
        if not self.access_points:
            raise ValueError("access_points: at least one access point is required")
        if not self.users:
            raise ValueError("users: at least one user is required")
        return self

    @property
    def ap_ids(self) -> list:
        return [ap.id or f"AP{i + 1}" for i, ap in enumerate(self.access_points)]

    @property
    def user_ids(self) -> list:
        return [u.id or f"U{i + 1}" for i, u in enumerate(self.users)]

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def digest(self) -> str:
        """SHA-256 of the resolved configuration (canonical JSON)."""
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def _line_of(node, loc):
    """Best-effort 1-based line number of the YAML node at ``loc``."""
    line = node.start_mark.line + 1 if node is not None else None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == key:
                    nxt = v
                    line = k.start_mark.line + 1
                    break
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
        if node is None:
            break
    return line


def _field_path(loc) -> str:
    out = ""
    for part in loc:
        if isinstance(part, int):
            out += f"[{part}]"
        else:
            out += ("." if out else "") + str(part)
    return out or "<root>"


def _check_geometry(cfg: ScenarioConfig, node):
    errors = []
    room = cfg.room
    bounds = (room.length, room.width, room.height)
    for group, items in (("access_points", cfg.access_points), ("users", cfg.users)):
        for i, item in enumerate(items):
            p = item.position
            if any(c < -1e-9 or c > b + 1e-9 for c, b in zip(p, bounds)):
                loc = (group, i, "position")
                errors.append((_field_path(loc), f"position {p} lies outside the {bounds} room", _line_of(node, loc)))
    for group, ids in (("access_points", cfg.ap_ids), ("users", cfg.user_ids)):
        seen = set()
        for i, ident in enumerate(ids):
            if ident in seen:
                loc = (group, i, "id")
                errors.append((_field_path(loc), f"duplicate id {ident!r}", _line_of(node, loc)))
            seen.add(ident)
    if errors:
        raise ScenarioValidationError(errors)


def parse_scenario(text: str, source: str = "<string>") -> ScenarioConfig:
    if not text.strip():
        raise ScenarioParseError(f"{source}: empty scenario file")
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        raise ScenarioParseError(f"{source}:{where} {getattr(exc, 'problem', None) or exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioParseError(f"{source}: top level must be a mapping, got {type(data).__name__}")
    try:
        cfg = ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        errors = []
        for err in exc.errors():
            loc = tuple(err["loc"])
            msg = err["msg"]
            if not loc and msg.startswith("Value error, ") and ":" in msg:
                # model-level checks carry their field name in the message
                field, _, msg = msg[len("Value error, "):].partition(": ")
                loc = (field,)
            errors.append((_field_path(loc), msg, _line_of(node, loc)))
        raise ScenarioValidationError(errors) from None
    _check_geometry(cfg, node)
    return cfg


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("vlcnoma") / "scenarios" / f"{name}.yaml"))


def load_scenario(path) -> ScenarioConfig:
    """Read and validate a scenario file. Bundled scenario names are accepted as paths."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        p = bundled_path(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"{path}: {exc.strerror or exc}") from exc
    return parse_scenario(text, str(path))
