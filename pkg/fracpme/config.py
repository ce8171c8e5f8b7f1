"""Run configuration shared by every command of the command-line tool.

A :class:`RunConfig` holds everything a command needs, so that a run saved
with ``--save-config`` and replayed with ``--config`` writes byte-identical
tables.
"""
import logging
import math
from datetime import datetime, timezone
from enum import Enum
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from fracpme.analysis import MU_CUTOFF
from fracpme.diffusion import BoundaryCondition
from fracpme.exceptions import ConfigError

logger = logging.getLogger(__name__)


class Command(str, Enum):
    SOLVE = "solve"
    FRONT = "front"
    ORDER = "order"
    M0 = "m0"
    FD = "fd"
    BENCH = "bench"
    PROFILE = "profile"


class BcChoice(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    ROBIN = "robin"
    ALL = "all"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunConfig(BaseModel):
    """Validated parameters of one command run.

    Only the fields a command reads matter for it; the others keep their
    defaults and are ignored.
    """

    model_config = ConfigDict(extra="forbid")

    command: Command
    alpha: float = Field(0.5, gt=0, le=1)
    m: float = Field(2.0, ge=1)
    bc: BcChoice = BcChoice.DIRICHLET
    n_steps: int = Field(100, ge=4)
    method: Literal["rectangle", "trapezoid", "naive"] = "trapezoid"
    start: Literal["extrapolated", "finite"] = "extrapolated"
    kernel: Literal["diffusion", "power", "sine"] = "diffusion"
    output_path: Optional[str] = None
    format: OutputFormat = OutputFormat.CSV

    # command specific
    t: float = Field(1.0, gt=0)
    n_x: int = Field(201, ge=2)
    sweep: bool = False
    base_n: int = Field(100, ge=10)
    alphas: List[float] = Field(default_factory=lambda: [0.3, 0.5, 0.7])
    ms: List[float] = Field(default_factory=lambda: [1.0, 3.0, 7.0])
    gammas: List[float] = Field(default_factory=lambda: [0.0, 0.5, math.sqrt(2.0), math.pi])
    tolerances: List[float] = Field(default_factory=lambda: [1e-2, 1e-3, 1e-4])
    dt: float = Field(0.01, gt=0)
    dx: float = Field(0.01, gt=0)
    x_max: float = Field(3.0, gt=0)
    t_final: float = Field(1.0, gt=0)
    theta: float = Field(1.0, ge=0, le=1)
    timeout: float = Field(60.0, gt=0)
    reference_n: int = Field(400, ge=4)
    grid_n: int = Field(200, ge=16)
    minus_cutoff: float = Field(MU_CUTOFF, gt=0, le=1)
    neumann_a_mode: Literal["derived", "table"] = "derived"
    n_jobs: Optional[int] = Field(None, ge=1)
    created_at: str = Field(default_factory=_now_iso)

    @field_validator("base_n")
    @classmethod
    def _even_base(cls, v):
        if v % 2:
            raise ValueError(f"base_n must be even, got {v}")
        return v

    @field_validator("alphas")
    @classmethod
    def _alphas_in_range(cls, v):
        if not v or any(not 0 < a <= 1 for a in v):
            raise ValueError("alphas must be a non-empty list in (0, 1]")
        return v

    @field_validator("ms")
    @classmethod
    def _ms_in_range(cls, v):
        if not v or any(not m >= 1 for m in v):
            raise ValueError("ms must be a non-empty list of values >= 1")
        return v

    @field_validator("gammas")
    @classmethod
    def _gammas_in_range(cls, v):
        if not v or any(not g >= 0 for g in v):
            raise ValueError("gammas must be a non-empty list of values >= 0")
        return v

    @field_validator("tolerances")
    @classmethod
    def _tolerances_decreasing(cls, v):
        if len(v) < 3 or v[-1] <= 0 or any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("tolerances must be at least three positive decreasing values")
        return v

    @model_validator(mode="after")
    def _check_command(self):
        if self.command is Command.BENCH and self.bc is not BcChoice.DIRICHLET:
            raise ValueError("bench runs on the Dirichlet problem only")
        if self.command is Command.M0 and any(a > 0.99 for a in self.alphas):
            raise ValueError("m0 needs alphas <= 0.99")
        if self.command is Command.FD and not (self.t_final >= self.dt and self.x_max >= 4 * self.dx):
            raise ValueError("fd grid needs t_final >= dt and x_max >= 4 dx")
        if self.output_path is None:
            self.output_path = f"fracpme_{self.command.value}.{self.format.value}"
        return self

    def boundary_conditions(self) -> List[BoundaryCondition]:
        if self.bc is BcChoice.ALL:
            return list(BoundaryCondition)
        return [BoundaryCondition(self.bc.value)]

    def metadata(self) -> dict:
        """Header entries: every parameter that can change the numbers."""
        skip = {"command", "output_path", "format", "created_at", "n_jobs"}
        return self.model_dump(mode="json", exclude=skip)


def build_config(**values) -> RunConfig:
    try:
        return RunConfig(**values)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str, **overrides) -> RunConfig:
    """Read a JSON config; ``overrides`` replace its entries before validation."""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = RunConfig.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    if not overrides:
        return cfg
    data = cfg.model_dump(mode="json")
    data.update(overrides)
    return build_config(**data)


def save_config(cfg: RunConfig, path: str) -> str:
    with open(path, "w") as f:
        f.write(cfg.model_dump_json(indent=2) + "\n")
    logger.info("saved config to %s", path)
    return path
