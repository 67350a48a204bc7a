"""
Experiment configuration: a flat pydantic model and its TOML loader.
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.config import DEFAULT_EXPERIMENT_SETTINGS, RUNS_DIR
from core.errors import ConfigError
from core.grf import default_spacing, max_feasible_scales

D = DEFAULT_EXPERIMENT_SETTINGS


class ExperimentKind(str, Enum):
    FIELD = "field"
    GEODESIC = "geodesic"
    BALL = "ball"
    SLE = "sle"
    CROSSINGS = "crossings"
    SCALES = "scales"
    DIMENSION = "dimension"
    REMOVABILITY = "removability"
    COMPARE = "compare"


# Experiments that build an LFPP graph from a sampled field
GRAPH_EXPERIMENTS = {
    ExperimentKind.GEODESIC,
    ExperimentKind.BALL,
    ExperimentKind.SCALES,
    ExperimentKind.DIMENSION,
    ExperimentKind.REMOVABILITY,
}


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    experiment: ExperimentKind
    grid_size: int = Field(D["grid_size"], ge=8)  # lattice side N
    spacing: Optional[float] = Field(None, gt=0)  # default 4 / N
    boundary: Literal["whole_plane", "zero"] = D["boundary"]
    xi: float = Field(D["xi"], gt=0)  # LFPP weight exponent
    gamma: float = Field(D["gamma"], gt=0, lt=2)  # LQG parameter
    kappa: float = Field(D["kappa"], gt=0)  # SLE parameter
    epsilon_list: List[float] = Field(default_factory=lambda: list(D["epsilon_list"]), min_length=1)
    alpha: float = Field(D["alpha"], gt=1)  # inner radius epsilon^alpha
    K: int = Field(D["K"], ge=1)  # number of dyadic scales
    M: float = Field(D["M"], gt=0)  # M-good threshold
    c: float = Field(D["c"], gt=0)  # L1 <= c L2 comparison constant
    dt: float = Field(D["dt"], gt=0)  # Loewner / diffusion time step
    horizon: float = Field(D["horizon"], gt=0)
    replicas: int = Field(D["replicas"], ge=1)
    seed: int = Field(D["seed"], ge=0)
    output_dir: Path = RUNS_DIR / "latest"
    sle_variant: Literal["chordal", "whole_plane"] = D["sle_variant"]
    path_source: Literal["geodesic", "sle"] = D["path_source"]
    num_pairs: int = Field(D["num_pairs"], ge=1)
    base_radius: Optional[float] = Field(None, gt=0)  # default: a quarter of the grid side
    ball_radius: Optional[float] = Field(None, gt=0)  # metric radius; default from the grid
    delta_list: List[float] = Field(default_factory=lambda: list(D["delta_list"]), min_length=1)
    max_depth: int = Field(D["max_depth"], ge=1, le=12)
    walkers_per_cube: int = Field(D["walkers_per_cube"], ge=16)
    stride: int = Field(D["stride"], ge=1)

    @property
    def lattice_spacing(self) -> float:
        return self.spacing if self.spacing is not None else default_spacing(self.grid_size)

    @property
    def scan_radius(self) -> float:
        if self.base_radius is not None:
            return self.base_radius
        return self.grid_size * self.lattice_spacing / 4.0

    @property
    def uses_graph(self) -> bool:
        if self.experiment in GRAPH_EXPERIMENTS or self.experiment is ExperimentKind.COMPARE:
            return True
        return self.experiment is ExperimentKind.CROSSINGS and self.path_source == "geodesic"

    @property
    def uses_trace(self) -> bool:
        if self.experiment in (ExperimentKind.SLE, ExperimentKind.COMPARE):
            return True
        return self.experiment is ExperimentKind.CROSSINGS and self.path_source == "sle"

    @model_validator(mode="after")
    def check_preconditions(self):
        s = self.lattice_spacing
        needs_field = self.experiment is ExperimentKind.FIELD or self.uses_graph
        if needs_field and self.boundary == "whole_plane":
            if self.grid_size & (self.grid_size - 1):
                raise ConfigError("grid_size", f"whole-plane fields need a power of two, got {self.grid_size}")
            if (self.grid_size - 1) * s / 2.0 < 1.0:
                raise ConfigError("spacing", "the unit circle must fit the grid to fix the additive constant")

        for epsilon in self.epsilon_list:
            if not 0.0 < epsilon < 1.0:
                raise ConfigError("epsilon_list", f"every epsilon must lie in (0, 1), got {epsilon}")
        if self.experiment in (ExperimentKind.CROSSINGS, ExperimentKind.COMPARE) and self.uses_graph:
            for epsilon in self.epsilon_list:
                if not epsilon**self.alpha > 4.0 * s:
                    raise ConfigError(
                        "epsilon_list",
                        f"epsilon^alpha = {epsilon ** self.alpha:.4g} must exceed 4 lattice steps ({4.0 * s:.4g})",
                    )

        if self.uses_trace and self.horizon < self.dt:
            raise ConfigError("horizon", f"horizon {self.horizon} is shorter than dt {self.dt}")

        if self.experiment is ExperimentKind.SCALES:
            limit = max_feasible_scales(self.scan_radius, s, min_steps=8.0)
            if self.K > limit:
                raise ConfigError("K", f"K = {self.K} exceeds the lattice resolution; max feasible K is {limit}")

        for delta in self.delta_list:
            if not 0.0 < delta < 1.0:
                raise ConfigError("delta_list", f"every delta must lie in (0, 1), got {delta}")
        return self

    def echo(self) -> Dict[str, Any]:
        """Plain JSON-ready dict of every setting, defaults included."""
        return self.model_dump(mode="json")


def validate_config(data: Dict[str, Any]) -> ExperimentConfig:
    """Build a config, reporting the first failing field as a ConfigError."""
    try:
        return ExperimentConfig(**data)
    except ValidationError as e:
        error = e.errors()[0]
        cause = error.get("ctx", {}).get("error")
        if isinstance(cause, ConfigError):
            raise cause from None
        field = ".".join(str(part) for part in error["loc"]) or "config"
        raise ConfigError(field, error["msg"]) from None


def read_config_file(path: Path) -> Dict[str, Any]:
    """Parse a flat `key = value` TOML file."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError("config", f"{path}: {e}") from None
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigError(key, "nested tables are not supported in experiment configs")
    return data


def load_config(
    path: Optional[Path] = None, experiment: Optional[str] = None, **overrides: Any
) -> ExperimentConfig:
    """Read a config file (optional), apply CLI overrides and validate."""
    data = read_config_file(path) if path is not None else {}
    if experiment is not None:
        if "experiment" in data and data["experiment"] != experiment:
            raise ConfigError("experiment", f"config file is for {data['experiment']!r}, not {experiment!r}")
        data["experiment"] = experiment
    data.update({key: value for key, value in overrides.items() if value is not None})
    return validate_config(data)

