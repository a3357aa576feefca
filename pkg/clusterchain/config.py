from __future__ import annotations

import json
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from clusterchain.errors import ConfigError

load_dotenv()

ExperimentName = Literal[
    "autocorr",
    "lindblad_evolve",
    "trajectories",
    "gap_scan",
    "pt_scan",
    "degeneracy_scan",
    "fidelity_protocol",
    "steady_space",
]


@dataclass
class Settings:
    out_dir: Path = Path("results")
    threads: int = 1
    log_path: Path = Path("logs/clusterchain.log")
    log_level: str = "INFO"
    pure_cap: int = 20
    superoperator_cap: int = 8
    transfer_cap: int = 8
    fragment_cap: int = 10


def get_settings() -> Settings:
    return Settings(
        out_dir=Path(os.getenv("CLUSTERCHAIN_OUT_DIR", "results")),
        threads=int(os.getenv("CLUSTERCHAIN_THREADS", "1")),
        log_path=Path(os.getenv("CLUSTERCHAIN_LOG_PATH", "logs/clusterchain.log")),
        log_level=os.getenv("CLUSTERCHAIN_LOG_LEVEL", "INFO"),
        pure_cap=int(os.getenv("CLUSTERCHAIN_PURE_CAP", "20")),
        superoperator_cap=int(os.getenv("CLUSTERCHAIN_SUPEROPERATOR_CAP", "8")),
        transfer_cap=int(os.getenv("CLUSTERCHAIN_TRANSFER_CAP", "8")),
        fragment_cap=int(os.getenv("CLUSTERCHAIN_FRAGMENT_CAP", "10")),
    )


# ---- experiment files ------------------------------------------------------


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Section):
    n: int = Field(8, ge=4)
    j: float = Field(1.0, gt=0)
    kappa: float = Field(2.5, ge=0)
    v_xx: float = 0.0
    v_y: float = 0.0
    jumps: Literal["ZIZ", "Y", "SxMinus", "custom"] = "ZIZ"
    custom_jumps: list[str] = Field(default_factory=list)

    @field_validator("n")
    @classmethod
    def _even(cls, v: int) -> int:
        if v % 2:
            raise ValueError("chain length must be even")
        return v

    @model_validator(mode="after")
    def _custom(self) -> ModelSection:
        if self.jumps == "custom" and not self.custom_jumps:
            raise ValueError("jumps = 'custom' needs custom_jumps")
        return self


class InitialStateSection(_Section):
    preset: Literal["cluster", "random_cluster", "edge_superposition", "left_xyz"] = "cluster"
    basis: Literal["edge_mode", "flip_symmetry"] = "edge_mode"
    signs: list[int] | None = None
    bloch: tuple[float, float, float] = (1.0, 1.0, 1.0)


class ScheduleSection(_Section):
    t_max: float = Field(50.0, gt=0)
    n_samples: int = Field(101, ge=2)
    n_traj: int = Field(1000, ge=1)
    base_seed: int = Field(0, ge=0)
    threads: int = Field(1, ge=1)


class ParamsSection(_Section):
    observable: str = "Z_1"
    method: Literal["auto", "heisenberg", "superoperator"] = "auto"
    kappa_grid: list[float] | None = None
    kappa_min: float = Field(0.05, gt=0)
    kappa_max: float = Field(5.0, gt=0)
    kappa_points: int = Field(20, ge=2)
    numeric: bool = True
    perturbation: Literal["XX", "Y"] = "XX"
    n_values: list[int] = Field(default_factory=lambda: [6, 8])
    v_xx_values: list[float] | None = None
    cut: int | None = None
    threshold: float = Field(0.75, gt=0, lt=1)
    fidelity_mode: Literal["left", "right", "pair"] = "left"
    histogram_bins: int = Field(40, ge=1)
    tolerance: float | None = None


class OutputSection(_Section):
    dir: Path | None = None
    stem: str | None = None


class ExperimentConfig(_Section):
    experiment: ExperimentName
    model: ModelSection = Field(default_factory=ModelSection)
    initial_state: InitialStateSection = Field(default_factory=InitialStateSection)
    schedule: ScheduleSection = Field(default_factory=ScheduleSection)
    params: ParamsSection = Field(default_factory=ParamsSection)
    output: OutputSection = Field(default_factory=OutputSection)

    def kappa_grid(self) -> list[float]:
        p = self.params
        if p.kappa_grid is not None:
            return [float(x) for x in p.kappa_grid]
        return np.linspace(p.kappa_min, p.kappa_max, p.kappa_points).tolist()

    def sample_times(self) -> list[float]:
        s = self.schedule
        return np.linspace(0.0, s.t_max, s.n_samples).tolist()


def _describe(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        where = ".".join(str(part) for part in err["loc"]) or "<root>"
        lines.append(f"{where}: {err['msg']}")
    return "; ".join(lines)


def parse_experiment_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid experiment config: {_describe(exc)}") from exc


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    """Load a TOML config, or a JSON sidecar written by a previous run."""
    path = Path(path)
    try:
        with path.open("rb") as f:
            data = json.load(f) if path.suffix == ".json" else tomllib.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_experiment_config(data)
