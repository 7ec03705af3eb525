# app/schemas/experiment.py
from enum import Enum

from pydantic import BaseModel, Field, field_validator

from app.core.config import DEFAULT_ALPHA, ForestConfig, SamplingMode
from app.utils.sim_models import SimModel, SimModelName


class ExperimentConfig(BaseModel):
    """One Monte Carlo study. Defaults are desk-scale; larger studies only need bigger counts."""

    model: SimModelName = SimModelName.MARS
    d: int = Field(6, ge=5, description="Covariate dimension (MARS/MLR use the first five)")
    sigma: float = Field(1.0, ge=0.0, description="Noise standard deviation")
    n: int = Field(200, ge=2)
    k: int = Field(100, ge=1)
    m: int = Field(2, ge=1)
    b: int = Field(1000, ge=1)
    mtry: int | None = None
    nodesize: int | None = None
    kernel: str = "tree"
    n_mc: int = Field(300, ge=1)
    n_truth: int = Field(2000, ge=1)
    targets: str = Field("random:10", description="random:<count> | center | file:<path>")
    seed: int = Field(0, ge=0, lt=2**64)
    alpha: float = Field(DEFAULT_ALPHA, gt=0.0, lt=1.0)
    smoothing: int = Field(0, ge=0, description="Number of smoothing neighbours N")
    smooth_refit: bool = False
    workers: int = Field(1, ge=1)

    @field_validator("targets")
    @classmethod
    def _check_targets(cls, value: str) -> str:
        if value == "center" or value.startswith("file:"):
            return value
        if value.startswith("random:") and value.split(":", 1)[1].isdigit() and int(value.split(":", 1)[1]) > 0:
            return value
        raise ValueError("targets must be 'center', 'random:<count>' or 'file:<path>'")

    @property
    def uses_bootstrap(self) -> bool:
        return 2 * self.k > self.n

    def sim_model(self) -> SimModel:
        return SimModel(self.model, d=self.d, sigma=self.sigma)

    def forest_config(self) -> ForestConfig:
        """k <= n/2 uses matched groups; k > n/2 uses B independent subsets plus B bootstrap trees."""
        return ForestConfig(
            k=self.k,
            m=1 if self.uses_bootstrap else self.m,
            b=self.b,
            mtry=self.mtry,
            nodesize=self.nodesize,
            seed=self.seed,
            smoothing_neighbors=self.smoothing,
            alpha=self.alpha,
            mode=SamplingMode.SUBSET if self.uses_bootstrap else SamplingMode.MATCHED,
            kernel=self.kernel,
            smooth_refit=self.smooth_refit,
        )


class TruthRow(BaseModel):
    target_id: int
    truth_mean: float
    truth_var: float
    n_truth: int


class EvalRow(BaseModel):
    target_id: int
    estimator: str
    truth_mean: float
    truth_var: float
    mean_estimate: float
    sd_estimate: float
    relative_bias: float | None = Field(None, description="None when the true variance is zero")
    coverage: float = Field(..., ge=0.0, le=1.0)
    oracle_coverage: float = Field(..., ge=0.0, le=1.0)
    sd_point: float
    n_reps: int
    degenerate: bool = False


class RunState(str, Enum):
    QUEUED = "queued"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


class SimulationStatus(BaseModel):
    run_id: str
    state: RunState = RunState.QUEUED
    completed: int = 0
    total: int
    config: ExperimentConfig
    out_dir: str | None = None
    error: str | None = None
    summary: list[EvalRow] = []
