# app/schemas/variance.py
from enum import Enum

from pydantic import BaseModel, Field


class EstimatorMode(str, Enum):
    MATCHED = "matched"
    BOOTSTRAP = "bootstrap"
    SMOOTHED = "smoothed"


class VarianceReport(BaseModel):
    point: float = Field(..., description="Forest prediction at the target (U_match)")
    vh_hat: float = Field(..., description="Estimated single-tree variance")
    vs_hat: float = Field(..., description="Sample variance of all tree predictions")
    variance_raw: float = Field(..., description="Unclipped estimate; may be negative")
    variance: float = Field(..., ge=0.0)
    clipped: bool
    ci_low: float
    ci_high: float
    alpha: float = Field(..., gt=0.0, lt=1.0)
    mode: EstimatorMode
    n_neighbors: int = 0

    def csv_fields(self) -> dict:
        return {
            "point": self.point,
            "vh": self.vh_hat,
            "vs": self.vs_hat,
            "var_raw": self.variance_raw,
            "var": self.variance,
            "clipped": self.clipped,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
        }


class PredictionRow(VarianceReport):
    target_id: int
