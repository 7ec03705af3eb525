# app/utils/kernels/mean.py
from dataclasses import dataclass

import numpy as np

from app.core.dataset import Dataset, TargetPoint, as_target
from app.core.random_stream import RandomStream
from app.utils.kernels.base import Kernel


@dataclass(frozen=True)
class ConstantPredictor:
    value: float

    def predict(self, x: TargetPoint | np.ndarray) -> float:
        return self.value

    def to_dict(self) -> dict:
        return {"kind": "constant", "value": self.value}

    @classmethod
    def from_dict(cls, payload: dict) -> "ConstantPredictor":
        return cls(float(payload["value"]))


class MeanKernel(Kernel):
    """h(S) = average response over S, whatever the target point."""

    name = "mean"

    def fit(self, data: Dataset, indices, rs: RandomStream) -> ConstantPredictor:
        rows = np.sort(np.asarray(indices, dtype=np.int64).reshape(-1))
        return ConstantPredictor(float(data.response[rows].mean()))

    def predict_plan(self, data: Dataset, plan, x: TargetPoint | np.ndarray, rs: RandomStream) -> np.ndarray:
        as_target(x).check_dimension(data.d)
        return data.response[plan.groups].mean(axis=2).T
