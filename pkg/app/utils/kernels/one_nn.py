# app/utils/kernels/one_nn.py
from dataclasses import dataclass

import numpy as np

from app.core.dataset import Dataset, TargetPoint, as_target
from app.core.random_stream import RandomStream
from app.utils.kernels.base import Kernel


@dataclass(frozen=True, eq=False)
class NearestNeighborPredictor:
    """Predicts the response of the closest stored row; ties go to the lowest row id."""

    row_ids: np.ndarray
    features: np.ndarray
    response: np.ndarray

    def predict(self, x: TargetPoint | np.ndarray) -> float:
        x = as_target(x)
        x.check_dimension(self.features.shape[1])
        dist = np.sum((self.features - x.coordinates) ** 2, axis=1)
        # row_ids are sorted, so argmin's first hit is the lowest id
        return float(self.response[int(np.argmin(dist))])

    def to_dict(self) -> dict:
        return {
            "kind": "nearest",
            "row_ids": self.row_ids.tolist(),
            "features": self.features.tolist(),
            "response": self.response.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "NearestNeighborPredictor":
        return cls(
            np.asarray(payload["row_ids"], dtype=np.int64),
            np.asarray(payload["features"], dtype=float),
            np.asarray(payload["response"], dtype=float),
        )


class OneNNKernel(Kernel):
    name = "one_nn"

    def fit(self, data: Dataset, indices, rs: RandomStream) -> NearestNeighborPredictor:
        rows = np.unique(np.asarray(indices, dtype=np.int64).reshape(-1))
        return NearestNeighborPredictor(rows, data.features[rows], data.response[rows])
