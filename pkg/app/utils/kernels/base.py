# app/utils/kernels/base.py
from abc import ABC, abstractmethod
from typing import Protocol

import numpy as np

from app.core.dataset import Dataset, TargetPoint, as_target
from app.core.random_stream import TREE, RandomStream


class Predictor(Protocol):
    def predict(self, x: TargetPoint | np.ndarray) -> float: ...

    def to_dict(self) -> dict: ...


class Kernel(ABC):
    """
    A size-k kernel h(S): fitted on an index subset of the data, evaluated at
    a target point. Implementations must be symmetric in the subset and
    deterministic given the stream.
    """

    name: str = "kernel"

    @abstractmethod
    def fit(self, data: Dataset, indices, rs: RandomStream) -> Predictor: ...

    def evaluate(self, data: Dataset, indices, x: TargetPoint | np.ndarray, rs: RandomStream) -> float:
        return self.fit(data, indices, rs).predict(as_target(x))

    def predict_plan(self, data: Dataset, plan, x: TargetPoint | np.ndarray, rs: RandomStream) -> np.ndarray:
        """M×B predictions at x for every plan entry without keeping the fits."""
        x = as_target(x)
        out = np.empty((plan.m, plan.b))
        for b in range(plan.b):
            for i in range(plan.m):
                out[i, b] = self.evaluate(data, plan.subset(b, i), x, rs.split([TREE, b, i]))
        return out
