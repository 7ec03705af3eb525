# app/utils/sim_models.py
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from app.core.dataset import Dataset
from app.core.random_stream import RandomStream


class SimModelName(str, Enum):
    MARS = "mars"
    MLR = "mlr"
    CONSTANT = "constant"


def mars(x: np.ndarray) -> np.ndarray:
    return (
        10 * np.sin(np.pi * x[:, 0] * x[:, 1])
        + 20 * (x[:, 2] - 0.05) ** 2
        + 10 * x[:, 3]
        + 5 * x[:, 4]
    )


def mlr(x: np.ndarray) -> np.ndarray:
    return 2 * x[:, 0] + 3 * x[:, 1] - 5 * x[:, 2] - x[:, 3] + 1


def constant(x: np.ndarray) -> np.ndarray:
    return np.zeros(x.shape[0])


REGRESSION_FUNCTIONS: dict[SimModelName, Callable[[np.ndarray], np.ndarray]] = {
    SimModelName.MARS: mars,
    SimModelName.MLR: mlr,
    SimModelName.CONSTANT: constant,
}


@dataclass(frozen=True)
class SimModel:
    """Uniform covariates on [0,1]^d with y = g(x) + N(0, sigma^2)."""

    name: SimModelName
    d: int = 6
    sigma: float = 1.0

    def g(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return REGRESSION_FUNCTIONS[self.name](x)


def generate(model: SimModel, n: int, rs: RandomStream) -> Dataset:
    rng = rs.generator()
    x = rng.uniform(0.0, 1.0, size=(n, model.d))
    noise = rng.standard_normal(n)
    y = model.g(x) + model.sigma * noise
    return Dataset(features=x, response=y, feature_names=tuple(f"x{j + 1}" for j in range(model.d)))
