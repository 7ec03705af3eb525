# app/core/dataset.py
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from app.core.errors import DimensionMismatch, InvalidDataset, NonFiniteValue


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Training corpus: an n×d feature matrix and the length-n response."""

    features: np.ndarray
    response: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        response = np.asarray(self.response, dtype=float).reshape(-1)

        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise InvalidDataset(f"features must be a non-empty n×d matrix, got shape {features.shape}")
        if response.shape[0] != features.shape[0]:
            raise InvalidDataset(
                f"response length {response.shape[0]} does not match {features.shape[0]} feature rows"
            )
        if not np.all(np.isfinite(features)):
            raise NonFiniteValue("features contain NaN or infinite entries")
        if not np.all(np.isfinite(response)):
            raise NonFiniteValue("response contains NaN or infinite entries")

        names = self.feature_names
        if names is not None:
            names = tuple(str(n) for n in names)
            if len(names) != features.shape[1]:
                raise InvalidDataset(f"{len(names)} feature names for {features.shape[1]} columns")

        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "response", _frozen(response))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True, eq=False)
class TargetPoint:
    coordinates: np.ndarray = field()

    def __post_init__(self):
        coords = np.asarray(self.coordinates, dtype=float).reshape(-1)
        if coords.size < 1:
            raise InvalidDataset("target point needs at least one coordinate")
        if not np.all(np.isfinite(coords)):
            raise NonFiniteValue("target point has NaN or infinite coordinates")
        object.__setattr__(self, "coordinates", _frozen(coords))

    @property
    def d(self) -> int:
        return self.coordinates.shape[0]

    def check_dimension(self, d: int) -> None:
        if self.d != d:
            raise DimensionMismatch(f"target point has {self.d} coordinates, data has {d} features")

    def tolist(self) -> list[float]:
        return self.coordinates.tolist()


def as_target(x: "TargetPoint | Sequence[float] | np.ndarray") -> TargetPoint:
    return x if isinstance(x, TargetPoint) else TargetPoint(np.asarray(x, dtype=float))
