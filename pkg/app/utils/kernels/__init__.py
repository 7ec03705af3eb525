from typing import Callable

from app.core.config import ForestConfig
from .base import Kernel, Predictor
from .mean import ConstantPredictor, MeanKernel
from .one_nn import NearestNeighborPredictor, OneNNKernel
from .tree import TreeKernel
from app.utils.tree import Tree

KERNELS: dict[str, Callable[[ForestConfig], Kernel]] = {
    "tree": TreeKernel,
    "mean": lambda cfg: MeanKernel(),
    "one_nn": lambda cfg: OneNNKernel(),
}

PREDICTOR_LOADERS: dict[str, Callable[[dict], Predictor]] = {
    "tree": Tree.from_dict,
    "constant": ConstantPredictor.from_dict,
    "nearest": NearestNeighborPredictor.from_dict,
}


def make_kernel(cfg: ForestConfig) -> Kernel:
    factory = KERNELS.get(cfg.kernel)
    if factory is None:
        raise ValueError(f"Unknown kernel '{cfg.kernel}', expected one of {sorted(KERNELS)}")
    return factory(cfg)


def load_predictor(payload: dict) -> Predictor:
    loader = PREDICTOR_LOADERS.get(payload.get("kind"))
    if loader is None:
        raise ValueError(f"Unknown predictor kind '{payload.get('kind')}'")
    return loader(payload)


__all__ = ["KERNELS", "Kernel", "Predictor", "make_kernel", "load_predictor"]
