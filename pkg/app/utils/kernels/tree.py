# app/utils/kernels/tree.py
from app.core.config import ForestConfig
from app.core.dataset import Dataset
from app.core.random_stream import RandomStream
from app.utils.kernels.base import Kernel
from app.utils.tree import Tree, fit_tree


class TreeKernel(Kernel):
    name = "tree"

    def __init__(self, cfg: ForestConfig):
        self.cfg = cfg

    def fit(self, data: Dataset, indices, rs: RandomStream) -> Tree:
        return fit_tree(data, indices, self.cfg, rs)
