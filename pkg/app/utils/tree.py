# app/utils/tree.py
"""
CART-style regression tree fit on one subsample.

Splits maximise the decrease of the weighted within-node sum of squares over
mtry features drawn per node. Thresholds are midpoints between consecutive
distinct values and `x <= threshold` goes left. Ties between equally good
splits go to the lowest feature index, then the lowest threshold.

Duplicated indices (bootstrap multisets) enter as row weights. Rows are
de-duplicated and sorted before fitting and feature draws happen in preorder,
so the fitted tree does not depend on the order of the index set.
"""
import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from app.core.config import ForestConfig, with_defaults
from app.core.dataset import Dataset, TargetPoint, as_target
from app.core.errors import EmptySubsample
from app.core.random_stream import RandomStream

logger = logging.getLogger(__name__)

_MIN_RELATIVE_GAIN = 1e-12


@dataclass(frozen=True)
class Leaf:
    prediction: float
    count: int


@dataclass(frozen=True)
class Internal:
    feature_index: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Internal]


@dataclass(frozen=True)
class Tree:
    root: TreeNode
    k_used: int
    n_features: int
    mtry: int
    nodesize: int

    def predict(self, x: TargetPoint | np.ndarray) -> float:
        return predict_tree(self, x)

    def leaves(self) -> list[Leaf]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Leaf):
                out.append(node)
            else:
                stack.extend((node.right, node.left))
        return out

    def dump(self) -> str:
        lines: list[str] = []

        def walk(node: TreeNode, depth: int) -> None:
            pad = "  " * depth
            if isinstance(node, Leaf):
                lines.append(f"{pad}leaf {node.prediction:.6g} (n={node.count})")
                return
            lines.append(f"{pad}x[{node.feature_index}] <= {node.threshold:.6g}")
            walk(node.left, depth + 1)
            walk(node.right, depth + 1)

        walk(self.root, 0)
        return "\n".join(lines)

    def to_dict(self) -> dict:
        def encode(node: TreeNode) -> dict:
            if isinstance(node, Leaf):
                return {"leaf": node.prediction, "count": node.count}
            return {
                "feature": node.feature_index,
                "threshold": node.threshold,
                "left": encode(node.left),
                "right": encode(node.right),
            }

        return {
            "kind": "tree",
            "k_used": self.k_used,
            "n_features": self.n_features,
            "mtry": self.mtry,
            "nodesize": self.nodesize,
            "root": encode(self.root),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Tree":
        def decode(raw: dict) -> TreeNode:
            if "leaf" in raw:
                return Leaf(float(raw["leaf"]), int(raw["count"]))
            return Internal(int(raw["feature"]), float(raw["threshold"]), decode(raw["left"]), decode(raw["right"]))

        return cls(
            root=decode(payload["root"]),
            k_used=int(payload["k_used"]),
            n_features=int(payload["n_features"]),
            mtry=int(payload["mtry"]),
            nodesize=int(payload["nodesize"]),
        )


def _best_split_for_feature(
    xs: np.ndarray, yc: np.ndarray, w: np.ndarray, parent_sse: float, nodesize: int
) -> tuple[float, float] | None:
    """Best (gain, threshold) on one feature, or None when no admissible cut exists."""
    order = np.argsort(xs, kind="stable")
    xs, yc, w = xs[order], yc[order], w[order]

    total_w = w.sum()
    cw = np.cumsum(w)[:-1]
    cy = np.cumsum(w * yc)[:-1]
    cy2 = np.cumsum(w * yc * yc)[:-1]
    tot_y = float(np.dot(w, yc))
    tot_y2 = float(np.dot(w, yc * yc))

    admissible = (xs[:-1] < xs[1:]) & (cw >= nodesize) & (total_w - cw >= nodesize)
    if not admissible.any():
        return None

    rw = total_w - cw
    sse_left = cy2 - cy * cy / cw
    sse_right = (tot_y2 - cy2) - (tot_y - cy) ** 2 / rw
    gain = np.where(admissible, parent_sse - sse_left - sse_right, -np.inf)

    j = int(np.argmax(gain))
    lo, hi = xs[j], xs[j + 1]
    threshold = 0.5 * (lo + hi)
    if not lo <= threshold < hi:
        threshold = lo
    return float(gain[j]), float(threshold)


def fit_tree(data: Dataset, indices, cfg: ForestConfig, rs: RandomStream) -> Tree:
    """Fit one regression tree on data rows `indices` (a set or a multiset)."""
    indices = np.asarray(indices, dtype=np.int64).reshape(-1)
    if indices.size == 0:
        raise EmptySubsample("cannot fit a tree on an empty subsample")

    cfg = with_defaults(cfg, data.n, data.d)
    mtry = min(cfg.mtry, data.d)
    nodesize = cfg.nodesize

    rows, counts = np.unique(indices, return_counts=True)
    X = data.features[rows]
    y = data.response[rows]
    w = counts.astype(float)
    rng = rs.generator()

    def build(node_rows: np.ndarray) -> TreeNode:
        wn = w[node_rows]
        yn = y[node_rows]
        count = float(wn.sum())
        mean = float(np.dot(wn, yn) / count)
        leaf = Leaf(mean, int(round(count)))

        if count < 2 * nodesize or np.ptp(yn) == 0.0:
            return leaf

        yc = yn - mean
        parent_sse = float(np.dot(wn, yc * yc))
        features = np.sort(rng.choice(data.d, size=mtry, replace=False))

        best: tuple[float, int, float] | None = None
        for f in features:
            found = _best_split_for_feature(X[node_rows, f], yc, wn, parent_sse, nodesize)
            if found is None:
                continue
            gain, threshold = found
            if best is None or gain > best[0]:
                best = (gain, int(f), threshold)

        if best is None or best[0] <= _MIN_RELATIVE_GAIN * parent_sse:
            return leaf

        _, feature, threshold = best
        goes_left = X[node_rows, feature] <= threshold
        return Internal(feature, threshold, build(node_rows[goes_left]), build(node_rows[~goes_left]))

    root = build(np.arange(rows.size))
    return Tree(root=root, k_used=int(indices.size), n_features=data.d, mtry=mtry, nodesize=nodesize)


def predict_tree(t: Tree, x: TargetPoint | np.ndarray) -> float:
    x = as_target(x)
    x.check_dimension(t.n_features)
    coords = x.coordinates
    node = t.root
    while isinstance(node, Internal):
        node = node.left if coords[node.feature_index] <= node.threshold else node.right
    return node.prediction
