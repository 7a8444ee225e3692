"""Phase 4: a random forest of CART trees over the 8 request features.

Trees are grown on bootstrap samples with Gini splits over a random subset of
features at each node. Everything random draws from a SeedSequence rooted at the
training seed, so (data, params, seed) fully determine the model.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dns_model import FEATURE_NAMES, FeatureVector
from .metrics import MetricsReport, evaluate_predictions

MAGIC = "MONDEO-RF-v1"
N_FEATURES = len(FEATURE_NAMES)
LEAF = -1


class DatasetTooSmall(ValueError):
    pass


class SingleClassTraining(UserWarning):
    """Training labels were all identical; the model predicts that class everywhere."""


@dataclass
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64).reshape(-1, N_FEATURES)
        self.y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        if len(self.X) != len(self.y):
            raise ValueError("X and y differ in length")
        if not np.isin(self.y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[FeatureVector, int]], provenance: str = "") -> LabeledDataset:
        rows = list(rows)
        X = np.array([r[0] for r in rows], dtype=np.float64).reshape(-1, N_FEATURES)
        return cls(X, np.array([r[1] for r in rows], dtype=np.int64), provenance)

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, idx: np.ndarray, tag: str) -> LabeledDataset:
        return LabeledDataset(self.X[idx], self.y[idx], f"{self.provenance}:{tag}")


def split_train_test(data: LabeledDataset, train_fraction: float = 0.8,
                     seed: int = 0) -> tuple[LabeledDataset, LabeledDataset]:
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    n = len(data)
    if n < 10:
        raise DatasetTooSmall(f"need at least 10 rows, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = math.floor(n * train_fraction + 0.5)
    return data.subset(perm[:n_train], "train"), data.subset(perm[n_train:], "test")


@dataclass
class DecisionTree:
    """Flattened binary tree. Node i is a leaf when ``feature[i] == LEAF``."""

    feature: list[int]
    threshold: list[float]
    left: list[int]
    right: list[int]
    count0: list[int]
    count1: list[int]

    def leaf_for(self, x: Sequence[float]) -> int:
        feature, threshold, left, right = self.feature, self.threshold, self.left, self.right
        i = 0
        while feature[i] != LEAF:
            i = left[i] if x[feature[i]] <= threshold[i] else right[i]
        return i

    def predict_one(self, x: Sequence[float]) -> int:
        i = self.leaf_for(x)
        return 1 if self.count1[i] >= self.count0[i] else 0

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left, right = np.asarray(self.left), np.asarray(self.right)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = feature[node] != LEAF
        while active.any():
            f = feature[node]
            go_left = X[rows, np.where(active, f, 0)] <= threshold[node]
            node = np.where(active, np.where(go_left, left[node], right[node]), node)
            active = feature[node] != LEAF
        c0, c1 = np.asarray(self.count0)[node], np.asarray(self.count1)[node]
        return (c1 >= c0).astype(np.int64)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def to_dict(self) -> dict:
        return {"feature": self.feature, "threshold": self.threshold, "left": self.left,
                "right": self.right, "count0": self.count0, "count1": self.count1}

    @classmethod
    def from_dict(cls, d: dict) -> DecisionTree:
        tree = cls([int(v) for v in d["feature"]], [float(v) for v in d["threshold"]],
                   [int(v) for v in d["left"]], [int(v) for v in d["right"]],
                   [int(v) for v in d["count0"]], [int(v) for v in d["count1"]])
        tree.validate()
        return tree

    def validate(self) -> None:
        n = self.n_nodes
        if n == 0 or not all(len(a) == n for a in (self.threshold, self.left, self.right, self.count0, self.count1)):
            raise ValueError("tree arrays are empty or of unequal length")
        for i in range(n):
            f = self.feature[i]
            if f == LEAF:
                if self.count0[i] + self.count1[i] <= 0:
                    raise ValueError(f"leaf {i} has no samples")
            elif not (0 <= f < N_FEATURES and 0 < self.left[i] < n and 0 < self.right[i] < n):
                raise ValueError(f"node {i} has a bad feature or child index")


@dataclass
class ForestParams:
    n_trees: int = 100
    max_depth: int = 16
    min_samples_leaf: int = 2
    max_features: int = math.ceil(math.sqrt(N_FEATURES))
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValueError("max_depth and min_samples_leaf must be >= 1")
        if not 1 <= self.max_features <= N_FEATURES:
            raise ValueError(f"max_features must be in 1..{N_FEATURES}")


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    params: ForestParams = field(default_factory=ForestParams)
    warnings: list[str] = field(default_factory=list)

    @property
    def single_class(self) -> bool:
        return "SingleClassTraining" in self.warnings

    def predict(self, x: Sequence[float]) -> int:
        return predict(self, x)

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64).reshape(-1, N_FEATURES)
        votes = np.zeros(len(X), dtype=np.int64)
        for t in self.trees:
            votes += t.predict_many(X)
        return (2 * votes >= len(self.trees)).astype(np.int64)

    def to_dict(self) -> dict:
        p = self.params
        return {
            "magic": MAGIC,
            "features": list(FEATURE_NAMES),
            "params": {"n_trees": p.n_trees, "max_depth": p.max_depth,
                       "min_samples_leaf": p.min_samples_leaf,
                       "max_features": p.max_features, "seed": p.seed},
            "warnings": list(self.warnings),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> ForestModel:
        if d.get("magic") != MAGIC:
            raise ValueError(f"not a {MAGIC} model")
        trees = [DecisionTree.from_dict(t) for t in d["trees"]]
        if not trees:
            raise ValueError("model has no trees")
        return cls(trees, ForestParams(**d["params"]), list(d.get("warnings", [])))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> ForestModel:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def predict(model: ForestModel, x: Sequence[float]) -> int:
    """Majority vote; a tied vote goes to infected (1)."""
    ones = 0
    for t in model.trees:
        ones += t.predict_one(x)
    return 1 if 2 * ones >= len(model.trees) else 0


# --- training ---------------------------------------------------------------

def _best_split(X: np.ndarray, y: np.ndarray, f: int, min_leaf: int) -> tuple[float, float] | None:
    """Lowest weighted Gini over thresholds on feature ``f``: (impurity, threshold)."""
    n = len(y)
    order = np.argsort(X[:, f], kind="stable")
    xs = X[order, f]
    ones = np.cumsum(y[order])[:-1].astype(np.float64)
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    ones_right = float(y.sum()) - ones
    valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    p_left = ones / n_left
    p_right = ones_right / n_right
    gini_left = 2.0 * p_left * (1.0 - p_left)
    gini_right = 2.0 * p_right * (1.0 - p_right)
    weighted = (n_left * gini_left + n_right * gini_right) / n
    weighted = np.where(valid, weighted, np.inf)
    i = int(np.argmin(weighted))
    lo, hi = xs[i], xs[i + 1]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return float(weighted[i]), float(thr)


def _grow(X: np.ndarray, y: np.ndarray, params: ForestParams, rng: np.random.Generator) -> DecisionTree:
    tree = DecisionTree([], [], [], [], [], [])

    def new_node(ys: np.ndarray) -> int:
        c1 = int(ys.sum())
        tree.feature.append(LEAF)
        tree.threshold.append(0.0)
        tree.left.append(LEAF)
        tree.right.append(LEAF)
        tree.count0.append(len(ys) - c1)
        tree.count1.append(c1)
        return len(tree.feature) - 1

    def build(idx: np.ndarray, depth: int) -> int:
        ys = y[idx]
        node = new_node(ys)
        c1 = tree.count1[node]
        if depth >= params.max_depth or c1 == 0 or c1 == len(ys) or len(ys) < 2 * params.min_samples_leaf:
            return node
        Xn = X[idx]
        best = None
        perm = rng.permutation(N_FEATURES)
        # keep drawing features past max_features only while none of them can split
        for rank, f in enumerate(perm):
            if rank >= params.max_features and best is not None:
                break
            found = _best_split(Xn, ys, int(f), params.min_samples_leaf)
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], found[1], int(f))
        if best is None:
            return node
        _, thr, f = best
        mask = Xn[:, f] <= thr
        tree.feature[node] = f
        tree.threshold[node] = thr
        tree.left[node] = build(idx[mask], depth + 1)
        tree.right[node] = build(idx[~mask], depth + 1)
        return node

    build(np.arange(len(y)), 0)
    return tree


def train_forest(train: LabeledDataset, params: ForestParams | None = None, **overrides) -> ForestModel:
    """Fit ``n_trees`` trees, each on a same-size bootstrap sample of ``train``.

    Keyword overrides (n_trees, max_depth, min_samples_leaf, seed, ...) replace
    fields of ``params``. A single-class training set still yields a model, with
    ``SingleClassTraining`` recorded in its warnings.
    """
    if params is None:
        params = ForestParams(**overrides)
    elif overrides:
        params = ForestParams(**{**params.__dict__, **overrides})
    n = len(train)
    if n == 0:
        raise DatasetTooSmall("training set is empty")
    notes = []
    if len(np.unique(train.y)) < 2:
        notes.append("SingleClassTraining")
        warnings.warn("all training labels are identical", SingleClassTraining, stacklevel=2)
    trees = []
    for child in np.random.SeedSequence(params.seed).spawn(params.n_trees):
        rng = np.random.default_rng(child)
        boot = rng.integers(0, n, size=n)
        trees.append(_grow(train.X[boot], train.y[boot], params, rng))
    return ForestModel(trees, params, notes)


def evaluate(model: ForestModel, test: LabeledDataset) -> MetricsReport:
    return evaluate_predictions(test.y.tolist(), model.predict_many(test.X).tolist())
