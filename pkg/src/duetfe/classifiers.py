"""Desk-scale classifiers with fully pinned determinism.

Decision tree: Gini CART with midpoint thresholds between sorted distinct
values; ties broken by lowest feature index then lowest threshold, so
training is independent of row order.  The forest draws bootstrap rows and
per-split feature subsets from a SplitMix64 stream so any implementation of
the same recipe reproduces identical ensembles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 PRNG.

    state += 0x9E3779B97F4A7C15; z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
    output = z ^ (z >> 31).
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def randint(self, n: int) -> int:
        return self.next_u64() % n

    def bootstrap_indices(self, n: int) -> np.ndarray:
        return np.array([self.randint(n) for _ in range(n)], dtype=int)

    def choose(self, n: int, m: int) -> np.ndarray:
        """m distinct values from range(n), partial Fisher-Yates, sorted."""
        pool = list(range(n))
        for i in range(min(m, n)):
            j = i + self.randint(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return np.array(sorted(pool[: min(m, n)]), dtype=int)


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str  # decision_tree | random_forest | knn
    max_depth: int = 8
    min_samples_leaf: int = 2
    n_trees: int = 100
    seed: int = 0
    k: int = 5

    def __post_init__(self):
        if self.kind not in ("decision_tree", "random_forest", "knn"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if min(self.max_depth, self.min_samples_leaf, self.n_trees, self.k) < 1:
            raise ValueError("classifier counts must be >= 1")


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node" = None
    right: "_Node" = None
    prediction: int = -1  # leaf class when >= 0


def _majority(counts: np.ndarray) -> int:
    return int(np.argmax(counts))  # argmax ties -> lowest class index


def _best_split(X, y, n_classes, feature_ids, min_leaf):
    """Minimal weighted-Gini split over candidate features.

    Score is n_l*gini_l + n_r*gini_r computed from integer class counts, so
    the result does not depend on row order.  Returns (feature, threshold)
    or None.
    """
    n = len(y)
    best_score = None
    best = None
    for f in feature_ids:
        values = X[:, f]
        order = np.argsort(values, kind="stable")
        sorted_vals = values[order]
        sorted_y = y[order]
        # prefix class counts at each position
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), sorted_y] = 1.0
        prefix = np.cumsum(onehot, axis=0)
        total = prefix[-1]
        # candidate cut after position p where value changes
        change = np.flatnonzero(sorted_vals[1:] > sorted_vals[:-1])
        for p in change:
            n_l = p + 1
            n_r = n - n_l
            if n_l < min_leaf or n_r < min_leaf:
                continue
            left_counts = prefix[p]
            right_counts = total - left_counts
            score = (n_l - left_counts @ left_counts / n_l) + (
                n_r - right_counts @ right_counts / n_r
            )
            if best_score is None or score < best_score - 1e-12:
                threshold = (sorted_vals[p] + sorted_vals[p + 1]) / 2.0
                best_score = score
                best = (f, float(threshold))
    return best


class DecisionTree:
    def __init__(self, max_depth=8, min_samples_leaf=2, rng: SplitMix64 = None,
                 n_subsample_features: int = None):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.rng = rng
        self.n_subsample_features = n_subsample_features
        self.root = None
        self.n_classes = 0

    def fit(self, X, y, n_classes: int = None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        self.n_classes = n_classes if n_classes is not None else int(y.max()) + 1
        self.root = self._grow(X, y, depth=0)
        return self

    def _grow(self, X, y, depth):
        counts = np.bincount(y, minlength=self.n_classes)
        if depth >= self.max_depth or len(np.unique(y)) <= 1 or len(y) < 2 * self.min_samples_leaf:
            return _Node(prediction=_majority(counts))
        d = X.shape[1]
        if self.n_subsample_features is not None and self.rng is not None:
            feature_ids = self.rng.choose(d, self.n_subsample_features)
        else:
            feature_ids = np.arange(d)
        found = _best_split(X, y, self.n_classes, feature_ids, self.min_samples_leaf)
        if found is None:
            return _Node(prediction=_majority(counts))
        f, threshold = found
        mask = X[:, f] <= threshold
        node = _Node(feature=f, threshold=threshold)
        node.left = self._grow(X[mask], y[mask], depth + 1)
        node.right = self._grow(X[~mask], y[~mask], depth + 1)
        return node

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        out = np.empty(len(X), dtype=int)
        for i, row in enumerate(X):
            node = self.root
            while node.prediction < 0:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out[i] = node.prediction
        return out


class RandomForest:
    def __init__(self, n_trees=100, max_depth=8, min_samples_leaf=2, seed=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.seed = seed
        self.trees = []
        self.n_classes = 0

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        self.n_classes = int(y.max()) + 1
        n, d = X.shape
        m = int(np.ceil(np.sqrt(d)))
        seeder = SplitMix64(self.seed)
        tree_seeds = [seeder.next_u64() for _ in range(self.n_trees)]
        self.trees = []
        # Per-tree state depends only on (seed, tree index): parallel == sequential.
        for ts in tree_seeds:
            rng = SplitMix64(ts)
            idx = rng.bootstrap_indices(n)
            tree = DecisionTree(self.max_depth, self.min_samples_leaf, rng, m)
            tree.fit(X[idx], y[idx], n_classes=self.n_classes)
            self.trees.append(tree)
        return self

    def predict(self, X):
        votes = np.zeros((len(X), self.n_classes))
        for tree in self.trees:
            preds = tree.predict(X)
            votes[np.arange(len(X)), preds] += 1
        return np.argmax(votes, axis=1)  # ties -> lowest class index


class KNearestNeighbors:
    def __init__(self, k=5):
        self.k = k

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        self.mean = X.mean(axis=0)
        std = X.std(axis=0)
        self.std = np.where(std > 0, std, 1.0)
        self.X = (X - self.mean) / self.std
        self.y = np.asarray(y, dtype=int)
        self.n_classes = int(self.y.max()) + 1
        return self

    def predict(self, X):
        X = (np.asarray(X, dtype=float) - self.mean) / self.std
        out = np.empty(len(X), dtype=int)
        k = min(self.k, len(self.y))
        for i, row in enumerate(X):
            dists = np.sum((self.X - row) ** 2, axis=1)
            nearest = np.argsort(dists, kind="stable")[:k]
            counts = np.bincount(self.y[nearest], minlength=self.n_classes)
            out[i] = _majority(counts)
        return out


def build(spec: ClassifierSpec):
    if spec.kind == "decision_tree":
        return DecisionTree(spec.max_depth, spec.min_samples_leaf)
    if spec.kind == "random_forest":
        return RandomForest(spec.n_trees, spec.max_depth, spec.min_samples_leaf, spec.seed)
    return KNearestNeighbors(spec.k)
