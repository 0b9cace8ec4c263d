"""Synthetic datasets used by tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .dataset import DatasetMeta, FeatureTable


def xor_of_signs(n_rows: int = 400, n_noise: int = 2, seed: int = 7,
                 pair_correlation: float = 0.2) -> tuple:
    """Two informative columns whose product's sign is the label, plus noise.

    f1 and f2 carry a mild planted correlation so that purely distributional
    diagnostics single them out among the noise columns; the label stays
    exactly [f1*f2 > 0] regardless.
    """
    rng = np.random.RandomState(seed)
    z = rng.randn(n_rows)
    f1 = rng.randn(n_rows)
    rho = pair_correlation
    f2 = rho * f1 + np.sqrt(1 - rho**2) * z
    # A skewed noise column gives the log-advice rule something to chew on.
    noise = [np.exp(rng.randn(n_rows))] + [rng.randn(n_rows) for _ in range(n_noise - 1)]
    columns = [f1, f2] + noise
    names = ["f1_signal", "f2_signal"] + [f"noise{i + 1}" for i in range(n_noise)]
    labels = (f1 * f2 > 0).astype(int)
    table = FeatureTable(tuple(names), tuple(c.astype(float) for c in columns))
    meta = DatasetMeta(
        task_description="Predict whether the two signal measurements agree in sign.",
        target_name="label",
        feature_descriptions=tuple((n, "synthetic measurement") for n in names),
    )
    return table, labels, meta


def gaussian_blobs(n_rows: int = 500, n_features: int = 4, seed: int = 11,
                   separation: float = 4.0) -> tuple:
    """Two well-separated Gaussian blobs, one per class."""
    rng = np.random.RandomState(seed)
    half = n_rows // 2
    a = rng.randn(half, n_features)
    b = rng.randn(n_rows - half, n_features) + separation
    X = np.vstack([a, b])
    labels = np.array([0] * half + [1] * (n_rows - half))
    perm = rng.permutation(n_rows)
    X, labels = X[perm], labels[perm]
    names = tuple(f"x{i + 1}" for i in range(n_features))
    table = FeatureTable(names, tuple(X[:, j].copy() for j in range(n_features)))
    meta = DatasetMeta(
        task_description="Separate two synthetic point clouds.",
        target_name="label",
        feature_descriptions=tuple((n, "coordinate") for n in names),
    )
    return table, labels, meta


def random_table(n_rows: int, n_cols: int, seed: int = 0) -> FeatureTable:
    rng = np.random.RandomState(seed)
    names = tuple(f"c{i + 1}" for i in range(n_cols))
    return FeatureTable(names, tuple(rng.randn(n_rows) for _ in range(n_cols)))
