"""Distributional summary of a feature space.

Summaries feed the critic prompt, so everything here is deterministic,
label-free, and rendered to compact fixed-precision text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .dataset import FeatureTable

LOW_VARIANCE_STD = 1e-8
MAX_TOP_PAIRS = 10


@dataclass(frozen=True)
class FeatureStats:
    name: str
    mean: float
    std: float
    min: float
    max: float
    skewness: float  # Fisher, bias-uncorrected; 0 for constant columns
    distinct_count: int
    nan_fraction: float


@dataclass(frozen=True)
class SpaceStats:
    row_count: int
    column_count: int
    abs_correlation: np.ndarray  # symmetric, unit diagonal
    top_correlated_pairs: tuple  # (i, j, |r|) 0-based, sorted descending
    low_variance_features: tuple  # 0-based column indices


def feature_stats(name: str, col: np.ndarray) -> FeatureStats:
    """Statistics of one column (population variance, NaN-aware)."""
    col = np.asarray(col, dtype=float)
    nan_fraction = float(np.mean(np.isnan(col)))
    finite = col[~np.isnan(col)]
    if finite.size == 0:
        finite = np.zeros(1)
    mean = float(np.mean(finite))
    var = float(np.mean((finite - mean) ** 2))  # population convention
    std = float(np.sqrt(var))
    skew = float(np.mean((finite - mean) ** 3) / std**3) if std > 0 else 0.0
    return FeatureStats(
        name=name,
        mean=mean,
        std=std,
        min=float(np.min(finite)),
        max=float(np.max(finite)),
        skewness=skew,
        distinct_count=int(np.unique(finite).size),
        nan_fraction=nan_fraction,
    )


def summarize(table: FeatureTable) -> tuple:
    """Per-column and space-level statistics of a table (labels never enter)."""
    per_column = []
    matrix = table.matrix()
    n = table.n_rows
    stds = []
    for name, col in zip(table.column_names, table.columns):
        fs = feature_stats(name, col)
        per_column.append(fs)
        stds.append(fs.std)

    d = table.n_cols
    corr = np.eye(d)
    centered = matrix - matrix.mean(axis=0)
    for i in range(d):
        for j in range(i + 1, d):
            si, sj = stds[i], stds[j]
            if si <= 0 or sj <= 0:
                r = 0.0
            else:
                r = float(np.mean(centered[:, i] * centered[:, j]) / (si * sj))
                r = min(abs(r), 1.0)
            corr[i, j] = corr[j, i] = abs(r)

    pairs = [(i, j, corr[i, j]) for i in range(d) for j in range(i + 1, d)]
    pairs.sort(key=lambda p: (-p[2], p[0], p[1]))
    top = tuple(pairs[:MAX_TOP_PAIRS])
    low_var = tuple(i for i, s in enumerate(stds) if s < LOW_VARIANCE_STD)

    space = SpaceStats(
        row_count=n,
        column_count=d,
        abs_correlation=corr,
        top_correlated_pairs=top,
        low_variance_features=low_var,
    )
    return per_column, space


def _sig4(x: float) -> str:
    if x != x:  # NaN
        return "nan"
    return f"{x:.4g}"


def render_stats(per_column, space: SpaceStats) -> str:
    """Compact deterministic text block for prompts (<=120 chars/line)."""
    lines = [f"rows={space.row_count} columns={space.column_count}"]
    for i, fs in enumerate(per_column):
        flag = " constant" if i in space.low_variance_features else ""
        lines.append(
            f"f{i + 1} mean={_sig4(fs.mean)} std={_sig4(fs.std)} min={_sig4(fs.min)}"
            f" max={_sig4(fs.max)} skew={_sig4(fs.skewness)}"
            f" distinct={fs.distinct_count} nan={_sig4(fs.nan_fraction)}{flag}"
        )
    # Chunk the pair list so no line exceeds 120 chars.
    chunk = "top|r|:"
    for i, j, r in space.top_correlated_pairs:
        piece = f" f{i + 1}~f{j + 1}={_sig4(r)}"
        if len(chunk) + len(piece) > 120:
            lines.append(chunk)
            chunk = "top|r|:"
        chunk += piece
    if chunk != "top|r|:":
        lines.append(chunk)
    return "\n".join(lines)


def stats_to_json(per_column, space: SpaceStats) -> str:
    """Audit export (`--dump-stats`)."""
    payload = {
        "row_count": space.row_count,
        "column_count": space.column_count,
        "features": [asdict(fs) for fs in per_column],
        "abs_correlation": space.abs_correlation.tolist(),
        "top_correlated_pairs": [
            {"i": i, "j": j, "abs_r": r} for i, j, r in space.top_correlated_pairs
        ],
        "low_variance_features": list(space.low_variance_features),
    }
    return json.dumps(payload, indent=2)
