"""Tabular dataset handling: CSV/metadata loading, immutable feature tables,
transform application with rejection reporting, and stratified splits."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import dsl


class SchemaError(ValueError):
    """Metadata/CSV mismatch: missing target, ragged rows, empty table."""


@dataclass(frozen=True)
class DatasetMeta:
    task_description: str
    target_name: str
    feature_descriptions: tuple  # ordered (name, description) pairs

    def __post_init__(self):
        names = [n for n, _ in self.feature_descriptions]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names in metadata")

    def description_for(self, name: str) -> str:
        for n, d in self.feature_descriptions:
            if n == name:
                return d
        return ""


ORIGINAL = None  # provenance marker for columns present in the input data


@dataclass(frozen=True)
class FeatureTable:
    column_names: tuple
    columns: tuple  # equal-length float arrays
    provenance: tuple = ()  # per-column TransformExpr, or ORIGINAL

    def __post_init__(self):
        if not self.columns:
            raise SchemaError("table must have at least one column")
        lengths = {len(c) for c in self.columns}
        if len(lengths) != 1 or 0 in lengths:
            raise SchemaError("columns must be non-empty and equal length")
        if len(self.column_names) != len(self.columns):
            raise SchemaError("column name count mismatch")
        if len(set(self.column_names)) != len(self.column_names):
            raise SchemaError("column names must be unique")
        if not self.provenance:
            object.__setattr__(self, "provenance", (ORIGINAL,) * len(self.columns))
        for c in self.columns:
            c.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return len(self.columns[0])

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    @property
    def n_original(self) -> int:
        return sum(1 for p in self.provenance if p is ORIGINAL)

    def matrix(self) -> np.ndarray:
        return np.column_stack(self.columns)

    def column_keys(self) -> list:
        """Canonical dedup key per column; originals are their own token."""
        keys = []
        for i, prov in enumerate(self.provenance):
            if prov is ORIGINAL:
                keys.append(f"f{i + 1}")
            else:
                keys.append(dsl.canonical_key(prov))
        return keys

    def take_rows(self, indices: np.ndarray) -> "FeatureTable":
        return FeatureTable(
            self.column_names,
            tuple(c[indices].copy() for c in self.columns),
            self.provenance,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.column_names)
        for row in zip(*self.columns):
            writer.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()


@dataclass(frozen=True)
class LabeledSplit:
    train_table: FeatureTable
    train_labels: np.ndarray
    test_table: FeatureTable
    test_labels: np.ndarray
    seed: int


@dataclass(frozen=True)
class AcceptancePolicy:
    nan_tolerance: float = 0.10
    budget_multiplier: float = 4.0
    variance_eps: float = 1e-16

    def max_columns(self, n_original: int) -> int:
        return int(self.budget_multiplier * n_original)


@dataclass
class Rejection:
    expr_text: str
    reason: str  # out_of_range | nan_fraction | zero_variance | duplicate | budget
    detail: str = ""

    def to_dict(self) -> dict:
        return {"expr": self.expr_text, "reason": self.reason, "detail": self.detail}


@dataclass
class ApplyReport:
    accepted: list = field(default_factory=list)  # TransformExpr
    rejections: list = field(default_factory=list)  # Rejection

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.rejections)


def _impute_median(values: np.ndarray) -> np.ndarray:
    mask = np.isnan(values)
    if mask.any():
        finite = values[~mask]
        fill = float(np.median(finite)) if finite.size else 0.0
        values = np.where(mask, fill, values)
    return values


def apply_sequence(
    table: FeatureTable,
    seq: dsl.TransformSequence,
    policy: AcceptancePolicy = AcceptancePolicy(),
) -> tuple:
    """Evaluate each expression and append the columns that survive.

    Rejection reasons are checked in order: feature out of range, NaN
    fraction above tolerance, zero variance, duplicate canonical key,
    feature budget.  Rejections are data, not errors.
    """
    names = list(table.column_names)
    columns = list(table.columns)
    provenance = list(table.provenance)
    seen_keys = set(table.column_keys())
    budget = policy.max_columns(table.n_original)
    report = ApplyReport()

    for expr in seq:
        text = dsl.render_expr(expr)
        try:
            values, _ = dsl.evaluate(expr, columns)
        except IndexError as exc:
            report.rejections.append(Rejection(text, "out_of_range", str(exc)))
            continue
        nan_frac = float(np.mean(np.isnan(values)))
        if nan_frac > policy.nan_tolerance:
            report.rejections.append(Rejection(text, "nan_fraction", f"{nan_frac:.3f}"))
            continue
        values = _impute_median(values)
        if float(np.var(values)) <= policy.variance_eps:
            report.rejections.append(Rejection(text, "zero_variance"))
            continue
        key = dsl.canonical_key(expr)
        if key in seen_keys:
            report.rejections.append(Rejection(text, "duplicate", key))
            continue
        if len(columns) + 1 > budget:
            report.rejections.append(Rejection(text, "budget", f"limit {budget}"))
            continue
        name = text
        if name in names:  # same surface text under a different AST
            name = f"{name}#{len(names) + 1}"
        names.append(name)
        columns.append(values)
        provenance.append(expr)
        seen_keys.add(key)
        report.accepted.append(expr)

    out = FeatureTable(tuple(names), tuple(columns), tuple(provenance))
    return out, report


def load_csv(data_path, meta_path) -> tuple:
    """Load a CSV plus its JSON metadata sidecar.

    Returns ``(FeatureTable, labels, DatasetMeta)``.  The target column is
    removed and returned as class indices (first-appearance order);
    non-numeric feature columns are ordinal-encoded the same way; missing
    cells are median-imputed per column.
    """
    with open(data_path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    with open(meta_path, encoding="utf-8") as fh:
        raw_meta = json.load(fh)

    if not rows:
        raise SchemaError("empty CSV")
    header = rows[0]
    body = rows[1:]
    if not body:
        raise SchemaError("CSV has a header but no data rows")
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise SchemaError(f"ragged row {i + 2}: {len(row)} cells, expected {len(header)}")

    target = raw_meta.get("target")
    if target is None or target not in header:
        raise SchemaError(f"target column {target!r} not found in CSV header")
    target_idx = header.index(target)

    feature_names = [h for h in header if h != target]
    described = {f["name"]: f.get("description", "") for f in raw_meta.get("features", [])}
    meta = DatasetMeta(
        task_description=raw_meta.get("task_description", ""),
        target_name=target,
        feature_descriptions=tuple((n, described.get(n, "")) for n in feature_names),
    )

    columns = []
    for j, name in enumerate(header):
        if j == target_idx:
            continue
        columns.append(_encode_column([row[j] for row in body]))

    raw_labels = [row[target_idx] for row in body]
    labels = _encode_labels(raw_labels)

    table = FeatureTable(tuple(feature_names), tuple(columns))
    return table, labels, meta


def _encode_column(cells: list) -> np.ndarray:
    values = np.empty(len(cells), dtype=float)
    numeric = True
    for i, cell in enumerate(cells):
        cell = cell.strip()
        if cell == "":
            values[i] = np.nan
            continue
        try:
            values[i] = float(cell)
        except ValueError:
            numeric = False
            break
    if not numeric:
        codes = {}
        for i, cell in enumerate(cells):
            cell = cell.strip()
            if cell == "":
                values[i] = np.nan
            else:
                values[i] = codes.setdefault(cell, float(len(codes)))
    return _impute_median(values)


def _encode_labels(cells: list) -> np.ndarray:
    codes = {}
    out = np.empty(len(cells), dtype=int)
    for i, cell in enumerate(cells):
        out[i] = codes.setdefault(cell.strip(), len(codes))
    return out


def load_feature_csv(path) -> FeatureTable:
    """Load a feature-only CSV (no target column; all cells numeric).

    Headers that parse under the expression DSL are recorded as generated
    provenance, so an exported table round-trips with its expressions.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise SchemaError("feature CSV needs a header and at least one row")
    header = rows[0]
    body = rows[1:]
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise SchemaError(f"ragged row {i + 2}")
    columns = []
    provenance = []
    for j, name in enumerate(header):
        try:
            columns.append(np.array([float(row[j]) for row in body]))
        except ValueError as exc:
            raise SchemaError(f"non-numeric cell in column {name!r}: {exc}")
        try:
            provenance.append(dsl.parse_expr(name))
        except dsl.ParseError:
            provenance.append(ORIGINAL)
    # A bare feature token names an original column, not a transform.
    provenance = [
        ORIGINAL if isinstance(p, dsl.FeatureRef) else p for p in provenance
    ]
    return FeatureTable(tuple(header), tuple(columns), tuple(provenance))


def split(
    table: FeatureTable,
    labels: np.ndarray,
    test_fraction: float = 0.25,
    seed: int = 0,
) -> LabeledSplit:
    """Deterministic stratified train/test split."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    labels = np.asarray(labels)
    if len(labels) != table.n_rows:
        raise SchemaError("label vector length does not match table")
    train_idx, test_idx = split_indices(labels, test_fraction, seed)
    return LabeledSplit(
        train_table=table.take_rows(train_idx),
        train_labels=labels[train_idx].copy(),
        test_table=table.take_rows(test_idx),
        test_labels=labels[test_idx].copy(),
        seed=seed,
    )


def split_indices(labels: np.ndarray, test_fraction: float, seed: int) -> tuple:
    """The (train, test) index arrays that `split` would use; shared across
    table variants so comparisons see identical rows."""
    labels = np.asarray(labels)
    rng = np.random.RandomState(seed)
    test_idx = []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if len(members) < 2:
            raise ValueError(f"class {cls} has fewer than 2 rows")
        order = rng.permutation(len(members))
        n_test = int(round(len(members) * test_fraction))
        n_test = min(max(n_test, 1), len(members) - 1)
        test_idx.extend(members[order[:n_test]])
    test_idx = np.sort(np.asarray(test_idx, dtype=int))
    mask = np.ones(len(labels), dtype=bool)
    mask[test_idx] = False
    return np.flatnonzero(mask), test_idx
