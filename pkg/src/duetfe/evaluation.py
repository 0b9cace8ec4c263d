"""Testing-only downstream evaluation.

This is the single place labels are consumed: classifiers are trained on
original vs. transformed tables over shared splits, and accuracy, timing,
and per-model robustness are reported.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import classifiers, dataset

DEFAULT_SEEDS = (0, 1, 2, 3, 4)
DEFAULT_TEST_FRACTION = 0.25

DEFAULT_SPECS = (
    classifiers.ClassifierSpec("decision_tree"),
    classifiers.ClassifierSpec("random_forest"),
    classifiers.ClassifierSpec("knn"),
)


def train_predict(spec: classifiers.ClassifierSpec, split: dataset.LabeledSplit) -> tuple:
    """Train on the split's train side, return (predictions, accuracy)."""
    X_train = split.train_table.matrix()
    X_test = split.test_table.matrix()
    if len(np.unique(split.train_labels)) < 2:
        # Degenerate training set: constant prediction, flagged by callers.
        preds = np.full(len(X_test), int(split.train_labels[0]), dtype=int)
    else:
        model = classifiers.build(spec)
        model.fit(X_train, split.train_labels)
        preds = model.predict(X_test)
    accuracy = float(np.mean(preds == split.test_labels))
    return preds, accuracy


@dataclass
class EvalCell:
    variant: str
    classifier: str
    seed: int
    accuracy: float
    train_predict_time: float
    degenerate: bool = False


@dataclass
class EvalReport:
    cells: list = field(default_factory=list)
    seeds: tuple = DEFAULT_SEEDS
    test_fraction: float = DEFAULT_TEST_FRACTION
    transform_time: float = 0.0

    def mean_accuracy(self, variant: str, classifier: str) -> float:
        vals = [c.accuracy for c in self.cells
                if c.variant == variant and c.classifier == classifier]
        return float(np.mean(vals)) if vals else float("nan")

    def variants(self) -> list:
        seen = []
        for c in self.cells:
            if c.variant not in seen:
                seen.append(c.variant)
        return seen

    def classifiers(self) -> list:
        seen = []
        for c in self.cells:
            if c.classifier not in seen:
                seen.append(c.classifier)
        return seen

    def to_json(self) -> str:
        return json.dumps(
            {
                "seeds": list(self.seeds),
                "test_fraction": self.test_fraction,
                "transform_time": self.transform_time,
                "cells": [vars(c) for c in self.cells],
                "means": {
                    v: {k: self.mean_accuracy(v, k) for k in self.classifiers()}
                    for v in self.variants()
                },
            },
            indent=2,
        )

    def to_text(self) -> str:
        """Aligned mean-accuracy table, original-vs-transformed style."""
        kinds = self.classifiers()
        width = max([len("variant")] + [len(v) for v in self.variants()]) + 2
        header = "variant".ljust(width) + "".join(k.rjust(16) for k in kinds)
        lines = [header]
        for v in self.variants():
            row = v.ljust(width)
            for k in kinds:
                row += f"{self.mean_accuracy(v, k):16.4f}"
            lines.append(row)
        return "\n".join(lines)


def compare(
    original: dataset.FeatureTable,
    transformed: dataset.FeatureTable,
    labels,
    specs=DEFAULT_SPECS,
    seeds=DEFAULT_SEEDS,
    test_fraction: float = DEFAULT_TEST_FRACTION,
    transform_time: float = 0.0,
) -> EvalReport:
    """Evaluate table variants over identical per-seed splits."""
    labels = np.asarray(labels)
    if original.n_rows != transformed.n_rows or original.n_rows != len(labels):
        raise ValueError("tables and labels must be row-aligned")
    report = EvalReport(seeds=tuple(seeds), test_fraction=test_fraction,
                        transform_time=transform_time)
    variants = [("original", original), ("transformed", transformed)]
    for seed in seeds:
        train_idx, test_idx = dataset.split_indices(labels, test_fraction, seed)
        for name, table in variants:
            split = dataset.LabeledSplit(
                train_table=table.take_rows(train_idx),
                train_labels=labels[train_idx].copy(),
                test_table=table.take_rows(test_idx),
                test_labels=labels[test_idx].copy(),
                seed=seed,
            )
            degenerate = len(np.unique(split.train_labels)) < 2
            for spec in specs:
                # Forest randomness follows the split seed so each seed is
                # a fully independent repetition.
                seeded = replace(spec, seed=seed)
                t0 = time.perf_counter()
                _, acc = train_predict(seeded, split)
                elapsed = time.perf_counter() - t0
                report.cells.append(
                    EvalCell(name, spec.kind, seed, acc, elapsed, degenerate)
                )
    return report


def timing_profile(result) -> dict:
    """Per-iteration wall-clock breakdown of a RunResult, JSON-ready."""
    iterations = []
    totals = {"diagnose": 0.0, "backend": 0.0, "apply": 0.0}
    for rec in result.iterations:
        entry = {
            "index": rec.index,
            "diagnose": rec.t_diagnose,
            "backend": rec.t_backend,
            "apply": rec.t_apply,
            "total": rec.t_diagnose + rec.t_backend + rec.t_apply,
        }
        iterations.append(entry)
        totals["diagnose"] += rec.t_diagnose
        totals["backend"] += rec.t_backend
        totals["apply"] += rec.t_apply
    totals["total"] = totals["diagnose"] + totals["backend"] + totals["apply"]
    return {"iterations": iterations, "totals": totals}
