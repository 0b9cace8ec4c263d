"""Shared fixtures and independent oracles.

The reference interpreter and random AST generator live here so the tests
that check the production evaluator/renderer never depend on the code paths
they verify.
"""

import math
import random
from pathlib import Path

import numpy as np
import pytest

from duetfe import dsl

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = Path(__file__).resolve().parent / "fixtures"
SAMPLE_CSV = REPO_ROOT / "data" / "sample" / "sample.csv"
SAMPLE_META = REPO_ROOT / "data" / "sample" / "sample.meta.json"


# --- independent reference interpreter (scalar, tree-walking) ---------------

def reference_eval_scalar(expr, row):
    """Evaluate one expression on one row of values, plain Python math."""
    if isinstance(expr, dsl.FeatureRef):
        return float(row[expr.index - 1])
    if isinstance(expr, dsl.Unary):
        x = reference_eval_scalar(expr.child, row)
        if math.isnan(x):
            return float("nan")
        if expr.op == "log":
            return math.log(max(abs(x), 1e-12))
        if expr.op == "sqrt":
            return math.sqrt(abs(x))
        if expr.op == "square":
            return x * x
        if expr.op == "abs":
            return abs(x)
        if expr.op == "reciprocal":
            return float("nan") if abs(x) < 1e-12 else 1.0 / x
        if expr.op == "sin":
            return math.sin(x)
        if expr.op == "cos":
            return math.cos(x)
        if expr.op == "tanh":
            return math.tanh(x)
        raise AssertionError(expr.op)
    a = reference_eval_scalar(expr.left, row)
    b = reference_eval_scalar(expr.right, row)
    if math.isnan(a) or math.isnan(b):
        if expr.op == "div" and not math.isnan(a) and abs(b) < 1e-12:
            return float("nan")
        return float("nan")
    try:
        if expr.op == "add":
            v = a + b
        elif expr.op == "sub":
            v = a - b
        elif expr.op == "mul":
            v = a * b
        elif expr.op == "div":
            if abs(b) < 1e-12:
                return float("nan")
            v = a / b
        else:
            raise AssertionError(expr.op)
    except OverflowError:
        return float("nan")
    if math.isinf(v):
        return float("nan")
    return v


def reference_eval(expr, columns):
    n = len(columns[0])
    out = np.array(
        [reference_eval_scalar(expr, [c[i] for c in columns]) for i in range(n)]
    )
    return np.where(np.isinf(out), np.nan, out)


# --- random AST generator -----------------------------------------------------

UNARY = list(dsl.UNARY_NAMES)
BINARY = list(dsl.BINARY_SYMBOLS)


def random_expr(rng: random.Random, n_features: int = 5, max_depth: int = 6):
    """Uniform-ish random expression tree within the depth limit."""
    def build(budget):
        if budget <= 1:
            return dsl.FeatureRef(rng.randint(1, n_features))
        roll = rng.random()
        if roll < 0.35:
            return dsl.FeatureRef(rng.randint(1, n_features))
        if roll < 0.6:
            return dsl.Unary(rng.choice(UNARY), build(budget - 1))
        return dsl.Binary(rng.choice(BINARY), build(budget - 1), build(budget - 1))

    return build(max_depth)


def random_sequence(rng: random.Random, n_features=5, max_depth=6, max_len=4):
    length = rng.randint(1, max_len)
    return dsl.TransformSequence(
        tuple(random_expr(rng, n_features, max_depth) for _ in range(length))
    )


@pytest.fixture
def rng():
    return random.Random(12345)
