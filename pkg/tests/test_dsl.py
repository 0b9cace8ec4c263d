import random

import numpy as np
import pytest

from duetfe import dsl
from conftest import random_expr, random_sequence, reference_eval


class TestTokenize:
    def test_paper_sequence(self):
        tokens = dsl.tokenize("(f1*f2),log(f3),(f4/f5)")
        assert tokens[-1].kind == "EOS"
        assert [t.kind for t in tokens[:3]] == ["LPAREN", "FEATURE", "STAR"]
        assert tokens[1].value == 1
        # 16 surface tokens plus EOS
        assert len(tokens) == 17

    def test_single_feature(self):
        tokens = dsl.tokenize("f1")
        assert [t.kind for t in tokens] == ["FEATURE", "EOS"]

    def test_unknown_symbol_position(self):
        with pytest.raises(dsl.ParseError) as exc:
            dsl.tokenize("f1 $ f2")
        assert exc.value.position == 3

    def test_whitespace_skipped(self):
        assert len(dsl.tokenize(" f1 + f2 ")) == 4


class TestParse:
    def test_nested_division(self):
        expr = dsl.parse_expr("((f1+f2)/f1)")
        assert expr == dsl.Binary(
            "div",
            dsl.Binary("add", dsl.FeatureRef(1), dsl.FeatureRef(2)),
            dsl.FeatureRef(1),
        )

    def test_unary_call(self):
        assert dsl.parse_expr("log(f3)") == dsl.Unary("log", dsl.FeatureRef(3))

    def test_left_associativity(self):
        expr = dsl.parse_expr("f1*f2/f3")
        assert expr == dsl.Binary(
            "div",
            dsl.Binary("mul", dsl.FeatureRef(1), dsl.FeatureRef(2)),
            dsl.FeatureRef(3),
        )

    def test_precedence(self):
        expr = dsl.parse_expr("f1+f2*f3")
        assert isinstance(expr, dsl.Binary) and expr.op == "add"
        assert expr.right.op == "mul"

    def test_unknown_operator(self):
        with pytest.raises(dsl.ParseError, match="unknown operator"):
            dsl.parse("exp(f1)")

    def test_unary_minus_rejected(self):
        with pytest.raises(dsl.ParseError, match="unary minus"):
            dsl.parse("-f1")

    def test_depth_limit(self):
        deep = "log(" * 7 + "f1" + ")" * 7
        with pytest.raises(dsl.ParseError, match="depth"):
            dsl.parse(deep)
        dsl.parse("log(" * 5 + "f1" + ")" * 5)  # within limit

    def test_operator_not_in_set(self):
        ops = dsl.OperatorSet(binary_ops=frozenset({"add"}), unary_ops=frozenset({"log"}))
        with pytest.raises(dsl.ParseError):
            dsl.parse("f1*f2", ops)
        dsl.parse("f1+f2", ops)

    def test_trailing_garbage(self):
        with pytest.raises(dsl.ParseError):
            dsl.parse("f1 f2")

    def test_sequence_length_limit(self):
        text = ",".join(["f1"] * 33)
        with pytest.raises(dsl.ParseError, match="length"):
            dsl.parse(text)


class TestRender:
    def test_redundant_parens_dropped(self):
        assert dsl.render(dsl.parse("(f1*f2)")) == "f1*f2"

    def test_required_parens_kept(self):
        assert dsl.render(dsl.parse("(f1+f2)/f1")) == "(f1+f2)/f1"

    def test_right_assoc_parens_kept(self):
        assert dsl.render(dsl.parse("f1-(f2-f3)")) == "f1-(f2-f3)"
        assert dsl.render(dsl.parse("(f1-f2)-f3")) == "f1-f2-f3"

    def test_round_trip_random(self, rng):
        for _ in range(300):
            seq = random_sequence(rng)
            assert dsl.parse(dsl.render(seq)) == seq

    def test_idempotent_canonicalization(self, rng):
        for _ in range(100):
            text = dsl.render(random_sequence(rng))
            once = dsl.render(dsl.parse(text))
            assert dsl.render(dsl.parse(once)) == once


class TestCanonicalKey:
    def test_commutative_same_key(self):
        assert dsl.canonical_key(dsl.parse_expr("f2*f1")) == "f1*f2"
        assert dsl.canonical_key(dsl.parse_expr("f1*f2")) == "f1*f2"
        assert dsl.canonical_key(dsl.parse_expr("f2+f1")) == dsl.canonical_key(
            dsl.parse_expr("f1+f2")
        )

    def test_non_commutative_distinct(self):
        assert dsl.canonical_key(dsl.parse_expr("f1-f2")) != dsl.canonical_key(
            dsl.parse_expr("f2-f1")
        )
        assert dsl.canonical_key(dsl.parse_expr("f1/f2")) != dsl.canonical_key(
            dsl.parse_expr("f2/f1")
        )

    def _commute(self, expr, rng):
        if isinstance(expr, dsl.FeatureRef):
            return expr
        if isinstance(expr, dsl.Unary):
            return dsl.Unary(expr.op, self._commute(expr.child, rng))
        left = self._commute(expr.left, rng)
        right = self._commute(expr.right, rng)
        if expr.op in dsl.COMMUTATIVE and rng.random() < 0.5:
            left, right = right, left
        return dsl.Binary(expr.op, left, right)

    def test_commuted_trees_value_equal(self, rng):
        np_rng = np.random.RandomState(3)
        columns = [np_rng.uniform(0.5, 2.0, 30) for _ in range(5)]
        for _ in range(100):
            expr = random_expr(rng)
            twin = self._commute(expr, rng)
            assert dsl.canonical_key(expr) == dsl.canonical_key(twin)
            a, _ = dsl.evaluate(expr, columns)
            b, _ = dsl.evaluate(twin, columns)
            np.testing.assert_allclose(a, b, atol=1e-9, equal_nan=True)


class TestEvaluate:
    def test_exact_division(self):
        values, bad = dsl.evaluate(
            dsl.parse_expr("f1/f2"),
            [np.array([1.0, 4.0]), np.array([2.0, 8.0])],
        )
        np.testing.assert_array_equal(values, [0.5, 0.5])
        assert bad == 0

    def test_safe_log_of_zero(self):
        values, _ = dsl.evaluate(dsl.parse_expr("log(f1)"), [np.array([0.0])])
        assert values[0] == pytest.approx(np.log(1e-12))

    def test_division_by_zero_is_nan(self):
        values, bad = dsl.evaluate(
            dsl.parse_expr("f1/f2"), [np.array([1.0]), np.array([0.0])]
        )
        assert np.isnan(values[0])
        assert bad == 1

    def test_out_of_range_raises(self):
        with pytest.raises(IndexError):
            dsl.evaluate(dsl.parse_expr("f3"), [np.array([1.0]), np.array([1.0])])

    def test_no_infinities(self):
        values, bad = dsl.evaluate(
            dsl.parse_expr("square(square(square(f1)))"), [np.array([1e100, 2.0])]
        )
        assert not np.isinf(values).any()
        assert bad == 1

    def test_matches_reference_interpreter(self, rng):
        np_rng = np.random.RandomState(99)
        for trial in range(60):
            columns = [np_rng.randn(20) for _ in range(5)]
            expr = random_expr(rng)
            got, _ = dsl.evaluate(expr, columns)
            want = reference_eval(expr, columns)
            assert len(got) == 20
            np.testing.assert_allclose(got, want, atol=1e-9, equal_nan=True)


class TestFtsFiles:
    def test_round_trip(self, rng):
        seqs = [random_sequence(rng) for _ in range(5)]
        text = dsl.dump_sequences(seqs)
        assert text.endswith("\n")
        assert dsl.load_sequences(text) == seqs


class TestOperatorSet:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            dsl.OperatorSet(binary_ops=frozenset(), unary_ops=frozenset())

    def test_rejects_unknown_names(self):
        with pytest.raises(ValueError):
            dsl.OperatorSet(unary_ops=frozenset({"exp"}))
