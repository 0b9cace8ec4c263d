"""Feature-transformation expression language.

Expressions are built from feature tokens ``f1..fn`` and a small set of
arithmetic operators, e.g. ``(f1*f2),log(f3),(f4/f5)``.  A comma-separated
list of expressions is a transform sequence; the canonical rendering of a
sequence has no whitespace and only the parentheses that precedence
requires.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

# Binary operators: serialized name -> surface symbol.
BINARY_SYMBOLS = {"add": "+", "sub": "-", "mul": "*", "div": "/"}
SYMBOL_TO_BINARY = {v: k for k, v in BINARY_SYMBOLS.items()}

UNARY_NAMES = ("log", "sqrt", "square", "abs", "reciprocal", "sin", "cos", "tanh")

COMMUTATIVE = frozenset({"add", "mul"})

# Division/log guard: magnitudes below this are treated as zero.
SAFE_EPS = 1e-12

DEFAULT_MAX_DEPTH = 6
DEFAULT_MAX_SEQUENCE_LEN = 32


class ParseError(ValueError):
    """Raised when input text is not a valid transform sequence."""

    def __init__(self, position: int, message: str, input_fragment: str = ""):
        self.position = position
        self.message = message
        self.input_fragment = input_fragment
        super().__init__(f"at offset {position}: {message}")


@dataclass(frozen=True)
class OperatorSet:
    binary_ops: frozenset = frozenset(BINARY_SYMBOLS)
    unary_ops: frozenset = frozenset(UNARY_NAMES)

    def __post_init__(self):
        if not (self.binary_ops or self.unary_ops):
            raise ValueError("operator set must be non-empty")
        unknown_bin = set(self.binary_ops) - set(BINARY_SYMBOLS)
        if unknown_bin:
            raise ValueError(f"unknown binary operators: {sorted(unknown_bin)}")
        unknown_un = set(self.unary_ops) - set(UNARY_NAMES)
        if unknown_un:
            raise ValueError(f"unknown unary operators: {sorted(unknown_un)}")
        if set(self.binary_ops) & set(self.unary_ops):
            raise ValueError("an operator cannot be both unary and binary")

    def describe(self) -> str:
        """Human-readable operator listing for prompts."""
        bins = ", ".join(BINARY_SYMBOLS[n] for n in sorted(self.binary_ops))
        uns = ", ".join(sorted(self.unary_ops))
        return f"binary: {bins}; unary: {uns}"


DEFAULT_OPERATORS = OperatorSet()


@dataclass(frozen=True)
class FeatureRef:
    index: int  # 1-based column ordinal

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("feature index must be >= 1")


@dataclass(frozen=True)
class Unary:
    op: str
    child: "TransformExpr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "TransformExpr"
    right: "TransformExpr"


TransformExpr = Union[FeatureRef, Unary, Binary]


@dataclass(frozen=True)
class TransformSequence:
    exprs: tuple

    def __post_init__(self):
        if len(self.exprs) < 1:
            raise ValueError("sequence must contain at least one expression")

    def __len__(self):
        return len(self.exprs)

    def __iter__(self):
        return iter(self.exprs)


def depth(expr: TransformExpr) -> int:
    if isinstance(expr, FeatureRef):
        return 1
    if isinstance(expr, Unary):
        return 1 + depth(expr.child)
    return 1 + max(depth(expr.left), depth(expr.right))


def feature_indices(expr: TransformExpr) -> set:
    """All 1-based feature indices referenced by the expression."""
    if isinstance(expr, FeatureRef):
        return {expr.index}
    if isinstance(expr, Unary):
        return feature_indices(expr.child)
    return feature_indices(expr.left) | feature_indices(expr.right)


# --- tokenizer -------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str  # FEATURE, OPNAME, PLUS, MINUS, STAR, SLASH, LPAREN, RPAREN, COMMA, EOS
    value: object
    position: int


_PUNCT = {
    "+": "PLUS",
    "-": "MINUS",
    "*": "STAR",
    "/": "SLASH",
    "(": "LPAREN",
    ")": "RPAREN",
    ",": "COMMA",
}

_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_FEATURE_RE = re.compile(r"[fF]([0-9]+)$")


def tokenize(text: str) -> list:
    """Lex input text into tokens, appending a trailing EOS token."""
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _PUNCT:
            tokens.append(Token(_PUNCT[ch], ch, i))
            i += 1
            continue
        m = _WORD_RE.match(text, i)
        if m:
            word = m.group(0)
            fm = _FEATURE_RE.match(word)
            if fm:
                tokens.append(Token("FEATURE", int(fm.group(1)), i))
            else:
                tokens.append(Token("OPNAME", word.lower(), i))
            i = m.end()
            continue
        raise ParseError(i, f"unrecognized character {ch!r}", text[i : i + 8])
    tokens.append(Token("EOS", None, n))
    return tokens


# --- parser ----------------------------------------------------------------

class _Parser:
    def __init__(self, text: str, ops: OperatorSet, max_depth: int):
        self.text = text
        self.ops = ops
        self.max_depth = max_depth
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, tok: Token, message: str) -> ParseError:
        return ParseError(tok.position, message, self.text[tok.position : tok.position + 8])

    def parse_sequence(self) -> TransformSequence:
        exprs = [self.parse_expr_checked()]
        while self.peek().kind == "COMMA":
            self.advance()
            exprs.append(self.parse_expr_checked())
        tok = self.peek()
        if tok.kind != "EOS":
            raise self.error(tok, f"unexpected token {tok.value!r}")
        return TransformSequence(tuple(exprs))

    def parse_expr_checked(self) -> TransformExpr:
        start = self.peek()
        expr = self.parse_expr()
        d = depth(expr)
        if d > self.max_depth:
            raise self.error(start, f"expression depth {d} exceeds limit {self.max_depth}")
        return expr

    def parse_expr(self) -> TransformExpr:
        node = self.parse_term()
        while self.peek().kind in ("PLUS", "MINUS"):
            tok = self.advance()
            op = SYMBOL_TO_BINARY[tok.value]
            if op not in self.ops.binary_ops:
                raise self.error(tok, f"operator {tok.value!r} not in operator set")
            node = Binary(op, node, self.parse_term())
        return node

    def parse_term(self) -> TransformExpr:
        node = self.parse_factor()
        while self.peek().kind in ("STAR", "SLASH"):
            tok = self.advance()
            op = SYMBOL_TO_BINARY[tok.value]
            if op not in self.ops.binary_ops:
                raise self.error(tok, f"operator {tok.value!r} not in operator set")
            node = Binary(op, node, self.parse_factor())
        return node

    def parse_factor(self) -> TransformExpr:
        tok = self.peek()
        if tok.kind == "FEATURE":
            self.advance()
            return FeatureRef(tok.value)
        if tok.kind == "OPNAME":
            self.advance()
            if tok.value not in self.ops.unary_ops:
                raise self.error(tok, f"unknown operator {tok.value!r}")
            opening = self.peek()
            if opening.kind != "LPAREN":
                raise self.error(opening, f"expected '(' after {tok.value!r}")
            self.advance()
            child = self.parse_expr()
            closing = self.peek()
            if closing.kind != "RPAREN":
                raise self.error(closing, "expected ')'")
            self.advance()
            return Unary(tok.value, child)
        if tok.kind == "LPAREN":
            self.advance()
            node = self.parse_expr()
            closing = self.peek()
            if closing.kind != "RPAREN":
                raise self.error(closing, "expected ')'")
            self.advance()
            return node
        if tok.kind == "MINUS":
            # No constants in the language, so unary minus has no desugaring.
            raise self.error(tok, "unary minus is not supported")
        raise self.error(tok, "expected a feature, operator call, or '('")


def parse(
    text: str,
    ops: OperatorSet = DEFAULT_OPERATORS,
    max_depth: int = DEFAULT_MAX_DEPTH,
    max_sequence_len: int = DEFAULT_MAX_SEQUENCE_LEN,
) -> TransformSequence:
    """Parse text into a TransformSequence.

    Grammar: ``sequence := expr (',' expr)*`` with conventional precedence
    (``*``, ``/`` bind tighter than ``+``, ``-``) and left associativity.
    """
    seq = _Parser(text, ops, max_depth).parse_sequence()
    if len(seq) > max_sequence_len:
        raise ParseError(0, f"sequence length {len(seq)} exceeds limit {max_sequence_len}")
    return seq


def parse_expr(text: str, ops: OperatorSet = DEFAULT_OPERATORS,
               max_depth: int = DEFAULT_MAX_DEPTH) -> TransformExpr:
    seq = parse(text, ops, max_depth)
    if len(seq) != 1:
        raise ParseError(0, "expected a single expression")
    return seq.exprs[0]


# --- renderer --------------------------------------------------------------

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2}
_ATOM_PREC = 3


def _render(expr: TransformExpr) -> tuple:
    """Render one node, returning (text, precedence)."""
    if isinstance(expr, FeatureRef):
        return f"f{expr.index}", _ATOM_PREC
    if isinstance(expr, Unary):
        child_text, _ = _render(expr.child)
        return f"{expr.op}({child_text})", _ATOM_PREC
    prec = _PREC[expr.op]
    left_text, left_prec = _render(expr.left)
    right_text, right_prec = _render(expr.right)
    if left_prec < prec:
        left_text = f"({left_text})"
    # Equal precedence on the right needs parens to survive left associativity.
    if right_prec <= prec:
        right_text = f"({right_text})"
    return f"{left_text}{BINARY_SYMBOLS[expr.op]}{right_text}", prec


def render_expr(expr: TransformExpr) -> str:
    return _render(expr)[0]


def render(seq: TransformSequence) -> str:
    """Canonical text form: minimal parentheses, no whitespace."""
    return ",".join(render_expr(e) for e in seq)


def canonical_key(expr: TransformExpr) -> str:
    """Rendering of the tree with commutative operands sorted by key.

    Equal keys imply the expressions are identical up to commutativity of
    ``+`` and ``*``.
    """
    return render_expr(_normalize(expr))


def _normalize(expr: TransformExpr) -> TransformExpr:
    if isinstance(expr, FeatureRef):
        return expr
    if isinstance(expr, Unary):
        return Unary(expr.op, _normalize(expr.child))
    left = _normalize(expr.left)
    right = _normalize(expr.right)
    if expr.op in COMMUTATIVE and render_expr(left) > render_expr(right):
        left, right = right, left
    return Binary(expr.op, left, right)


# --- evaluator -------------------------------------------------------------

def evaluate(expr: TransformExpr, columns: Sequence[np.ndarray]) -> tuple:
    """Evaluate an expression column-wise with safe semantics.

    ``columns`` is any sequence of equal-length 1-D float arrays (for
    instance ``FeatureTable.columns``).  Returns ``(values, nonfinite_count)``
    where infinities have been replaced by NaN and ``nonfinite_count`` is the
    number of non-finite entries before that cleanup.

    Raises IndexError when a feature reference exceeds the column count;
    callers treat that as a hallucinated feature and drop the expression.
    """
    n_cols = len(columns)
    for idx in feature_indices(expr):
        if idx > n_cols:
            raise IndexError(f"feature f{idx} out of range (table has {n_cols} columns)")
    with np.errstate(all="ignore"):
        values = _eval(expr, columns)
    values = np.asarray(values, dtype=float)
    nonfinite = int(np.count_nonzero(~np.isfinite(values)))
    values = np.where(np.isinf(values), np.nan, values)
    return values, nonfinite


def _eval(expr: TransformExpr, columns: Sequence[np.ndarray]) -> np.ndarray:
    if isinstance(expr, FeatureRef):
        return np.asarray(columns[expr.index - 1], dtype=float)
    if isinstance(expr, Unary):
        x = _eval(expr.child, columns)
        if expr.op == "log":
            return np.log(np.maximum(np.abs(x), SAFE_EPS))
        if expr.op == "sqrt":
            return np.sqrt(np.abs(x))
        if expr.op == "square":
            return x * x
        if expr.op == "abs":
            return np.abs(x)
        if expr.op == "reciprocal":
            return np.where(np.abs(x) < SAFE_EPS, np.nan, 1.0 / np.where(np.abs(x) < SAFE_EPS, 1.0, x))
        if expr.op == "sin":
            return np.sin(x)
        if expr.op == "cos":
            return np.cos(x)
        if expr.op == "tanh":
            return np.tanh(x)
        raise ValueError(f"unknown unary operator {expr.op!r}")
    left = _eval(expr.left, columns)
    right = _eval(expr.right, columns)
    if expr.op == "add":
        return left + right
    if expr.op == "sub":
        return left - right
    if expr.op == "mul":
        return left * right
    if expr.op == "div":
        small = np.abs(right) < SAFE_EPS
        return np.where(small, np.nan, left / np.where(small, 1.0, right))
    raise ValueError(f"unknown binary operator {expr.op!r}")


# --- .fts files ------------------------------------------------------------

def dump_sequences(seqs: Iterable[TransformSequence]) -> str:
    """One canonical sequence per line, LF-terminated."""
    return "".join(render(s) + "\n" for s in seqs)


def load_sequences(text: str, ops: OperatorSet = DEFAULT_OPERATORS) -> list:
    seqs = []
    for line in text.splitlines():
        line = line.strip()
        if line:
            seqs.append(parse(line, ops))
    return seqs
