"""Critic and generator agents: prompt construction, chat backends, and
response parsing.

Three backends share one interface: a remote OpenAI-compatible endpoint, a
transcript-driven replay (deterministic), and an offline rule-based
heuristic (deterministic).  Every call can be recorded to a transcript for
later replay.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field

from . import dsl
from .diagnosis import render_stats

API_KEY_ENV = "DUET_API_KEY"

CRITIC_ROLE = "critic"
GENERATOR_ROLE = "generator"

SEQ_OPEN = "<SEQ>"
SEQ_CLOSE = "</SEQ>"

# Few-shot exemplar straight from the token-sequence format definition.
FORMAT_EXEMPLAR = "(f1*f2),log(f3),(f4/f5)"


class BackendError(RuntimeError):
    """Transport failure that persisted through the retry budget."""


class ReplayExhausted(RuntimeError):
    """Replay transcript ran out of records."""


class GenerationError(RuntimeError):
    """Generator output stayed unparseable through the retry budget."""


@dataclass(frozen=True)
class AgentConfig:
    model: str = "gpt-3.5-turbo"
    base_url: str = "https://api.openai.com/v1"
    temperature_critic: float = 0.7
    temperature_generator: float = 0.2
    max_tokens: int = 512
    retries: int = 3
    timeout: float = 60.0

    @classmethod
    def from_file(cls, path) -> "AgentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))


@dataclass(frozen=True)
class CritiqueAdvice:
    semantic_advice: tuple
    distributional_advice: tuple
    raw_response: str = ""

    def __post_init__(self):
        items = list(self.semantic_advice) + list(self.distributional_advice)
        if not items:
            raise ValueError("advice must contain at least one item")
        if any(not it.strip() for it in items):
            raise ValueError("advice items must be non-empty")

    @property
    def items(self) -> list:
        return list(self.semantic_advice) + list(self.distributional_advice)


@dataclass
class TranscriptRecord:
    role: str
    system: str
    user: str
    response: str
    ts: float

    def to_dict(self) -> dict:
        return {"role": self.role, "system": self.system, "user": self.user,
                "response": self.response, "ts": self.ts}


@dataclass
class Transcript:
    records: list = field(default_factory=list)

    def append(self, role, system, user, response):
        self.records.append(TranscriptRecord(role, system, user, response, time.time()))

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.records)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        records = []
        for line in text.splitlines():
            if line.strip():
                d = json.loads(line)
                records.append(TranscriptRecord(d["role"], d["system"], d["user"],
                                                d["response"], d.get("ts", 0.0)))
        return cls(records)

    @classmethod
    def load(cls, path) -> "Transcript":
        with open(path, encoding="utf-8") as fh:
            return cls.from_jsonl(fh.read())


class RemoteHttpBackend:
    """OpenAI-compatible chat-completions client with retry and timeout."""

    def __init__(self, config: AgentConfig = AgentConfig(), api_key: str = None):
        self.config = config
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")

    def complete(self, system: str, user: str, temperature: float, max_tokens: int) -> str:
        import requests

        url = self.config.base_url.rstrip("/") + "/chat/completions"
        payload = {
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last_error = None
        for attempt in range(self.config.retries):
            try:
                resp = requests.post(url, json=payload, headers=headers,
                                     timeout=self.config.timeout)
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except Exception as exc:  # transport, HTTP status, or schema
                last_error = exc
                if attempt + 1 < self.config.retries:
                    time.sleep(0.5 * 2**attempt)
        raise BackendError(f"backend failed after {self.config.retries} attempts: {last_error}")


class ReplayBackend:
    """Replays recorded responses in order; fails loudly on exhaustion."""

    def __init__(self, transcript: Transcript):
        self.transcript = transcript
        self.cursor = 0

    def complete(self, system: str, user: str, temperature: float, max_tokens: int) -> str:
        if self.cursor >= len(self.transcript.records):
            raise ReplayExhausted(
                f"transcript exhausted after {self.cursor} records"
            )
        record = self.transcript.records[self.cursor]
        self.cursor += 1
        return record.response


# Markers the heuristic backend uses to tell roles apart; they appear only
# in system prompts built by this module.
_CRITIC_MARKER = "[role:critic]"
_GENERATOR_MARKER = "[role:generator]"

_TOP_PAIR_RE = re.compile(r"top\|r\|: f(\d+)~f(\d+)=([0-9.eE+-]+)")
_SKEW_LINE_RE = re.compile(r"^f(\d+) mean=.* skew=([0-9.eEnan+-]+) ", re.MULTILINE)
_ADVICE_PAIR_RE = re.compile(r"features f(\d+) and f(\d+)")
_ADVICE_SKEW_RE = re.compile(r"skewed feature f(\d+)")
_FEATURE_TOKEN_RE = re.compile(r"\bf(\d+)\b")


class HeuristicBackend:
    """Deterministic offline stand-in for the LLM.

    Critic: names the top-|r| pair and the most-skewed column.
    Generator: product and ratio of the pair plus log of the skewed column;
    given a free-form human instruction instead, it emits variants of the
    features the instruction mentions.
    """

    def complete(self, system: str, user: str, temperature: float, max_tokens: int) -> str:
        if _CRITIC_MARKER in system:
            return self._critic(user)
        if _GENERATOR_MARKER in system:
            return self._generator(user)
        raise ValueError("heuristic backend requires prompts built by this module")

    def _critic(self, user: str) -> str:
        pair = _TOP_PAIR_RE.search(user)
        if pair:
            a, b = sorted((int(pair.group(1)), int(pair.group(2))))
            r = pair.group(3)
        else:
            a, b, r = 1, 2, "0"
        skew_col, skew_val = 1, 0.0
        for m in _SKEW_LINE_RE.finditer(user):
            idx = int(m.group(1))
            try:
                val = abs(float(m.group(2)))
            except ValueError:
                continue
            if val > abs(skew_val) + 1e-12:
                skew_col, skew_val = idx, val
        return (
            "SEMANTIC:\n"
            f"- combine correlated features f{a} and f{b} (|r|={r})\n"
            "DISTRIBUTION:\n"
            f"- apply log to skewed feature f{skew_col} (skew={skew_val:.4g})\n"
        )

    def _generator(self, user: str) -> str:
        advice = _advice_block(user)
        pair = _ADVICE_PAIR_RE.search(advice)
        skew = _ADVICE_SKEW_RE.search(advice)
        if pair and skew:
            a, b = sorted((int(pair.group(1)), int(pair.group(2))))
            c = int(skew.group(1))
            seq = f"f{a}*f{b},log(f{c}),f{a}/f{b}"
        else:
            mentioned = []
            for m in _FEATURE_TOKEN_RE.finditer(advice):
                idx = int(m.group(1))
                if idx not in mentioned:
                    mentioned.append(idx)
            if not mentioned:
                mentioned = [1]
            parts = []
            for idx in mentioned:
                parts.extend([f"log(f{idx})", f"sqrt(f{idx})", f"f{idx}*f{idx}"])
            seq = ",".join(parts)
        return f"Proposed transformations:\n{SEQ_OPEN}{seq}{SEQ_CLOSE}"


def _advice_block(user: str) -> str:
    start = user.find("ADVICE:")
    if start < 0:
        return user
    end = user.find("\nTASK:", start)
    return user[start:end] if end >= 0 else user[start:]


# --- prompt construction ----------------------------------------------------

def build_critic_prompt(meta, stats, current_features) -> tuple:
    """(system, user) for the critic.  `stats` is the pair returned by
    `diagnosis.summarize`; `current_features` is a list of (name, expr_text
    or None) covering generated columns."""
    per_column, space = stats
    system = (
        f"{_CRITIC_MARKER} You are the critic in a feature-engineering duet. "
        "Diagnose the feature space of a tabular dataset and give actionable "
        "advice for constructing new features from the existing ones.\n"
        "Respond with exactly two labeled sections:\n"
        "SEMANTIC:\n- one bullet per advice item grounded in feature meaning\n"
        "DISTRIBUTION:\n- one bullet per advice item grounded in the statistics\n"
    )
    feature_lines = [
        f"f{i + 1} {name}: {desc}"
        for i, (name, desc) in enumerate(meta.feature_descriptions)
    ]
    generated = [
        f"{name} = {expr_text}" for name, expr_text in current_features if expr_text
    ]
    user = (
        "TASK DESCRIPTION:\n"
        f"{meta.task_description}\n\n"
        "FEATURES:\n" + "\n".join(feature_lines) + "\n\n"
        "GENERATED FEATURES:\n"
        + ("\n".join(generated) if generated else "(none yet)")
        + "\n\nSTATISTICS:\n"
        + render_stats(per_column, space)
        + "\n"
    )
    return system, user


def build_generator_prompt(meta, ops, advice: CritiqueAdvice, current_features,
                           k_max: int) -> tuple:
    """(system, user) for the generator; embeds advice items verbatim."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    token_lines = []
    for i, (name, expr_text) in enumerate(current_features):
        origin = expr_text if expr_text else "original"
        token_lines.append(f"f{i + 1} = {name} ({origin})")
    system = (
        f"{_GENERATOR_MARKER} You are the generator in a feature-engineering "
        "duet. You write new features for a tabular dataset as expressions "
        "over feature tokens.\n"
        "Feature tokens:\n" + "\n".join(token_lines) + "\n"
        f"Operators — {ops.describe()}\n"
        "Grammar: a comma-separated list of expressions; each expression "
        "combines feature tokens with the binary operators and unary calls "
        "like log(f1). No numeric constants and no unary minus.\n"
        "Worked examples:\n"
        f"features f1..f5, advice to cross and rescale -> {SEQ_OPEN}{FORMAT_EXEMPLAR}{SEQ_CLOSE}\n"
        f"features f1..f2, advice to take ratios -> {SEQ_OPEN}f1/f2,f1-f2,(f1+f2)/f1{SEQ_CLOSE}\n"
        f"The final line of your answer must be exactly one sequence wrapped "
        f"in {SEQ_OPEN} and {SEQ_CLOSE}.\n"
    )
    advice_lines = [f"- {item}" for item in advice.items]
    user = (
        "TASK DESCRIPTION:\n"
        f"{meta.task_description}\n\n"
        "ADVICE:\n" + "\n".join(advice_lines) + "\n"
        f"TASK: Propose at most {k_max} new features as one token sequence. "
        f"Answer with the sequence on the final line inside {SEQ_OPEN}...{SEQ_CLOSE}.\n"
    )
    return system, user


# --- response parsing / agent drivers ---------------------------------------

_BULLET_RE = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*(.+)$")

RETRY_SUFFIX = (
    "\nYour previous answer was missing the SEMANTIC: and DISTRIBUTION: "
    "sections. Reply again using exactly those two labeled sections with "
    "bullet items."
)


def parse_critic_response(text: str):
    """Split a critic response into (semantic, distributional) item lists;
    returns None when neither section header is present."""
    semantic, distributional = [], []
    current = None
    saw_header = False
    for line in text.splitlines():
        stripped = line.strip()
        upper = stripped.upper()
        if upper.startswith("SEMANTIC"):
            current = semantic
            saw_header = True
            continue
        if upper.startswith("DISTRIBUTION"):
            current = distributional
            saw_header = True
            continue
        m = _BULLET_RE.match(line)
        if m and current is not None and m.group(1).strip():
            current.append(m.group(1).strip())
    if not saw_header or not (semantic or distributional):
        return None
    return semantic, distributional


def run_critic(backend, prompt, config: AgentConfig = AgentConfig(),
               transcript: Transcript = None) -> CritiqueAdvice:
    system, user = prompt
    response = backend.complete(system, user, config.temperature_critic, config.max_tokens)
    if transcript is not None:
        transcript.append(CRITIC_ROLE, system, user, response)
    parsed = parse_critic_response(response)
    if parsed is None:
        retry_user = user + RETRY_SUFFIX
        response = backend.complete(system, retry_user, config.temperature_critic,
                                    config.max_tokens)
        if transcript is not None:
            transcript.append(CRITIC_ROLE, system, retry_user, response)
        parsed = parse_critic_response(response)
    if parsed is None:
        # Degrade rather than fail: treat the whole response as one item.
        item = response.strip() or "no advice"
        return CritiqueAdvice((item,), (), raw_response=response)
    semantic, distributional = parsed
    return CritiqueAdvice(tuple(semantic), tuple(distributional), raw_response=response)


_SEQ_RE = re.compile(re.escape(SEQ_OPEN) + r"(.*?)" + re.escape(SEQ_CLOSE), re.DOTALL)


def extract_sequence_text(response: str) -> str:
    """Text between the last marker pair, else the last non-empty line."""
    matches = _SEQ_RE.findall(response)
    if matches:
        return matches[-1].strip()
    for line in reversed(response.splitlines()):
        if line.strip():
            return line.strip()
    return ""


def run_generator(backend, prompt, ops, k_max: int = None,
                  config: AgentConfig = AgentConfig(),
                  transcript: Transcript = None) -> dsl.TransformSequence:
    system, user = prompt
    last_error = None
    for attempt in range(3):  # first try + 2 self-repair retries
        response = backend.complete(system, user, config.temperature_generator,
                                    config.max_tokens)
        if transcript is not None:
            transcript.append(GENERATOR_ROLE, system, user, response)
        candidate = extract_sequence_text(response)
        try:
            seq = dsl.parse(candidate, ops)
        except dsl.ParseError as exc:
            last_error = exc
            user = (
                user
                + f"\nYour previous answer could not be parsed ({exc}). "
                f"Reply again with one valid sequence inside {SEQ_OPEN}{SEQ_CLOSE}."
            )
            continue
        if k_max is not None and len(seq) > k_max:
            seq = dsl.TransformSequence(seq.exprs[:k_max])
        return seq
    raise GenerationError(f"generator output unparseable after retries: {last_error}")
