"""The duet-play refinement loop and its conversational variant.

Each automatic round: summarize the current table, ask the critic for
advice, hand the advice to the generator, validate and append the proposed
columns, repeat.  Labels never enter this module; the run signature has no
place for them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from . import agents, dataset, diagnosis, dsl


@dataclass(frozen=True)
class LoopConfig:
    iterations: int = 3
    k_max: int = 10
    budget_multiplier: float = 4.0
    seed: int = 0
    backend_name: str = "heuristic"
    agent: agents.AgentConfig = field(default_factory=agents.AgentConfig)

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")

    def policy(self) -> dataset.AcceptancePolicy:
        return dataset.AcceptancePolicy(budget_multiplier=self.budget_multiplier)


@dataclass
class IterationRecord:
    index: int
    advice: agents.CritiqueAdvice = None
    proposed: dsl.TransformSequence = None
    accepted: list = field(default_factory=list)
    rejections: list = field(default_factory=list)
    table_shape: tuple = (0, 0)
    skipped: str = ""  # non-empty when the round produced nothing usable
    t_diagnose: float = 0.0
    t_backend: float = 0.0
    t_apply: float = 0.0

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "advice": {
                "semantic": list(self.advice.semantic_advice) if self.advice else [],
                "distribution": list(self.advice.distributional_advice) if self.advice else [],
            },
            "proposed": dsl.render(self.proposed) if self.proposed else "",
            "accepted": [dsl.render_expr(e) for e in self.accepted],
            "rejections": [r.to_dict() for r in self.rejections],
            "table_shape": list(self.table_shape),
            "skipped": self.skipped,
            "timings": {
                "diagnose": self.t_diagnose,
                "backend": self.t_backend,
                "apply": self.t_apply,
            },
        }


@dataclass
class RunResult:
    final_table: dataset.FeatureTable
    iterations: list
    transcript: agents.Transcript

    def accepted_sequences(self) -> list:
        seqs = []
        for rec in self.iterations:
            if rec.accepted:
                seqs.append(dsl.TransformSequence(tuple(rec.accepted)))
        return seqs


class LoopAborted(RuntimeError):
    """Backend gave out mid-run; `partial` holds the result so far."""

    def __init__(self, message: str, partial: RunResult):
        super().__init__(message)
        self.partial = partial


def _current_features(table: dataset.FeatureTable) -> list:
    return [
        (name, None if prov is dataset.ORIGINAL else dsl.render_expr(prov))
        for name, prov in zip(table.column_names, table.provenance)
    ]


def run(table, meta, ops, cfg: LoopConfig, backend) -> RunResult:
    """Run the automatic critic/generator loop for cfg.iterations rounds."""
    transcript = agents.Transcript()
    records = []
    policy = cfg.policy()
    current = table

    for i in range(cfg.iterations):
        rec = IterationRecord(index=i)
        t0 = time.perf_counter()
        stats = diagnosis.summarize(current)
        rec.t_diagnose = time.perf_counter() - t0

        features = _current_features(current)
        try:
            t0 = time.perf_counter()
            critic_prompt = agents.build_critic_prompt(meta, stats, features)
            rec.advice = agents.run_critic(backend, critic_prompt, cfg.agent, transcript)
            gen_prompt = agents.build_generator_prompt(
                meta, ops, rec.advice, features, cfg.k_max
            )
            rec.proposed = agents.run_generator(
                backend, gen_prompt, ops, cfg.k_max, cfg.agent, transcript
            )
            rec.t_backend = time.perf_counter() - t0
        except agents.GenerationError as exc:
            rec.t_backend = time.perf_counter() - t0
            rec.skipped = str(exc)
            rec.table_shape = (current.n_rows, current.n_cols)
            records.append(rec)
            continue
        except (agents.BackendError, agents.ReplayExhausted) as exc:
            rec.skipped = str(exc)
            rec.table_shape = (current.n_rows, current.n_cols)
            records.append(rec)
            raise LoopAborted(str(exc), RunResult(current, records, transcript))

        t0 = time.perf_counter()
        current, report = dataset.apply_sequence(current, rec.proposed, policy)
        rec.t_apply = time.perf_counter() - t0
        rec.accepted = report.accepted
        rec.rejections = report.rejections
        rec.table_shape = (current.n_rows, current.n_cols)
        records.append(rec)

    return RunResult(current, records, transcript)


# --- conversational variant --------------------------------------------------

@dataclass(frozen=True)
class Proposal:
    sequence: dsl.TransformSequence
    preview: tuple  # FeatureStats per candidate column (pre-acceptance)


@dataclass
class SessionState:
    table: dataset.FeatureTable
    meta: dataset.DatasetMeta
    ops: dsl.OperatorSet
    cfg: LoopConfig
    backend: object
    transcript: agents.Transcript = field(default_factory=agents.Transcript)
    history: list = field(default_factory=list)  # previous tables, for undo
    pending: Proposal = None
    max_history: int = 50


def run_conversational_step(state: SessionState, human_instruction: str) -> Proposal:
    """Human instruction stands in for critic advice; the generator proposes
    a sequence which is returned unapplied with preview statistics."""
    if not human_instruction or not human_instruction.strip():
        raise ValueError("instruction must be non-empty")
    advice = agents.CritiqueAdvice((human_instruction.strip(),), ())
    features = _current_features(state.table)
    prompt = agents.build_generator_prompt(
        state.meta, state.ops, advice, features, state.cfg.k_max
    )
    seq = agents.run_generator(
        state.backend, prompt, state.ops, state.cfg.k_max, state.cfg.agent,
        state.transcript,
    )
    preview = []
    for expr in seq:
        try:
            values, _ = dsl.evaluate(expr, state.table.columns)
        except IndexError:
            continue
        preview.append(diagnosis.feature_stats(dsl.render_expr(expr), values))
    proposal = Proposal(seq, tuple(preview))
    state.pending = proposal
    return proposal


def accept(state: SessionState, indices) -> dataset.ApplyReport:
    """Apply a subset of the pending proposal's expressions."""
    if state.pending is None:
        raise ValueError("no pending proposal")
    exprs = state.pending.sequence.exprs
    for i in indices:
        if not 0 <= i < len(exprs):
            raise IndexError(f"proposal index {i} out of range")
    state.history.append(state.table)
    if len(state.history) > state.max_history:
        state.history.pop(0)
    report = dataset.ApplyReport()
    if indices:
        chosen = dsl.TransformSequence(tuple(exprs[i] for i in indices))
        state.table, report = dataset.apply_sequence(
            state.table, chosen, state.cfg.policy()
        )
    state.pending = None
    return report


def discard(state: SessionState):
    state.pending = None


def undo(state: SessionState) -> bool:
    """Restore the table before the most recent accept; False if no history."""
    if not state.history:
        return False
    state.table = state.history.pop()
    return True
