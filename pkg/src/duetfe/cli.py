"""Command-line interface: run, eval, parse, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import agents, dataset, diagnosis, dsl, evaluation, loop, report, synth
from .service import create_app, make_backend

GRAMMAR_HELP = """\
Sequence grammar:
  sequence := expr (',' expr)*
  expr     := term (('+'|'-') term)*
  term     := factor (('*'|'/') factor)*
  factor   := FEATURE | OPNAME '(' expr ')' | '(' expr ')'
  FEATURE  := 'f' digits (1-based column ordinal)
  OPNAME   := log | sqrt | square | abs | reciprocal | sin | cos | tanh
No numeric constants and no unary minus."""


@click.group()
def cli():
    """Generator-critic feature transformation for tabular data."""


def _spec_from_name(name: str):
    aliases = {
        "dt": "decision_tree", "decision_tree": "decision_tree",
        "rf": "random_forest", "random_forest": "random_forest",
        "knn": "knn",
    }
    if name not in aliases:
        raise click.UsageError(f"unknown model {name!r} (use dt, rf, knn)")
    return evaluation.classifiers.ClassifierSpec(aliases[name])


@cli.command("run")
@click.option("--data", required=True, type=click.Path(exists=True), help="Input CSV.")
@click.option("--meta", required=True, type=click.Path(exists=True), help="JSON metadata sidecar.")
@click.option("--iterations", default=3, show_default=True)
@click.option("--backend", "backend_name", default="heuristic", show_default=True,
              type=click.Choice(["remote", "replay", "heuristic"]))
@click.option("--out-dir", default="out", show_default=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--k-max", default=10, show_default=True)
@click.option("--record", "transcript_path", default=None, type=click.Path(),
              help="Transcript path: replayed when --backend replay, else written.")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--dump-stats", is_flag=True, help="Also export final-table statistics as JSON.")
@click.option("--figures/--no-figures", default=True, show_default=True)
def cli_run(data, meta, iterations, backend_name, out_dir, seed, k_max,
            transcript_path, config_path, dump_stats, figures):
    """Run the automatic duet-play loop and export the transformed table."""
    agent_cfg = agents.AgentConfig.from_file(config_path) if config_path else agents.AgentConfig()
    table, labels, ds_meta = dataset.load_csv(data, meta)
    cfg = loop.LoopConfig(iterations=iterations, k_max=k_max, seed=seed,
                          backend_name=backend_name, agent=agent_cfg)
    backend = make_backend(backend_name, agent_cfg,
                           transcript_path if backend_name == "replay" else None)
    try:
        result = loop.run(table, ds_meta, dsl.DEFAULT_OPERATORS, cfg, backend)
    except loop.LoopAborted as exc:
        click.echo(f"backend failed mid-run: {exc}; writing partial result", err=True)
        result = exc.partial

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "transformed.csv").write_text(result.final_table.to_csv(), encoding="utf-8")
    (out / "sequences.fts").write_text(dsl.dump_sequences(result.accepted_sequences()),
                                       encoding="utf-8")
    (out / "iterations.json").write_text(
        json.dumps([rec.to_dict() for rec in result.iterations], indent=2),
        encoding="utf-8")
    result.transcript.save(out / "transcript.jsonl")
    if transcript_path and backend_name != "replay":
        result.transcript.save(transcript_path)
    profile = evaluation.timing_profile(result)
    (out / "timing.json").write_text(json.dumps(profile, indent=2), encoding="utf-8")
    if dump_stats:
        (out / "stats.json").write_text(
            diagnosis.stats_to_json(*diagnosis.summarize(result.final_table)),
            encoding="utf-8")
    if figures:
        report.render_timing_figure(profile, out / "timing.png")
    click.echo(f"wrote {out}/transformed.csv "
               f"({result.final_table.n_cols} columns, "
               f"{result.final_table.n_cols - table.n_cols} generated)")


@cli.command("eval")
@click.option("--original", required=True, type=click.Path(exists=True),
              help="Original feature CSV (no target column).")
@click.option("--transformed", required=True, type=click.Path(exists=True),
              help="Transformed feature CSV.")
@click.option("--labels-from", required=True, type=click.Path(exists=True),
              help="Dataset CSV containing the target column.")
@click.option("--meta", required=True, type=click.Path(exists=True),
              help="Metadata naming the target column.")
@click.option("--models", default="dt,rf,knn", show_default=True)
@click.option("--seeds", default="0,1,2,3,4", show_default=True)
@click.option("--test-fraction", default=0.25, show_default=True)
@click.option("--out-dir", default="eval_out", show_default=True, type=click.Path())
@click.option("--figures/--no-figures", default=True, show_default=True)
def cli_eval(original, transformed, labels_from, meta, models, seeds,
             test_fraction, out_dir, figures):
    """Compare downstream accuracy on original vs transformed tables."""
    _, labels, ds_meta = dataset.load_csv(labels_from, meta)

    def load_table(path):
        # Accept either a feature-only CSV or a full dataset CSV with target.
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        if ds_meta.target_name in header:
            table, _, _ = dataset.load_csv(path, meta)
            return table
        return dataset.load_feature_csv(path)

    orig = load_table(original)
    trans = load_table(transformed)
    specs = [_spec_from_name(m.strip()) for m in models.split(",") if m.strip()]
    seed_list = [int(s) for s in seeds.split(",") if s.strip()]
    rep = evaluation.compare(orig, trans, labels, specs, seed_list, test_fraction)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(rep.to_json(), encoding="utf-8")
    (out / "report.txt").write_text(rep.to_text() + "\n", encoding="utf-8")
    if figures:
        report.render_eval_figure(rep, out / "accuracy.png")
    click.echo(rep.to_text())


@cli.command("parse")
@click.argument("fts_file", type=click.Path(exists=True))
def cli_parse(fts_file):
    """Validate and canonicalize a .fts sequence file."""
    text = Path(fts_file).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            seq = dsl.parse(line)
        except dsl.ParseError as exc:
            raise click.UsageError(
                f"{fts_file}:{lineno}: {exc}\n{GRAMMAR_HELP}"
            )
        click.echo(dsl.render(seq))


@cli.command("serve")
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--backend", "backend_name", default="heuristic", show_default=True,
              type=click.Choice(["remote", "replay", "heuristic"]))
@click.option("--record", "transcript_path", default=None, type=click.Path(),
              help="Transcript to replay when --backend replay.")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--static-dir", default=None, type=click.Path(),
              help="Directory of built web UI assets to serve at /.")
@click.option("--snapshot", "snapshot_path", default=None, type=click.Path(),
              help="Write a JSON session snapshot here on shutdown.")
def cli_serve(port, host, backend_name, transcript_path, config_path,
              static_dir, snapshot_path):
    """Serve the HTTP session API (and optionally the web UI)."""
    import uvicorn

    agent_cfg = agents.AgentConfig.from_file(config_path) if config_path else agents.AgentConfig()
    app = create_app(backend_name, agent_cfg, transcript_path, static_dir,
                     snapshot_path)
    uvicorn.run(app, host=host, port=port)


@cli.command("sample")
@click.option("--out-dir", default="data/sample", show_default=True, type=click.Path())
def cli_sample(out_dir):
    """Write the bundled synthetic sample dataset to disk."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table, labels, meta = synth.xor_of_signs()
    _write_dataset(out, table, labels, meta)
    click.echo(f"wrote {out}/sample.csv and {out}/sample.meta.json")


def _write_dataset(out: Path, table, labels, meta):
    import csv as _csv
    import io

    buf = io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(list(table.column_names) + [meta.target_name])
    for i, row in enumerate(zip(*table.columns)):
        writer.writerow([f"{v:.17g}" for v in row] + [int(labels[i])])
    (out / "sample.csv").write_text(buf.getvalue(), encoding="utf-8")
    (out / "sample.meta.json").write_text(json.dumps({
        "task_description": meta.task_description,
        "target": meta.target_name,
        "features": [{"name": n, "description": d}
                     for n, d in meta.feature_descriptions],
    }, indent=2), encoding="utf-8")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return 2
    except Exception as exc:  # runtime failure
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
