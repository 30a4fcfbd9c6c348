"""Command line entry points: run, evaluate, report, replay.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage or config
errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .backends import ModelSpec, StaticBackend, TranscriptRecord
from .errors import SchemaError, SiteCrewError
from .evaluation import (
    JudgeConfig,
    JudgeItem,
    aggregate,
    default_rubric,
    export_report,
    judge_scores,
    oracle_scores,
)
from .planparse import parse_plan
from .runner import (
    ExperimentConfig,
    build_backend,
    load_meta,
    load_records,
    plan_text_for_record,
    run_matrix,
    scenario_for_record,
    sdk_for_run,
    write_records,
)
from .validation import validate_plan


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
def main():
    """Multi-agent construction-robot planning experiments."""


def _split(value: str | None) -> tuple[str, ...] | None:
    if value is None:
        return None
    return tuple(v.strip() for v in value.split(",") if v.strip())


@main.command("run")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Experiment config YAML.")
@click.option("--designs", default=None, help="Comma-separated designs (A_single..D_four or A..D).")
@click.option("--scenarios", default=None, help="Comma-separated scenario ids or YAML paths.")
@click.option("--reps", type=int, default=None, help="Repetitions per (design, scenario) cell.")
@click.option("--seed", type=int, default=None, help="Base seed; per-run seed is seed + repetition.")
@click.option("--parallelism", type=int, default=None, help="Worker threads for the run matrix.")
@click.option("--strict", is_flag=True, default=False, help="Abort on the first failed run.")
@click.option("--out", "out_dir", default=None, help="Output directory (resumable).")
def cmd_run(config_path, designs, scenarios, reps, seed, parallelism, strict, out_dir):
    """Execute the designs x scenarios x repetitions matrix."""
    overrides = {
        "designs": _split(designs),
        "scenarios": _split(scenarios),
        "repetitions": reps,
        "seed": seed,
        "parallelism": parallelism,
        "out_dir": out_dir,
    }
    try:
        if config_path:
            config = ExperimentConfig.from_file(config_path, **overrides)
        else:
            config = ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})
        if strict:
            config.strict = True
    except (SchemaError, TypeError, ValueError) as exc:
        raise click.UsageError(str(exc))
    try:
        out = run_matrix(config)
    except SiteCrewError as exc:
        _fail(str(exc))
    meta = load_meta(out)
    click.echo(f"run complete: {meta['new_runs']} new, {meta['skipped_runs']} resumed -> {out}")


def _judge_config(meta_config: dict):
    section = meta_config.get("judge")
    if not section:
        raise click.UsageError(
            "judge scoring requested but the run config has no judge section"
        )
    model = ModelSpec(
        id=section.get("model", "gpt-4o"),
        modality="text",
        price_per_mtok=float(section.get("price_per_mtok", 2.50)),
    )
    rubric = (
        Path(section["rubric_path"]).read_text(encoding="utf-8")
        if section.get("rubric_path")
        else default_rubric()
    )
    cfg = JudgeConfig(model=model, rubric=rubric, shuffle_seed=int(section.get("shuffle_seed", 0)))
    backend_spec = section.get("backend", {"kind": "http", "base_url": ""})
    if backend_spec.get("kind") == "static":
        backend = StaticBackend(backend_spec["text"])
    else:
        backend, _ = build_backend(backend_spec)
    return cfg, backend


@main.command("evaluate")
@click.option("--run", "run_dir", type=click.Path(exists=True), required=True,
              help="Run directory produced by 'run'.")
@click.option("--oracle", "use_oracle", is_flag=True, help="Apply the deterministic rule-based scorer.")
@click.option("--judge", "use_judge", is_flag=True, help="Apply the LLM judge (needs a judge config section).")
@click.option("--both", "use_both", is_flag=True, help="Apply both scorers.")
def cmd_evaluate(run_dir, use_oracle, use_judge, use_both):
    """Score recorded runs and write the scores back into records.jsonl."""
    if use_both:
        scorer = "both"
    elif use_judge and use_oracle:
        scorer = "both"
    elif use_judge:
        scorer = "judge"
    else:
        scorer = "oracle"
    try:
        records = load_records(run_dir)
        if not records:
            _fail(f"no records found in {run_dir}")
        meta = load_meta(run_dir)
        sdk = sdk_for_run(run_dir)

        plans: dict[str, str] = {}
        if scorer in ("oracle", "both"):
            for rec in records:
                if rec.status != "completed":
                    continue
                text = plan_text_for_record(run_dir, rec)
                plans[rec.key] = text
                scenario = scenario_for_record(run_dir, rec)
                plan = parse_plan(text)
                report = validate_plan(plan, sdk, scenario)
                rec.scores["oracle"] = oracle_scores(plan, report, scenario)

        if scorer in ("judge", "both"):
            cfg, backend = _judge_config(meta.get("config", {}))
            items = []
            model_ids = (meta.get("config", {}).get("vlm_id", ""),
                         meta.get("config", {}).get("llm_id", ""))
            for rec in records:
                if rec.status != "completed":
                    continue
                text = plans.get(rec.key) or plan_text_for_record(run_dir, rec)
                scenario = scenario_for_record(run_dir, rec)
                items.append(JudgeItem(
                    key=rec.key,
                    plan_text=text,
                    role=scenario.role,
                    pipeline_model_ids=tuple(m for m in model_ids if m),
                ))
            results = judge_scores(items, cfg, backend)
            for rec in records:
                if rec.key in results:
                    scores = results[rec.key]
                    if scores is None:
                        rec.judge_failed = True
                    else:
                        rec.scores["judge"] = scores
                        rec.judge_failed = False

        write_records(run_dir, records)
    except click.UsageError:
        raise
    except SiteCrewError as exc:
        _fail(str(exc))
    click.echo(f"scored {sum(1 for r in records if r.scores)} of {len(records)} records ({scorer})")


@main.command("report")
@click.option("--run", "run_dir", type=click.Path(exists=True), required=True,
              help="Run directory with scored records.")
@click.option("--source", type=click.Choice(["oracle", "judge"]), default="oracle",
              help="Which score source to aggregate.")
@click.option("--out", "out_dir", default=None, help="Report directory (defaults to the run dir).")
def cmd_report(run_dir, source, out_dir):
    """Aggregate scored records into stats, generalizability, and tradeoff CSVs."""
    try:
        records = load_records(run_dir)
        if not records:
            _fail(f"no records found in {run_dir}")
        if not any(source in r.scores for r in records):
            _fail(f"no {source!r} scores present; run 'evaluate' first")
        stats = aggregate(records, source=source)
        written = export_report(stats, records, out_dir or run_dir)
    except SiteCrewError as exc:
        _fail(str(exc))
    for path in written:
        click.echo(str(path))


@main.command("replay")
@click.option("--run", "run_dir", type=click.Path(exists=True), required=True,
              help="Run directory containing transcripts.")
@click.argument("key")
def cmd_replay(run_dir, key):
    """Print the agent-by-agent exchange of one recorded run.

    KEY has the form design/scenario/repNNN, e.g. C_three/painter/rep000.
    """
    records = {rec.key: rec for rec in load_records(run_dir)}
    if key not in records:
        _fail(f"no recorded run with key {key!r}")
    rec = records[key]
    if not rec.transcript_ref:
        _fail(f"run {key!r} failed before producing a transcript ({rec.failure_class})")
    path = Path(run_dir) / rec.transcript_ref
    if not path.is_file():
        _fail(f"transcript file missing: {path}")
    click.echo(f"=== {key} | status={rec.status} | wall={rec.wall_time_s}s | cost=${rec.cost_usd} ===")
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        t = TranscriptRecord.from_json(json.loads(line))
        click.echo(f"\n--- task {t.task_id} | model {t.model_id} | "
                   f"tokens {t.response.tokens_in}/{t.response.tokens_out} | "
                   f"latency {t.response.latency_s}s ---")
        click.echo(f"[system] {t.system_prompt}")
        click.echo(f"[user] {t.user_message}")
        click.echo(f"[assistant] {t.response.text}")


if __name__ == "__main__":
    main()
