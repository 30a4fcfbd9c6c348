"""Scoring, cost accounting, normalization, and aggregation.

Two scoring routes exist on purpose: a deterministic rule-based oracle that
serves as the CI gate, and an LLM judge that mirrors the experimental
methodology (anonymized, order-randomized, scored by a different model
family). Cost arithmetic is exact decimal; no binary float enters the
ledger.
"""

from __future__ import annotations

import csv
import json
import random
import re
import statistics
from dataclasses import dataclass, field
from decimal import Decimal
from importlib import resources
from pathlib import Path

from .backends import Backend, CompletionRequest, ModelSpec, model_family
from .errors import JudgeFamilyConflict, JudgeParseError, OutOfRange, UnpricedModel
from .planparse import Plan
from .scenarios import ScenarioSpec
from .validation import (
    ARITY_MISMATCH,
    FORBIDDEN_MENTION,
    MISSING_REQUIRED_OBJECT,
    SPATIAL_LITERAL,
    UNGROUNDED_OBJECT,
    UNKNOWN_FUNCTION,
    ValidationReport,
    _first_occurrence,
)

SUB_FACTORS = (
    "object_usage",
    "intention_prediction",
    "function_appropriateness",
    "ordering",
    "semantic_understanding",
    "spatial_hallucination",
    "sdk_conformance",
)

METRICS = ("correctness", "temporal", "executability")

_METRIC_SUBS = {
    "correctness": ("object_usage", "intention_prediction", "function_appropriateness"),
    "temporal": ("ordering", "semantic_understanding"),
    "executability": ("spatial_hallucination", "sdk_conformance"),
}


def _clamp10(v: float) -> float:
    return min(10.0, max(0.0, v))


@dataclass(frozen=True)
class MetricScores:
    object_usage: float
    intention_prediction: float
    function_appropriateness: float
    ordering: float
    semantic_understanding: float
    spatial_hallucination: float
    sdk_conformance: float
    source: str = "oracle"

    def __post_init__(self):
        for name in SUB_FACTORS:
            v = getattr(self, name)
            if not 0 <= v <= 10:
                raise ValueError(f"{name} out of [0, 10]: {v}")

    def metric(self, name: str) -> float:
        # a metric is the unweighted mean of its sub-scores
        subs = _METRIC_SUBS[name]
        return statistics.mean(getattr(self, s) for s in subs)

    @property
    def correctness(self) -> float:
        return self.metric("correctness")

    @property
    def temporal(self) -> float:
        return self.metric("temporal")

    @property
    def executability(self) -> float:
        return self.metric("executability")

    def to_json(self) -> dict:
        out = {name: getattr(self, name) for name in SUB_FACTORS}
        out["source"] = self.source
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "MetricScores":
        return cls(**{name: obj[name] for name in SUB_FACTORS}, source=obj.get("source", "oracle"))


@dataclass
class RunRecord:
    scenario_id: str
    design: str
    repetition: int
    status: str  # completed | failed
    wall_time_s: float
    tokens_by_model: dict[str, tuple[int, int]]
    cost_usd: Decimal
    transcript_ref: str
    scores: dict[str, MetricScores] = field(default_factory=dict)
    seed: int | None = None
    temperature: float = 0.0
    failure_class: str = ""
    judge_failed: bool = False

    @property
    def key(self) -> str:
        return f"{self.design}/{self.scenario_id}/rep{self.repetition:03d}"

    def to_json(self) -> dict:
        return {
            "key": self.key,
            "scenario_id": self.scenario_id,
            "design": self.design,
            "repetition": self.repetition,
            "status": self.status,
            "wall_time_s": self.wall_time_s,
            "tokens_by_model": {k: list(v) for k, v in sorted(self.tokens_by_model.items())},
            "cost_usd": str(self.cost_usd),
            "transcript_ref": self.transcript_ref,
            "scores": {src: s.to_json() for src, s in sorted(self.scores.items())},
            "seed": self.seed,
            "temperature": self.temperature,
            "failure_class": self.failure_class,
            "judge_failed": self.judge_failed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RunRecord":
        return cls(
            scenario_id=obj["scenario_id"],
            design=obj["design"],
            repetition=obj["repetition"],
            status=obj["status"],
            wall_time_s=obj["wall_time_s"],
            tokens_by_model={k: (v[0], v[1]) for k, v in obj["tokens_by_model"].items()},
            cost_usd=Decimal(obj["cost_usd"]),
            transcript_ref=obj["transcript_ref"],
            scores={src: MetricScores.from_json(s) for src, s in obj.get("scores", {}).items()},
            seed=obj.get("seed"),
            temperature=obj.get("temperature", 0.0),
            failure_class=obj.get("failure_class", ""),
            judge_failed=obj.get("judge_failed", False),
        )


# ---------------------------------------------------------------------------
# oracle scoring


def oracle_scores(plan: Plan, report: ValidationReport, scenario: ScenarioSpec) -> MetricScores:
    """Deterministic sub-scores computed from violation counts.

    An empty plan scores zero everywhere; a violation-free plan touching
    all required objects and the intended target scores ten everywhere.
    """
    n = len(plan.steps)
    if n == 0:
        return MetricScores(*(0.0,) * 7, source="oracle")
    c = report.counts

    sdk_conformance = _clamp10(10 * (1 - (c[UNKNOWN_FUNCTION] + c[ARITY_MISMATCH]) / n))
    spatial = _clamp10(10 * (1 - c[SPATIAL_LITERAL] / n))
    function_appropriateness = _clamp10(10 * (1 - c[UNKNOWN_FUNCTION] / n))

    grounded_ratio = max(0.0, 1 - c[UNGROUNDED_OBJECT] / n)
    req = scenario.required_objects
    req_cov = 1 - c[MISSING_REQUIRED_OBJECT] / len(req) if req else 1.0
    object_usage = _clamp10(10 * (grounded_ratio + max(0.0, req_cov)) / 2)

    applicable = 0
    satisfied = 0
    for a, b in scenario.precedence:
        first_a = _first_occurrence(plan, a, scenario)
        first_b = _first_occurrence(plan, b, scenario)
        if first_a is not None and first_b is not None:
            applicable += 1
            if first_b >= first_a:
                satisfied += 1
    ordering = 10 * satisfied / applicable if applicable else 10.0

    if scenario.forbidden_target and _first_occurrence(plan, scenario.forbidden_target, scenario) is not None:
        intention = 0.0
    elif scenario.intended_target and _first_occurrence(plan, scenario.intended_target, scenario) is not None:
        intention = 10.0
    else:
        intention = 5.0

    base = 0.0 if c[FORBIDDEN_MENTION] else 10.0
    factor = 1.0
    irrelevant_firsts = [
        f for name in scenario.irrelevant_objects
        if (f := _first_occurrence(plan, name, scenario)) is not None
    ]
    if irrelevant_firsts and req:
        first_irr = min(irrelevant_firsts)
        before = sum(
            1 for name in req
            if (f := _first_occurrence(plan, name, scenario)) is not None and f < first_irr
        )
        factor = before / len(req)
    semantic = _clamp10(base * factor)

    return MetricScores(
        object_usage=object_usage,
        intention_prediction=intention,
        function_appropriateness=function_appropriateness,
        ordering=ordering,
        semantic_understanding=semantic,
        spatial_hallucination=spatial,
        sdk_conformance=sdk_conformance,
        source="oracle",
    )


# ---------------------------------------------------------------------------
# cost and normalization


def load_price_table(path: str | Path | None = None) -> dict[str, Decimal]:
    """Model id -> USD per million tokens, parsed as exact decimals."""
    if path is None:
        text = resources.files("sitecrew").joinpath("data/prices.yaml").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    import yaml

    raw = yaml.safe_load(text) or {}
    table = {}
    for model_id, price in raw.items():
        value = Decimal(str(price))
        if value < 0:
            raise ValueError(f"negative price for {model_id}")
        table[model_id] = value
    return table


def compute_cost(tokens_by_model: dict[str, tuple[int, int]], prices: dict[str, Decimal]) -> Decimal:
    """Exact decimal cost: sum over models of total tokens / 1e6 x price."""
    total = Decimal(0)
    for model_id, (tokens_in, tokens_out) in tokens_by_model.items():
        if model_id not in prices:
            raise UnpricedModel(f"no price for model {model_id!r}")
        total += Decimal(tokens_in + tokens_out) * prices[model_id] / Decimal(1_000_000)
    return total


def normalize(x: float, x_min: float, x_max: float) -> float:
    """Scale to [0, 10] where x_min is most desirable (10) and x_max least
    (0). All candidates tying at the best value normalize to 10."""
    if not (x_min <= x <= x_max):
        raise OutOfRange(f"x={x} outside [{x_min}, {x_max}]")
    if x_min == x_max:
        return 10.0
    return 10 * (1 - (x - x_min) / (x_max - x_min))


def generalizability_index(per_role_means: list[float]) -> dict[str, float]:
    """Arithmetic mean and population stddev across roles; a low stddev
    signals role-independent competence."""
    if len(per_role_means) < 2:
        raise ValueError("need means for at least two roles")
    return {
        "mean": statistics.mean(per_role_means),
        "stddev": statistics.pstdev(per_role_means),
    }


# ---------------------------------------------------------------------------
# aggregation


def _quantile(sorted_vals: list[float], q: float) -> float:
    """Linear interpolation between closest ranks."""
    n = len(sorted_vals)
    if n == 1:
        return sorted_vals[0]
    pos = q * (n - 1)
    lo = int(pos)
    frac = pos - lo
    if lo + 1 >= n:
        return sorted_vals[-1]
    return sorted_vals[lo] + frac * (sorted_vals[lo + 1] - sorted_vals[lo])


@dataclass(frozen=True)
class CellStats:
    n: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float


def cell_stats(values: list[float]) -> CellStats:
    vals = sorted(values)
    return CellStats(
        n=len(vals),
        min=vals[0],
        q1=_quantile(vals, 0.25),
        median=_quantile(vals, 0.5),
        q3=_quantile(vals, 0.75),
        max=vals[-1],
        mean=statistics.mean(vals),
    )


@dataclass
class AggregateStats:
    cells: dict[tuple[str, str, str], CellStats]  # (design, scenario, metric)
    generalizability: dict[str, dict[str, float]]  # design -> {mean, stddev}
    availability: dict[tuple[str, str], tuple[int, int]]  # (design, scenario) -> (completed, failed)
    empty_cells: list[tuple[str, str]]
    mean_cost_by_design: dict[str, Decimal]
    mean_time_by_design: dict[str, float]
    source: str


def aggregate(records: list[RunRecord], source: str = "oracle") -> AggregateStats:
    """Per (design, scenario, metric) distributions plus the per-design
    generalizability index. Failed runs are excluded from score stats but
    counted in availability."""
    cells: dict[tuple[str, str, str], list[float]] = {}
    availability: dict[tuple[str, str], list[int]] = {}
    costs: dict[str, list[Decimal]] = {}
    times: dict[str, list[float]] = {}
    empty: list[tuple[str, str]] = []

    for rec in records:
        avail = availability.setdefault((rec.design, rec.scenario_id), [0, 0])
        if rec.status == "completed" and source in rec.scores:
            avail[0] += 1
            scores = rec.scores[source]
            for metric in METRICS:
                cells.setdefault((rec.design, rec.scenario_id, metric), []).append(scores.metric(metric))
            costs.setdefault(rec.design, []).append(rec.cost_usd)
            times.setdefault(rec.design, []).append(rec.wall_time_s)
        else:
            avail[1] += 1

    for (design, scenario), (completed, _failed) in availability.items():
        if completed == 0:
            empty.append((design, scenario))

    stat_cells = {key: cell_stats(vals) for key, vals in cells.items()}

    generalizability: dict[str, dict[str, float]] = {}
    designs = sorted({d for d, _, _ in stat_cells})
    for design in designs:
        scenarios = sorted({s for d, s, _ in stat_cells if d == design})
        role_means = [
            statistics.mean(stat_cells[(design, s, metric)].mean for metric in METRICS)
            for s in scenarios
            if all((design, s, metric) in stat_cells for metric in METRICS)
        ]
        if len(role_means) >= 2:
            generalizability[design] = generalizability_index(role_means)

    return AggregateStats(
        cells=stat_cells,
        generalizability=generalizability,
        availability={k: (v[0], v[1]) for k, v in availability.items()},
        empty_cells=sorted(empty),
        mean_cost_by_design={d: sum(v, Decimal(0)) / len(v) for d, v in costs.items()},
        mean_time_by_design={d: statistics.mean(v) for d, v in times.items()},
        source=source,
    )


# ---------------------------------------------------------------------------
# reports


def _metric_mean_by_design(stats: AggregateStats, metric: str) -> dict[str, float]:
    out: dict[str, list[float]] = {}
    for (design, _scenario, m), cell in stats.cells.items():
        if m == metric:
            out.setdefault(design, []).append(cell.mean)
    return {d: statistics.mean(v) for d, v in out.items()}


def export_report(stats: AggregateStats, records: list[RunRecord], out_dir: str | Path) -> list[Path]:
    """Emit stats.csv, generalizability.csv, tradeoff.csv, and summary.csv.

    tradeoff.csv carries all five metrics on the common 0-10 scale: quality
    metrics keep 'higher is better', cost and time are inverted so the
    cheapest/fastest design scores 10.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    stats_path = out / "stats.csv"
    with stats_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["design", "scenario", "metric", "n", "min", "q1", "median", "q3", "max", "mean"])
        for (design, scenario, metric) in sorted(stats.cells):
            c = stats.cells[(design, scenario, metric)]
            w.writerow([design, scenario, metric, c.n, c.min, c.q1, c.median, c.q3, c.max, c.mean])
    written.append(stats_path)

    gen_path = out / "generalizability.csv"
    with gen_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["design", "mean", "stddev"])
        for design in sorted(stats.generalizability):
            g = stats.generalizability[design]
            w.writerow([design, g["mean"], g["stddev"]])
    written.append(gen_path)

    tradeoff_path = out / "tradeoff.csv"
    with tradeoff_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["design", "correctness", "temporal", "executability", "time", "cost"])
        designs = sorted(stats.mean_cost_by_design)
        if designs:
            quality = {m: _metric_mean_by_design(stats, m) for m in METRICS}
            costs = {d: float(stats.mean_cost_by_design[d]) for d in designs}
            times = {d: stats.mean_time_by_design[d] for d in designs}
            for design in designs:
                row = [design]
                for metric in METRICS:
                    vals = quality[metric]
                    # higher is better: best observed value maps to 10
                    row.append(10 - normalize(vals[design], min(vals.values()), max(vals.values()))
                               if min(vals.values()) != max(vals.values()) else 10.0)
                row.append(normalize(times[design], min(times.values()), max(times.values())))
                row.append(normalize(costs[design], min(costs.values()), max(costs.values())))
                w.writerow(row)
    written.append(tradeoff_path)

    summary_path = out / "summary.csv"
    with summary_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["design", "mean_cost_usd", "mean_wall_time_s", "completed", "failed"])
        for design in sorted(stats.mean_cost_by_design):
            completed = sum(c for (d, _), (c, _f) in stats.availability.items() if d == design)
            failed = sum(f for (d, _), (_c, f) in stats.availability.items() if d == design)
            w.writerow([design, str(stats.mean_cost_by_design[design]),
                        stats.mean_time_by_design[design], completed, failed])
    written.append(summary_path)

    records_path = out / "records.jsonl"
    with records_path.open("w", encoding="utf-8") as fh:
        for rec in sorted(records, key=lambda r: r.key):
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")
    written.append(records_path)

    return written


# ---------------------------------------------------------------------------
# LLM judge


@dataclass(frozen=True)
class JudgeConfig:
    model: ModelSpec
    rubric: str
    shuffle_seed: int = 0
    anonymize: bool = True


@dataclass(frozen=True)
class JudgeItem:
    key: str
    plan_text: str
    role: str
    pipeline_model_ids: tuple[str, ...] = ()


def default_rubric() -> str:
    return resources.files("sitecrew").joinpath("data/judge/rubric_v1.txt").read_text(encoding="utf-8")


def render_judge_prompt(cfg: JudgeConfig, item: JudgeItem) -> str:
    """Rubric plus the anonymized plan: role and plan text only, no design
    or model identifiers, no repetition indices."""
    return cfg.rubric.replace("{role}", item.role).replace("{plan}", item.plan_text)


def submission_order(n: int, seed: int) -> list[int]:
    """Seed-determined permutation used to submit a batch (position-bias
    mitigation)."""
    order = list(range(n))
    random.Random(seed).shuffle(order)
    return order


def parse_judge_response(text: str) -> MetricScores:
    values: dict[str, float] = {}
    for name in SUB_FACTORS:
        m = re.search(rf"{name}\s*[:=]\s*(\d+)", text)
        if m is None:
            raise JudgeParseError(f"sub-factor {name!r} not found in judge output")
        v = int(m.group(1))
        if not 0 <= v <= 10:
            raise JudgeParseError(f"sub-factor {name!r} out of range: {v}")
        values[name] = float(v)
    return MetricScores(**values, source="judge")


def judge_scores(
    items: list[JudgeItem], cfg: JudgeConfig, backend: Backend
) -> dict[str, MetricScores | None]:
    """Submit a batch to the judge model anonymously in seeded random order.

    The judge model family must differ from every pipeline model family.
    Unparseable output gets one retry, then the item is marked failed
    (None) rather than aborting the batch.
    """
    pipeline_families = {
        model_family(mid) for item in items for mid in item.pipeline_model_ids
    }
    if cfg.model.family in pipeline_families:
        raise JudgeFamilyConflict(
            f"judge family {cfg.model.family!r} overlaps pipeline model families"
        )

    results: dict[str, MetricScores | None] = {}
    for idx in submission_order(len(items), cfg.shuffle_seed):
        item = items[idx]
        prompt = render_judge_prompt(cfg, item)
        req = CompletionRequest(system_prompt="You are a strict grader.", user_message=prompt)
        scores: MetricScores | None = None
        for _attempt in range(2):
            resp = backend.complete(cfg.model, req)
            try:
                scores = parse_judge_response(resp.text)
                break
            except JudgeParseError:
                continue
        results[item.key] = scores
    return results
