"""Scoring, cost ledger, normalization, aggregation, and judge protocol."""

from __future__ import annotations

import statistics
from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from sitecrew.backends import MockBackend, ModelSpec, StaticBackend
from sitecrew.errors import JudgeFamilyConflict, OutOfRange, UnpricedModel
from sitecrew.evaluation import (
    JudgeConfig,
    JudgeItem,
    MetricScores,
    RunRecord,
    SUB_FACTORS,
    aggregate,
    cell_stats,
    compute_cost,
    default_rubric,
    export_report,
    generalizability_index,
    judge_scores,
    load_price_table,
    normalize,
    oracle_scores,
    parse_judge_response,
    render_judge_prompt,
    submission_order,
)
from sitecrew.planparse import parse_plan
from sitecrew.scenarios import get_scenario
from sitecrew.sdk import default_sdk
from sitecrew.validation import validate_plan


# ---------------------------------------------------------------------------
# metric scores


def test_metric_is_mean_of_subscores():
    s = MetricScores(8, 10, 6, 4, 8, 10, 5)
    assert s.correctness == statistics.mean([8, 10, 6])
    assert s.temporal == statistics.mean([4, 8])
    assert s.executability == statistics.mean([10, 5])


def test_scores_range_enforced():
    with pytest.raises(ValueError):
        MetricScores(11, 0, 0, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        MetricScores(-1, 0, 0, 0, 0, 0, 0)


def test_scores_json_round_trip():
    s = MetricScores(1, 2, 3, 4, 5, 6, 7, source="judge")
    assert MetricScores.from_json(s.to_json()) == s


# ---------------------------------------------------------------------------
# oracle


def _score(text, scenario_id="safety-inspector"):
    sc = get_scenario(scenario_id)
    sdk = default_sdk()
    plan = parse_plan(text)
    return oracle_scores(plan, validate_plan(plan, sdk, sc), sc)


def test_oracle_empty_plan_all_zero():
    s = _score("")
    assert all(getattr(s, name) == 0.0 for name in SUB_FACTORS)


def test_oracle_perfect_plan():
    s = _score(
        'navigate_to("yellow hardhat")\n'
        'pick_up("yellow hardhat")\n'
        'place("yellow hardhat", "worker")\n'
        'pick_up("safety gloves")\n'
        'place("safety gloves", "worker")'
    )
    assert all(getattr(s, name) == 10.0 for name in SUB_FACTORS)


def test_oracle_sdk_conformance_formula():
    # 4 steps, 1 unknown function, 0 spatial literals
    s = _score(
        'fly_to("yellow hardhat")\n'
        'pick_up("yellow hardhat")\n'
        'pick_up("safety gloves")\n'
        'place("safety gloves", "worker")'
    )
    assert s.sdk_conformance == 7.5
    assert s.spatial_hallucination == 10.0
    assert s.function_appropriateness == 7.5


def test_oracle_intention():
    # intended target referenced
    assert _score('pick_up("yellow hardhat")\npick_up("safety gloves")').intention_prediction == 10.0
    # neither target referenced
    assert _score('pick_up("bucket")').intention_prediction == 5.0
    # forbidden target referenced (painter wall)
    painter_bad = _score('apply("Behr Painting Can", "wall")', "painter")
    assert painter_bad.intention_prediction == 0.0


def test_oracle_ordering_ratio():
    # hardhat < bucket satisfied, gloves < bucket violated -> 1 of 2
    s = _score('pick_up("yellow hardhat")\npick_up("bucket")\npick_up("safety gloves")')
    assert s.ordering == 5.0
    # no applicable constraints -> 10
    assert _score('detect_objects()').ordering == 10.0


def test_oracle_semantic():
    assert _score('pick_up("woodboard")').semantic_understanding == 0.0
    # irrelevant bucket touched before any required object halves nothing:
    # zero required objects precede it, so the factor is 0
    s = _score('pick_up("bucket")\npick_up("yellow hardhat")\npick_up("safety gloves")')
    assert s.semantic_understanding == 0.0
    s = _score('pick_up("yellow hardhat")\npick_up("bucket")\npick_up("safety gloves")')
    assert s.semantic_understanding == 5.0


# ---------------------------------------------------------------------------
# cost


def test_price_table_prices():
    prices = load_price_table()
    assert prices["minicpm-v-2.6"] == Decimal("0.07")
    assert prices["llama3-8b"] == Decimal("0.05")
    assert prices["gpt-4o"] == Decimal("2.50")


def test_compute_cost_examples():
    prices = load_price_table()
    assert compute_cost({"minicpm-v-2.6": (600_000, 400_000)}, prices) == Decimal("0.07")
    two = compute_cost(
        {"minicpm-v-2.6": (1_000_000, 0), "llama3-8b": (0, 1_000_000)}, prices
    )
    assert two == Decimal("0.12")
    assert compute_cost({}, prices) == Decimal("0")
    assert compute_cost({"gpt-4o": (500_000, 500_000)}, prices) == Decimal("2.50")


def test_compute_cost_exact_decimal():
    prices = load_price_table()
    got = compute_cost({"llama3-8b": (1, 2)}, prices)
    assert got == Decimal("3") * Decimal("0.05") / Decimal("1000000")
    assert isinstance(got, Decimal)


def test_unpriced_model():
    with pytest.raises(UnpricedModel):
        compute_cost({"mystery-9000": (1, 1)}, load_price_table())


# ---------------------------------------------------------------------------
# normalization


def test_normalize_endpoints():
    assert normalize(2.0, 2.0, 8.0) == 10.0
    assert normalize(8.0, 2.0, 8.0) == 0.0
    assert normalize(5.0, 2.0, 8.0) == 5.0
    assert normalize(3.0, 3.0, 3.0) == 10.0


def test_normalize_out_of_range():
    with pytest.raises(OutOfRange):
        normalize(1.0, 2.0, 8.0)
    with pytest.raises(OutOfRange):
        normalize(9.0, 2.0, 8.0)


@given(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
    st.floats(min_value=0.0, max_value=1.0),
)
def test_normalize_monotone_and_bounded(a, b, t):
    lo, hi = sorted((a, b))
    x = lo + t * (hi - lo)
    x = min(max(x, lo), hi)
    v = normalize(x, lo, hi)
    assert 0.0 <= v <= 10.0 + 1e-9
    if hi > lo:
        assert normalize(lo, lo, hi) >= v >= normalize(hi, lo, hi)


@given(
    st.floats(min_value=0.0, max_value=1e3, allow_nan=False),
    st.floats(min_value=1e-3, max_value=1e3, allow_nan=False),
    st.floats(min_value=1e-3, max_value=1e3),
)
def test_normalize_scale_invariance_at_zero_min(x, span, a):
    x = min(x, span)
    assert normalize(a * x, 0.0, a * span) == pytest.approx(normalize(x, 0.0, span), abs=1e-9)


# ---------------------------------------------------------------------------
# generalizability


def test_generalizability_consistency_claims():
    g = generalizability_index([5.7, 5.7, 5.7])
    assert g == {"mean": 5.7, "stddev": 0.0}
    g = generalizability_index([6.5, 6.5, 6.5])
    assert g == {"mean": 6.5, "stddev": 0.0}


def test_generalizability_two_roles():
    g = generalizability_index([4.0, 8.0])
    assert g["mean"] == 6.0
    assert g["stddev"] == 2.0
    with pytest.raises(ValueError):
        generalizability_index([5.0])


# ---------------------------------------------------------------------------
# aggregation


def _record(design, scenario, rep, value, status="completed"):
    scores = {}
    if status == "completed":
        scores["oracle"] = MetricScores(*(value,) * 7)
    return RunRecord(
        scenario_id=scenario,
        design=design,
        repetition=rep,
        status=status,
        wall_time_s=1.0,
        tokens_by_model={"llama3-8b": (10, 10)},
        cost_usd=Decimal("0.000001"),
        transcript_ref="t",
        scores=scores,
    )


def test_median_simple():
    recs = [_record("A_single", "painter", i, v) for i, v in enumerate([4, 5, 6])]
    stats = aggregate(recs)
    assert stats.cells[("A_single", "painter", "correctness")].median == 5.0


def test_single_record_degenerate_quantiles():
    stats = aggregate([_record("A_single", "painter", 0, 7)])
    cell = stats.cells[("A_single", "painter", "temporal")]
    assert cell.q1 == cell.median == cell.q3 == 7.0


def _brute_quantile(vals, q):
    vals = sorted(vals)
    pos = q * (len(vals) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(vals) - 1)
    return vals[lo] + (pos - lo) * (vals[hi] - vals[lo])


@given(st.lists(st.floats(min_value=0, max_value=10, allow_nan=False), min_size=1, max_size=20))
def test_quantiles_match_brute_force(values):
    cell = cell_stats(values)
    assert cell.q1 == pytest.approx(_brute_quantile(values, 0.25))
    assert cell.median == pytest.approx(_brute_quantile(values, 0.5))
    assert cell.q3 == pytest.approx(_brute_quantile(values, 0.75))
    assert cell.min == min(values) and cell.max == max(values)


def test_failed_runs_counted_in_availability_only():
    recs = [
        _record("A_single", "painter", 0, 6),
        _record("A_single", "painter", 1, 0, status="failed"),
    ]
    stats = aggregate(recs)
    assert stats.availability[("A_single", "painter")] == (1, 1)
    assert stats.cells[("A_single", "painter", "correctness")].n == 1


def test_empty_cell_listed_not_fatal():
    stats = aggregate([_record("A_single", "painter", 0, 0, status="failed")])
    assert stats.empty_cells == [("A_single", "painter")]


def test_export_report_row_counts(tmp_path):
    recs = [
        _record(d, s, r, 5 + r)
        for d in ("A_single", "B_two", "C_three", "D_four")
        for s in ("painter", "safety-inspector", "floor-tiling")
        for r in range(3)
    ]
    export_report(aggregate(recs), recs, tmp_path)
    stats_rows = (tmp_path / "stats.csv").read_text().strip().splitlines()
    assert len(stats_rows) == 1 + 36
    gen_rows = (tmp_path / "generalizability.csv").read_text().strip().splitlines()
    assert len(gen_rows) == 1 + 4
    tradeoff = (tmp_path / "tradeoff.csv").read_text().strip().splitlines()
    assert tradeoff[0] == "design,correctness,temporal,executability,time,cost"
    assert len(tradeoff) == 1 + 4
    assert len((tmp_path / "records.jsonl").read_text().strip().splitlines()) == len(recs)


def test_export_empty_records(tmp_path):
    export_report(aggregate([]), [], tmp_path)
    assert (tmp_path / "stats.csv").read_text().strip().splitlines() == [
        "design,scenario,metric,n,min,q1,median,q3,max,mean"
    ]


def test_tradeoff_cost_endpoints(tmp_path):
    recs = []
    for design, cost in (("A_single", "0.01"), ("B_two", "0.02"), ("C_three", "0.03")):
        rec = _record(design, "painter", 0, 5)
        rec.cost_usd = Decimal(cost)
        recs.append(rec)
    export_report(aggregate(recs), recs, tmp_path)
    rows = (tmp_path / "tradeoff.csv").read_text().strip().splitlines()[1:]
    by_design = {r.split(",")[0]: float(r.split(",")[-1]) for r in rows}
    assert by_design["A_single"] == 10.0  # cheapest
    assert by_design["C_three"] == 0.0  # most expensive


# ---------------------------------------------------------------------------
# judge protocol


JUDGE = ModelSpec(id="gpt-4o", modality="text", price_per_mtok=2.50)

GOOD_REPLY = "\n".join(f"{name}: {i}" for i, name in enumerate(SUB_FACTORS, start=3))


def _items(n=4):
    return [
        JudgeItem(
            key=f"C_three/painter/rep{i:03d}",
            plan_text=f'pick_up("paintbrush")  # variant {i}',
            role="Painter Tradesperson",
            pipeline_model_ids=("minicpm-v-2.6", "llama3-8b"),
        )
        for i in range(n)
    ]


def test_parse_judge_response():
    scores = parse_judge_response(GOOD_REPLY)
    assert scores.object_usage == 3.0
    assert scores.sdk_conformance == 9.0
    assert scores.source == "judge"


def test_parse_judge_rejects_partial():
    from sitecrew.errors import JudgeParseError

    with pytest.raises(JudgeParseError):
        parse_judge_response("object_usage: 5")
    with pytest.raises(JudgeParseError):
        parse_judge_response(GOOD_REPLY.replace(": 3", ": 15"))


def test_judge_prompt_anonymized():
    cfg = JudgeConfig(model=JUDGE, rubric=default_rubric())
    prompt = render_judge_prompt(cfg, _items(1)[0])
    for banned in (
        "A_single", "B_two", "C_three", "D_four",
        "single-agent", "four-agent",
        "minicpm", "llama", "gpt-4o",
        "rep000",
    ):
        assert banned not in prompt
    assert "Painter Tradesperson" in prompt
    assert 'pick_up("paintbrush")' in prompt


def test_submission_order_is_seeded_permutation():
    import random

    expected = list(range(8))
    random.Random(7).shuffle(expected)
    assert submission_order(8, 7) == expected
    assert submission_order(8, 7) == submission_order(8, 7)
    assert sorted(submission_order(8, 7)) == list(range(8))


def test_judge_family_conflict():
    cfg = JudgeConfig(model=ModelSpec(id="llama3-70b", modality="text"), rubric=default_rubric())
    with pytest.raises(JudgeFamilyConflict):
        judge_scores(_items(), cfg, StaticBackend(GOOD_REPLY))


def test_judge_batch_scoring():
    cfg = JudgeConfig(model=JUDGE, rubric=default_rubric(), shuffle_seed=7)
    results = judge_scores(_items(), cfg, StaticBackend(GOOD_REPLY))
    assert set(results) == {i.key for i in _items()}
    assert all(s == parse_judge_response(GOOD_REPLY) for s in results.values())


def test_judge_unparseable_marks_failed_after_retry():
    class Garbage(MockBackend):
        def __init__(self):
            super().__init__()
            self.calls = 0

        def _complete_once(self, model, req):
            self.calls += 1
            resp = super()._complete_once(model, req)
            return resp

    backend = Garbage()
    cfg = JudgeConfig(model=JUDGE, rubric=default_rubric())
    results = judge_scores(_items(1), cfg, backend)
    assert results[_items(1)[0].key] is None
    assert backend.calls == 2
