"""Rule engine behavior on the builtin scenarios and the default registry."""

from __future__ import annotations

import pytest

from sitecrew.planparse import parse_plan
from sitecrew.scenarios import get_scenario
from sitecrew.sdk import default_sdk
from sitecrew.validation import (
    ALL_RULES,
    ARITY_MISMATCH,
    DEFINITION_WITHOUT_EXECUTION,
    FORBIDDEN_MENTION,
    MISSING_REQUIRED_OBJECT,
    PRECEDENCE_VIOLATION,
    SPATIAL_LITERAL,
    UNGROUNDED_OBJECT,
    UNKNOWN_FUNCTION,
    check_definitions,
    check_mentions,
    check_precedence,
    detect_spatial_literals,
    validate_functions,
    validate_grounding,
    validate_plan,
)


@pytest.fixture(scope="module")
def sdk():
    return default_sdk()


@pytest.fixture(scope="module")
def painter():
    return get_scenario("painter")


@pytest.fixture(scope="module")
def safety():
    return get_scenario("safety-inspector")


@pytest.fixture(scope="module")
def tiling():
    return get_scenario("floor-tiling")


def test_unknown_function(sdk):
    plan = parse_plan('fly_to("tiles")')
    out = validate_functions(plan, sdk)
    assert [v.cls for v in out] == [UNKNOWN_FUNCTION]


def test_arity_mismatch(sdk):
    plan = parse_plan("pick_up()")
    out = validate_functions(plan, sdk)
    assert [v.cls for v in out] == [ARITY_MISMATCH]


def test_known_functions_pass(sdk):
    plan = parse_plan('pick_up("tiles")\ndetect_objects()\nset_light("red")')
    assert validate_functions(plan, sdk) == []


def test_grounding_exact_and_generic(sdk, painter):
    plan = parse_plan('pick_up("Behr Painting Can")')
    rep = validate_grounding(plan, painter, sdk)
    assert rep.violations == ()
    assert rep.generic_mentions == ()

    plan = parse_plan('pick_up("paint can")')
    rep = validate_grounding(plan, painter, sdk)
    assert rep.violations == ()
    assert rep.generic_mentions == ((1, "Behr Painting Can"),)


def test_grounding_ungrounded(sdk, painter):
    plan = parse_plan('pick_up("magic wand")')
    rep = validate_grounding(plan, painter, sdk)
    assert [v.cls for v in rep.violations] == [UNGROUNDED_OBJECT]


def test_grounding_only_object_ref_params(sdk, painter):
    # speak takes text; its argument is not a grounding target
    plan = parse_plan('speak("magic wand incoming")')
    rep = validate_grounding(plan, painter, sdk)
    assert rep.violations == ()


def test_spatial_literal_tuple(sdk, tiling):
    empty_coords = tiling  # builtin declares only the (0, 0) home
    plan = parse_plan("move_to(1.5, 2.0)")
    out = detect_spatial_literals(plan, empty_coords, sdk)
    assert [v.cls for v in out] == [SPATIAL_LITERAL]


def test_spatial_symbolic_target_ok(sdk, painter):
    plan = parse_plan('move_to("wooden panel")')
    assert detect_spatial_literals(plan, painter, sdk) == []


def test_spatial_known_home_exempt(sdk, painter):
    plan = parse_plan("move_to(0, 0)")
    assert detect_spatial_literals(plan, painter, sdk) == []


def test_spatial_single_position_numeric(sdk, painter):
    plan = parse_plan("move_to(3)")
    out = detect_spatial_literals(plan, painter, sdk)
    assert [v.cls for v in out] == [SPATIAL_LITERAL]


def test_precedence_tiling_violation(tiling):
    plan = parse_plan('place("tiles", "floor area")\napply("tile adhesive", "floor area")')
    out = check_precedence(plan, tiling)
    assert PRECEDENCE_VIOLATION in [v.cls for v in out]


def test_precedence_vacuous(tiling):
    # neither grout nor sponge appears; the grout < sponge constraint is vacuous
    plan = parse_plan('pick_up("rubber mallet")')
    assert check_precedence(plan, tiling) == []


def test_precedence_safety_bucket_first(safety):
    plan = parse_plan('pick_up("bucket")\npick_up("yellow hardhat")')
    out = check_precedence(plan, safety)
    assert [v.cls for v in out] == [PRECEDENCE_VIOLATION]
    assert out[0].step_line == 1


def test_precedence_correct_order(safety):
    plan = parse_plan('pick_up("yellow hardhat")\npick_up("safety gloves")\npick_up("bucket")')
    assert check_precedence(plan, safety) == []


def test_forbidden_mention(safety):
    plan = parse_plan('pick_up("woodboard")')
    out = check_mentions(plan, safety)
    classes = [v.cls for v in out]
    assert FORBIDDEN_MENTION in classes
    assert classes.count(MISSING_REQUIRED_OBJECT) == 2  # hardhat and gloves absent


def test_forbidden_alias_mention(safety):
    plan = parse_plan(
        'pick_up("yellow hardhat")\npick_up("safety gloves")\nnavigate_to("wood board")'
    )
    out = check_mentions(plan, safety)
    assert [v.cls for v in out] == [FORBIDDEN_MENTION]


def test_missing_required(safety):
    plan = parse_plan('pick_up("yellow hardhat")')
    out = check_mentions(plan, safety)
    assert [v.cls for v in out] == [MISSING_REQUIRED_OBJECT]
    assert "safety gloves" in out[0].detail
    assert out[0].step_line is None


def test_all_required_no_forbidden(safety):
    plan = parse_plan('pick_up("yellow hardhat")\npick_up("safety gloves")')
    assert check_mentions(plan, safety) == []


def test_definition_without_execution():
    plan = parse_plan('def helper():\n    pick_up("tiles")\ndetect_objects()')
    out = check_definitions(plan)
    assert [v.cls for v in out] == [DEFINITION_WITHOUT_EXECUTION]
    assert out[0].step_line == 1


def test_executed_definition_passes():
    plan = parse_plan('def helper():\n    pick_up("tiles")\nhelper()')
    assert check_definitions(plan) == []


def test_vacuity_empty_plan(sdk, safety):
    rep = validate_plan(parse_plan(""), sdk, safety)
    assert [v.cls for v in rep.violations] == [MISSING_REQUIRED_OBJECT, MISSING_REQUIRED_OBJECT]


def test_rule_independence(sdk, safety):
    plan = parse_plan('fly_to("woodboard")\npick_up("bucket")\npick_up("yellow hardhat")')
    full = validate_plan(plan, sdk, safety)
    for rule, classes in (
        ("functions", {UNKNOWN_FUNCTION, ARITY_MISMATCH}),
        ("grounding", {UNGROUNDED_OBJECT}),
        ("spatial", {SPATIAL_LITERAL}),
        ("precedence", {PRECEDENCE_VIOLATION}),
        ("mentions", {FORBIDDEN_MENTION, MISSING_REQUIRED_OBJECT}),
        ("definitions", {DEFINITION_WITHOUT_EXECUTION}),
    ):
        without = validate_plan(plan, sdk, safety, rules=tuple(r for r in ALL_RULES if r != rule))
        removed = {v.cls for v in full.violations} - {v.cls for v in without.violations}
        assert removed <= classes
        assert all(v in full.violations for v in without.violations)


def test_report_json_shape(sdk, safety):
    rep = validate_plan(parse_plan('fly_to("woodboard")'), sdk, safety)
    payload = rep.to_json()
    for entry in payload["violations"]:
        assert set(entry) == {"class", "step_line", "detail"}
    assert not rep.passed
    clean = validate_plan(
        parse_plan('pick_up("yellow hardhat")\npick_up("safety gloves")'), sdk, safety
    )
    assert clean.passed
