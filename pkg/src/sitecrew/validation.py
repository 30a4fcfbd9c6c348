"""Static validation of parsed plans against the SDK registry and scenario.

Each rule is a pure function producing one (or two, for the function rule)
violation classes; the report is the union of whichever rules are enabled.
"""

from __future__ import annotations

from dataclasses import dataclass

from .planparse import Plan
from .scenarios import ScenarioSpec
from .sdk import SdkSpec

UNKNOWN_FUNCTION = "unknown_function"
ARITY_MISMATCH = "arity_mismatch"
UNGROUNDED_OBJECT = "ungrounded_object"
SPATIAL_LITERAL = "spatial_literal"
PRECEDENCE_VIOLATION = "precedence_violation"
FORBIDDEN_MENTION = "forbidden_mention"
MISSING_REQUIRED_OBJECT = "missing_required_object"
DEFINITION_WITHOUT_EXECUTION = "definition_without_execution"

VIOLATION_CLASSES = (
    UNKNOWN_FUNCTION,
    ARITY_MISMATCH,
    UNGROUNDED_OBJECT,
    SPATIAL_LITERAL,
    PRECEDENCE_VIOLATION,
    FORBIDDEN_MENTION,
    MISSING_REQUIRED_OBJECT,
    DEFINITION_WITHOUT_EXECUTION,
)


@dataclass(frozen=True)
class Violation:
    cls: str
    step_line: int | None  # None = global finding
    detail: str

    def to_json(self) -> dict:
        return {"class": self.cls, "step_line": self.step_line, "detail": self.detail}


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]
    generic_mentions: tuple[tuple[int, str], ...] = ()  # (line, canonical) specificity tags

    @property
    def counts(self) -> dict[str, int]:
        out = {cls: 0 for cls in VIOLATION_CLASSES}
        for v in self.violations:
            out[v.cls] += 1
        return out

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "violations": [v.to_json() for v in self.violations],
            "counts": {k: v for k, v in self.counts.items() if v},
            "generic_mentions": [[ln, name] for ln, name in self.generic_mentions],
        }


def validate_functions(plan: Plan, sdk: SdkSpec) -> list[Violation]:
    """Unknown function names and arity mismatches against the registry."""
    out: list[Violation] = []
    for step in plan.steps:
        fn = sdk.get(step.function)
        if fn is None:
            out.append(
                Violation(UNKNOWN_FUNCTION, step.source_line, f"{step.function} is not in the SDK")
            )
        elif len(step.args) != fn.arity:
            out.append(
                Violation(
                    ARITY_MISMATCH,
                    step.source_line,
                    f"{step.function} takes {fn.arity} argument(s), got {len(step.args)}",
                )
            )
    return out


def _object_ref_args(plan: Plan, sdk: SdkSpec):
    """(step, arg) pairs bound to object_ref parameters of known functions."""
    for step in plan.steps:
        fn = sdk.get(step.function)
        if fn is None:
            continue
        for param, arg in zip(fn.params, step.args):
            if param.ptype == "object_ref":
                yield step, arg


def validate_grounding(plan: Plan, scenario: ScenarioSpec, sdk: SdkSpec) -> ValidationReport:
    """Every object_ref argument must ground in the scene inventory.

    Generic matches (category aliases, partial names) are accepted but
    tagged for the specificity sub-score.
    """
    violations: list[Violation] = []
    generic: list[tuple[int, str]] = []
    for step, arg in _object_ref_args(plan, sdk):
        m = scenario.match_inventory(arg.raw_text)
        if m is None:
            violations.append(
                Violation(
                    UNGROUNDED_OBJECT,
                    step.source_line,
                    f"{arg.raw_text!r} does not match any inventory item",
                )
            )
        elif m.generic:
            generic.append((step.source_line, m.item))
    return ValidationReport(violations=tuple(violations), generic_mentions=tuple(generic))


def detect_spatial_literals(plan: Plan, scenario: ScenarioSpec, sdk: SdkSpec) -> list[Violation]:
    """Numeric position arguments and coordinate-looking numeric tuples not
    present in the scenario's known coordinates."""
    out: list[Violation] = []
    for step in plan.steps:
        numerics = [float(a.raw_text) for a in step.args if a.inferred_ptype == "number"]
        if len(numerics) >= 2:
            if tuple(numerics) not in scenario.known_coordinates:
                out.append(
                    Violation(
                        SPATIAL_LITERAL,
                        step.source_line,
                        f"invented coordinates {tuple(numerics)} in {step.function}",
                    )
                )
            continue
        fn = sdk.get(step.function)
        if fn is None:
            continue
        for param, arg in zip(fn.params, step.args):
            if param.ptype == "position" and arg.inferred_ptype == "number":
                value = (float(arg.raw_text),)
                if value not in scenario.known_coordinates:
                    out.append(
                        Violation(
                            SPATIAL_LITERAL,
                            step.source_line,
                            f"numeric position {arg.raw_text} in {step.function}",
                        )
                    )
    return out


def _first_occurrence(plan: Plan, token: str, scenario: ScenarioSpec) -> int | None:
    """First step line where the token (a function name or object name)
    appears; object names are matched through grounding."""
    for step in plan.steps:
        if step.function == token:
            return step.source_line
        for arg in step.args:
            if arg.inferred_ptype == "number":
                continue
            if scenario.matches_name(arg.raw_text, token):
                return step.source_line
    return None


def check_precedence(plan: Plan, scenario: ScenarioSpec) -> list[Violation]:
    """First-occurrence ordering against the scenario's precedence DAG;
    constraints on absent elements are vacuously satisfied."""
    out: list[Violation] = []
    for a, b in scenario.precedence:
        first_a = _first_occurrence(plan, a, scenario)
        first_b = _first_occurrence(plan, b, scenario)
        if first_a is not None and first_b is not None and first_b < first_a:
            out.append(
                Violation(
                    PRECEDENCE_VIOLATION,
                    first_b,
                    f"{b!r} (line {first_b}) before {a!r} (line {first_a})",
                )
            )
    return out


def check_mentions(plan: Plan, scenario: ScenarioSpec) -> list[Violation]:
    """Forbidden objects must never be referenced; required objects must be
    referenced somewhere."""
    out: list[Violation] = []
    for step in plan.steps:
        for fo in scenario.forbidden_objects:
            if any(
                arg.inferred_ptype != "number" and scenario.matches_name(arg.raw_text, fo.name)
                for arg in step.args
            ):
                out.append(
                    Violation(FORBIDDEN_MENTION, step.source_line, f"references forbidden {fo.name!r}")
                )
    for name in scenario.required_objects:
        if _first_occurrence(plan, name, scenario) is None:
            out.append(
                Violation(MISSING_REQUIRED_OBJECT, None, f"required {name!r} never referenced")
            )
    return out


def check_definitions(plan: Plan) -> list[Violation]:
    """Functions that are defined but never executed."""
    out: list[Violation] = []
    called = plan.called_functions
    for name, line in plan.definitions:
        if name not in called:
            out.append(
                Violation(DEFINITION_WITHOUT_EXECUTION, line, f"{name} is defined but never executed")
            )
    return out


ALL_RULES = ("functions", "grounding", "spatial", "precedence", "mentions", "definitions")


def validate_plan(
    plan: Plan,
    sdk: SdkSpec,
    scenario: ScenarioSpec,
    rules: tuple[str, ...] = ALL_RULES,
) -> ValidationReport:
    violations: list[Violation] = []
    generic: tuple[tuple[int, str], ...] = ()
    if "functions" in rules:
        violations.extend(validate_functions(plan, sdk))
    if "grounding" in rules:
        rep = validate_grounding(plan, scenario, sdk)
        violations.extend(rep.violations)
        generic = rep.generic_mentions
    if "spatial" in rules:
        violations.extend(detect_spatial_literals(plan, scenario, sdk))
    if "precedence" in rules:
        violations.extend(check_precedence(plan, scenario))
    if "mentions" in rules:
        violations.extend(check_mentions(plan, scenario))
    if "definitions" in rules:
        violations.extend(check_definitions(plan))
    return ValidationReport(violations=tuple(violations), generic_mentions=generic)
