"""Multi-agent planning pipelines for construction robots: build them, run
them against scene scenarios, statically validate the generated plans, and
score the results."""

from __future__ import annotations

from .backends import (
    Backend,
    CompletionRequest,
    CompletionResponse,
    DEFAULT_LLM,
    DEFAULT_VLM,
    HttpBackend,
    MockBackend,
    MockScript,
    ModelSpec,
    RecordingBackend,
    ReplayBackend,
    ReplayStore,
    StaticBackend,
    TranscriptRecord,
    count_tokens,
    model_family,
    request_digest,
)
from .errors import (
    CyclicPrecedence,
    EmptyResponse,
    InvalidModality,
    JudgeFamilyConflict,
    JudgeParseError,
    MalformedDag,
    MissingContext,
    ModalityError,
    OutOfRange,
    PipelineError,
    SchemaError,
    SiteCrewError,
    UnpricedModel,
    WireError,
)
from .evaluation import (
    AggregateStats,
    JudgeConfig,
    JudgeItem,
    METRICS,
    MetricScores,
    RunRecord,
    SUB_FACTORS,
    aggregate,
    compute_cost,
    default_rubric,
    export_report,
    generalizability_index,
    judge_scores,
    load_price_table,
    normalize,
    oracle_scores,
)
from .mocks import default_mock_backend
from .pipeline import (
    DESIGNS,
    PipelineRunResult,
    PipelineTopology,
    PromptPack,
    RoleAssignment,
    build_topology,
    default_prompt_pack,
    execute_pipeline,
    render_prompt,
)
from .planparse import ActionStep, Plan, parse_plan
from .runner import ExperimentConfig, run_matrix
from .scenarios import (
    BUILTIN_IDS,
    InventoryItem,
    ScenarioSpec,
    builtin_scenarios,
    get_scenario,
    load_scenario,
)
from .sdk import SdkFunction, SdkSpec, default_sdk, load_sdk, parse_registry
from .validation import ValidationReport, Violation, validate_plan

__version__ = "0.1.0"
