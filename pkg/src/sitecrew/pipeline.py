"""Agent/task topologies and pipeline execution.

Encodes the four pipeline designs (single agent through four agents) as
immutable task DAGs with context edges, renders prompts by role
interpolation, and runs a pipeline over a scenario to produce a raw plan
text plus the full call transcript.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .backends import (
    Backend,
    CompletionRequest,
    ModelSpec,
    TranscriptRecord,
    request_digest,
)
from .errors import InvalidModality, MissingContext, PipelineError, SchemaError

DESIGNS = ("A_single", "B_two", "C_three", "D_four")
DESIGN_TASK_COUNTS = {"A_single": 1, "B_two": 2, "C_three": 3, "D_four": 4}
DESIGN_LETTERS = {"A": "A_single", "B": "B_two", "C": "C_three", "D": "D_four"}

SOAR_BLOCKS = ("input_link", "working_memory", "output_link", "preference_system")


@dataclass(frozen=True)
class AgentDef:
    agent_role: str
    goal: str
    backstory: str
    model: ModelSpec
    soar_block: str

    def __post_init__(self):
        if self.soar_block not in SOAR_BLOCKS:
            raise ValueError(f"unknown soar_block {self.soar_block!r}")


@dataclass(frozen=True)
class TaskDef:
    task_id: str
    description: str
    expected_output: str
    agent: AgentDef
    context: tuple[str, ...] = ()


@dataclass(frozen=True)
class PipelineTopology:
    design: str
    tasks: tuple[TaskDef, ...]
    entry_image_task: str

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design {self.design!r}")
        seen: set[str] = set()
        for task in self.tasks:
            for ctx in task.context:
                if ctx not in seen:
                    raise ValueError(
                        f"task {task.task_id!r} references {ctx!r} which is not "
                        "an earlier task (context must form a DAG in execution order)"
                    )
            seen.add(task.task_id)
        if self.entry_image_task not in seen:
            raise ValueError(f"entry_image_task {self.entry_image_task!r} not in tasks")

    def task(self, task_id: str) -> TaskDef:
        for t in self.tasks:
            if t.task_id == task_id:
                return t
        raise KeyError(task_id)


@dataclass(frozen=True)
class RoleAssignment:
    role: str
    scenario: "object"  # ScenarioSpec; untyped to avoid a module cycle

    def __post_init__(self):
        if not self.role.strip():
            raise ValueError("role must be non-empty")


@dataclass
class PipelineRunResult:
    raw_plan_text: str
    per_task_outputs: dict[str, str]
    transcript: list[TranscriptRecord]
    wall_time_s: float
    total_tokens_by_model: dict[str, tuple[int, int]]


class PromptPack:
    """Versioned set of prompt templates: <design>/<task>.txt files plus a
    flat key-value manifest carrying agent identity, model slots, context
    edges, and expected outputs."""

    def __init__(self, root: Path):
        self.root = Path(root)
        manifest = self.root / "manifest.txt"
        if not manifest.is_file():
            raise SchemaError(f"prompt pack manifest missing: {manifest}")
        self.values: dict[str, str] = {}
        for lineno, line in enumerate(manifest.read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SchemaError(f"manifest.txt:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            self.values[key.strip()] = value.strip()
        self.version = self.values.get("pack_version", "unversioned")

    def _get(self, key: str) -> str:
        if key not in self.values:
            raise SchemaError(f"prompt pack manifest missing key {key!r}")
        return self.values[key]

    def task_ids(self, design: str) -> list[str]:
        raw = self._get(f"{design}.tasks")
        return [t.strip() for t in raw.split(",") if t.strip()]

    def description(self, design: str, task_id: str) -> str:
        path = self.root / design / f"{task_id}.txt"
        if not path.is_file():
            raise SchemaError(f"prompt pack template missing: {path}")
        return path.read_text(encoding="utf-8").strip()

    def task_field(self, design: str, task_id: str, name: str) -> str:
        return self._get(f"{design}.{task_id}.{name}")

    def context(self, design: str, task_id: str) -> tuple[str, ...]:
        raw = self.values.get(f"{design}.{task_id}.context", "")
        return tuple(c.strip() for c in raw.split(",") if c.strip())


def default_prompt_pack() -> PromptPack:
    root = resources.files("sitecrew").joinpath("data/prompts/v1")
    return PromptPack(Path(str(root)))


def build_topology(
    design: str, vlm: ModelSpec, llm: ModelSpec, pack: PromptPack | None = None
) -> PipelineTopology:
    """Assemble one of the four designs from a prompt pack.

    The vision model carries the image-receiving task; all downstream tasks
    run on the text model.
    """
    if design in DESIGN_LETTERS:
        design = DESIGN_LETTERS[design]
    if design not in DESIGNS:
        raise ValueError(f"unknown design {design!r}")
    if vlm.modality != "vision" or llm.modality != "text":
        raise InvalidModality(
            f"expected (vision, text) models, got ({vlm.modality}, {llm.modality})"
        )
    pack = pack or default_prompt_pack()
    tasks: list[TaskDef] = []
    for task_id in pack.task_ids(design):
        slot = pack.task_field(design, task_id, "model")
        if slot == "vlm":
            model = vlm
        elif slot == "llm":
            model = llm
        else:
            raise SchemaError(f"{design}.{task_id}.model must be 'vlm' or 'llm'")
        agent = AgentDef(
            agent_role=pack.task_field(design, task_id, "agent_role"),
            goal=pack.task_field(design, task_id, "goal"),
            backstory=pack.task_field(design, task_id, "backstory"),
            model=model,
            soar_block=pack.task_field(design, task_id, "soar_block"),
        )
        tasks.append(
            TaskDef(
                task_id=task_id,
                description=pack.description(design, task_id),
                expected_output=pack.task_field(design, task_id, "expected_output"),
                agent=agent,
                context=pack.context(design, task_id),
            )
        )
    if len(tasks) != DESIGN_TASK_COUNTS[design]:
        raise SchemaError(
            f"design {design} must have {DESIGN_TASK_COUNTS[design]} tasks, "
            f"pack defines {len(tasks)}"
        )
    vision_tasks = [t.task_id for t in tasks if t.agent.model.modality == "vision"]
    if len(vision_tasks) != 1:
        raise SchemaError(f"design {design} must have exactly one vision task")
    return PipelineTopology(design=design, tasks=tuple(tasks), entry_image_task=vision_tasks[0])


def _interpolate(template: str, role: str) -> str:
    out = template.replace("{role}", role)
    if "{role}" in out:
        raise SchemaError("residual {role} placeholder after interpolation")
    return out


def render_prompt(
    task: TaskDef,
    assignment: RoleAssignment,
    upstream: dict[str, str],
    *,
    temperature: float = 0.0,
    seed: int | None = None,
) -> CompletionRequest:
    """Render one task into a completion request.

    Upstream outputs are appended in context order under labeled delimiters;
    the expected_output string becomes the closing format instruction.
    """
    parts = [_interpolate(task.description, assignment.role)]
    for ctx_id in task.context:
        if ctx_id not in upstream:
            raise MissingContext(
                f"task {task.task_id!r} needs output of {ctx_id!r} which is absent"
            )
        label = ctx_id.upper()
        parts.append(f"--- BEGIN OUTPUT OF {label} ---\n{upstream[ctx_id]}\n--- END OUTPUT OF {label} ---")
    parts.append(f"Expected output: {_interpolate(task.expected_output, assignment.role)}")
    system = (
        f"You are {_interpolate(task.agent.agent_role, assignment.role)}. "
        f"{_interpolate(task.agent.goal, assignment.role)} "
        f"{_interpolate(task.agent.backstory, assignment.role)}"
    )
    return CompletionRequest(
        system_prompt=system,
        user_message="\n\n".join(parts),
        temperature=temperature,
        seed=seed,
    )


def execute_pipeline(
    topology: PipelineTopology,
    assignment: RoleAssignment,
    backends: dict[str, Backend],
    *,
    temperature: float = 0.0,
    seed: int | None = None,
    deterministic_timing: bool = False,
) -> PipelineRunResult:
    """Run every task in topology order, strictly sequentially.

    With deterministic_timing the wall clock is the sum of reported per-call
    latencies and transcript timestamps are call indices, which keeps mock
    and replay runs byte-comparable across invocations.
    """
    for task in topology.tasks:
        if task.agent.model.id not in backends:
            raise PipelineError(task.task_id, KeyError(f"no backend for model {task.agent.model.id!r}"))

    upstream: dict[str, str] = {}
    transcript: list[TranscriptRecord] = []
    tokens: dict[str, tuple[int, int]] = {}
    start = None if deterministic_timing else time.perf_counter()
    simulated = 0.0

    for index, task in enumerate(topology.tasks):
        req = render_prompt(task, assignment, upstream, temperature=temperature, seed=seed)
        if task.task_id == topology.entry_image_task:
            image = getattr(assignment.scenario, "image_path", "")
            if image:
                req = CompletionRequest(
                    system_prompt=req.system_prompt,
                    user_message=req.user_message,
                    images=(str(image),),
                    temperature=req.temperature,
                    seed=req.seed,
                )
        backend = backends[task.agent.model.id]
        try:
            resp = backend.complete(task.agent.model, req)
        except Exception as exc:
            raise PipelineError(task.task_id, exc) from exc
        simulated += resp.latency_s
        ts = f"call-{index}" if deterministic_timing else time.strftime("%Y-%m-%dT%H:%M:%S%z")
        transcript.append(
            TranscriptRecord(
                digest=request_digest(req),
                response=resp,
                backend_id=backend.id,
                timestamp=ts,
                model_id=task.agent.model.id,
                task_id=task.task_id,
                system_prompt=req.system_prompt,
                user_message=req.user_message,
            )
        )
        tin, tout = tokens.get(task.agent.model.id, (0, 0))
        tokens[task.agent.model.id] = (tin + resp.tokens_in, tout + resp.tokens_out)
        upstream[task.task_id] = resp.text

    wall = simulated if deterministic_timing else time.perf_counter() - start
    return PipelineRunResult(
        raw_plan_text=upstream[topology.tasks[-1].task_id],
        per_task_outputs=upstream,
        transcript=transcript,
        wall_time_s=wall,
        total_tokens_by_model=tokens,
    )
