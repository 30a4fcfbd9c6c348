"""Experiment matrix execution: designs x scenarios x repetitions.

Runs are resumable (completed cells are skipped when the config digest
matches), records are rewritten sorted so output files are byte-comparable
across invocations, and all timestamps live in a sidecar meta file.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .backends import (
    Backend,
    HttpBackend,
    ModelSpec,
    RecordingBackend,
    ReplayBackend,
    ReplayStore,
    DEFAULT_LLM,
    DEFAULT_VLM,
)
from .errors import PipelineError, SchemaError
from .evaluation import RunRecord, compute_cost, load_price_table
from .mocks import default_mock_backend
from .pipeline import (
    DESIGNS,
    DESIGN_LETTERS,
    PromptPack,
    RoleAssignment,
    build_topology,
    default_prompt_pack,
    execute_pipeline,
)
from .scenarios import BUILTIN_IDS, ScenarioSpec, get_scenario
from .sdk import default_sdk, load_sdk


@dataclass
class ExperimentConfig:
    designs: tuple[str, ...] = DESIGNS
    scenarios: tuple[str, ...] = BUILTIN_IDS
    repetitions: int = 20
    vlm_id: str = DEFAULT_VLM.id
    llm_id: str = DEFAULT_LLM.id
    backend: dict = field(default_factory=lambda: {"kind": "mock"})
    judge: dict | None = None
    prices_path: str | None = None
    prompt_pack_path: str | None = None
    sdk_path: str | None = None
    parallelism: int = 1
    out_dir: str = "runs/latest"
    seed: int = 0
    temperature: float = 0.0
    strict: bool = False

    def __post_init__(self):
        if self.repetitions < 1:
            raise SchemaError("repetitions: must be >= 1")
        if self.parallelism < 1:
            raise SchemaError("parallelism: must be >= 1")
        designs = []
        for d in self.designs:
            full = DESIGN_LETTERS.get(d, d)
            if full not in DESIGNS:
                raise SchemaError(f"designs: unknown design {d!r}")
            designs.append(full)
        self.designs = tuple(designs)
        for key in ("prices_path", "prompt_pack_path", "sdk_path"):
            value = getattr(self, key)
            if value is not None and not Path(value).exists():
                raise SchemaError(f"{key}: path {value!r} does not exist")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "ExperimentConfig":
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(data, dict):
            raise SchemaError(f"{path}: config must be a mapping")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise SchemaError(f"{path}: unknown config keys {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        for key in ("designs", "scenarios"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def digest(self) -> str:
        """Digest over everything that affects run results (not layout)."""
        payload = json.dumps(
            {
                "designs": list(self.designs),
                "scenarios": list(self.scenarios),
                "repetitions": self.repetitions,
                "vlm": self.vlm_id,
                "llm": self.llm_id,
                "backend": self.backend,
                "seed": self.seed,
                "temperature": self.temperature,
                "prompt_pack": self.prompt_pack_path or "builtin:v1",
                "sdk": self.sdk_path or "builtin:v1",
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def to_json(self) -> dict:
        return {
            "designs": list(self.designs),
            "scenarios": list(self.scenarios),
            "repetitions": self.repetitions,
            "vlm_id": self.vlm_id,
            "llm_id": self.llm_id,
            "backend": self.backend,
            "judge": self.judge,
            "prices_path": self.prices_path,
            "prompt_pack_path": self.prompt_pack_path,
            "sdk_path": self.sdk_path,
            "parallelism": self.parallelism,
            "out_dir": self.out_dir,
            "seed": self.seed,
            "temperature": self.temperature,
            "strict": self.strict,
        }


def build_backend(spec: dict, out_dir: Path | None = None) -> tuple[Backend, bool]:
    """Backend from a config section; returns (backend, deterministic_timing)."""
    kind = spec.get("kind", "mock")
    if kind == "mock":
        backend: Backend = default_mock_backend()
        deterministic = True
    elif kind == "replay":
        store = ReplayStore(spec["store"])
        backend = ReplayBackend(store)
        deterministic = True
    elif kind == "http":
        backend = HttpBackend(
            base_url=spec["base_url"],
            api_key_env=spec.get("api_key_env", "SITECREW_API_KEY"),
            timeout_s=spec.get("timeout_s", 120.0),
        )
        deterministic = False
    else:
        raise SchemaError(f"backend.kind: unknown kind {kind!r}")
    if spec.get("record") and out_dir is not None:
        backend = RecordingBackend(backend, ReplayStore(out_dir / "replay.jsonl"))
    return backend, deterministic


def _models(config: ExperimentConfig) -> tuple[ModelSpec, ModelSpec]:
    vlm = DEFAULT_VLM if config.vlm_id == DEFAULT_VLM.id else ModelSpec(id=config.vlm_id, modality="vision")
    llm = DEFAULT_LLM if config.llm_id == DEFAULT_LLM.id else ModelSpec(id=config.llm_id, modality="text")
    return vlm, llm


def load_records(run_dir: str | Path) -> list[RunRecord]:
    path = Path(run_dir) / "records.jsonl"
    if not path.exists():
        return []
    return [
        RunRecord.from_json(json.loads(line))
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]


def write_records(run_dir: str | Path, records: list[RunRecord]) -> Path:
    path = Path(run_dir) / "records.jsonl"
    with path.open("w", encoding="utf-8") as fh:
        for rec in sorted(records, key=lambda r: r.key):
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")
    return path


def load_meta(run_dir: str | Path) -> dict:
    path = Path(run_dir) / "meta.json"
    if not path.exists():
        return {}
    return json.loads(path.read_text(encoding="utf-8"))


def run_matrix(config: ExperimentConfig) -> Path:
    """Execute the full designs x scenarios x repetitions matrix.

    Already-completed (design, scenario, repetition) cells from a previous
    invocation with the same config digest are skipped. Failed runs are
    recorded with their failure class, never dropped.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "transcripts").mkdir(exist_ok=True)

    digest = config.digest()
    meta = load_meta(out)
    existing: dict[str, RunRecord] = {}
    if meta.get("config_digest") == digest:
        existing = {rec.key: rec for rec in load_records(out)}

    backend, deterministic = build_backend(config.backend, out)
    vlm, llm = _models(config)
    backends = {vlm.id: backend, llm.id: backend}
    pack = PromptPack(Path(config.prompt_pack_path)) if config.prompt_pack_path else default_prompt_pack()
    prices = load_price_table(config.prices_path)
    scenarios = {ref: get_scenario(ref) for ref in config.scenarios}
    topologies = {design: build_topology(design, vlm, llm, pack) for design in config.designs}

    jobs = [
        (design, ref, rep)
        for design in config.designs
        for ref in config.scenarios
        for rep in range(config.repetitions)
    ]

    def run_one(job: tuple[str, str, int]) -> RunRecord | None:
        design, ref, rep = job
        scenario = scenarios[ref]
        key = f"{design}/{scenario.id}/rep{rep:03d}"
        if key in existing:
            return None
        seed = config.seed + rep
        transcript_ref = f"transcripts/{design}-{scenario.id}-rep{rep:03d}.jsonl"
        try:
            result = execute_pipeline(
                topologies[design],
                RoleAssignment(role=scenario.role, scenario=scenario),
                backends,
                temperature=config.temperature,
                seed=seed,
                deterministic_timing=deterministic,
            )
        except PipelineError as exc:
            if config.strict:
                raise
            return RunRecord(
                scenario_id=scenario.id,
                design=design,
                repetition=rep,
                status="failed",
                wall_time_s=0.0,
                tokens_by_model={},
                cost_usd=compute_cost({}, prices),
                transcript_ref="",
                seed=seed,
                temperature=config.temperature,
                failure_class=type(exc.cause).__name__,
            )
        with (out / transcript_ref).open("w", encoding="utf-8") as fh:
            for rec in result.transcript:
                fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")
        return RunRecord(
            scenario_id=scenario.id,
            design=design,
            repetition=rep,
            status="completed",
            wall_time_s=result.wall_time_s,
            tokens_by_model=result.total_tokens_by_model,
            cost_usd=compute_cost(result.total_tokens_by_model, prices),
            transcript_ref=transcript_ref,
            seed=seed,
            temperature=config.temperature,
        )

    new_records: list[RunRecord] = []
    if config.parallelism > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            for rec in pool.map(run_one, jobs):
                if rec is not None:
                    new_records.append(rec)
    else:
        for job in jobs:
            rec = run_one(job)
            if rec is not None:
                new_records.append(rec)

    all_records = list(existing.values()) + new_records
    write_records(out, all_records)
    (out / "meta.json").write_text(
        json.dumps(
            {
                "config": config.to_json(),
                "config_digest": digest,
                "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
                "new_runs": len(new_records),
                "skipped_runs": len(existing),
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return out


def scenario_for_record(run_dir: str | Path, record: RunRecord) -> ScenarioSpec:
    meta = load_meta(run_dir)
    refs = meta.get("config", {}).get("scenarios", list(BUILTIN_IDS))
    for ref in refs:
        sc = get_scenario(ref)
        if sc.id == record.scenario_id:
            return sc
    raise SchemaError(f"scenario {record.scenario_id!r} not resolvable from run meta")


def sdk_for_run(run_dir: str | Path):
    meta = load_meta(run_dir)
    path = meta.get("config", {}).get("sdk_path")
    return load_sdk(path) if path else default_sdk()


def plan_text_for_record(run_dir: str | Path, record: RunRecord) -> str:
    """The final task output of a recorded run, read from its transcript."""
    from .backends import TranscriptRecord

    path = Path(run_dir) / record.transcript_ref
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not lines:
        return ""
    return TranscriptRecord.from_json(json.loads(lines[-1])).response.text
