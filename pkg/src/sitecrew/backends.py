"""Uniform completion interface over model engines.

Three backends share one contract: a live HTTP chat-completions client, a
scripted mock for tests and dry runs, and a record/replay pair that makes
whole pipeline runs reproducible byte for byte.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import EmptyResponse, ModalityError, WireError

TEXT = "text"
VISION = "vision"


@dataclass(frozen=True)
class ModelSpec:
    """A model engine as seen by the pipeline: identity, modality, price."""

    id: str
    modality: str
    price_per_mtok: float = 0.0
    endpoint: str | None = None
    max_output_tokens: int = 2048

    def __post_init__(self):
        if self.modality not in (TEXT, VISION):
            raise ValueError(f"unknown modality {self.modality!r}")
        if self.price_per_mtok < 0:
            raise ValueError("price_per_mtok must be >= 0")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")

    @property
    def family(self) -> str:
        return model_family(self.id)


def model_family(model_id: str) -> str:
    """Leading alphabetic run of the id, lowercased ('llama3-8b' -> 'llama')."""
    out = []
    for ch in model_id:
        if ch.isalpha():
            out.append(ch.lower())
        else:
            break
    return "".join(out)


DEFAULT_VLM = ModelSpec(id="minicpm-v-2.6", modality=VISION, price_per_mtok=0.07)
DEFAULT_LLM = ModelSpec(id="llama3-8b", modality=TEXT, price_per_mtok=0.05)


@dataclass(frozen=True)
class CompletionRequest:
    system_prompt: str
    user_message: str
    images: tuple[str, ...] = ()
    temperature: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if not self.user_message:
            raise ValueError("user_message must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    tokens_in: int
    tokens_out: int
    latency_s: float
    tokens_estimated: bool = False


@dataclass(frozen=True)
class TranscriptRecord:
    digest: str
    response: CompletionResponse
    backend_id: str
    timestamp: str
    model_id: str = ""
    task_id: str = ""
    system_prompt: str = ""
    user_message: str = ""

    def to_json(self) -> dict:
        return {
            "digest": self.digest,
            "backend_id": self.backend_id,
            "timestamp": self.timestamp,
            "model_id": self.model_id,
            "task_id": self.task_id,
            "system_prompt": self.system_prompt,
            "user_message": self.user_message,
            "response": {
                "text": self.response.text,
                "tokens_in": self.response.tokens_in,
                "tokens_out": self.response.tokens_out,
                "latency_s": self.response.latency_s,
                "tokens_estimated": self.response.tokens_estimated,
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TranscriptRecord":
        r = obj["response"]
        return cls(
            digest=obj["digest"],
            backend_id=obj["backend_id"],
            timestamp=obj["timestamp"],
            model_id=obj.get("model_id", ""),
            task_id=obj.get("task_id", ""),
            system_prompt=obj.get("system_prompt", ""),
            user_message=obj.get("user_message", ""),
            response=CompletionResponse(
                text=r["text"],
                tokens_in=r["tokens_in"],
                tokens_out=r["tokens_out"],
                latency_s=r["latency_s"],
                tokens_estimated=r.get("tokens_estimated", False),
            ),
        )


def image_digest(ref: str) -> str:
    """Digest of the image bytes when the file exists, else of the reference
    string itself (builtin scenarios ship placeholder paths)."""
    p = Path(ref)
    if p.is_file():
        return hashlib.sha256(p.read_bytes()).hexdigest()
    return hashlib.sha256(ref.encode("utf-8")).hexdigest()


def request_digest(req: CompletionRequest) -> str:
    payload = json.dumps(
        [req.system_prompt, req.user_message, [image_digest(i) for i in req.images]],
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def count_tokens(text: str, model: ModelSpec | None = None) -> int:
    """Fallback token estimate when the wire response carries no usage."""
    return math.ceil(len(text) / 4)


class Backend:
    """Completion backend base. Subclasses implement _complete_once.

    Handles the modality gate (before any wire traffic) and the single-retry
    policy on empty output. Safe for concurrent calls.
    """

    id = "backend"

    def complete(self, model: ModelSpec, req: CompletionRequest) -> CompletionResponse:
        if req.images and model.modality != VISION:
            raise ModalityError(
                f"model {model.id!r} is text-only but request carries "
                f"{len(req.images)} image(s)"
            )
        resp = self._complete_once(model, req)
        if not resp.text.strip():
            resp = self._complete_once(model, req)
            if not resp.text.strip():
                raise EmptyResponse(f"model {model.id!r} returned no text after one retry")
        return resp

    def _complete_once(self, model: ModelSpec, req: CompletionRequest) -> CompletionResponse:
        raise NotImplementedError


@dataclass(frozen=True)
class MockScript:
    """One scripted exchange, matched by substrings of the rendered prompts."""

    stage_marker: str  # matched against the system prompt (agent identity)
    role_marker: str  # matched against the user message (assigned role)
    text: str
    tokens_in: int
    tokens_out: int
    latency_s: float = 0.5


class MockBackend(Backend):
    """Deterministic scripted backend.

    Scripts are keyed on (agent stage, assigned role) substrings of the
    rendered prompts; unmatched requests get a synthesized reply derived from
    the request digest so every call stays deterministic.
    """

    def __init__(self, backend_id: str = "mock"):
        self.id = backend_id
        self._scripts: list[MockScript] = []

    def add_script(self, script: MockScript) -> None:
        self._scripts.append(script)

    def _complete_once(self, model: ModelSpec, req: CompletionRequest) -> CompletionResponse:
        for s in self._scripts:
            if s.stage_marker in req.system_prompt and s.role_marker in req.user_message:
                return CompletionResponse(
                    text=s.text,
                    tokens_in=s.tokens_in,
                    tokens_out=s.tokens_out,
                    latency_s=s.latency_s,
                )
        digest = request_digest(req)
        text = f"acknowledged ({digest[:12]})"
        return CompletionResponse(
            text=text,
            tokens_in=count_tokens(req.system_prompt + req.user_message),
            tokens_out=count_tokens(text),
            latency_s=0.1,
            tokens_estimated=True,
        )


class StaticBackend(Backend):
    """Returns one fixed text for every request. Handy for judge mocks."""

    def __init__(self, text: str, backend_id: str = "static"):
        self.id = backend_id
        self._text = text

    def _complete_once(self, model: ModelSpec, req: CompletionRequest) -> CompletionResponse:
        return CompletionResponse(
            text=self._text,
            tokens_in=count_tokens(req.user_message),
            tokens_out=count_tokens(self._text),
            latency_s=0.1,
            tokens_estimated=True,
        )


class ReplayStore:
    """Append-only JSONL store of TranscriptRecords, keyed by request digest.

    Internally synchronized; shared between the recording and replay backends.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._by_digest: dict[str, TranscriptRecord] = {}
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    rec = TranscriptRecord.from_json(json.loads(line))
                    self._by_digest[rec.digest] = rec

    def append(self, record: TranscriptRecord) -> None:
        with self._lock:
            self._by_digest[record.digest] = record
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")

    def lookup(self, digest: str) -> TranscriptRecord | None:
        with self._lock:
            return self._by_digest.get(digest)

    def __len__(self) -> int:
        with self._lock:
            return len(self._by_digest)


class RecordingBackend(Backend):
    """Wraps another backend and appends every exchange to a ReplayStore."""

    def __init__(self, inner: Backend, store: ReplayStore):
        self.id = f"recording({inner.id})"
        self._inner = inner
        self._store = store

    def _complete_once(self, model: ModelSpec, req: CompletionRequest) -> CompletionResponse:
        resp = self._inner._complete_once(model, req)
        self._store.append(
            TranscriptRecord(
                digest=request_digest(req),
                response=resp,
                backend_id=self._inner.id,
                timestamp="",
                model_id=model.id,
                system_prompt=req.system_prompt,
                user_message=req.user_message,
            )
        )
        return resp


class ReplayBackend(Backend):
    """Serves previously recorded responses; identical digests yield
    byte-identical responses."""

    def __init__(self, store: ReplayStore, backend_id: str = "replay"):
        self.id = backend_id
        self._store = store

    def _complete_once(self, model: ModelSpec, req: CompletionRequest) -> CompletionResponse:
        rec = self._store.lookup(request_digest(req))
        if rec is None:
            raise WireError(f"no recorded response for digest {request_digest(req)[:12]}")
        return rec.response


class HttpBackend(Backend):
    """Chat-completions-style JSON client over HTTP.

    Images are attached as base64 data-URL parts. API key is read from an
    environment variable, never from config files.
    """

    def __init__(
        self,
        base_url: str,
        backend_id: str = "http",
        api_key_env: str = "SITECREW_API_KEY",
        timeout_s: float = 120.0,
    ):
        self.id = backend_id
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout_s = timeout_s

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _user_content(self, req: CompletionRequest):
        if not req.images:
            return req.user_message
        parts: list[dict] = [{"type": "text", "text": req.user_message}]
        for ref in req.images:
            data = base64.b64encode(Path(ref).read_bytes()).decode("ascii")
            parts.append(
                {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{data}"}}
            )
        return parts

    def _complete_once(self, model: ModelSpec, req: CompletionRequest) -> CompletionResponse:
        payload = {
            "model": model.id,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": self._user_content(req)},
            ],
            "temperature": req.temperature,
            "max_tokens": model.max_output_tokens,
        }
        if req.seed is not None:
            payload["seed"] = req.seed
        url = (model.endpoint or self.base_url) + "/chat/completions"
        start = time.perf_counter()
        try:
            resp = requests.post(url, json=payload, headers=self._headers(), timeout=self.timeout_s)
            resp.raise_for_status()
            body = resp.json()
        except (requests.RequestException, ValueError) as exc:
            raise WireError(f"chat-completions call to {url} failed: {exc}") from exc
        latency = time.perf_counter() - start
        try:
            text = body["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise WireError(f"malformed chat-completions response: {exc}") from exc
        usage = body.get("usage") or {}
        tokens_in = usage.get("prompt_tokens")
        tokens_out = usage.get("completion_tokens")
        estimated = tokens_in is None or tokens_out is None
        if tokens_in is None:
            tokens_in = count_tokens(req.system_prompt + req.user_message, model)
        if tokens_out is None:
            tokens_out = count_tokens(text, model)
        return CompletionResponse(
            text=text,
            tokens_in=int(tokens_in),
            tokens_out=int(tokens_out),
            latency_s=latency,
            tokens_estimated=estimated,
        )
