"""Robot SDK function registry.

The registry is declarative data: one function per record with an ordered
parameter signature, loaded from a plain-text file so users can swap in
their own robot's SDK.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import SchemaError

PTYPES = ("object_ref", "color", "position", "number", "text", "none")

_RECORD_RE = re.compile(r"^(?P<name>[A-Za-z_]\w*)\((?P<params>[^)]*)\)\s*::\s*(?P<summary>.*)$")


@dataclass(frozen=True)
class SdkParam:
    pname: str
    ptype: str

    def __post_init__(self):
        if self.ptype not in PTYPES:
            raise SchemaError(f"param {self.pname!r}: unknown ptype {self.ptype!r}")


@dataclass(frozen=True)
class SdkFunction:
    name: str
    params: tuple[SdkParam, ...]
    summary: str

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class SdkSpec:
    functions: tuple[SdkFunction, ...]

    def __post_init__(self):
        names = [f.name for f in self.functions]
        if len(names) != len(set(names)):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate function names in registry: {dupes}")

    def get(self, name: str) -> SdkFunction | None:
        for f in self.functions:
            if f.name == name:
                return f
        return None

    def __contains__(self, name: str) -> bool:
        return self.get(name) is not None


def parse_registry(text: str, source: str = "<registry>") -> SdkSpec:
    functions: list[SdkFunction] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        m = _RECORD_RE.match(line)
        if m is None:
            raise SchemaError(f"{source}:{lineno}: expected 'name(ptype pname, ...) :: summary'")
        params = []
        raw = m.group("params").strip()
        if raw:
            for part in raw.split(","):
                fields = part.split()
                if len(fields) != 2:
                    raise SchemaError(f"{source}:{lineno}: expected 'ptype pname' in {part!r}")
                params.append(SdkParam(pname=fields[1], ptype=fields[0]))
        functions.append(
            SdkFunction(name=m.group("name"), params=tuple(params), summary=m.group("summary"))
        )
    return SdkSpec(functions=tuple(functions))


def load_sdk(path: str | Path) -> SdkSpec:
    path = Path(path)
    return parse_registry(path.read_text(encoding="utf-8"), source=str(path))


def default_sdk() -> SdkSpec:
    root = resources.files("sitecrew").joinpath("data/sdk/registry_v1.txt")
    return parse_registry(root.read_text(encoding="utf-8"), source="registry_v1.txt")
