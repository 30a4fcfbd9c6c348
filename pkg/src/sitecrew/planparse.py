"""Parse raw model output into a structured plan of SDK call steps.

Model outputs mix prose, fenced code, assignments, and the occasional
function definition; the parser is deliberately forgiving and never raises.
Anything that is not a call expression lands in the residue.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_IDENT_RE = re.compile(r"[A-Za-z_]\w*")
_NUMBER_RE = re.compile(r"^[+-]?\d+(?:\.\d+)?$")
_DEF_RE = re.compile(r"^(\s*)def\s+([A-Za-z_]\w*)\s*\(")

_KEYWORDS = {"if", "elif", "while", "for", "return", "with", "assert", "not", "and", "or", "in", "def", "lambda"}

COLOR_WORDS = {
    "red", "green", "blue", "yellow", "orange", "purple", "white", "amber", "cyan", "magenta",
}


@dataclass(frozen=True)
class Arg:
    raw_text: str
    inferred_ptype: str


@dataclass(frozen=True)
class ActionStep:
    function: str
    args: tuple[Arg, ...]
    source_line: int
    raw_line: str = ""
    defined_in: str | None = None


@dataclass(frozen=True)
class Plan:
    steps: tuple[ActionStep, ...]
    residue: tuple[tuple[int, str], ...]
    definitions: tuple[tuple[str, int], ...] = ()

    @property
    def called_functions(self) -> frozenset[str]:
        return frozenset(s.function for s in self.steps)


def _code_region(raw: str) -> tuple[str, int]:
    """The last fenced code block (and its 1-based starting line in raw),
    or the whole text when no fence is present."""
    matches = list(_FENCE_RE.finditer(raw))
    if not matches:
        return raw, 1
    m = matches[-1]
    offset_line = raw[: m.start(1)].count("\n") + 1
    return m.group(1), offset_line


def _strip_quotes(text: str) -> str:
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    return text


def _infer_ptype(raw: str) -> str:
    if _NUMBER_RE.match(raw):
        return "number"
    if raw.strip().lower() in COLOR_WORDS:
        return "color"
    return "text"


def _split_args(body: str) -> list[str]:
    """Split on top-level commas, honoring quotes and nested brackets."""
    parts: list[str] = []
    depth = 0
    quote: str | None = None
    current: list[str] = []
    for ch in body:
        if quote:
            current.append(ch)
            if ch == quote:
                quote = None
            continue
        if ch in "'\"":
            quote = ch
            current.append(ch)
        elif ch in "([{":
            depth += 1
            current.append(ch)
        elif ch in ")]}":
            depth -= 1
            current.append(ch)
        elif ch == "," and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    if current or parts:
        parts.append("".join(current))
    return [p.strip() for p in parts if p.strip()]


def _extract_calls(line: str) -> list[tuple[str, str]]:
    """Top-level call expressions (name, argument body) in source order."""
    calls: list[tuple[str, str]] = []
    pos = 0
    while pos < len(line):
        m = _IDENT_RE.search(line, pos)
        if m is None:
            break
        name = m.group(0)
        after = m.end()
        if after >= len(line) or line[after] != "(":
            pos = after
            continue
        if name in _KEYWORDS or line[: m.start()].rstrip().endswith("def"):
            pos = after
            continue
        depth = 0
        quote: str | None = None
        end = None
        for i in range(after, len(line)):
            ch = line[i]
            if quote:
                if ch == quote:
                    quote = None
                continue
            if ch in "'\"":
                quote = ch
            elif ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
                if depth == 0:
                    end = i
                    break
        if end is None:
            pos = after + 1
            continue
        calls.append((name, line[after + 1 : end]))
        pos = end + 1
    return calls


def parse_plan(raw: str) -> Plan:
    """Parse arbitrary model output into steps plus residue.

    Extracts the last fenced code block when present; recognizes one or
    more call expressions per line (assignments record the called name);
    comments, prose, and bare statements go to the residue. Steps inside a
    function definition are tagged with the defining name.
    """
    code, offset = _code_region(raw)
    steps: list[ActionStep] = []
    residue: list[tuple[int, str]] = []
    definitions: list[tuple[str, int]] = []

    current_def: str | None = None
    def_indent = 0
    for i, original in enumerate(code.splitlines()):
        lineno = offset + i
        stripped = original.strip()
        if not stripped:
            continue
        indent = len(original) - len(original.lstrip())
        if current_def is not None and indent <= def_indent and not _DEF_RE.match(original):
            current_def = None

        dm = _DEF_RE.match(original)
        if dm:
            definitions.append((dm.group(2), lineno))
            current_def = dm.group(2)
            def_indent = len(dm.group(1))
            # an inline body ("def f(): g(...)") still yields steps below
            after_colon = stripped.partition(":")[2]
            calls = _extract_calls(after_colon)
        elif stripped.startswith("#"):
            residue.append((lineno, stripped))
            continue
        else:
            calls = _extract_calls(stripped)

        if not calls:
            residue.append((lineno, stripped))
            continue
        owner = current_def if (current_def and (dm or indent > def_indent)) else None
        for name, body in calls:
            args = tuple(
                Arg(raw_text=_strip_quotes(part), inferred_ptype=_infer_ptype(_strip_quotes(part)))
                for part in _split_args(body)
            )
            steps.append(
                ActionStep(
                    function=name,
                    args=args,
                    source_line=lineno,
                    raw_line=stripped,
                    defined_in=owner,
                )
            )

    return Plan(steps=tuple(steps), residue=tuple(residue), definitions=tuple(definitions))


def reconstruct(plan: Plan) -> str:
    """Steps and residue re-serialized in source order; matches the
    whitespace-normalized code region (parser round-trip invariant)."""
    lines: dict[int, str] = {ln: text for ln, text in plan.residue}
    for step in plan.steps:
        lines.setdefault(step.source_line, step.raw_line)
    return "\n".join(lines[k] for k in sorted(lines))


def normalized_code_region(raw: str) -> str:
    code, _ = _code_region(raw)
    return "\n".join(line.strip() for line in code.splitlines() if line.strip())
