"""Scenario fixtures: role, scene inventory, grounding semantics, precedence.

Ships the three built-in experiment scenes (painter, safety inspector, floor
tiler) as editable YAML data and loads arbitrary user scenarios from the
same schema.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .errors import CyclicPrecedence, SchemaError

SCHEMA_VERSION = 1

_ARTICLES = {"a", "an", "the"}


def tokens(text: str) -> frozenset[str]:
    """Normalized word set: lowercase, punctuation stripped, articles dropped."""
    words = re.findall(r"[a-z0-9]+(?:-[a-z0-9]+)*", text.lower())
    return frozenset(w for w in words if w not in _ARTICLES)


@dataclass(frozen=True)
class InventoryItem:
    canonical_name: str
    aliases: tuple[str, ...] = ()
    category: str = ""


@dataclass(frozen=True)
class NamedObject:
    """An object referenced by rules (forbidden set) that may sit outside the
    inventory, e.g. the wall in the painting scene."""

    name: str
    aliases: tuple[str, ...] = ()


@dataclass(frozen=True)
class Match:
    item: str
    generic: bool


def _match_rank(arg_text: str, canonical: str, aliases: tuple[str, ...] = ()) -> int | None:
    """Rank a case-insensitive token-subset match: 0 = covers the canonical
    name (non-generic), 1 = matches an alias, 2 = partial subset of the
    canonical tokens. None = no match."""
    arg = tokens(arg_text)
    if not arg:
        return None
    canon = tokens(canonical)
    if canon and canon <= arg:
        return 0
    for alias in aliases:
        al = tokens(alias)
        if al and (al <= arg or arg <= al):
            return 1
    if arg <= canon:
        return 2
    return None


def match_object(arg_text: str, canonical: str, aliases: tuple[str, ...] = ()) -> Match | None:
    """Match an argument against one object.

    An argument at least as specific as the canonical name is a non-generic
    match; matches through an alias or through a token subset of the
    canonical name are accepted but tagged generic.
    """
    rank = _match_rank(arg_text, canonical, aliases)
    if rank is None:
        return None
    return Match(item=canonical, generic=rank > 0)


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    role: str
    image_path: str
    inventory: tuple[InventoryItem, ...]
    required_objects: tuple[str, ...] = ()
    forbidden_objects: tuple[NamedObject, ...] = ()
    irrelevant_objects: tuple[str, ...] = ()
    precedence: tuple[tuple[str, str], ...] = ()
    intended_target: str = ""
    forbidden_target: str = ""
    known_coordinates: frozenset[tuple[float, ...]] = frozenset()
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        names = {item.canonical_name for item in self.inventory}
        forbidden_names = {f.name for f in self.forbidden_objects}
        for req in self.required_objects:
            if req not in names:
                raise SchemaError(f"required.{req}: not in inventory")
        overlap = set(self.required_objects) & forbidden_names
        if overlap:
            raise SchemaError(f"required/forbidden overlap: {sorted(overlap)}")
        if self.intended_target and self.intended_target not in names:
            raise SchemaError(f"intended_target: {self.intended_target!r} not in inventory")
        _check_acyclic(self.precedence)

    def item(self, canonical_name: str) -> InventoryItem | None:
        for it in self.inventory:
            if it.canonical_name == canonical_name:
                return it
        return None

    def match_inventory(self, arg_text: str) -> Match | None:
        """Inventory item the argument grounds to: best match rank wins,
        inventory order breaks ties."""
        best: tuple[int, Match] | None = None
        for it in self.inventory:
            rank = _match_rank(arg_text, it.canonical_name, it.aliases)
            if rank is None:
                continue
            if best is None or rank < best[0]:
                best = (rank, Match(item=it.canonical_name, generic=rank > 0))
                if rank == 0:
                    break
        return best[1] if best else None

    def matches_name(self, arg_text: str, name: str) -> bool:
        """Does the argument reference the named object? Inventory arguments
        resolve through grounding first, so an argument never counts as a
        mention of a different item it merely overlaps with."""
        m = self.match_inventory(arg_text)
        if m is not None:
            return m.item == name
        for fo in self.forbidden_objects:
            if fo.name == name:
                return match_object(arg_text, fo.name, fo.aliases) is not None
        if self.item(name) is None:
            return match_object(arg_text, name) is not None
        return False

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "id": self.id,
            "role": self.role,
            "image": self.image_path,
            "inventory": [
                {"name": it.canonical_name, "aliases": list(it.aliases), "category": it.category}
                for it in self.inventory
            ],
            "required": list(self.required_objects),
            "forbidden": [{"name": f.name, "aliases": list(f.aliases)} for f in self.forbidden_objects],
            "irrelevant": list(self.irrelevant_objects),
            "precedence": [list(pair) for pair in self.precedence],
            "intended_target": self.intended_target,
            "forbidden_target": self.forbidden_target,
            "known_coordinates": [list(c) for c in sorted(self.known_coordinates)],
        }


def _check_acyclic(pairs: tuple[tuple[str, str], ...]) -> None:
    graph: dict[str, set[str]] = {}
    for a, b in pairs:
        graph.setdefault(a, set()).add(b)
        graph.setdefault(b, set())
    state: dict[str, int] = {}  # 0 unseen, 1 in stack, 2 done

    def visit(node: str, trail: list[str]) -> None:
        state[node] = 1
        for nxt in graph[node]:
            if state.get(nxt, 0) == 1:
                raise CyclicPrecedence(f"precedence cycle through {' -> '.join(trail + [node, nxt])}")
            if state.get(nxt, 0) == 0:
                visit(nxt, trail + [node])
        state[node] = 2

    for node in graph:
        if state.get(node, 0) == 0:
            visit(node, [])


def scenario_from_dict(data: dict, source: str = "<dict>") -> ScenarioSpec:
    def need(key: str):
        if key not in data:
            raise SchemaError(f"{source}: missing field {key!r}")
        return data[key]

    if need("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"{source}: schema_version must be {SCHEMA_VERSION}")
    inventory = []
    for i, raw in enumerate(need("inventory")):
        if "name" not in raw:
            raise SchemaError(f"{source}: inventory[{i}].name missing")
        inventory.append(
            InventoryItem(
                canonical_name=raw["name"],
                aliases=tuple(raw.get("aliases", [])),
                category=raw.get("category", ""),
            )
        )
    forbidden = [
        NamedObject(name=raw["name"], aliases=tuple(raw.get("aliases", [])))
        for raw in data.get("forbidden", [])
    ]
    return ScenarioSpec(
        id=need("id"),
        role=need("role"),
        image_path=data.get("image", ""),
        inventory=tuple(inventory),
        required_objects=tuple(data.get("required", [])),
        forbidden_objects=tuple(forbidden),
        irrelevant_objects=tuple(data.get("irrelevant", [])),
        precedence=tuple((a, b) for a, b in data.get("precedence", [])),
        intended_target=data.get("intended_target", ""),
        forbidden_target=data.get("forbidden_target", ""),
        known_coordinates=frozenset(tuple(float(v) for v in c) for c in data.get("known_coordinates", [])),
    )


def load_scenario(path: str | Path) -> ScenarioSpec:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise SchemaError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: scenario document must be a mapping")
    return scenario_from_dict(data, source=str(path))


BUILTIN_IDS = ("painter", "safety-inspector", "floor-tiling")


def builtin_scenarios() -> list[ScenarioSpec]:
    root = Path(str(resources.files("sitecrew").joinpath("data/scenarios")))
    return [load_scenario(root / f"{sid}.yaml") for sid in BUILTIN_IDS]


def get_scenario(ref: str) -> ScenarioSpec:
    """Resolve a builtin id or a filesystem path to a ScenarioSpec."""
    if ref in BUILTIN_IDS:
        root = Path(str(resources.files("sitecrew").joinpath("data/scenarios")))
        return load_scenario(root / f"{ref}.yaml")
    return load_scenario(ref)
