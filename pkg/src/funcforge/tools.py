"""Tool pool loading, similarity scoring, deduplication, and grouping.

A pool file is a JSON array of tool schemas in the common function-calling
shape::

    {"name": ..., "description": ...,
     "parameters": {"type": "object", "properties": {...}, "required": [...]}}

Tools whose similarity exceeds the grouping threshold form target clusters
(single linkage); every other tool is tiered per group as a High, Medium,
or Low distractor.  Near-identical tools collapse to one representative
before grouping.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

from .errors import DomainError, DuplicateName, MalformedScore, ParseError, SchemaError
from .prompts import render_prompt

GROUP_THRESHOLD = 0.75  # strictly above: tools cluster as targets
DEDUP_THRESHOLD = 0.95  # strictly above: redundant near-duplicates collapse
HIGH_TIER_FLOOR = 0.6   # strictly above: High distractor
LOW_TIER_CEIL = 0.3     # at or below: Low distractor


class Tier(str, Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"


@dataclass(frozen=True)
class ParamSpec:
    """One parameter of a tool schema.

    ``kind`` and ``required`` may be None when the source schema omitted
    them; the rule checker flags that, loading does not.
    """

    name: str
    kind: str | None = None
    description: str = ""
    required: bool | None = None
    enum: tuple[Any, ...] | None = None
    minimum: float | None = None
    maximum: float | None = None
    format: str | None = None
    pattern: str | None = None
    unit: str | None = None


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str = ""
    params: tuple[ParamSpec, ...] = ()

    def param(self, name: str) -> ParamSpec | None:
        for p in self.params:
            if p.name == name:
                return p
        return None

    def required_params(self) -> tuple[ParamSpec, ...]:
        return tuple(p for p in self.params if p.required)

    def optional_params(self) -> tuple[ParamSpec, ...]:
        return tuple(p for p in self.params if p.required is False)

    def to_dict(self) -> dict[str, Any]:
        properties: dict[str, Any] = {}
        required: list[str] = []
        for p in self.params:
            entry: dict[str, Any] = {}
            if p.kind is not None:
                entry["type"] = p.kind
            if p.description:
                entry["description"] = p.description
            if p.enum is not None:
                entry["enum"] = list(p.enum)
            if p.minimum is not None:
                entry["minimum"] = p.minimum
            if p.maximum is not None:
                entry["maximum"] = p.maximum
            if p.format is not None:
                entry["format"] = p.format
            if p.pattern is not None:
                entry["pattern"] = p.pattern
            if p.unit is not None:
                entry["unit"] = p.unit
            properties[p.name] = entry
            if p.required:
                required.append(p.name)
        return {
            "name": self.name,
            "description": self.description,
            "parameters": {"type": "object", "properties": properties, "required": required},
        }

    @classmethod
    def from_dict(cls, raw: Any, strict: bool = True) -> "ToolSpec":
        if not isinstance(raw, dict):
            raise SchemaError(f"tool entry must be an object, got {type(raw).__name__}")
        name = raw.get("name")
        if strict:
            for key in ("name", "description", "parameters"):
                if key not in raw:
                    raise SchemaError(f"tool {name or '<unnamed>'} is missing '{key}'")
        if not isinstance(name, str) or not name:
            raise SchemaError("tool name must be a non-empty string")
        parameters = raw.get("parameters") or {}
        if not isinstance(parameters, dict):
            raise SchemaError(f"tool {name}: 'parameters' must be an object")
        properties = parameters.get("properties") or {}
        required_list = parameters.get("required")
        params: list[ParamSpec] = []
        for pname, prop in properties.items():
            if not isinstance(prop, dict):
                raise SchemaError(f"tool {name}: parameter '{pname}' must be an object")
            enum = prop.get("enum")
            if enum is not None:
                if not isinstance(enum, list) or not enum:
                    raise SchemaError(f"tool {name}: parameter '{pname}' enum must be a non-empty list")
                enum = tuple(enum)
            minimum = prop.get("minimum")
            maximum = prop.get("maximum")
            if minimum is not None and maximum is not None and minimum > maximum:
                raise SchemaError(f"tool {name}: parameter '{pname}' has minimum > maximum")
            required: bool | None
            if isinstance(required_list, list):
                required = pname in required_list
            else:
                required = None  # schema never declared optionality
            params.append(
                ParamSpec(
                    name=pname,
                    kind=prop.get("type"),
                    description=prop.get("description", ""),
                    required=required,
                    enum=enum,
                    minimum=minimum,
                    maximum=maximum,
                    format=prop.get("format"),
                    pattern=prop.get("pattern"),
                    unit=prop.get("unit"),
                )
            )
        return cls(name=name, description=raw.get("description", "") or "", params=tuple(params))


@dataclass(frozen=True)
class ToolCall:
    """One concrete invocation: a tool name plus argument values."""

    name: str
    arguments: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "arguments": dict(self.arguments)}

    @classmethod
    def from_dict(cls, raw: Any) -> "ToolCall":
        if not isinstance(raw, dict) or not isinstance(raw.get("name"), str):
            raise SchemaError("tool call must be an object with a string 'name'")
        arguments = raw.get("arguments", {})
        if not isinstance(arguments, dict):
            raise SchemaError(f"call to '{raw['name']}': arguments must be an object")
        return cls(name=raw["name"], arguments=dict(arguments))


@dataclass(frozen=True)
class ToolPool:
    tools: tuple[ToolSpec, ...]
    by_name: dict[str, ToolSpec] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.by_name:
            object.__setattr__(self, "by_name", {t.name: t for t in self.tools})

    def __len__(self) -> int:
        return len(self.tools)

    def get(self, name: str) -> ToolSpec | None:
        return self.by_name.get(name)


@dataclass(frozen=True)
class SimilarityRecord:
    a: str
    b: str
    score: float

    def key(self) -> tuple[str, str]:
        return (self.a, self.b) if self.a <= self.b else (self.b, self.a)


@dataclass(frozen=True)
class ToolGroup:
    """One target cluster plus a full tiering of every other pool tool."""

    targets: tuple[str, ...]
    distractors: dict[Tier, tuple[str, ...]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "targets": list(self.targets),
            "distractors": {tier.value: list(self.distractors.get(tier, ())) for tier in Tier},
        }

    @classmethod
    def from_dict(cls, raw: Any) -> "ToolGroup":
        if not isinstance(raw, dict) or not isinstance(raw.get("targets"), list):
            raise SchemaError("tool group must be an object with a 'targets' list")
        distractors = raw.get("distractors") or {}
        return cls(
            targets=tuple(raw["targets"]),
            distractors={tier: tuple(distractors.get(tier.value, ())) for tier in Tier},
        )


def load_pool(path: str | Path) -> ToolPool:
    """Parse and validate a pool file.

    Raises ParseError for bad JSON, SchemaError for missing fields, and
    DuplicateName when two tools share a name.
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read pool file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"pool file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise SchemaError("pool file must contain a JSON array of tools")
    tools: list[ToolSpec] = []
    seen: set[str] = set()
    for entry in raw:
        tool = ToolSpec.from_dict(entry, strict=True)
        if tool.name in seen:
            raise DuplicateName(f"pool declares tool '{tool.name}' more than once")
        seen.add(tool.name)
        tools.append(tool)
    return ToolPool(tools=tuple(tools))


def tier_of(score: float) -> Tier:
    """Distractor tier for a similarity score."""
    if not 0.0 <= score <= 1.0:
        raise DomainError(f"similarity score {score} outside [0, 1]")
    if score > HIGH_TIER_FLOOR:
        return Tier.HIGH
    if score > LOW_TIER_CEIL:
        return Tier.MEDIUM
    return Tier.LOW


def _parse_score(reply: str) -> float | None:
    text = reply.strip()
    try:
        value = float(text)
    except ValueError:
        try:
            obj = json.loads(text)
        except json.JSONDecodeError:
            return None
        if not isinstance(obj, dict) or not isinstance(obj.get("score"), (int, float)):
            return None
        value = float(obj["score"])
    if not 0.0 <= value <= 1.0:
        return None
    return value


def score_similarity(a: ToolSpec, b: ToolSpec, backend: Any, prompt_dir: str | None = None) -> float:
    """Similarity of two tools in [0, 1], judged by the backend at temperature 0.

    Identical specifications score 1.0 without a backend round trip.  A
    non-numeric or out-of-range reply is retried once, then raises
    MalformedScore.
    """
    from .backend import ChatMessage, GenerationRequest  # local import: avoid cycle

    if a.to_dict() == b.to_dict():
        return 1.0
    prompt = render_prompt(
        "similarity",
        override_dir=prompt_dir,
        tool_a=json.dumps(a.to_dict(), indent=2),
        tool_b=json.dumps(b.to_dict(), indent=2),
    )
    request = GenerationRequest(
        messages=(ChatMessage(role="user", content=prompt),),
        temperature=0.0,
        max_tokens=16,
        tag="similarity",
    )
    for _ in range(2):
        reply = backend.complete(request).content
        score = _parse_score(reply)
        if score is not None:
            return score
    raise MalformedScore(f"similarity backend reply not a number in [0, 1]: {reply!r}")


class ScoreCache:
    """Lazily scores tool pairs against a backend, caching by name pair.

    Safe for concurrent readers; writes are serialized.
    """

    def __init__(self, backend: Any, prompt_dir: str | None = None):
        self._backend = backend
        self._prompt_dir = prompt_dir
        self._scores: dict[tuple[str, str], float] = {}
        self._lock = threading.Lock()

    def get(self, a: ToolSpec, b: ToolSpec) -> float:
        key = (a.name, b.name) if a.name <= b.name else (b.name, a.name)
        with self._lock:
            if key in self._scores:
                return self._scores[key]
        score = score_similarity(a, b, self._backend, self._prompt_dir)
        with self._lock:
            self._scores.setdefault(key, score)
            return self._scores[key]

    def records(self) -> list[SimilarityRecord]:
        with self._lock:
            return [SimilarityRecord(a, b, s) for (a, b), s in sorted(self._scores.items())]


def score_all_pairs(pool: ToolPool, backend: Any, prompt_dir: str | None = None) -> list[SimilarityRecord]:
    """Score every unordered pair of distinct tools, in pool order."""
    cache = ScoreCache(backend, prompt_dir)
    tools = pool.tools
    for i in range(len(tools)):
        for j in range(i + 1, len(tools)):
            cache.get(tools[i], tools[j])
    return cache.records()


def _components(names: list[str], edge: Any) -> list[list[str]]:
    """Connected components (single linkage) over ``names`` using ``edge(a, b)``."""
    remaining = sorted(names)
    components: list[list[str]] = []
    seen: set[str] = set()
    for start in remaining:
        if start in seen:
            continue
        component = [start]
        seen.add(start)
        frontier = [start]
        while frontier:
            current = frontier.pop()
            for other in remaining:
                if other not in seen and edge(current, other):
                    seen.add(other)
                    component.append(other)
                    frontier.append(other)
        components.append(sorted(component))
    return components


def cluster_pool(pool: ToolPool, scores: Iterable[SimilarityRecord]) -> list[ToolGroup]:
    """Group targets by single-linkage similarity and tier all other tools.

    Near-duplicate tools (score above the dedup threshold) first collapse
    to the lexicographically smallest name.  Missing pair scores count as
    0.0.  Output ordering is canonical (independent of input order).
    """
    lookup: dict[tuple[str, str], float] = {}
    for record in scores:
        lookup[record.key()] = record.score

    def pair_score(a: str, b: str) -> float:
        if a == b:
            return 1.0
        key = (a, b) if a <= b else (b, a)
        return lookup.get(key, 0.0)

    names = [t.name for t in pool.tools]
    duplicate_sets = _components(names, lambda a, b: pair_score(a, b) > DEDUP_THRESHOLD)
    survivors = sorted(component[0] for component in duplicate_sets)

    groups: list[ToolGroup] = []
    for component in _components(survivors, lambda a, b: pair_score(a, b) > GROUP_THRESHOLD):
        targets = tuple(component)
        tiers: dict[Tier, list[str]] = {Tier.HIGH: [], Tier.MEDIUM: [], Tier.LOW: []}
        for other in survivors:
            if other in component:
                continue
            relevance = max(pair_score(other, target) for target in targets)
            tiers[tier_of(relevance)].append(other)
        groups.append(
            ToolGroup(targets=targets, distractors={tier: tuple(sorted(members)) for tier, members in tiers.items()})
        )
    groups.sort(key=lambda g: g.targets[0])
    return groups


def write_groups(groups: list[ToolGroup], path: str | Path) -> None:
    payload = json.dumps([g.to_dict() for g in groups], indent=2, ensure_ascii=True)
    Path(path).write_text(payload + "\n", encoding="utf-8")


def read_groups(path: str | Path) -> list[ToolGroup]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read groups file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"groups file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise SchemaError("groups file must contain a JSON array")
    return [ToolGroup.from_dict(entry) for entry in raw]
