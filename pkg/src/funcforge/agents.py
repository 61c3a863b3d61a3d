"""Agent operations over a generation backend: tool sampling, usage-context
memory, slot selection and call planning, and best-of-N judging.

Randomness is always taken from caller-supplied ``random.Random`` streams so
runs replay exactly; backend replies carry all model-dependent content.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any

from .backend import Backend, ChatMessage, GenerationRequest
from .errors import (
    DuplicateId,
    InsufficientTools,
    InvalidArguments,
    MalformedVerdict,
    NoApplicableTool,
    SchemaError,
)
from .prompts import render_prompt
from .tools import Tier, ToolCall, ToolGroup, ToolPool, ToolSpec
from .validation import validate_call


@dataclass(frozen=True)
class SamplingConfig:
    """How many targets/distractors to draw and with what tier weighting."""

    m_targets: int = 2
    n_distractors: int = 3
    tier_weights: tuple[float, float, float] = (2.0, 2.0, 1.0)  # high, medium, low

    def weight(self, tier: Tier) -> float:
        return dict(zip(Tier, self.tier_weights))[tier]


@dataclass(frozen=True)
class SampleSelection:
    targets: tuple[ToolSpec, ...]
    distractors: tuple[tuple[ToolSpec, Tier], ...] = ()

    def __post_init__(self) -> None:
        if not self.targets:
            raise ValueError("selection needs at least one target tool")
        target_names = {t.name for t in self.targets}
        distractor_names = {t.name for t, _ in self.distractors}
        if target_names & distractor_names:
            raise ValueError(f"targets and distractors overlap: {sorted(target_names & distractor_names)}")

    def all_tools(self) -> tuple[ToolSpec, ...]:
        return self.targets + tuple(t for t, _ in self.distractors)

    def by_name(self) -> dict[str, ToolSpec]:
        return {t.name: t for t in self.all_tools()}


@dataclass(frozen=True)
class MemoryState:
    """Per-group record of produced dialogues and their usage-context labels.

    ``forbidden`` holds every label already covered (a superset of the
    recorded ones) and steers the user agent away from repeats.
    """

    records: tuple[tuple[str, str], ...] = ()
    forbidden: frozenset[str] = frozenset()


class SlotStrategy(str, Enum):
    DYNAMIC = "dynamic"
    MAX = "max"
    MIN = "min"


@dataclass(frozen=True)
class JudgeVerdict:
    chosen_index: int  # index into the caller's original candidate order
    rationale: str = ""


def normalize_label(label: str) -> str:
    """Canonical form of a usage-context label: lowercase, single spaces."""
    return re.sub(r"\s+", " ", label.strip().lower())


def choose_group(groups: list[ToolGroup], cfg: SamplingConfig, rng: random.Random) -> int:
    """Index of a uniformly chosen group with enough targets."""
    eligible = [i for i, g in enumerate(groups) if len(g.targets) >= cfg.m_targets]
    if not eligible:
        raise InsufficientTools(f"no group has >= {cfg.m_targets} targets")
    return eligible[rng.randrange(len(eligible))]

def sample_from_group(
    pool: ToolPool, group: ToolGroup, cfg: SamplingConfig, rng: random.Random
) -> SampleSelection:
    """Draw m targets from the group and up to n tier-weighted distractors."""
    if len(group.targets) < cfg.m_targets:
        raise InsufficientTools(f"group has {len(group.targets)} targets, need {cfg.m_targets}")

    def resolve(name: str) -> ToolSpec:
        tool = pool.get(name)
        if tool is None:
            raise SchemaError(f"groups file names tool '{name}' absent from the pool")
        return tool

    target_names = rng.sample(list(group.targets), cfg.m_targets)
    pools: dict[Tier, list[str]] = {tier: list(group.distractors.get(tier, ())) for tier in Tier}
    drawn: list[tuple[str, Tier]] = []
    while len(drawn) < cfg.n_distractors and any(pools.values()):
        tiers = [t for t in Tier if pools[t]]
        tier = rng.choices(tiers, weights=[cfg.weight(t) for t in tiers])[0]
        name = pools[tier].pop(rng.randrange(len(pools[tier])))
        drawn.append((name, tier))
    return SampleSelection(
        targets=tuple(resolve(n) for n in target_names),
        distractors=tuple((resolve(n), tier) for n, tier in drawn),
    )


def sample_tools(
    pool: ToolPool, groups: list[ToolGroup], cfg: SamplingConfig, rng: random.Random
) -> SampleSelection:
    return sample_from_group(pool, groups[choose_group(groups, cfg, rng)], cfg, rng)


def memory_record(state: MemoryState, dialogue_id: str, label: str) -> MemoryState:
    """Add one finished dialogue's label; ids may be recorded once only."""
    if any(existing == dialogue_id for existing, _ in state.records):
        raise DuplicateId(f"dialogue '{dialogue_id}' already recorded")
    normalized = normalize_label(label)
    return MemoryState(
        records=state.records + ((dialogue_id, normalized),),
        forbidden=state.forbidden | {normalized},
    )


def memory_forbid(state: MemoryState, label: str) -> MemoryState:
    """Block a label for future dialogues without recording a dialogue."""
    return MemoryState(records=state.records, forbidden=state.forbidden | {normalize_label(label)})


def memory_summarize(state: MemoryState) -> tuple[str, frozenset[str]]:
    """Counted enumeration of recorded labels (first-seen order) + forbidden set."""
    counts: dict[str, int] = {}
    for _, label in state.records:
        counts[label] = counts.get(label, 0) + 1
    summary = "\n".join(f"{label}: {count}" for label, count in counts.items())
    return summary, state.forbidden


def _render_turns(turns: Any) -> str:
    lines = []
    for turn in turns:
        content = turn.content if turn.content else getattr(turn, "tool_output", "") or ""
        lines.append(f"{turn.role}: {content}")
    return "\n".join(lines)


def classify_type(dialogue: Any, backend: Backend, prompt_dir: str | None = None) -> str:
    """Normalized usage-context label for a dialogue (needs >= 1 user turn)."""
    turns = dialogue.turns
    if not any(t.role == "user" for t in turns):
        raise SchemaError("cannot classify a dialogue with no user turns")
    prompt = render_prompt("memory_agent", override_dir=prompt_dir, transcript=_render_turns(turns))
    request = GenerationRequest(
        messages=(ChatMessage(role="user", content=prompt),), temperature=0.0, max_tokens=32, tag="memory"
    )
    for _ in range(2):
        label = normalize_label(backend.complete(request).content)
        if label:
            return label
    raise MalformedVerdict("memory agent produced an empty usage-context label twice")


def slot_select(tool: ToolSpec, strategy: SlotStrategy, rng: random.Random) -> tuple[str, ...]:
    """Optional parameter names the fill step may use, in declaration order.

    Dynamic includes each optional independently with probability 1/2 and
    consumes one rng draw per optional parameter; Max and Min consume none.
    """
    optionals = tool.optional_params()
    if strategy is SlotStrategy.MAX:
        return tuple(p.name for p in optionals)
    if strategy is SlotStrategy.MIN:
        return ()
    return tuple(p.name for p in optionals if rng.random() < 0.5)


def plan_slots(
    selection: SampleSelection, strategy: SlotStrategy, rng: random.Random
) -> dict[str, tuple[str, ...]]:
    """Slot draws for every selection tool, targets first, in order.

    This fixed consumption order is part of the replay contract: anyone
    holding an equal rng can reproduce the draws through slot_select.
    """
    return {tool.name: slot_select(tool, strategy, rng) for tool in selection.all_tools()}


def _slot_problems(call: ToolCall, selection: SampleSelection, allowed: dict[str, tuple[str, ...]]) -> list[str]:
    tool = selection.by_name().get(call.name)
    if tool is None:
        return []
    permitted = set(allowed.get(call.name, ()))
    return [
        f"optional parameter '{name}' of '{call.name}' is not in the allowed set"
        for name in call.arguments
        if (p := tool.param(name)) is not None and p.required is False and name not in permitted
    ]


def _parse_calls(reply: str) -> list[ToolCall] | None:
    try:
        obj = json.loads(reply)
    except json.JSONDecodeError:
        return None
    if not isinstance(obj, dict) or not isinstance(obj.get("calls"), list):
        return None
    try:
        return [ToolCall.from_dict(entry) for entry in obj["calls"]]
    except SchemaError:
        return None


def plan_call(
    selection: SampleSelection,
    query: str,
    strategy: SlotStrategy,
    backend: Backend,
    rng: random.Random,
    history: str = "",
    prompt_dir: str | None = None,
) -> list[ToolCall]:
    """Produce schema-valid tool calls for a query.

    Optional parameters are restricted to this round's slot draws (one
    slot_select per selection tool, targets first).  Invalid or unparseable
    agent output gets exactly one repair retry carrying the validation
    hints, then raises InvalidArguments.  An explicit empty call list
    raises NoApplicableTool.
    """
    allowed = plan_slots(selection, strategy, rng)
    tools_json = json.dumps([t.to_dict() for t in selection.all_tools()], indent=2)
    allowed_json = json.dumps({name: list(slots) for name, slots in allowed.items()}, indent=2)
    by_name = selection.by_name()

    def ask(repair_hint: str) -> str:
        prompt = render_prompt(
            "function_agent",
            override_dir=prompt_dir,
            tools=tools_json,
            allowed_optionals=allowed_json,
            query=query,
            history=history,
            repair_hint=repair_hint,
        )
        request = GenerationRequest(
            messages=(ChatMessage(role="user", content=prompt),), temperature=0.0, max_tokens=512, tag="function"
        )
        return backend.complete(request).content

    hint = ""
    problems: list[str] = []
    for _ in range(2):
        reply = ask(hint)
        calls = _parse_calls(reply)
        if calls is None:
            problems = ["reply was not a JSON object of the form {\"calls\": [...]}"]
        else:
            if not calls:
                raise NoApplicableTool("function agent returned an empty call list")
            problems = []
            for call in calls:
                problems.extend(p.message for p in validate_call(call, by_name))
                problems.extend(_slot_problems(call, selection, allowed))
            if not problems:
                return calls
        hint = "\nYour previous reply was rejected:\n- " + "\n- ".join(problems) + "\n"
    raise InvalidArguments("; ".join(problems))


def judge_select(
    candidates: list[str],
    backend: Backend,
    rng: random.Random,
    prompt_dir: str | None = None,
) -> JudgeVerdict:
    """Pick the best candidate, shuffling presentation order to neutralize
    positional bias.  The verdict indexes the caller's original order."""
    if len(candidates) < 2:
        raise ValueError("judging needs at least two candidates")
    order = list(range(len(candidates)))
    rng.shuffle(order)
    presented = "\n\n".join(
        f"Candidate {pos + 1}:\n{candidates[original]}" for pos, original in enumerate(order)
    )
    prompt = render_prompt(
        "judge_agent", override_dir=prompt_dir, candidates=presented, count=str(len(candidates))
    )
    request = GenerationRequest(
        messages=(ChatMessage(role="user", content=prompt),), temperature=0.0, max_tokens=128, tag="judge"
    )
    reply = ""
    for _ in range(2):
        reply = backend.complete(request).content
        choice, rationale = _parse_verdict(reply)
        if choice is not None and 1 <= choice <= len(candidates):
            return JudgeVerdict(chosen_index=order[choice - 1], rationale=rationale)
    raise MalformedVerdict(f"judge reply not a candidate number in range: {reply!r}")


def _parse_verdict(reply: str) -> tuple[int | None, str]:
    text = reply.strip()
    try:
        return int(text), ""
    except ValueError:
        pass
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        return None, ""
    if isinstance(obj, dict) and isinstance(obj.get("choice"), int) and not isinstance(obj.get("choice"), bool):
        return obj["choice"], str(obj.get("rationale", ""))
    return None, ""
