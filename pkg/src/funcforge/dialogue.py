"""Dialogue synthesis: scenario taxonomy, the per-round best-of-N generation
loop, and corpus assembly with diversity control.

One round = one user turn plus the assistant's reaction (clarifying
question, tool calls with outputs and a summary, or a direct answer).  Each
round generates N candidate rounds, a judge picks one, and the memory agent
labels the usage context so later dialogues avoid repeating it.

Randomness is split into named substreams derived from the per-job seed
string (``{seed}:{job}``): ``:sample`` for tool selection, ``:meta`` for
task-count draws, ``:slots:{round}:{candidate}`` for optional-parameter
draws, and ``:judge:{round}`` for presentation shuffles.  Anyone holding
the seed can replay any draw through the public agent operations without
touching the others.
"""

from __future__ import annotations

import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

from .agents import (
    MemoryState,
    SampleSelection,
    SamplingConfig,
    SlotStrategy,
    choose_group,
    classify_type,
    judge_select,
    memory_forbid,
    memory_record,
    memory_summarize,
    plan_call,
    sample_from_group,
)
from .backend import Backend, ChatMessage, GenerationRequest
from .errors import (
    BackendError,
    FuncForgeError,
    GenerationStalled,
    ParseError,
    SchemaError,
)
from .prompts import render_prompt
from .tools import Tier, ToolCall, ToolGroup, ToolPool, ToolSpec

log = logging.getLogger(__name__)

STOP_SENTINEL = "[STOP]"


class ScenarioType(str, Enum):
    SINGLE_SINGLE = "single_single"
    SINGLE_MULTI = "single_multi"
    MULTI_SINGLE = "multi_single"
    MULTI_MULTI = "multi_multi"
    SPECIAL_NO_TOOL = "special_no_tool"
    SPECIAL_BAD_PARAMS = "special_bad_params"

    @property
    def category(self) -> str:
        if self in (ScenarioType.SINGLE_SINGLE, ScenarioType.SINGLE_MULTI):
            return "single"
        if self in (ScenarioType.MULTI_SINGLE, ScenarioType.MULTI_MULTI):
            return "multi"
        return "special"

    @property
    def multi_round(self) -> bool:
        return self.category == "multi"

    @property
    def multi_task(self) -> bool:
        return self in (ScenarioType.SINGLE_MULTI, ScenarioType.MULTI_MULTI)


_SCENARIO_HINTS = {
    ScenarioType.SINGLE_SINGLE: "one request, resolvable by a single tool call",
    ScenarioType.SINGLE_MULTI: "one message bundling several independent tasks, each needing its own tool call",
    ScenarioType.MULTI_SINGLE: "a back-and-forth conversation pursuing one task",
    ScenarioType.MULTI_MULTI: "a back-and-forth conversation covering several tasks",
    ScenarioType.SPECIAL_NO_TOOL: "a request none of the available tools can handle",
    ScenarioType.SPECIAL_BAD_PARAMS: "a request whose details are too vague to fill the tool parameters",
}


@dataclass(frozen=True)
class Action:
    kind: str  # "ask" | "call" | "answer"
    text: str = ""
    calls: tuple[ToolCall, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("ask", "call", "answer"):
            raise ValueError(f"unknown action kind: {self.kind!r}")
        if self.kind == "call" and not self.calls:
            raise ValueError("call action needs at least one tool call")
        if self.kind in ("ask", "answer") and not self.text:
            raise ValueError(f"{self.kind} action needs non-empty text")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.text:
            out["text"] = self.text
        if self.calls:
            out["calls"] = [c.to_dict() for c in self.calls]
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "Action":
        return cls(
            kind=raw["kind"],
            text=raw.get("text", ""),
            calls=tuple(ToolCall.from_dict(c) for c in raw.get("calls", ())),
        )


@dataclass
class DialogueTurn:
    role: str  # "user" | "assistant" | "tool"
    content: str = ""
    action: Action | None = None
    tool_output: str | None = None
    meta: dict[str, Any] | None = None

    def __post_init__(self) -> None:
        if self.role not in ("user", "assistant", "tool"):
            raise ValueError(f"unknown turn role: {self.role!r}")
        if self.action is not None and self.role != "assistant":
            raise ValueError("only assistant turns carry an action")
        if self.tool_output is not None and self.role != "tool":
            raise ValueError("only tool turns carry a tool output")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"role": self.role, "content": self.content}
        if self.action is not None:
            out["action"] = self.action.to_dict()
        if self.tool_output is not None:
            out["tool_output"] = self.tool_output
        if self.meta:
            out["meta"] = self.meta
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "DialogueTurn":
        action = raw.get("action")
        return cls(
            role=raw["role"],
            content=raw.get("content", ""),
            action=Action.from_dict(action) if action is not None else None,
            tool_output=raw.get("tool_output"),
            meta=raw.get("meta"),
        )


@dataclass(frozen=True)
class TrajectoryEntry:
    turn_index: int
    calls: tuple[ToolCall, ...]

    def to_dict(self) -> dict[str, Any]:
        return {"turn": self.turn_index, "kind": "call", "calls": [c.to_dict() for c in self.calls]}

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "TrajectoryEntry":
        return cls(turn_index=raw["turn"], calls=tuple(ToolCall.from_dict(c) for c in raw["calls"]))


def _selection_to_dict(selection: SampleSelection) -> dict[str, Any]:
    return {
        "targets": [t.to_dict() for t in selection.targets],
        "distractors": [{"tool": t.to_dict(), "tier": tier.value} for t, tier in selection.distractors],
    }


def _selection_from_dict(raw: dict[str, Any]) -> SampleSelection:
    return SampleSelection(
        targets=tuple(ToolSpec.from_dict(t, strict=False) for t in raw["targets"]),
        distractors=tuple(
            (ToolSpec.from_dict(d["tool"], strict=False), Tier(d["tier"])) for d in raw.get("distractors", ())
        ),
    )


@dataclass
class Dialogue:
    id: str
    scenario: ScenarioType
    type_label: str
    tools: SampleSelection
    turns: list[DialogueTurn] = field(default_factory=list)
    trajectory: list[TrajectoryEntry] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)

    def call_actions(self) -> list[tuple[int, Action]]:
        return [(i, t.action) for i, t in enumerate(self.turns) if t.action is not None and t.action.kind == "call"]

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "scenario": self.scenario.value,
            "type_label": self.type_label,
            "tools": _selection_to_dict(self.tools),
            "turns": [t.to_dict() for t in self.turns],
            "trajectory": [t.to_dict() for t in self.trajectory],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "Dialogue":
        try:
            return cls(
                id=raw["id"],
                scenario=ScenarioType(raw["scenario"]),
                type_label=raw["type_label"],
                tools=_selection_from_dict(raw["tools"]),
                turns=[DialogueTurn.from_dict(t) for t in raw["turns"]],
                trajectory=[TrajectoryEntry.from_dict(t) for t in raw["trajectory"]],
                meta=dict(raw.get("meta", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed dialogue record: {exc}") from exc


@dataclass(frozen=True)
class GenerationConfig:
    total: int = 10
    t_max: int = 8
    n_candidates: int = 4
    scenario_mix: tuple[tuple[ScenarioType, float], ...] = (
        (ScenarioType.SINGLE_SINGLE, 2.0),
        (ScenarioType.SINGLE_MULTI, 2.0),
        (ScenarioType.MULTI_SINGLE, 2.0),
        (ScenarioType.MULTI_MULTI, 2.0),
        (ScenarioType.SPECIAL_NO_TOOL, 0.5),
        (ScenarioType.SPECIAL_BAD_PARAMS, 0.5),
    )
    slot_strategy: SlotStrategy = SlotStrategy.DYNAMIC
    sampling: SamplingConfig = SamplingConfig()
    seed: int = 0
    parallelism: int = 1
    error_budget: int = 3
    prompt_dir: str | None = None

    def mix_dict(self) -> dict[ScenarioType, float]:
        return dict(self.scenario_mix)


@dataclass
class GenState:
    """What the stop rule sees: scenario, progress, and signals."""

    scenario: ScenarioType
    t_max: int
    rounds: int = 0
    terminal_emitted: bool = False
    stop_signaled: bool = False


def stop_condition(state: GenState) -> bool:
    """True when the dialogue is complete.

    Single-round scenarios end once their terminal action has been
    emitted; multi-round scenarios end on an explicit user stop signal;
    every scenario ends at t_max rounds.
    """
    if state.terminal_emitted and not state.scenario.multi_round:
        return True
    if state.stop_signaled:
        return True
    return state.rounds >= state.t_max


def render_history(turns: Iterable[DialogueTurn]) -> str:
    lines = []
    for turn in turns:
        if turn.role == "tool":
            lines.append(f"tool: {turn.tool_output or ''}")
        elif turn.action is not None and turn.action.kind == "call":
            calls = json.dumps([c.to_dict() for c in turn.action.calls], sort_keys=True)
            text = f"{turn.content} " if turn.content else ""
            lines.append(f"assistant: {text}[calls: {calls}]")
        else:
            lines.append(f"{turn.role}: {turn.content}")
    return "\n".join(lines)


def _complete_text(backend: Backend, tag: str, prompt: str, max_tokens: int = 512) -> str:
    request = GenerationRequest(
        messages=(ChatMessage(role="user", content=prompt),),
        temperature=0.0,
        max_tokens=max_tokens,
        tag=tag,
    )
    return backend.complete(request).content


def simulate_exec(call: ToolCall, tool: ToolSpec, backend: Backend, prompt_dir: str | None = None) -> str:
    """Simulated execution output for one call, recorded verbatim."""
    prompt = render_prompt(
        "exec_agent",
        override_dir=prompt_dir,
        tool=json.dumps(tool.to_dict(), indent=2),
        call=json.dumps(call.to_dict(), indent=2),
    )
    output = _complete_text(backend, "exec", prompt)
    if not output.strip():
        raise BackendError(f"exec backend returned empty output for '{call.name}'")
    return output


def _parse_plan(reply: str) -> tuple[str, str] | None:
    try:
        obj = json.loads(reply)
    except json.JSONDecodeError:
        return None
    if not isinstance(obj, dict) or obj.get("action") not in ("ask", "call", "answer"):
        return None
    text = obj.get("text", "")
    if not isinstance(text, str):
        return None
    if obj["action"] in ("ask", "answer") and not text.strip():
        return None
    return obj["action"], text


def assistant_step(
    selection: SampleSelection,
    turns: list[DialogueTurn],
    query: str,
    cfg: GenerationConfig,
    backend: Backend,
    slot_rng: random.Random,
) -> Action:
    """Decide and fully materialize the assistant's next action.

    The plan reply picks ask/call/answer; a call plan is completed through
    the function agent (with this candidate's slot draws).  A malformed
    plan reply is retried once, then raises SchemaError.
    """
    tools_json = json.dumps([t.to_dict() for t in selection.all_tools()], indent=2)
    history = render_history(turns + [DialogueTurn(role="user", content=query)])
    prompt = render_prompt(
        "assistant_agent", override_dir=cfg.prompt_dir, tools=tools_json, history=history
    )
    plan = None
    for _ in range(2):
        plan = _parse_plan(_complete_text(backend, "assistant", prompt))
        if plan is not None:
            break
    if plan is None:
        raise SchemaError("assistant plan reply unparseable after one retry")
    kind, text = plan
    if kind != "call":
        return Action(kind=kind, text=text)
    calls = plan_call(
        selection,
        query,
        cfg.slot_strategy,
        backend,
        slot_rng,
        history=history,
        prompt_dir=cfg.prompt_dir,
    )
    return Action(kind="call", text=text, calls=tuple(calls))


@dataclass
class _Candidate:
    turns: list[DialogueTurn]
    terminal: bool

    def render(self) -> str:
        return render_history(self.turns)


def _user_query(
    scenario: ScenarioType,
    selection: SampleSelection,
    forbidden: frozenset[str],
    turns: list[DialogueTurn],
    task_count: int,
    backend: Backend,
    prompt_dir: str | None,
) -> str:
    tool_lines = "\n".join(f"- {t.name}: {t.description}" for t in selection.all_tools())
    prompt = render_prompt(
        "user_agent",
        override_dir=prompt_dir,
        scenario_hint=_SCENARIO_HINTS[scenario],
        task_count=str(task_count),
        tools=tool_lines,
        forbidden="\n".join(f"- {label}" for label in sorted(forbidden)) or "- (none)",
        history=render_history(turns),
    )
    return _complete_text(backend, "user", prompt, max_tokens=256)


def _build_candidate(
    selection: SampleSelection,
    scenario: ScenarioType,
    base_turns: list[DialogueTurn],
    query: str,
    cfg: GenerationConfig,
    backend: Backend,
    slot_rng: random.Random,
) -> _Candidate:
    turns: list[DialogueTurn] = [DialogueTurn(role="user", content=query)]
    action = assistant_step(selection, base_turns, query, cfg, backend, slot_rng)
    if action.kind == "ask":
        turns.append(DialogueTurn(role="assistant", content=action.text, action=action))
        return _Candidate(turns=turns, terminal=scenario is ScenarioType.SPECIAL_BAD_PARAMS)
    if action.kind == "answer":
        turns.append(DialogueTurn(role="assistant", content=action.text, action=action))
        return _Candidate(turns=turns, terminal=True)
    turns.append(DialogueTurn(role="assistant", content=action.text, action=action))
    by_name = selection.by_name()
    for call in action.calls:
        output = simulate_exec(call, by_name[call.name], backend, cfg.prompt_dir)
        meta = None
        try:
            json.loads(output)
        except json.JSONDecodeError:
            meta = {"unstructured": True}
        turns.append(DialogueTurn(role="tool", tool_output=output, meta=meta))
    summary_prompt = render_prompt(
        "summarize_agent",
        override_dir=cfg.prompt_dir,
        history=render_history(base_turns + turns),
    )
    summary = _complete_text(backend, "assistant", summary_prompt)
    if not summary.strip():
        raise BackendError("summarize reply was empty")
    turns.append(DialogueTurn(role="assistant", content=summary, action=Action(kind="answer", text=summary)))
    return _Candidate(turns=turns, terminal=True)


def generate_dialogue(
    dialogue_id: str,
    selection: SampleSelection,
    memory: MemoryState,
    scenario: ScenarioType,
    cfg: GenerationConfig,
    backend: Backend,
    job_seed: str,
) -> tuple[Dialogue, MemoryState]:
    """Run the round loop for one dialogue.

    Per round: N candidate rounds are generated, the judge picks one, the
    chosen round is appended, and the memory agent labels the usage
    context (the label joins the forbidden set immediately; the last
    round's label becomes the dialogue's type label).  Backend failures
    beyond cfg.error_budget raise GenerationStalled; the caller is
    expected to leave ``memory`` untouched in that case.
    """
    state = GenState(scenario=scenario, t_max=cfg.t_max)
    turns: list[DialogueTurn] = []
    trajectory: list[TrajectoryEntry] = []
    labels: list[str] = []
    errors = 0
    _, forbidden = memory_summarize(memory)
    forbidden = frozenset(forbidden) | memory.forbidden

    meta_rng = random.Random(f"{job_seed}:meta")
    task_count = meta_rng.randint(2, 4) if scenario.multi_task else 1

    dialogue = Dialogue(
        id=dialogue_id, scenario=scenario, type_label="", tools=selection, turns=turns, trajectory=trajectory
    )

    while not stop_condition(state):
        round_index = state.rounds
        probe: str | None = None
        if scenario.multi_round and round_index > 0:
            probe = _user_query(scenario, selection, forbidden, turns, task_count, backend, cfg.prompt_dir)
            if probe.strip() == STOP_SENTINEL:
                state.stop_signaled = True
                break
        candidates: list[_Candidate] = []
        for c in range(cfg.n_candidates):
            if c == 0 and probe is not None:
                query = probe
            else:
                query = _user_query(scenario, selection, forbidden, turns, task_count, backend, cfg.prompt_dir)
            slot_rng = random.Random(f"{job_seed}:slots:{round_index}:{c}")
            try:
                candidates.append(
                    _build_candidate(selection, scenario, turns, query, cfg, backend, slot_rng)
                )
            except FuncForgeError as exc:
                errors += 1
                log.debug("candidate %d of round %d failed: %s", c, round_index, exc)
                if errors > cfg.error_budget:
                    raise GenerationStalled(f"dialogue {dialogue_id}: {errors} backend failures") from exc
        if not candidates:
            raise GenerationStalled(f"dialogue {dialogue_id}: no candidate survived round {round_index}")
        if len(candidates) == 1:
            chosen = candidates[0]
        else:
            judge_rng = random.Random(f"{job_seed}:judge:{round_index}")
            verdict = judge_select([c.render() for c in candidates], backend, judge_rng, cfg.prompt_dir)
            chosen = candidates[verdict.chosen_index]
        offset = len(turns)
        turns.extend(chosen.turns)
        for i, turn in enumerate(chosen.turns):
            if turn.action is not None and turn.action.kind == "call":
                trajectory.append(TrajectoryEntry(turn_index=offset + i, calls=turn.action.calls))
        label = classify_type(dialogue, backend, cfg.prompt_dir)
        labels.append(label)
        forbidden = forbidden | {label}
        state.terminal_emitted = state.terminal_emitted or chosen.terminal
        state.rounds += 1

    if not labels:
        raise GenerationStalled(f"dialogue {dialogue_id} produced no rounds")
    dialogue.type_label = labels[-1]
    actual_tasks = 1
    if scenario is ScenarioType.SINGLE_MULTI:
        actual_tasks = sum(len(a.calls) for _, a in dialogue.call_actions()) or 1
    elif scenario is ScenarioType.MULTI_MULTI:
        actual_tasks = len(dialogue.call_actions()) or 1
    dialogue.meta = {"tasks": actual_tasks, "labels": labels}
    updated = memory
    for label in labels:
        updated = memory_forbid(updated, label)
    return dialogue, updated


def scenario_schedule(mix: dict[ScenarioType, float], total: int) -> list[ScenarioType]:
    """Exact per-scenario counts by largest-remainder apportionment.

    Ties go to scenario declaration order; the schedule lists scenarios in
    declaration-order blocks.
    """
    if total < 0:
        raise ValueError("total must be >= 0")
    weights = {s: mix.get(s, 0.0) for s in ScenarioType}
    weight_sum = sum(weights.values())
    if weight_sum <= 0:
        raise SchemaError("scenario mix needs at least one positive weight")
    shares = {s: total * w / weight_sum for s, w in weights.items()}
    counts = {s: int(shares[s]) for s in ScenarioType}
    leftover = total - sum(counts.values())
    by_remainder = sorted(
        ScenarioType, key=lambda s: (-(shares[s] - counts[s]), list(ScenarioType).index(s))
    )
    for s in by_remainder[:leftover]:
        counts[s] += 1
    schedule: list[ScenarioType] = []
    for s in ScenarioType:
        schedule.extend([s] * counts[s])
    return schedule


@dataclass
class RunReport:
    total: int
    retained: int
    by_scenario: dict[str, int]
    discards: dict[str, int]
    backend_calls: dict[str, int]

    def to_dict(self) -> dict[str, Any]:
        return {
            "total": self.total,
            "retained": self.retained,
            "by_scenario": {k: self.by_scenario[k] for k in sorted(self.by_scenario)},
            "discards": {k: self.discards[k] for k in sorted(self.discards)},
            "backend_calls": {k: self.backend_calls[k] for k in sorted(self.backend_calls)},
        }


def shape_reason(dialogue: Dialogue) -> str | None:
    """Why a dialogue violates its scenario's shape, or None if it fits."""
    turns = dialogue.turns
    if not turns or turns[0].role != "user" or turns[-1].role != "assistant":
        return "must start with a user turn and end with an assistant turn"
    user_turns = sum(1 for t in turns if t.role == "user")
    call_actions = dialogue.call_actions()
    total_calls = sum(len(a.calls) for _, a in call_actions)
    last_action = turns[-1].action
    scenario = dialogue.scenario
    if scenario is ScenarioType.SINGLE_SINGLE:
        if user_turns != 1 or len(call_actions) != 1 or total_calls != 1:
            return "single task needs exactly one user turn and one call"
    elif scenario is ScenarioType.SINGLE_MULTI:
        if user_turns != 1 or total_calls < 2:
            return "single-turn multi-task needs one user turn and >= 2 calls"
    elif scenario is ScenarioType.MULTI_SINGLE:
        if user_turns < 2 or len(call_actions) < 1:
            return "multi-turn needs >= 2 user turns and >= 1 call"
    elif scenario is ScenarioType.MULTI_MULTI:
        if user_turns < 2 or len(call_actions) < 2:
            return "multi-turn multi-task needs >= 2 user turns and >= 2 call rounds"
    elif scenario is ScenarioType.SPECIAL_NO_TOOL:
        if call_actions or last_action is None or last_action.kind != "answer":
            return "no-tool special must answer directly with zero calls"
    elif scenario is ScenarioType.SPECIAL_BAD_PARAMS:
        if call_actions or last_action is None or last_action.kind != "ask":
            return "bad-params special must end asking for the missing details"
    return None


def generate_corpus(
    pool: ToolPool,
    groups: list[ToolGroup],
    cfg: GenerationConfig,
    backend: Backend,
) -> tuple[list[Dialogue], RunReport]:
    """Generate cfg.total dialogues and retain the clean, diverse ones.

    Retention requires: generation completed, all checker rules pass, the
    scenario shape fits, and the usage-context label is new for the
    dialogue's tool group.  Results commit in job-index order, so retained
    ordering and memory evolution never depend on scheduling.
    """
    from .rules import run_all  # local import: rules imports dialogue types

    schedule = scenario_schedule(cfg.mix_dict(), cfg.total)
    memories: dict[int, MemoryState] = {}
    retained: list[Dialogue] = []
    retained_labels: dict[int, set[str]] = {}
    discards: dict[str, int] = {}
    by_scenario: dict[str, int] = {}

    def run_job(job: int, scenario: ScenarioType) -> tuple[int, Any]:
        job_seed = f"{cfg.seed}:{job}"
        rng_sample = random.Random(f"{job_seed}:sample")
        try:
            group_index = choose_group(groups, cfg.sampling, rng_sample)
            selection = sample_from_group(pool, groups[group_index], cfg.sampling, rng_sample)
            snapshot = memories.get(group_index, MemoryState())
            dialogue, _ = generate_dialogue(
                f"d{job:05d}", selection, snapshot, scenario, cfg, backend, job_seed
            )
            return group_index, dialogue
        except GenerationStalled:
            return -1, "stalled"
        except FuncForgeError as exc:
            log.warning("job %d failed: %s", job, exc)
            return -1, "error"

    jobs = list(enumerate(schedule))
    if cfg.parallelism > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool_exec:
            results = list(pool_exec.map(lambda item: run_job(*item), jobs))
    else:
        results = [run_job(job, scenario) for job, scenario in jobs]

    for (job, scenario), (group_index, outcome) in zip(jobs, results):
        if isinstance(outcome, str):
            discards[outcome] = discards.get(outcome, 0) + 1
            continue
        dialogue: Dialogue = outcome
        report = run_all(dialogue, list(dialogue.tools.all_tools()), pool, max_turns=2 * cfg.t_max + 2)
        if not report.overall:
            discards["rules"] = discards.get("rules", 0) + 1
            continue
        reason = shape_reason(dialogue)
        if reason is not None:
            discards["shape"] = discards.get("shape", 0) + 1
            continue
        group_labels = retained_labels.setdefault(group_index, set())
        if dialogue.type_label in group_labels:
            discards["duplicate_type"] = discards.get("duplicate_type", 0) + 1
            continue
        group_labels.add(dialogue.type_label)
        committed = memories.get(group_index, MemoryState())
        for label in dialogue.meta.get("labels", []):
            committed = memory_forbid(committed, label)
        memories[group_index] = memory_record(committed, dialogue.id, dialogue.type_label)
        retained.append(dialogue)
        by_scenario[scenario.value] = by_scenario.get(scenario.value, 0) + 1

    backend_calls = dict(getattr(backend, "counters", {}) or {})
    report = RunReport(
        total=cfg.total,
        retained=len(retained),
        by_scenario=by_scenario,
        discards=discards,
        backend_calls=backend_calls,
    )
    return retained, report


def write_corpus(dialogues: Iterable[Dialogue], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for dialogue in dialogues:
            fh.write(json.dumps(dialogue.to_dict(), separators=(",", ":"), ensure_ascii=True))
            fh.write("\n")


def read_corpus(path: str | Path) -> list[Dialogue]:
    dialogues = []
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    dialogues.append(Dialogue.from_dict(json.loads(line)))
                except json.JSONDecodeError as exc:
                    raise ParseError(f"{path}:{line_no}: not valid JSON: {exc}") from exc
    except OSError as exc:
        raise ParseError(f"cannot read corpus file {path}: {exc}") from exc
    return dialogues
