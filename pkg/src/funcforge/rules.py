"""Deterministic rule checking for generated dialogues.

Twelve rules in four families, reported in a fixed order:

- TD1-TD3: tool definitions (schema completeness, parameter metadata,
  unique names)
- CF1-CF3: call format (known tool, required/undeclared parameters, value
  constraints including ISO dates, enums, and ranges)
- DS1-DS3: dialogue structure (role order, dangling calls / unreferenced
  outputs, turn budget)
- TC1-TC3: tool consistency (no invented literals, surfaced errors,
  consistent tool naming)

Each family check is a pure function; ``run_all`` never calls a backend.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

from .dialogue import Dialogue
from .tools import ToolPool, ToolSpec
from .validation import (
    NAME_PROBLEMS,
    PRESENCE_PROBLEMS,
    extract_numbers,
    scalar_strings,
    validate_call,
)

DEFAULT_MAX_TURNS = 18  # 2 * default max rounds + 2


class RuleId(str, Enum):
    TD1 = "TD1"
    TD2 = "TD2"
    TD3 = "TD3"
    CF1 = "CF1"
    CF2 = "CF2"
    CF3 = "CF3"
    DS1 = "DS1"
    DS2 = "DS2"
    DS3 = "DS3"
    TC1 = "TC1"
    TC2 = "TC2"
    TC3 = "TC3"


@dataclass(frozen=True)
class RuleResult:
    rule: RuleId
    passed: bool
    hint: str = ""  # non-empty exactly when failed
    location: str = ""
    note: str = ""  # pass-side remark (e.g. literal check skipped)

    def __post_init__(self) -> None:
        if self.passed and self.hint:
            raise ValueError("passing results carry no hint")
        if not self.passed and not self.hint:
            raise ValueError("failing results need a hint")

    def to_dict(self) -> dict[str, Any]:
        return {
            "rule": self.rule.value,
            "passed": self.passed,
            "hint": self.hint,
            "location": self.location,
            "note": self.note,
        }


@dataclass(frozen=True)
class RuleReport:
    dialogue_id: str
    results: tuple[RuleResult, ...]

    @property
    def overall(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> tuple[RuleResult, ...]:
        return tuple(r for r in self.results if not r.passed)

    def to_dict(self) -> dict[str, Any]:
        return {
            "dialogue_id": self.dialogue_id,
            "overall": self.overall,
            "results": [r.to_dict() for r in self.results],
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "RuleReport":
        results = tuple(
            RuleResult(
                rule=RuleId(r["rule"]),
                passed=r["passed"],
                hint=r.get("hint", ""),
                location=r.get("location", ""),
                note=r.get("note", ""),
            )
            for r in raw["results"]
        )
        return cls(dialogue_id=raw["dialogue_id"], results=results)


@dataclass
class _Violations:
    """Collects per-rule violation messages, keeping only the first location."""

    messages: list[str] = field(default_factory=list)
    location: str = ""
    note: str = ""

    def add(self, message: str, location: str) -> None:
        self.messages.append(message)
        if not self.location:
            self.location = location

    def result(self, rule: RuleId) -> RuleResult:
        if self.messages:
            return RuleResult(rule=rule, passed=False, hint="; ".join(self.messages), location=self.location)
        return RuleResult(rule=rule, passed=True, note=self.note)


def check_tool_definitions(tools: list[ToolSpec], pool: ToolPool | None = None) -> list[RuleResult]:
    """TD1 (complete schema), TD2 (typed + flagged params), TD3 (unique names)."""
    td1, td2, td3 = _Violations(), _Violations(), _Violations()
    for index, tool in enumerate(tools):
        where = f"tool #{index} ({tool.name or 'unnamed'})"
        if not tool.name:
            td1.add("tool has no name", where)
        if not tool.description:
            td1.add(f"tool '{tool.name}' has no description", where)
        for param in tool.params:
            if param.kind is None:
                td2.add(f"parameter '{param.name}' of '{tool.name}' declares no type", where)
            if param.required is None:
                td2.add(f"parameter '{param.name}' of '{tool.name}' has no required/optional flag", where)
    seen: dict[str, int] = {}
    for index, tool in enumerate(tools):
        if tool.name in seen:
            td3.add(f"tool name '{tool.name}' appears more than once", f"tool #{index}")
        else:
            seen[tool.name] = index
    return [td1.result(RuleId.TD1), td2.result(RuleId.TD2), td3.result(RuleId.TD3)]


def check_call_compliance(dialogue: Dialogue, tools: list[ToolSpec]) -> list[RuleResult]:
    """CF1 (known tool), CF2 (parameter presence), CF3 (value constraints)."""
    cf1, cf2, cf3 = _Violations(), _Violations(), _Violations()
    by_name = {t.name: t for t in tools}
    for turn_index, action in dialogue.call_actions():
        for call_index, call in enumerate(action.calls):
            where = f"turn {turn_index}, call {call_index} ({call.name})"
            for problem in validate_call(call, by_name):
                if problem.kind in NAME_PROBLEMS:
                    cf1.add(problem.message, where)
                elif problem.kind in PRESENCE_PROBLEMS:
                    cf2.add(problem.message, where)
                else:
                    cf3.add(problem.message, where)
    return [cf1.result(RuleId.CF1), cf2.result(RuleId.CF2), cf3.result(RuleId.CF3)]


def _tool_runs(dialogue: Dialogue) -> list[tuple[int, int, int]]:
    """(call turn index, first tool turn index, tool turn count) per call action."""
    runs = []
    for turn_index, action in dialogue.call_actions():
        count = 0
        cursor = turn_index + 1
        while cursor < len(dialogue.turns) and dialogue.turns[cursor].role == "tool":
            count += 1
            cursor += 1
        runs.append((turn_index, turn_index + 1, count))
    return runs


def _owning_call(dialogue: Dialogue, tool_turn_index: int) -> tuple[int, int] | None:
    """(call turn index, position within its tool run) for a tool turn."""
    for call_index, first, count in _tool_runs(dialogue):
        if first <= tool_turn_index < first + count:
            return call_index, tool_turn_index - first
    return None


def check_structure(dialogue: Dialogue, max_turns: int = DEFAULT_MAX_TURNS) -> list[RuleResult]:
    """DS1 (role order), DS2 (dangling calls / orphaned outputs), DS3 (budget)."""
    ds1, ds2, ds3 = _Violations(), _Violations(), _Violations()
    turns = dialogue.turns
    if not turns:
        ds1.add("dialogue has no turns", "dialogue")
    elif turns[0].role != "user":
        ds1.add(f"first turn must be a user turn, got {turns[0].role}", "turn 0")
    for index in range(1, len(turns)):
        prev_role, role = turns[index - 1].role, turns[index].role
        if role == "user" and prev_role == "user":
            ds1.add("two consecutive user turns", f"turn {index}")
        if role == "assistant" and prev_role == "assistant":
            ds1.add("two consecutive assistant turns", f"turn {index}")
    runs = _tool_runs(dialogue)
    covered: set[int] = set()
    for call_index, first, count in runs:
        calls = len(turns[call_index].action.calls)
        covered.update(range(first, first + count))
        if count > calls:
            ds1.add(
                f"{count} consecutive tool turns after turn {call_index}, which makes only {calls} calls",
                f"turn {first}",
            )
        if count < calls:
            ds2.add(
                f"call turn {call_index} makes {calls} calls but only {count} tool turns follow",
                f"turn {call_index}",
            )
    for index, turn in enumerate(turns):
        if turn.role == "tool" and index not in covered:
            ds1.add("tool turn without a preceding call turn", f"turn {index}")
    for index, turn in enumerate(turns):
        if turn.role != "tool" or index not in covered:
            continue
        output = turn.tool_output or ""
        try:
            scalars = scalar_strings(json.loads(output))
        except json.JSONDecodeError:
            scalars = {output.strip()} if output.strip() else set()
        owner = _owning_call(dialogue, index)
        tool_name = None
        if owner is not None:
            call_index, position = owner
            calls = turns[call_index].action.calls
            if position < len(calls):
                tool_name = calls[position].name
        later_text = " ".join(t.content for t in turns[index + 1 :] if t.role == "assistant")
        referenced = any(s in later_text for s in scalars) or (tool_name is not None and tool_name in later_text)
        if not referenced:
            ds2.add(f"output of tool turn {index} is never reflected by a later assistant turn", f"turn {index}")
    if len(turns) > max_turns:
        ds3.add(f"dialogue has {len(turns)} turns, limit is {max_turns}", f"turn {max_turns}")
    return [ds1.result(RuleId.DS1), ds2.result(RuleId.DS2), ds3.result(RuleId.DS3)]


_QUOTED = re.compile(r'"([^"]+)"')
_ERROR_KEYS = ("error", "error_code")


def check_consistency(dialogue: Dialogue, tools: list[ToolSpec]) -> list[RuleResult]:
    """TC1 (literals sourced from outputs), TC2 (errors surfaced), TC3 (tool naming)."""
    tc1, tc2, tc3 = _Violations(), _Violations(), _Violations()
    turns = dialogue.turns
    known_names = {t.name for t in tools} | {c.name for _, a in dialogue.call_actions() for c in a.calls}

    def literal_pool(scalars: set[str]) -> set[str]:
        # a string scalar legitimizes the numbers spelled inside it too
        # (citing a date field as "2024-05-01" must not read as invention)
        out = set(scalars)
        for scalar in scalars:
            out |= extract_numbers(scalar)
        return out

    # walk once, maintaining what the assistant may legitimately reference
    allowed: set[str] = set()
    called: set[str] = set()
    tool_turns_seen = 0
    unstructured_seen = False
    tc1_skipped = tc2_skipped = False
    for index, turn in enumerate(turns):
        if turn.role == "user":
            allowed |= extract_numbers(turn.content)
            continue
        if turn.role == "tool":
            tool_turns_seen += 1
            output = turn.tool_output or ""
            try:
                parsed = json.loads(output)
            except json.JSONDecodeError:
                unstructured_seen = True
                tc2_skipped = True
                allowed |= literal_pool({output.strip()} if output.strip() else set())
                continue
            allowed |= literal_pool(scalar_strings(parsed))
            if isinstance(parsed, dict) and any(k in parsed for k in _ERROR_KEYS):
                error_value = str(next(parsed[k] for k in _ERROR_KEYS if k in parsed))
                follower = next((t for t in turns[index + 1 :] if t.role == "assistant"), None)
                surfaced = follower is not None and (
                    "error" in follower.content.lower()
                    or "fail" in follower.content.lower()
                    or error_value.lower() in follower.content.lower()
                )
                if not surfaced:
                    tc2.add(
                        f"tool turn {index} returned error {error_value!r} but the next assistant turn never surfaces it",
                        f"turn {index}",
                    )
            continue
        # assistant turn
        if turn.action is not None and turn.action.kind == "call":
            for call in turn.action.calls:
                for value in call.arguments.values():
                    allowed |= literal_pool(scalar_strings(value))
                called.add(call.name)
        if tool_turns_seen:
            if unstructured_seen:
                tc1_skipped = True
            else:
                for number in extract_numbers(turn.content):
                    if number not in allowed:
                        tc1.add(
                            f"assistant turn {index} states {number}, absent from every tool output so far",
                            f"turn {index}",
                        )
                for quoted in _QUOTED.findall(turn.content):
                    if quoted.strip() and quoted.strip() not in allowed:
                        tc1.add(
                            f"assistant turn {index} quotes {quoted!r}, absent from every tool output so far",
                            f"turn {index}",
                        )
        if called:
            stray = sorted(name for name in known_names - called if name in turn.content)
            if stray:
                tc3.add(
                    f"assistant turn {index} names {', '.join(stray)}, which was never called",
                    f"turn {index}",
                )
    if tc1_skipped and not tc1.messages:
        tc1.note = "literal check skipped: unstructured tool output upstream"
    if tc2_skipped and not tc2.messages:
        tc2.note = "error-propagation check skipped for unstructured tool output"
    return [tc1.result(RuleId.TC1), tc2.result(RuleId.TC2), tc3.result(RuleId.TC3)]


def run_all(
    dialogue: Dialogue,
    tools: list[ToolSpec] | None = None,
    pool: ToolPool | None = None,
    max_turns: int = DEFAULT_MAX_TURNS,
) -> RuleReport:
    """All twelve rules in TD, CF, DS, TC order.  Pure and deterministic."""
    if tools is None:
        tools = list(dialogue.tools.all_tools())
    results = (
        check_tool_definitions(tools, pool)
        + check_call_compliance(dialogue, tools)
        + check_structure(dialogue, max_turns)
        + check_consistency(dialogue, tools)
    )
    return RuleReport(dialogue_id=dialogue.id, results=tuple(results))


def write_reports(reports: Iterable[RuleReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(json.dumps(report.to_dict(), separators=(",", ":"), ensure_ascii=True))
            fh.write("\n")


def read_reports(path: str | Path) -> list[RuleReport]:
    reports = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                reports.append(RuleReport.from_dict(json.loads(line)))
    return reports
