"""Model-checker gating and the human-review queue.

A checker verdict (rationale, confidence, error tags) gates each dialogue:
confidence strictly above the threshold retains it, anything else joins
the review queue together with rule-checker failures.  Queue items carry a
priority (blocking problems first, then tool popularity) and move through
pending -> approved | revised | rejected, where a revised item needs a
second-pass approval before it is corpus-eligible.

Persistence is crash-safe: every mutation appends to a decision log, then
atomically replaces the queue snapshot; loading replays any log tail the
snapshot missed.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

from .backend import Backend, ChatMessage, GenerationRequest
from .dialogue import Dialogue, render_history
from .errors import (
    DomainError,
    InvalidTransition,
    MalformedVerdict,
    MissingPrerequisite,
    NotFound,
    SchemaError,
)
from .prompts import render_prompt
from .rules import RuleReport, run_all
from .tools import ToolSpec

THETA_DEFAULT = 0.75
ERROR_TAGS = ("tool_selection", "parameter_extraction", "intent", "faithfulness", "format", "other")
BLOCKING_TAGS = frozenset({"parameter_extraction", "format"})
BLOCKING_RULES = frozenset({"CF1", "CF2", "CF3"})


@dataclass(frozen=True)
class CheckerVerdict:
    rationale: str
    confidence: float
    error_tags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        for tag in self.error_tags:
            if tag not in ERROR_TAGS:
                raise ValueError(f"unknown error tag: {tag!r}")

    def to_dict(self) -> dict[str, Any]:
        return {"rationale": self.rationale, "confidence": self.confidence, "errors": list(self.error_tags)}

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "CheckerVerdict":
        return cls(
            rationale=raw.get("rationale", ""),
            confidence=raw["confidence"],
            error_tags=tuple(raw.get("errors", ())),
        )


class GateDecision(str, Enum):
    RETAIN = "retain"
    FLAG = "flag"


class ReviewStatus(str, Enum):
    PENDING = "pending"
    APPROVED = "approved"
    REVISED = "revised"
    REJECTED = "rejected"


def model_check(
    dialogue: Dialogue,
    tools: Iterable[ToolSpec],
    backend: Backend,
    prompt_dir: str | None = None,
) -> CheckerVerdict:
    """Ask the checker backend for a semantic verdict on one dialogue.

    The reply must be JSON {rationale, confidence, errors}; a malformed
    reply is retried once, then raises MalformedVerdict.
    """
    prompt = render_prompt(
        "model_checker",
        override_dir=prompt_dir,
        tools=json.dumps([t.to_dict() for t in tools], indent=2),
        dialogue=render_history(dialogue.turns),
    )
    request = GenerationRequest(
        messages=(ChatMessage(role="user", content=prompt),),
        temperature=0.0,
        max_tokens=512,
        tag="model_checker",
    )
    reply = ""
    for _ in range(2):
        reply = backend.complete(request).content
        verdict = _parse_verdict(reply)
        if verdict is not None:
            return verdict
    raise MalformedVerdict(f"checker reply is not a valid verdict: {reply!r}")


def _parse_verdict(reply: str) -> CheckerVerdict | None:
    try:
        obj = json.loads(reply.strip())
    except json.JSONDecodeError:
        return None
    if not isinstance(obj, dict):
        return None
    confidence = obj.get("confidence")
    if isinstance(confidence, bool) or not isinstance(confidence, (int, float)):
        return None
    errors = obj.get("errors", [])
    if not isinstance(errors, list) or not all(isinstance(e, str) for e in errors):
        return None
    try:
        return CheckerVerdict(
            rationale=str(obj.get("rationale", "")),
            confidence=float(confidence),
            error_tags=tuple(errors),
        )
    except ValueError:
        return None


def gate(verdict: CheckerVerdict, theta: float = THETA_DEFAULT) -> GateDecision:
    """Retain iff confidence is strictly above theta."""
    if not 0.0 <= theta <= 1.0:
        raise DomainError(f"theta {theta} outside [0, 1]")
    return GateDecision.RETAIN if verdict.confidence > theta else GateDecision.FLAG


@dataclass
class ReviewItem:
    id: str
    dialogue: Dialogue
    reasons: list[dict[str, Any]] = field(default_factory=list)
    priority: float = 0.0
    status: ReviewStatus = ReviewStatus.PENDING
    revision: Dialogue | None = None
    second_pass: bool = False

    @property
    def corpus_eligible(self) -> bool:
        return self.status is ReviewStatus.APPROVED or (
            self.status is ReviewStatus.REVISED and self.second_pass
        )

    @property
    def terminal(self) -> bool:
        return (
            self.status in (ReviewStatus.APPROVED, ReviewStatus.REJECTED)
            or (self.status is ReviewStatus.REVISED and self.second_pass)
        )

    def to_dict(self, include_revision: bool = True) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "dialogue": self.dialogue.to_dict(),
            "reasons": self.reasons,
            "priority": self.priority,
            "status": self.status.value,
            "second_pass": self.second_pass,
        }
        if include_revision:
            out["revision"] = self.revision.to_dict() if self.revision is not None else None
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ReviewItem":
        revision = raw.get("revision")
        return cls(
            id=raw["id"],
            dialogue=Dialogue.from_dict(raw["dialogue"]),
            reasons=list(raw.get("reasons", ())),
            priority=raw.get("priority", 0.0),
            status=ReviewStatus(raw.get("status", "pending")),
            revision=Dialogue.from_dict(revision) if revision else None,
            second_pass=raw.get("second_pass", False),
        )


@dataclass
class QueueState:
    items: dict[str, ReviewItem] = field(default_factory=dict)
    version: int = 0
    total_checked: int = 0

    def ordered(self, status: str | None = None) -> list[ReviewItem]:
        """Priority descending, then id ascending; optionally status-filtered."""
        items = [
            item
            for item in self.items.values()
            if status is None or item.status.value == status
        ]
        return sorted(items, key=lambda item: (-item.priority, item.id))

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": self.version,
            "total_checked": self.total_checked,
            "items": {item_id: self.items[item_id].to_dict() for item_id in sorted(self.items)},
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "QueueState":
        return cls(
            items={k: ReviewItem.from_dict(v) for k, v in raw.get("items", {}).items()},
            version=raw.get("version", 0),
            total_checked=raw.get("total_checked", 0),
        )


def usage_counts(dialogues: Iterable[Dialogue]) -> dict[str, int]:
    """How often each tool is called across a corpus."""
    counts: dict[str, int] = {}
    for dialogue in dialogues:
        for _, action in dialogue.call_actions():
            for call in action.calls:
                counts[call.name] = counts.get(call.name, 0) + 1
    return counts


def compute_priority(
    reasons: list[dict[str, Any]],
    dialogue: Dialogue,
    counts: dict[str, int],
) -> float:
    """2 * blocking + normalized usage of the dialogue's most-used tool.

    Blocking means a call-format rule failure or a parameter/format error
    tag from the checker.  Usage normalizes against the most-called tool
    in the corpus, so the component lies in [0, 1].
    """
    blocking = False
    for reason in reasons:
        if reason.get("kind") == "rule" and reason.get("rule") in BLOCKING_RULES:
            blocking = True
        if reason.get("kind") == "checker" and any(tag in BLOCKING_TAGS for tag in reason.get("errors", ())):
            blocking = True
    usage = 0.0
    if counts:
        peak = max(counts.values())
        called = [c.name for _, a in dialogue.call_actions() for c in a.calls]
        if called and peak > 0:
            usage = max(counts.get(name, 0) for name in called) / peak
    return 2.0 * blocking + usage


def build_queue(
    dialogues: list[Dialogue],
    reports: dict[str, RuleReport],
    verdicts: dict[str, CheckerVerdict],
    theta: float = THETA_DEFAULT,
) -> QueueState:
    """Flag every dialogue with rule failures or a sub-threshold verdict."""
    counts = usage_counts(dialogues)
    state = QueueState(total_checked=len(dialogues))
    for dialogue in dialogues:
        reasons: list[dict[str, Any]] = []
        report = reports.get(dialogue.id)
        if report is not None:
            for failure in report.failures():
                reasons.append(
                    {
                        "kind": "rule",
                        "rule": failure.rule.value,
                        "hint": failure.hint,
                        "location": failure.location,
                    }
                )
        verdict = verdicts.get(dialogue.id)
        if verdict is not None and gate(verdict, theta) is GateDecision.FLAG:
            reasons.append(
                {
                    "kind": "checker",
                    "confidence": verdict.confidence,
                    "errors": list(verdict.error_tags),
                    "rationale": verdict.rationale,
                }
            )
        if reasons:
            state.items[dialogue.id] = ReviewItem(
                id=dialogue.id,
                dialogue=dialogue,
                reasons=reasons,
                priority=compute_priority(reasons, dialogue, counts),
            )
    return state


DECISIONS = ("approve", "revise", "reject")


def apply_decision(
    state: QueueState,
    item_id: str,
    decision: str,
    reviewer: str,
    revision: Dialogue | None = None,
    max_turns: int = 18,
) -> QueueState:
    """One review decision; returns the updated state (input not mutated).

    Approve on pending marks the item corpus-eligible; revise stores a
    revision and re-runs the rule checker (failures keep the item pending
    with refreshed reasons); approve on a clean revision is a second pass.
    Terminal items reject all further decisions with InvalidTransition.
    """
    if decision not in DECISIONS:
        raise SchemaError(f"unknown decision {decision!r}")
    if not reviewer or not reviewer.strip():
        raise SchemaError("decision needs a non-empty reviewer")
    item = state.items.get(item_id)
    if item is None:
        raise NotFound(f"no review item with id '{item_id}'")
    if item.terminal:
        raise InvalidTransition(f"item '{item_id}' is {item.status.value} and closed to further decisions")

    updated = replace(item)
    if decision == "approve":
        if item.status is ReviewStatus.PENDING:
            updated.status = ReviewStatus.APPROVED
        else:  # revised awaiting second pass
            updated.second_pass = True
    elif decision == "reject":
        updated.status = ReviewStatus.REJECTED
    else:  # revise
        if revision is None:
            raise SchemaError("revise decision needs a revision payload")
        report = run_all(revision, max_turns=max_turns)
        updated.revision = revision
        if report.overall:
            updated.status = ReviewStatus.REVISED
            updated.second_pass = False
        else:
            updated.status = ReviewStatus.PENDING
            checker_reasons = [r for r in item.reasons if r.get("kind") == "checker"]
            rule_reasons = [
                {"kind": "rule", "rule": f.rule.value, "hint": f.hint, "location": f.location}
                for f in report.failures()
            ]
            updated.reasons = rule_reasons + checker_reasons

    new_items = dict(state.items)
    new_items[item_id] = updated
    return QueueState(items=new_items, version=state.version + 1, total_checked=state.total_checked)


def status_counts(state: QueueState) -> dict[str, Any]:
    counts = {status.value: 0 for status in ReviewStatus}
    for item in state.items.values():
        counts[item.status.value] += 1
    flag_rate = len(state.items) / state.total_checked if state.total_checked else 0.0
    return {**counts, "flag_rate": flag_rate}


def write_flagged(state: QueueState, path: str | Path) -> None:
    """Flagged-samples export: one item per line, without revisions."""
    with open(path, "w", encoding="utf-8") as fh:
        for item in state.ordered():
            fh.write(json.dumps(item.to_dict(include_revision=False), separators=(",", ":"), ensure_ascii=True))
            fh.write("\n")


class QueueStore:
    """Durable queue state: append-only decision log + atomic snapshot.

    Mutations append the decision (with its resulting version) to the log,
    fsync it, then atomically replace the snapshot.  ``load`` replays any
    log entries newer than the snapshot, so a crash between the two writes
    loses nothing.
    """

    def __init__(self, path: str | Path, log_path: str | Path | None = None):
        self.path = Path(path)
        self.log_path = Path(log_path) if log_path is not None else self.path.with_suffix(".log.jsonl")
        self._lock = threading.Lock()

    def initialize(self, state: QueueState) -> None:
        """Write a fresh snapshot and truncate the log."""
        with self._lock:
            self._write_snapshot(state)
            with open(self.log_path, "w", encoding="utf-8"):
                pass

    def load(self) -> QueueState:
        if not self.path.exists():
            raise MissingPrerequisite(f"queue snapshot {self.path} does not exist; run the gate stage first")
        state = QueueState.from_dict(json.loads(self.path.read_text(encoding="utf-8")))
        for entry in self._log_entries():
            if entry["version"] > state.version:
                revision = entry.get("revision")
                state = apply_decision(
                    state,
                    entry["id"],
                    entry["decision"],
                    entry["reviewer"],
                    revision=Dialogue.from_dict(revision) if revision else None,
                )
        return state

    def _log_entries(self) -> list[dict[str, Any]]:
        if not self.log_path.exists():
            return []
        entries = []
        with open(self.log_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    entries.append(json.loads(line))
                except json.JSONDecodeError:
                    break  # torn tail write from a crash; everything before it is intact
        return entries

    def _write_snapshot(self, state: QueueState) -> None:
        payload = json.dumps(state.to_dict(), separators=(",", ":"), ensure_ascii=True)
        fd, tmp_path = tempfile.mkstemp(dir=self.path.parent, prefix=self.path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(payload)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp_path, self.path)
        except BaseException:
            try:
                os.unlink(tmp_path)
            except OSError:
                pass
            raise

    def decide(
        self,
        state: QueueState,
        item_id: str,
        decision: str,
        reviewer: str,
        revision: Dialogue | None = None,
    ) -> QueueState:
        """Apply, log, snapshot — under the store lock."""
        with self._lock:
            new_state = apply_decision(state, item_id, decision, reviewer, revision=revision)
            entry: dict[str, Any] = {
                "version": new_state.version,
                "id": item_id,
                "decision": decision,
                "reviewer": reviewer,
                "at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            }
            if revision is not None:
                entry["revision"] = revision.to_dict()
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, separators=(",", ":"), ensure_ascii=True))
                fh.write("\n")
                fh.flush()
                os.fsync(fh.fileno())
            self._write_snapshot(new_state)
            return new_state
