"""Dataset export and corpus statistics.

Alpaca export emits one record per call supervision point: the
instruction packs the system preamble, the tool specifications, and the
conversation up to (excluding) the supervised assistant turn; the output
is the canonical JSON of that turn's calls.  Final answer turns become
additional records only when ``include_final_answers`` is set.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from .dialogue import Dialogue, render_history
from .errors import IoError, NoEligibleCalls, ParseError, SchemaError
from .prompts import load_prompt
from .tools import ToolCall

HISTOGRAM_BINS = 5
HISTOGRAM_SAMPLE = 400

# fine-tune settings emitted for downstream training runs
TRAIN_CONFIG: dict[str, Any] = {
    "learning_rate": 1e-4,
    "warmup_ratio": 0.1,
    "lr_scheduler": "cosine",
    "batch_size": 48,
    "epochs": 3,
    "lora_rank": 16,
    "lora_alpha": 32,
}


@dataclass(frozen=True)
class AlpacaRecord:
    instruction: str
    input: str
    output: str

    def to_dict(self) -> dict[str, str]:
        return {"instruction": self.instruction, "input": self.input, "output": self.output}


def _sorted_deep(value: Any) -> Any:
    """Recursively key-sort objects so serialization is canonical."""
    if isinstance(value, dict):
        return {k: _sorted_deep(value[k]) for k in sorted(value)}
    if isinstance(value, list):
        return [_sorted_deep(v) for v in value]
    return value


def calls_to_output(calls: Sequence[ToolCall]) -> str:
    """Canonical serialization of a call list: name first, sorted arguments."""
    payload = [{"name": c.name, "arguments": _sorted_deep(c.arguments)} for c in calls]
    return json.dumps(payload, separators=(",", ":"), ensure_ascii=True)


def output_to_calls(output: str) -> list[ToolCall]:
    try:
        raw = json.loads(output)
    except json.JSONDecodeError as exc:
        raise ParseError(f"record output is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise SchemaError("record output must be a JSON array of calls")
    return [ToolCall.from_dict(entry) for entry in raw]


def _instruction(dialogue: Dialogue, history: list, system_prompt: str) -> str:
    tools_json = json.dumps([t.to_dict() for t in dialogue.tools.all_tools()], separators=(",", ":"))
    conversation = render_history(history) if history else "(conversation opens here)"
    return f"{system_prompt}\n\nTools:\n{tools_json}\n\nConversation:\n{conversation}"


def export_alpaca(
    corpus: Iterable[Dialogue],
    system_prompt: str | None = None,
    include_final_answers: bool = False,
) -> list[AlpacaRecord]:
    """Supervision records for every call step (and optionally final answers)."""
    if system_prompt is None:
        system_prompt = load_prompt("alpaca_system").strip()
    records: list[AlpacaRecord] = []
    for dialogue in corpus:
        for index, turn in enumerate(dialogue.turns):
            if turn.role != "assistant" or turn.action is None:
                continue
            if turn.action.kind == "call":
                records.append(
                    AlpacaRecord(
                        instruction=_instruction(dialogue, dialogue.turns[:index], system_prompt),
                        input="",
                        output=calls_to_output(turn.action.calls),
                    )
                )
            elif (
                include_final_answers
                and turn.action.kind == "answer"
                and index == len(dialogue.turns) - 1
            ):
                records.append(
                    AlpacaRecord(
                        instruction=_instruction(dialogue, dialogue.turns[:index], system_prompt),
                        input="",
                        output=turn.action.text,
                    )
                )
    return records


def write_alpaca(records: Sequence[AlpacaRecord], path: str | Path) -> None:
    payload = json.dumps([r.to_dict() for r in records], indent=2, ensure_ascii=True)
    try:
        Path(path).write_text(payload + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_alpaca(path: str | Path) -> list[AlpacaRecord]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise SchemaError("records file must be a JSON array")
    out = []
    for entry in raw:
        if not isinstance(entry, dict) or not all(k in entry for k in ("instruction", "input", "output")):
            raise SchemaError("each record needs instruction, input, and output")
        out.append(AlpacaRecord(instruction=entry["instruction"], input=entry["input"], output=entry["output"]))
    return out


@dataclass(frozen=True)
class CorpusStats:
    """Counts by scenario category plus corpus-level averages.

    Averages use NaN to mean "no qualifying dialogues"; serialization maps
    that to null.  Tools per dialogue counts distinct called tools; turns
    count user + assistant turns (tool turns excluded); tasks come from
    the task metadata recorded at generation time.
    """

    n_total: int
    n_single: int
    n_multi: int
    n_special: int
    avg_tools_per_dialogue: float
    avg_turns_multi: float
    avg_tasks_multitask: float

    def to_dict(self) -> dict[str, Any]:
        def jsonable(value: float) -> float | None:
            return None if math.isnan(value) else value

        return {
            "n_total": self.n_total,
            "n_single": self.n_single,
            "n_multi": self.n_multi,
            "n_special": self.n_special,
            "avg_tools_per_dialogue": jsonable(self.avg_tools_per_dialogue),
            "avg_turns_multi": jsonable(self.avg_turns_multi),
            "avg_tasks_multitask": jsonable(self.avg_tasks_multitask),
        }


def compute_stats(corpus: Sequence[Dialogue]) -> CorpusStats:
    n_single = n_multi = n_special = 0
    tools_counts: list[int] = []
    multi_turns: list[int] = []
    task_counts: list[int] = []
    for dialogue in corpus:
        category = dialogue.scenario.category
        if category == "single":
            n_single += 1
        elif category == "multi":
            n_multi += 1
        else:
            n_special += 1
        called = {c.name for _, a in dialogue.call_actions() for c in a.calls}
        tools_counts.append(len(called))
        if category == "multi":
            multi_turns.append(sum(1 for t in dialogue.turns if t.role in ("user", "assistant")))
        if dialogue.scenario.multi_task:
            task_counts.append(int(dialogue.meta.get("tasks", 1)))

    def average(values: Sequence[float]) -> float:
        return math.fsum(values) / len(values) if values else math.nan

    return CorpusStats(
        n_total=len(corpus),
        n_single=n_single,
        n_multi=n_multi,
        n_special=n_special,
        avg_tools_per_dialogue=average(tools_counts),
        avg_turns_multi=average(multi_turns),
        avg_tasks_multitask=average(task_counts),
    )


def format_stats_table(stats: CorpusStats) -> str:
    """Fixed-width console rendering of the stats."""
    rows = [
        ("dialogues", f"{stats.n_total}"),
        ("single-turn", f"{stats.n_single}"),
        ("multi-turn", f"{stats.n_multi}"),
        ("special", f"{stats.n_special}"),
        ("avg tools/dialogue", _fmt(stats.avg_tools_per_dialogue)),
        ("avg turns (multi)", _fmt(stats.avg_turns_multi)),
        ("avg tasks (multi-task)", _fmt(stats.avg_tasks_multitask)),
    ]
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name:<{width}}  {value:>8}" for name, value in rows)


def _fmt(value: float) -> str:
    return "n/a" if math.isnan(value) else f"{value:.2f}"


@dataclass(frozen=True)
class SlotHistogram:
    """Optional-parameter fill ratios bucketed into five equal-width bins.

    Bin k covers [k/5, (k+1)/5), except the last bin which closes at 1.0.
    """

    counts: tuple[int, ...]
    sample_size: int

    def to_dict(self) -> dict[str, Any]:
        edges = [f"[{k / 5:.1f}, {(k + 1) / 5:.1f}{']' if k == 4 else ')'}" for k in range(HISTOGRAM_BINS)]
        return {"bins": dict(zip(edges, self.counts)), "sample_size": self.sample_size}


def slot_histogram(
    corpus: Sequence[Dialogue],
    sample_n: int = HISTOGRAM_SAMPLE,
    rng: random.Random | None = None,
) -> SlotHistogram:
    """Histogram of filled-optional ratios over sampled calls.

    Only calls to tools with at least one optional parameter participate.
    NoEligibleCalls is raised when the corpus has none.
    """
    eligible: list[tuple[int, int]] = []  # (filled optionals, total optionals)
    for dialogue in corpus:
        by_name = dialogue.tools.by_name()
        for _, action in dialogue.call_actions():
            for call in action.calls:
                tool = by_name.get(call.name)
                if tool is None:
                    continue
                optionals = tool.optional_params()
                if not optionals:
                    continue
                filled = sum(1 for p in optionals if p.name in call.arguments)
                eligible.append((filled, len(optionals)))
    if not eligible:
        raise NoEligibleCalls("no call targets a tool with optional parameters")
    if len(eligible) > sample_n:
        rng = rng or random.Random(0)
        eligible = rng.sample(eligible, sample_n)
    counts = [0] * HISTOGRAM_BINS
    for filled, total in eligible:
        # integer arithmetic: bin = floor(5 * ratio), full fill clamped into the last bin
        counts[min(HISTOGRAM_BINS * filled // total, HISTOGRAM_BINS - 1)] += 1
    return SlotHistogram(counts=tuple(counts), sample_size=len(eligible))


def emit_train_config(path: str | Path) -> None:
    """Write the fixed fine-tune settings as JSON."""
    payload = json.dumps(TRAIN_CONFIG, indent=2, ensure_ascii=True)
    try:
        Path(path).write_text(payload + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
