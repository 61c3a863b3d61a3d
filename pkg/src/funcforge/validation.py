"""Schema validation for tool calls, shared by the rule checker, the
function agent's repair loop, and the structural reward.

All three consumers judge a call against the same predicate so a call that
survives generation is valid by construction everywhere downstream.
"""

from __future__ import annotations

import datetime
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, typing only
    from .tools import ParamSpec, ToolCall, ToolSpec

_ISO_DATE = re.compile(r"\d{4}-\d{2}-\d{2}")

# kinds of problem a call can exhibit, grouped the way the rule checker
# reports them: name resolution / parameter presence / value constraints
NAME_PROBLEMS = frozenset({"unknown_tool"})
PRESENCE_PROBLEMS = frozenset({"missing_required", "unknown_param"})
VALUE_PROBLEMS = frozenset({"type", "enum", "range", "format", "pattern"})


@dataclass(frozen=True)
class CallProblem:
    kind: str
    message: str


def is_iso_date(value: Any) -> bool:
    """True when value is a YYYY-MM-DD string naming a real calendar date."""
    if not isinstance(value, str) or _ISO_DATE.fullmatch(value) is None:
        return False
    year, month, day = (int(part) for part in value.split("-"))
    try:
        datetime.date(year, month, day)
    except ValueError:
        return False
    return True


def canonical_value(value: Any) -> Any:
    """Hashable canonical form used for parameter equality.

    Numbers compare numerically (1 == 1.0) but never equal booleans;
    strings compare trimmed; containers canonicalize recursively with
    object keys sorted.
    """
    if isinstance(value, bool):
        return ("bool", value)
    if isinstance(value, (int, float)):
        return ("num", float(value))
    if isinstance(value, str):
        return ("str", value.strip())
    if isinstance(value, list):
        return ("arr", tuple(canonical_value(v) for v in value))
    if isinstance(value, dict):
        return ("obj", tuple(sorted((k, canonical_value(v)) for k, v in value.items())))
    return ("null", None)


def values_match(a: Any, b: Any) -> bool:
    return canonical_value(a) == canonical_value(b)


def canonical_number(value: float) -> str:
    """Render a number without trailing zeros: 21.0 -> "21", 21.50 -> "21.5"."""
    text = repr(float(value))
    if text.endswith(".0"):
        return text[:-2]
    return text


def scalar_strings(value: Any) -> set[str]:
    """Canonical string forms of every scalar leaf of a JSON value."""
    out: set[str] = set()
    if isinstance(value, bool):
        out.add("true" if value else "false")
    elif isinstance(value, (int, float)):
        out.add(canonical_number(value))
    elif isinstance(value, str):
        stripped = value.strip()
        if stripped:
            out.add(stripped)
    elif isinstance(value, list):
        for item in value:
            out |= scalar_strings(item)
    elif isinstance(value, dict):
        for item in value.values():
            out |= scalar_strings(item)
    return out


# a leading minus counts only when not glued to a word character, so date
# and range spellings like 2024-05-01 read as {2024, 5, 1}, not negatives
_NUMBER_RE = re.compile(r"(?<![\w.])-?\d+(?:\.\d+)?")


def extract_numbers(text: str) -> set[str]:
    """Canonical forms of every number literal appearing in free text."""
    cleaned = re.sub(r"(?<=\d),(?=\d{3}\b)", "", text)
    return {canonical_number(float(m)) for m in _NUMBER_RE.findall(cleaned)}


def _type_ok(kind: str, value: Any) -> bool:
    if kind == "string":
        return isinstance(value, str)
    if kind == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "boolean":
        return isinstance(value, bool)
    if kind == "array":
        return isinstance(value, list)
    if kind == "object":
        return isinstance(value, dict)
    return True  # unknown kinds are the tool definition checker's problem


def _check_value(param: "ParamSpec", value: Any) -> list[CallProblem]:
    problems: list[CallProblem] = []
    name = param.name
    if param.kind is not None and not _type_ok(param.kind, value):
        problems.append(
            CallProblem("type", f"parameter '{name}' expects {param.kind}, got {type(value).__name__}")
        )
        return problems
    if param.enum is not None and value not in param.enum:
        problems.append(CallProblem("enum", f"parameter '{name}' value {value!r} not in enum {param.enum}"))
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if param.minimum is not None and value < param.minimum:
            problems.append(CallProblem("range", f"parameter '{name}' value {value} below minimum {param.minimum}"))
        if param.maximum is not None and value > param.maximum:
            problems.append(CallProblem("range", f"parameter '{name}' value {value} above maximum {param.maximum}"))
    if param.format == "date" and not is_iso_date(value):
        problems.append(CallProblem("format", f"parameter '{name}' value {value!r} is not a valid YYYY-MM-DD date"))
    if param.pattern is not None and isinstance(value, str) and re.fullmatch(param.pattern, value) is None:
        problems.append(CallProblem("pattern", f"parameter '{name}' value {value!r} does not match /{param.pattern}/"))
    return problems


def validate_call(call: "ToolCall", tools_by_name: dict[str, "ToolSpec"]) -> list[CallProblem]:
    """All problems with one call against the given tool schemas.

    An unknown tool short-circuits: parameter checks need a schema.
    """
    tool = tools_by_name.get(call.name)
    if tool is None:
        return [CallProblem("unknown_tool", f"call names unknown tool '{call.name}'")]
    problems: list[CallProblem] = []
    params = {p.name: p for p in tool.params}
    for param in tool.params:
        if param.required and param.name not in call.arguments:
            problems.append(
                CallProblem("missing_required", f"call to '{call.name}' omits required parameter '{param.name}'")
            )
    for arg_name in call.arguments:
        if arg_name not in params:
            problems.append(
                CallProblem("unknown_param", f"call to '{call.name}' passes undeclared parameter '{arg_name}'")
            )
    for arg_name, value in call.arguments.items():
        if arg_name in params:
            problems.extend(_check_value(params[arg_name], value))
    return problems
