"""Call validation: canonical values, number extraction, and schema checks."""

from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from funcforge.tools import ParamSpec, ToolCall, ToolSpec
from funcforge.validation import (
    NAME_PROBLEMS,
    PRESENCE_PROBLEMS,
    VALUE_PROBLEMS,
    canonical_number,
    canonical_value,
    extract_numbers,
    is_iso_date,
    scalar_strings,
    validate_call,
    values_match,
)


class TestIsoDate:
    @pytest.mark.parametrize("value", ["2024-05-01", "1999-12-31", "2000-02-29"])
    def test_valid(self, value):
        assert is_iso_date(value)

    @pytest.mark.parametrize(
        "value",
        ["2024-13-01", "2024-00-10", "2024-02-30", "2001-02-29", "24-05-01", "2024/05/01", "", 20240501, None],
    )
    def test_invalid(self, value):
        assert not is_iso_date(value)


class TestCanonicalValues:
    def test_numbers_compare_numerically(self):
        assert values_match(1, 1.0)
        assert values_match(21.5, 21.50)

    def test_bools_never_equal_numbers(self):
        assert not values_match(True, 1)
        assert not values_match(False, 0)
        assert values_match(True, True)

    def test_strings_trimmed(self):
        assert values_match(" paris ", "paris")
        assert not values_match("paris", "Paris")

    def test_containers_recursive_and_key_sorted(self):
        assert values_match({"b": [1, " x "], "a": 2}, {"a": 2.0, "b": [1.0, "x"]})
        assert not values_match([1, 2], [2, 1])

    def test_null(self):
        assert values_match(None, None)
        assert not values_match(None, 0)

    @given(st.recursive(
        st.none() | st.booleans() | st.integers(-1000, 1000) | st.floats(allow_nan=False, allow_infinity=False) | st.text(max_size=8),
        lambda children: st.lists(children, max_size=3) | st.dictionaries(st.text(max_size=4), children, max_size=3),
        max_leaves=8,
    ))
    def test_reflexive_and_hashable(self, value):
        assert values_match(value, value)
        hash(canonical_value(value))


class TestNumberForms:
    def test_trailing_zeros_trimmed(self):
        assert canonical_number(21.0) == "21"
        assert canonical_number(21.50) == "21.5"
        assert canonical_number(0.5) == "0.5"

    def test_extract_plain(self):
        assert extract_numbers("costs 12 euros and 3.5 cents") == {"12", "3.5"}

    def test_extract_negative(self):
        assert extract_numbers("delta is -4 today") == {"-4"}

    def test_dates_not_read_as_negatives(self):
        assert extract_numbers("on 2024-05-01 we met") == {"2024", "5", "1"}

    def test_thousands_separators(self):
        assert extract_numbers("total 1,250,300 units") == {"1250300"}

    def test_empty(self):
        assert extract_numbers("no digits here") == set()


class TestScalarStrings:
    def test_nested(self):
        value = {"a": 41, "b": ["ok", True, {"c": 2.50}]}
        assert scalar_strings(value) == {"41", "ok", "true", "2.5"}

    def test_blank_strings_dropped(self):
        assert scalar_strings({"a": "  ", "b": "x"}) == {"x"}


@pytest.fixture
def schema():
    tool = ToolSpec(
        name="metric_lookup",
        description="Fetch one metric value.",
        params=(
            ParamSpec(name="region", kind="string", required=True, pattern=r"[A-Z]{2}-\d+"),
            ParamSpec(name="metric", kind="string", required=True, enum=("population", "area")),
            ParamSpec(name="samples", kind="integer", required=False, minimum=1, maximum=10),
            ParamSpec(name="as_of", kind="string", required=False, format="date"),
        ),
    )
    return {tool.name: tool}


class TestValidateCall:
    def good(self):
        return ToolCall(
            name="metric_lookup",
            arguments={"region": "AL-7", "metric": "population", "samples": 3, "as_of": "2024-05-01"},
        )

    def test_valid_call_has_no_problems(self, schema):
        assert validate_call(self.good(), schema) == []

    def test_unknown_tool_short_circuits(self, schema):
        problems = validate_call(ToolCall(name="nope", arguments={"x": 1}), schema)
        assert [p.kind for p in problems] == ["unknown_tool"]

    def test_missing_required(self, schema):
        problems = validate_call(ToolCall(name="metric_lookup", arguments={"region": "AL-7"}), schema)
        assert {p.kind for p in problems} == {"missing_required"}

    def test_undeclared_param(self, schema):
        call = ToolCall(name="metric_lookup", arguments={**self.good().arguments, "verbose": True})
        assert {p.kind for p in validate_call(call, schema)} == {"unknown_param"}

    @pytest.mark.parametrize(
        "change, kind",
        [
            ({"samples": "three"}, "type"),
            ({"samples": True}, "type"),  # booleans are not integers
            ({"metric": "density"}, "enum"),
            ({"samples": 11}, "range"),
            ({"samples": 0}, "range"),
            ({"as_of": "2024-13-40"}, "format"),
            ({"region": "alpha"}, "pattern"),
        ],
    )
    def test_value_problems(self, schema, change, kind):
        call = ToolCall(name="metric_lookup", arguments={**self.good().arguments, **change})
        assert {p.kind for p in validate_call(call, schema)} == {kind}

    def test_type_problem_short_circuits_other_value_checks(self, schema):
        call = ToolCall(name="metric_lookup", arguments={**self.good().arguments, "metric": 7})
        kinds = [p.kind for p in validate_call(call, schema)]
        assert kinds == ["type"]

    def test_unflagged_params_not_required(self):
        tool = ToolSpec(name="t", description="d", params=(ParamSpec(name="p", kind="string"),))
        assert validate_call(ToolCall(name="t", arguments={}), {"t": tool}) == []

    def test_problem_kind_groups_are_disjoint(self):
        assert not (NAME_PROBLEMS & PRESENCE_PROBLEMS)
        assert not (NAME_PROBLEMS & VALUE_PROBLEMS)
        assert not (PRESENCE_PROBLEMS & VALUE_PROBLEMS)
