from __future__ import annotations

import json

import pytest
from hypothesis import given, settings, strategies as st

from schemabridge.bench.metrics import (
    compare_outputs,
    detection_prf,
    field_f1,
    value_accuracy,
)
from schemabridge.detect import Mismatch, MismatchReport
from schemabridge.model import Path, hash_pair, parse_schema


def _report(pairs):
    schema = parse_schema('{"type":"object","properties":{}}')
    mismatches = tuple(
        Mismatch(
            kind="type_mismatch",
            source_path=Path.parse(s) if s else None,
            target_path=Path.parse(t) if t else None,
        )
        for s, t in pairs
    )
    return MismatchReport(pair=hash_pair(schema, schema), mismatches=mismatches)


class TestCompareOutputs:
    def test_identical(self):
        doc = {"a": {"b": [1, 2.5, "x"]}, "c": True}
        assert compare_outputs(doc, doc, 0.01).passed

    def test_numeric_type_equivalence(self):
        assert compare_outputs({"h": 72}, {"h": 72.0}, 0.01).passed

    def test_tolerance_pass(self):
        assert compare_outputs({"w": 9.50698}, {"w": 9.51}, 0.01).passed

    def test_tolerance_fail(self):
        result = compare_outputs({"w": 9.50698}, {"w": 9.52}, 0.01)
        assert not result.passed and result.diffs

    def test_missing_key_diff_path(self):
        result = compare_outputs({"a": {"b": 1}}, {"a": {"b": 1, "c": 2}}, 0.01)
        assert not result.passed
        assert any("a.c" in d for d in result.diffs)

    def test_unexpected_key(self):
        assert not compare_outputs({"a": 1, "extra": 2}, {"a": 1}, 0.01).passed

    def test_string_vs_number(self):
        assert not compare_outputs({"a": "1"}, {"a": 1}, 0.01).passed

    def test_bool_is_not_number(self):
        assert not compare_outputs({"a": True}, {"a": 1}, 0.01).passed

    def test_array_length(self):
        assert not compare_outputs({"a": [1, 2]}, {"a": [1]}, 0.01).passed

    def test_array_elementwise_tolerance(self):
        assert compare_outputs({"a": [1.001, 2.0]}, {"a": [1.0, 2.0]}, 0.01).passed

    def test_diff_capped_at_twenty(self):
        actual = {f"k{i}": i for i in range(40)}
        golden = {f"k{i}": i + 1 for i in range(40)}
        result = compare_outputs(actual, golden, 0.0)
        assert len(result.diffs) == 20

    def test_epsilon_zero_exact(self):
        assert compare_outputs({"a": 1}, {"a": 1.0}, 0.0).passed
        assert not compare_outputs({"a": 1.0000001}, {"a": 1.0}, 0.0).passed

    def test_negative_epsilon_rejected(self):
        with pytest.raises(ValueError):
            compare_outputs({}, {}, -0.1)

    @given(st.recursive(
        st.one_of(st.integers(min_value=-9, max_value=9), st.text(max_size=4),
                  st.booleans(), st.none()),
        lambda c: st.one_of(st.lists(c, max_size=3),
                            st.dictionaries(st.sampled_from("abcd"), c, max_size=3)),
        max_leaves=8,
    ))
    @settings(max_examples=150)
    def test_property_reflexive(self, doc):
        assert compare_outputs(doc, doc, 0.0).passed

    @given(
        st.dictionaries(st.sampled_from("abcd"),
                        st.floats(allow_nan=False, allow_infinity=False,
                                  min_value=-100, max_value=100),
                        max_size=4),
        st.dictionaries(st.sampled_from("abcd"),
                        st.floats(allow_nan=False, allow_infinity=False,
                                  min_value=-100, max_value=100),
                        max_size=4),
    )
    @settings(max_examples=150)
    def test_property_symmetric(self, a, b):
        assert compare_outputs(a, b, 0.01).passed == compare_outputs(b, a, 0.01).passed


class TestFieldF1:
    def test_identical_key_sets(self):
        assert field_f1({"a": 1, "b": 2}, {"a": 9, "b": 8}) == 1.0

    def test_two_thirds(self):
        # A={a,b,c}, E={a,b,d}: P=2/3, R=2/3, F1=2/3
        assert field_f1({"a": 1, "b": 2, "c": 3},
                        {"a": 1, "b": 2, "d": 4}) == pytest.approx(2 / 3)

    def test_disjoint(self):
        assert field_f1({"a": 1}, {"b": 2}) == 0.0

    def test_empty_objects(self):
        assert field_f1({}, {}) == 1.0

    def test_nested_keys_are_dotted(self):
        assert field_f1({"m": {"x": 1}}, {"m": {"x": 5}}) == 1.0
        assert field_f1({"m": {"x": 1}}, {"x": 1}) == 0.0

    def test_key_reordering_invariance(self):
        a = {"a": 1, "b": {"c": 2, "d": 3}}
        shuffled = json.loads(json.dumps({"b": {"d": 3, "c": 2}, "a": 1}))
        golden = {"a": 0, "b": {"c": 0}}
        assert field_f1(a, golden) == field_f1(shuffled, golden)


class TestValueAccuracy:
    def test_all_match(self):
        assert value_accuracy({"a": 1, "b": "x"}, {"a": 1.0, "b": "x"}, 0.01) == 1.0

    def test_three_quarters(self):
        actual = {"a": 1.0, "b": 2.0, "c": 3.0, "d": 99.0}
        golden = {"a": 1.0, "b": 2.0, "c": 3.0, "d": 4.0}
        assert value_accuracy(actual, golden, 0.01) == 0.75

    def test_empty_intersection_is_one(self):
        assert value_accuracy({"a": 1}, {"b": 2}, 0.01) == 1.0

    def test_key_reordering_invariance(self):
        actual = {"x": 1, "y": {"z": 2}}
        golden = {"y": {"z": 2}, "x": 5}
        assert value_accuracy(actual, golden, 0.01) == 0.5


class TestDetectionPrf:
    def test_exact_match(self):
        pairs = [("a", "x"), ("b", "y")]
        assert detection_prf(_report(pairs), pairs) == (1.0, 1.0)

    def test_three_of_four(self):
        observed = _report([("a", "x"), ("b", "y"), ("c", "z"), ("d", "w")])
        expected = [("a", "x"), ("b", "y"), ("c", "z")]
        assert detection_prf(observed, expected) == (0.75, 1.0)

    def test_empty_observed(self):
        assert detection_prf(_report([]), [("a", "x"), ("b", "y")]) == (1.0, 0.0)

    def test_empty_expected(self):
        assert detection_prf(_report([("a", "x")]), []) == (0.0, 1.0)

    def test_kind_is_ignored(self):
        schema = parse_schema('{"type":"object","properties":{}}')
        observed = MismatchReport(pair=hash_pair(schema, schema), mismatches=(
            Mismatch(kind="naming_mismatch", origin="semantic",
                     source_path=Path.parse("a"), target_path=Path.parse("x")),
        ))
        assert detection_prf(observed, [("a", "x")]) == (1.0, 1.0)

    def test_one_sided_pairs(self):
        observed = _report([("comment", None), (None, "priority")])
        expected = [("comment", None), (None, "priority")]
        assert detection_prf(observed, expected) == (1.0, 1.0)
