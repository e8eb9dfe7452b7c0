from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from schemabridge.units import (
    DEFAULT_REGISTRY,
    UnitConversion,
    UnitRegistry,
    UnknownConversion,
    canonical_unit,
    celsius_to_fahrenheit,
    convert_unit,
    fahrenheit_to_celsius,
    ft_to_m,
    kmh_to_mph,
    m_to_ft,
    mph_to_kmh,
)


class TestConvertUnit:
    def test_reference_temperature_exact(self):
        assert convert_unit(18.5, "celsius", "fahrenheit") == 65.3

    def test_freezing_point_exact(self):
        assert convert_unit(0, "celsius", "fahrenheit") == 32.0

    def test_wind_speed(self):
        assert convert_unit(15.3, "kmh", "mph") == pytest.approx(9.50698, abs=1e-5)

    def test_same_unit_is_identity(self):
        assert convert_unit(42.0, "celsius", "celsius") == 42.0

    def test_unknown_pair(self):
        with pytest.raises(UnknownConversion):
            convert_unit(1.0, "celsius", "mph")

    def test_registry_contains_inverses(self):
        pairs = {(c.from_unit, c.to_unit) for c in DEFAULT_REGISTRY.conversions()}
        for from_unit, to_unit in list(pairs):
            assert (to_unit, from_unit) in pairs

    def test_extension_with_inverse(self):
        registry = UnitRegistry(extra=(UnitConversion("bar", "psi", 14.503773773),))
        assert registry.convert(2.0, "bar", "psi") == pytest.approx(29.007547546)
        assert registry.convert(29.007547546, "psi", "bar") == pytest.approx(2.0)


class TestRoundTrips:
    @given(st.floats(min_value=-100, max_value=100, allow_nan=False))
    @settings(max_examples=300)
    def test_temperature_round_trip(self, x):
        assert fahrenheit_to_celsius(celsius_to_fahrenheit(x)) == pytest.approx(x, abs=1e-9)

    @given(st.floats(min_value=-100, max_value=100, allow_nan=False))
    @settings(max_examples=300)
    def test_speed_round_trip(self, x):
        assert mph_to_kmh(kmh_to_mph(x)) == pytest.approx(x, abs=1e-9)

    @given(st.floats(min_value=-100, max_value=100, allow_nan=False))
    @settings(max_examples=300)
    def test_distance_round_trip(self, x):
        assert ft_to_m(m_to_ft(x)) == pytest.approx(x, abs=1e-9)

    @given(st.floats(min_value=-100, max_value=100, allow_nan=False))
    @settings(max_examples=200)
    def test_registry_round_trip(self, x):
        for from_unit, to_unit in (("celsius", "fahrenheit"), ("kmh", "mph"), ("m", "ft")):
            there = convert_unit(x, from_unit, to_unit)
            assert convert_unit(there, to_unit, from_unit) == pytest.approx(x, abs=1e-9)


class TestCanonicalUnit:
    @pytest.mark.parametrize("spelling,expected", [
        ("celsius", "celsius"),
        ("C", "celsius"),
        ("km/h", "kmh"),
        ("kph", "kmh"),
        ("Meters", "m"),
        ("feet", "ft"),
        ("pct", "percent"),
        ("furlongs", None),
        ("", None),
    ])
    def test_aliases(self, spelling, expected):
        assert canonical_unit(spelling) == expected
