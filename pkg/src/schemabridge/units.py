"""Unit conversions shared by the adapter interpreter and the rule-based fallback.

Every conversion is affine (value * scale + offset), with the scale kept as a
num/den ratio so that Celsius -> Fahrenheit evaluates as ``v * 9 / 5 + 32`` and
reproduces reference values (18.5 C -> 65.3 F) bit-exactly in IEEE 754.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping


class UnknownConversion(KeyError):
    """No registered conversion between the requested unit pair."""


KMH_PER_MPH_FACTOR = 0.621371
FT_PER_M_FACTOR = 3.28084


@dataclass(frozen=True)
class UnitConversion:
    """Affine conversion: value * scale_num / scale_den + offset."""

    from_unit: str
    to_unit: str
    scale_num: float
    scale_den: float = 1.0
    offset: float = 0.0

    def apply(self, value: float) -> float:
        return value * self.scale_num / self.scale_den + self.offset

    def inverted(self) -> "UnitConversion":
        # solve v' = v*n/d + o for v: (v' - o)*d/n, i.e. scale d/n, offset -o*d/n
        return UnitConversion(
            from_unit=self.to_unit,
            to_unit=self.from_unit,
            scale_num=self.scale_den,
            scale_den=self.scale_num,
            offset=-self.offset * self.scale_den / self.scale_num,
        )


_BUILTIN = (
    UnitConversion("celsius", "fahrenheit", 9.0, 5.0, 32.0),
    UnitConversion("kmh", "mph", KMH_PER_MPH_FACTOR),
    UnitConversion("m", "ft", FT_PER_M_FACTOR),
)

# aliases -> canonical unit name, used when units come from field-name suffixes
# or free-text schema annotations
UNIT_ALIASES: Mapping[str, str] = {
    "celsius": "celsius",
    "c": "celsius",
    "centigrade": "celsius",
    "fahrenheit": "fahrenheit",
    "f": "fahrenheit",
    "kmh": "kmh",
    "kph": "kmh",
    "mph": "mph",
    "m": "m",
    "meters": "m",
    "metres": "m",
    "ft": "ft",
    "feet": "ft",
    "percent": "percent",
    "pct": "percent",
}


def canonical_unit(name: str) -> str | None:
    """Map a unit spelling to its canonical name, or None if unrecognized."""
    cleaned = "".join(ch for ch in name.lower() if ch.isalnum())
    return UNIT_ALIASES.get(cleaned) if cleaned else None


class UnitRegistry:
    """Directed lookup of affine conversions; closed under inversion."""

    def __init__(self, extra: Iterable[UnitConversion] = ()):
        self._table: dict[tuple[str, str], UnitConversion] = {}
        for conv in (*_BUILTIN, *extra):
            self._add(conv)

    def _add(self, conv: UnitConversion) -> None:
        self._table[(conv.from_unit, conv.to_unit)] = conv
        inv = conv.inverted()
        self._table.setdefault((inv.from_unit, inv.to_unit), inv)

    def conversions(self) -> tuple[UnitConversion, ...]:
        return tuple(self._table.values())

    def knows(self, from_unit: str, to_unit: str) -> bool:
        return from_unit == to_unit or (from_unit, to_unit) in self._table

    def convert(self, value: float, from_unit: str, to_unit: str) -> float:
        if from_unit == to_unit:
            return value
        try:
            conv = self._table[(from_unit, to_unit)]
        except KeyError:
            raise UnknownConversion(f"{from_unit} -> {to_unit}") from None
        return conv.apply(value)


DEFAULT_REGISTRY = UnitRegistry()


def convert_unit(value: float, from_unit: str, to_unit: str,
                 registry: UnitRegistry = DEFAULT_REGISTRY) -> float:
    """Convert a value between two canonical units via the affine registry."""
    return registry.convert(value, from_unit, to_unit)


# plain function forms, exposed to the adapter expression language

def celsius_to_fahrenheit(value: float) -> float:
    return value * 9.0 / 5.0 + 32.0


def fahrenheit_to_celsius(value: float) -> float:
    return (value - 32.0) * 5.0 / 9.0


def kmh_to_mph(value: float) -> float:
    return value * KMH_PER_MPH_FACTOR


def mph_to_kmh(value: float) -> float:
    return value / KMH_PER_MPH_FACTOR


def m_to_ft(value: float) -> float:
    return value * FT_PER_M_FACTOR


def ft_to_m(value: float) -> float:
    return value / FT_PER_M_FACTOR
