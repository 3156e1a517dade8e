"""Exact time values.

All times are :class:`fractions.Fraction` in model units.  Files carry them
as decimal strings, optionally with a unit suffix that is converted through
the model's time unit (how many seconds one model unit lasts).
"""

from __future__ import annotations

import re
from fractions import Fraction

Time = Fraction

ZERO = Fraction(0)

_SUFFIX_SECONDS = {
    "s": Fraction(1),
    "ms": Fraction(1, 1000),
    "us": Fraction(1, 1_000_000),
    "ns": Fraction(1, 1_000_000_000),
}

_TIME_RE = re.compile(r"^\s*([+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:/\d+)?)\s*([a-z]*)\s*$")

DEFAULT_TIME_UNIT = Fraction(1, 1000)


class TimeFormatError(ValueError):
    pass


def parse_time(value, unit: Fraction = DEFAULT_TIME_UNIT) -> Fraction:
    """Parse ``value`` into model units.

    ``"1.6ms"`` with a 1 ms model unit gives ``Fraction(8, 5)``; a bare
    ``"3"`` is three model units.  Integers and Fractions pass through;
    floats go through their shortest repr so ``0.1`` is exactly 1/10.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TimeFormatError(f"not a time value: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if not isinstance(value, str):
        raise TimeFormatError(f"not a time value: {value!r}")
    m = _TIME_RE.match(value)
    if m is None:
        raise TimeFormatError(f"malformed time value: {value!r}")
    number, suffix = m.groups()
    amount = Fraction(number)
    if not suffix:
        return amount
    if suffix not in _SUFFIX_SECONDS:
        raise TimeFormatError(f"unknown time unit {suffix!r} in {value!r}")
    return amount * _SUFFIX_SECONDS[suffix] / unit


def parse_unit(value) -> Fraction:
    """Parse a model-unit declaration such as ``"1ms"`` into seconds."""
    seconds = parse_time(value, unit=Fraction(1))
    if seconds <= 0:
        raise TimeFormatError(f"time unit must be positive: {value!r}")
    return seconds


def format_time(t: Fraction) -> str:
    """Exact decimal string when one exists, ``"p/q"`` otherwise."""
    t = Fraction(t)
    den = t.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{t.numerator}/{t.denominator}"
    digits = max(twos, fives)
    if digits == 0:
        return str(t.numerator)
    scaled = t * 10**digits
    assert scaled.denominator == 1
    sign = "-" if scaled < 0 else ""
    text = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    return f"{sign}{text[:-digits]}.{text[-digits:]}"
