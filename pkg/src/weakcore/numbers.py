"""Rational/float helpers.

Payoffs are either exact (``fractions.Fraction``) or floats. Exact values
are compared exactly; floats use the tolerance ``TAU``.
"""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational

TAU = 1e-9


def as_fraction(x) -> Fraction:
    """Coerce ints, Fractions, ``"p/q"`` strings and floats to a Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as a rational")


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def strictly_positive(x, exact: bool) -> bool:
    """``x > 0`` exactly, or ``x > TAU`` for float arithmetic."""
    return x > 0 if exact else x > TAU


def nonnegative(x, exact: bool) -> bool:
    return x >= 0 if exact else x >= -TAU


def to_json_number(x):
    """Rationals become ``"p/q"`` strings, floats stay floats."""
    if isinstance(x, bool):
        return x
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, int):
        return str(x)
    if hasattr(x, "item"):  # numpy scalar
        return to_json_number(x.item())
    return float(x)


def from_json_number(x):
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, int):
        return Fraction(x)
    return float(x)
