"""Exact rational helpers shared by the checkers and the JSON reports."""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational


def as_fraction(value) -> Fraction:
    """Coerce ``value`` to a Fraction without passing through binary floats.

    Strings such as ``"9/20"`` or ``"0.45"`` are parsed exactly. Floats are
    converted through their shortest decimal repr, so ``0.45`` becomes 9/20.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"not a rational number: {value!r}") from None
    raise TypeError(f"cannot interpret {value!r} as a rational")


def epsilon(value, *, upper: Fraction = Fraction(1)) -> Fraction:
    eps = as_fraction(value)
    if not 0 < eps < upper:
        raise ValueError(f"epsilon must lie in (0, {upper}), got {eps}")
    return eps


def ceil_mul(q: Fraction, n: int) -> int:
    """Smallest integer >= q*n."""
    return -((-q.numerator * n) // q.denominator)


def fmt(q) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"
