"""Rendering helpers for exact rationals."""

from __future__ import annotations

from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction


def as_fraction_str(x: Fraction) -> str:
    """``num/den`` with an explicit denominator, even for integers."""
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_fraction(text: str) -> Fraction:
    return Fraction(text.strip())


def as_decimal_str(x: Fraction, places: int = 4) -> str:
    """Round-half-even decimal rendering, independent of float behaviour."""
    x = Fraction(x)
    with localcontext() as ctx:
        ctx.prec = 60
        value = Decimal(x.numerator) / Decimal(x.denominator)
        q = Decimal(1).scaleb(-places)
        return str(value.quantize(q, rounding=ROUND_HALF_EVEN))
