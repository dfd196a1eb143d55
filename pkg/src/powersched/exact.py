"""Exact arithmetic: rationals plus quadratic surds a + b*sqrt(n).

The unit-job policy uses lambda = 4 - sqrt(10).  Every place lambda is used
(anchors, per-interval bounds) is affine in lambda, so a tiny surd type keeps all
comparisons exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Union


def _sign(x: Fraction) -> int:
    return (x > 0) - (x < 0)


@dataclass(frozen=True)
class Surd:
    """The real number ``a + b * sqrt(n)`` with rational a, b and integer n >= 0."""

    a: Fraction
    b: Fraction
    n: int

    def __post_init__(self):
        object.__setattr__(self, "a", Fraction(self.a))
        object.__setattr__(self, "b", Fraction(self.b))
        if self.n < 0:
            raise ValueError("negative radicand")

    # -- construction helpers -------------------------------------------------
    def _lift(self, other) -> "Surd":
        if isinstance(other, Surd):
            if other.n != self.n and other.b != 0 and self.b != 0:
                raise ValueError("mixed radicands")
            return other
        if isinstance(other, (int, Rational)):
            return Surd(Fraction(other), Fraction(0), self.n)
        raise TypeError(f"cannot combine Surd with {type(other).__name__}")

    def _radicand(self, other: "Surd") -> int:
        return self.n if self.b != 0 else other.n

    # -- arithmetic -----------------------------------------------------------
    def __add__(self, other):
        try:
            o = self._lift(other)
        except TypeError:
            return NotImplemented
        return Surd(self.a + o.a, self.b + o.b, self._radicand(o))

    __radd__ = __add__

    def __neg__(self):
        return Surd(-self.a, -self.b, self.n)

    def __sub__(self, other):
        try:
            o = self._lift(other)
        except TypeError:
            return NotImplemented
        return Surd(self.a - o.a, self.b - o.b, self._radicand(o))

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, (int, Rational)):
            f = Fraction(other)
            return Surd(self.a * f, self.b * f, self.n)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Rational)):
            f = Fraction(other)
            return Surd(self.a / f, self.b / f, self.n)
        return NotImplemented

    # -- ordering -------------------------------------------------------------
    def sign(self) -> int:
        sa, sb = _sign(self.a), _sign(self.b)
        if sb == 0 or self.n == 0:
            return sa
        if sa >= 0 and sb >= 0:
            return 1
        if sa <= 0 and sb <= 0:
            return -1
        # opposite signs: compare a^2 with b^2 n
        lhs, rhs = self.a * self.a, self.b * self.b * self.n
        if lhs == rhs:
            return 0
        return sa if lhs > rhs else sb

    def _cmp(self, other):
        try:
            return (self - other).sign()
        except (TypeError, ValueError):
            return NotImplemented

    def __lt__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c < 0

    def __le__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c <= 0

    def __gt__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c > 0

    def __ge__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c >= 0

    def __eq__(self, other):
        c = self._cmp(other)
        return False if c is NotImplemented else c == 0

    def __hash__(self):
        return hash((self.a, self.b, self.n))

    def __float__(self):
        return float(self.a) + float(self.b) * math.sqrt(self.n)

    def __floor__(self) -> int:
        k = math.floor(float(self))
        while self < k:
            k -= 1
        while self >= k + 1:
            k += 1
        return k

    def __ceil__(self) -> int:
        return -math.floor(-self)

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        sign = "+" if self.b > 0 else "-"
        coef = abs(self.b)
        coef_s = "" if coef == 1 else f"{coef}*"
        head = "" if self.a == 0 else str(self.a)
        return f"{head}{sign}{coef_s}sqrt({self.n})"


Exact = Union[Fraction, Surd]

LAMBDA_UNIT = Surd(4, -1, 10)  # 4 - sqrt(10), the unit-job choice
LAMBDA_MIN = Surd(2, -1, 3)  # 2 - sqrt(3), smallest lambda with the factor-(5 - lambda) guarantee

_SURD_RE = re.compile(
    r"^\s*(?P<a>[-+]?\d+(?:/\d+|\.\d+)?)?\s*(?P<sign>[-+])\s*"
    r"(?:(?P<b>\d+(?:/\d+|\.\d+)?)\s*\*\s*)?sqrt\(\s*(?P<n>\d+)\s*\)\s*$"
)


def parse_rational(text) -> Fraction:
    """Parse ``"7"``, ``"7/2"`` or ``"0.1218"`` into an exact Fraction."""
    if isinstance(text, (int, Rational)):
        return Fraction(text)
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational: {text!r}") from exc


def parse_exact(text) -> Exact:
    """Like :func:`parse_rational` but also accepts ``"4-sqrt(10)"`` style surds."""
    if isinstance(text, Surd):
        return text
    try:
        return parse_rational(text)
    except ValueError:
        pass
    m = _SURD_RE.match(str(text))
    if not m:
        raise ValueError(f"not a rational or surd: {text!r}")
    a = Fraction(m["a"]) if m["a"] else Fraction(0)
    b = Fraction(m["b"]) if m["b"] else Fraction(1)
    if m["sign"] == "-":
        b = -b
    return Surd(a, b, int(m["n"]))


def fmt(x) -> str:
    """Stable text form for exact values (used in JSON/CSV output)."""
    if isinstance(x, Fraction) and x.denominator == 1:
        return str(x.numerator)
    return str(x)
