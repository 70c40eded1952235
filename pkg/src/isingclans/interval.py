"""Closed real intervals with outward rounding.

Every arithmetic result is widened by one ulp in each direction, which
covers the round-to-nearest error of a single IEEE operation (and the
faithful-rounding error of libm's exp/log).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_DOWN = -math.inf
_UP = math.inf


def _dn(x: float) -> float:
    return math.nextafter(x, _DOWN)


def _up(x: float) -> float:
    return math.nextafter(x, _UP)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x: float) -> "Interval":
        x = float(x)
        return cls(x, x)

    @classmethod
    def coerce(cls, x) -> "Interval":
        if isinstance(x, Interval):
            return x
        if isinstance(x, (tuple, list)):
            return cls(float(x[0]), float(x[1]))
        return cls.point(x)

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def encloses(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def __add__(self, other) -> "Interval":
        o = Interval.coerce(other)
        return Interval(_dn(self.lo + o.lo), _up(self.hi + o.hi))

    __radd__ = __add__

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other) -> "Interval":
        o = Interval.coerce(other)
        return Interval(_dn(self.lo - o.hi), _up(self.hi - o.lo))

    def __rsub__(self, other) -> "Interval":
        return Interval.coerce(other) - self

    def __mul__(self, other) -> "Interval":
        o = Interval.coerce(other)
        ps = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return Interval(_dn(min(ps)), _up(max(ps)))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Interval":
        o = Interval.coerce(other)
        if o.lo <= 0.0 <= o.hi:
            raise ZeroDivisionError(f"interval division by {o}")
        qs = (self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi)
        return Interval(_dn(min(qs)), _up(max(qs)))

    def __rtruediv__(self, other) -> "Interval":
        return Interval.coerce(other) / self

    def __pow__(self, n: int) -> "Interval":
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = Interval.point(1.0)
        base = self
        # repeated squaring keeps the rounding error count logarithmic
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base.sqr()
        return out

    def sqr(self) -> "Interval":
        if self.lo >= 0:
            return Interval(_dn(self.lo * self.lo), _up(self.hi * self.hi))
        if self.hi <= 0:
            return Interval(_dn(self.hi * self.hi), _up(self.lo * self.lo))
        return Interval(0.0, _up(max(self.lo * self.lo, self.hi * self.hi)))

    def exp(self) -> "Interval":
        return Interval(max(0.0, _dn(_exp(self.lo))), _up(_exp(self.hi)))

    def log(self) -> "Interval":
        if self.lo <= 0:
            raise ValueError(f"log of non-positive interval {self}")
        return Interval(_dn(math.log(self.lo)), _up(math.log(self.hi)))

    def __repr__(self) -> str:
        return f"[{self.lo!r}, {self.hi!r}]"

    def as_list(self) -> list[float]:
        return [self.lo, self.hi]


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def ipow(x: Interval, y: Interval) -> Interval:
    """x ** y for positive x via exp(y log x)."""
    return (y * x.log()).exp()
