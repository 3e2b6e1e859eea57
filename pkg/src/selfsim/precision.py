"""Outward-rounded interval arithmetic and exact angle bookkeeping.

Interval endpoints are gmpy2 ``mpfr`` values computed under directed-rounding
contexts, so every operation returns an enclosure of the exact real result.
Angles are kept exact as ``coeff * pi + remainder`` with rational ``coeff``
and ``remainder``, and are only widened to intervals at evaluation time.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import isqrt
from typing import Iterator, Union

import gmpy2

from .errors import NegativeRadicand, PartialDomainWarning

DEFAULT_BITS = 256

Rational = Union[int, Fraction]


@lru_cache(maxsize=None)
def _ctx_down(bits: int):
    return gmpy2.context(precision=bits, round=gmpy2.RoundDown)


@lru_cache(maxsize=None)
def _ctx_up(bits: int):
    return gmpy2.context(precision=bits, round=gmpy2.RoundUp)


def _to_mpq(value: Rational):
    if isinstance(value, Fraction):
        return gmpy2.mpq(value.numerator, value.denominator)
    if isinstance(value, int):
        return gmpy2.mpq(value)
    raise TypeError(f"exact rational required, got {type(value).__name__}")


def _to_fraction(x) -> Fraction:
    q = gmpy2.mpq(x)
    return Fraction(int(q.numerator), int(q.denominator))


class Ordering(enum.Enum):
    """Outcome of comparing two intervals."""

    LESS = "less"
    GREATER = "greater"
    OVERLAP = "overlap"


@dataclass(frozen=True, slots=True)
class CertInterval:
    """Closed interval [lo, hi] guaranteed to contain the exact value.

    ``bits`` records the working precision; binary operations run at the
    larger of the operands' precisions.
    """

    lo: object
    hi: object
    bits: int = DEFAULT_BITS

    def __post_init__(self):
        if gmpy2.is_nan(self.lo) or gmpy2.is_nan(self.hi) or self.lo > self.hi:
            raise ValueError(f"invalid interval endpoints [{self.lo}, {self.hi}]")

    @classmethod
    def from_rational(cls, value: Rational, bits: int = DEFAULT_BITS) -> "CertInterval":
        q = _to_mpq(value)
        with _ctx_down(bits):
            lo = gmpy2.mpfr(q)
        with _ctx_up(bits):
            hi = gmpy2.mpfr(q)
        return cls(lo, hi, bits)

    @classmethod
    def from_endpoints(cls, lo: Rational, hi: Rational, bits: int = DEFAULT_BITS) -> "CertInterval":
        ql, qh = _to_mpq(lo), _to_mpq(hi)
        if ql > qh:
            raise ValueError("lo must not exceed hi")
        with _ctx_down(bits):
            l = gmpy2.mpfr(ql)
        with _ctx_up(bits):
            h = gmpy2.mpfr(qh)
        return cls(l, h, bits)

    def _coerce(self, other, bits: int) -> "CertInterval":
        if isinstance(other, CertInterval):
            return other
        return CertInterval.from_rational(other, bits)

    def _bits_with(self, other) -> int:
        return max(self.bits, other.bits) if isinstance(other, CertInterval) else self.bits

    def __add__(self, other) -> "CertInterval":
        bits = self._bits_with(other)
        o = self._coerce(other, bits)
        with _ctx_down(bits):
            lo = gmpy2.add(self.lo, o.lo)
        with _ctx_up(bits):
            hi = gmpy2.add(self.hi, o.hi)
        return CertInterval(lo, hi, bits)

    __radd__ = __add__

    def __neg__(self) -> "CertInterval":
        # sign flip is exact at any precision
        return CertInterval(-self.hi, -self.lo, self.bits)

    def __sub__(self, other) -> "CertInterval":
        bits = self._bits_with(other)
        o = self._coerce(other, bits)
        with _ctx_down(bits):
            lo = gmpy2.sub(self.lo, o.hi)
        with _ctx_up(bits):
            hi = gmpy2.sub(self.hi, o.lo)
        return CertInterval(lo, hi, bits)

    def __rsub__(self, other) -> "CertInterval":
        return (-self) + other

    def __mul__(self, other) -> "CertInterval":
        bits = self._bits_with(other)
        o = self._coerce(other, bits)
        pairs = ((self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi))
        with _ctx_down(bits):
            lo = min(gmpy2.mul(a, b) for a, b in pairs)
        with _ctx_up(bits):
            hi = max(gmpy2.mul(a, b) for a, b in pairs)
        return CertInterval(lo, hi, bits)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "CertInterval":
        bits = self._bits_with(other)
        o = self._coerce(other, bits)
        if o.contains_zero():
            raise ZeroDivisionError("divisor interval contains zero")
        pairs = ((self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi))
        with _ctx_down(bits):
            lo = min(gmpy2.div(a, b) for a, b in pairs)
        with _ctx_up(bits):
            hi = max(gmpy2.div(a, b) for a, b in pairs)
        return CertInterval(lo, hi, bits)

    def __rtruediv__(self, other) -> "CertInterval":
        return CertInterval.from_rational(other, self.bits) / self

    def __abs__(self) -> "CertInterval":
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return CertInterval(gmpy2.mpfr(0), max(-self.lo, self.hi), self.bits)

    def square(self) -> "CertInterval":
        """Tight enclosure of x**2; lower end is exactly 0 across a sign change."""
        bits = self.bits
        with _ctx_down(bits):
            if self.contains_zero():
                lo = gmpy2.mpfr(0)
            else:
                lo = min(gmpy2.mul(self.lo, self.lo), gmpy2.mul(self.hi, self.hi))
        with _ctx_up(bits):
            hi = max(gmpy2.mul(self.lo, self.lo), gmpy2.mul(self.hi, self.hi))
        return CertInterval(lo, hi, bits)

    def sqrt(self) -> "CertInterval":
        """Certified square root; clamps a partially negative domain at zero."""
        if self.hi < 0:
            raise NegativeRadicand(f"interval [{self.lo}, {self.hi}] is entirely negative")
        bits = self.bits
        lo_arg = self.lo
        if self.lo < 0:
            warnings.warn("radicand interval clipped at zero", PartialDomainWarning, stacklevel=2)
            lo_arg = gmpy2.mpfr(0)
        with _ctx_down(bits):
            lo = gmpy2.sqrt(lo_arg)
        with _ctx_up(bits):
            hi = gmpy2.sqrt(self.hi)
        return CertInterval(lo, hi, bits)

    def contains_zero(self) -> bool:
        return self.lo <= 0 <= self.hi

    def contains(self, value: Rational) -> bool:
        q = _to_mpq(value)
        return self.lo <= q <= self.hi

    def compare(self, other) -> Ordering:
        o = self._coerce(other, self.bits)
        if self.hi < o.lo:
            return Ordering.LESS
        if self.lo > o.hi:
            return Ordering.GREATER
        return Ordering.OVERLAP

    def definitely_less(self, other) -> bool:
        return self.compare(other) is Ordering.LESS

    def definitely_greater(self, other) -> bool:
        return self.compare(other) is Ordering.GREATER

    def hull(self, other: "CertInterval") -> "CertInterval":
        bits = max(self.bits, other.bits)
        return CertInterval(min(self.lo, other.lo), max(self.hi, other.hi), bits)

    def widen(self, pad: "CertInterval") -> "CertInterval":
        """Expand both ends outward by the upper bound of ``pad`` (pad >= 0)."""
        bits = max(self.bits, pad.bits)
        with _ctx_down(bits):
            lo = gmpy2.sub(self.lo, pad.hi)
        with _ctx_up(bits):
            hi = gmpy2.add(self.hi, pad.hi)
        return CertInterval(lo, hi, bits)

    def to_fractions(self) -> tuple[Fraction, Fraction]:
        return _to_fraction(self.lo), _to_fraction(self.hi)

    def width(self) -> Fraction:
        lo, hi = self.to_fractions()
        return hi - lo

    def midpoint(self) -> Fraction:
        lo, hi = self.to_fractions()
        return (lo + hi) / 2

    def mag_upper(self) -> Fraction:
        """Exact upper bound on |x| over the interval."""
        lo, hi = self.to_fractions()
        return max(abs(lo), abs(hi))


def imin(intervals) -> CertInterval:
    """Enclosure of min_i x_i given enclosures of each x_i."""
    items = list(intervals)
    if not items:
        raise ValueError("imin of empty sequence")
    bits = max(iv.bits for iv in items)
    return CertInterval(min(iv.lo for iv in items), min(iv.hi for iv in items), bits)


def imax(intervals) -> CertInterval:
    """Enclosure of max_i x_i given enclosures of each x_i."""
    items = list(intervals)
    if not items:
        raise ValueError("imax of empty sequence")
    bits = max(iv.bits for iv in items)
    return CertInterval(max(iv.lo for iv in items), max(iv.hi for iv in items), bits)


def isum(intervals, bits: int = DEFAULT_BITS) -> CertInterval:
    """Enclosure of a sum of intervals (empty sum is exactly zero)."""
    total = CertInterval.from_rational(0, bits)
    for iv in intervals:
        total = total + iv
    return total


def pi_interval(bits: int = DEFAULT_BITS) -> CertInterval:
    with _ctx_down(bits):
        lo = gmpy2.const_pi()
    with _ctx_up(bits):
        hi = gmpy2.const_pi()
    return CertInterval(lo, hi, bits)


def bit_ladder(start: int = DEFAULT_BITS, cap: int = 1 << 16) -> Iterator[int]:
    """Doubling precision schedule for certify-or-escalate loops."""
    bits = start
    while bits <= cap:
        yield bits
        bits *= 2


def rational_sqrt_bounds(value: Fraction, scale_bits: int = 64) -> tuple[Fraction, Fraction]:
    """Rational bracket ``lo <= sqrt(value) <= hi`` with ``hi - lo <= 2**-scale_bits``.

    Uses only integer square roots, so the bracket is exact and deterministic.
    """
    value = Fraction(value)
    if value < 0:
        raise NegativeRadicand(f"sqrt of negative rational {value}")
    if value == 0:
        return Fraction(0), Fraction(0)
    scale = 1 << scale_bits
    scaled = (value.numerator * scale * scale) // value.denominator
    root = isqrt(scaled)
    if root * root * value.denominator == value.numerator * scale * scale:
        exact = Fraction(root, scale)
        return exact, exact
    return Fraction(root, scale), Fraction(root + 1, scale)


@dataclass(frozen=True, slots=True)
class AngleRep:
    """Exact angle ``pi_coeff * pi + remainder`` with rational parts.

    Reduction modulo a full turn only ever adjusts ``pi_coeff`` by even
    integers; ``remainder`` is carried through untouched, so exact equality
    modulo a full turn is decidable.
    """

    pi_coeff: Fraction = Fraction(0)
    remainder: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "pi_coeff", Fraction(self.pi_coeff))
        object.__setattr__(self, "remainder", Fraction(self.remainder))

    @classmethod
    def from_rational(cls, value: Rational) -> "AngleRep":
        return cls(Fraction(0), Fraction(value))

    @classmethod
    def pi_multiple(cls, coeff: Rational) -> "AngleRep":
        return cls(Fraction(coeff), Fraction(0))

    def __add__(self, other: "AngleRep") -> "AngleRep":
        return AngleRep(self.pi_coeff + other.pi_coeff, self.remainder + other.remainder)

    def __sub__(self, other: "AngleRep") -> "AngleRep":
        return AngleRep(self.pi_coeff - other.pi_coeff, self.remainder - other.remainder)

    def __neg__(self) -> "AngleRep":
        return AngleRep(-self.pi_coeff, -self.remainder)

    def scale(self, factor: Rational) -> "AngleRep":
        return AngleRep(self.pi_coeff * factor, self.remainder * factor)

    def normalized(self) -> "AngleRep":
        """Canonical representative with pi_coeff in [0, 2)."""
        return AngleRep(self.pi_coeff % 2, self.remainder)

    def equals_mod_2pi(self, other: "AngleRep") -> bool:
        if self.remainder != other.remainder:
            return False
        diff = self.pi_coeff - other.pi_coeff
        return diff.denominator == 1 and diff.numerator % 2 == 0

    def is_zero_mod_2pi(self) -> bool:
        return self.equals_mod_2pi(AngleRep())

    def to_interval(self, bits: int = DEFAULT_BITS) -> CertInterval:
        theta = pi_interval(bits) * self.pi_coeff
        return theta + CertInterval.from_rational(self.remainder, bits)

    def exact_trig(self):
        """(cos, sin) as exact integers when the angle is a multiple of pi/2."""
        if self.remainder != 0:
            return None
        twice = self.pi_coeff * 2
        if twice.denominator != 1:
            return None
        return ((1, 0), (0, 1), (-1, 0), (0, -1))[twice.numerator % 4]

    def cos(self, bits: int = DEFAULT_BITS) -> CertInterval:
        exact = self.exact_trig()
        if exact is not None:
            return CertInterval.from_rational(exact[0], bits)
        return _lipschitz_trig(self, gmpy2.cos, bits)

    def sin(self, bits: int = DEFAULT_BITS) -> CertInterval:
        exact = self.exact_trig()
        if exact is not None:
            return CertInterval.from_rational(exact[1], bits)
        return _lipschitz_trig(self, gmpy2.sin, bits)


def _lipschitz_trig(angle: AngleRep, fn, bits: int) -> CertInterval:
    # evaluate at the low endpoint and widen by the argument width; sound
    # because cos and sin are 1-Lipschitz
    theta = angle.normalized().to_interval(bits)
    with _ctx_up(bits):
        width = gmpy2.sub(theta.hi, theta.lo)
        hi = gmpy2.add(fn(theta.lo), width)
        one = gmpy2.mpfr(1)
    with _ctx_down(bits):
        lo = gmpy2.sub(fn(theta.lo), width)
        neg_one = gmpy2.mpfr(-1)
    if lo < neg_one:
        lo = neg_one
    if hi > one:
        hi = one
    return CertInterval(lo, hi, bits)


def trig_eval(angle: AngleRep, bits: int = DEFAULT_BITS) -> tuple[CertInterval, CertInterval]:
    """Certified (cos, sin) enclosures of an exact angle."""
    if bits < 53:
        raise ValueError("trig_eval needs at least 53 bits")
    return angle.cos(bits), angle.sin(bits)


def interval_sqrt(x: CertInterval) -> CertInterval:
    """Certified square root of an interval (see CertInterval.sqrt)."""
    return x.sqrt()


def interval_acos(x: CertInterval) -> CertInterval:
    """Certified arccosine; the input is clamped to [-1, 1] first."""
    bits = x.bits
    one = gmpy2.mpfr(1)
    lo_in = max(min(x.lo, one), -one)
    hi_in = max(min(x.hi, one), -one)
    # acos is decreasing, so the upper input gives the lower output
    with _ctx_down(bits):
        lo = gmpy2.acos(hi_in)
    with _ctx_up(bits):
        hi = gmpy2.acos(lo_in)
    return CertInterval(lo, hi, bits)


def interval_atan(value: Rational, bits: int = DEFAULT_BITS) -> CertInterval:
    """Certified arctangent of an exact rational argument."""
    q = _to_mpq(value)
    # atan is increasing, so rounding the input down/up inside each context
    # keeps the enclosure sound
    with _ctx_down(bits):
        lo = gmpy2.atan(gmpy2.mpfr(q))
    with _ctx_up(bits):
        hi = gmpy2.atan(gmpy2.mpfr(q))
    return CertInterval(lo, hi, bits)


def angle_mod_2pi(angle: AngleRep) -> AngleRep:
    """Canonical representative of an angle modulo a full turn."""
    return angle.normalized()
