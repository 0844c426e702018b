"""Certified real numbers built on mpmath interval arithmetic.

A :class:`Real` is a lazily evaluated expression tree.  Evaluating it at a
working precision yields an interval guaranteed to contain the true value;
comparisons re-evaluate at doubling precision until the interval separates
the two sides.  Rational leaves stay exact, so comparisons between two
rational-backed values never touch floating point.

The mpmath interval context keeps a process-global precision, so evaluation
is not thread-safe; parallel drivers in this package use processes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Callable, Union

import mpmath
from mpmath import iv
from mpmath.libmp import to_rational

START_PREC = 64
MAX_PREC = 1 << 14

Number = Union[int, Fraction, "Real"]


class UndecidedComparison(ArithmeticError):
    """Raised when two quantities cannot be separated below ``MAX_PREC`` bits."""


def _to_fraction(mpf_tuple) -> Fraction:
    p, q = to_rational(mpf_tuple)
    return Fraction(int(p), int(q))


def _iv_rational(x: Fraction):
    num = iv.mpf(x.numerator)
    if x.denominator == 1:
        return num
    return num / x.denominator


class _Prec:
    def __init__(self, prec: int):
        self.prec = prec

    def __enter__(self):
        self.saved = iv.prec
        iv.prec = self.prec

    def __exit__(self, *exc):
        iv.prec = self.saved


@dataclass(frozen=True)
class Enclosure:
    """Rational interval ``[lo, hi]`` known to contain a real quantity."""

    lo: Fraction
    hi: Fraction

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def __float__(self) -> float:
        return float(self.mid)

    def format(self, digits: int = 12) -> str:
        lo = mpmath.nstr(mpmath.mpf(self.lo.numerator) / self.lo.denominator, digits)
        hi = mpmath.nstr(mpmath.mpf(self.hi.numerator) / self.hi.denominator, digits)
        return f"[{lo}, {hi}]"


class Real:
    """A real number known through certified interval evaluation.

    ``Real(Fraction(1, 3))`` is exact; transcendental values are built from
    the methods :meth:`log`, :meth:`exp`, :meth:`sqrt` and the arithmetic
    operators.
    """

    __slots__ = ("_fn", "exact", "_bounds")

    def __init__(self, value: Union[int, Fraction, None] = None, *, fn: Callable | None = None):
        if fn is None:
            if value is None:
                raise TypeError("Real needs a value or an evaluation function")
            self.exact = Fraction(value)
            self._fn = None
        else:
            self.exact = None
            self._fn = fn
        self._bounds = None

    # -- evaluation -----------------------------------------------------
    def _eval(self):
        if self.exact is not None:
            return _iv_rational(self.exact)
        return self._fn()

    def interval(self, prec: int = START_PREC):
        with _Prec(prec):
            return self._eval()

    def bounds(self, prec: int = START_PREC) -> Enclosure:
        """Rational enclosure at the given precision."""
        if self.exact is not None:
            return Enclosure(self.exact, self.exact)
        if prec == START_PREC and self._bounds is not None:
            return self._bounds
        x = self.interval(prec)
        a, b = x._mpi_
        if a in (mpmath.libmp.fninf, mpmath.libmp.fnan) or b in (mpmath.libmp.finf, mpmath.libmp.fnan):
            raise UndecidedComparison("interval evaluation diverged")
        enc = Enclosure(_to_fraction(a), _to_fraction(b))
        if prec == START_PREC:
            self._bounds = enc
        return enc

    def enclosure(self, rel_width: Fraction = Fraction(1, 2**40)) -> Enclosure:
        """Refine until ``hi - lo <= rel_width * |mid|`` (or the value is exactly 0)."""
        prec = START_PREC
        while True:
            enc = self.bounds(prec)
            if enc.width == 0 or enc.width <= rel_width * abs(enc.mid):
                return enc
            if prec >= MAX_PREC:
                raise UndecidedComparison("enclosure did not reach requested width")
            prec *= 2

    def __float__(self) -> float:
        return float(self.enclosure())

    def __repr__(self) -> str:
        if self.exact is not None:
            return f"Real({self.exact})"
        return f"Real({self.bounds().format()})"

    # -- comparison -----------------------------------------------------
    def compare(self, other: Number) -> int:
        """Sign of ``self - other`` decided by precision escalation."""
        other = as_real(other)
        if self.exact is not None and other.exact is not None:
            d = self.exact - other.exact
            return (d > 0) - (d < 0)
        prec = START_PREC
        while prec <= MAX_PREC:
            a, b = self.bounds(prec), other.bounds(prec)
            if a.lo > b.hi:
                return 1
            if a.hi < b.lo:
                return -1
            if a.lo == a.hi == b.lo == b.hi:
                return 0
            prec *= 2
        raise UndecidedComparison(f"cannot separate {self!r} and {other!r}")

    def __lt__(self, other):
        return self.compare(other) < 0

    def __le__(self, other):
        return self.compare(other) <= 0

    def __gt__(self, other):
        return self.compare(other) > 0

    def __ge__(self, other):
        return self.compare(other) >= 0

    # -- arithmetic -----------------------------------------------------
    def _lift(self, other, op, exact_op):
        other = as_real(other)
        if self.exact is not None and other.exact is not None:
            return Real(exact_op(self.exact, other.exact))
        a, b = self, other
        return Real(fn=lambda: op(a._eval(), b._eval()))

    def __add__(self, other):
        return self._lift(other, lambda x, y: x + y, lambda x, y: x + y)

    __radd__ = __add__

    def __sub__(self, other):
        return self._lift(other, lambda x, y: x - y, lambda x, y: x - y)

    def __rsub__(self, other):
        return as_real(other) - self

    def __mul__(self, other):
        return self._lift(other, lambda x, y: x * y, lambda x, y: x * y)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._lift(other, lambda x, y: x / y, lambda x, y: x / y)

    def __rtruediv__(self, other):
        return as_real(other) / self

    def __neg__(self):
        return Real(0) - self

    def __pow__(self, exponent):
        """Integer powers stay exact on rationals; other exponents go through exp/log."""
        if isinstance(exponent, int):
            if self.exact is not None:
                return Real(self.exact**exponent)
            a, n = self, exponent
            return Real(fn=lambda: a._eval() ** n)
        if isinstance(exponent, Rational) and Fraction(exponent).denominator == 1:
            return self ** int(exponent)
        return (as_real(exponent) * self.log()).exp()

    def log(self) -> "Real":
        if self.exact == 1:
            return Real(0)
        a = self
        return Real(fn=lambda: iv.log(a._eval()))

    def exp(self) -> "Real":
        if self.exact == 0:
            return Real(1)
        a = self
        return Real(fn=lambda: iv.exp(a._eval()))

    def sqrt(self) -> "Real":
        a = self
        return Real(fn=lambda: iv.sqrt(a._eval()))


def as_real(x: Number) -> Real:
    if isinstance(x, Real):
        return x
    if isinstance(x, (int, Fraction)):
        return Real(x)
    raise TypeError(f"cannot certify {type(x).__name__}; pass an int, Fraction or Real")


def compare(a: Number, b: Number) -> int:
    """Certified sign of ``a - b``."""
    if not isinstance(a, Real) and not isinstance(b, Real):
        d = Fraction(a) - Fraction(b)
        return (d > 0) - (d < 0)
    return as_real(a).compare(b)


def log(x: Number) -> Real:
    return as_real(x).log()


def exp(x: Number) -> Real:
    return as_real(x).exp()


def sqrt(x: Number) -> Real:
    return as_real(x).sqrt()


def power(base: Number, exponent: Number) -> Real:
    return as_real(base) ** exponent
