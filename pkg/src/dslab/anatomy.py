"""Multiplicative functions over a prime set and the small-prime anatomy count."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable

from . import certified
from .arithmetic import is_prime, prime_at_least, sieve
from .certified import Enclosure


@dataclass(frozen=True)
class PrimeSet:
    primes: tuple[int, ...]
    odd_only: bool = True

    def __post_init__(self):
        if list(self.primes) != sorted(set(self.primes)):
            raise ValueError("primes must be strictly increasing")
        for p in self.primes:
            if not is_prime(p):
                raise ValueError(f"{p} is not prime")
        if self.odd_only and 2 in self.primes:
            raise ValueError("2 is excluded from an odd prime set")

    @classmethod
    def of(cls, primes: Iterable[int], odd_only: bool = True) -> "PrimeSet":
        return cls(tuple(sorted(set(primes))), odd_only)

    def __contains__(self, p) -> bool:
        return p in self.primes

    def __iter__(self):
        return iter(self.primes)


def _odd(P: PrimeSet) -> PrimeSet:
    if 2 in P.primes:
        raise ValueError("the mean-value functions need odd primes")
    return P


def f_multiplicative(n: int, P: PrimeSet) -> Fraction:
    """``prod_{p | n, p in P} (1 + 1/(p-2))``."""
    _odd(P)
    out = Fraction(1)
    for p, _ in sieve(n).factor(n):
        if p in P:
            out *= Fraction(p - 1, p - 2)
    return out


def moebius_transform_g(n: int, P: PrimeSet) -> Fraction:
    """``sum_{d | n} mu(d) f(n/d)``: ``1/(p-2)`` at primes of P, 0 on other primes and on higher powers."""
    _odd(P)
    out = Fraction(1)
    for p, e in sieve(n).factor(n):
        if e > 1 or p not in P:
            return Fraction(0)
        out /= p - 2
    return out


@dataclass(frozen=True)
class MeanValue:
    x: int
    total: Fraction
    main_term: Fraction

    @property
    def residual(self) -> Fraction:
        return self.total - self.main_term


def mean_value_check(x: int, P: PrimeSet) -> MeanValue:
    """``sum_{n <= x} f(n)`` against ``x prod (1 + 1/(p(p-2)))``.

    The sum is evaluated as ``sum_d g(d) floor(x/d)`` over squarefree d
    built from P, which is exact because ``f = 1 * g``.
    """
    _odd(P)
    if x < 1:
        raise ValueError("x must be positive")
    total = Fraction(0)
    primes = [p for p in P.primes if p <= x]
    for r in range(len(primes) + 1):
        hit = False
        for combo in combinations(primes, r):
            d, g = 1, Fraction(1)
            for p in combo:
                d *= p
                g /= p - 2
            if d <= x:
                hit = True
                total += g * (x // d)
        if not hit and r:
            break
    main = Fraction(x)
    for p in P.primes:
        main *= 1 + Fraction(1, p * (p - 2))
    return MeanValue(x, total, main)


def reciprocal_prime_sum(n: int, t) -> Fraction:
    """``sum_{p | n, p >= t} 1/p``."""
    if n < 1:
        raise ValueError("n must be positive")
    return sum((Fraction(1, p) for p, _ in sieve(n).factor(n) if prime_at_least(p, t)), Fraction(0))


def _reciprocal_sums(x: int, t) -> list[Fraction]:
    """``R_t(n)`` for ``0 <= n <= x`` (index 0 unused)."""
    out = [Fraction(0)] * (x + 1)
    for p in sieve(max(x, 2)).primes():
        if p > x:
            break
        if prime_at_least(p, t):
            inv = Fraction(1, p)
            for m in range(p, x + 1, p):
                out[m] += inv
    return out


@dataclass(frozen=True)
class AnatomyCount:
    x: int
    t: Fraction
    c: Fraction
    count: int
    majorant: Enclosure
    """``e^(-100 c t) sum_{n <= x} prod_{p | n, p >= t} e^(100 t / p)``."""
    mass: Enclosure
    """The bare sum ``sum_{n <= x} prod e^(100 t/p)``."""

    @property
    def markov_holds(self) -> bool:
        return self.count <= self.majorant.lo


def _grouped(x: int, t) -> dict[Fraction, int]:
    groups: dict[Fraction, int] = {}
    for R in _reciprocal_sums(x, t)[1:]:
        groups[R] = groups.get(R, 0) + 1
    return groups


def _mass(groups: dict[Fraction, int], t: Fraction) -> Enclosure:
    # summing per-term enclosures keeps the expression trees shallow
    lo = hi = Fraction(0)
    for R, k in sorted(groups.items()):
        if R == 0:
            lo += k
            hi += k
            continue
        e = certified.exp(100 * t * R).bounds()
        lo += k * e.lo
        hi += k * e.hi
    return Enclosure(lo, hi)


def anatomy_count(x: int, t, c, *, _groups=None, _mass_enc=None) -> AnatomyCount:
    """Count ``n <= x`` with ``R_t(n) >= c`` and the certified Markov majorant."""
    t, c = Fraction(t), Fraction(c)
    if t < 1 or not 0 < c <= 1:
        raise ValueError("need t >= 1 and 0 < c <= 1")
    if x < 1:
        return AnatomyCount(x, t, c, 0, Enclosure(Fraction(0), Fraction(0)), Enclosure(Fraction(0), Fraction(0)))
    groups = _grouped(x, t) if _groups is None else _groups
    count = sum(k for R, k in groups.items() if R >= c)
    mass = _mass(groups, t) if _mass_enc is None else _mass_enc
    damp = certified.exp(-100 * c * t).bounds()
    return AnatomyCount(x, t, c, count, Enclosure(mass.lo * damp.lo, mass.hi * damp.hi), mass)


def anatomy_grid(xs: Iterable[int], ts: Iterable, cs: Iterable) -> list[AnatomyCount]:
    """All cells of the grid; the class sizes and the mass are shared across c."""
    out = []
    cs = [Fraction(c) for c in cs]
    for x in xs:
        for t in ts:
            t = Fraction(t)
            groups = _grouped(x, t)
            mass = _mass(groups, t)
            out += [anatomy_count(x, t, c, _groups=groups, _mass_enc=mass) for c in cs]
    return out
