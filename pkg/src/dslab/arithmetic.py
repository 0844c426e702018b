"""Number-theoretic primitives and the scalar formulas shared by every module."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd, isqrt
from typing import TYPE_CHECKING, Iterator, Union

import numpy as np

from . import certified
from .certified import Enclosure, Real

if TYPE_CHECKING:
    from .psi import PsiFunction

SIEVE_CAP = 20_000_000

Threshold = Union[int, Fraction, Real]


# ---------------------------------------------------------------------------
# sieve


class Sieve:
    """Smallest-prime-factor table for ``0..limit``."""

    def __init__(self, limit: int):
        if limit > SIEVE_CAP:
            raise ValueError(f"sieve limit {limit} exceeds cap {SIEVE_CAP}")
        self.limit = max(int(limit), 1)
        n = self.limit
        spf = np.zeros(n + 1, dtype=np.int64)
        for p in range(2, isqrt(n) + 1):
            if spf[p] == 0:
                block = spf[p * p :: p]
                block[block == 0] = p
        idx = np.nonzero(spf == 0)[0]
        spf[idx] = idx
        self.spf = spf.tolist()

    def factor(self, n: int) -> list[tuple[int, int]]:
        spf = self.spf
        out = []
        while n > 1:
            p = spf[n]
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out.append((p, e))
        return out

    def primes(self) -> list[int]:
        return [n for n in range(2, self.limit + 1) if self.spf[n] == n]


_SIEVE = Sieve(1 << 16)


def sieve(limit: int) -> Sieve:
    """Shared sieve covering at least ``limit``; grows by doubling."""
    global _SIEVE
    if limit > _SIEVE.limit:
        _SIEVE = Sieve(min(max(limit, 2 * _SIEVE.limit), max(limit, SIEVE_CAP)))
    return _SIEVE


def is_prime(n: int) -> bool:
    return n >= 2 and sieve(n).spf[n] == n


# ---------------------------------------------------------------------------
# factorizations


@dataclass(frozen=True)
class Factorization:
    """Sorted ``(prime, exponent)`` pairs; the empty tuple represents 1."""

    entries: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        primes = [p for p, _ in self.entries]
        if any(a >= b for a, b in zip(primes, primes[1:])):
            raise ValueError("primes must be strictly increasing")
        if any(e < 1 for _, e in self.entries):
            raise ValueError("exponents must be positive")

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other):
        if isinstance(other, Factorization):
            return self.entries == other.entries
        return self.entries == tuple(tuple(t) for t in other)

    def __hash__(self):
        return hash(self.entries)

    @property
    def value(self) -> int:
        n = 1
        for p, e in self.entries:
            n *= p**e
        return n

    @property
    def primes(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.entries)

    def valuation(self, p: int) -> int:
        for q, e in self.entries:
            if q == p:
                return e
        return 0

    def as_dict(self) -> dict[int, int]:
        return dict(self.entries)


def factorize(n: int) -> Factorization:
    if n < 1:
        raise ValueError(f"factorize needs n >= 1, got {n}")
    return Factorization(tuple(sieve(n).factor(n)))


def valuation(n: int, p: int) -> int:
    """Exponent of ``p`` in ``n`` (``n >= 1``)."""
    e = 0
    while n % p == 0:
        n //= p
        e += 1
    return e


def totients(Q: int) -> list[int]:
    """``phi[q]`` for ``0 <= q <= Q`` as a list (``phi[0] = 0``)."""
    if Q < 1:
        raise ValueError("Q must be positive")
    phi = np.arange(Q + 1, dtype=np.int64)
    s = sieve(Q)
    for p in range(2, Q + 1):
        if s.spf[p] == p:
            phi[p::p] -= phi[p::p] // p
    return phi.tolist()


def totient_table(Q: int) -> dict[int, int]:
    phi = totients(Q)
    return {q: phi[q] for q in range(1, Q + 1)}


def totient(n: int) -> int:
    out = n
    for p, _ in factorize(n):
        out -= out // p
    return out


# ---------------------------------------------------------------------------
# the pair quantities


def big_d(q: int, r: int, psi: "PsiFunction") -> Fraction:
    """``max(r psi(q), q psi(r)) / gcd(q, r)``."""
    return max(r * psi(q), q * psi(r)) / gcd(q, r)


def differing_primes(q: int, r: int) -> list[int]:
    """Primes dividing ``qr/gcd(q, r)^2``, i.e. those with different valuations in q and r."""
    fq = dict(sieve(max(q, r)).factor(q))
    fr = dict(sieve(max(q, r)).factor(r))
    return sorted(p for p in fq.keys() | fr.keys() if fq.get(p, 0) != fr.get(p, 0))


def prime_at_least(p: int, s: Threshold) -> bool:
    if isinstance(s, Real):
        return s.compare(p) <= 0
    return p >= s


def prime_at_most(p: int, s: Threshold) -> bool:
    if isinstance(s, Real):
        return s.compare(p) >= 0
    return p <= s


def l_sum(s: Threshold, q: int, r: int) -> Fraction:
    """Sum of ``1/p`` over primes ``p >= s`` dividing ``qr/gcd(q,r)^2``."""
    return sum((Fraction(1, p) for p in differing_primes(q, r) if prime_at_least(p, s)), Fraction(0))


@dataclass(frozen=True)
class LmnSplit:
    l: int
    m: int
    n: int


def lmn_split(q: int, r: int) -> LmnSplit:
    """Per-prime split of (q, r): equal valuations go to l, unequal ones to m (min) and n (max)."""
    s = sieve(max(q, r))
    fq, fr = dict(s.factor(q)), dict(s.factor(r))
    l = m = n = 1
    for p in fq.keys() | fr.keys():
        u, v = fq.get(p, 0), fr.get(p, 0)
        if u == v:
            l *= p**u
        else:
            m *= p ** min(u, v)
            n *= p ** max(u, v)
    return LmnSplit(l, m, n)


def smooth_part(n: int, T: Threshold) -> int:
    out = 1
    for p, e in factorize(n):
        if prime_at_most(p, T):
            out *= p**e
    return out


# ---------------------------------------------------------------------------
# the threshold function


def big_f(C: Threshold, x: Threshold) -> Real:
    """``exp(log(x+100) logloglog(x+100) / (8 C loglog(x+100)) + 1)`` as a certified real."""
    L = certified.log(certified.as_real(x) + 100)
    LL = L.log()
    return (L * LL.log() / (8 * certified.as_real(C) * LL) + 1).exp()


@dataclass(frozen=True)
class FValue:
    """Certified evaluation of the threshold function."""

    value: Real
    enclosure: Enclosure

    @property
    def approx(self) -> float:
        return float(self.enclosure.mid)

    @property
    def lo(self) -> Fraction:
        return self.enclosure.lo

    @property
    def hi(self) -> Fraction:
        return self.enclosure.hi


def f_threshold(C: Threshold, x: Threshold) -> FValue:
    if certified.compare(C, 1) < 0 or certified.compare(x, 0) < 0:
        raise ValueError("need C >= 1 and x >= 0")
    value = big_f(C, x)
    return FValue(value, value.enclosure())
