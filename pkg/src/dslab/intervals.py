"""Exact measure on the torus R/Z: approximation sets, overlaps, cumulative mass.

Arcs are stored as integer numerators over a shared denominator, so
intersections and measures run on Python ints and stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import floor, gcd
from typing import Iterable, Sequence

from .arithmetic import LmnSplit, lmn_split, sieve, totient, totients
from .psi import PsiFunction


def _lcm(a: int, b: int) -> int:
    return a // gcd(a, b) * b


@dataclass(frozen=True, eq=False)
class TorusIntervalUnion:
    """Disjoint union of open arcs on R/Z.

    ``ends`` holds ``(left, right)`` numerators over ``denominator`` with
    ``0 <= left < denominator`` and ``left < right <= left + denominator``,
    sorted by ``left``.  Each arc is a connected component of the set, so
    arcs touching at an excluded point stay separate.  At most the last arc
    wraps past 1.  ``full`` marks the whole circle, which no single arc can
    express.
    """

    denominator: int
    ends: tuple[tuple[int, int], ...] = ()
    full: bool = False

    @classmethod
    def empty(cls) -> "TorusIntervalUnion":
        return cls(1, ())

    @classmethod
    def circle(cls) -> "TorusIntervalUnion":
        return cls(1, (), True)

    @classmethod
    def from_arcs(cls, arcs: Iterable[tuple[Fraction, Fraction]]) -> "TorusIntervalUnion":
        """Canonical union of arbitrary open arcs ``(left, right)`` with ``left < right``."""
        arcs = [(Fraction(a), Fraction(b)) for a, b in arcs]
        arcs = [(a, b) for a, b in arcs if b > a]
        if not arcs:
            return cls.empty()
        N = 1
        for a, b in arcs:
            N = _lcm(N, _lcm(a.denominator, b.denominator))
        pieces, zero_in = [], False
        for a, b in arcs:
            if b - a > 1:
                return cls.circle()
            la = int(a * N) % N
            lb = la + int((b - a) * N)
            ps, z = _linear_pieces(la, lb, N)
            pieces += ps
            zero_in = zero_in or z
        pieces.sort()
        return _glue(_merge(pieces), zero_in, N)

    # -- views ------------------------------------------------------------
    @property
    def arcs(self) -> tuple[tuple[Fraction, Fraction], ...]:
        N = self.denominator
        return tuple((Fraction(a, N), Fraction(b, N)) for a, b in self.ends)

    def measure(self) -> Fraction:
        if self.full:
            return Fraction(1)
        return Fraction(sum(b - a for a, b in self.ends), self.denominator)

    def __len__(self) -> int:
        return len(self.ends)

    def __eq__(self, other):
        if not isinstance(other, TorusIntervalUnion):
            return NotImplemented
        return self.full == other.full and self.arcs == other.arcs

    def __hash__(self):
        return hash((self.full, self.arcs))

    def __contains__(self, x) -> bool:
        if self.full:
            return True
        x = Fraction(x) % 1
        N = self.denominator
        for a, b in self.ends:
            lo, hi = Fraction(a, N), Fraction(b, N)
            if lo < x < hi or lo < x + 1 < hi:
                return True
        return False

    def linear(self, N: int | None = None) -> tuple[list[tuple[int, int]], bool]:
        """Pieces inside ``[0, N]`` over denominator ``N`` plus whether the point 0 lies in the set."""
        N = self.denominator if N is None else N
        if self.full:
            return [(0, N)], True
        k, rem = divmod(N, self.denominator)
        if rem:
            raise ValueError("target denominator must be a multiple of the own denominator")
        pieces, zero_in = [], False
        for a, b in self.ends:
            ps, z = _linear_pieces(a * k, b * k, N)
            pieces += ps
            zero_in = zero_in or z
        return pieces, zero_in

    def contains_arcs_of(self, other: "TorusIntervalUnion") -> bool:
        """Whether ``other`` is a subset of ``self`` (up to endpoints)."""
        return intersect(self, other) == other


def _linear_pieces(a: int, b: int, N: int) -> tuple[list[tuple[int, int]], bool]:
    if b <= N:
        return [(a, b)], False
    return [(a, N), (0, b - N)], True


def _merge(pieces: Sequence[tuple[int, int]]) -> list[tuple[int, int]]:
    out: list[list[int]] = []
    for a, b in pieces:
        if out and a < out[-1][1]:
            if b > out[-1][1]:
                out[-1][1] = b
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def _glue(pieces: list[tuple[int, int]], zero_in: bool, N: int) -> TorusIntervalUnion:
    if zero_in:
        if len(pieces) == 1:
            return TorusIntervalUnion.circle()
        head, tail = pieces[0], pieces[-1]
        pieces = pieces[1:-1] + [(tail[0], N + head[1])]
    return TorusIntervalUnion(N, tuple(pieces))


def intersect(U1: TorusIntervalUnion, U2: TorusIntervalUnion) -> TorusIntervalUnion:
    if U1.full:
        return U2
    if U2.full:
        return U1
    if not U1.ends or not U2.ends:
        return TorusIntervalUnion.empty()
    N = _lcm(U1.denominator, U2.denominator)
    p1, z1 = U1.linear(N)
    p2, z2 = U2.linear(N)
    p1.sort()
    p2.sort()
    return _glue(_intersect_pieces(p1, p2), z1 and z2, N)


def _intersect_pieces(p1, p2) -> list[tuple[int, int]]:
    out = []
    i = j = 0
    n1, n2 = len(p1), len(p2)
    while i < n1 and j < n2:
        a1, b1 = p1[i]
        a2, b2 = p2[j]
        lo = a1 if a1 > a2 else a2
        hi = b1 if b1 < b2 else b2
        if lo < hi:
            out.append((lo, hi))
        if b1 < b2:
            i += 1
        else:
            j += 1
    return out


def intersection_measure(U1: TorusIntervalUnion, U2: TorusIntervalUnion) -> Fraction:
    """``measure(intersect(U1, U2))`` without materialising the result."""
    if U1.full:
        return U2.measure()
    if U2.full:
        return U1.measure()
    if not U1.ends or not U2.ends:
        return Fraction(0)
    d1, d2 = U1.denominator, U2.denominator
    g = gcd(d1, d2)
    k1, k2 = d2 // g, d1 // g
    N = d1 * k1
    if U1.ends[-1][1] > d1 or U2.ends[-1][1] > d2:
        p1, _ = U1.linear(N)
        p2, _ = U2.linear(N)
        p1.sort()
        p2.sort()
        return Fraction(sum(b - a for a, b in _intersect_pieces(p1, p2)), N)
    e1, e2 = U1.ends, U2.ends
    total = 0
    i = j = 0
    n1, n2 = len(e1), len(e2)
    while i < n1 and j < n2:
        a1, b1 = e1[i]
        a2, b2 = e2[j]
        a1 *= k1
        b1 *= k1
        a2 *= k2
        b2 *= k2
        lo = a1 if a1 > a2 else a2
        hi = b1 if b1 < b2 else b2
        if lo < hi:
            total += hi - lo
        if b1 < b2:
            i += 1
        else:
            j += 1
    return Fraction(total, N)


def measure(U: TorusIntervalUnion) -> Fraction:
    return U.measure()


# ---------------------------------------------------------------------------
# approximation sets


def reduced_residues(q: int) -> list[int]:
    """``1 <= p <= q`` with ``gcd(p, q) = 1``."""
    if q == 1:
        return [1]
    mask = bytearray([1]) * q
    mask[0] = 0
    for p, _ in sieve(q).factor(q):
        mask[p::p] = bytes(len(range(p, q, p)))
    return [p for p in range(1, q) if mask[p]]


def approx_set(q: int, psi: PsiFunction) -> TorusIntervalUnion:
    """Union of the open arcs of radius ``psi(q)/q`` around the reduced fractions ``p/q``."""
    v = psi(q)
    if not v:
        return TorusIntervalUnion.empty()
    a, b = v.numerator, v.denominator
    N = q * b
    if q == 1:
        # the arc around 1/1 wraps through 0
        return TorusIntervalUnion(N, ((b - a, b + a),))
    # arcs stay inside (0, 1) because psi <= 1/2
    return TorusIntervalUnion(N, tuple((p * b - a, p * b + a) for p in reduced_residues(q)))


class ApproxSets:
    """Per-psi cache of approximation sets for batch overlap computations."""

    def __init__(self, psi: PsiFunction):
        self.psi = psi
        self._cache: dict[int, TorusIntervalUnion] = {}

    def __getitem__(self, q: int) -> TorusIntervalUnion:
        U = self._cache.get(q)
        if U is None:
            U = self._cache[q] = approx_set(q, self.psi)
        return U

    def overlap(self, q: int, r: int) -> Fraction:
        return intersection_measure(self[q], self[r])


def overlap_exact(q: int, r: int, psi: PsiFunction) -> Fraction:
    """Measure of ``A_q`` intersected with ``A_r`` by direct arc intersection."""
    return intersection_measure(approx_set(q, psi), approx_set(r, psi))


# ---------------------------------------------------------------------------
# the Chinese-remainder route


@dataclass(frozen=True)
class OverlapProfile:
    small_delta: Fraction
    big_delta: Fraction
    split: LmnSplit


def overlap_profile(q: int, r: int, psi: PsiFunction) -> OverlapProfile:
    x, y = psi(q) / q, psi(r) / r
    return OverlapProfile(min(x, y), max(x, y), lmn_split(q, r))


def w_function(y: Fraction, profile: OverlapProfile) -> Fraction:
    """Length of the overlap of two centred intervals of radii delta, Delta at distance y."""
    d, D = profile.small_delta, profile.big_delta
    if y < 0:
        raise ValueError("w is defined for y >= 0")
    if y <= D - d:
        return 2 * d
    if y <= D + d:
        return D + d - y
    return Fraction(0)


def overlap_crt(q: int, r: int, psi: PsiFunction) -> Fraction:
    """Overlap measure as the weighted sum over residues ``c`` modulo ``ln``."""
    if q == r:
        raise ValueError("the residue identity needs q != r")
    prof = overlap_profile(q, r, psi)
    l, m, n = prof.split.l, prof.split.m, prof.split.n
    if prof.small_delta == 0:
        return Fraction(0)
    ln = l * n
    phi_m = totient(m)
    l_primes = sieve(l).factor(l)
    n_primes = [p for p, _ in sieve(n).factor(n)]
    reach = prof.big_delta + prof.small_delta
    c_max = min(ln, floor(reach * ln))
    total = Fraction(0)
    for c in range(1, c_max + 1):
        if any(c % p == 0 for p in n_primes):
            continue
        weight = phi_m
        for p, e in l_primes:
            weight *= p ** (e - 1) * (p - 1 if c % p == 0 else p - 2)
        if weight:
            total += 2 * weight * w_function(Fraction(c, ln), prof)
    return total


def psi_mass(Q: int, psi: PsiFunction) -> Fraction:
    """Cumulative measure ``sum_{q <= Q} 2 phi(q) psi(q) / q``."""
    psi(Q)
    phi = totients(Q)
    return sum((2 * phi[q] * psi(q) / q for q in range(1, Q + 1) if psi(q)), Fraction(0))


def psi_masses(Q: int, psi: PsiFunction) -> list[Fraction]:
    """Prefix table: ``out[k] = psi_mass(k)`` for ``0 <= k <= Q``."""
    psi(Q)
    phi = totients(Q)
    out = [Fraction(0)]
    for q in range(1, Q + 1):
        v = psi(q)
        out.append(out[-1] + 2 * phi[q] * v / q if v else out[-1])
    return out
