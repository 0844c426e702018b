"""GCD graphs: validation, density and quality, specialization, and the
quality/density iteration with its cleaning steps.

All masses are exact rationals.  The only transcendental pieces are
``1/sqrt(p)``, ``s^(1/4)``, ``p^(-31/30)`` and 9/10-th powers; each comparison
involving them is reduced to an integer-power comparison between rationals
where possible and otherwise decided by certified evaluation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Iterable, Mapping, Optional

from . import certified
from .arithmetic import Threshold, big_f, differing_primes, is_prime, prime_at_least, sieve, valuation
from .certified import Real


class LemmaViolation(AssertionError):
    """A checked inequality failed on a concrete instance.

    ``instance`` holds the serialized graph so the counterexample can be
    archived and replayed.
    """

    def __init__(self, lemma: str, detail: str, graph: "GcdGraph | None" = None):
        super().__init__(f"{lemma}: {detail}")
        self.lemma = lemma
        self.detail = detail
        self.instance = graph.dumps() if graph is not None else None

    def record(self) -> dict:
        return {"status": "violation", "lemma": self.lemma, "detail": self.detail, "instance": self.instance}


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    axiom: str
    detail: str
    prime: Optional[int] = None


@dataclass(frozen=True)
class GcdGraph:
    """The septuple ``(mu, V, W, E, P, f, g)``.

    ``mu`` maps labels to non-negative rational weights and must cover
    ``V | W``; the same measure serves both sides.
    """

    mu: Mapping[int, Fraction]
    V: frozenset
    W: frozenset
    E: frozenset
    P: frozenset = frozenset()
    f: Mapping[int, int] = field(default_factory=dict)
    g: Mapping[int, int] = field(default_factory=dict)

    __hash__ = None

    @classmethod
    def build(cls, mu, V, W, E, P=(), f=None, g=None) -> "GcdGraph":
        return cls(
            {int(n): Fraction(x) for n, x in dict(mu).items()},
            frozenset(V),
            frozenset(W),
            frozenset((int(v), int(w)) for v, w in E),
            frozenset(P),
            dict(f or {}),
            dict(g or {}),
        )

    @classmethod
    def complete(cls, mu, V, W) -> "GcdGraph":
        return cls.build(mu, V, W, [(v, w) for v in V for w in W])

    def replace(self, **changes) -> "GcdGraph":
        data = dict(mu=self.mu, V=self.V, W=self.W, E=self.E, P=self.P, f=self.f, g=self.g)
        data.update(changes)
        return GcdGraph(**data)

    # -- masses -----------------------------------------------------------
    def mass(self, vertices: Iterable[int]) -> Fraction:
        mu = self.mu
        return sum((mu[n] for n in vertices), Fraction(0))

    def edge_mass(self, edges: Iterable[tuple[int, int]] | None = None) -> Fraction:
        mu = self.mu
        edges = self.E if edges is None else edges
        return sum((mu[v] * mu[w] for v, w in edges), Fraction(0))

    @property
    def p_diff(self) -> frozenset:
        return frozenset(p for p in self.P if self.f[p] != self.g[p])

    # -- serialization ----------------------------------------------------
    def dumps(self) -> str:
        lines = ["gcdgraph"]
        for n in sorted(self.mu):
            x = self.mu[n]
            lines.append(f"mu {n} {x.numerator}/{x.denominator}")
        lines.append(" ".join(["V"] + [str(v) for v in sorted(self.V)]))
        lines.append(" ".join(["W"] + [str(w) for w in sorted(self.W)]))
        lines += [f"E {v} {w}" for v, w in sorted(self.E)]
        lines += [f"P {p} {self.f[p]} {self.g[p]}" for p in sorted(self.P)]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "GcdGraph":
        lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not lines or lines[0] != ["gcdgraph"]:
            raise ValueError("missing 'gcdgraph' header")
        mu, V, W, E, P, f, g = {}, None, None, [], [], {}, {}
        for parts in lines[1:]:
            tag, args = parts[0], parts[1:]
            try:
                if tag == "mu" and len(args) == 2:
                    n = int(args[0])
                    if n in mu:
                        raise ValueError(f"duplicate weight for {n}")
                    mu[n] = Fraction(args[1])
                elif tag in ("V", "W"):
                    side = [int(a) for a in args]
                    if (V if tag == "V" else W) is not None:
                        raise ValueError(f"duplicate {tag} line")
                    if tag == "V":
                        V = side
                    else:
                        W = side
                elif tag == "E" and len(args) == 2:
                    E.append((int(args[0]), int(args[1])))
                elif tag == "P" and len(args) == 3:
                    p, a, b = map(int, args)
                    P.append(p)
                    f[p], g[p] = a, b
                else:
                    raise ValueError(f"bad record {' '.join(parts)!r}")
            except (ValueError, ZeroDivisionError) as exc:
                raise ValueError(f"bad record {' '.join(parts)!r}: {exc}") from None
        return cls.build(mu, V or (), W or (), E, P, f, g)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "GcdGraph":
        with open(path) as fh:
            return cls.loads(fh.read())


def _factor(n: int) -> list[tuple[int, int]]:
    return sieve(n).factor(n)


# ---------------------------------------------------------------------------
# axioms and the subgraph relation


def validate(G: GcdGraph) -> list[Violation]:
    out: list[Violation] = []
    for n in G.V | G.W:
        if n < 1:
            out.append(Violation("labels", f"vertex {n} is not a positive integer"))
        elif n not in G.mu:
            out.append(Violation("measure", f"no weight for vertex {n}"))
        elif G.mu[n] < 0:
            out.append(Violation("measure", f"negative weight at {n}"))
    for v, w in G.E:
        if v not in G.V or w not in G.W:
            out.append(Violation("edges", f"edge ({v},{w}) not in V x W"))
    for p in sorted(G.P):
        if not is_prime(p):
            out.append(Violation("primes", f"{p} is not prime", p))
            continue
        if p not in G.f or p not in G.g or G.f[p] < 0 or G.g[p] < 0:
            out.append(Violation("primes", "f and g must be non-negative on P", p))
            continue
        fp, gp = G.f[p], G.g[p]
        for v in sorted(G.V):
            e = valuation(v, p) if v >= 1 else 0
            if e < fp:
                out.append(Violation("(i)", f"p^f does not divide v={v}", p))
            elif fp != gp and e != fp:
                out.append(Violation("(iii)", f"p^f does not exactly divide v={v}", p))
        for w in sorted(G.W):
            e = valuation(w, p) if w >= 1 else 0
            if e < gp:
                out.append(Violation("(i)", f"p^g does not divide w={w}", p))
            elif fp != gp and e != gp:
                out.append(Violation("(iii)", f"p^g does not exactly divide w={w}", p))
        lo = min(fp, gp)
        for v, w in sorted(G.E):
            if v >= 1 and w >= 1 and valuation(gcd(v, w), p) != lo:
                out.append(Violation("(ii)", f"p^min(f,g) does not exactly divide gcd({v},{w})", p))
    return out


def is_subgraph(H: GcdGraph, G: GcdGraph) -> bool:
    """``H`` is a GCD subgraph of ``G``."""
    return (
        dict(H.mu) == dict(G.mu)
        and H.V <= G.V
        and H.W <= G.W
        and H.E <= G.E
        and H.P >= G.P
        and all(H.f[p] == G.f[p] and H.g[p] == G.g[p] for p in G.P)
    )


# ---------------------------------------------------------------------------
# functionals


def edge_density(G: GcdGraph) -> Fraction:
    denom = G.mass(G.V) * G.mass(G.W)
    if denom == 0:
        return Fraction(0)
    return G.edge_mass() / denom


def neighborhood(G: GcdGraph, vertex: int, side: str) -> tuple[frozenset, Fraction]:
    """``Gamma_G(vertex)`` for a vertex on side ``"V"`` or ``"W"`` and its mass."""
    if side == "V":
        if vertex not in G.V:
            raise KeyError(f"{vertex} not in V")
        nb = frozenset(w for v, w in G.E if v == vertex)
    elif side == "W":
        if vertex not in G.W:
            raise KeyError(f"{vertex} not in W")
        nb = frozenset(v for v, w in G.E if w == vertex)
    else:
        raise ValueError("side must be 'V' or 'W'")
    return nb, G.mass(nb)


def _adjacency(G: GcdGraph) -> tuple[dict[int, Fraction], dict[int, Fraction]]:
    """Neighbourhood masses for every vertex of V and of W."""
    mu = G.mu
    nv = dict.fromkeys(G.V, Fraction(0))
    nw = dict.fromkeys(G.W, Fraction(0))
    for v, w in G.E:
        nv[v] += mu[w]
        nw[w] += mu[v]
    return nv, nw


def remaining_primes(G: GcdGraph) -> frozenset:
    out = set()
    for v, w in G.E:
        for p, _ in _factor(gcd(v, w)):
            if p not in G.P:
                out.add(p)
    return frozenset(out)


def class_masses(G: GcdGraph, p: int, side: str) -> dict[int, Fraction]:
    """``k -> mu(V_{p^k})`` (or the W analogue), only for non-empty classes."""
    out: dict[int, Fraction] = {}
    for n in G.V if side == "V" else G.W:
        k = valuation(n, p)
        out[k] = out.get(k, Fraction(0)) + G.mu[n]
    return out


def class_ratios(G: GcdGraph, p: int) -> tuple[dict[int, Fraction], dict[int, Fraction]]:
    mv, mw = G.mass(G.V), G.mass(G.W)
    if mv == 0 or mw == 0:
        raise PreconditionError("valuation ratios need mu(V), mu(W) > 0")
    alpha = {k: x / mv for k, x in class_masses(G, p, "V").items()}
    beta = {k: x / mw for k, x in class_masses(G, p, "W").items()}
    return alpha, beta


def edge_classes(G: GcdGraph, p: int) -> dict[tuple[int, int], Fraction]:
    """``(k, l) -> mu(E_{p^k, p^l})``; the classes partition E."""
    mu = G.mu
    out: dict[tuple[int, int], Fraction] = {}
    vk = {v: valuation(v, p) for v in G.V}
    wl = {w: valuation(w, p) for w in G.W}
    for v, w in G.E:
        key = (vk[v], wl[w])
        out[key] = out.get(key, Fraction(0)) + mu[v] * mu[w]
    return out


def at_most_one_minus_inv_sqrt(x: Fraction, p: int) -> bool:
    """``x <= 1 - 1/sqrt(p)`` decided exactly: equivalent to ``1/p <= (1-x)^2`` with ``x <= 1``."""
    return x <= 1 and Fraction(1, p) <= (1 - x) ** 2


def r_music(G: GcdGraph) -> frozenset:
    """Primes of R(G) for which no valuation class carries more than ``1 - 1/sqrt(p)`` on both sides."""
    if G.mass(G.V) == 0 or G.mass(G.W) == 0:
        raise PreconditionError("R-natural needs mu(V), mu(W) > 0")
    out = set()
    for p in remaining_primes(G):
        alpha, beta = class_ratios(G, p)
        ks = alpha.keys() & beta.keys()
        if all(at_most_one_minus_inv_sqrt(min(alpha[k], beta[k]), p) for k in ks):
            out.add(p)
    return frozenset(out)


def _prime_factor(p: int) -> Real:
    """``(1 - p^(-31/30))^(-10)``."""
    return (1 - certified.power(p, Fraction(-31, 30))) ** -10


@dataclass(frozen=True)
class Quality:
    """``exact * prod_{p in primes} (1 - p^(-31/30))^(-10)``."""

    exact: Fraction
    primes: tuple[int, ...]

    def value(self) -> Real:
        out = certified.as_real(self.exact)
        for p in self.primes:
            out = out * _prime_factor(p)
        return out

    def enclosure(self):
        return self.value().enclosure()

    def ratio(self, other: "Quality") -> Real:
        """``self / other``; shared primes cancel exactly."""
        if other.exact == 0:
            raise ZeroDivisionError("quality ratio against a zero-quality graph")
        out = certified.as_real(self.exact / other.exact)
        mine, theirs = set(self.primes), set(other.primes)
        for p in sorted(mine - theirs):
            out = out * _prime_factor(p)
        for p in sorted(theirs - mine):
            out = out / _prime_factor(p)
        return out


def _prime_part(p: int, fp: int, gp: int) -> Fraction:
    out = Fraction(p ** abs(fp - gp))
    if fp == gp >= 1:
        out /= (1 - Fraction(1, p)) ** 2
    return out


def quality(G: GcdGraph) -> Quality:
    mv, mw = G.mass(G.V), G.mass(G.W)
    exact = edge_density(G) ** 10 * mv * mw
    for p in G.P:
        exact *= _prime_part(p, G.f[p], G.g[p])
    return Quality(exact, tuple(sorted(G.P)))


def specialize(G: GcdGraph, p: int, k: int, l: int) -> GcdGraph:
    """``G_{p^k, p^l}``: vertices with exact valuations k resp. l, p added to P."""
    if p in G.P:
        raise PreconditionError(f"prime {p} already in P")
    if not is_prime(p) or k < 0 or l < 0:
        raise PreconditionError("need a prime p and non-negative k, l")
    V = frozenset(v for v in G.V if valuation(v, p) == k)
    W = frozenset(w for w in G.W if valuation(w, p) == l)
    E = frozenset((v, w) for v, w in G.E if v in V and w in W)
    return G.replace(V=V, W=W, E=E, P=G.P | {p}, f={**G.f, p: k}, g={**G.g, p: l})


# ---------------------------------------------------------------------------
# the pair-choice lemma and one specialization step


@dataclass(frozen=True)
class PairChoice:
    k: int
    l: int
    achieved: Fraction
    """``mu(E_{p^k,p^l}) / mu(E)``."""
    score: Fraction
    """``(achieved / threshold)^10``, exact; the pair qualifies iff ``score >= 1``."""
    alpha_k: Fraction
    beta_k: Fraction
    alpha_l: Fraction
    beta_l: Fraction

    @property
    def qualifies(self) -> bool:
        return self.score >= 1

    @property
    def S(self) -> Fraction:
        return s_value(self.alpha_k, self.beta_k, self.alpha_l, self.beta_l)

    def threshold(self) -> Real:
        if self.k == self.l:
            return certified.power(self.alpha_k * self.beta_k, Fraction(9, 10))
        return certified.as_real(self.S / (40 * (self.k - self.l) ** 2))


def s_value(ak: Fraction, bk: Fraction, al: Fraction, bl: Fraction) -> Fraction:
    return ak * (1 - bk) + bk * (1 - ak) + al * (1 - bl) + bl * (1 - al)


def pair_candidates(G: GcdGraph, p: int) -> list[PairChoice]:
    """All ``(k, l)`` with ``alpha_k, beta_l > 0`` together with their exact scores."""
    alpha, beta = class_ratios(G, p)
    mE = G.edge_mass()
    if mE == 0:
        raise PreconditionError("pair choice needs delta(G) > 0")
    edges = edge_classes(G, p)
    out = []
    for k in sorted(a for a, x in alpha.items() if x > 0):
        for l in sorted(b for b, x in beta.items() if x > 0):
            a = edges.get((k, l), Fraction(0)) / mE
            ak, bk = alpha[k], beta.get(k, Fraction(0))
            al, bl = alpha.get(l, Fraction(0)), beta[l]
            if k == l:
                score = a**10 / (ak * bk) ** 9
            else:
                score = (a * 40 * (k - l) ** 2 / s_value(ak, bk, al, bl)) ** 10
            out.append(PairChoice(k, l, a, score, ak, bk, al, bl))
    return out


def find_pair(G: GcdGraph, p: int) -> PairChoice:
    """Best qualifying ``(k, l)``: maximal score, then lexicographically smallest."""
    if p not in remaining_primes(G):
        raise PreconditionError(f"{p} is not in R(G)")
    cands = pair_candidates(G, p)
    best = None
    for c in cands:
        if best is None or c.score > best.score:
            best = c
    if best is None or not best.qualifies:
        raise LemmaViolation("pair-existence", f"no (k,l) meets the threshold for p={p}", G)
    return best


@dataclass(frozen=True)
class StepTrace:
    prime: int
    k: int
    l: int
    branch: str
    delta_before: Fraction
    delta_after: Fraction
    quality_before: Quality
    quality_after: Quality
    quality_ratio_exact: Fraction
    """Rational part of ``q(G')/q(G)``; the full ratio adds one factor ``(1 - p^(-31/30))^(-10)``."""

    @property
    def delta_ratio(self) -> Fraction:
        return self.delta_after / self.delta_before

    @property
    def d(self) -> int:
        return abs(self.k - self.l)

    def quality_ratio(self) -> Real:
        return self.quality_ratio_exact * _prime_factor(self.prime)

    def delta_bound(self) -> Fraction:
        return Fraction(1) if self.k == self.l else Fraction(1, 20 * self.d**2)

    def quality_bound(self) -> Real:
        """``1`` or ``p^(|k-l| - 1/2) / (10^15 |k-l|^20)``."""
        if self.k == self.l:
            return Real(1)
        d = self.d
        return certified.power(self.prime, Fraction(2 * d - 1, 2)) / (10**15 * d**20)

    def as_record(self) -> dict:
        return {
            "prime": self.prime,
            "k": self.k,
            "l": self.l,
            "branch": self.branch,
            "delta_before": self.delta_before,
            "delta_after": self.delta_after,
            "delta_ratio": self.delta_ratio,
            "quality_ratio": self.quality_ratio().enclosure(),
        }


def _quality_step_holds(p: int, d: int, exact_ratio: Fraction) -> bool:
    """``exact_ratio * (1-p^(-31/30))^(-10) >= p^(d - 1/2) / (10^15 d^20)``."""
    # the certified factor exceeds 1, so the squared rational test is sufficient
    if exact_ratio**2 * p * 10**30 * d**40 >= p ** (2 * d):
        return True
    bound = certified.power(p, Fraction(2 * d - 1, 2)) / (10**15 * d**20)
    return (exact_ratio * _prime_factor(p)).compare(bound) >= 0


def step_122(G: GcdGraph, p: int) -> tuple[GcdGraph, StepTrace]:
    """Specialize at the chosen pair for ``p`` and check both displayed ratio bounds."""
    if edge_density(G) == 0:
        raise PreconditionError("step needs delta(G) > 0")
    if p not in r_music(G):
        raise PreconditionError(f"{p} is not in R-natural(G)")
    choice = find_pair(G, p)
    k, l = choice.k, choice.l
    H = specialize(G, p, k, l)
    d0, d1 = edge_density(G), edge_density(H)
    q0, q1 = quality(G), quality(H)
    exact_ratio = q1.exact / q0.exact
    trace = StepTrace(p, k, l, "k=l" if k == l else "k!=l", d0, d1, q0, q1, exact_ratio)
    if not remaining_primes(H) <= remaining_primes(G) - {p}:
        raise LemmaViolation("specialization-step", "R(G') is not inside R(G) minus p", G)
    if k == l:
        if d1 < d0:
            raise LemmaViolation("specialization-step", f"density dropped at p={p}, k=l={k}", G)
        if exact_ratio < 1:
            raise LemmaViolation("specialization-step", f"quality dropped at p={p}, k=l={k}", G)
    else:
        d = abs(k - l)
        if d1 * 20 * d**2 < d0:
            raise LemmaViolation("specialization-step", f"density ratio below 1/(20 d^2) at p={p}", G)
        if not _quality_step_holds(p, d, exact_ratio):
            raise LemmaViolation("specialization-step", f"quality ratio below bound at p={p}", G)
    return H, trace


def check_optim2(ak, bk, al, bl, R) -> bool:
    """Whether ``S^2 / (alpha_k beta_l) >= R/2`` for admissible rational inputs."""
    ak, bk, al, bl, R = (Fraction(x) for x in (ak, bk, al, bl, R))
    if not all(0 <= x <= 1 for x in (ak, bk, al, bl)):
        raise PreconditionError("alpha, beta must lie in [0, 1]")
    if ak <= 0 or bl <= 0:
        raise PreconditionError("need alpha_k, beta_l > 0")
    if ak + al > 1 or bk + bl > 1:
        raise PreconditionError("need alpha_k + alpha_l <= 1 and beta_k + beta_l <= 1")
    if R < 0 or 2 * R * R > 1:
        raise PreconditionError("need R in [0, 1/sqrt(2)]")
    if min(ak, bk) > 1 - R or min(al, bl) > 1 - R:
        raise PreconditionError("need min(alpha_k, beta_k), min(alpha_l, beta_l) <= 1 - R")
    S = s_value(ak, bk, al, bl)
    return 2 * S * S >= R * ak * bl


# ---------------------------------------------------------------------------
# the cleaning lemmas


def _quarter_sign(x: Fraction, c: Fraction, s: Threshold) -> int:
    """Sign of ``x - c / s^(1/4)`` for ``x, c >= 0``."""
    if not isinstance(s, Real) or s.exact is not None:
        s = s.exact if isinstance(s, Real) else Fraction(s)
        d = x**4 * s - c**4
        return (d > 0) - (d < 0)
    return certified.as_real(x).compare(c / certified.power(s, Fraction(1, 4)))


def _l_sum_split(v: int, w: int, s: Threshold, R: frozenset) -> tuple[Fraction, Fraction]:
    """``(L_s(v,w), S(v,w))``: all primes ``p >= s`` of ``vw/gcd^2`` and those inside R."""
    L = S = Fraction(0)
    for p in differing_primes(v, w):
        if prime_at_least(p, s):
            L += Fraction(1, p)
            if p in R:
                S += Fraction(1, p)
    return L, S


@dataclass
class PruneReport:
    s: Threshold
    removed: int
    edge_mass_before: Fraction
    edge_mass_after: Fraction
    weighted_s: Fraction
    surrogate: bool
    """Whether ``sum mu mu S <= mu(E) / (100 s^(1/4))``, under which the 24/25 retention is checked."""


def prune_edges_84(G: GcdGraph, s: Threshold, *, trace: Optional[list] = None) -> GcdGraph:
    """Drop edges whose large primes from R(G) contribute more than ``1/(4 s^(1/4))``."""
    if certified.compare(s, 1) < 0:
        raise PreconditionError("need s >= 1")
    if _quarter_sign(edge_density(G), Fraction(1), s) < 0:
        raise PreconditionError("need delta(G) >= s^(-1/4)")
    if r_music(G):
        raise PreconditionError(f"R-natural(G) = {sorted(r_music(G))} is not empty")
    R = remaining_primes(G)
    split = {}
    for v, w in sorted(G.E):
        L, S = _l_sum_split(v, w, s, R)
        if _quarter_sign(L, Fraction(1), s) < 0:
            raise PreconditionError(f"edge ({v},{w}) has L_s = {L} < s^(-1/4)")
        split[(v, w)] = (L, S)
    quarter = Fraction(1, 4)
    keep = frozenset(e for e, (L, S) in split.items() if _quarter_sign(S, quarter, s) <= 0)
    H = G.replace(E=keep)

    mu = G.mu
    mE, mE1 = G.edge_mass(), H.edge_mass()
    weighted = sum((mu[v] * mu[w] * S for (v, w), (_, S) in split.items()), Fraction(0))
    # Markov: mu(E \ E') <= 4 s^(1/4) sum mu mu S, i.e. (mu(E\E')/4)^4 <= weighted^4 s
    lost = mE - mE1
    if lost and _quarter_sign(weighted, lost / 4, s) < 0:
        raise LemmaViolation("edge-pruning", "Markov step fails", G)
    surrogate = _quarter_sign(mE / 100, weighted, s) >= 0 if weighted else True
    if surrogate:
        if 25 * mE1 < 24 * mE:
            raise LemmaViolation("edge-pruning", "retention below 24/25 under the mass surrogate", G)
        if 2 * quality(H).exact < quality(G).exact:
            raise LemmaViolation("edge-pruning", "quality below half under the mass surrogate", G)
    for e in keep:
        L, S = split[e]
        # sum over p not in R equals L - S; S <= 1/(4 s^(1/4)) and L >= s^(-1/4) give 3/(4 s^(1/4))
        if _quarter_sign(L - S, Fraction(3, 4), s) < 0:
            raise LemmaViolation("edge-pruning", f"surviving edge {e} misses the 3/(4 s^(1/4)) bound", G)
    if trace is not None:
        trace.append(PruneReport(s, len(G.E) - len(keep), mE, mE1, weighted, surrogate))
    return H


def prune_84_applicable(G: GcdGraph, s: Threshold) -> Optional[str]:
    """``None`` if the pruning preconditions hold, otherwise the reason they fail."""
    if edge_density(G) == 0 or _quarter_sign(edge_density(G), Fraction(1), s) < 0:
        return "density below s^(-1/4)"
    if r_music(G):
        return "R-natural not empty"
    R = remaining_primes(G)
    for v, w in G.E:
        if _quarter_sign(_l_sum_split(v, w, s, R)[0], Fraction(1), s) < 0:
            return f"edge ({v},{w}) has L_s below s^(-1/4)"
    return None


@dataclass(frozen=True)
class RemovalStep:
    side: str
    vertex: int
    delta_before: Fraction
    delta_after: Fraction
    quality_before: Fraction
    quality_after: Fraction


def is_regular(G: GcdGraph) -> bool:
    """Every vertex sees at least ``9 delta / 10`` of the opposite side's mass."""
    delta = edge_density(G)
    mv, mw = G.mass(G.V), G.mass(G.W)
    nv, nw = _adjacency(G)
    tenth = Fraction(9, 10) * delta
    return all(x >= tenth * mw for x in nv.values()) and all(x >= tenth * mv for x in nw.values())


def regularize_85(G: GcdGraph, *, trace: Optional[list] = None) -> GcdGraph:
    """Remove low-degree vertices one at a time until every vertex is well connected."""
    if edge_density(G) == 0:
        raise PreconditionError("regularization needs delta(G) > 0")
    cur = G
    while True:
        delta = edge_density(cur)
        mv, mw = cur.mass(cur.V), cur.mass(cur.W)
        nv, nw = _adjacency(cur)
        tenth = Fraction(9, 10) * delta
        target = None
        for v in sorted(cur.V):
            if nv[v] < tenth * mw:
                target = ("V", v)
                break
        if target is None:
            for w in sorted(cur.W):
                if nw[w] < tenth * mv:
                    target = ("W", w)
                    break
        if target is None:
            return cur
        side, x = target
        if side == "V":
            nxt = cur.replace(V=cur.V - {x}, E=frozenset(e for e in cur.E if e[0] != x))
        else:
            nxt = cur.replace(W=cur.W - {x}, E=frozenset(e for e in cur.E if e[1] != x))
        step = RemovalStep(side, x, delta, edge_density(nxt), quality(cur).exact, quality(nxt).exact)
        # P is unchanged, so comparing exact parts compares full qualities
        if step.delta_after < step.delta_before or step.quality_after < step.quality_before:
            raise LemmaViolation("regularization", f"removing {side}-vertex {x} lowered delta or quality", cur)
        if trace is not None:
            trace.append(step)
        cur = nxt


# ---------------------------------------------------------------------------
# iterations and pipelines


@dataclass
class IterationResult:
    graph: GcdGraph
    steps: list[StepTrace]
    quality_ratio: Real
    delta_ratio: Fraction
    branch_a: bool
    branch_b: bool

    @property
    def branch(self) -> str:
        if self.branch_a and self.branch_b:
            return "both"
        return "a" if self.branch_a else "b" if self.branch_b else "neither"

    def as_record(self) -> dict:
        return {
            "steps": [s.as_record() for s in self.steps],
            "quality_ratio": self.quality_ratio.enclosure(),
            "delta_ratio": self.delta_ratio,
            "p_diff": sorted(self.graph.p_diff),
            "branch": self.branch,
        }


def iterate_quality_density(G: GcdGraph, C: Fraction, t: Fraction) -> IterationResult:
    """Apply the specialization step at the smallest prime of R-natural until it is empty."""
    if G.P:
        raise PreconditionError("the iteration starts from a graph with empty P")
    if edge_density(G) == 0:
        raise PreconditionError("the iteration needs delta(G) > 0")
    if certified.compare(C, 1) < 0 or certified.compare(t, 1) < 0:
        raise PreconditionError("need C >= 1 and t >= 1")
    cur, steps = G, []
    while True:
        rm = r_music(cur)
        if not rm:
            break
        cur, tr = step_122(cur, min(rm))
        steps.append(tr)
    q_ratio = quality(cur).ratio(quality(G))
    d_ratio = edge_density(cur) / edge_density(G)
    _check_products(G, steps, q_ratio, d_ratio)
    branch_a = q_ratio.compare(certified.as_real(t) ** 3) >= 0
    F = big_f(C, t)
    n_diff = len(cur.p_diff)
    branch_b = (
        (certified.as_real(d_ratio) ** 4 * F).compare(1) >= 0
        and certified.exp(n_diff).compare(t) <= 0
    )
    return IterationResult(cur, steps, q_ratio, d_ratio, branch_a, branch_b)


def _check_products(G: GcdGraph, steps: list[StepTrace], q_ratio: Real, d_ratio: Fraction) -> None:
    d_bound = Fraction(1)
    q_bound = Real(1)
    for s in steps:
        d_bound *= s.delta_bound()
        if s.k != s.l:
            q_bound = q_bound * s.quality_bound()
    if d_ratio < d_bound:
        raise LemmaViolation("iteration", "density ratio below the product of step bounds", G)
    if steps and q_ratio.compare(q_bound) < 0:
        raise LemmaViolation("iteration", "quality ratio below the product of step bounds", G)


@dataclass
class GreedyReport:
    choices: list[tuple[int, int, int]]
    quality_ratio: Optional[Real]


def greedy_empty_r(G: GcdGraph) -> tuple[GcdGraph, GreedyReport]:
    """Specialize the smallest remaining prime at the pair of largest resulting quality until R is empty.

    The quality ratio is reported without any lower-bound guarantee.
    """
    if edge_density(G) == 0:
        raise PreconditionError("needs delta(G) > 0")
    cur, choices = G, []
    while True:
        R = remaining_primes(cur)
        if not R:
            break
        p = min(R)
        alpha, beta = class_ratios(cur, p)
        best, best_q = None, None
        for k in sorted(alpha):
            for l in sorted(beta):
                H = specialize(cur, p, k, l)
                qx = quality(H).exact
                if best_q is None or qx > best_q:
                    best, best_q = H, qx
        choices.append((p, best.f[p], best.g[p]))
        cur = best
    ratio = quality(cur).ratio(quality(G)) if quality(G).exact else None
    return cur, GreedyReport(choices, ratio)


@dataclass
class PipelineResult:
    graph: GcdGraph
    variant: int
    stages: list[tuple[str, GcdGraph]]
    iteration: Optional[IterationResult] = None
    prune_status: Optional[str] = None

    def quality_ratios(self) -> list[tuple[str, Real]]:
        q0 = quality(self.stages[0][1])
        return [(name, quality(H).ratio(q0)) for name, H in self.stages[1:]]

    def as_record(self) -> dict:
        rec = {
            "variant": self.variant,
            "stages": [name for name, _ in self.stages],
            "quality_ratios": {name: r.enclosure() for name, r in self.quality_ratios()},
            "delta": edge_density(self.graph),
            "P": sorted(self.graph.P),
        }
        if self.iteration is not None:
            rec["iteration"] = self.iteration.as_record()
        if self.prune_status is not None:
            rec["prune"] = self.prune_status
        return rec


def pipeline_goodgcd(
    G: GcdGraph, C: Fraction = Fraction(1), t: Fraction = Fraction(1), *, variant: int = 1, s: Threshold | None = None
) -> PipelineResult:
    """Compose the cleaning steps in the order of either good-subgraph construction.

    Variant 1: empty R, then regularize.  Variant 2: quality/density
    iteration, edge pruning when its preconditions hold (``s`` defaults to
    ``F_C(t)``), empty R, regularize.
    """
    if G.P:
        raise PreconditionError("the pipeline starts from a graph with empty P")
    stages = [("input", G)]
    it, status = None, None
    cur = G
    if variant == 2:
        it = iterate_quality_density(cur, C, t)
        cur = it.graph
        stages.append(("quality-density", cur))
        s = big_f(C, t) if s is None else s
        status = prune_84_applicable(cur, s)
        if status is None:
            cur = prune_edges_84(cur, s)
            stages.append(("prune", cur))
            status = "applied"
        if edge_density(cur) == 0:
            raise LemmaViolation("pipeline", "pruning emptied the edge set", G)
    elif variant != 1:
        raise ValueError("variant must be 1 or 2")
    cur, _ = greedy_empty_r(cur)
    stages.append(("empty-R", cur))
    cur = regularize_85(cur)
    stages.append(("regularize", cur))
    if remaining_primes(cur):
        raise LemmaViolation("pipeline", "R(G') is not empty", G)
    if not is_regular(cur):
        raise LemmaViolation("pipeline", "output is not regular", G)
    for (_, a), (_, b) in zip(stages, stages[1:]):
        if not is_subgraph(b, a) or validate(b):
            raise LemmaViolation("pipeline", "stage output is not a valid GCD subgraph", G)
    return PipelineResult(cur, variant, stages, it, status)


# ---------------------------------------------------------------------------
# random instances

SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31)


def random_label(rng: random.Random, bound: int = 10**4) -> int:
    """Product of random small prime powers, at most ``bound``."""
    n = 1
    for _ in range(rng.randint(0, 6)):
        p = rng.choice(SMALL_PRIMES[:6] if rng.random() < 0.8 else SMALL_PRIMES)
        if n * p <= bound:
            n *= p
    return n


def random_weight(rng: random.Random) -> Fraction:
    den = rng.randint(1, 12)
    return Fraction(rng.randint(1, 8 * den), den)


def random_graph(rng: random.Random, *, max_side: int = 12, bound: int = 10**4) -> GcdGraph:
    """Random GCD graph with empty P and a non-empty edge set."""
    while True:
        V = {random_label(rng, bound) for _ in range(rng.randint(1, max_side))}
        W = {random_label(rng, bound) for _ in range(rng.randint(1, max_side))}
        density = rng.choice((0.3, 0.6, 0.9, 1.0))
        E = [(v, w) for v in sorted(V) for w in sorted(W) if rng.random() < density]
        if E:
            break
    mu = {n: random_weight(rng) for n in sorted(V | W)}
    return GcdGraph.build(mu, V, W, E)


def pruning_graph(rng: random.Random, *, max_side: int = 12) -> GcdGraph:
    """Dense graph whose edges all have ``L_2 >= 1``: V carries 210, W avoids 2, 3, 5, 7."""
    V = {210 * rng.randint(1, 47) for _ in range(rng.randint(1, max_side))}
    coprime = [n for n in range(1, 2001) if gcd(n, 210) == 1]
    W = {rng.choice(coprime) for _ in range(rng.randint(1, max_side))}
    E = [(v, w) for v in sorted(V) for w in sorted(W)]
    mu = {n: random_weight(rng) for n in sorted(V | W)}
    return GcdGraph.build(mu, V, W, E)
