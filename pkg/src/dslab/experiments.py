"""Desk-scale experiments: solution counts, the second moment, the pair
partition, the restricted pair sums and the seeded drivers behind the
acceptance suite.

Every driver that takes ``workers`` splits its work into independent exact
pieces and reduces them in a fixed order, so its output does not depend on
the worker count.
"""

from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Callable, Iterable, Optional, Sequence

from . import certified, gcdgraph as gg
from .arithmetic import big_d, big_f, differing_primes, prime_at_least, totients
from .certified import Real
from .intervals import ApproxSets, psi_mass, psi_masses
from .psi import PsiFunction


def parallel_map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """``list(map(fn, items))``, optionally across processes; order is preserved."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _chunks(seq: Sequence, n: int) -> list:
    n = max(1, min(n, len(seq)))
    size, extra = divmod(len(seq), n)
    out, start = [], 0
    for i in range(n):
        stop = start + size + (i < extra)
        out.append(seq[start:stop])
        start = stop
    return out


# ---------------------------------------------------------------------------
# S(Q, alpha)


def count_solutions(Q: int, alpha: Fraction, psi: PsiFunction) -> int:
    """Number of ``q <= Q`` with ``alpha`` in ``A_q``.

    Arcs of one ``A_q`` are disjoint, so this equals the number of coprime
    pairs ``(p, q)`` with torus distance ``|alpha - p/q| < psi(q)/q``.  The
    only candidate numerator is the integer nearest to ``alpha q``.
    """
    psi(Q)
    alpha = Fraction(alpha)
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    A, B = alpha.numerator, alpha.denominator
    values = psi.values
    count = 0
    for q in range(1, Q + 1):
        v = values[q - 1]
        if not v:
            continue
        Aq = A * q
        p0 = (2 * Aq + B) // (2 * B)
        diff = abs(Aq - p0 * B)
        if diff * v.denominator < v.numerator * B and gcd(p0 % q, q) == 1:
            count += 1
    return count


def count_solutions_bruteforce(Q: int, alpha: Fraction, psi: PsiFunction) -> int:
    """Oracle: scan every reduced ``p/q`` with the exact torus distance."""
    alpha = Fraction(alpha)
    n = 0
    for q in range(1, Q + 1):
        for p in range(1, q + 1):
            if gcd(p, q) != 1:
                continue
            d = abs(alpha - Fraction(p, q)) % 1
            d = min(d, 1 - d)
            if d < psi(q) / q:
                n += 1
    return n


# ---------------------------------------------------------------------------
# the second moment


@dataclass
class MomentReport:
    Q: int
    psi_mass: Fraction
    sum_overlaps: Fraction
    subtotals: Optional[dict] = None

    @property
    def ratio(self) -> Optional[Fraction]:
        return self.sum_overlaps / self.psi_mass**2 if self.psi_mass else None

    @property
    def variance(self) -> Fraction:
        """``sum_{q,r} overlap - Psi^2``, the integral of ``(S - Psi)^2``."""
        return self.sum_overlaps - self.psi_mass**2

    def as_record(self) -> dict:
        rec = {
            "Q": self.Q,
            "psi_mass": self.psi_mass,
            "sum_overlaps": self.sum_overlaps,
            "variance": self.variance,
            "ratio": self.ratio,
            "ratio_minus_one": None if self.ratio is None else self.ratio - 1,
            "ratio_approx": None if self.ratio is None else float(self.ratio),
        }
        if self.subtotals is not None:
            rec["subtotals"] = self.subtotals
        return rec


# float keys order the endpoints exactly while any two distinct endpoints
# differ by more than the rounding error, i.e. while den^2 stays far below 2^53
_FLOAT_SAFE_DEN = 1 << 24


def _sweep_chunk(args) -> tuple[int, int, dict[int, int], Fraction]:
    """Partial integral of ``c(alpha)^2`` over ``[lo, hi)``.

    Returns ``(c_start, c_end, acc, boundary)`` where the integral equals
    ``boundary + sum_q acc[q] / (q b_q)``.
    """
    Q, values, lo, hi = args
    events = []
    c_start = 0
    exact_keys = False
    for q in range(1, Q + 1):
        v = values[q - 1]
        if not v:
            continue
        a, b = v.numerator, v.denominator
        N = q * b
        if N > _FLOAT_SAFE_DEN:
            exact_keys = True
        if q == 1:
            # the arc (1 - v, 1 + v) wraps: an up-step at 1 - v, a down-step at v
            pts = ((b - a, 1), (a, -1))
            if Fraction(a, b) >= lo or Fraction(b - a, b) < lo:
                c_start += 1
        else:
            pts = []
            p_lo = max(1, int(lo * q) - 1)
            p_hi = min(q - 1, int(hi * q) + 1)
            for p in range(p_lo, p_hi + 1):
                if gcd(p, q) == 1:
                    pts.append((p * b - a, 1))
                    pts.append((p * b + a, -1))
            # coverage just below lo: an arc with left < lo <= right
            for p in range(max(1, int(lo * q) - 1), min(q - 1, int(lo * q) + 1) + 1):
                if gcd(p, q) == 1 and Fraction(p * b - a, N) < lo <= Fraction(p * b + a, N):
                    c_start += 1
        for num, step in pts:
            x = Fraction(num, N)
            if lo <= x < hi:
                events.append((num / N, q, num, step, N))
    if exact_keys:
        events.sort(key=lambda e: (Fraction(e[2], e[4]), e[1], e[2]))
    else:
        events.sort(key=lambda e: (e[0], e[1], e[2]))
    acc: dict[int, int] = {}
    c = c_start
    for _, q, num, step, _ in events:
        nxt = c + step
        acc[q] = acc.get(q, 0) + num * (c * c - nxt * nxt)
        c = nxt
    boundary = c * c * hi - c_start * c_start * lo
    return c_start, c, acc, boundary


def second_moment(Q: int, psi: PsiFunction, *, workers: int = 1, chunks: int | None = None) -> MomentReport:
    """``sum_{q,r <= Q} overlap(q, r)`` as the integral of ``(sum_q 1_{A_q})^2`` by an endpoint sweep.

    Between consecutive endpoints the count is constant; summation by parts
    turns the integral into integer numerators per denominator ``q b_q``.
    """
    psi(Q)
    n = chunks if chunks is not None else max(1, workers)
    bounds = [Fraction(i, n) for i in range(n + 1)]
    jobs = [(Q, psi.values[:Q], bounds[i], bounds[i + 1]) for i in range(n)]
    parts = parallel_map(_sweep_chunk, jobs, workers)
    for (_, end, _, _), (start, _, _, _) in zip(parts, parts[1:]):
        if end != start:
            raise AssertionError("sweep chunks disagree on the coverage at a boundary")
    if parts[-1][1] != parts[0][0]:
        raise AssertionError("sweep does not close up around the circle")
    acc: dict[int, int] = {}
    total = Fraction(0)
    for _, _, part, boundary in parts:
        total += boundary
        for q, x in part.items():
            acc[q] = acc.get(q, 0) + x
    for q in sorted(acc):
        total += Fraction(acc[q], q * psi(q).denominator)
    return MomentReport(Q, psi_mass(Q, psi), total)


def second_moment_pairwise(Q: int, psi: PsiFunction) -> Fraction:
    """Oracle: the double sum of pairwise exact overlaps."""
    sets = ApproxSets(psi)
    total = Fraction(0)
    for q in range(1, Q + 1):
        total += sets[q].measure()
        for r in range(q + 1, Q + 1):
            total += 2 * sets.overlap(q, r)
    return total


# ---------------------------------------------------------------------------
# the pair partition


LABELS = ("E1", "E2", "E3", "E4", "E5")


@dataclass(frozen=True)
class PairClass:
    label: str
    q: int
    r: int
    D: Fraction
    L: Optional[Fraction] = None
    """The L-sum the label was decided on (at ``F(Psi)`` for E2/E3, ``F(D)`` for E4/E5)."""

    def as_record(self) -> dict:
        return {"q": self.q, "r": self.r, "label": self.label, "D": self.D, "L": self.L}


class Partition:
    """Thresholds of the five-way split of ``[1, Q]^2`` for one ``(Q, C, psi)``."""

    def __init__(self, Q: int, C, psi: PsiFunction):
        self.Q, self.C, self.psi = Q, Fraction(C), psi
        self.Psi = psi_mass(Q, psi)
        if self.Psi < 2:
            raise ValueError(f"the partition needs Psi(Q) >= 2, got {self.Psi}")
        self.logC = certified.log(self.Psi) ** self.C
        self.cutoff = self.Psi / self.logC
        self.F_Psi = big_f(self.C, self.Psi)
        self._above_F_Psi: dict[int, bool] = {}
        self._small_D: dict[Fraction, bool] = {}
        self._F_D: dict[Fraction, Real] = {}
        self._above_F_D: dict[tuple[Fraction, int], bool] = {}
        self._L_small: dict[Fraction, bool] = {}

    def d_small(self, D: Fraction) -> bool:
        hit = self._small_D.get(D)
        if hit is None:
            hit = self._small_D[D] = self.cutoff.compare(D) >= 0
        return hit

    def _l_at_psi(self, q: int, r: int) -> Fraction:
        out = Fraction(0)
        for p in differing_primes(q, r):
            ok = self._above_F_Psi.get(p)
            if ok is None:
                ok = self._above_F_Psi[p] = prime_at_least(p, self.F_Psi)
            if ok:
                out += Fraction(1, p)
        return out

    def _l_at_d(self, q: int, r: int, D: Fraction) -> Fraction:
        F = self._F_D.get(D)
        if F is None:
            F = self._F_D[D] = big_f(self.C, D)
        out = Fraction(0)
        for p in differing_primes(q, r):
            key = (D, p)
            ok = self._above_F_D.get(key)
            if ok is None:
                ok = self._above_F_D[key] = prime_at_least(p, F)
            if ok:
                out += Fraction(1, p)
        return out

    def classify(self, q: int, r: int) -> PairClass:
        if not (1 <= q <= self.Q and 1 <= r <= self.Q):
            raise ValueError("q and r must lie in [1, Q]")
        D = big_d(q, r, self.psi)
        if q == r:
            return PairClass("E1", q, r, D)
        if self.d_small(D):
            L = self._l_at_psi(q, r)
            return PairClass("E2" if L <= 1 else "E3", q, r, D, L)
        L = self._l_at_d(q, r, D)
        small = self._L_small.get(L)
        if small is None:
            small = self._L_small[L] = (L * self.logC).compare(1) <= 0
        return PairClass("E4" if small else "E5", q, r, D, L)


def classify_pair(q: int, r: int, Q: int, C, psi: PsiFunction) -> PairClass:
    return Partition(Q, C, psi).classify(q, r)


def class_subtotals(Q: int, C, psi: PsiFunction) -> dict[str, Fraction]:
    """Overlap mass of each class over ordered pairs in ``[1, Q]^2``."""
    part = Partition(Q, C, psi)
    sets = ApproxSets(psi)
    out = dict.fromkeys(LABELS, Fraction(0))
    for q in range(1, Q + 1):
        out["E1"] += sets[q].measure()
        for r in range(q + 1, Q + 1):
            # the labels are symmetric in (q, r)
            out[part.classify(q, r).label] += 2 * sets.overlap(q, r)
    return out


def class_counts(Q: int, C, psi: PsiFunction) -> dict[str, int]:
    part = Partition(Q, C, psi)
    out = dict.fromkeys(LABELS, 0)
    for q in range(1, Q + 1):
        for r in range(1, Q + 1):
            out[part.classify(q, r).label] += 1
    return out


# ---------------------------------------------------------------------------
# restricted pair sums


@dataclass
class PairSum:
    total: Fraction
    reference: Real
    pairs: int

    @property
    def ratio(self) -> Real:
        return certified.as_real(self.total) / self.reference

    def as_record(self) -> dict:
        return {"sum": self.total, "pairs": self.pairs, "reference": self.reference, "ratio": self.ratio}


def _weights(Q: int, psi: PsiFunction) -> list[Fraction]:
    phi = totients(Q)
    return [Fraction(0)] + [phi[q] * psi(q) / q for q in range(1, Q + 1)]


def proposition_sum_1(Q: int, t, psi: PsiFunction) -> PairSum:
    """Sum of ``phi(q)psi(q)/q * phi(r)psi(r)/r`` over pairs with ``D <= Psi/t``, against ``Psi^2 / t^(1/5)``."""
    psi(Q)
    Psi = psi_mass(Q, psi)
    cutoff = Psi / certified.as_real(t)
    u = _weights(Q, psi)
    total, pairs = Fraction(0), 0
    decided: dict[Fraction, bool] = {}
    for q in range(1, Q + 1):
        for r in range(1, Q + 1):
            D = big_d(q, r, psi)
            ok = decided.get(D)
            if ok is None:
                ok = decided[D] = cutoff.compare(D) >= 0
            if ok:
                pairs += 1
                total += u[q] * u[r]
    ref = certified.as_real(Psi) ** 2 / certified.power(t, Fraction(1, 5)) if Psi else Real(1)
    return PairSum(total, ref, pairs)


def proposition_sum_2(Q: int, t, C, psi: PsiFunction) -> PairSum:
    """Same weights over pairs with ``D <= t Psi`` and ``L_{F(t)} >= F(t)^(-1/4)``, against ``Psi^2 / F(t)^(1/2)``."""
    psi(Q)
    Psi = psi_mass(Q, psi)
    F = big_f(C, t)
    cutoff = certified.as_real(t) * Psi
    u = _weights(Q, psi)
    above: dict[int, bool] = {}
    big_l: dict[Fraction, bool] = {}
    decided: dict[Fraction, bool] = {}
    total, pairs = Fraction(0), 0
    for q in range(1, Q + 1):
        for r in range(1, Q + 1):
            D = big_d(q, r, psi)
            ok = decided.get(D)
            if ok is None:
                ok = decided[D] = cutoff.compare(D) >= 0
            if not ok:
                continue
            L = Fraction(0)
            for p in differing_primes(q, r):
                a = above.get(p)
                if a is None:
                    a = above[p] = prime_at_least(p, F)
                if a:
                    L += Fraction(1, p)
            hit = big_l.get(L)
            if hit is None:
                hit = big_l[L] = L > 0 and (certified.as_real(L) ** 4 * F).compare(1) >= 0
            if hit:
                pairs += 1
                total += u[q] * u[r]
    ref = certified.as_real(Psi) ** 2 / F.sqrt() if Psi else Real(1)
    return PairSum(total, ref, pairs)


def subsequence_qk(k: int, C, psi: PsiFunction) -> int:
    """``min {Q : Psi(Q) >= exp(k^(1/sqrt C))}`` within the table."""
    if k < 1:
        raise ValueError("k must be positive")
    if certified.compare(C, 4) <= 0:
        raise ValueError("need C > 4")
    C = certified.as_real(C)
    threshold = (certified.log(k) / C.sqrt()).exp().exp()
    masses = psi_masses(psi.limit, psi)
    if threshold.compare(masses[-1]) > 0:
        raise ValueError(f"threshold for k={k} is not reached within the psi table")
    lo, hi = 1, psi.limit
    while lo < hi:
        mid = (lo + hi) // 2
        if threshold.compare(masses[mid]) <= 0:
            hi = mid
        else:
            lo = mid + 1
    return lo


# ---------------------------------------------------------------------------
# Monte Carlo for S(Q, alpha)

DYADIC_BITS = 64


@dataclass
class MonteCarloReport:
    Q: int
    seed: int
    psi_mass: Fraction
    samples: list[tuple[int, int]] = field(default_factory=list)
    """``(k, S(Q, k / 2^64))`` in stream order."""

    def deviation(self, S: int) -> Fraction:
        return abs(Fraction(S) / self.psi_mass - 1)

    @property
    def max_deviation(self) -> Optional[Fraction]:
        if not self.samples:
            return None
        return max(self.deviation(S) for _, S in self.samples)

    def reference(self) -> Real:
        """``Psi(Q)^(-1/2)``."""
        return 1 / certified.sqrt(self.psi_mass)

    def as_record(self) -> dict:
        dev = self.max_deviation
        return {
            "Q": self.Q,
            "seed": self.seed,
            "N": len(self.samples),
            "psi_mass": self.psi_mass,
            "max_deviation": dev,
            "max_deviation_approx": None if dev is None else float(dev),
            "psi_mass_inv_sqrt": self.reference(),
        }


def dyadic_stream(seed: int, n: int) -> list[int]:
    rng = random.Random(seed)
    return [rng.getrandbits(DYADIC_BITS) for _ in range(n)]


def _count_batch(args) -> list[int]:
    Q, psi, ks = args
    return [count_solutions(Q, Fraction(k, 1 << DYADIC_BITS), psi) for k in ks]


def monte_carlo_theorem1(Q: int, psi: PsiFunction, N: int, seed: int, *, workers: int = 1) -> MonteCarloReport:
    psi(Q)
    Psi = psi_mass(Q, psi)
    if Psi < 2:
        raise ValueError(f"the Monte Carlo run needs Psi(Q) >= 2, got {Psi}")
    ks = dyadic_stream(seed, N)
    report = MonteCarloReport(Q, seed, Psi)
    if not ks:
        return report
    batches = _chunks(ks, workers)
    counts = [S for part in parallel_map(_count_batch, [(Q, psi, b) for b in batches], workers) for S in part]
    report.samples = list(zip(ks, counts))
    return report


# ---------------------------------------------------------------------------
# the optimisation inequality on random samples


def _rand_unit(rng: random.Random, hi: Fraction) -> Fraction:
    """Random rational in ``[0, hi]``, sometimes at an endpoint."""
    r = rng.random()
    if r < 0.08:
        return Fraction(0)
    if r < 0.16:
        return hi
    den = rng.randint(1, 60)
    return hi * Fraction(rng.randint(0, den), den)


def optim2_sample(rng: random.Random) -> tuple[Fraction, ...]:
    """Random ``(alpha_k, beta_k, alpha_l, beta_l, R)`` satisfying every hypothesis."""
    while True:
        R = Fraction(rng.randint(0, 707), 1000)
        ak = _rand_unit(rng, Fraction(1))
        al = _rand_unit(rng, 1 - ak)
        bl = _rand_unit(rng, Fraction(1))
        bk = _rand_unit(rng, 1 - bl)
        if rng.random() < 0.25:
            # push one side of each minimum onto the boundary 1 - R
            if bk > 1 - R and ak > 1 - R:
                ak = 1 - R
            if al > 1 - R and bl > 1 - R:
                bl = 1 - R
        if ak <= 0 or bl <= 0 or ak + al > 1 or bk + bl > 1:
            continue
        if min(ak, bk) > 1 - R or min(al, bl) > 1 - R:
            continue
        return ak, bk, al, bl, R


def optim2_trials(n: int, seed: int) -> tuple[int, list]:
    """Check the inequality on ``n`` samples; returns ``(passed, failures)``."""
    rng = random.Random(seed)
    ok, bad = 0, []
    for _ in range(n):
        s = optim2_sample(rng)
        if gg.check_optim2(*s):
            ok += 1
        else:
            bad.append(s)
    return ok, bad


# ---------------------------------------------------------------------------
# the GCD-graph lemma suite


PRUNE_S = Fraction(2)


def _instance(seed: int, i: int) -> gg.GcdGraph:
    rng = random.Random(f"gcd-suite:{seed}:{i}")
    return gg.pruning_graph(rng) if i % 4 == 3 else gg.random_graph(rng)


def _closure(name: str, H: gg.GcdGraph, G: gg.GcdGraph, bad: list) -> None:
    if gg.validate(H):
        bad.append(f"{name}: output violates the axioms")
    if not gg.is_subgraph(H, G):
        bad.append(f"{name}: output is not a GCD subgraph of its input")
    if not gg.remaining_primes(H) <= gg.remaining_primes(G):
        bad.append(f"{name}: R grew")


def gcd_instance_checks(args) -> dict:
    """Run every graph operation on one seeded instance and collect violations."""
    seed, i = args
    G = _instance(seed, i)
    bad: list[str] = []
    rec = {"index": i, "V": len(G.V), "W": len(G.W), "E": len(G.E)}
    try:
        if gg.validate(G):
            bad.append("input violates the axioms")
        if gg.GcdGraph.loads(G.dumps()) != G:
            bad.append("serialization round trip changed the graph")
        mE = G.edge_mass()
        R = sorted(gg.remaining_primes(G))
        rec["R"] = R
        for p in R:
            if sum(gg.edge_classes(G, p).values()) != mE:
                bad.append(f"edge classes at p={p} do not partition E")
            gg.find_pair(G, p)
        rng = random.Random(f"gcd-suite-op:{seed}:{i}")
        if R:
            p = rng.choice(R)
            k = rng.choice(sorted(gg.class_masses(G, p, "V")))
            l = rng.choice(sorted(gg.class_masses(G, p, "W")))
            _closure("specialize", gg.specialize(G, p, k, l), G, bad)

        # the iteration, step by step and as a whole
        cur, steps = G, 0
        while gg.r_music(cur):
            nxt, _ = gg.step_122(cur, min(gg.r_music(cur)))
            _closure("step", nxt, cur, bad)
            for p in gg.remaining_primes(nxt):
                gg.find_pair(nxt, p)
            cur, steps = nxt, steps + 1
        it = gg.iterate_quality_density(G, 1, 10)
        if it.graph != cur:
            bad.append("iteration differs from the stepwise replay")
        _closure("iterate", it.graph, G, bad)
        rec["steps"] = steps
        rec["branch"] = it.branch

        H, _ = gg.greedy_empty_r(G)
        _closure("empty-R", H, G, bad)
        if gg.remaining_primes(H):
            bad.append("empty-R left primes in R")

        trace: list = []
        H = gg.regularize_85(G, trace=trace)
        _closure("regularize", H, G, bad)
        if not gg.is_regular(H):
            bad.append("regularize output is not regular")
        rec["removed"] = len(trace)

        status = gg.prune_84_applicable(it.graph, PRUNE_S)
        rec["prune"] = status is None
        if status is None:
            H = gg.prune_edges_84(it.graph, PRUNE_S)
            _closure("prune", H, it.graph, bad)
            _closure("prune-transitive", H, G, bad)

        for variant in (1, 2):
            res = gg.pipeline_goodgcd(G, 1, 10, variant=variant, s=PRUNE_S)
            _closure(f"pipeline-{variant}", res.graph, G, bad)
    except gg.LemmaViolation as exc:
        bad.append(str(exc))
        rec["instance"] = exc.instance
    rec["violations"] = bad
    return rec


def gcd_lemma_suite(n: int = 200, seed: int = 0, *, workers: int = 1) -> list[dict]:
    jobs = [(seed, i) for i in range(n)]
    return parallel_map(gcd_instance_checks, jobs, workers)
