"""Structural right-hand sides of the classical and refined overlap bounds.

Neither bound states its implied constant, so the module evaluates the
bounds without it and :func:`calibrate` records the empirical suprema over
a corpus of pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from . import certified
from .arithmetic import Threshold, big_d, big_f, differing_primes, totients
from .certified import Enclosure, Real
from .intervals import ApproxSets, overlap_exact
from .psi import PsiFunction


def _strictly_above(p: int, T: Threshold) -> bool:
    if isinstance(T, Real):
        return T.compare(p) < 0
    return p > T


def approx_measure(q: int, psi: PsiFunction, phi: Optional[list[int]] = None) -> Fraction:
    phi_q = phi[q] if phi is not None else totients(q)[q]
    return 2 * phi_q * psi(q) / q


@dataclass(frozen=True)
class BoundReport:
    q: int
    r: int
    D: Fraction
    threshold: Threshold
    exact_overlap: Fraction
    product_term: Fraction
    euler_factor: Fraction
    error_term: Optional[Real]
    """``None`` when D = 0, where the error expression is unbounded."""

    @property
    def ratio(self) -> Fraction:
        """``exact_overlap / (product_term * euler_factor)``; 0 when the overlap vanishes."""
        if self.exact_overlap == 0:
            return Fraction(0)
        return self.exact_overlap / (self.product_term * self.euler_factor)

    def error_enclosure(self) -> Optional[Enclosure]:
        return None if self.error_term is None else self.error_term.enclosure()

    def margin(self) -> Real:
        """``exact_overlap / (product * euler * (1 + error))``."""
        if self.exact_overlap == 0:
            return Real(0)
        return self.ratio / (1 + self.error_term)

    def implied_constant(self) -> Real:
        """Smallest K with ``exact <= product (1 + K error) euler`` for this pair."""
        if self.exact_overlap == 0:
            return Real(0)
        return (self.ratio - 1) / self.error_term


def _check_pair(q: int, r: int):
    if q == r:
        raise ValueError("overlap bounds are stated for q != r")


def euler_product(q: int, r: int, T: Threshold, *, shifted: bool = True) -> Fraction:
    """``prod (1 + 1/(p-1))`` (or ``1 + 1/p`` when not shifted) over primes ``p > T`` dividing ``qr/gcd^2``."""
    out = Fraction(1)
    for p in differing_primes(q, r):
        if _strictly_above(p, T):
            out *= Fraction(p, p - 1) if shifted else Fraction(p + 1, p)
    return out


def pv_factor(q: int, r: int, psi: PsiFunction) -> Fraction:
    _check_pair(q, r)
    phi = totients(max(q, r))
    prod = approx_measure(q, psi, phi) * approx_measure(r, psi, phi)
    return prod * euler_product(q, r, big_d(q, r, psi), shifted=False)


def error_term(u: Fraction, T: Threshold, D: Fraction) -> Optional[Real]:
    """``u^(-u/2) + T^u log(D+2) log T / D``; ``None`` for D = 0."""
    if D == 0:
        return None
    u = certified.as_real(u)
    T = certified.as_real(T)
    return u ** (-u / 2) + T**u * certified.log(D + 2) * T.log() / D


def _report(q, r, psi, T, err, exact, phi) -> BoundReport:
    prod = approx_measure(q, psi, phi) * approx_measure(r, psi, phi)
    return BoundReport(
        q=q,
        r=r,
        D=big_d(q, r, psi),
        threshold=T,
        exact_overlap=exact,
        product_term=prod,
        euler_factor=euler_product(q, r, T),
        error_term=err,
    )


def km_bound_parts(
    q: int, r: int, psi: PsiFunction, u: Fraction, T: Fraction, *, exact: Optional[Fraction] = None
) -> BoundReport:
    _check_pair(q, r)
    if u < 1 or T < 2:
        raise ValueError("need u >= 1 and T >= 2")
    exact = overlap_exact(q, r, psi) if exact is None else exact
    return _report(q, r, psi, T, error_term(u, T, big_d(q, r, psi)), exact, totients(max(q, r)))


def km_bound_specialized(
    q: int, r: int, psi: PsiFunction, C: Fraction, *, exact: Optional[Fraction] = None
) -> BoundReport:
    _check_pair(q, r)
    if C < 1:
        raise ValueError("need C >= 1")
    D = big_d(q, r, psi)
    exact = overlap_exact(q, r, psi) if exact is None else exact
    err = None if D == 0 else certified.log(D + 2) ** (-Fraction(C))
    return _report(q, r, psi, big_f(C, D), err, exact, totients(max(q, r)))


# ---------------------------------------------------------------------------
# calibration


@dataclass
class Calibration:
    pairs: int = 0
    nonzero: int = 0
    sup_pv: Fraction = Fraction(0)
    argsup_pv: Optional[tuple[int, int]] = None
    sup_margin: dict = None
    argsup_margin: dict = None

    def as_record(self) -> dict:
        return {
            "pairs": self.pairs,
            "nonzero": self.nonzero,
            "sup_pv": str(self.sup_pv),
            "argsup_pv": self.argsup_pv,
            "sup_margin": {f"u={u},T={T}": enc.format() for (u, T), enc in self.sup_margin.items()},
            "argsup_margin": {f"u={u},T={T}": a for (u, T), a in self.argsup_margin.items()},
        }


def calibrate(
    Q: int, psi: PsiFunction, params: Iterable[tuple[Fraction, Fraction]] = ((2, 4), (4, 16))
) -> Calibration:
    """Suprema over ``q != r <= Q`` of ``exact / pv_factor`` and of the refined margin per ``(u, T)``.

    Pairs are visited unordered; every quantity involved is symmetric in (q, r).
    The refined margin depends on the pair only through the rational ratio and D,
    so only the largest ratio per distinct D is certified.
    """
    params = [(Fraction(u), Fraction(T)) for u, T in params]
    sets = ApproxSets(psi)
    phi = totients(Q)
    lam = [Fraction(0)] + [approx_measure(q, psi, phi) for q in range(1, Q + 1)]
    out = Calibration(sup_margin={}, argsup_margin={})
    best_by_d: dict[tuple, dict[Fraction, tuple[Fraction, tuple[int, int]]]] = {p: {} for p in params}
    for q in range(1, Q + 1):
        if not lam[q]:
            out.pairs += Q - q
            continue
        for r in range(q + 1, Q + 1):
            out.pairs += 1
            if not lam[r]:
                continue
            D = big_d(q, r, psi)
            exact = sets.overlap(q, r)
            if not exact:
                continue
            out.nonzero += 1
            primes = differing_primes(q, r)
            prod = lam[q] * lam[r]
            pv = prod
            for p in primes:
                if p > D:
                    pv *= Fraction(p + 1, p)
            x = exact / pv
            if x > out.sup_pv:
                out.sup_pv, out.argsup_pv = x, (q, r)
            for u, T in params:
                euler = Fraction(1)
                for p in primes:
                    if p > T:
                        euler *= Fraction(p, p - 1)
                ratio = exact / (prod * euler)
                slot = best_by_d[(u, T)]
                if D not in slot or ratio > slot[D][0]:
                    slot[D] = (ratio, (q, r))
    for key, slot in best_by_d.items():
        u, T = key
        best, arg = None, None
        for D in sorted(slot):
            ratio, pair = slot[D]
            m = ratio / (1 + error_term(u, T, D))
            if best is None or m.compare(best) > 0:
                best, arg = m, pair
        out.sup_margin[key] = Enclosure(Fraction(0), Fraction(0)) if best is None else best.enclosure()
        out.argsup_margin[key] = arg
    return out
