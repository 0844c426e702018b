from fractions import Fraction
from math import log

import pytest

from dslab import bounds as bd
from dslab.intervals import overlap_exact
from dslab.psi import FAMILIES, generate_psi

HALF = generate_psi("constant:1/2", 400)


def test_pv_factor_examples():
    assert bd.pv_factor(2, 3, HALF) == Fraction(2, 3)
    # 5 and 7 with D = 7/2 < 5: both primes count
    assert bd.pv_factor(5, 7, HALF) == Fraction(8, 10) * Fraction(12, 14) * Fraction(6, 5) * Fraction(8, 7)
    with pytest.raises(ValueError):
        bd.pv_factor(4, 4, HALF)


def test_empty_euler_product():
    # q = 3, r = 12: D = 2 and the only differing prime is 2, not above D
    assert bd.pv_factor(3, 12, HALF) == bd.approx_measure(3, HALF) * bd.approx_measure(12, HALF)


def test_km_parts_examples():
    assert bd.km_bound_parts(2, 3, HALF, 4, 5).euler_factor == 1
    assert bd.km_bound_parts(2, 3, HALF, 4, 2).euler_factor == Fraction(3, 2)
    rep = bd.km_bound_parts(2, 3, HALF, 4, 2)
    want = 4**-2 + 2**4 * log(3.5) * log(2) / 1.5
    enc = rep.error_enclosure()
    assert enc.lo <= Fraction(want) * (1 + Fraction(1, 10**12)) and enc.hi >= Fraction(want) * (1 - Fraction(1, 10**12))
    assert rep.product_term == Fraction(1, 3)
    with pytest.raises(ValueError):
        bd.km_bound_parts(2, 2, HALF, 4, 2)
    with pytest.raises(ValueError):
        bd.km_bound_parts(2, 3, HALF, Fraction(1, 2), 2)


def test_km_specialized():
    rep = bd.km_bound_specialized(2, 3, HALF, 1)
    assert abs(float(rep.threshold) - 3.19177601652) < 1e-9
    # 3 < F_1(3/2): no prime counts
    assert rep.euler_factor == 1
    assert abs(float(rep.error_term) - 1 / log(3.5)) < 1e-12
    assert bd.km_bound_specialized(3, 2, HALF, 1).ratio == rep.ratio


def test_zero_overlap_pairs():
    tiny = generate_psi("constant:1/1000", 60)
    rep = bd.km_bound_specialized(7, 11, tiny, 1)
    assert rep.D < Fraction(1, 2) and rep.exact_overlap == 0 and rep.ratio == 0
    zero = generate_psi("constant:0", 10)
    rep = bd.km_bound_parts(3, 5, zero, 2, 4)
    assert rep.error_term is None and rep.margin().exact == 0


def test_ratio_nonnegative_and_invariants():
    for spec in FAMILIES:
        psi = generate_psi(spec, 40)
        for q in range(1, 41):
            for r in range(q + 1, 41):
                rep = bd.km_bound_parts(q, r, psi, 2, 4)
                assert rep.ratio >= 0 and rep.euler_factor >= 1
                assert rep.product_term == bd.approx_measure(q, psi) * bd.approx_measure(r, psi)


def test_calibrate_matches_direct_scan():
    psi = generate_psi("reciprocal-log", 40)
    cal = bd.calibrate(40, psi)
    sup_pv, sup_m = Fraction(0), {}
    for q in range(1, 41):
        for r in range(q + 1, 41):
            exact = overlap_exact(q, r, psi)
            if not exact:
                continue
            sup_pv = max(sup_pv, exact / bd.pv_factor(q, r, psi))
            for u, T in ((2, 4), (4, 16)):
                m = float(bd.km_bound_parts(q, r, psi, u, T, exact=exact).margin())
                sup_m[(u, T)] = max(sup_m.get((u, T), 0.0), m)
    assert cal.sup_pv == sup_pv
    for key, val in sup_m.items():
        assert abs(float(cal.sup_margin[(Fraction(key[0]), Fraction(key[1]))].mid) - val) <= 1e-12 * val
    assert cal.pairs == 40 * 39 // 2
