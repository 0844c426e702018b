from fractions import Fraction
from math import gcd, prod

import pytest
from hypothesis import given, strategies as st

from dslab import certified
from dslab.arithmetic import (
    Factorization,
    big_d,
    differing_primes,
    f_threshold,
    factorize,
    is_prime,
    l_sum,
    lmn_split,
    sieve,
    smooth_part,
    totient_table,
    totients,
)
from dslab.psi import PsiFunction, generate_psi

HALF = generate_psi("constant:1/2", 1000)


def naive_factor(n):
    out, p = [], 2
    while p * p <= n:
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        if e:
            out.append((p, e))
        p += 1
    if n > 1:
        out.append((n, 1))
    return out


@pytest.mark.parametrize("n, expected", [(12, [(2, 2), (3, 1)]), (1, []), (97, [(97, 1)])])
def test_factorize_examples(n, expected):
    assert list(factorize(n)) == expected


def test_factorize_products_and_totients_up_to_1e5():
    N = 10**5
    phi = totients(N)
    s = sieve(N)
    for n in range(1, N + 1):
        f = s.factor(n)
        assert prod(p**e for p, e in f) == n
        tot = Fraction(n)
        for p, _ in f:
            tot *= 1 - Fraction(1, p)
        assert phi[n] == tot


@given(st.integers(1, 10**6))
def test_factorize_matches_trial_division(n):
    assert list(factorize(n)) == naive_factor(n)


def test_factorization_invariants():
    with pytest.raises(ValueError):
        Factorization(((3, 1), (2, 1)))
    assert Factorization().value == 1
    with pytest.raises(ValueError):
        Factorization(((2, 0),))
    assert factorize(360).value == 360
    assert factorize(360).valuation(2) == 3


def test_totient_examples():
    assert totient_table(3) == {1: 1, 2: 1, 3: 2}
    assert totients(12)[12] == 4
    assert totients(97)[97] == 96


def test_big_d_examples():
    assert big_d(2, 3, HALF) == Fraction(3, 2)
    assert big_d(6, 4, HALF) == Fraction(3, 2)
    zero4 = PsiFunction.from_function(lambda q: Fraction(0) if q == 4 else Fraction(1, 2), 4)
    assert big_d(4, 4, zero4) == 0


@given(st.integers(1, 1000), st.integers(1, 1000))
def test_big_d_symmetric(q, r):
    assert big_d(q, r, HALF) == big_d(r, q, HALF)


def test_l_sum_examples():
    assert l_sum(1, 6, 4) == Fraction(5, 6)
    assert l_sum(3, 6, 4) == Fraction(1, 3)
    assert l_sum(7, 30, 30) == 0


@given(st.integers(1, 2000), st.integers(1, 2000), st.integers(1, 40), st.integers(1, 40))
def test_l_sum_monotone_and_two_shift(q, r, s1, s2):
    lo, hi = sorted((s1, s2))
    assert l_sum(lo, q, r) >= l_sum(hi, q, r)
    m = q * r // gcd(q, r) ** 2
    # no prime lies in [1, 2), so the 1/2 indicator term splits off between s = 2 and s = 3
    assert l_sum(1, q, r) == l_sum(2, q, r)
    assert l_sum(2, q, r) == l_sum(3, q, r) + (Fraction(1, 2) if m % 2 == 0 else 0)


def test_l_sum_brute_force():
    for q in range(1, 60):
        for r in range(1, 60):
            m = q * r // gcd(q, r) ** 2
            for s in (1, 2, 3, Fraction(7, 2), 11):
                want = sum(Fraction(1, p) for p in range(2, m + 1) if m % p == 0 and is_prime(p) and p >= s)
                assert l_sum(s, q, r) == want


def test_differing_primes():
    assert differing_primes(12, 18) == [2, 3]
    assert differing_primes(6, 6) == []
    assert differing_primes(4, 9) == [2, 3]
    assert differing_primes(20, 50) == [2, 5]
    assert differing_primes(12, 6) == [2]


@pytest.mark.parametrize(
    "q, r, lmn", [(12, 18, (1, 6, 36)), (6, 6, (6, 1, 1)), (4, 9, (1, 1, 36))]
)
def test_lmn_examples(q, r, lmn):
    s = lmn_split(q, r)
    assert (s.l, s.m, s.n) == lmn


def test_lmn_invariants_exhaustive():
    for q in range(1, 151):
        for r in range(1, 151):
            s = lmn_split(q, r)
            g = gcd(q, r)
            assert s.l * s.m == g
            assert s.l**2 * s.m * s.n == q * r
            assert s.l * s.n == q * r // g
            rad_n = prod(p for p, _ in factorize(s.n))
            rad_qr = prod(differing_primes(q, r))
            assert rad_n == rad_qr


@given(st.integers(1, 1000), st.integers(1, 1000))
def test_lmn_invariants_random(q, r):
    s = lmn_split(q, r)
    assert s.l * s.m == gcd(q, r)
    assert s.l**2 * s.m * s.n == q * r


def test_smooth_part_examples():
    assert smooth_part(36, 2) == 4
    assert smooth_part(36, 3) == 36
    assert smooth_part(1, 5) == 1
    assert smooth_part(2 * 3 * 5 * 7, Fraction(9, 2)) == 6


def test_f_threshold_values():
    f0 = f_threshold(1, 0)
    assert abs(f0.approx - 3.189) < 1e-3
    assert f0.lo <= f0.value.enclosure().mid <= f0.hi
    assert f0.enclosure.width <= f0.hi * Fraction(1, 2**40)
    x = certified.exp(100) - 100
    assert abs(f_threshold(1, x).approx - 171.6) < 0.1
    assert f_threshold(1, 10**6).lo > f_threshold(1, 10**3).hi


def test_f_threshold_float_oracle():
    from math import exp, log

    for C, x in [(1, 0), (2, 10), (1, Fraction(3, 2)), (3, 10**5)]:
        L = log(float(x) + 100)
        want = exp(L * log(log(L)) / (8 * C * log(L)) + 1)
        assert abs(f_threshold(C, x).approx - want) < 1e-9 * want


def test_f_threshold_rejects():
    with pytest.raises(ValueError):
        f_threshold(Fraction(1, 2), 3)
    with pytest.raises(ValueError):
        f_threshold(1, -1)
