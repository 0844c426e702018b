from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from dslab.psi import FAMILIES, PsiFormatError, PsiFunction, generate_psi, parse_rational

H = Fraction(1, 2)


def test_constant():
    assert generate_psi("constant:1/2", 3).values == (H, H, H)


def test_prime_support():
    assert generate_psi("prime-support:1/2", 4).values == (0, H, H, 0)


def test_smooth_support():
    assert generate_psi("smooth-support:1/2:3", 10).support() == [1, 2, 3, 4, 6, 8, 9]


def test_reciprocal_log():
    psi = generate_psi("reciprocal-log", 16)
    # min(1/2, 1/ceil(log2(q+1)))
    assert [psi(q) for q in (1, 2, 3, 4, 7, 8, 15, 16)] == [H, H, H, Fraction(1, 3), Fraction(1, 3), Fraction(1, 4), Fraction(1, 4), Fraction(1, 5)]


@pytest.mark.parametrize("spec", ["constant:3/4", "constant:-1/2", "constant:x", "nope", "smooth-support:1/2", "reciprocal-log:1"])
def test_bad_specs(spec):
    with pytest.raises((PsiFormatError, ValueError)):
        generate_psi(spec, 5)


def test_file_round_trip(tmp_path):
    for spec in FAMILIES + ("smooth-support:1/3:5",):
        psi = generate_psi(spec, 50)
        path = tmp_path / "psi.txt"
        psi.save(path)
        assert PsiFunction.load(path) == psi
        assert generate_psi(f"file:{path}", 30) == psi.truncate(30)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "Q 3\n1 1/2\n2 1/2\n",
        "Q 2\n1 1/2\n2 1/2\n2 1/2\n",
        "Q 2\n1 1/2\n3 1/2\n",
        "Q 2\n1 1/2\n2 2/3\n",
        "R 2\n1 1/2\n2 1/2\n",
        "Q 1\n1 1/0\n",
    ],
)
def test_file_format_errors(text):
    with pytest.raises(PsiFormatError):
        PsiFunction.loads(text)


def test_out_of_range_lookup():
    psi = generate_psi("constant:1/2", 3)
    with pytest.raises(IndexError):
        psi(4)
    with pytest.raises(IndexError):
        psi(0)


@given(st.lists(st.fractions(min_value=0, max_value=H), min_size=1, max_size=40))
def test_dumps_loads_identity(vals):
    psi = PsiFunction(tuple(vals))
    assert PsiFunction.loads(psi.dumps()) == psi


def test_parse_rational():
    assert parse_rational("3/6") == H
    assert parse_rational("2") == 2
    with pytest.raises(PsiFormatError):
        parse_rational("1/2/3")
