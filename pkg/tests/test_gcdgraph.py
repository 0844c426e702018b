import random
from fractions import Fraction
from math import gcd

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from dslab import gcdgraph as gg
from dslab.gcdgraph import GcdGraph

ONE = Fraction(1)


def uniform(V, W, E, **kw):
    mu = {n: ONE for n in set(V) | set(W)}
    return GcdGraph.build(mu, V, W, E, **kw)


def complete(V, W):
    return GcdGraph.complete({n: ONE for n in set(V) | set(W)}, V, W)


def axioms(G):
    return sorted({v.axiom for v in gg.validate(G)})


# -- axioms ---------------------------------------------------------------


def test_validate_examples():
    assert gg.validate(uniform([1], [1], [(1, 1)])) == []
    assert gg.validate(uniform([2], [4], [(2, 4)], P=[2], f={2: 1}, g={2: 2})) == []
    assert gg.validate(uniform([2], [8], [(2, 8)], P=[2], f={2: 1}, g={2: 1})) == []
    # f(2) = 0 != g(2) = 1 forces odd v
    assert "(iii)" in axioms(uniform([2], [4], [(2, 4)], P=[2], f={2: 0}, g={2: 1}))


def test_validate_other_violations():
    assert axioms(uniform([3], [1], [(3, 1)], P=[2], f={2: 1}, g={2: 0})) == ["(i)"]
    assert axioms(uniform([4], [4], [(4, 4)], P=[2], f={2: 1}, g={2: 1})) == ["(ii)"]
    assert axioms(uniform([1], [1], [(1, 2)])) == ["edges"]
    assert axioms(uniform([1], [1], [], P=[4], f={4: 0}, g={4: 0})) == ["primes"]
    assert axioms(GcdGraph.build({}, [1], [1], [])) == ["measure"]


def test_density_examples():
    assert gg.edge_density(complete([2, 3], [5, 7])) == 1
    assert gg.edge_density(uniform([2, 3], [5, 7], [])) == 0
    assert gg.edge_density(uniform([2, 3], [2, 3], [(2, 2), (2, 3), (3, 2)])) == Fraction(3, 4)
    assert gg.edge_density(GcdGraph.build({1: 0}, [1], [1], [(1, 1)])) == 0


def test_neighborhood():
    G = uniform([1, 2, 3], [5, 6], [(1, 5), (2, 5), (2, 6)])
    assert gg.neighborhood(G, 2, "V") == (frozenset({5, 6}), 2)
    assert gg.neighborhood(G, 5, "W") == (frozenset({1, 2}), 2)
    assert gg.neighborhood(G, 3, "V") == (frozenset(), 0)
    with pytest.raises(KeyError):
        gg.neighborhood(G, 9, "V")
    full = complete([1, 2], [3, 4])
    assert gg.neighborhood(full, 1, "V")[0] == full.W


def test_remaining_primes():
    assert gg.remaining_primes(uniform([2], [3], [(2, 3)])) == frozenset()
    assert gg.remaining_primes(uniform([6], [10], [(6, 10)])) == {2}
    G = uniform([6], [10], [(6, 10)], P=[2], f={2: 1}, g={2: 1})
    assert gg.remaining_primes(G) == frozenset()


def test_r_music():
    assert gg.r_music(uniform([2], [2], [(2, 2)])) == frozenset()
    # V = W = {2, 3}: the class k = 0 carries 1/2 on both sides, and 1/2 > 1 - 1/sqrt(2)
    G = complete([2, 3], [2, 3])
    assert gg.remaining_primes(G) == {2, 3}
    assert gg.r_music(G) == frozenset()
    G7 = complete([1, 7], [1, 7])
    assert gg.r_music(G7) == {7}
    assert gg.r_music(uniform([2], [3], [(2, 3)])) == frozenset()


def test_inv_sqrt_threshold_matches_high_precision():
    for p in (2, 3, 5, 7, 11, 101):
        for k in range(0, 41):
            x = Fraction(k, 40)
            with mpmath.workdps(50):
                want = mpmath.mpf(k) / 40 <= 1 - 1 / mpmath.sqrt(p)
            assert gg.at_most_one_minus_inv_sqrt(x, p) == want


# -- quality --------------------------------------------------------------


def test_quality_examples():
    G = complete([2, 3], [5, 7])
    q = gg.quality(G)
    assert q.exact == 4 and not q.primes
    assert gg.quality(complete([1], [1])).value().exact == 1
    G2 = uniform([2], [2], [(2, 2)], P=[2], f={2: 1}, g={2: 1})
    val = float(gg.quality(G2).value())
    with mpmath.workdps(40):
        want = 4 / (1 - mpmath.mpf(2) ** (-mpmath.mpf(31) / 30)) ** 10
    assert abs(val - float(want)) < 1e-9 * val
    assert abs(val - 3268.0055) < 1e-3


def test_quality_prime_part():
    G = uniform([4], [2], [(4, 2)], P=[2], f={2: 2}, g={2: 1})
    assert gg.quality(G).exact == 2


# -- specialization and pairs ---------------------------------------------


def test_specialize_examples():
    G = complete([2, 3], [2, 3])
    H = gg.specialize(G, 2, 1, 1)
    assert (H.V, H.W, H.E, H.P) == ({2}, {2}, {(2, 2)}, {2})
    assert gg.validate(H) == [] and gg.is_subgraph(H, G)
    H = gg.specialize(G, 5, 0, 0)
    assert (H.V, H.W, H.E) == (G.V, G.W, G.E) and H.P == {5} and H.f[5] == H.g[5] == 0
    H = gg.specialize(G, 2, 3, 0)
    assert not H.V and gg.edge_density(H) == 0
    with pytest.raises(gg.PreconditionError):
        gg.specialize(gg.specialize(G, 2, 0, 0), 2, 0, 0)


def test_find_pair_examples():
    G = complete([2, 3], [2, 3])
    cands = {(c.k, c.l): c for c in gg.pair_candidates(G, 2)}
    c01 = cands[(0, 1)]
    assert c01.achieved == Fraction(1, 4)
    # S = 4 * (1/2)(1/2) = 1, so the threshold is 1/40
    assert c01.S == 1 and c01.qualifies
    choice = gg.find_pair(G, 2)
    assert choice.qualifies
    single = complete([4, 12], [4, 20])
    c = gg.find_pair(single, 2)
    assert (c.k, c.l) == (2, 2) and c.achieved == 1


def test_find_pair_tie_break():
    G7 = complete([1, 7], [1, 7])
    c = gg.find_pair(G7, 7)
    assert (c.k, c.l) == (0, 1)
    assert c.score == 10**10


def test_edge_classes_partition():
    rng = random.Random(5)
    for _ in range(30):
        G = gg.random_graph(rng)
        for p in gg.remaining_primes(G):
            assert sum(gg.edge_classes(G, p).values()) == G.edge_mass()


# -- the specialization step ----------------------------------------------


def test_step_on_g7():
    G7 = complete([1, 7], [1, 7])
    assert gg.quality(G7).exact == 4
    H, tr = gg.step_122(G7, 7)
    assert (H.V, H.W, H.E, H.P, H.f[7], H.g[7]) == ({1}, {7}, {(1, 7)}, {7}, 0, 1)
    assert tr.delta_ratio == 1
    assert abs(float(tr.quality_ratio()) - 7.367) < 1e-3
    assert gg.remaining_primes(H) <= gg.remaining_primes(G7) - {7}


def test_step_equal_valuations():
    # a perfect matching on the classes of 7: the diagonal pair (0, 0) wins the tie-break
    G = uniform([1, 7], [1, 7], [(1, 1), (7, 7)])
    assert gg.r_music(G) == {7}
    H, tr = gg.step_122(G, 7)
    assert (tr.k, tr.l, tr.branch) == (0, 0, "k=l")
    assert H.E == {(1, 1)} and H.f[7] == H.g[7] == 0
    assert tr.quality_ratio_exact >= 1 and tr.delta_ratio >= 1


def test_step_precondition():
    with pytest.raises(gg.PreconditionError):
        gg.step_122(complete([2, 3], [2, 3]), 2)


# -- optimisation inequality ----------------------------------------------


def test_optim2_examples():
    h = Fraction(1, 2)
    assert gg.check_optim2(h, 0, 0, h, h)
    assert gg.check_optim2(h, h, h, h, 0)
    assert gg.check_optim2(h, h, h, h, h)


def test_optim2_preconditions():
    h = Fraction(1, 2)
    with pytest.raises(gg.PreconditionError):
        gg.check_optim2(0, h, h, h, h)
    with pytest.raises(gg.PreconditionError):
        gg.check_optim2(h, h, Fraction(3, 4), h, h)
    with pytest.raises(gg.PreconditionError):
        gg.check_optim2(h, h, h, h, Fraction(3, 4))
    with pytest.raises(gg.PreconditionError):
        gg.check_optim2(Fraction(9, 10), Fraction(9, 10), Fraction(1, 10), Fraction(1, 10), Fraction(1, 2))


# -- pruning --------------------------------------------------------------


W_PRUNE = 2 * 3 * 5 * 7 * 11 * 13


def test_prune_without_r_is_identity():
    # coprime-to-gcd layout: R(G) is empty, every edge has L_2 >= 2^(-1/4)
    G = complete([1], [W_PRUNE])
    assert not gg.remaining_primes(G)
    assert gg.prune_84_applicable(G, 2) is None
    assert gg.prune_edges_84(G, 2) == G


def test_prune_removes_edge_with_small_r_prime():
    # 2 is in R(G) but not in R-natural; the edge (4, W) has 2 in vw/gcd^2
    G = complete([2, 4], [W_PRUNE])
    assert gg.remaining_primes(G) == {2} and not gg.r_music(G)
    trace = []
    H = gg.prune_edges_84(G, 2, trace=trace)
    assert H.E == {(2, W_PRUNE)}
    assert trace[0].removed == 1 and trace[0].weighted_s == Fraction(1, 2)
    assert not trace[0].surrogate
    assert gg.validate(H) == [] and gg.is_subgraph(H, G)


def test_prune_preconditions():
    with pytest.raises(gg.PreconditionError):
        gg.prune_edges_84(complete([1, 7], [1, 7]), 2)
    assert gg.prune_84_applicable(complete([1, 7], [1, 7]), 2) is not None


# -- regularization -------------------------------------------------------


def test_regularize_examples():
    G = complete([2, 3], [5, 7])
    assert gg.regularize_85(G) == G
    G = uniform([2, 3], [2, 3], [(2, 2), (2, 3), (3, 2)])
    trace = []
    H = gg.regularize_85(G, trace=trace)
    assert (trace[0].side, trace[0].vertex) == ("V", 3)
    assert gg.is_regular(H)
    assert gg.quality(H).exact >= gg.quality(G).exact
    assert gg.edge_density(H) >= gg.edge_density(G)
    for st_ in trace:
        assert st_.quality_after >= st_.quality_before and st_.delta_after >= st_.delta_before
    with pytest.raises(gg.PreconditionError):
        gg.regularize_85(uniform([1], [1], []))


# -- iteration, greedy and pipelines --------------------------------------


def test_iterate_coprime():
    G = complete([2, 3], [5, 7])
    it = gg.iterate_quality_density(G, 1, 10)
    assert it.steps == [] and it.delta_ratio == 1 and it.branch_b


def test_iterate_g7():
    it = gg.iterate_quality_density(complete([1, 7], [1, 7]), 1, 10)
    assert [s.prime for s in it.steps] == [7]
    assert it.branch == "b"
    with pytest.raises(gg.PreconditionError):
        gg.iterate_quality_density(it.graph, 1, 10)


def test_greedy_examples():
    G = complete([2, 3], [5, 7])
    H, rep = gg.greedy_empty_r(G)
    assert H == G and rep.choices == []
    G = uniform([6], [6], [(6, 6)])
    H, rep = gg.greedy_empty_r(G)
    assert rep.choices == [(2, 1, 1), (3, 1, 1)]
    assert gg.edge_density(H) == 1 and not gg.remaining_primes(H)


def test_pipelines():
    G = complete([2, 3], [5, 7])
    res = gg.pipeline_goodgcd(G)
    assert res.graph == gg.regularize_85(G)
    G7 = complete([1, 7], [1, 7])
    res = gg.pipeline_goodgcd(G7, 1, 10, variant=2)
    assert [n for n, _ in res.stages] == ["input", "quality-density", "empty-R", "regularize"]
    assert res.prune_status.startswith("edge")
    assert gg.validate(res.graph) == []


# -- serialization --------------------------------------------------------


def test_round_trip(tmp_path):
    rng = random.Random(11)
    for _ in range(20):
        G = gg.random_graph(rng)
        assert GcdGraph.loads(G.dumps()) == G
    G = gg.specialize(complete([2, 3], [2, 3]), 2, 1, 0)
    path = tmp_path / "g.txt"
    G.save(path)
    assert GcdGraph.load(path) == G


@pytest.mark.parametrize("text", ["", "graph\n", "gcdgraph\nmu 1\n", "gcdgraph\nV 1\nV 2\n", "gcdgraph\nmu 1 1/0\n", "gcdgraph\nX 1\n"])
def test_loads_errors(text):
    with pytest.raises(ValueError):
        GcdGraph.loads(text)


# -- random instances -----------------------------------------------------


def test_random_instance_ranges():
    rng = random.Random(2)
    for _ in range(50):
        G = gg.random_graph(rng)
        assert len(G.V) <= 12 and len(G.W) <= 12
        assert all(1 <= n <= 10**4 for n in G.V | G.W)
        assert all(0 < x <= 8 for x in G.mu.values())
        assert gg.validate(G) == []


@given(st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_transitivity_on_random_graphs(seed):
    rng = random.Random(seed)
    G = gg.random_graph(rng)
    if gg.edge_density(G) == 0:
        return
    H1, _ = gg.greedy_empty_r(G)
    H2 = gg.regularize_85(H1)
    for H in (H1, H2):
        assert gg.validate(H) == []
        assert gg.is_subgraph(H, G)
        assert gg.remaining_primes(H) <= gg.remaining_primes(G)
