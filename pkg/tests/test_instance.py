from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qlll import linalg
from qlll.generators import (
    appendix_e_instance,
    appendix_f_instance,
    one_qubit_pair_instance,
    random_commuting_instance,
    random_rank_instance,
    single_flaw_instance,
)
from qlll.instance import (
    ConditionNotSatisfied,
    EnumerationLimitError,
    Flaw,
    QsatInstance,
    check_cec,
    check_glc,
    check_shc,
    check_slc,
    default_glc_witness,
    dependency_graph,
    flaw_probability,
    graph_from_edges,
    indep_polynomial,
    independent_sets,
    resampling_bound,
    sub_hamiltonian,
    uniform_gap,
)

from helpers import diag_flaw, two_adjacent, two_independent


def brute_force_q(g, x, I=frozenset()):
    """Alternating sum over all subsets, filtered for independence."""
    total = Fraction(0)
    m = g.size
    for r in range(m + 1):
        for S in itertools.combinations(range(m), r):
            S = frozenset(S)
            if not I <= S or any(j in g.neighbors[i] for i in S for j in S):
                continue
            term = Fraction((-1) ** (len(S) - len(I)))
            for f in S:
                term *= Fraction(x[f])
            total += term
    return total


# ---------------------------------------------------------------------------
# flaws and graphs


@pytest.mark.parametrize("rank,expected", [(1, Fraction(1, 4)), (0, Fraction(0)), (3, Fraction(3, 4))])
def test_flaw_probability(rank, expected):
    d = np.zeros(4)
    d[:rank] = 1
    assert flaw_probability(Flaw("f", (0, 1), np.diag(d))) == expected


def test_flaw_validation():
    with pytest.raises(ValueError):
        Flaw("f", (0,), np.array([[1.0, 0.5], [0.5, 0.0]]))
    with pytest.raises(ValueError):
        Flaw("f", (), np.eye(1))
    with pytest.raises(ValueError):
        Flaw("f", (0, 0), np.eye(4))
    with pytest.raises(ValueError):
        Flaw("f", (0, 1), np.eye(2))


def test_instance_validation():
    f = diag_flaw("a", (0,), ["1"])
    with pytest.raises(ValueError):
        QsatInstance(1, [f, f])
    with pytest.raises(ValueError):
        QsatInstance(1, [diag_flaw("a", (1,), ["1"])])


def test_dependency_graph_examples():
    assert dependency_graph(two_independent()).edges() == []
    assert dependency_graph(two_adjacent()).edges() == [(0, 1)]
    inst = appendix_e_instance()
    assert {tuple(inst.ids(e)) for e in inst.graph.edges()} == {("a", "c"), ("b", "c")}


def test_graph_symmetric_and_irreflexive():
    rng = np.random.default_rng(0)
    inst = random_rank_instance(5, 5, 2, 1, rng)
    g = inst.graph
    for i in range(g.size):
        assert i not in g.neighbors[i]
        for j in range(g.size):
            share = bool(set(inst.flaws[i].support) & set(inst.flaws[j].support))
            assert (j in g.neighbors[i]) == (share and i != j)
            assert (j in g.neighbors[i]) == (i in g.neighbors[j])


def test_independent_sets_examples():
    assert len(independent_sets(graph_from_edges(3, []))) == 8
    tri = graph_from_edges(3, [(0, 1), (1, 2), (0, 2)])
    assert independent_sets(tri) == [frozenset(), frozenset({0}), frozenset({1}), frozenset({2})]
    path = graph_from_edges(3, [(0, 2), (1, 2)])  # a - c - b with a=0, b=1, c=2
    assert set(independent_sets(path)) == {frozenset(), frozenset({0}), frozenset({1}),
                                           frozenset({2}), frozenset({0, 1})}
    with pytest.raises(EnumerationLimitError):
        independent_sets(graph_from_edges(21, []))


def test_indep_polynomial_examples():
    single = graph_from_edges(1, [])
    assert indep_polynomial(single, [Fraction(1, 4)]) == Fraction(3, 4)
    adj = graph_from_edges(2, [(0, 1)])
    assert indep_polynomial(adj, [Fraction(1, 4)] * 2) == Fraction(1, 2)
    ind = graph_from_edges(2, [])
    assert indep_polynomial(ind, [Fraction(1, 4)] * 2) == Fraction(9, 16)
    with pytest.raises(ValueError):
        indep_polynomial(adj, [0.25, 0.25], {0, 1})


# ---------------------------------------------------------------------------
# conditions


def triangle() -> QsatInstance:
    """Three pairwise-adjacent one-qubit-sharing flaws: max |closed neighbourhood| = 3."""
    return QsatInstance(3, [diag_flaw("a", (0, 1), ["11"]), diag_flaw("b", (1, 2), ["11"]),
                            diag_flaw("c", (0, 2), ["11"])])


def test_slc_examples():
    inst = triangle()
    assert inst.graph.max_closed_degree() == 3
    rep = check_slc(inst, p=[0.1, 0.1, 0.1])
    assert rep.satisfied and rep.witness == 3
    assert 1 / (3 * math.e) == pytest.approx(0.12263, abs=1e-5)
    assert not check_slc(inst, p=[0.1, 0.2, 0.1]).satisfied
    iso = QsatInstance(1, [diag_flaw("a", (0,), ["1"])])
    assert check_slc(iso, p=[0.3]).satisfied


def test_glc_examples():
    inst = triangle()
    rep = check_glc(inst, p=[0.1, 0.1, 0.1])
    assert rep.satisfied and rep.witness == (Fraction(1, 3),) * 3
    iso = QsatInstance(1, [diag_flaw("a", (0,), ["1"])])
    assert check_glc(iso, x=[0.6]).satisfied  # p = 1/2
    assert not check_glc(two_adjacent(), x=[0.3, 0.3], p=[0.3, 0.3]).satisfied
    with pytest.raises(ValueError):
        check_glc(iso, x=[1.0])


def test_cec_examples():
    iso = QsatInstance(2, [diag_flaw("a", (0, 1), ["11"])])
    assert check_cec(iso, [0.5]).satisfied
    half = single_flaw_instance(1, 1)
    assert not check_cec(half, [0.5]).satisfied
    with pytest.raises(ValueError):
        check_cec(iso, [0.0])


def test_cec_slc_instance_with_heuristic_witness():
    inst = triangle()
    p = [Fraction(1, 10)] * 3
    y = [Fraction(1, 2)] * 3  # 1/(d-1) with d = 3
    rep = check_cec(inst, y, p=p)
    # y/p = 5 against 1 + 3/2: satisfied
    assert rep.satisfied


def test_shc_examples():
    rep = check_shc(single_flaw_instance(2, 1))
    assert rep.satisfied
    assert rep.q_values[frozenset()] == Fraction(3, 4)
    assert rep.q_values[frozenset({0})] == Fraction(1, 4)
    half = QsatInstance(2, [diag_flaw("a", (0,), ["1"]), diag_flaw("b", (0, 1), ["10", "11"])])
    rep = check_shc(half)
    assert rep.q_values[frozenset()] == 0 and not rep.satisfied


def test_sub_hamiltonian_examples():
    inst = QsatInstance(2, [diag_flaw("a", (0,), ["1"]), diag_flaw("b", (1,), ["1"])])
    assert np.allclose(sub_hamiltonian(inst, []), 0)
    assert np.allclose(sub_hamiltonian(inst, [0, 1]), np.diag([0, 1, 1, 2]))
    f = appendix_f_instance(0.01)
    h = sub_hamiltonian(f, [0, 1])
    k = linalg.kernel_projector(h)
    assert np.trace(k).real == pytest.approx(1)
    assert k[2, 2].real == pytest.approx(1)


def test_uniform_gap_examples():
    rng = np.random.default_rng(1)
    assert uniform_gap(random_commuting_instance(4, 3, 2, 1, rng)) == pytest.approx(1)
    assert uniform_gap(one_qubit_pair_instance()) == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-12)
    assert uniform_gap(single_flaw_instance(2, 1)) == pytest.approx(1)
    assert uniform_gap(single_flaw_instance(2, 1), []) == math.inf
    zero = QsatInstance(1, [Flaw("z", (0,), np.zeros((2, 2)))])
    assert uniform_gap(zero) == math.inf


def test_resampling_bound_examples():
    b = resampling_bound(single_flaw_instance(2, 1), "SHC")
    assert b.core == pytest.approx(1 + 4 / 3 * (1 + math.log(4 / 3)), rel=1e-12)
    assert b.core == pytest.approx(2.717, abs=1e-3)
    assert b.scaled == pytest.approx(2 * b.core)
    small = resampling_bound(single_flaw_instance(2, 1), "SHC", p=[Fraction(1, 10**6)])
    assert small.core == pytest.approx(1, abs=1e-5)
    ind = resampling_bound(two_independent(), "SHC")
    ratio = (3 / 16) / (9 / 16)
    m = min(math.log(16 / 9), 2 * math.log(1 + ratio))
    assert ind.core == pytest.approx(1 + 4 * 2 * ratio * (1 + m), rel=1e-12)
    assert ind.q_empty == pytest.approx(9 / 16)


def test_resampling_bound_rejects_failed_condition():
    with pytest.raises(ConditionNotSatisfied):
        resampling_bound(one_qubit_pair_instance(), "SHC")
    with pytest.raises(ConditionNotSatisfied):
        resampling_bound(appendix_e_instance(), "SLC")


def test_glc_and_cec_bound_formulas():
    inst = two_independent()
    x = default_glc_witness(inst)
    b = resampling_bound(inst, "GLC")
    a = sum(float(v) / (1 - float(v)) for v in x)
    m = min(math.log(16 / 9), sum(-math.log(1 - float(v)) for v in x))
    assert b.core == pytest.approx(1 + 4 * a * (1 + m))
    y = [0.5, 0.5]
    b = resampling_bound(inst, "CEC", y)
    assert b.core == pytest.approx(1 + 4 * 1.0 * (1 + min(math.log(16 / 9), 2 * math.log(1.5))))
    with pytest.raises(ValueError):
        resampling_bound(inst, "CEC")


# ---------------------------------------------------------------------------
# properties


def random_small_instance(seed: int) -> QsatInstance:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    m = int(rng.integers(1, 5))
    k = int(rng.integers(1, min(n, 3) + 1))
    rank = int(rng.integers(1, 2**k))
    return random_commuting_instance(n, m, k, rank, rng)


def test_implication_chain_on_random_instances():
    for seed in range(200):
        inst = random_small_instance(seed)
        slc, glc, shc = check_slc(inst), check_glc(inst), check_shc(inst)
        if slc.satisfied:
            assert glc.satisfied, seed
        if glc.satisfied:
            assert shc.satisfied, seed


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_q_empty_factorises_over_components(seed):
    rng = np.random.default_rng(seed)
    m1, m2 = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    e1 = [(i, j) for i in range(m1) for j in range(i + 1, m1) if rng.random() < 0.5]
    e2 = [(i + m1, j + m1) for i in range(m2) for j in range(i + 1, m2) if rng.random() < 0.5]
    x = [Fraction(int(rng.integers(1, 8)), 16) for _ in range(m1 + m2)]
    whole = indep_polynomial(graph_from_edges(m1 + m2, e1 + e2), x)
    left = indep_polynomial(graph_from_edges(m1, e1), x[:m1])
    right = indep_polynomial(graph_from_edges(m2, [(i - m1, j - m1) for i, j in e2]), x[m1:])
    assert whole == left * right


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_indep_polynomial_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 11))
    edges = [(i, j) for i in range(m) for j in range(i + 1, m) if rng.random() < 0.3]
    g = graph_from_edges(m, edges)
    x = [Fraction(int(rng.integers(0, 10)), 20) for _ in range(m)]
    assert indep_polynomial(g, x) == brute_force_q(g, x)
    for I in independent_sets(g)[:5]:
        assert indep_polynomial(g, x, I) == brute_force_q(g, x, I)


def test_q_empty_lower_bound_and_frustration_freeness():
    for seed in range(60):
        inst = random_small_instance(seed)
        rep = check_shc(inst)
        if rep.satisfied:
            assert rep.q_values[frozenset()] >= Fraction(1, 2**inst.n)
            assert np.trace(inst.kernel_projector(inst.all_flaws)).real >= 1 - 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_uniform_gap_is_minimum(seed):
    rng = np.random.default_rng(seed)
    inst = random_rank_instance(3, 3, 2, 1, rng)
    gam = uniform_gap(inst)
    for r in range(4):
        for S in itertools.combinations(range(3), r):
            assert gam <= uniform_gap(inst, S) + 1e-12


def test_commuting_gap_at_least_one():
    for seed in range(30):
        assert uniform_gap(random_small_instance(seed)) >= 1 - 1e-9
