import numpy as np
import pytest
from hypothesis import given, strategies as st

from birklab.oracle import direct_oracle, relation_holds, subgi_oracle
from birklab.problems import CnfFormula, DigraphInstance, gen_random_cnf, gen_random_digraph
from birklab.reductions import (
    InstancePair, Relation, build_clique_pattern, build_hc_pattern, build_hp_pattern, build_ksat_pair,
    build_matching_pair, build_matching_pattern, build_pair, build_sat_pair, build_subgi_pair,
    normalize_clause_width, pad_pattern,
)

TWO_CYCLE = DigraphInstance(2, ((1, 2), (2, 1)))
PATH3 = DigraphInstance(3, ((1, 2), (2, 1), (2, 3), (3, 2)))
CYCLE3 = DigraphInstance(3, ((1, 2), (2, 3), (3, 1)))
TRIANGLE = DigraphInstance(3, ((1, 2), (2, 1), (1, 3), (3, 1), (2, 3), (3, 2)))


def test_subgi_pair_examples():
    p = build_subgi_pair(TWO_CYCLE, DigraphInstance(2, ((1, 2),)))
    assert p.G.tolist() == [[0, 1], [1, 0]] and p.S.tolist() == [[0, 1], [0, 0]]
    eq = build_subgi_pair(CYCLE3, CYCLE3, Relation.EQUAL)
    v = subgi_oracle(eq)
    assert v.yes and v.witness.image == (0, 1, 2)
    assert not subgi_oracle(build_subgi_pair(PATH3, TRIANGLE)).yes


def test_pair_validation():
    with pytest.raises(ValueError):
        InstancePair(np.zeros((2, 2)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        InstancePair(np.zeros((3, 3)), np.zeros((2, 2)), Relation.EQUAL)
    with pytest.raises(ValueError):
        InstancePair([[-1]], [[0]])


def test_pattern_examples():
    assert build_clique_pattern(2).tolist() == [[0, 1], [1, 0]]
    S = build_clique_pattern(3)
    assert S.sum() == 6 and not np.diag(S).any()
    assert build_hc_pattern(3).tolist() == [[0, 0, 1], [1, 0, 0], [0, 1, 0]]
    assert build_hp_pattern(3).tolist() == [[0, 0, 0], [1, 0, 0], [0, 1, 0]]
    assert build_matching_pattern(2).tolist() == [[0, 1], [0, 0]]
    M4 = build_matching_pattern(4)
    assert M4.sum() == 2 and M4[0, 1] == 1 and M4[2, 3] == 1
    with pytest.raises(ValueError):
        build_matching_pattern(3)


def test_hc_and_matching_oracle_examples():
    assert subgi_oracle(build_pair("hc", CYCLE3)).yes
    assert not subgi_oracle(build_pair("hc", DigraphInstance(3, ((1, 2), (2, 3))))).yes
    two_arcs = DigraphInstance(4, ((1, 2), (3, 4)))
    assert subgi_oracle(build_matching_pair(two_arcs, 4)).yes


def test_ksat_examples():
    pair, compat = build_ksat_pair(CnfFormula(3, ((1, 2, 3),)), 3)
    assert np.array_equal(pair.G, np.eye(8, dtype=np.int64))
    assert pair.S.sum() == 1 and pair.S[0, 0] == 1
    assert subgi_oracle(pair).yes
    f = normalize_clause_width(CnfFormula(1, ((1,), (-1,))), 2)
    pair, _ = build_ksat_pair(f, 2)
    assert not subgi_oracle(pair).yes


def test_sat_examples():
    pair, compat = build_sat_pair(CnfFormula(1, ((1,), (-1,))))
    assert compat.boxes[0][1].tolist() == [[0]]
    assert not subgi_oracle(pair).yes
    pair, compat = build_sat_pair(CnfFormula(2, ((1,), (1, 2))))
    assert compat.boxes[0][1].tolist() == [[1, 1]]
    assert subgi_oracle(pair).yes


def test_pad_pattern():
    p = pad_pattern(InstancePair(np.zeros((2, 2), dtype=np.int64), [[0]]))
    assert p.S.tolist() == [[0, 0], [0, 0]]
    q = InstancePair(np.eye(2, dtype=np.int64), np.eye(2, dtype=np.int64))
    assert pad_pattern(q) is q


def test_pair_json_round_trip():
    p = build_pair("clique", PATH3, 2)
    q = InstancePair.from_json(p.to_json())
    assert q.same_as(p) and q.provenance == "clique"


@given(st.integers(2, 6), st.fractions(0, 1), st.integers(0, 10**6), st.integers(2, 6))
def test_clique_reduction_agrees(n, p, seed, m):
    m = min(m, n)
    g = gen_random_digraph(n, p, seed, symmetric=True)
    pair = build_pair("clique", g, m)
    v = subgi_oracle(pair)
    assert v.answer == direct_oracle("clique", g, m).answer
    if v.yes:
        assert relation_holds(pair, v.witness)


@given(st.integers(2, 6), st.fractions(0, 1), st.integers(0, 10**6))
def test_hc_hp_reductions_agree(n, p, seed):
    g = gen_random_digraph(n, p, seed)
    for prob in ("hc", "hp"):
        assert subgi_oracle(build_pair(prob, g)).answer == direct_oracle(prob, g).answer


@given(st.integers(1, 4), st.integers(1, 5), st.integers(0, 10**6))
def test_sat_reductions_agree(v, c, seed):
    f = gen_random_cnf(v, c, min(3, v), seed, min_width=1)
    assert subgi_oracle(build_pair("sat", f)).answer == direct_oracle("sat", f).answer
    for k in (2, 3):
        if v >= 1:
            fk = normalize_clause_width(gen_random_cnf(v, c, min(k, v), seed, min_width=1), k)
            assert subgi_oracle(build_pair(f"{k}sat", fk)).answer == direct_oracle("sat", fk).answer


def test_padding_keeps_verdict():
    g = gen_random_digraph(5, "1/2", 4, symmetric=True)
    pair = build_pair("clique", g, 3)
    assert subgi_oracle(pair).answer == subgi_oracle(pad_pattern(pair)).answer
