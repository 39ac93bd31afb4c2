from fractions import Fraction as F
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from birklab import models as M
from birklab.incidence import incidence_decompose
from birklab.matcore import PermMatrix, all_permutations, exact_rank, is_doubly_stochastic
from birklab.oracle import clique_oracle, incidence_oracle_witness, relation_holds, subgi_oracle
from birklab.problems import DigraphInstance, gen_random_digraph
from birklab.reductions import InstancePair, build_hc_pattern, pad_pattern
from birklab.solve import lp_solve
from birklab.systems import SystemBuilder

CYC3 = build_hc_pattern(3)
SWAP = np.array([[0, 1], [1, 0]], dtype=np.int64)
PATH3 = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=np.int64)


def random_pair(n, seed, pg="1/2", ps="1/3", m=None):
    g = gen_random_digraph(n, pg, seed)
    s = gen_random_digraph(m or n, ps, seed + 7919)
    return pad_pattern(InstancePair(g.adjacency(), s.adjacency()))


def incidence(pair):
    return incidence_decompose(pair.G), incidence_decompose(pair.S)


# --- adjacency relaxation family -----------------------------------------

@pytest.mark.parametrize("side", [M.Side.LEFT, M.Side.RIGHT])
def test_example_one_relaxation(example1_pair, side):
    sys = M.build_relaxation(example1_pair, side)
    out = M.maximise_mass(sys)
    X = sys.block_value(out.witness, "x")
    assert (X == F(1, 2)).all() and sys.check(out.witness)
    r = M.relaxation_verdict(example1_pair, side)
    assert r.doubly_feasible and r.alpha == 2


def test_relaxation_identity_and_empty():
    pair = InstancePair(CYC3, CYC3)
    r = M.relaxation_verdict(pair)
    assert r.doubly_feasible
    sys = M.build_relaxation(pair)
    w = [0] * sys.num_vars
    for j in sys.block_indices("x").diagonal():
        w[int(j)] = 1
    assert sys.check(w)
    empty = InstancePair(np.zeros((2, 2), dtype=np.int64), [[0, 1], [0, 0]])
    assert not M.relaxation_verdict(empty).doubly_feasible
    assert not lp_solve(M.build_relaxation(empty, stochastic="doubly")).feasible


def test_relaxation_needs_padding():
    with pytest.raises(ValueError):
        M.build_relaxation(InstancePair(np.zeros((3, 3), dtype=np.int64), [[0]]))


def test_convex_examples(example1_pair):
    assert M.convex_decide(example1_pair).verdict == "NO"
    assert M.convex_decide(InstancePair(CYC3, CYC3)).verdict == "YES"


def test_anchored_examples(example1_pair):
    pair = InstancePair(CYC3, CYC3)
    R = subgi_oracle(pair).witness
    out = lp_solve(M.build_anchored_system(pair, R))
    sys = M.build_anchored_system(pair, R)
    assert out.feasible and np.array_equal(sys.block_value(out.witness, "x"), R.matrix())
    assert M.anchored_decide(example1_pair) == ("NO", None, 2)


def test_factored_identity():
    U = np.eye(2, dtype=np.int64)
    sys = M.build_factored_system(InstancePair(U, U), U, U, U, U)
    out = lp_solve(sys)
    assert out.feasible and np.array_equal(sys.block_value(out.witness, "x"), U)


def test_factored_rejects_bad_factors():
    U = np.eye(2, dtype=np.int64)
    with pytest.raises(ValueError):
        M.build_factored_system(InstancePair(U, U), SWAP, U, U, U)


def incidence_factors(pair):
    pG, pS = incidence(pair)
    X, Z = incidence_oracle_witness(pair)
    Zm = Z.matrix()
    k, l, n = pG.k, pS.k, pair.n
    S1 = np.zeros((n, k), dtype=np.int64)
    S1[:, :l] = pS.O
    S2 = np.zeros((k, n), dtype=np.int64)
    S2[:l, :] = pS.I.T
    return pG.O @ Zm, Zm.T @ pG.I.T, S1, S2


@given(st.integers(2, 4), st.integers(0, 10**6))
def test_factored_from_incidence_factors(n, seed):
    pair = random_pair(n, seed, "3/5", "1/4")
    if not subgi_oracle(pair).yes:
        return
    sys = M.build_factored_system(pair, *incidence_factors(pair))
    out = lp_solve(sys)
    assert out.feasible
    # feasibility is sound for 0/1 patterns: an extracted permutation is a witness
    from birklab.matcore import bvn_extract_permutation
    R, _ = bvn_extract_permutation(sys.block_value(out.witness, "x"))
    assert relation_holds(pair, R)


# --- symmetric model ---------------------------------------------------------

def test_symmetric_examples():
    assert lp_solve(M.build_symmetric_lp(InstancePair(SWAP, SWAP))).feasible
    assert not lp_solve(M.build_symmetric_lp(InstancePair(np.eye(2, dtype=np.int64), SWAP))).feasible
    sys = M.build_symmetric_lp(InstancePair(CYC3, CYC3), "ATSP", W=np.ones((3, 3), dtype=np.int64))
    out = lp_solve(sys)
    assert out.objective == 3
    with pytest.raises(ValueError):
        M.build_symmetric_lp(InstancePair(np.eye(7, dtype=np.int64), np.eye(7, dtype=np.int64)))


def test_symmetric_multigraph_gap():
    pair = InstancePair(np.eye(2, dtype=np.int64), [[2, 0], [0, 0]])
    assert lp_solve(M.build_symmetric_lp(pair)).feasible
    assert M.symmetric_integer_compatible(pair) is None


@given(st.integers(1, 4), st.integers(0, 10**6))
def test_symmetric_integer_iff_lp(n, seed):
    pair = random_pair(n, seed)
    hit = M.symmetric_integer_compatible(pair)
    assert (hit is not None) == lp_solve(M.build_symmetric_lp(pair)).feasible
    assert (hit is not None) == subgi_oracle(pair).yes


# --- incidence models --------------------------------------------------------

def test_example_two_products():
    pG, pS = incidence_decompose(SWAP), incidence_decompose([[1]])
    X1, X2 = PermMatrix((1, 0)), PermMatrix((0, 1))
    assert M.incidence_term(pG, pS, X1, X1, "O").tolist() == [[1]]
    assert M.incidence_term(pG, pS, X1, X2, "O").tolist() == [[0]]
    assert M.incidence_term(pG, pS, X1, X1, "I").tolist() == [[0]]
    assert M.incidence_term(pG, pS, X1, X2, "I").tolist() == [[1]]
    # the cross term taken with O_G instead of I_G evaluates to (0)
    assert M.incidence_term(pG, pS, X1, X2, "O").tolist() == [[0]]


def test_example_two_lambda():
    pG, pS = incidence_decompose(SWAP), incidence_decompose([[1]])
    X1, X2 = PermMatrix((1, 0)), PermMatrix((0, 1))
    for which, target in (("O", pS.O), ("I", pS.I)):
        full = M.incidence_term(pG, pS, X1, X1, which) + M.incidence_term(pG, pS, X1, X2, which)
        assert np.array_equal(full, target)
        half = F(1, 2) * full.astype(object)
        assert half.tolist() == [[F(1, 2)]] != target.tolist()


def test_incidence_exact():
    pG, pS = incidence_decompose(SWAP), incidence_decompose([[1]])
    r = M.build_incidence_exact(pG, pS).check(PermMatrix((1, 0)), PermMatrix((1, 0)))
    assert r.out_equation and not r.in_equation
    p = incidence_decompose(CYC3)
    assert M.build_incidence_exact(p, p).check(PermMatrix.identity(3), PermMatrix.identity(3)).ok
    pair = InstancePair(CYC3, CYC3)
    X, Z = incidence_oracle_witness(pair)
    assert M.build_incidence_exact(p, p).check(X, Z).ok


def test_padded_example_two_is_no():
    pair = pad_pattern(InstancePair(SWAP, [[1]]))
    pG, pS = incidence(pair)
    sys = M.build_incidence_symmetric(pG, pS)
    assert not lp_solve(sys).feasible and not subgi_oracle(pair).yes


@given(st.integers(2, 3), st.integers(0, 10**6))
def test_incidence_symmetric_point_mass(n, seed):
    pair = random_pair(n, seed, "1/2", "1/3")
    pG, pS = incidence(pair)
    if pG.k > 5 or pS.k > pG.k:
        return
    sys = M.build_incidence_symmetric(pG, pS)
    v = subgi_oracle(pair)
    out = lp_solve(sys)
    if v.yes:
        X, Z = incidence_oracle_witness(pair)
        assert out.feasible and M.build_incidence_exact(pG, pS).check(X, Z).ok
    pre = M.presolve_zero_rhs(sys)
    after = lp_solve(pre.system).feasible and pre.decided is None
    assert after == out.feasible


def test_structure_lemma_exhaustive():
    """A 0/1 solution of the integral system is a single point mass (l >= 1)."""
    for n in (1, 2, 3):
        perms = all_permutations(n)
        for G in ([[0, 1, 1], [1, 0, 0], [0, 1, 0]], [[0, 1, 0], [0, 0, 1], [0, 0, 0]], [[1, 1, 0], [0, 0, 0], [0, 0, 1]]):
            G = np.asarray(G)[:n, :n]
            pG = incidence_decompose(G)
            for l in range(1, min(pG.k, 3) + 1):
                mem = M.stacked_members(pG, perms, M.injections(pG.k, l)).reshape(-1, 2 * n, l)
                # every column of a member carries one 1 per half, so any two
                # chosen members already give column sums of 2
                for a, b in combinations(range(mem.shape[0]), 2):
                    assert (mem[a] + mem[b])[:n].sum(axis=0).max() == 2
                assert mem[:, :n].sum(axis=1).min() == 1  # lam = 0 cannot meet O_S
    # at l = 0 there are no equations, so every 0/1 lam solves the system
    pG = incidence_decompose([[0, 1], [1, 0]])
    assert M.stacked_members(pG, all_permutations(2), M.injections(2, 0)).size == 0


def test_presolve_examples():
    b = SystemBuilder()
    x = b.add_block("x", (3,))
    b.add({int(x[0]): 1, int(x[1]): 1}, "=", 0)
    b.add({int(x[1]): 1, int(x[2]): 1}, "=", 1)
    r = M.presolve_zero_rhs(b.build())
    assert r.fixed == ("x[1]", "x[2]") and r.decided is None and r.system.num_vars == 1
    b = SystemBuilder()
    x = b.add_block("lam", (2,))
    b.add({int(x[0]): 1, int(x[1]): 2}, "=", 0)
    b.add({int(x[0]): 1, int(x[1]): 1}, "=", 1)
    assert M.presolve_zero_rhs(b.build()).decided == "NO"


def test_necessary_examples():
    one = incidence_decompose([[1]])
    assert lp_solve(M.build_necessary_system(one, one)).feasible
    p = incidence_decompose(CYC3)
    assert lp_solve(M.build_necessary_system(p, p)).feasible


@given(st.integers(2, 3), st.integers(0, 10**6))
def test_necessary_implied_by_incidence_symmetric(n, seed):
    pair = random_pair(n, seed)
    pG, pS = incidence(pair)
    if pG.k > 5:
        return
    nec = lp_solve(M.build_necessary_system(pG, pS)).feasible
    sym = lp_solve(M.build_incidence_symmetric(pG, pS)).feasible
    assert nec or not sym
    if subgi_oracle(pair).yes:
        assert nec and sym


def test_incidence_convex_examples():
    p = incidence_decompose(SWAP)
    sys, target = M.build_incidence_convex_check(p, p)
    assert target == 4
    r = M.incidence_convex_verdict(p, p)
    assert r.verdict == "YES"
    from birklab.solve import norm_max_decide
    assert norm_max_decide(sys, target, heuristic=False).verdict == "YES"
    pair = pad_pattern(InstancePair(SWAP, [[1]]))
    pG, pS = incidence(pair)
    # the convex system alone is feasible on this NO instance; the LP vertex
    # breaks the quadratic condition, so the model abstains
    r = M.incidence_convex_verdict(pG, pS)
    assert subgi_oracle(pair).answer == "NO"
    assert r.feasible and r.condition is False and r.verdict == "UNDECIDED"


@given(st.integers(2, 4), st.integers(0, 10**6))
def test_incidence_convex_yes_is_sound(n, seed):
    pair = random_pair(n, seed, "1/2", "1/4")
    pG, pS = incidence(pair)
    if pS.k > pG.k or pG.k > 8:
        return
    r = M.incidence_convex_verdict(pG, pS)
    truth = subgi_oracle(pair).answer
    if truth == "YES":
        assert r.feasible
    if r.verdict == "YES":
        assert truth == "YES"


# --- asymmetric model --------------------------------------------------------

def test_center_closed_form():
    for G in (SWAP, CYC3, PATH3):
        pG = incidence_decompose(G)
        for l in range(pG.k + 1):
            assert np.array_equal(M.center_by_sums(pG, l), M.center_closed_form(G.shape[0], l))


def test_asymmetric_two_cycle():
    p = incidence_decompose(SWAP)
    for gen in ("EXHAUSTIVE", "GREEDY-POLY"):
        model = M.build_asymmetric_model(p, p, gen)
        out = M.asymmetric_solve(model)
        assert out.feasible and model.beta <= 2 * model.n * model.l
        lhs = sum((y * row.astype(object) for y, row in zip(out.witness, model.basis_scaled)),
                  np.zeros(model.basis_scaled.shape[1], dtype=object))
        assert list(lhs) == list(model.rhs_scaled)


def test_asymmetric_rejects_degenerate():
    z = incidence_decompose(np.zeros((2, 2), dtype=np.int64))
    with pytest.raises(ValueError):
        M.build_asymmetric_model(z, z)


def spans_equal(a, b):
    ra, rb = exact_rank(list(a.basis_scaled)), exact_rank(list(b.basis_scaled))
    return ra == rb == exact_rank(list(a.basis_scaled) + list(b.basis_scaled))


def test_greedy_matches_exhaustive_span():
    graphs = [SWAP, CYC3, PATH3, np.array([[0, 1, 1], [0, 0, 1], [0, 0, 0]]),
              np.array([[1, 1], [0, 0]]), np.array([[0, 1, 0], [0, 0, 0], [1, 0, 0]])]
    for G in graphs:
        pG = incidence_decompose(G)
        if pG.k > 3:
            continue
        n = G.shape[0]
        for l in range(1, pG.k + 1):
            S = np.zeros((n, n), dtype=np.int64)
            src, dst = np.nonzero(G)
            S[src[:l], dst[:l]] = 1
            pS = incidence_decompose(S)
            greedy = M.build_asymmetric_model(pG, pS, "GREEDY-POLY")
            exh = M.build_asymmetric_model(pG, pS, "EXHAUSTIVE")
            assert spans_equal(greedy, exh)
            assert M.asymmetric_solve(greedy).feasible == M.asymmetric_solve(exh).feasible


@given(st.integers(2, 4), st.integers(0, 10**6))
def test_asymmetric_necessity(n, seed):
    pair = random_pair(n, seed, "2/5", "1/4")
    pG, pS = incidence(pair)
    if pG.k == 0 or pG.k > 7 or pS.k > pG.k:
        return
    if subgi_oracle(pair).yes:
        assert M.asymmetric_verdict(pair) == "YES"


# --- depletion and cut loop ------------------------------------------------------

def test_depletion_examples():
    r = M.clique_depletion(PATH3, 3)
    assert r.emptied and r.certifies_no and r.log[0][0] == 1
    K4 = np.ones((4, 4), dtype=np.int64) - np.eye(4, dtype=np.int64)
    assert M.clique_depletion(K4, 3).log == ()
    assert M.clique_depletion(PATH3, 2).log == ()
    empty = M.clique_depletion(np.zeros((3, 3), dtype=np.int64), 3)
    assert empty.inconclusive and not empty.certifies_no
    with pytest.raises(ValueError):
        M.clique_depletion(PATH3, 1)


def test_max_clique_via_depletion():
    K4 = np.ones((4, 4), dtype=np.int64) - np.eye(4, dtype=np.int64)
    assert M.max_clique_via_depletion(K4).largest_surviving == 4
    rep = M.max_clique_via_depletion(PATH3)
    assert rep.largest_surviving == 2 and rep.survived[3] is False
    assert M.max_clique_via_depletion(np.zeros((3, 3), dtype=np.int64)).inconclusive


@given(st.integers(3, 7), st.fractions(0, 1), st.integers(0, 10**6), st.integers(2, 7))
def test_depletion_never_removes_clique_arcs(n, p, seed, m):
    m = min(m, n)
    g = gen_random_digraph(n, p, seed, symmetric=True)
    G = g.adjacency()
    r = M.clique_depletion(G, m)
    from itertools import combinations as comb
    for c in comb(range(n), m):
        sub = G[np.ix_(c, c)]
        if (sub + np.eye(m, dtype=np.int64) >= 1).all():
            assert (r.G[np.ix_(c, c)] == sub).all()
    if r.certifies_no:
        assert not clique_oracle(g, m).yes


def test_cut_loop_examples(example1_pair):
    r = M.cut_loop(InstancePair(CYC3, CYC3))
    assert r.verdict == "YES" and r.iterations == 1 and relation_holds(InstancePair(CYC3, CYC3), r.witness)
    r = M.cut_loop(example1_pair)
    # cutting off I leaves only swap, which breaks G X >= X S
    assert r.verdict == "NO" and len(r.cuts) == 1 and r.iterations == 2


@given(st.integers(2, 4), st.integers(0, 10**6))
def test_cut_loop_sound(n, seed):
    pair = random_pair(n, seed)
    r = M.cut_loop(pair, 10)
    truth = subgi_oracle(pair).answer
    if r.verdict in ("YES", "NO"):
        assert r.verdict == truth
