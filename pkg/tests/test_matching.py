import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vertexnom.matching import (
    MatchingProblem,
    block_confusion,
    brute_force_sgm,
    restricted_objective,
    sgm_objective,
    solve_restricted,
    solve_sgm_fw,
)
from vertexnom.sbm import BlockAssignment, BlockModel, log_odds, logit, sample_sbm


def random_problem(rng, m, u, K=3, weight=0.0):
    n = m + u
    A = np.triu((rng.random((n, n)) < 0.5).astype(float), 1)
    A = A + A.T
    lam = rng.uniform(0.1, 0.9, (K, K))
    lam = np.triu(lam) + np.triu(lam, 1).T
    labels = np.concatenate([rng.integers(0, K, m), np.sort(rng.integers(0, K, u))])
    B = log_odds(lam, labels).B
    F = rng.normal(size=(u, u)) if weight else None
    return MatchingProblem(A, B, m, F=F, feature_weight=weight), labels, lam


def direct_objective(problem, perm):
    """Double sums over nonseed pairs and seed-nonseed pairs, then the linear term."""
    m, u = problem.m, problem.u
    A, B = problem.A, problem.B
    total = 0.0
    for i in range(u):
        for j in range(u):
            if i != j:
                total -= 0.5 * A[m + i, m + j] * B[m + perm[i], m + perm[j]]
        for s in range(m):
            total -= A[s, m + i] * B[s, m + perm[i]]
        if problem.F is not None:
            total -= problem.feature_weight * problem.F[i, perm[i]]
    return total


def test_empty_nonseed_objective():
    A = np.zeros((3, 3))
    p = MatchingProblem(A, A, 3)
    assert sgm_objective(p, np.array([], dtype=int)) == 0.0
    assert solve_sgm_fw(p).perm.size == 0


@pytest.mark.parametrize("weight", [0.0, 0.7])
def test_objective_matches_double_sum(rng, weight):
    for _ in range(20):
        p, _, _ = random_problem(rng, 3, 5, weight=weight)
        perm = rng.permutation(5)
        assert sgm_objective(p, perm) == pytest.approx(direct_objective(p, perm), abs=1e-10)


def test_objective_rejects_non_bijection(rng):
    p, _, _ = random_problem(rng, 2, 4)
    with pytest.raises(ValueError):
        sgm_objective(p, [0, 0, 1, 2])


def test_problem_validation():
    with pytest.raises(ValueError):
        MatchingProblem(np.zeros((3, 3)), np.zeros((4, 4)), 1)
    with pytest.raises(ValueError):
        MatchingProblem(np.zeros((3, 3)), np.zeros((3, 3)), 1, feature_weight=-1.0)
    with pytest.raises(ValueError):
        MatchingProblem(np.zeros((3, 3)), np.zeros((3, 3)), 1, F=np.zeros((3, 3)))


def test_q_invariance(rng):
    """Relabelling B positions within a block leaves the objective unchanged."""
    for _ in range(30):
        p, labels, _ = random_problem(rng, 3, 6)
        perm = rng.permutation(6)
        pos = labels[3:]
        # random permutation of positions that only moves within blocks
        q = np.arange(6)
        for k in np.unique(pos):
            idx = np.flatnonzero(pos == k)
            q[idx] = rng.permutation(idx)
        assert sgm_objective(p, q[perm]) == sgm_objective(p, perm)


def test_u1_returns_only_perm(rng):
    p, _, _ = random_problem(rng, 3, 1)
    assert solve_sgm_fw(p).perm.tolist() == [0]


def test_self_matching(rng):
    A = np.triu((rng.random((12, 12)) < 0.4).astype(float), 1)
    A = A + A.T
    p = MatchingProblem(A, A, 0)
    ident = sgm_objective(p, np.arange(12))
    bary = solve_sgm_fw(p, restarts=1, rng=0)
    assert bary.objective <= ident + 1e-12
    ide = solve_sgm_fw(p, restarts=1, init="identity", rng=0)
    assert ide.objective == pytest.approx(ident)


def test_trace_non_increasing(rng):
    for _ in range(10):
        p, _, _ = random_problem(rng, 4, 20)
        res = solve_sgm_fw(p, restarts=3, rng=rng)
        for tr in res.trace:
            assert np.all(np.diff(tr) <= 1e-10)
        assert res.objective == pytest.approx(sgm_objective(p, res.perm))


def test_factored_path_agrees(rng):
    """Block-constant B through the factored products matches the dense path at vertices."""
    lam = np.array([[0.7, 0.2, 0.4], [0.2, 0.6, 0.3], [0.4, 0.3, 0.5]])
    sizes = (10, 8, 7)
    a = BlockAssignment.contiguous(sizes)
    A = sample_sbm(BlockModel(sizes, lam), a, 1).adjacency
    theta = logit(lam)
    B = theta[np.ix_(a.labels, a.labels)]
    np.fill_diagonal(B, 0)
    plain = MatchingProblem(A, B, 5)
    fact = MatchingProblem(A, B, 5, pattern=a.labels, theta=theta)
    assert fact._factored is not None and plain._factored is None
    for _ in range(5):
        P = np.eye(20)[rng.permutation(20)]
        assert np.sum(fact.quad(P) * P) == pytest.approx(np.sum(plain.quad(P) * P))
    res = solve_sgm_fw(fact, rng=0)
    assert res.objective == pytest.approx(sgm_objective(plain, res.perm))


def test_init_options(rng):
    p, _, _ = random_problem(rng, 2, 6)
    for init in ("barycenter", "identity", "random", np.full((6, 6), 1 / 6)):
        res = solve_sgm_fw(p, init=init, restarts=1, rng=0)
        assert sorted(res.perm.tolist()) == list(range(6))
    with pytest.raises(ValueError):
        solve_sgm_fw(p, init="bogus", rng=0)


def test_fw_reproducible(rng):
    p, _, _ = random_problem(rng, 3, 15)
    a = solve_sgm_fw(p, restarts=4, rng=11)
    b = solve_sgm_fw(p, restarts=4, rng=11)
    assert np.array_equal(a.perm, b.perm) and a.objective == b.objective


def test_brute_force_sgm_examples(rng):
    p, _, _ = random_problem(rng, 2, 1)
    assert brute_force_sgm(p).perm.tolist() == [0]
    p, _, _ = random_problem(rng, 2, 5)
    bf = brute_force_sgm(p)
    vals = [sgm_objective(p, np.array(q)) for q in itertools.permutations(range(5))]
    assert bf.objective == pytest.approx(min(vals))
    with pytest.raises(ValueError):
        brute_force_sgm(random_problem(rng, 1, 9)[0])


def test_restricted_exact_small(rng):
    for _ in range(50):
        p, _, _ = random_problem(rng, 3, 3)
        assert solve_restricted(p).objective == pytest.approx(
            brute_force_sgm(p, restricted=True).objective, abs=1e-12)


def test_restricted_beats_fw_on_linear_part(rng):
    for _ in range(20):
        p, _, _ = random_problem(rng, 4, 8)
        fw = solve_sgm_fw(p, rng=rng)
        assert solve_restricted(p).objective <= restricted_objective(p, fw.perm) + 1e-12


def test_restricted_degenerate():
    A = np.triu(np.ones((5, 5)), 1)
    A = A + A.T
    p = MatchingProblem(A, np.zeros((5, 5)), 2)
    with pytest.warns(RuntimeWarning):
        res = solve_restricted(p)
    assert res.degenerate and res.perm.tolist() == [0, 1, 2]
    with pytest.warns(RuntimeWarning):
        assert solve_restricted(MatchingProblem(A, A, 0)).degenerate


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 50))
def test_restricted_scale_invariant_argmin(seed, scale):
    rng = np.random.default_rng(seed)
    p, labels, lam = random_problem(rng, 3, 6)
    B2 = p.B.copy()
    B2[:3, 3:] *= scale
    B2[3:, :3] *= scale
    q = MatchingProblem(p.A, B2, 3)
    base = solve_restricted(p)
    scaled = solve_restricted(q)
    # the scaled optimum is optimal for the original problem too
    assert restricted_objective(p, scaled.perm) == pytest.approx(base.objective, abs=1e-9)


def test_block_confusion_examples():
    truth = np.array([0, 0, 1, 1, 2])
    conf = block_confusion(np.arange(5), truth, [2, 2, 1])
    assert np.array_equal(conf.eps, np.diag([2, 2, 1])) and not conf.eps_out.any()
    perm = np.array([2, 1, 0, 3, 4])  # vertex 0 (block 0) <-> vertex 2 (block 1)
    conf = block_confusion(perm, truth, [2, 2, 1])
    assert conf.eps[0, 1] == conf.eps[1, 0] == 1
    assert conf.eps_out.tolist() == [1, 1, 0]
    with pytest.raises(ValueError):
        block_confusion(np.arange(4), truth, [2, 2, 1])


@given(st.permutations(range(10)))
def test_block_confusion_row_sums(perm):
    truth = np.repeat([0, 1, 2], [4, 3, 3])
    conf = block_confusion(np.array(perm), truth, [4, 3, 3])
    assert conf.eps.sum(axis=1).tolist() == [4, 3, 3]
    assert np.array_equal(conf.eps_out, conf.eps.sum(axis=1) - np.diag(conf.eps))


def test_x_p_positive_in_expectation():
    """Relabelling nonseeds across blocks lowers the likelihood-aligned score on average."""
    lam = np.array([[0.7, 0.3], [0.3, 0.6]])
    sizes = (100, 100)
    a = BlockAssignment.contiguous(sizes)
    model = BlockModel(sizes, lam)
    B = log_odds(lam, a).B
    rng = np.random.default_rng(9)
    m = 20
    seeds = np.concatenate([np.arange(10), 100 + np.arange(10)])
    order = np.concatenate([seeds, np.setdiff1d(np.arange(200), seeds)])
    Bo = B[np.ix_(order, order)]
    u = 200 - m
    truth = a.labels[order][m:]
    positive = 0
    trials = 500
    for _ in range(trials):
        A = sample_sbm(model, a, rng).adjacency[np.ix_(order, order)]
        base = np.sum(A * Bo)
        vals = []
        while len(vals) < 5:
            perm = rng.permutation(u)
            if block_confusion(perm, truth, truth).eps_out[0] == 0:
                continue
            full = np.concatenate([np.arange(m), m + perm])
            vals.append(base - np.sum(A * Bo[np.ix_(full, full)]))
        positive += np.mean(vals) > 0
    assert positive / trials >= 0.99


def test_swap_deltas_match_recompute(rng):
    from vertexnom.matching import _swap_deltas

    for _ in range(20):
        p, _, _ = random_problem(rng, 3, 6)
        perm = rng.permutation(6)
        d = _swap_deltas(p, perm)
        f = sgm_objective(p, perm)
        for i, j in itertools.combinations(range(6), 2):
            q = perm.copy()
            q[i], q[j] = q[j], q[i]
            assert d[i, j] == pytest.approx(sgm_objective(p, q) - f, abs=1e-10)
            assert d[j, i] == pytest.approx(d[i, j], abs=1e-12)


def test_polish_reaches_swap_local_optimum(rng):
    for _ in range(10):
        p, _, _ = random_problem(rng, 2, 7)
        plain = solve_sgm_fw(p, restarts=1, polish=0)
        res = solve_sgm_fw(p, restarts=1, polish=100)
        assert res.objective <= plain.objective + 1e-12
        for i, j in itertools.combinations(range(7), 2):
            q = res.perm.copy()
            q[i], q[j] = q[j], q[i]
            assert sgm_objective(p, q) >= res.objective - 1e-9
