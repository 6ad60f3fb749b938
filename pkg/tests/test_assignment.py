import time

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from vertexnom.assignment import brute_force_lap, solve_lap

C3 = np.array([[4, 1, 3], [2, 0, 5], [3, 2, 2]], dtype=float)


@st.composite
def cost_matrices(draw, lo=1, hi=7, integer=True):
    u = draw(st.integers(lo, hi))
    elems = st.integers(-50, 50) if integer else st.floats(-1e3, 1e3, allow_nan=False)
    return draw(hnp.arrays(float if not integer else np.int64, (u, u), elements=elems)).astype(float)


@pytest.mark.parametrize("method", ["sap", "hungarian"])
def test_worked_example(method):
    sol = solve_lap(C3, method)
    assert sol.perm.tolist() == [1, 0, 2]
    assert sol.value == 5


def test_identity_for_hollow_positive():
    C = np.ones((5, 5)) + np.arange(25).reshape(5, 5)
    np.fill_diagonal(C, 0)
    sol = solve_lap(C)
    assert sol.perm.tolist() == list(range(5)) and sol.value == 0


def test_brute_force_examples():
    assert brute_force_lap([[7.0]]).value == 7
    assert brute_force_lap(C3).value == 5
    with pytest.raises(ValueError):
        brute_force_lap(np.zeros((10, 10)))


def test_errors():
    with pytest.raises(ValueError):
        solve_lap(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        solve_lap(np.array([[0, np.inf], [1, 0]]))
    with pytest.raises(ValueError):
        solve_lap(C3, method="auction")
    assert solve_lap(np.zeros((0, 0))).perm.size == 0


@given(cost_matrices())
def test_matches_brute_force_integer(C):
    sap, hun, bf = solve_lap(C), solve_lap(C, "hungarian"), brute_force_lap(C)
    assert sap.value == bf.value == hun.value
    assert sorted(sap.perm.tolist()) == list(range(C.shape[0]))


@given(cost_matrices(integer=False))
def test_matches_brute_force_real(C):
    assert solve_lap(C).value == pytest.approx(brute_force_lap(C).value, abs=1e-9)


@given(cost_matrices(), st.integers(-100, 100))
def test_shift_invariance(C, k):
    base = solve_lap(C)
    shifted = solve_lap(C + k)
    assert shifted.value == base.value + k * C.shape[0]


@given(cost_matrices(), st.randoms(use_true_random=False))
def test_row_permutation_equivariance(C, r):
    u = C.shape[0]
    pi = np.array(r.sample(range(u), u))
    base = solve_lap(C)
    moved = solve_lap(C[pi])
    assert moved.value == base.value
    # row pi[i] of C went to row i; undo it
    back = np.empty(u, dtype=np.int64)
    back[pi] = moved.perm
    assert C[np.arange(u), back].sum() == base.value


def test_value_matches_perm(rng):
    C = rng.normal(size=(40, 40))
    sol = solve_lap(C)
    assert sol.value == pytest.approx(C[np.arange(40), sol.perm].sum())
    assert solve_lap(C, "hungarian").value == pytest.approx(sol.value, abs=1e-9)


def test_cross_check_scipy(rng):
    from scipy.optimize import linear_sum_assignment

    for u in (10, 57, 120):
        C = rng.integers(0, 1000, size=(u, u)).astype(float)
        r, c = linear_sum_assignment(C)
        assert solve_lap(C).value == C[r, c].sum()


def test_runtime_u1000(rng):
    C = rng.random((1000, 1000))
    solve_lap(C[:5, :5])  # compile outside the timed region
    t = time.perf_counter()
    solve_lap(C)
    assert time.perf_counter() - t < 10
