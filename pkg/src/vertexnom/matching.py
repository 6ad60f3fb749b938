"""Seeded graph matching.

Vertices 0..m-1 are seeds in both matrices. A permutation ``perm`` of the
nonseeds sends nonseed ``i`` of ``A`` to position ``perm[i]`` of ``B``; the
objective (lower is better) is

    -1/2 * sum_{i,j} A22[i, j] B22[perm[i], perm[j]]
    - sum_i L[i, perm[i]],      L = A12^T B12 + w * F

where ``F`` is an optional u x u linear score with weight ``w``.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .assignment import solve_lap

BRUTE_FORCE_MAX = 8


class MatchingProblem:
    """Seed-first matrices A and B plus an optional linear feature term.

    ``pattern``/``theta`` may be given when B is block-constant
    (B[i, j] = theta[pattern[i], pattern[j]] off the diagonal); products with
    B22 then cost O(u^2 K) instead of O(u^3).
    """

    def __init__(self, A, B, m: int, F=None, feature_weight: float = 0.0,
                 pattern=None, theta=None):
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
            raise ValueError(f"A and B must be square and equal-sized, got {A.shape} and {B.shape}")
        n = A.shape[0]
        if not 0 <= m <= n:
            raise ValueError("seed count out of range")
        if feature_weight < 0:
            raise ValueError("feature weight must be non-negative")
        self.A, self.B, self.m, self.n = A, B, int(m), n
        u = n - m
        self.u = u
        self.A12, self.A22 = A[:m, m:], A[m:, m:]
        self.B12, self.B22 = B[:m, m:], B[m:, m:]
        self.symmetric = bool(np.array_equal(self.A22, self.A22.T) and np.array_equal(self.B22, self.B22.T))
        if F is not None:
            F = np.asarray(F, dtype=float)
            if F.shape != (u, u):
                raise ValueError(f"feature matrix must be {u}x{u}")
        self.F = F
        self.feature_weight = float(feature_weight)
        L = self.A12.T @ self.B12
        if F is not None and self.feature_weight:
            L = L + self.feature_weight * F
        self.L = L
        self._factored = None
        if pattern is not None and theta is not None and not np.any(np.diag(self.A22)):
            p2 = np.asarray(pattern, dtype=np.int64)[m:]
            theta = np.asarray(theta, dtype=float)
            off = ~np.eye(u, dtype=bool)
            if np.allclose(theta[np.ix_(p2, p2)][off], self.B22[off]):
                Z = np.zeros((u, theta.shape[0]))
                Z[np.arange(u), p2] = 1.0
                self._factored = (p2, theta, Z)

    def quad(self, X: np.ndarray) -> np.ndarray:
        """A22 @ X @ B22^T.

        In factored mode B22 is replaced by its block-constant extension
        (diagonal theta[p, p]). A22 is hollow there, so values at permutation
        matrices are unchanged; only the relaxation sees the difference.
        """
        if self._factored is None:
            return self.A22 @ X @ self.B22.T
        p2, theta, Z = self._factored
        return ((self.A22 @ (X @ Z)) @ theta.T)[:, p2]

    def quad_t(self, X: np.ndarray) -> np.ndarray:
        """A22^T @ X @ B22."""
        if self.symmetric:
            return self.quad(X)
        if self._factored is not None:
            p2, theta, Z = self._factored
            return ((self.A22.T @ (X @ Z)) @ theta)[:, p2]
        return self.A22.T @ X @ self.B22


@dataclass
class MatchingResult:
    perm: np.ndarray
    objective: float
    trace: list = field(default_factory=list)
    restarts_used: int = 1
    converged: bool = True
    degenerate: bool = False


def sgm_objective(problem: MatchingProblem, perm) -> float:
    perm = np.asarray(perm, dtype=np.int64)
    u = problem.u
    if perm.shape != (u,) or (u and not np.array_equal(np.sort(perm), np.arange(u))):
        raise ValueError("perm must be a bijection on the nonseeds")
    if u == 0:
        return 0.0
    quad = np.sum(problem.A22 * problem.B22[np.ix_(perm, perm)])
    lin = problem.L[np.arange(u), perm].sum()
    return float(-0.5 * quad - lin)


def restricted_objective(problem: MatchingProblem, perm) -> float:
    perm = np.asarray(perm, dtype=np.int64)
    return float(-problem.L[np.arange(problem.u), perm].sum())


def _relaxed_value(problem: MatchingProblem, D: np.ndarray, G: np.ndarray) -> float:
    # G = quad(D)
    return float(-0.5 * np.sum(G * D) - np.sum(problem.L * D))


def _perm_matrix(perm: np.ndarray) -> np.ndarray:
    P = np.zeros((perm.size, perm.size))
    P[np.arange(perm.size), perm] = 1.0
    return P


def _random_doubly_stochastic(u: int, rng: np.random.Generator, n_perms: int = 3) -> np.ndarray:
    k = min(u, n_perms) if u > 1 else 1
    weights = rng.dirichlet(np.ones(k))
    D = np.zeros((u, u))
    rows = np.arange(u)
    for w in weights:
        D[rows, rng.permutation(u)] += w
    return D


def _initial(init, u: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(init, np.ndarray):
        D = np.asarray(init, dtype=float)
        if D.shape != (u, u):
            raise ValueError("initial matrix has wrong shape")
        return D.copy()
    if init == "barycenter":
        return np.full((u, u), 1.0 / u)
    if init == "identity":
        return np.eye(u)
    if init == "random":
        return _random_doubly_stochastic(u, rng)
    raise ValueError(f"unknown init {init!r}")


def _line_search(a: float, b: float) -> float:
    """argmin of a x^2 + b x on [0, 1]; flat stretches resolve toward 1."""
    if a > 0:
        x = -b / (2 * a)
        return float(min(1.0, max(0.0, x)))
    return 1.0 if a + b <= 0 else 0.0


def _fw_run(problem: MatchingProblem, D: np.ndarray, max_iters: int, tol: float):
    """One Frank-Wolfe descent from D; returns (best perm, best value, trace, converged)."""
    u = problem.u
    rows = np.arange(u)
    G = problem.quad(D)
    Gt = problem.quad_t(D) if not problem.symmetric else G
    f = _relaxed_value(problem, D, G)
    trace = [f]
    best_perm, best_val = None, np.inf
    converged = False
    for _ in range(max_iters):
        grad = -0.5 * (G + Gt) - problem.L
        q = solve_lap(grad).perm
        Q = _perm_matrix(q)
        R = Q - D
        GR = problem.quad(R)
        GQ = G + GR
        f_vertex = float(-0.5 * GQ[rows, q].sum() - problem.L[rows, q].sum())
        if f_vertex < best_val:
            best_perm, best_val = q, f_vertex
        a = float(-0.5 * np.sum(GR * R))
        b = float(np.sum(grad * R))
        step = _line_search(a, b)
        if step == 0.0:
            converged = True
            break
        D = D + step * R
        G = G + step * GR
        Gt = problem.quad_t(D) if not problem.symmetric else G
        f_new = _relaxed_value(problem, D, G)
        trace.append(f_new)
        if abs(f - f_new) <= tol * max(abs(f), abs(f_new), 1e-300):
            f = f_new
            converged = True
            break
        f = f_new
    proj = solve_lap(-D).perm
    proj_val = sgm_objective(problem, proj)
    if best_perm is None or proj_val <= sgm_objective(problem, best_perm):
        best_perm = proj
    return best_perm, sgm_objective(problem, best_perm), trace, converged


def _swap_deltas(problem: MatchingProblem, perm: np.ndarray) -> np.ndarray:
    """Objective change for every transposition of two nonseed assignments.

    Entry (i, j) is f(perm with perm[i], perm[j] exchanged) - f(perm). Assumes
    symmetric A22 and B22.
    """
    u = problem.u
    rows = np.arange(u)
    if problem._factored is not None:
        p2, theta, _ = problem._factored
        lab = p2[perm]
        Z = np.zeros((u, theta.shape[0]))
        Z[rows, lab] = 1.0
        C = theta[np.ix_(lab, lab)]
        C[rows, rows] = problem.B22[perm, perm]
        M = ((problem.A22 @ Z) @ theta)[:, lab]  # A22 @ C up to the diagonal of C
        M += problem.A22 * (np.diag(C) - theta[lab, lab])[None, :]
    else:
        C = problem.B22[np.ix_(perm, perm)]
        M = problem.A22 @ C
    A = problem.A22
    dM = np.diag(M)
    dA, dC = np.diag(A), np.diag(C)
    D = M + M.T - dM[:, None] - dM[None, :]
    D -= (dA[:, None] - A) * (C - dC[:, None])
    D -= (A - dA[None, :]) * (dC[None, :] - C)
    dq = 2.0 * D + (dA[:, None] - dA[None, :]) * (dC[None, :] - dC[:, None])
    Lp = problem.L[:, perm]  # Lp[i, j] = L[i, perm[j]]
    dlin = Lp + Lp.T - np.diag(Lp)[:, None] - np.diag(Lp)[None, :]
    out = -0.5 * dq - dlin
    out[rows, rows] = 0.0
    return out


def _swap_polish(problem: MatchingProblem, perm: np.ndarray, max_swaps: int):
    """Best-improvement descent over transpositions."""
    perm = perm.copy()
    if not problem.symmetric:
        return perm
    scale = max(1.0, float(np.abs(problem.B).max()))
    for _ in range(max_swaps):
        delta = _swap_deltas(problem, perm)
        k = int(np.argmin(delta))
        if delta.flat[k] >= -1e-12 * scale:
            break
        i, j = divmod(k, problem.u)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def solve_sgm_fw(
    problem: MatchingProblem,
    max_iters: int = 50,
    tol: float = 1e-6,
    restarts: int = 3,
    init="barycenter",
    rng=None,
    polish: int = 100,
) -> MatchingResult:
    """Approximate seeded graph matching by Frank-Wolfe on the doubly stochastic relaxation.

    The first run starts from ``init``; every further restart starts from a random
    doubly stochastic matrix. Each run is rounded to a permutation by a LAP that
    maximises <D, P>, and the best permutation seen across runs (including the
    Frank-Wolfe vertices themselves) is returned. Ties keep the earliest run.

    With ``polish > 0`` each run's permutation is then improved by up to
    ``polish`` best-improvement pairwise swaps (symmetric problems only).
    """
    u = problem.u
    if u == 0:
        return MatchingResult(np.empty(0, dtype=np.int64), 0.0, [], 0)
    if u == 1:
        perm = np.zeros(1, dtype=np.int64)
        return MatchingResult(perm, sgm_objective(problem, perm), [], 1)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    best = None
    traces = []
    all_converged = True
    for r in range(max(1, restarts)):
        D0 = _initial(init if r == 0 else "random", u, rng)
        perm, val, trace, conv = _fw_run(problem, D0, max_iters, tol)
        if polish > 0:
            perm = _swap_polish(problem, perm, polish)
            val = sgm_objective(problem, perm)
        traces.append(np.array(trace))
        all_converged &= conv
        if best is None or val < best[1]:
            best = (perm, val)
    return MatchingResult(best[0], best[1], traces, max(1, restarts), all_converged)


def solve_restricted(problem: MatchingProblem) -> MatchingResult:
    """Exact minimiser of the seed-to-nonseed (linear) part of the objective."""
    u = problem.u
    cost = -problem.L
    if u == 0:
        return MatchingResult(np.empty(0, dtype=np.int64), 0.0, [], 1)
    if problem.m == 0 and problem.F is None or not np.any(cost):
        warnings.warn("restricted matching is degenerate: every permutation is optimal",
                      RuntimeWarning, stacklevel=2)
        perm = np.arange(u)
        return MatchingResult(perm, restricted_objective(problem, perm), [], 1, True, True)
    sol = solve_lap(cost)
    return MatchingResult(sol.perm, restricted_objective(problem, sol.perm), [], 1)


def brute_force_sgm(problem: MatchingProblem, restricted: bool = False) -> MatchingResult:
    u = problem.u
    if u > BRUTE_FORCE_MAX:
        raise ValueError(f"brute force limited to u <= {BRUTE_FORCE_MAX}")
    if u == 0:
        return MatchingResult(np.empty(0, dtype=np.int64), 0.0, [], 1)
    perms = np.array(list(itertools.permutations(range(u))), dtype=np.int64)
    lin = problem.L[np.arange(u), perms].sum(axis=1)
    if restricted:
        values = -lin
    else:
        quad = np.einsum("ij,pij->p", problem.A22, problem.B22[perms[:, :, None], perms[:, None, :]])
        values = -0.5 * quad - lin
    k = int(np.argmin(values))
    return MatchingResult(perms[k], float(values[k]), [], 1)


@dataclass(frozen=True)
class BlockConfusion:
    eps: np.ndarray
    eps_out: np.ndarray


def block_confusion(perm, truth, pattern, K: int | None = None) -> BlockConfusion:
    """eps[k, l] = number of nonseeds of true block k sent to a block-l position.

    ``truth`` holds the true labels of the nonseeds (A side). ``pattern`` holds
    the labels of the B positions, or the per-block position counts.
    """
    perm = np.asarray(perm, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    pattern = np.asarray(pattern, dtype=np.int64)
    u = perm.size
    if truth.size != u:
        raise ValueError("truth labels must cover every nonseed")
    if pattern.size != u:
        if pattern.sum() != u:
            raise ValueError("pattern block sizes must sum to u")
        pattern = np.repeat(np.arange(pattern.size), pattern)
    if u and not np.array_equal(np.sort(perm), np.arange(u)):
        raise ValueError("perm must be a bijection")
    if K is None:
        K = int(max(truth.max(initial=-1), pattern.max(initial=-1))) + 1
    eps = np.zeros((K, K), dtype=np.int64)
    np.add.at(eps, (truth, pattern[perm]), 1)
    return BlockConfusion(eps, eps.sum(axis=1) - np.diag(eps))
