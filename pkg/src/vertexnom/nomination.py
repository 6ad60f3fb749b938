"""Likelihood-based vertex nomination.

A nomination run fixes a feasible block assignment ``phi`` (via graph
matching), then scores every nonseed by the geometric mean of the likelihood
ratios of swapping it with each vertex on the other side of the block-0
boundary. Block-0 vertices are listed first by ascending score (log eta), the
rest follow by descending score (log xi). Exact ties are broken uniformly at
random.

Edge terms are written in exponential-family form: a pair with statistic
``x`` and natural parameter ``theta`` contributes ``x * theta - A(theta)``,
which for Bernoulli edges equals ``x log p + (1 - x) log(1 - p)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .families import BERNOULLI, ExpFamily
from .matching import MatchingProblem, solve_restricted, solve_sgm_fw
from .sbm import CLAMP_EPS, Graph, SeedSet, clamp_probs

ENUMERATION_GUARD = 10**7
VARIANCE_FLOOR = 1e-6


@dataclass
class NominationList:
    """Ranked nonseeds.

    ``order`` lists vertex ids from rank 1 down; ``scores`` are aligned with
    ``order``. ``phi`` holds the block label assigned to each nonseed in
    ``nonseeds`` order (None for schemes that do not partition).
    """

    order: np.ndarray
    scores: np.ndarray
    nonseeds: np.ndarray
    phi: np.ndarray | None = None
    degenerate: bool = False
    info: dict = field(default_factory=dict)

    def rank_of(self, vertex: int) -> int:
        return int(np.flatnonzero(self.order == vertex)[0])


@dataclass(frozen=True)
class FeatureSet:
    X: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[1] == 0:
            raise ValueError("features need at least one dimension")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        object.__setattr__(self, "X", X)

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class FeatureDensities:
    """Per-block diagonal normal fits.

    ``log_density[k, v]`` is log f_k(X_v) for every vertex v; ``F`` restricts
    the exponentiated values to the nonseeds (K x u); ``Y`` stacks the block
    mean vectors (K x d).
    """

    means: np.ndarray
    variances: np.ndarray
    log_density: np.ndarray
    F: np.ndarray
    Y: np.ndarray


# ---------------------------------------------------------------------------
# parameters


def _natural_params(lam=None, theta=None, family: ExpFamily = BERNOULLI):
    if theta is None:
        if lam is None:
            raise ValueError("need either lam or theta")
        theta = family.natural_param(clamp_probs(lam, CLAMP_EPS))
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        raise ValueError("parameter matrix must be square")
    return theta, family.log_partition(theta)


def _check_phi(phi, seeds: SeedSet, block_sizes=None) -> np.ndarray:
    phi = np.asarray(phi, dtype=np.int64)
    if phi.shape != (seeds.n,):
        raise ValueError("phi must label every vertex")
    if np.any(phi[seeds.seeds] != seeds.labels):
        raise ValueError("phi disagrees with the seed labels")
    if block_sizes is not None:
        sizes = np.bincount(phi, minlength=len(block_sizes))
        if sizes.size != len(block_sizes) or np.any(sizes != np.asarray(block_sizes)):
            raise ValueError("phi does not respect the block sizes")
    return phi


def _pair_terms(TA, theta, logz, lab_i, lab_j):
    return TA * theta[lab_i, lab_j] - logz[lab_i, lab_j]


# ---------------------------------------------------------------------------
# likelihoods


def log_likelihood(phi, graph: Graph, lam=None, seeds: SeedSet | None = None, *,
                   theta=None, family: ExpFamily = BERNOULLI, block_sizes=None,
                   restricted: bool = False, feature_log_density=None) -> float:
    """Log-likelihood of ``phi`` over nonseed pairs and seed-nonseed pairs.

    Seed-seed pairs do not depend on ``phi`` and are excluded. With
    ``restricted=True`` only seed-nonseed pairs are counted. A K x n
    ``feature_log_density`` adds sum_{v in U} log f_{phi(v)}(X_v).
    """
    if seeds is None:
        raise ValueError("seeds are required")
    phi = _check_phi(phi, seeds, block_sizes)
    theta, logz = _natural_params(lam, theta, family)
    TA = family.sufficient_stat(graph.adjacency)
    T = _pair_terms(TA, theta, logz, phi[:, None], phi[None, :])
    U = seeds.nonseeds
    S = seeds.seeds
    total = T[np.ix_(S, U)].sum()
    if not restricted:
        total += np.triu(T[np.ix_(U, U)], k=1).sum()
    if feature_log_density is not None:
        total += np.asarray(feature_log_density)[phi[U], U].sum()
    return float(total)


def restricted_log_likelihood(phi, graph: Graph, lam=None, seeds: SeedSet | None = None, **kw) -> float:
    return log_likelihood(phi, graph, lam, seeds, restricted=True, **kw)


def _block_sums(phi, TA, seeds: SeedSet, theta, logz, restricted: bool) -> np.ndarray:
    """S[v, k]: log-likelihood contribution of vertex v's pairs if v had label k.

    Rows are indexed by vertex id (all n rows, only nonseed rows are used).
    Full mode sums over every other vertex; restricted mode over seeds only.
    """
    n = phi.size
    K = theta.shape[0]
    Z = np.zeros((n, K))
    Z[np.arange(n), phi] = 1.0
    if restricted:
        mask = np.zeros(n, dtype=bool)
        mask[seeds.seeds] = True
        Z[~mask] = 0.0
        counts = np.broadcast_to(Z.sum(axis=0), (n, K))
    else:
        counts = Z.sum(axis=0)[None, :] - Z  # exclude v itself
    M1 = TA @ Z
    return M1 @ theta.T - counts @ logz.T


def swap_log_ratio(phi, graph: Graph, lam=None, seeds: SeedSet | None = None, i: int = 0, j: int = 1,
                   mode: str = "full", *, theta=None, family: ExpFamily = BERNOULLI,
                   feature_log_density=None) -> float:
    """log l(phi_{i<->j}) - log l(phi), from the pair terms touching i or j only."""
    if seeds is None:
        raise ValueError("seeds are required")
    phi = _check_phi(phi, seeds)
    if i in set(seeds.seeds.tolist()) or j in set(seeds.seeds.tolist()):
        raise ValueError("only nonseeds can be swapped")
    if phi[i] == phi[j]:
        raise ValueError("swap requires different labels")
    theta, logz = _natural_params(lam, theta, family)
    TA = family.sufficient_stat(graph.adjacency)
    S = _block_sums(phi, TA, seeds, theta, logz, mode == "restricted")
    I, J = np.array([i]), np.array([j])
    d = _swap_matrix(S, TA, phi, I, J, theta, logz, mode == "restricted")
    if feature_log_density is not None:
        d = d + _feature_swap(np.asarray(feature_log_density), phi, I, J)
    return float(d[0, 0])


def _swap_matrix(S, TA, phi, I, J, theta, logz, restricted) -> np.ndarray:
    """Delta[a, b] = log-likelihood change of swapping I[a] with J[b]."""
    a = phi[I][:, None]
    c = phi[J][None, :]
    Si = S[I]
    Sj = S[J]
    delta = (np.take_along_axis(Si, np.broadcast_to(c, (I.size, J.size)), axis=1)
             - Si[np.arange(I.size), phi[I]][:, None]
             + np.take_along_axis(Sj, np.broadcast_to(a.T, (J.size, I.size)), axis=1).T
             - Sj[np.arange(J.size), phi[J]][None, :])
    if not restricted:
        # S[i, c] counted pair {i, j} with j still labelled c (and likewise for j);
        # the pair term itself is invariant under the swap, so remove those miscounts
        x = TA[np.ix_(I, J)]
        t = lambda p, q: x * theta[p, q] - logz[p, q]
        delta -= t(c, c) + t(a, a) - t(a, c) - t(c, a)
    return delta


def _feature_swap(logf, phi, I, J) -> np.ndarray:
    a = phi[I][:, None]
    c = phi[J][None, :]
    Ii = I[:, None]
    Jj = J[None, :]
    return logf[c, Ii] + logf[a, Jj] - logf[a, Ii] - logf[c, Jj]


@dataclass
class Scores:
    """log eta (for phi == 0) or log xi (otherwise), per nonseed in nonseed order."""

    values: np.ndarray
    nonseeds: np.ndarray
    phi: np.ndarray
    degenerate: bool


def eta_xi_scores(phi, graph: Graph, lam=None, seeds: SeedSet | None = None, mode: str = "full", *,
                  theta=None, family: ExpFamily = BERNOULLI, feature_log_density=None,
                  interest: int = 0) -> Scores:
    """Per-nonseed log eta / log xi.

    log eta(i) averages the swap log-ratios of i against every nonseed outside the
    block of interest; log xi(j) averages those of j against every nonseed inside it.
    When one side is empty all scores are 0 and the result is flagged degenerate.
    """
    if seeds is None:
        raise ValueError("seeds are required")
    phi = _check_phi(phi, seeds)
    theta, logz = _natural_params(lam, theta, family)
    U = seeds.nonseeds
    inside = phi[U] == interest
    I, J = U[inside], U[~inside]
    values = np.zeros(U.size)
    if I.size == 0 or J.size == 0:
        return Scores(values, U, phi[U], True)
    TA = family.sufficient_stat(graph.adjacency)
    S = _block_sums(phi, TA, seeds, theta, logz, mode == "restricted")
    delta = _swap_matrix(S, TA, phi, I, J, theta, logz, mode == "restricted")
    if feature_log_density is not None:
        delta = delta + _feature_swap(np.asarray(feature_log_density), phi, I, J)
    values[inside] = delta.mean(axis=1)
    values[~inside] = delta.mean(axis=0)
    return Scores(values, U, phi[U], False)


# ---------------------------------------------------------------------------
# ranking


def _rank(vertices, primary_key, rng) -> np.ndarray:
    """Indices sorting by primary_key ascending, exact ties in uniformly random order."""
    tiebreak = rng.permutation(len(vertices))
    return np.lexsort((tiebreak, primary_key))


def _list_from_scores(scores: Scores, rng, interest: int = 0, info=None) -> NominationList:
    inside = scores.phi == interest
    idx_in = np.flatnonzero(inside)
    idx_out = np.flatnonzero(~inside)
    first = idx_in[_rank(idx_in, scores.values[idx_in], rng)]
    second = idx_out[_rank(idx_out, -scores.values[idx_out], rng)]
    pos = np.concatenate([first, second])
    return NominationList(scores.nonseeds[pos], scores.values[pos], scores.nonseeds,
                          scores.phi, scores.degenerate, info or {})


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


# ---------------------------------------------------------------------------
# schemes


def _setup(graph: Graph, block_sizes, seeds: SeedSet, theta, family, rng):
    """Seed-first reordering of A and the block pattern used for B.

    Nonseeds enter in random order. Matching ties are otherwise broken by
    vertex index, which leaks any correlation between index and block.
    """
    u_k = seeds.nonseed_sizes(block_sizes)
    U = rng.permutation(seeds.nonseeds)
    order = np.concatenate([seeds.seeds, U])
    pattern = np.concatenate([seeds.labels, np.repeat(np.arange(len(block_sizes)), u_k)])
    TA = family.sufficient_stat(graph.adjacency)[np.ix_(order, order)]
    B = theta[np.ix_(pattern, pattern)]
    np.fill_diagonal(B, 0.0)
    return order, pattern, TA, B


def _phi_from_perm(perm, pattern, order, seeds: SeedSet) -> np.ndarray:
    phi = np.empty(seeds.n, dtype=np.int64)
    phi[seeds.seeds] = seeds.labels
    phi[order[seeds.m:]] = pattern[seeds.m:][perm]
    return phi


def _feature_linear_term(densities: FeatureDensities, features: FeatureSet, pattern, order,
                         seeds: SeedSet, variant: str, raw: bool) -> tuple[np.ndarray, np.ndarray]:
    """(u x u matching term, K x n per-vertex log term used in scoring)."""
    U = order[seeds.m:]
    pos_labels = pattern[seeds.m:]
    if variant == "density":
        per_vertex = densities.log_density
        block_score = np.exp(per_vertex) if raw else per_vertex
    elif variant == "mean":
        per_vertex = densities.Y @ features.X.T  # K x n, X_v . mu_k
        block_score = per_vertex
    else:
        raise ValueError(f"unknown feature variant {variant!r}")
    F = block_score[:, U].T[:, pos_labels]  # F[i, pos] = score of nonseed i under label of pos
    return F, per_vertex


def nominate_ml(graph: Graph, lam, block_sizes: Sequence[int], seeds: SeedSet, *,
                theta=None, family: ExpFamily = BERNOULLI, matcher_opts: dict | None = None,
                rng=None, features: FeatureSet | None = None, feature_weight: float | None = None,
                feature_variant: str = "density", raw_density: bool = False) -> NominationList:
    """Maximum-likelihood nomination: seeded graph matching, then swap scores.

    ``block_sizes`` may be estimated sizes; only the nonseed counts n_k - m_k enter.
    With ``features`` this is the feature-augmented variant (see ``nominate_features``).
    """
    rng = _rng(rng)
    theta, logz = _natural_params(lam, theta, family)
    order, pattern, TA, B = _setup(graph, block_sizes, seeds, theta, family, rng)
    m = seeds.m
    F = None
    logf = None
    weight = 0.0
    if features is not None:
        weight = float(seeds.u if feature_weight is None else feature_weight)
        if weight < 0:
            raise ValueError("feature weight must be non-negative")
    if weight > 0:
        # a zero weight switches the features off in the scores as well
        densities = estimate_feature_densities(features, seeds, len(block_sizes))
        F, logf = _feature_linear_term(densities, features, pattern, order, seeds,
                                       feature_variant, raw_density)
    problem = MatchingProblem(TA, B, m, F=F, feature_weight=weight, pattern=pattern, theta=theta)
    opts = dict(matcher_opts or {})
    result = solve_sgm_fw(problem, rng=rng, **opts)
    phi = _phi_from_perm(result.perm, pattern, order, seeds)
    scores = eta_xi_scores(phi, graph, seeds=seeds, theta=theta, family=family,
                           feature_log_density=logf)
    info = {"objective": result.objective, "converged": result.converged}
    return _list_from_scores(scores, rng, info=info)


def nominate_ml_restricted(graph: Graph, lam, block_sizes: Sequence[int], seeds: SeedSet, *,
                           theta=None, family: ExpFamily = BERNOULLI, rng=None) -> NominationList:
    """Restricted-focus nomination: exact LAP on seed-nonseed terms, restricted scores."""
    rng = _rng(rng)
    theta, logz = _natural_params(lam, theta, family)
    U = seeds.nonseeds
    if seeds.m == 0:
        order = U[rng.permutation(U.size)]
        return NominationList(order, np.zeros(U.size), U, None, True)
    order, pattern, TA, B = _setup(graph, block_sizes, seeds, theta, family, rng)
    problem = MatchingProblem(TA, B, seeds.m)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        result = solve_restricted(problem)
    phi = _phi_from_perm(result.perm, pattern, order, seeds)
    scores = eta_xi_scores(phi, graph, seeds=seeds, mode="restricted", theta=theta, family=family)
    out = _list_from_scores(scores, rng, info={"objective": result.objective})
    out.degenerate = out.degenerate or result.degenerate
    return out


def nominate_features(graph: Graph, lam, block_sizes: Sequence[int], seeds: SeedSet,
                      features: FeatureSet, feature_weight: float | None = None,
                      variant: str = "density", **kw) -> NominationList:
    """ML nomination with vertex features; ``feature_weight`` defaults to u.

    The matching term uses log densities (``raw_density=True`` switches to raw
    densities); scores add log f_k(X_v) for the swapped vertices.
    """
    if feature_weight is not None and feature_weight < 0:
        raise ValueError("feature weight must be non-negative")
    return nominate_ml(graph, lam, block_sizes, seeds, features=features,
                       feature_weight=feature_weight, feature_variant=variant, **kw)


def estimate_feature_densities(features: FeatureSet, seeds: SeedSet, K: int | None = None,
                               variance_floor: float = VARIANCE_FLOOR) -> FeatureDensities:
    """Diagonal-normal MLE per block from the seed features."""
    X = features.X
    if X.shape[0] != seeds.n:
        raise ValueError("one feature row per vertex required")
    K = int(seeds.labels.max()) + 1 if K is None else K
    d = X.shape[1]
    means = np.zeros((K, d))
    variances = np.full((K, d), variance_floor)
    pooled_mean = X[seeds.seeds].mean(axis=0) if seeds.m else X.mean(axis=0)
    for k in range(K):
        Xk = X[seeds.seeds[seeds.labels == k]]
        if Xk.shape[0] == 0:
            means[k] = pooled_mean
            continue
        means[k] = Xk.mean(axis=0)
        if Xk.shape[0] >= 2:
            variances[k] = np.maximum(Xk.var(axis=0), variance_floor)
    diff = X[None, :, :] - means[:, None, :]
    log_density = -0.5 * np.sum(diff**2 / variances[:, None, :]
                                + np.log(2 * np.pi * variances[:, None, :]), axis=2)
    F = np.exp(log_density[:, seeds.nonseeds])
    return FeatureDensities(means, variances, log_density, F, means.copy())


def _multiset_permutations(counts: np.ndarray) -> np.ndarray:
    """All label vectors with the given per-label counts, lexicographic order."""
    counts = [int(c) for c in counts]
    total = sum(counts)
    out = []
    cur = []

    def rec(remaining):
        if len(cur) == total:
            out.append(list(cur))
            return
        for k, c in enumerate(remaining):
            if c:
                remaining[k] -= 1
                cur.append(k)
                rec(remaining)
                cur.pop()
                remaining[k] += 1

    rec(list(counts))
    return np.array(out, dtype=np.int64).reshape(len(out), total)


def count_assignments(nonseed_sizes) -> int:
    sizes = [int(s) for s in nonseed_sizes]
    return math.factorial(sum(sizes)) // math.prod(math.factorial(s) for s in sizes)


def canonical_posterior(graph: Graph, lam, block_sizes, seeds: SeedSet, *, theta=None,
                        family: ExpFamily = BERNOULLI, interest: int = 0,
                        guard: int = ENUMERATION_GUARD) -> np.ndarray:
    """P(v in block ``interest`` | G) for every nonseed under a uniform prior on feasible assignments."""
    u_k = seeds.nonseed_sizes(block_sizes)
    total = count_assignments(u_k)
    if total > guard:
        raise ValueError(f"{total} feasible assignments exceed the enumeration guard {guard}")
    theta, logz = _natural_params(lam, theta, family)
    TA = family.sufficient_stat(graph.adjacency)
    U, S = seeds.nonseeds, seeds.seeds
    A_uu = TA[np.ix_(U, U)]
    A_su = TA[np.ix_(S, U)]
    iu, ju = np.triu_indices(U.size, k=1)
    labels = _multiset_permutations(u_k)
    post = np.zeros(U.size)
    logs = np.empty(labels.shape[0])
    chunk = 20000
    for start in range(0, labels.shape[0], chunk):
        L = labels[start:start + chunk]
        ll = (A_uu[iu, ju] * theta[L[:, iu], L[:, ju]] - logz[L[:, iu], L[:, ju]]).sum(axis=1)
        # seed-nonseed pairs: sum_s sum_j A[s, j] theta[b(s), L_j] - logz[b(s), L_j]
        seed_part = (A_su[None, :, :] * theta[seeds.labels][:, L].transpose(1, 0, 2)
                     - logz[seeds.labels][:, L].transpose(1, 0, 2)).sum(axis=(1, 2))
        logs[start:start + chunk] = ll + seed_part
    w = np.exp(logs - logs.max())
    post = (w[:, None] * (labels == interest)).sum(axis=0) / w.sum()
    return post


def nominate_canonical(graph: Graph, lam, block_sizes, seeds: SeedSet, *, theta=None,
                       family: ExpFamily = BERNOULLI, rng=None,
                       guard: int = ENUMERATION_GUARD) -> NominationList:
    """Bayes-optimal nomination by enumerating every feasible assignment."""
    rng = _rng(rng)
    post = canonical_posterior(graph, lam, block_sizes, seeds, theta=theta, family=family, guard=guard)
    U = seeds.nonseeds
    pos = _rank(U, -post, rng)
    return NominationList(U[pos], post[pos], U, None, False)
