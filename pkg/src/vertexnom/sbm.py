"""Stochastic block models: parameters, sampling, seeds, estimation, diagnostics.

Block labels are 0-based throughout; block 0 is the block of interest.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .families import BERNOULLI, ExpFamily

CLAMP_EPS = 1e-9


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class BlockModel:
    """Conditional SBM parameters: block sizes and edge-probability matrix."""

    block_sizes: tuple[int, ...]
    lam: np.ndarray

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.block_sizes)
        lam = np.asarray(self.lam, dtype=float)
        if any(s <= 0 for s in sizes):
            raise ValueError("block sizes must be positive")
        if lam.shape != (len(sizes), len(sizes)):
            raise ValueError(f"lambda must be {len(sizes)}x{len(sizes)}, got {lam.shape}")
        if not np.allclose(lam, lam.T):
            raise ValueError("lambda must be symmetric")
        if np.any(lam < 0) or np.any(lam > 1):
            raise ValueError("lambda entries must lie in [0, 1]")
        object.__setattr__(self, "block_sizes", sizes)
        object.__setattr__(self, "lam", lam)

    @property
    def K(self) -> int:
        return len(self.block_sizes)

    @property
    def n(self) -> int:
        return sum(self.block_sizes)


@dataclass(frozen=True)
class ExpFamilyModel:
    """Exponential-family SBM: edge weights drawn with natural parameter theta[b(i), b(j)]."""

    block_sizes: tuple[int, ...]
    theta: np.ndarray
    family: ExpFamily = BERNOULLI

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.block_sizes)
        theta = np.asarray(self.theta, dtype=float)
        if theta.shape != (len(sizes), len(sizes)):
            raise ValueError("theta shape does not match block count")
        if not np.allclose(theta, theta.T):
            raise ValueError("theta must be symmetric")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta outside the natural-parameter domain (non-finite)")
        object.__setattr__(self, "block_sizes", sizes)
        object.__setattr__(self, "theta", theta)

    @property
    def K(self) -> int:
        return len(self.block_sizes)

    @property
    def n(self) -> int:
        return sum(self.block_sizes)


@dataclass(frozen=True)
class BlockAssignment:
    """Block membership function b as a length-n label vector."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or (labels.size and labels.min() < 0):
            raise ValueError("labels must be a 1-D vector of non-negative ints")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def contiguous(cls, block_sizes: Sequence[int]) -> "BlockAssignment":
        return cls(np.repeat(np.arange(len(block_sizes)), block_sizes))

    @property
    def n(self) -> int:
        return self.labels.size

    def sizes(self, K: int | None = None) -> np.ndarray:
        K = int(self.labels.max()) + 1 if K is None else K
        return np.bincount(self.labels, minlength=K)

    def check(self, block_sizes: Sequence[int]) -> None:
        sizes = self.sizes(len(block_sizes))
        if sizes.size != len(block_sizes) or np.any(sizes != np.asarray(block_sizes)):
            raise ValueError(
                f"assignment block sizes {sizes.tolist()} do not match model {list(block_sizes)}"
            )


@dataclass(frozen=True)
class Graph:
    """Undirected graph stored as a dense symmetric adjacency with zero diagonal."""

    adjacency: np.ndarray
    weighted: bool = False
    vertex_ids: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        A = np.asarray(self.adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(A, A.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(A) != 0):
            raise ValueError("adjacency must have a zero diagonal")
        if not self.weighted and not np.all((A == 0) | (A == 1)):
            raise ValueError("unweighted adjacency must be binary")
        object.__setattr__(self, "adjacency", A)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]


@dataclass(frozen=True)
class SeedSet:
    """Seed vertices with their observed block labels."""

    seeds: np.ndarray
    labels: np.ndarray
    n: int

    def __post_init__(self):
        seeds = np.asarray(self.seeds, dtype=np.int64).ravel()
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if seeds.shape != labels.shape:
            raise ValueError("seeds and labels must have equal length")
        if np.unique(seeds).size != seeds.size:
            raise ValueError("duplicate seed vertices")
        if seeds.size and (seeds.min() < 0 or seeds.max() >= self.n):
            raise ValueError("seed index out of range")
        order = np.argsort(seeds, kind="stable")
        object.__setattr__(self, "seeds", seeds[order])
        object.__setattr__(self, "labels", labels[order])

    @classmethod
    def from_assignment(cls, seeds, assignment: BlockAssignment) -> "SeedSet":
        seeds = np.asarray(seeds, dtype=np.int64)
        return cls(seeds, assignment.labels[seeds], assignment.n)

    @property
    def m(self) -> int:
        return self.seeds.size

    @property
    def nonseeds(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[self.seeds] = False
        return np.flatnonzero(mask)

    @property
    def u(self) -> int:
        return self.n - self.m

    def per_block(self, K: int) -> np.ndarray:
        return np.bincount(self.labels, minlength=K)

    def nonseed_sizes(self, block_sizes: Sequence[int]) -> np.ndarray:
        """u_k = n_k - m_k; raises if any block has more seeds than members."""
        sizes = np.asarray(block_sizes, dtype=np.int64)
        u = sizes - self.per_block(sizes.size)
        if np.any(u < 0):
            raise ValueError(f"more seeds than block members: sizes={sizes.tolist()}")
        return u


@dataclass(frozen=True)
class EstimatedModel:
    lam_hat: np.ndarray
    n_hat: np.ndarray
    smoothing: bool


@dataclass(frozen=True)
class SeparationDiagnostics:
    alpha: float
    beta: float
    c: float
    gamma: float
    kappa: float

    @property
    def ratio(self) -> float:
        """c^2 / (alpha beta kappa gamma); inf when any separation quantity is zero."""
        denom = self.alpha * self.beta * self.kappa * self.gamma
        return float("inf") if denom == 0 else self.c**2 / denom


def lambda_t(t: float) -> np.ndarray:
    """The 3-block simulation matrix t*L0 + (1-t)*0.5."""
    base = np.array([[0.5, 0.3, 0.4], [0.3, 0.8, 0.6], [0.4, 0.6, 0.3]])
    return t * base + (1 - t) * 0.5


def clamp_probs(lam, eps: float = CLAMP_EPS) -> np.ndarray:
    return np.clip(np.asarray(lam, dtype=float), eps, 1 - eps)


def logit(lam, eps: float | None = CLAMP_EPS) -> np.ndarray:
    """Entrywise log-odds. With eps=None, entries of exactly 0 or 1 raise."""
    lam = np.asarray(lam, dtype=float)
    if eps is None:
        if np.any(lam <= 0) or np.any(lam >= 1):
            raise ValueError("log-odds require entries strictly inside (0, 1)")
    else:
        lam = clamp_probs(lam, eps)
    return np.log(lam) - np.log1p(-lam)


def sample_sbm(model: BlockModel, assignment: BlockAssignment, rng=None) -> Graph:
    assignment.check(model.block_sizes)
    rng = _as_rng(rng)
    b = assignment.labels
    P = model.lam[np.ix_(b, b)]
    U = rng.random(P.shape)
    upper = np.triu(U < P, k=1)
    A = (upper | upper.T).astype(float)
    return Graph(A)


def sample_exp_sbm(model: ExpFamilyModel, assignment: BlockAssignment, rng=None) -> Graph:
    assignment.check(model.block_sizes)
    rng = _as_rng(rng)
    b = assignment.labels
    n = b.size
    iu = np.triu_indices(n, k=1)
    theta = model.theta[b[iu[0]], b[iu[1]]]
    x = model.family.sample(theta, rng)
    A = np.zeros((n, n))
    A[iu] = x
    A = A + A.T
    return Graph(A, weighted=not model.family.binary)


def log_odds(lam, assignment: BlockAssignment | np.ndarray, m: int = 0, eps: float | None = CLAMP_EPS):
    """Log-odds matrix B with B[i, j] = logit(lam[b(i), b(j)]) and zero diagonal.

    ``m`` only records how many leading rows are seeds; the entries do not depend on it.
    """
    labels = assignment.labels if isinstance(assignment, BlockAssignment) else np.asarray(assignment)
    theta = logit(lam, eps)
    B = theta[np.ix_(labels, labels)]
    np.fill_diagonal(B, 0.0)
    return LogOddsMatrix(B, int(m))


@dataclass(frozen=True)
class LogOddsMatrix:
    B: np.ndarray
    m: int

    @property
    def B12(self) -> np.ndarray:
        return self.B[: self.m, self.m :]

    @property
    def B22(self) -> np.ndarray:
        return self.B[self.m :, self.m :]


def select_seeds(
    assignment: BlockAssignment,
    m: int | Sequence[int],
    policy: str = "uniform-all",
    rng=None,
) -> SeedSet:
    """Draw seed vertices.

    Policies
    --------
    uniform-all : ``m`` vertices uniformly from all of V.
    block-restricted : ``m`` vertices uniformly from block 0 only.
    stratified : ``m`` is a per-block count vector.
    """
    rng = _as_rng(rng)
    b = assignment.labels
    n = b.size
    if policy == "uniform-all":
        m = int(m)
        if not 0 <= m <= n:
            raise ValueError(f"cannot draw {m} seeds from {n} vertices")
        seeds = rng.choice(n, size=m, replace=False)
    elif policy == "block-restricted":
        m = int(m)
        pool = np.flatnonzero(b == 0)
        if m > pool.size:
            raise ValueError(f"cannot draw {m} seeds from block 0 of size {pool.size}")
        seeds = rng.choice(pool, size=m, replace=False)
    elif policy == "stratified":
        counts = np.asarray(m, dtype=np.int64)
        parts = []
        for k, mk in enumerate(counts):
            pool = np.flatnonzero(b == k)
            if mk > pool.size or mk < 0:
                raise ValueError(f"infeasible seed count {mk} for block {k} of size {pool.size}")
            parts.append(rng.choice(pool, size=int(mk), replace=False))
        seeds = np.concatenate(parts) if parts else np.array([], dtype=np.int64)
    else:
        raise ValueError(f"unknown seed policy {policy!r}")
    return SeedSet.from_assignment(seeds, assignment)


def largest_remainder(quotas, total: int) -> np.ndarray:
    """Round quotas to integers summing to ``total``; ties go to the lower index."""
    quotas = np.asarray(quotas, dtype=float)
    base = np.floor(quotas + 1e-12).astype(np.int64)
    remainder = total - int(base.sum())
    if remainder < 0 or remainder > quotas.size:
        raise ValueError("quotas inconsistent with total")
    frac = quotas - base
    # stable sort on -frac keeps lower indices first among equal fractions
    order = np.argsort(-np.round(frac, 12), kind="stable")
    base[order[:remainder]] += 1
    return base


def estimate_model(
    graph: Graph,
    seeds: SeedSet,
    n: int | None = None,
    smoothing: bool = True,
    K: int | None = None,
) -> EstimatedModel:
    """Plug-in estimates of lambda and block sizes from the seed-induced subgraph.

    Without smoothing an entry is (edge count)/(possible pairs); with smoothing
    it is (count + 1)/(pairs + 2).
    """
    n = graph.n if n is None else int(n)
    K = int(seeds.labels.max()) + 1 if K is None else int(K)
    if seeds.m == 0:
        raise ValueError("cannot estimate a model without seeds")
    A = graph.adjacency
    members = [seeds.seeds[seeds.labels == k] for k in range(K)]
    mk = np.array([s.size for s in members])
    lam_hat = np.empty((K, K))
    for k in range(K):
        for l in range(k, K):
            sub = A[np.ix_(members[k], members[l])]
            if k == l:
                count = np.triu(sub, 1).sum()
                trials = mk[k] * (mk[k] - 1) / 2
            else:
                count = sub.sum()
                trials = mk[k] * mk[l]
            if smoothing:
                est = (count + 1) / (trials + 2)
            elif trials == 0:
                raise ValueError(f"no seed pairs for block pair ({k}, {l}); enable smoothing")
            else:
                est = count / trials
            lam_hat[k, l] = lam_hat[l, k] = est
    n_hat = largest_remainder(mk * n / seeds.m, n)
    return EstimatedModel(lam_hat, n_hat, smoothing)


def _min_gap(values) -> float:
    vals = np.unique(np.asarray(values, dtype=float))
    if vals.size < 2:
        return 0.0
    return float(np.min(np.diff(vals)))


def separation_diagnostics(lam) -> SeparationDiagnostics:
    # entries are compared after rounding to 12 decimals so arithmetic noise
    # (0.3*t + 0.35 and the like) does not create spurious near-duplicates
    lam = np.round(np.asarray(lam, dtype=float), 12)
    B = logit(lam)
    K = lam.shape[0]
    off = ~np.eye(K, dtype=bool)
    if K > 1:
        alpha = float(np.min(np.abs(np.diag(lam)[:, None] - lam)[off]))
        beta = float(np.min(np.abs(np.diag(B)[:, None] - B)[off]))
    else:
        alpha = beta = 0.0
    c = float(B.max() - B.min())
    distinct = np.unique(lam)
    return SeparationDiagnostics(alpha, beta, c, _min_gap(distinct), _min_gap(logit(distinct)))
