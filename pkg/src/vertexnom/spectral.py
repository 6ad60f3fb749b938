"""Spectral nomination baseline: ASE, optional sphere projection, K-means, distance ranking."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nomination import NominationList, _rank
from .sbm import Graph, SeedSet


@dataclass(frozen=True)
class Embedding:
    coords: np.ndarray
    eigvals: np.ndarray
    zero_rows: np.ndarray | None = None

    @property
    def d(self) -> int:
        return self.coords.shape[1]


@dataclass
class ClusterModel:
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    history: list = field(default_factory=list)
    interest_cluster: int = 0


def adjacency_spectral_embed(graph: Graph | np.ndarray, d: int) -> Embedding:
    """Rows of U_d |S_d|^{1/2} for the d largest-magnitude eigenpairs.

    Each column's sign is fixed so that its largest-magnitude entry is positive.
    """
    A = graph.adjacency if isinstance(graph, Graph) else np.asarray(graph, dtype=float)
    n = A.shape[0]
    if not 1 <= d <= n:
        raise ValueError(f"embedding dimension must be in [1, {n}], got {d}")
    vals, vecs = np.linalg.eigh(A)
    idx = np.argsort(-np.abs(vals), kind="stable")[:d]
    vals, vecs = vals[idx], vecs[:, idx]
    pivots = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivots, np.arange(d)])
    signs[signs == 0] = 1.0
    coords = vecs * signs * np.sqrt(np.abs(vals))
    return Embedding(coords, vals)


def project_to_sphere(embedding: Embedding) -> Embedding:
    norms = np.linalg.norm(embedding.coords, axis=1)
    zero = norms == 0
    coords = embedding.coords.copy()
    coords[~zero] /= norms[~zero, None]
    return Embedding(coords, embedding.eigvals, zero)


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers.append(X[rng.integers(n)])
        else:
            centers.append(X[rng.choice(n, p=d2 / total)])
        d2 = np.minimum(d2, np.sum((X - centers[-1]) ** 2, axis=1))
    return np.array(centers)


def _lloyd(X, centers, max_iter, tol):
    history = []
    for _ in range(max_iter):
        dist = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(dist, axis=1)
        history.append(float(dist[np.arange(X.shape[0]), labels].sum()))
        new = centers.copy()
        for j in range(centers.shape[0]):
            members = labels == j
            if members.any():
                new[j] = X[members].mean(axis=0)
            else:
                # reseed an empty cluster at the point farthest from its centroid
                far = int(np.argmax(dist[np.arange(X.shape[0]), labels]))
                new[j] = X[far]
        shift = np.sum((new - centers) ** 2)
        centers = new
        if shift <= tol:
            break
    dist = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(dist, axis=1)
    inertia = float(dist[np.arange(X.shape[0]), labels].sum())
    history.append(inertia)
    return centers, labels, inertia, history


def kmeans(X, k: int, rng=None, n_init: int = 10, max_iter: int = 100, tol: float = 1e-10) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding; best of ``n_init`` runs by inertia."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    X = np.asarray(X, dtype=float)
    best = None
    for _ in range(n_init):
        centers, labels, inertia, hist = _lloyd(X, _kmeans_pp(X, k, rng), max_iter, tol)
        if best is None or inertia < best.inertia:
            best = ClusterModel(centers, labels, inertia, hist)
    return best


def _interest_cluster(model: ClusterModel, seeds: SeedSet, interest: int = 0) -> int:
    k = model.centroids.shape[0]
    votes = np.bincount(model.labels[seeds.seeds[seeds.labels == interest]], minlength=k)
    sizes = np.bincount(model.labels, minlength=k)
    # plurality of interest seeds, then larger cluster, then lower index
    return int(np.lexsort((np.arange(k), -sizes, -votes))[0])


def nominate_spectral(graph: Graph, seeds: SeedSet, K: int, project: bool = True, rng=None,
                      n_init: int = 10, max_iter: int = 100, interest: int = 0,
                      on_missing: str = "raise") -> NominationList:
    """Rank nonseeds by Euclidean distance to the centroid of the interest cluster.

    With no seed in the block of interest the cluster cannot be identified;
    ``on_missing="random"`` then picks one uniformly instead of raising.
    """
    if K < 2:
        raise ValueError("spectral nomination needs K >= 2")
    missing = not np.any(seeds.labels == interest)
    if missing and on_missing != "random":
        raise ValueError("spectral nomination needs at least one seed in the block of interest")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    emb = adjacency_spectral_embed(graph, min(K, graph.n))
    if project:
        emb = project_to_sphere(emb)
    model = kmeans(emb.coords, K, rng, n_init=n_init, max_iter=max_iter)
    if missing:
        model.interest_cluster = int(rng.integers(K))
    else:
        model.interest_cluster = _interest_cluster(model, seeds, interest)
    U = seeds.nonseeds
    dist = np.linalg.norm(emb.coords[U] - model.centroids[model.interest_cluster], axis=1)
    pos = _rank(U, dist, rng)
    return NominationList(U[pos], dist[pos], U, model.labels[U], missing,
                          {"interest_cluster": model.interest_cluster})
