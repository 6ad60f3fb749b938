"""Nomination metrics and the Monte-Carlo experiment harness."""
from __future__ import annotations

import dataclasses
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .config import DatasetBundle, ExperimentConfig
from .nomination import (
    FeatureSet,
    NominationList,
    nominate_canonical,
    nominate_features,
    nominate_ml,
    nominate_ml_restricted,
)
from .sbm import (
    BlockAssignment,
    BlockModel,
    Graph,
    SeedSet,
    estimate_model,
    sample_sbm,
    select_seeds,
)
from .spectral import nominate_spectral

MAX_SEED_DRAWS = 1000


@dataclass(frozen=True)
class TruthLabels:
    """Membership of each nonseed in the block of interest."""

    nonseeds: np.ndarray
    interesting: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nonseeds", np.asarray(self.nonseeds, dtype=np.int64))
        object.__setattr__(self, "interesting", np.asarray(self.interesting, dtype=bool))
        if self.nonseeds.shape != self.interesting.shape:
            raise ValueError("one indicator per nonseed required")

    @classmethod
    def from_labels(cls, labels, seeds: SeedSet, interest: int = 0) -> "TruthLabels":
        U = seeds.nonseeds
        return cls(U, np.asarray(labels)[U] == interest)

    @property
    def u(self) -> int:
        return self.nonseeds.size

    @property
    def u1(self) -> int:
        return int(self.interesting.sum())

    def hits(self, order) -> np.ndarray:
        """Indicator, by rank, of the listed vertex being interesting."""
        order = np.asarray(order.order if isinstance(order, NominationList) else order, dtype=np.int64)
        lookup = dict(zip(self.nonseeds.tolist(), self.interesting.tolist()))
        try:
            return np.array([lookup[v] for v in order.tolist()], dtype=bool)
        except KeyError as exc:
            raise ValueError(f"listed vertex {exc.args[0]} is not a nonseed") from None


def _hit_vector(nomination, truth) -> np.ndarray:
    if isinstance(truth, TruthLabels):
        return truth.hits(nomination)
    # truth given directly as a by-rank indicator
    return np.asarray(truth, dtype=bool)



def average_precision(nomination, truth, exact: bool = False):
    """Average precision of a nomination list.

    ``truth`` is a ``TruthLabels`` or a boolean hit vector aligned with the
    ranks. With ``exact=True`` the value is a ``fractions.Fraction``.
    """
    h = _hit_vector(nomination, truth)
    u1 = int(h.sum())
    if u1 == 0:
        raise ValueError("average precision is undefined with no interesting vertices")
    top = np.cumsum(h[:u1])
    if exact:
        return sum((Fraction(int(c), i) for i, c in enumerate(top, start=1)), Fraction(0)) / u1
    return float(np.sum(top / np.arange(1, u1 + 1)) / u1)


def average_precision_harmonic(nomination, truth, exact: bool = False):
    """Same value as ``average_precision``, as a weighted sum of the hit indicators.

    Rank i carries weight (H_{u1} - H_{i-1}) / u1 for i <= u1 and 0 below that.
    """
    h = _hit_vector(nomination, truth)
    u1 = int(h.sum())
    if u1 == 0:
        raise ValueError("average precision is undefined with no interesting vertices")
    ranks = np.flatnonzero(h[:u1])  # 0-based rank i-1
    if exact:
        H = [Fraction(0)]
        for i in range(1, u1 + 1):
            H.append(H[-1] + Fraction(1, i))
        return sum((H[u1] - H[r] for r in ranks.tolist()), Fraction(0)) / u1
    H = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, u1 + 1))])
    return float(np.sum(H[u1] - H[ranks]) / u1)


def adjusted_rand_index(pred, truth) -> float:
    """Pair-counting adjusted Rand index of two partitions given as label vectors."""
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise ValueError("partitions must cover the same vertices")
    n = pred.size
    if n < 2:
        return 1.0
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(table, (p, t), 1)

    def pairs(x):
        x = np.asarray(x, dtype=np.int64)
        return int(np.sum(x * (x - 1) // 2))

    index = pairs(table)
    a, b = pairs(table.sum(axis=1)), pairs(table.sum(axis=0))
    total = n * (n - 1) // 2
    expected = a * b / total
    maximum = (a + b) / 2
    if maximum == expected:
        # both partitions trivial in the same way
        return 1.0
    return float((index - expected) / (maximum - expected))


@dataclass
class MeanNominationCurve:
    prob: np.ndarray
    stderr: np.ndarray
    trials: int


def mean_nomination_curve(lists: Sequence, truth) -> MeanNominationCurve:
    """Fraction of trials whose rank-k vertex is interesting.

    ``truth`` is one ``TruthLabels`` shared by every list, or one per list.
    """
    lists = list(lists)
    if not lists:
        raise ValueError("no nomination lists")
    truths = truth if isinstance(truth, (list, tuple)) else [truth] * len(lists)
    if len(truths) != len(lists):
        raise ValueError("one truth per list required")
    H = [_hit_vector(L, t) for L, t in zip(lists, truths)]
    if len({h.size for h in H}) != 1:
        raise ValueError("all lists must have the same length")
    return _curve(np.array(H, dtype=float))


def _curve(H: np.ndarray) -> MeanNominationCurve:
    T = H.shape[0]
    prob = H.mean(axis=0)
    sd = H.std(axis=0, ddof=1) if T > 1 else np.zeros(H.shape[1])
    return MeanNominationCurve(prob, sd / math.sqrt(T), T)


# ---------------------------------------------------------------------------
# experiment harness


@dataclass
class SchemeSummary:
    scheme: str
    param_mode: str
    m: object
    trials: int
    mean_ap: float
    se_ap: float
    mean_ari: float
    se_ari: float
    curve: MeanNominationCurve | None
    failures: int = 0
    errors: list = field(default_factory=list)
    degenerate: int = 0

    def to_dict(self) -> dict:
        out = {k: v for k, v in dataclasses.asdict(self).items() if k != "curve"}
        if self.curve is not None:
            out["curve"] = {"prob": self.curve.prob.tolist(), "stderr": self.curve.stderr.tolist()}
        return out


@dataclass
class ExperimentReport:
    config: dict
    summaries: list
    chance: dict
    wall_clock: float
    trials: int

    def get(self, scheme: str, param_mode: str = "known", m=None) -> SchemeSummary:
        for s in self.summaries:
            if s.scheme == scheme and s.param_mode == param_mode and (m is None or s.m == m):
                return s
        raise KeyError((scheme, param_mode, m))

    @property
    def complete(self) -> bool:
        return all(s.failures == 0 for s in self.summaries)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "trials": self.trials,
            "wall_clock": self.wall_clock,
            "chance": {str(k): v for k, v in self.chance.items()},
            "summaries": [s.to_dict() for s in self.summaries],
        }


def _mean_se(values) -> tuple[float, float]:
    x = np.asarray([v for v in values if v is not None and not np.isnan(v)], dtype=float)
    if x.size == 0:
        return float("nan"), float("nan")
    se = x.std(ddof=1) / math.sqrt(x.size) if x.size > 1 else 0.0
    return float(x.mean()), float(se)


def _sample_features(config: ExperimentConfig, labels: np.ndarray, rng) -> np.ndarray | None:
    if config.feature_means is None:
        return None
    mu = np.asarray(config.feature_means, dtype=float)
    if mu.ndim == 1:
        mu = mu[:, None]
    return mu[labels] + config.feature_sd * rng.standard_normal((labels.size, mu.shape[1]))


def _draw_instance(config: ExperimentConfig, bundle: DatasetBundle | None, rng):
    if bundle is not None:
        return bundle.graph, bundle.labels, bundle.features
    assignment = BlockAssignment.contiguous(config.block_sizes)
    graph = sample_sbm(BlockModel(config.block_sizes, np.asarray(config.lam)), assignment, rng)
    return graph, assignment.labels, _sample_features(config, assignment.labels, rng)


def _draw_seeds(config: ExperimentConfig, labels: np.ndarray, m, rng) -> SeedSet:
    """Seeds under the configured policy, redrawn until the trial can be scored."""
    assignment = BlockAssignment(labels)
    K = int(labels.max()) + 1
    for _ in range(MAX_SEED_DRAWS):
        seeds = select_seeds(assignment, m, config.seed_policy, rng)
        u1 = int(np.sum(labels[seeds.nonseeds] == 0))
        if u1 < config.min_interest_nonseeds:
            continue
        if np.any(seeds.per_block(K) < config.min_seeds_per_block):
            continue
        return seeds
    raise RuntimeError(f"no admissible seed set after {MAX_SEED_DRAWS} draws")


def _known_params(config, bundle, graph, labels):
    if bundle is None:
        return np.asarray(config.lam, dtype=float), np.asarray(config.block_sizes)
    everyone = SeedSet(np.arange(graph.n), labels, graph.n)
    try:
        est = estimate_model(graph, everyone, smoothing=False)
    except ValueError:
        est = estimate_model(graph, everyone, smoothing=True)
    return est.lam_hat, np.bincount(labels, minlength=int(labels.max()) + 1)


def _binary(graph: Graph) -> Graph:
    if not graph.weighted:
        return graph
    return Graph((graph.adjacency > 0).astype(float), False, graph.vertex_ids, graph.meta)


def _run_trial(config: ExperimentConfig, bundle: DatasetBundle | None, m, trial: int) -> dict:
    rng = np.random.default_rng([config.master_seed, trial])
    graph, labels, X = _draw_instance(config, bundle, rng)
    graph = _binary(graph)
    K = int(labels.max()) + 1
    seeds = _draw_seeds(config, labels, m, rng)
    truth = TruthLabels.from_labels(labels, seeds)
    true_nonseed = labels[seeds.nonseeds]
    out = {"chance": truth.u1 / truth.u, "results": {}}

    params = {}
    for mode in config.param_modes:
        if mode == "known":
            params[mode] = _known_params(config, bundle, graph, labels)
        else:
            est = estimate_model(graph, seeds, smoothing=True, K=K)
            sizes = est.n_hat if config.estimate_sizes else np.bincount(labels, minlength=K)
            params[mode] = (est.lam_hat, sizes)

    def record(key, nom: NominationList, partition):
        ap = average_precision(nom, truth)
        ari = adjusted_rand_index(partition, true_nonseed) if partition is not None else float("nan")
        out["results"][key] = {"ap": ap, "ari": ari, "hits": truth.hits(nom),
                               "degenerate": bool(nom.degenerate)}

    spectral_done = {}
    for mode, (lam, sizes) in params.items():
        for scheme in config.schemes:
            key = (scheme, mode)
            srng = np.random.default_rng([config.master_seed, trial, config.schemes.index(scheme)])
            try:
                if scheme == "ml":
                    nom = nominate_ml(graph, lam, sizes, seeds, matcher_opts=config.matcher, rng=srng)
                    record(key, nom, nom.phi)
                elif scheme == "res":
                    nom = nominate_ml_restricted(graph, lam, sizes, seeds, rng=srng)
                    record(key, nom, nom.phi)
                elif scheme == "can":
                    nom = nominate_canonical(graph, lam, sizes, seeds, rng=srng,
                                             guard=config.canonical_guard)
                    record(key, nom, None)
                elif scheme in ("sp", "sp_raw"):
                    # parameter-free; computed once and shared across modes
                    if scheme not in spectral_done:
                        spectral_done[scheme] = nominate_spectral(
                            graph, seeds, K, project=scheme == "sp", rng=srng,
                            n_init=config.kmeans_init, on_missing="random")
                    nom = spectral_done[scheme]
                    record(key, nom, nom.phi)
                elif scheme == "mlf":
                    if X is None:
                        raise ValueError("scheme 'mlf' needs vertex features")
                    nom = nominate_features(graph, lam, sizes, seeds, FeatureSet(X),
                                            feature_weight=config.feature_weight,
                                            matcher_opts=config.matcher, rng=srng)
                    record(key, nom, nom.phi)
            except (ValueError, RuntimeError, MemoryError) as exc:
                out["results"][key] = {"error": f"{type(exc).__name__}: {exc}"}
    return out


def _workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("VN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            warnings.warn(f"ignoring non-integer VN_THREADS={env!r}", RuntimeWarning, stacklevel=3)
    return 1


def _aggregate(config, m, outcomes) -> tuple[list, float]:
    summaries = []
    for mode in config.param_modes:
        for scheme in config.schemes:
            key = (scheme, mode)
            rows = [o["results"][key] for o in outcomes]
            good = [r for r in rows if "error" not in r]
            errors = sorted({r["error"] for r in rows if "error" in r})
            mean_ap, se_ap = _mean_se([r["ap"] for r in good])
            mean_ari, se_ari = _mean_se([r["ari"] for r in good])
            curve = _curve(np.array([r["hits"] for r in good], dtype=float)) if good else None
            summaries.append(SchemeSummary(
                scheme, mode, m, len(good), mean_ap, se_ap, mean_ari, se_ari, curve,
                failures=len(rows) - len(good), errors=errors,
                degenerate=sum(r["degenerate"] for r in good)))
    chance = float(np.mean([o["chance"] for o in outcomes]))
    return summaries, chance


def run_experiment(config: ExperimentConfig, bundle: DatasetBundle | None = None,
                   workers: int | None = None) -> ExperimentReport:
    """Run every trial of ``config`` and aggregate AP, ARI and nomination curves.

    Trial ``t`` draws from ``default_rng([master_seed, t])``, so results do not
    depend on the worker count. Per-scheme failures (for instance the canonical
    enumeration guard) are counted in the summaries instead of aborting the run.
    ``VN_THREADS`` sets the number of worker processes when ``workers`` is None.
    """
    if bundle is None and not config.is_sbm:
        from .cli import load_bundle  # deferred: cli imports this module
        bundle = load_bundle(config)
    start = time.perf_counter()
    n_workers = _workers(workers)
    summaries, chance = [], {}
    for m in config.sweep():
        if n_workers > 1 and config.trials > 1:
            with ProcessPoolExecutor(max_workers=n_workers) as pool:
                outcomes = list(pool.map(_run_trial, [config] * config.trials,
                                         [bundle] * config.trials, [m] * config.trials,
                                         range(config.trials)))
        else:
            outcomes = [_run_trial(config, bundle, m, t) for t in range(config.trials)]
        rows, chance_m = _aggregate(config, m, outcomes)
        summaries.extend(rows)
        chance[str(m) if isinstance(m, list) else m] = chance_m
    return ExperimentReport(config.to_dict(), summaries, chance,
                            time.perf_counter() - start, config.trials)
