"""Experiment configuration and dataset bundles."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sbm import Graph, lambda_t

SCHEMES = ("ml", "res", "can", "sp", "sp_raw", "mlf")
PARAM_MODES = ("known", "estimated")
SEED_POLICIES = ("uniform-all", "block-restricted", "stratified")


@dataclass
class DatasetBundle:
    graph: Graph
    labels: np.ndarray
    features: np.ndarray | None = None
    name: str = "dataset"

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (self.graph.n,):
            raise ValueError("labels must cover every vertex")

    @property
    def K(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(np.bincount(self.labels, minlength=self.K).tolist())


@dataclass
class ExperimentConfig:
    """One experiment: a graph source, schemes, and the Monte-Carlo protocol.

    Exactly one source: an SBM (``block_sizes`` + ``lam``) or a dataset
    (``edges`` + ``labels`` paths, or a bundle passed to ``run_experiment``).
    ``m`` is a seed count, a list of counts (a sweep) or, for the stratified
    policy, a per-block count vector.
    """

    block_sizes: list[int] | None = None
    lam: list[list[float]] | None = None
    edges: str | None = None
    labels: str | None = None
    features: str | None = None
    weighted: bool = False
    interest_block: str | None = None
    schemes: list[str] = field(default_factory=lambda: ["ml", "res", "sp", "can"])
    param_modes: list[str] = field(default_factory=lambda: ["known"])
    estimate_sizes: bool = True
    seed_policy: str = "uniform-all"
    m: int | list = 4
    trials: int = 200
    master_seed: int = 0
    matcher: dict = field(default_factory=lambda: {"max_iters": 50, "tol": 1e-6, "restarts": 3})
    feature_weight: float | None = None
    feature_means: list | None = None
    feature_sd: float = 1.0
    min_interest_nonseeds: int = 1
    min_seeds_per_block: int = 0
    canonical_guard: int = 10**7
    kmeans_init: int = 10
    output_dir: str = "out"
    name: str = "experiment"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        has_sbm = self.block_sizes is not None or self.lam is not None
        has_data = self.edges is not None or self.labels is not None
        if has_sbm and has_data:
            raise ValueError("config must name exactly one source (sbm or dataset)")
        if has_sbm and (self.block_sizes is None or self.lam is None):
            raise ValueError("sbm source needs both block_sizes and lam")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}; choose from {SCHEMES}")
        for p in self.param_modes:
            if p not in PARAM_MODES:
                raise ValueError(f"unknown parameter mode {p!r}")
        if self.seed_policy not in SEED_POLICIES:
            raise ValueError(f"unknown seed policy {self.seed_policy!r}")
        if self.feature_means is not None and not self.is_sbm:
            raise ValueError("feature_means applies to sbm sources only")
        if self.feature_weight is not None and self.feature_weight < 0:
            raise ValueError("feature weight must be non-negative")

    @property
    def is_sbm(self) -> bool:
        return self.block_sizes is not None

    def sweep(self) -> list:
        if self.seed_policy == "stratified":
            m = self.m
            return [list(m)] if m and not isinstance(m[0], (list, tuple)) else [list(x) for x in m]
        return list(self.m) if isinstance(self.m, (list, tuple)) else [self.m]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def preset(name: str, **overrides) -> ExperimentConfig:
    """Simulation settings: 'small' (q=1, t=1, m=4) and 'medium' (q=50, t=0.3, m=20)."""
    if name == "small":
        base = dict(block_sizes=[4, 3, 3], lam=lambda_t(1.0).tolist(), m=4,
                    schemes=["ml", "res", "sp", "sp_raw", "can"], name="small")
    elif name == "medium":
        base = dict(block_sizes=[200, 150, 150], lam=lambda_t(0.3).tolist(), m=20,
                    schemes=["ml", "res", "sp", "sp_raw"], name="medium")
    else:
        raise ValueError(f"unknown preset {name!r}")
    base.update(overrides)
    return ExperimentConfig(**base)
