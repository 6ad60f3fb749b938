"""Command line entry point: ``vnom simulate | nominate | diagnostics``.

File formats
------------
edge list : ``u v [w]`` per line, ``#`` starts a comment. A line holding a
    single vertex id declares an (possibly isolated) vertex.
labels : ``v k`` per line; block names are arbitrary tokens.
features : ``v x1 ... xd`` per line.

Outputs of ``simulate`` and ``nominate``: ``report.json``, ``curve.csv``
(scheme, param_mode, m, rank, prob, stderr, band_lo, band_hi) and
``table.csv`` (scheme, param_mode, m, mean_ap, se_ap, mean_ari, se_ari).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import SCHEMES, DatasetBundle, ExperimentConfig, preset
from .evaluation import ExperimentReport, run_experiment
from .sbm import Graph, lambda_t, separation_diagnostics


class InputError(ValueError):
    """Malformed input file."""


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def load_edge_list(path, weighted: bool = False) -> Graph:
    """Read an undirected graph.

    Indexing is 1-based when the smallest id is 1 and 0-based otherwise. Ids
    that do not form a contiguous range are compacted; ``graph.vertex_ids[i]``
    is always the file id of vertex ``i`` and ``meta["compacted"]`` records
    whether compaction happened. Duplicate edges keep the largest weight;
    self-loops are dropped. Each of the two cases raises one warning.
    """
    edges = []
    declared = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        tok = line.split()
        try:
            if len(tok) == 1:
                declared.append(int(tok[0]))
                continue
            if len(tok) > 3:
                raise ValueError("too many fields")
            a, b = int(tok[0]), int(tok[1])
            w = float(tok[2]) if len(tok) == 3 else 1.0
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: cannot parse {raw.strip()!r} ({exc})") from None
        if not math.isfinite(w) or w < 0:
            raise InputError(f"{path}:{lineno}: weight must be finite and non-negative")
        edges.append((a, b, w))

    ids = sorted({x for e in edges for x in e[:2]} | set(declared))
    if not ids:
        raise InputError(f"{path}: no vertices")
    base = 1 if ids[0] == 1 else 0
    compacted = ids != list(range(base, base + len(ids)))
    index = {v: i for i, v in enumerate(ids)}
    n = len(ids)
    A = np.zeros((n, n))
    seen = np.zeros((n, n), dtype=bool)
    loops = dups = 0
    for a, b, w in edges:
        i, j = index[a], index[b]
        if i == j:
            loops += 1
            continue
        if seen[i, j]:
            dups += 1
        seen[i, j] = seen[j, i] = True
        val = w if weighted else 1.0
        A[i, j] = A[j, i] = max(A[i, j], val)
    if loops:
        warnings.warn(f"{path}: dropped {loops} self-loop(s)", RuntimeWarning, stacklevel=2)
    if dups:
        warnings.warn(f"{path}: collapsed {dups} duplicate edge(s)", RuntimeWarning, stacklevel=2)
    if not weighted:
        A = seen.astype(float)
    meta = {"base": base, "compacted": compacted, "self_loops": loops, "duplicates": dups,
            "source": str(path)}
    return Graph(A, weighted=weighted, vertex_ids=np.array(ids), meta=meta)


def write_edge_list(graph: Graph, path, one_based: bool = False) -> None:
    ids = graph.vertex_ids if graph.vertex_ids is not None else np.arange(graph.n) + int(one_based)
    iu, ju = np.nonzero(np.triu(graph.adjacency, 1))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {graph.n} vertices\n")
        for v in ids:
            fh.write(f"{v}\n")
        for i, j in zip(iu, ju):
            if graph.weighted:
                fh.write(f"{ids[i]} {ids[j]} {graph.adjacency[i, j]!r}\n")
            else:
                fh.write(f"{ids[i]} {ids[j]}\n")


def _vertex_index(vertex_ids) -> dict:
    return {int(v): i for i, v in enumerate(vertex_ids)}


def _read_rows(path, vertex_ids, what: str) -> dict:
    index = _vertex_index(vertex_ids)
    rows = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        tok = line.split()
        try:
            v = int(tok[0])
        except ValueError:
            raise InputError(f"{path}:{lineno}: bad vertex id {tok[0]!r}") from None
        if v not in index:
            raise InputError(f"{path}:{lineno}: unknown vertex {v}")
        if index[v] in rows:
            raise InputError(f"{path}:{lineno}: vertex {v} listed twice")
        if len(tok) < 2:
            raise InputError(f"{path}:{lineno}: missing {what}")
        rows[index[v]] = (tok[1:], lineno)
    missing = sorted(set(range(len(index))) - set(rows))
    if missing:
        shown = [int(vertex_ids[i]) for i in missing[:10]]
        raise InputError(f"{path}: no {what} for {len(missing)} vertex(es), e.g. {shown}")
    return rows


def load_labels(path, vertex_ids, interest_block: str | None = None) -> tuple[np.ndarray, list]:
    """Block labels relabelled 0..K-1 by order of first appearance.

    Block 0 is the block of interest; ``interest_block`` names a block to move
    to index 0 instead. Returns (labels, block names in index order).
    """
    rows = _read_rows(path, vertex_ids, "label")
    names = []
    for i in sorted(rows, key=lambda i: rows[i][1]):
        name = rows[i][0][0]
        if len(rows[i][0]) != 1:
            raise InputError(f"{path}:{rows[i][1]}: expected 'vertex block'")
        if name not in names:
            names.append(name)
    if interest_block is not None:
        if interest_block not in names:
            raise InputError(f"interest block {interest_block!r} does not occur in {path}")
        names.remove(interest_block)
        names.insert(0, interest_block)
    code = {nm: k for k, nm in enumerate(names)}
    labels = np.array([code[rows[i][0][0]] for i in range(len(rows))], dtype=np.int64)
    return labels, names


def load_features(path, vertex_ids) -> np.ndarray:
    rows = _read_rows(path, vertex_ids, "features")
    d = {len(tok) for tok, _ in rows.values()}
    if len(d) != 1:
        raise InputError(f"{path}: feature rows have differing lengths {sorted(d)}")
    try:
        return np.array([[float(x) for x in rows[i][0]] for i in range(len(rows))])
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def load_bundle(config: ExperimentConfig) -> DatasetBundle:
    if config.edges is None or config.labels is None:
        raise InputError("dataset source needs both an edge list and a label file")
    graph = load_edge_list(config.edges, config.weighted)
    labels, names = load_labels(config.labels, graph.vertex_ids, config.interest_block)
    X = load_features(config.features, graph.vertex_ids) if config.features else None
    graph.meta["blocks"] = names
    return DatasetBundle(graph, labels, X, name=Path(config.edges).stem)


# ---------------------------------------------------------------------------
# output


def _num(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def write_report(report: ExperimentReport, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, default=_json_default))
    with open(out / "table.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "param_mode", "m", "mean_ap", "se_ap", "mean_ari", "se_ari"])
        for s in report.summaries:
            w.writerow([s.scheme, s.param_mode, _m_str(s.m), _num(s.mean_ap), _num(s.se_ap),
                        _num(s.mean_ari), _num(s.se_ari)])
    with open(out / "curve.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        # band = mean +- two standard errors
        w.writerow(["scheme", "param_mode", "m", "rank", "prob", "stderr", "band_lo", "band_hi"])
        for s in report.summaries:
            if s.curve is None:
                continue
            for r, (p, e) in enumerate(zip(s.curve.prob, s.curve.stderr), start=1):
                w.writerow([s.scheme, s.param_mode, _m_str(s.m), r, _num(p), _num(e),
                            _num(p - 2 * e), _num(p + 2 * e)])
    return out


def _m_str(m) -> str:
    return "-".join(map(str, m)) if isinstance(m, (list, tuple)) else str(m)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def _finish(report: ExperimentReport, out_dir) -> int:
    path = write_report(report, out_dir)
    for s in report.summaries:
        print(f"{s.scheme:7s} {s.param_mode:9s} m={_m_str(s.m):6s} AP={s.mean_ap:.3f}±{s.se_ap:.3f} "
              f"ARI={_num(s.mean_ari) or 'n/a':.6s} trials={s.trials}")
    print(f"wrote {path}/report.json, table.csv, curve.csv ({report.wall_clock:.1f} s)")
    failed = [s for s in report.summaries if s.failures]
    for s in failed:
        print(f"scheme {s.scheme} ({s.param_mode}, m={_m_str(s.m)}) failed in {s.failures} "
              f"trial(s): {'; '.join(s.errors)}", file=sys.stderr)
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# commands


def _overrides(args) -> dict:
    out = {}
    for key in ("trials", "master_seed", "schemes", "param_modes", "seed_policy"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    if getattr(args, "m", None) is not None:
        out["m"] = args.m if len(args.m) > 1 else args.m[0]
    return out


def cmd_simulate(args) -> int:
    if args.config:
        cfg = ExperimentConfig.from_json(args.config)
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), **_overrides(args)})
    else:
        cfg = preset(args.preset, **_overrides(args))
    if not cfg.is_sbm:
        raise InputError("simulate needs an sbm source; use 'nominate' for datasets")
    report = run_experiment(cfg, workers=args.workers)
    return _finish(report, args.out or cfg.output_dir)


def cmd_nominate(args) -> int:
    if args.config:
        cfg = ExperimentConfig.from_json(args.config)
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), **_overrides(args)})
    else:
        if not (args.edges and args.labels):
            raise InputError("nominate needs --edges and --labels (or --config)")
        base = dict(edges=args.edges, labels=args.labels, features=args.features,
                    weighted=args.weighted, interest_block=args.interest_block,
                    schemes=["ml", "res", "sp"], m=[2, 5, 10, 20], trials=100)
        base.update(_overrides(args))
        cfg = ExperimentConfig(**base)
    bundle = load_bundle(cfg)
    if bundle.graph.meta.get("compacted"):
        out = Path(args.out or cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "vertex_map.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "file_id"])
            w.writerows(enumerate(bundle.graph.vertex_ids.tolist()))
    report = run_experiment(cfg, bundle=bundle, workers=args.workers)
    return _finish(report, args.out or cfg.output_dir)


def _read_lambda(args) -> np.ndarray:
    if args.lam:
        try:
            data = json.loads(Path(args.lam).read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.lam}: {exc}") from None
        lam = data.get("lam", data) if isinstance(data, dict) else data
    elif args.t is not None:
        lam = lambda_t(args.t)
    else:
        lam = preset(args.preset).lam
    try:
        lam = np.array(lam, dtype=float)
    except (TypeError, ValueError):
        raise InputError("lambda must be a numeric K x K matrix") from None
    if lam.ndim != 2 or lam.shape[0] != lam.shape[1] or lam.shape[0] < 1:
        raise InputError(f"lambda must be square, got shape {lam.shape}")
    if not np.allclose(lam, lam.T) or np.any(lam < 0) or np.any(lam > 1):
        raise InputError("lambda must be symmetric with entries in [0, 1]")
    return lam


def condition_ii_violations(lam) -> list[tuple[int, int]]:
    """Ordered pairs k != l with lam[k, k] == lam[k, l]."""
    lam = np.asarray(lam)
    K = lam.shape[0]
    return [(k, l) for k in range(K) for l in range(K) if k != l and lam[k, k] == lam[k, l]]


def diagnostics_report(lam) -> dict:
    d = separation_diagnostics(lam)
    bad = condition_ii_violations(lam)
    return {"alpha": d.alpha, "beta": d.beta, "c": d.c, "gamma": d.gamma, "kappa": d.kappa,
            "ratio": d.ratio, "condition_ii": not bad, "violations": bad}


def cmd_diagnostics(args) -> int:
    rep = diagnostics_report(_read_lambda(args))
    if args.json:
        print(json.dumps(rep, default=_json_default))
        return 0
    for key in ("alpha", "beta", "c", "gamma", "kappa"):
        print(f"{key:6s} {rep[key]:.6g}")
    print(f"ratio  {rep['ratio']:.6g}   (c^2 / (alpha beta kappa gamma))")
    if rep["condition_ii"]:
        print("condition (ii) holds: every diagonal entry differs from its off-diagonal row entries")
    else:
        pairs = ", ".join(f"({k},{l})" for k, l in rep["violations"])
        print(f"condition (ii) violated at {pairs}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vnom", description="Vertex nomination experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--trials", type=int)
        sp.add_argument("--seed", dest="master_seed", type=int)
        sp.add_argument("--schemes", nargs="+", choices=SCHEMES)
        sp.add_argument("--param-modes", nargs="+", choices=("known", "estimated"))
        sp.add_argument("--seed-policy", choices=("uniform-all", "block-restricted", "stratified"))
        sp.add_argument("--m", type=int, nargs="+", help="seed count(s); several values sweep")
        sp.add_argument("--workers", type=int, help="worker processes (default: VN_THREADS or 1)")
        sp.add_argument("--out", help="output directory")

    s = sub.add_parser("simulate", help="Monte-Carlo runs on a stochastic block model")
    s.add_argument("--preset", choices=("small", "medium"), default="small")
    common(s)
    s.set_defaults(func=cmd_simulate)

    n = sub.add_parser("nominate", help="seed sweep on a labelled graph")
    n.add_argument("--edges")
    n.add_argument("--labels")
    n.add_argument("--features")
    n.add_argument("--weighted", action="store_true")
    n.add_argument("--interest-block")
    common(n)
    n.set_defaults(func=cmd_nominate)

    d = sub.add_parser("diagnostics", help="separation constants of a block probability matrix")
    src = d.add_mutually_exclusive_group()
    src.add_argument("--lam", help="JSON file holding a K x K matrix (or {'lam': ...})")
    src.add_argument("--t", type=float, help="use the 3-block family lambda(t)")
    src.add_argument("--preset", choices=("small", "medium"), default="small")
    d.add_argument("--json", action="store_true")
    d.set_defaults(func=cmd_diagnostics)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ValueError, FileNotFoundError) as exc:
        print(f"vnom: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
