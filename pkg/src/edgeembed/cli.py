"""Command-line entry point: ``transform``, ``embed``, ``eval`` and ``export-2d``."""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
import tempfile
import warnings
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError, RunConfig
from .embedder import (TrainingDiverged, read_centers, read_embeddings, read_radii, train,
                       write_centers, write_embeddings, write_radii)
from .evaluate import (EvalReport, classify_edges, cluster_edges, cluster_nodes_on_centers,
                       confusion_matrix, correlate_radii, derive_edge_labels,
                       kmeanspp_cluster, project_2d)
from .graph import (GraphFormatError, betweenness_centrality, closeness_centrality,
                    load_edge_list, load_node_labels, write_id_mapping)
from .linegraph import build_line_graph, write_line_graph
from .walks import generate_walks

logger = logging.getLogger("edgeembed")

CONFIG_NAME = "config.txt"
EMBEDDINGS_NAME = "embeddings.txt"
CENTERS_NAME = "centers.txt"
RADII_NAME = "radii.tsv"
TRACE_NAME = "trace.csv"
IDS_NAME = "node_ids.tsv"
REPORT_NAME = "report.json"


@contextlib.contextmanager
def atomic_write(path: Path):
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def _require_file(path: str | None, what: str) -> Path:
    if not path:
        raise ConfigError(f"missing {what}: no path given")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"missing {what}: {p} does not exist")
    return p


def cmd_transform(cfg: RunConfig) -> None:
    edges = _require_file(cfg.edges, "edge list")
    out = cfg.output_dir()
    g = load_edge_list(edges, weighted=cfg.weighted or None)
    lg = build_line_graph(g)
    with atomic_write(out / "linegraph.tsv") as arcs, atomic_write(out / "linegraph_nodes.tsv") as mapping:
        write_line_graph(lg, arcs, mapping)
    with atomic_write(out / IDS_NAME) as fh:
        write_id_mapping(g, fh)
    with atomic_write(out / CONFIG_NAME) as fh:
        fh.write(cfg.to_text())
    logger.info("line graph: %d nodes, %d adjacent pairs -> %s", lg.num_nodes,
                lg.num_adjacent_pairs, out)


def cmd_embed(cfg: RunConfig) -> None:
    edges = _require_file(cfg.edges, "edge list")
    out = cfg.output_dir()
    g = load_edge_list(edges, weighted=cfg.weighted or None)
    if cfg.dim >= g.m:
        raise ConfigError(f"dim={cfg.dim} must be smaller than the number of edges ({g.m})")
    with atomic_write(out / CONFIG_NAME) as fh:
        fh.write(cfg.to_text())
    lg = build_line_graph(g)
    corpus = generate_walks(lg, cfg.walk_config())
    if cfg.dump_corpus:
        with atomic_write(out / "corpus.txt") as fh:
            corpus.write(fh)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = train(g, lg, corpus, cfg.train_config())
        for w in caught:
            logger.warning("%s", w.message)
    except TrainingDiverged as exc:
        if exc.trace is not None:
            with atomic_write(out / TRACE_NAME) as fh:
                exc.trace.to_csv(fh)
        raise
    with atomic_write(out / EMBEDDINGS_NAME) as fh:
        write_embeddings(g, result.embeddings, fh)
    with atomic_write(out / CENTERS_NAME) as fh:
        write_centers(g, result.centers, fh)
    with atomic_write(out / RADII_NAME) as fh:
        write_radii(g, result.radii, fh)
    with atomic_write(out / TRACE_NAME) as fh:
        result.trace.to_csv(fh)
    with atomic_write(out / IDS_NAME) as fh:
        write_id_mapping(g, fh)
    logger.info("embedded %d edges in K=%d; spherical error %.3g", g.m, cfg.dim,
                result.trace.spherical_error[-1])


def _align_embeddings(g, keys, X) -> np.ndarray:
    ids = g.token_to_id()
    out = np.full((g.m, X.shape[1]), np.nan)
    for (a, b), row in zip(keys, X):
        try:
            e = g.edge_id(ids[a], ids[b])
        except KeyError:
            raise ConfigError(f"embedding row ({a}, {b}) is not an edge of the input graph") from None
        out[e] = row
    if np.isnan(out).any():
        raise ConfigError("embedding file does not cover every edge of the input graph")
    return out


def _align_nodes(g, keys, values) -> np.ndarray:
    ids = g.token_to_id()
    out = np.full((g.n,) + values.shape[1:], np.nan)
    for tok, v in zip(keys, values):
        if tok not in ids:
            raise ConfigError(f"unknown node {tok!r} in artifact file")
        out[ids[tok]] = v
    if np.isnan(out).any():
        raise ConfigError("artifact file does not cover every node of the input graph")
    return out


def cmd_eval(cfg: RunConfig, artifacts: Path | None = None) -> EvalReport:
    out = cfg.output_dir()
    artifacts = Path(artifacts) if artifacts else out
    report = EvalReport(seed=cfg.seed)
    need_labels = cfg.eval_edge_clustering or cfg.eval_edge_classification or cfg.eval_node_clustering
    need_edges = need_labels or cfg.eval_centrality
    if need_edges:
        g = load_edge_list(_require_file(cfg.edges, "edge list"), weighted=cfg.weighted or None)
    if need_labels:
        labels = load_node_labels(_require_file(cfg.labels, "node label file"), g)
    if cfg.eval_edge_clustering or cfg.eval_edge_classification:
        with open(_require_file(str(artifacts / EMBEDDINGS_NAME), "embedding file"), encoding="utf-8") as fh:
            X = _align_embeddings(g, *read_embeddings(fh))
        el = derive_edge_labels(g, labels)
        report.num_edge_labels = el.num_classes
        report.num_evaluable_edges = int(el.mask.sum())
        if cfg.eval_edge_clustering:
            report.clustering_accuracy = cluster_edges(X, el, cfg.seed, cfg.restarts)
            if cfg.dump_confusion:
                ids = kmeanspp_cluster(X, el.num_classes, cfg.seed, cfg.restarts)
                cm, pv, tv = confusion_matrix(ids[el.mask], el.labels[el.mask])
                with atomic_write(out / "confusion_edges.csv") as fh:
                    fh.write("cluster," + ",".join(f"label_{t}" for t in tv) + "\n")
                    for p, row in zip(pv, cm):
                        fh.write(f"{p}," + ",".join(map(str, row)) + "\n")
        if cfg.eval_edge_classification:
            report.micro_f1, report.macro_f1 = classify_edges(X, el, cfg.train_fraction, cfg.seed)
            report.train_fraction = cfg.train_fraction
    if cfg.eval_node_clustering:
        with open(_require_file(str(artifacts / CENTERS_NAME), "centers file"), encoding="utf-8") as fh:
            C = _align_nodes(g, *read_centers(fh))
        report.node_clustering_accuracy = cluster_nodes_on_centers(C, labels, None, cfg.seed, cfg.restarts)
    if cfg.eval_centrality:
        with open(_require_file(str(artifacts / RADII_NAME), "radii file"), encoding="utf-8") as fh:
            R = _align_nodes(g, *read_radii(fh))
        report.pearson_betweenness = correlate_radii(R, betweenness_centrality(g))
        report.pearson_closeness = correlate_radii(R, closeness_centrality(g))
    with atomic_write(out / REPORT_NAME) as fh:
        fh.write(report.to_json())
    return report


def cmd_export_2d(embeddings: Path, output: Path, seed: int = 0) -> None:
    with open(_require_file(str(embeddings), "embedding file"), encoding="utf-8") as fh:
        keys, X = read_embeddings(fh)
    Y = project_2d(X, seed)
    with atomic_write(output) as fh:
        for (a, b), (x, y) in zip(keys, Y):
            fh.write(f"{a}\t{b}\t{float(x)!r}\t{float(y)!r}\n")


def _add_run_options(p: argparse.ArgumentParser) -> None:
    types = cfgmod.field_types()
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        kind = types[f.name]
        if kind == "bool":
            p.add_argument(flag, dest=f.name, default=None, action=argparse.BooleanOptionalAction)
        else:
            conv = {"int": int, "float": float, "str": str}[kind]
            p.add_argument(flag, dest=f.name, type=conv, default=None, metavar=f.name.upper())
    p.add_argument("--config", default=None, help="flat key=value config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgeembed", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("transform", "write the weighted line graph"),
                        ("embed", "train edge embeddings, centers and radii"),
                        ("eval", "run downstream evaluation on embedding artifacts")):
        p = sub.add_parser(name, help=help_)
        _add_run_options(p)
        if name == "eval":
            p.add_argument("--artifacts", default=None,
                           help="directory holding embed outputs (default: --out)")
    p = sub.add_parser("export-2d", help="2-D principal-component projection of embeddings")
    p.add_argument("embeddings")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "export-2d":
            cmd_export_2d(Path(args.embeddings), Path(args.output), args.seed)
            return 0
        file_values = cfgmod.read_config_file(args.config) if args.config else {}
        cli_values = {f.name: getattr(args, f.name) for f in fields(RunConfig)}
        cfg = cfgmod.resolve(file_values, cli_values)
        if args.command == "transform":
            cmd_transform(cfg)
        elif args.command == "embed":
            cmd_embed(cfg)
        elif args.command == "eval":
            report = cmd_eval(cfg, args.artifacts)
            sys.stdout.write(report.to_json())
    except (ConfigError, GraphFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
