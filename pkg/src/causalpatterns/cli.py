"""Command-line interface.

Subcommands compose through the documented file formats, so a full run can
be a single ``pipeline`` invocation or a chain of per-stage commands. Exit
codes: 0 success, 2 invalid input, 3 runtime failure. Warnings go to
standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import PipelineStageError, ValidationError


def _add_graph_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", required=True, help="edge-list CSV (src,dst[,weight])")
    p.add_argument("--directed", action="store_true", help="treat edges as directed")


def _figures_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--no-figures", dest="figures", action="store_false",
                   help="skip rendering figures next to the delimited output")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="causalpatterns",
        description="Mine recurring spatio-temporal activity patterns on graphs",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ingest", help="validate a graph and write its canonical form")
    _add_graph_args(sp)
    sp.add_argument("--out-dir", required=True)

    sp = sub.add_parser("mask", help="normalize and threshold a signal into a mask")
    _add_graph_args(sp)
    sp.add_argument("--signal", required=True, help="wide signal CSV (node,t0,t1,...)")
    sp.add_argument("--normalization", choices=["none", "per_node", "global"],
                    default="per_node")
    sp.add_argument("--mu", type=float, required=True, help="activation threshold")
    sp.add_argument("--out", required=True, help="output mask file")

    sp = sub.add_parser("build", help="build the causal activity graph")
    _add_graph_args(sp)
    sp.add_argument("--mask", required=True)
    sp.add_argument("--dynamic", action="store_true",
                    help="require spatial edges to exist at the source layer")
    sp.add_argument("--events", help="edge event CSV (src,dst,t); needed with --dynamic")
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--out", required=True, help="output edge CSV")
    sp.add_argument("--isolated-out", default=None,
                    help="output CSV for isolated activated pairs "
                         "(default: <out stem>_isolated.csv)")

    sp = sub.add_parser("components", help="extract dynamic activated components")
    _add_graph_args(sp)
    sp.add_argument("--activity", required=True, help="causal edge CSV from 'build'")
    sp.add_argument("--isolated", default=None, help="isolated pair CSV from 'build'")
    sp.add_argument("--num-steps", type=int, default=None,
                    help="layer count (default: inferred from the data)")
    sp.add_argument("--out", required=True, help="components JSON")
    sp.add_argument("--summary", required=True, help="summary CSV")
    _figures_flag(sp)

    sp = sub.add_parser("features", help="compute static feature vectors")
    _add_graph_args(sp)
    sp.add_argument("--components", required=True)
    sp.add_argument("--no-normalize", dest="normalize", action="store_false")
    sp.add_argument("--out", required=True, help="features CSV")

    sp = sub.add_parser("cluster", help="k-means over static feature vectors")
    sp.add_argument("--features", required=True)
    sp.add_argument("--id-map", required=True, help="id_map.json from 'ingest'")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-iter", type=int, default=100)
    sp.add_argument("--out", required=True, help="cluster model JSON")
    sp.add_argument("--centroids", required=True, help="centroid CSV")

    sp = sub.add_parser("scan-k", help="tabulate wcss and silhouette across k")
    sp.add_argument("--features", required=True)
    sp.add_argument("--id-map", required=True)
    sp.add_argument("--k-min", type=int, required=True)
    sp.add_argument("--k-max", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="scan CSV (k,wcss,silhouette)")
    _figures_flag(sp)

    sp = sub.add_parser("aac", help="build average activation components")
    _add_graph_args(sp)
    sp.add_argument("--components", required=True)
    sp.add_argument("--cluster", required=True, help="cluster model JSON")
    sp.add_argument("--cluster-id", type=int, default=None,
                    help="single cluster to average (default: all)")
    sp.add_argument("--tau", type=float, default=0.05, help="sparsification threshold")
    sp.add_argument("--conditional-edges", action="store_true",
                    help="edge weights conditional on the source node count")
    sp.add_argument("--labels", default=None,
                    help="JSON {node id: label} for the per-layer label view")
    sp.add_argument("--out-dir", required=True)
    _figures_flag(sp)

    sp = sub.add_parser("walk", help="sample a weighted causal walk from an average component")
    sp.add_argument("--aac", required=True, help="average component JSON")
    sp.add_argument("--seed-node", default=None, help="node ID on layer 0")
    sp.add_argument("--rng-seed", type=int, default=0)
    sp.add_argument("--bias", type=float, default=1.0,
                    help="popularity bias exponent on edge weights")
    sp.add_argument("--out", required=True, help="walk JSON (ordered node IDs)")

    sp = sub.add_parser("verify", help="check the builder against the explicit definition")
    _add_graph_args(sp)
    sp.add_argument("--mask", required=True)
    sp.add_argument("--include-intra", action="store_true",
                    help="also materialize within-layer edges")
    sp.add_argument("--out", default=None, help="report JSON (default: stdout)")

    sp = sub.add_parser("synth", help="generate a synthetic scenario with ground truth")
    sp.add_argument("--scenario", required=True, help="scenario TOML")
    sp.add_argument("--out-dir", required=True)

    sp = sub.add_parser("bench", help="measure builder scaling")
    sp.add_argument("--mode", choices=["edges", "steps"], default="edges")
    sp.add_argument("--base-edges", type=int, default=100_000)
    sp.add_argument("--base-steps", type=int, default=256)
    sp.add_argument("--doublings", type=int, default=4)
    sp.add_argument("--density", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers-sweep", default=None,
                    help="comma-separated worker counts to time on the largest instance")
    sp.add_argument("--out-dir", required=True)
    _figures_flag(sp)

    sp = sub.add_parser("pipeline", help="run every stage from a config file")
    sp.add_argument("--config", required=True, help="pipeline TOML")
    sp.add_argument("--output-dir", default=None)
    sp.add_argument("--mu", type=float, default=None)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--tau", type=float, default=None)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--checked", action="store_true",
                    help="validate stage invariants between stages")
    sp.add_argument("--no-figures", dest="figures", action="store_const",
                    const=False, default=None)
    return p


def _cmd_ingest(args) -> int:
    from .graph import load_edge_list, save_id_map, write_edge_list

    graph = load_edge_list(args.graph, directed=args.directed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_list(graph, out / "graph.csv")
    save_id_map(graph, out / "id_map.json")
    print(f"{graph.num_nodes} nodes, {graph.num_edges} edges -> {out}")
    return 0


def _cmd_mask(args) -> int:
    from .activation import read_signal_csv, threshold, write_mask, zscore
    from .graph import load_edge_list

    graph = load_edge_list(args.graph, directed=args.directed)
    signal = read_signal_csv(args.signal, graph)
    if args.normalization != "none":
        signal = zscore(signal, scope=args.normalization)
    mask = threshold(signal, args.mu)
    write_mask(mask, args.out)
    print(f"mask {mask.num_nodes}x{mask.num_steps}, "
          f"{mask.popcount()} activated pairs -> {args.out}")
    return 0


def _cmd_build(args) -> int:
    from .activation import build_edge_mask, read_mask
    from .builder import (
        build_activity_graph,
        build_activity_graph_dynamic,
        builder_stats,
        write_activity_csv,
        write_isolated_csv,
    )
    from .graph import load_edge_events, load_edge_list

    graph = load_edge_list(args.graph, directed=args.directed)
    mask = read_mask(args.mask)
    if args.dynamic:
        if not args.events:
            raise ValidationError("--dynamic requires --events")
        events = load_edge_events(args.events, graph, num_steps=mask.num_steps)
        h = build_activity_graph_dynamic(graph, mask, build_edge_mask(events, graph),
                                         workers=args.workers)
    else:
        h = build_activity_graph(graph, mask, workers=args.workers)
    write_activity_csv(h, graph, args.out)
    isolated_out = args.isolated_out or str(Path(args.out).with_name(
        Path(args.out).stem + "_isolated.csv"))
    write_isolated_csv(h, graph, isolated_out)
    stats = builder_stats(h)
    print(f"{stats.num_neighbor_edges} neighbor edges, {stats.num_self_edges} self edges, "
          f"{stats.num_isolated_pairs} isolated pairs -> {args.out}")
    return 0


def _cmd_components(args) -> int:
    from .builder import read_activity_csv
    from .components import extract_components, write_components_json, write_summary_csv
    from .graph import load_edge_list

    graph = load_edge_list(args.graph, directed=args.directed)
    h = read_activity_csv(args.activity, graph, num_layers=args.num_steps,
                          isolated_path=args.isolated)
    result = extract_components(h)
    write_components_json(result, args.out, graph)
    write_summary_csv(result, args.summary)
    if args.figures:
        from . import report
        report.components_figure(result, Path(args.out).with_suffix(".png"))
    print(f"{len(result.components)} components "
          f"({result.num_singletons} singletons discarded) -> {args.out}")
    return 0


def _cmd_features(args) -> int:
    from .clustering import static_features, write_features_csv
    from .components import read_components_json
    from .graph import load_edge_list

    graph = load_edge_list(args.graph, directed=args.directed)
    result = read_components_json(args.components, graph)
    vectors = [static_features(c, normalize=args.normalize) for c in result.components]
    write_features_csv(vectors, args.out, name=graph.id_of)
    print(f"{len(vectors)} feature vectors -> {args.out}")
    return 0


def _cmd_cluster(args) -> int:
    from .clustering import (
        kmeans,
        read_features_csv,
        write_centroids_csv,
        write_cluster_json,
    )
    from .graph import load_id_map

    ids = load_id_map(args.id_map)
    index = {nid: i for i, nid in enumerate(ids)}
    vectors = read_features_csv(args.features, length=len(ids),
                                index_of=lambda x: index[x])
    model = kmeans(vectors, k=args.k, seed=args.seed, max_iter=args.max_iter)
    write_cluster_json(model, args.out, centroid_path=args.centroids)
    write_centroids_csv(model, args.centroids, name=lambda i: ids[i])
    print(f"k={model.k}, wcss={model.wcss:.6g}, {model.iterations} iterations -> {args.out}")
    return 0


def _cmd_scan_k(args) -> int:
    from .clustering import read_features_csv, scan_k, write_scan_csv
    from .graph import load_id_map

    ids = load_id_map(args.id_map)
    index = {nid: i for i, nid in enumerate(ids)}
    vectors = read_features_csv(args.features, length=len(ids),
                                index_of=lambda x: index[x])
    rows = scan_k(vectors, range(args.k_min, args.k_max + 1), seed=args.seed)
    write_scan_csv(rows, args.out)
    if args.figures:
        from . import report
        report.scan_k_figure(rows, Path(args.out).with_suffix(".png"))
    for row in rows:
        print(f"k={row['k']} wcss={row['wcss']:.6g} silhouette={row['silhouette']:.4f}")
    return 0


def _cmd_aac(args) -> int:
    from .average import build_aac, sparsify, write_aac_json, write_layer_csv
    from .components import read_components_json
    from .graph import load_edge_list

    graph = load_edge_list(args.graph, directed=args.directed)
    result = read_components_json(args.components, graph)
    with open(args.cluster, encoding="utf-8") as fh:
        model = json.load(fh)
    assignments = {cid: int(c) for cid, c in model["assignments"].items()}
    label_map = None
    if args.labels:
        with open(args.labels, encoding="utf-8") as fh:
            raw = json.load(fh)
        label_map = {graph.index_of(nid): lab for nid, lab in raw.items()}

    cluster_ids = ([args.cluster_id] if args.cluster_id is not None
                   else sorted(set(assignments.values())))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for cluster_id in cluster_ids:
        aac = sparsify(
            build_aac(result.components, assignments, cluster_id,
                      conditional_edges=args.conditional_edges),
            args.tau,
        )
        write_aac_json(aac, out / f"aac_cluster{cluster_id}.json", name=graph.id_of)
        write_layer_csv(aac, out / f"aac_cluster{cluster_id}_layers.csv",
                        name=graph.id_of, label_map=label_map)
        if args.figures:
            from . import report
            report.aac_figure(aac, out / f"aac_cluster{cluster_id}.png",
                              label_map=label_map)
        print(f"cluster {cluster_id}: {aac.num_nodes} nodes, "
              f"{aac.num_edges} edges (support {aac.support})")
    return 0


def _cmd_walk(args) -> int:
    from .average import read_aac_json, sample_walk

    aac = read_aac_json(args.aac)
    walk = sample_walk(aac, seed_node=args.seed_node, rng_seed=args.rng_seed,
                       popularity_bias=args.bias)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(list(walk), fh, indent=2)
        fh.write("\n")
    print(" -> ".join(str(n) for n in walk))
    return 0


def _cmd_verify(args) -> int:
    from .activation import read_mask
    from .builder import verify_against_definition
    from .graph import load_edge_list

    graph = load_edge_list(args.graph, directed=args.directed)
    mask = read_mask(args.mask)
    report = verify_against_definition(graph, mask, include_intra=args.include_intra)
    payload = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
    else:
        print(payload)
    if not report.passed:
        print("verification FAILED", file=sys.stderr)
        return 3
    print(f"verification PASS ({report.builder_edges} edges)")
    return 0


def _cmd_synth(args) -> int:
    from .activation import write_signal_csv
    from .graph import save_id_map, write_edge_list
    from .synth import generate_scenario, load_scenario_toml, write_truth_json

    scenario = load_scenario_toml(args.scenario)
    data = generate_scenario(scenario)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_list(data.graph, out / "graph.csv")
    save_id_map(data.graph, out / "id_map.json")
    write_signal_csv(data.signal, data.graph, out / "signal.csv")
    write_truth_json(data.truth, data.graph, out / "truth.json")
    print(f"{data.graph.num_nodes} nodes, {data.truth.num_instances} planted instances, "
          f"recommended mu {data.recommended_mu} -> {out}")
    return 0


def _cmd_bench(args) -> int:
    from .bench import run_bench, write_bench_csv

    worker_counts = None
    if args.workers_sweep:
        worker_counts = [int(w) for w in args.workers_sweep.split(",") if w]
    result = run_bench(
        mode=args.mode,
        base_edges=args.base_edges,
        base_steps=args.base_steps,
        doublings=args.doublings,
        density=args.density,
        seed=args.seed,
        worker_counts=worker_counts,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_bench_csv(result, out / f"bench_{args.mode}.csv")
    if args.figures:
        from . import report
        report.bench_figure(result.rows, out / f"bench_{args.mode}.png")
    for row in result.rows:
        print(f"size={row['size']} build={row['build_seconds']:.3f}s")
    print(f"fitted growth exponent: {result.exponent:.3f}")
    speedup = result.speedup()
    if speedup is not None:
        pairs = ", ".join(f"{c}w={s:.3f}s"
                          for c, s in zip(result.worker_counts, result.worker_seconds))
        print(f"worker sweep: {pairs} (speedup {speedup:.2f}x)")
    return 0


def _cmd_pipeline(args) -> int:
    from .pipeline import load_config, run_pipeline

    overrides = {
        "output_dir": args.output_dir,
        "mu": args.mu,
        "k": args.k,
        "seed": args.seed,
        "tau": args.tau,
        "workers": args.workers,
    }
    config = load_config(args.config, overrides)
    if args.checked:
        config.checked = True
    if args.figures is not None:
        config.figures = args.figures
    result = run_pipeline(config)
    counts = result.manifest.get("counts", {})
    print(f"pipeline complete: {counts.get('components', 0)} components, "
          f"{counts.get('clusters', 0)} clusters -> {result.output_dir}")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "mask": _cmd_mask,
    "build": _cmd_build,
    "components": _cmd_components,
    "features": _cmd_features,
    "cluster": _cmd_cluster,
    "scan-k": _cmd_scan_k,
    "aac": _cmd_aac,
    "walk": _cmd_walk,
    "verify": _cmd_verify,
    "synth": _cmd_synth,
    "bench": _cmd_bench,
    "pipeline": _cmd_pipeline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PipelineStageError as exc:
        if isinstance(exc.cause, ValidationError):
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
