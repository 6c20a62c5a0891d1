"""End-to-end orchestration: ingest, mask, build, components, cluster, average.

Stages communicate through the documented file formats so that the pipeline
and the per-stage subcommands are interchangeable. All randomness flows
from the single configured seed, and artifacts are written canonically so
that identical configurations produce byte-identical component, cluster and
average-component files regardless of worker count.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import __version__
from .activation import (
    build_edge_mask,
    read_signal_csv,
    threshold,
    validate_mask_padding,
    write_mask,
    zscore,
)
from .average import build_aac, sparsify, write_aac_json, write_layer_csv
from .builder import (
    build_activity_graph,
    build_activity_graph_dynamic,
    builder_stats,
    validate_activity_graph,
    write_activity_csv,
    write_isolated_csv,
)
from .clustering import (
    kmeans,
    scan_k,
    silhouette,
    static_features,
    write_centroids_csv,
    write_cluster_json,
    write_features_csv,
    write_scan_csv,
)
from .components import (
    extract_components,
    validate_extraction,
    write_components_json,
    write_summary_csv,
)
from .errors import PipelineStageError, ValidationError
from .graph import load_edge_events, load_edge_list, save_id_map, write_edge_list
from .synth import read_truth_json, score_recovery

NORM_SCOPES = ("none", "per_node", "global")


@dataclass
class PipelineConfig:
    graph: str
    signal: str
    output_dir: str
    events: str | None = None
    directed: bool = False
    normalization: str = "per_node"
    mu: float = 0.0
    k: int | None = None
    k_range: tuple[int, int] | None = None
    seed: int = 0
    tau: float = 0.05
    workers: int | None = None
    dynamic: bool = False
    normalize_static: bool = True
    include_intra: bool = False
    conditional_edge_weights: bool = False
    figures: bool = True
    checked: bool = False
    truth: str | None = None

    def validate(self) -> None:
        for label, path in (("graph", self.graph), ("signal", self.signal)):
            if not Path(path).exists():
                raise ValidationError(f"{label} path does not exist: {path}")
        if self.dynamic:
            if not self.events:
                raise ValidationError("dynamic mode requires an events path")
            if not Path(self.events).exists():
                raise ValidationError(f"events path does not exist: {self.events}")
        if self.truth and not Path(self.truth).exists():
            raise ValidationError(f"truth path does not exist: {self.truth}")
        if self.normalization not in NORM_SCOPES:
            raise ValidationError(f"normalization must be one of {NORM_SCOPES}")
        import math
        if not math.isfinite(self.mu):
            raise ValidationError("mu must be finite")
        if not 0.0 <= self.tau < 1.0:
            raise ValidationError(f"tau must be in [0, 1), got {self.tau}")
        if (self.k is None) == (self.k_range is None):
            raise ValidationError("exactly one of k or k_range must be set")
        if self.k is not None and self.k < 1:
            raise ValidationError("k must be positive")
        if self.k_range is not None:
            lo, hi = self.k_range
            if lo < 2 or hi < lo:
                raise ValidationError(f"bad k_range {self.k_range}")

    def echo(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


def load_config(path, overrides: dict | None = None) -> PipelineConfig:
    """Read a TOML config file and apply flag overrides on top."""
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib

    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    if "k_range" in raw and raw["k_range"] is not None:
        raw["k_range"] = tuple(raw["k_range"])
    missing = {"graph", "signal", "output_dir"} - set(raw)
    if missing:
        raise ValidationError(f"config is missing keys: {sorted(missing)}")
    return PipelineConfig(**raw)


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _write_json(payload: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass
class PipelineResult:
    output_dir: Path
    manifest: dict
    extraction: object = None
    model: object = None
    aacs: dict = field(default_factory=dict)


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Run every stage, write the artifact bundle, and return the manifest."""
    config.validate()
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}
    counts: dict[str, int] = {}
    manifest: dict = {
        "tool": "causalpatterns",
        "version": __version__,
        "seed": config.seed,
        "workers": config.workers or 0,
        "config": config.echo(),
    }

    def stage(name: str, fn):
        start = time.perf_counter()
        try:
            result = fn()
        except ValidationError:
            raise
        except PipelineStageError:
            raise
        except Exception as exc:
            raise PipelineStageError(name, exc) from exc
        timings[name] = round((time.perf_counter() - start) * 1000.0, 3)
        return result

    import os
    manifest["workers"] = config.workers or os.cpu_count() or 1

    graph = stage("ingest", lambda: load_edge_list(config.graph, directed=config.directed))
    write_edge_list(graph, out_dir / "graph.csv")
    save_id_map(graph, out_dir / "id_map.json")
    counts["nodes"] = graph.num_nodes
    counts["edges"] = graph.num_edges

    signal = stage("signal", lambda: read_signal_csv(config.signal, graph))
    if config.normalization != "none":
        signal = stage("zscore", lambda: zscore(signal, scope=config.normalization))

    mask = stage("mask", lambda: threshold(signal, config.mu))
    if config.checked:
        validate_mask_padding(mask)
    write_mask(mask, out_dir / "mask.bin")
    counts["activated_pairs"] = mask.popcount()

    if config.dynamic:
        events = stage("events", lambda: load_edge_events(
            config.events, graph, num_steps=signal.num_steps))
        edge_mask = build_edge_mask(events, graph)
        h = stage("build", lambda: build_activity_graph_dynamic(
            graph, mask, edge_mask, workers=manifest["workers"]))
    else:
        h = stage("build", lambda: build_activity_graph(
            graph, mask, workers=manifest["workers"]))
    if config.checked:
        validate_activity_graph(h, graph=graph, mask=mask)
    write_activity_csv(h, graph, out_dir / "h.csv")
    write_isolated_csv(h, graph, out_dir / "h_isolated.csv")
    stats = builder_stats(h)
    counts["causal_edges"] = h.num_edges
    counts["neighbor_edges"] = stats.num_neighbor_edges
    counts["self_edges"] = stats.num_self_edges

    extraction = stage("components", lambda: extract_components(h))
    if config.checked:
        validate_extraction(extraction, h)
    write_components_json(extraction, out_dir / "components.json", graph)
    write_summary_csv(extraction, out_dir / "summary.csv")
    counts["components"] = len(extraction.components)
    counts["singletons"] = extraction.num_singletons

    result = PipelineResult(output_dir=out_dir, manifest=manifest, extraction=extraction)

    if config.figures:
        from . import report
        report.components_figure(extraction, out_dir / "components.png")

    if not extraction.components:
        _warn("no components were extracted; skipping clustering stages")
        manifest["stage_ms"] = timings
        manifest["counts"] = counts
        _write_json(manifest, out_dir / "manifest.json")
        return result

    vectors = stage("features", lambda: [
        static_features(c, normalize=config.normalize_static)
        for c in extraction.components
    ])
    write_features_csv(vectors, out_dir / "features.csv", name=graph.id_of)

    n = len(vectors)
    chosen_k = config.k
    if config.k_range is not None:
        lo, hi = config.k_range
        hi = min(hi, n)
        if lo > hi or n < 2:
            _warn(f"k_range {config.k_range} infeasible with {n} components; "
                  "skipping clustering stages")
            chosen_k = None
        else:
            rows = stage("scan_k", lambda: scan_k(
                vectors, range(lo, hi + 1), seed=config.seed))
            write_scan_csv(rows, out_dir / "scan_k.csv")
            if config.figures:
                from . import report
                report.scan_k_figure(rows, out_dir / "scan_k.png")
            chosen_k = min(
                (r["k"] for r in rows),
                key=lambda k: (-next(r["silhouette"] for r in rows if r["k"] == k), k),
            )
            manifest["chosen_k"] = chosen_k
    elif chosen_k is not None and chosen_k > n:
        _warn(f"k={chosen_k} exceeds the {n} available components; "
              "skipping clustering stages")
        chosen_k = None

    if chosen_k is None:
        manifest["stage_ms"] = timings
        manifest["counts"] = counts
        _write_json(manifest, out_dir / "manifest.json")
        return result

    model = stage("cluster", lambda: kmeans(vectors, k=chosen_k, seed=config.seed))
    write_cluster_json(model, out_dir / "cluster.json", centroid_path="centroids.csv")
    write_centroids_csv(model, out_dir / "centroids.csv", name=graph.id_of)
    counts["clusters"] = model.k
    if model.k >= 2:
        manifest["silhouette"] = silhouette(vectors, model)
    result.model = model

    def build_averages():
        aacs = {}
        for cluster_id in range(model.k):
            if cluster_id not in set(model.assignments.values()):
                _warn(f"cluster {cluster_id} is empty; no average component written")
                continue
            aac = build_aac(extraction.components, model.assignments, cluster_id,
                            conditional_edges=config.conditional_edge_weights)
            aacs[cluster_id] = sparsify(aac, config.tau)
        return aacs

    aacs = stage("aac", build_averages)
    for cluster_id, aac in aacs.items():
        write_aac_json(aac, out_dir / f"aac_cluster{cluster_id}.json", name=graph.id_of)
        write_layer_csv(aac, out_dir / f"aac_cluster{cluster_id}_layers.csv",
                        name=graph.id_of)
        if config.figures:
            from . import report
            report.aac_figure(aac, out_dir / f"aac_cluster{cluster_id}.png")
    result.aacs = aacs

    if config.truth:
        truth = read_truth_json(config.truth, graph)
        manifest["recovery"] = score_recovery(
            extraction.components, model.assignments, truth)

    manifest["stage_ms"] = timings
    manifest["counts"] = counts
    _write_json(manifest, out_dir / "manifest.json")
    return result
