"""Construction of the causal multilayer graph of activity.

The full layered graph is never materialized. For every spatial edge (i, j)
the builder combines the two packed activity rows with a one-step shift,

    u_e(t) = M(i, t) AND M(j, t+1),

so the set bits of ``u_e`` are exactly the causal edges contributed by that
spatial edge; a per-node variant with i = j yields the temporal self-edges.
Set bits are recovered by jumping from one least-significant set bit to the
next, which beats a per-position scan when activity is sparse. Packed rows
are 64-bit words, so the shift carries bits across word boundaries.

The dynamic-graph variant adds a third AND operand, the per-edge existence
mask at the source layer. A small-instance verifier rebuilds the adjacency
from its Kronecker-product definition and compares edge sets exactly.
"""

from __future__ import annotations

import os
from array import array
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .activation import WORD_BITS, ActivationMask, EdgeMask, unpack_bits
from .errors import ValidationError
from .graph import SpatialGraph

KIND_NEIGHBOR = 0
KIND_SELF = 1
KIND_NAMES = {KIND_NEIGHBOR: "neighbor", KIND_SELF: "self"}

VERIFIER_CELL_LIMIT = 4096
_CHUNK_ROWS = 1 << 18


@dataclass(frozen=True)
class CausalActivityGraph:
    """Directed layered graph of activity: edges join consecutive layers only.

    ``edges`` rows are (src_node, src_layer, dst_node); the destination layer
    is always src_layer + 1. Rows are sorted by (src_layer, src_node,
    dst_node) and deduplicated, so serialized output is canonical. Activated
    pairs that touch no causal edge are kept aside in ``isolated``.
    """

    num_spatial_nodes: int
    num_layers: int
    edges: np.ndarray      # (M, 3) int64
    kinds: np.ndarray      # (M,) uint8: KIND_NEIGHBOR or KIND_SELF
    isolated: np.ndarray   # (K, 2) int64: (node, layer)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_neighbor_edges(self) -> int:
        return int(np.count_nonzero(self.kinds == KIND_NEIGHBOR))

    @property
    def num_self_edges(self) -> int:
        return int(np.count_nonzero(self.kinds == KIND_SELF))

    def endpoint_pairs(self) -> np.ndarray:
        """Distinct (node, layer) pairs incident to at least one edge."""
        if not len(self.edges):
            return np.empty((0, 2), dtype=np.int64)
        src = self.edges[:, [0, 1]]
        dst = np.column_stack([self.edges[:, 2], self.edges[:, 1] + 1])
        return _unique_pairs(np.concatenate([src, dst]))

    def activity_pairs(self) -> np.ndarray:
        """All (node, layer) pairs of the graph: edge endpoints plus isolated."""
        return _unique_pairs(np.concatenate([self.endpoint_pairs(), self.isolated]))

    def edge_set(self) -> set[tuple[int, int, int]]:
        return {tuple(row) for row in self.edges.tolist()}


def _unique_pairs(pairs: np.ndarray) -> np.ndarray:
    if not len(pairs):
        return np.empty((0, 2), dtype=np.int64)
    order = np.lexsort((pairs[:, 0], pairs[:, 1]))
    pairs = pairs[order]
    keep = np.r_[True, np.any(pairs[1:] != pairs[:-1], axis=1)]
    return pairs[keep]


def shift_steps_down(words: np.ndarray) -> np.ndarray:
    """Align bit t+1 onto bit t: a right shift with cross-word carry.

    The would-be link from the last layer to the nonexistent next one drops
    out because zeros are shifted in at the top.
    """
    out = words >> np.uint64(1)
    if words.shape[1] > 1:
        out[:, :-1] |= words[:, 1:] << np.uint64(WORD_BITS - 1)
    return out


def _emit_set_bits(u: np.ndarray, src_nodes: list[int], dst_nodes: list[int], buf: array) -> None:
    """Append (src, layer, dst) triples for every set bit of every row of u.

    Jumps from one least-significant set bit to the next inside each nonzero
    word instead of scanning all positions.
    """
    rows, word_cols = np.nonzero(u)
    if not len(rows):
        return
    vals = u[rows, word_cols].tolist()
    bases = (word_cols.astype(np.int64) * WORD_BITS).tolist()
    rows = rows.tolist()
    append = buf.append
    for r, base, word in zip(rows, bases, vals):
        s = src_nodes[r]
        d = dst_nodes[r]
        while word:
            low = word & -word
            append(s)
            append(base + low.bit_length() - 1)
            append(d)
            word ^= low



def _chunks(total: int, workers: int) -> list[tuple[int, int]]:
    size = max(1, min(-(-total // max(1, workers)), _CHUNK_ROWS))
    return [(a, min(a + size, total)) for a in range(0, total, size)]


def _scatter_or(target: np.ndarray, nodes: np.ndarray, steps: np.ndarray) -> None:
    """target[node] |= 1 << step, vectorized over repeated (node, step) pairs."""
    nwords = target.shape[1]
    keys = nodes * nwords + steps // WORD_BITS
    bits = np.uint64(1) << (steps % WORD_BITS).astype(np.uint64)
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    bits = bits[order]
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    merged = np.bitwise_or.reduceat(bits, starts)
    flat = target.reshape(-1)
    flat[keys[starts]] |= merged


def _build(graph: SpatialGraph, mask: ActivationMask,
           edge_mask: EdgeMask | None, workers: int | None) -> CausalActivityGraph:
    if mask.num_nodes != graph.num_nodes:
        raise ValidationError(
            f"mask has {mask.num_nodes} rows but graph has {graph.num_nodes} nodes")
    if edge_mask is not None:
        if edge_mask.num_edges != graph.num_edges:
            raise ValidationError(
                f"edge mask has {edge_mask.num_edges} rows but graph has "
                f"{graph.num_edges} edges")
        if edge_mask.num_steps != mask.num_steps:
            raise ValidationError("edge mask and activation mask disagree on step count")
    workers = workers or os.cpu_count() or 1

    m = mask.words
    shifted = shift_steps_down(m)

    if graph.num_edges:
        e0 = graph.edges[:, 0]
        e1 = graph.edges[:, 1]
        if graph.directed:
            src_idx, dst_idx = e0, e1
            row_of_edge = np.arange(graph.num_edges)
        else:
            src_idx = np.concatenate([e0, e1])
            dst_idx = np.concatenate([e1, e0])
            row_of_edge = np.tile(np.arange(graph.num_edges), 2)
    else:
        src_idx = dst_idx = row_of_edge = np.empty(0, dtype=np.int64)

    src_list = src_idx.tolist()
    dst_list = dst_idx.tolist()
    node_list = list(range(graph.num_nodes))

    def neighbor_job(span: tuple[int, int]) -> array:
        a, b = span
        u = m[src_idx[a:b]] & shifted[dst_idx[a:b]]
        if edge_mask is not None:
            u &= edge_mask.words[row_of_edge[a:b]]
        buf = array("q")
        _emit_set_bits(u, src_list[a:b], dst_list[a:b], buf)
        return buf

    def self_job(span: tuple[int, int]) -> array:
        a, b = span
        u = m[a:b] & shifted[a:b]
        buf = array("q")
        _emit_set_bits(u, node_list[a:b], node_list[a:b], buf)
        return buf

    neighbor_spans = _chunks(len(src_idx), workers) if len(src_idx) else []
    self_spans = _chunks(graph.num_nodes, workers) if graph.num_nodes else []
    if workers == 1:
        neighbor_bufs = [neighbor_job(s) for s in neighbor_spans]
        self_bufs = [self_job(s) for s in self_spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            neighbor_bufs = list(pool.map(neighbor_job, neighbor_spans))
            self_bufs = list(pool.map(self_job, self_spans))

    def rows_from(bufs: list[array]) -> np.ndarray:
        total = sum(len(b) for b in bufs)
        if not total:
            return np.empty((0, 3), dtype=np.int64)
        flat = np.empty(total, dtype=np.int64)
        at = 0
        for b in bufs:
            flat[at:at + len(b)] = np.frombuffer(b, dtype=np.int64)
            at += len(b)
        return flat.reshape(-1, 3)

    neighbor_rows = rows_from(neighbor_bufs)
    self_rows = rows_from(self_bufs)
    edges = np.concatenate([neighbor_rows, self_rows])
    kinds = np.concatenate([
        np.zeros(len(neighbor_rows), dtype=np.uint8),
        np.ones(len(self_rows), dtype=np.uint8),
    ])

    # canonical order (src_layer, src_node, dst_node), then drop duplicates
    if len(edges):
        order = np.lexsort((edges[:, 2], edges[:, 0], edges[:, 1]))
        edges = edges[order]
        kinds = kinds[order]
        keep = np.r_[True, np.any(edges[1:] != edges[:-1], axis=1)]
        edges = edges[keep]
        kinds = kinds[keep]

    # activated pairs that no causal edge touches
    used = np.zeros_like(m)
    if len(edges):
        _scatter_or(used, edges[:, 0], edges[:, 1])
        _scatter_or(used, edges[:, 2], edges[:, 1] + 1)
    lonely = unpack_bits(m & ~used, mask.num_steps)
    iso_nodes, iso_layers = np.nonzero(lonely)
    isolated = np.column_stack([iso_nodes, iso_layers]).astype(np.int64)

    return CausalActivityGraph(
        num_spatial_nodes=graph.num_nodes,
        num_layers=mask.num_steps,
        edges=edges,
        kinds=kinds,
        isolated=isolated,
    )


def build_activity_graph(graph: SpatialGraph, mask: ActivationMask,
                         workers: int | None = None) -> CausalActivityGraph:
    """Build the causal activity graph from a static spatial graph and a mask."""
    return _build(graph, mask, None, workers)


def build_activity_graph_dynamic(graph: SpatialGraph, mask: ActivationMask,
                                 edge_mask: EdgeMask,
                                 workers: int | None = None) -> CausalActivityGraph:
    """Generalized build: a neighbor edge also requires the spatial edge to
    exist at the source layer. Self-edges follow the static rule."""
    return _build(graph, mask, edge_mask, workers)


@dataclass(frozen=True)
class BuilderStats:
    num_nodes: int            # distinct (node, layer) pairs incident to an edge
    num_neighbor_edges: int
    num_self_edges: int
    num_isolated_pairs: int
    num_activated_pairs: int  # nodes + isolated
    layer_density: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "nodes": self.num_nodes,
            "neighbor_edges": self.num_neighbor_edges,
            "self_edges": self.num_self_edges,
            "isolated_pairs": self.num_isolated_pairs,
            "activated_pairs": self.num_activated_pairs,
            "layer_density": list(self.layer_density),
        }


def builder_stats(h: CausalActivityGraph) -> BuilderStats:
    """Counts and per-layer densities of a built activity graph."""
    endpoints = h.endpoint_pairs()
    pairs = h.activity_pairs()
    per_layer = np.bincount(pairs[:, 1], minlength=h.num_layers) if len(pairs) \
        else np.zeros(h.num_layers, dtype=np.int64)
    denom = max(1, h.num_spatial_nodes)
    return BuilderStats(
        num_nodes=len(endpoints),
        num_neighbor_edges=h.num_neighbor_edges,
        num_self_edges=h.num_self_edges,
        num_isolated_pairs=len(h.isolated),
        num_activated_pairs=len(pairs),
        layer_density=tuple(float(c) / denom for c in per_layer),
    )


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    builder_edges: int
    definition_edges: int
    first_mismatch: dict | None
    intra_edges: int | None = None

    def to_dict(self) -> dict:
        out = {
            "pass": self.passed,
            "builder_edges": self.builder_edges,
            "definition_edges": self.definition_edges,
            "first_mismatch": self.first_mismatch,
        }
        if self.intra_edges is not None:
            out["intra_edges"] = self.intra_edges
        return out


def verify_against_definition(graph: SpatialGraph, mask: ActivationMask,
                              include_intra: bool = False,
                              h: CausalActivityGraph | None = None) -> VerificationReport:
    """Compare the builder against the explicit layered-adjacency definition.

    Materializes the full multilayer adjacency as a Kronecker product of the
    one-off-diagonal layer coupling with the spatial adjacency (neighbor
    links) and the identity (self links), restricts it to activated pairs,
    and checks exact equality of the inter-layer edge set with the builder's
    output. ``include_intra`` additionally materializes the within-layer
    copies of the spatial edges and reports their count; those never enter
    the builder comparison.
    """
    n, t = graph.num_nodes, mask.num_steps
    if n * t > VERIFIER_CELL_LIMIT:
        raise ValidationError(
            f"verifier limited to N*T <= {VERIFIER_CELL_LIMIT}, got {n * t}")
    if mask.num_nodes != n:
        raise ValidationError("mask and graph disagree on node count")

    adj = graph.adjacency() > 0
    off = np.eye(t, k=1, dtype=bool)
    coupling = np.kron(off, adj) | np.kron(off, np.eye(n, dtype=bool))

    active = mask.to_dense()                 # (N, T)
    flat = active.T.reshape(-1)              # position layer * N + node
    coupling &= flat[:, None] & flat[None, :]

    src_pos, dst_pos = np.nonzero(coupling)
    src_layer, src_node = np.divmod(src_pos, n)
    dst_node = dst_pos % n
    definition = {(int(i), int(tt), int(j))
                  for i, tt, j in zip(src_node, src_layer, dst_node)}

    intra_count = None
    if include_intra:
        intra = np.kron(np.eye(t, dtype=bool), adj)
        intra &= flat[:, None] & flat[None, :]
        intra_count = int(np.count_nonzero(intra))
        # cross-check the Kronecker form against a direct per-layer count
        direct = sum(int(np.count_nonzero(np.outer(active[:, tt], active[:, tt]) & adj))
                     for tt in range(t))
        if direct != intra_count:
            raise RuntimeError("intra-layer Kronecker materialization is inconsistent")

    if h is None:
        h = build_activity_graph(graph, mask)
    built = h.edge_set()

    first_mismatch = None
    if built != definition:
        only_built = built - definition
        only_def = definition - built
        candidates = []
        if only_built:
            candidates.append((min((e[1], e[0], e[2]) for e in only_built), "builder"))
        if only_def:
            candidates.append((min((e[1], e[0], e[2]) for e in only_def), "definition"))
        (layer, src, dst), side = min(candidates)
        first_mismatch = {"edge": [src, layer, dst], "only_in": side}

    return VerificationReport(
        passed=built == definition,
        builder_edges=len(built),
        definition_edges=len(definition),
        first_mismatch=first_mismatch,
        intra_edges=intra_count,
    )


def validate_activity_graph(h: CausalActivityGraph, graph: SpatialGraph | None = None,
                            mask: ActivationMask | None = None) -> None:
    """Assert the structural invariants of a built graph; used in checked runs."""
    edges = h.edges
    if len(edges):
        if edges[:, 1].min() < 0 or edges[:, 1].max() >= h.num_layers - 1:
            raise ValidationError("edge source layer out of range")
        order = np.lexsort((edges[:, 2], edges[:, 0], edges[:, 1]))
        if not np.array_equal(order, np.arange(len(edges))):
            raise ValidationError("edges are not in canonical order")
        self_rows = edges[:, 0] == edges[:, 2]
        if not np.array_equal(self_rows, h.kinds == KIND_SELF):
            raise ValidationError("edge kind flags disagree with node indices")
    if mask is not None:
        dense = mask.to_dense()
        for node, layer in h.activity_pairs().tolist():
            if not dense[node, layer]:
                raise ValidationError(f"pair ({node},{layer}) is not activated")
    if graph is not None:
        for (s, _t, d), kind in zip(edges.tolist(), h.kinds.tolist()):
            if kind == KIND_NEIGHBOR and not graph.has_edge(s, d):
                raise ValidationError(f"neighbor edge ({s},{d}) has no spatial edge")
            if kind == KIND_NEIGHBOR and graph.directed and graph.edge_position(s, d) < 0:
                raise ValidationError(f"directed edge ({s},{d}) missing in graph")


def write_activity_csv(h: CausalActivityGraph, graph: SpatialGraph, path) -> None:
    """Serialize causal edges as CSV (node IDs, one row per edge)."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["src_node", "src_layer", "dst_node", "dst_layer", "kind"])
        for (s, t, d), kind in zip(h.edges.tolist(), h.kinds.tolist()):
            out.writerow([graph.id_of(s), t, graph.id_of(d), t + 1, KIND_NAMES[kind]])


def write_isolated_csv(h: CausalActivityGraph, graph: SpatialGraph, path) -> None:
    """Companion file for activated pairs that touch no causal edge."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["node", "layer"])
        for node, layer in h.isolated.tolist():
            out.writerow([graph.id_of(node), layer])


def read_activity_csv(path, graph: SpatialGraph, num_layers: int | None = None,
                      isolated_path=None) -> CausalActivityGraph:
    """Load a causal activity graph from its CSV form (plus optional isolated file).

    When ``num_layers`` is omitted it is inferred as one past the largest
    layer present in the data.
    """
    import csv
    from pathlib import Path

    path = Path(path)
    if not path.exists():
        raise ValidationError(f"activity graph file not found: {path}")
    rows = []
    kinds = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:5]] != \
                ["src_node", "src_layer", "dst_node", "dst_layer", "kind"]:
            raise ValidationError(f"{path}: bad activity graph header")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            s = graph.index_of(row[0])
            d = graph.index_of(row[2])
            t = int(row[1])
            if int(row[3]) != t + 1:
                raise ValidationError(f"{path} line {line_no}: edge must span one layer")
            if row[4] not in ("neighbor", "self"):
                raise ValidationError(f"{path} line {line_no}: bad kind {row[4]!r}")
            rows.append((s, t, d))
            kinds.append(KIND_SELF if row[4] == "self" else KIND_NEIGHBOR)

    isolated = []
    if isolated_path is not None and Path(isolated_path).exists():
        with open(isolated_path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            next(reader, None)
            for row in reader:
                if row:
                    isolated.append((graph.index_of(row[0]), int(row[1])))

    edges = np.array(rows, dtype=np.int64).reshape(-1, 3)
    iso = np.array(isolated, dtype=np.int64).reshape(-1, 2)
    if num_layers is None:
        top = 0
        if len(edges):
            top = int(edges[:, 1].max()) + 1
        if len(iso):
            top = max(top, int(iso[:, 1].max()))
        num_layers = top + 1
    return CausalActivityGraph(
        num_spatial_nodes=graph.num_nodes,
        num_layers=num_layers,
        edges=edges,
        kinds=np.array(kinds, dtype=np.uint8),
        isolated=iso,
    )
