"""Dynamic activated components: weakly connected pieces of the activity graph.

Each component is one observed spatio-temporal pattern. Single-pair
components carry no dynamics and are dropped from the result, but their
count is kept so that the partition of activated pairs stays accountable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .builder import KIND_NAMES, CausalActivityGraph
from .errors import ValidationError
from .graph import SpatialGraph


@dataclass(frozen=True)
class DynamicComponent:
    """One weakly connected component of the activity graph.

    The identifier is the component's lexicographically smallest
    (layer, node) member, rendered as ``"layer:node"``; it is stable across
    runs and worker counts.
    """

    id: str
    num_spatial_nodes: int
    members: np.ndarray    # (m, 2) int64 (node, layer), sorted by (layer, node)
    edges: np.ndarray      # (k, 3) int64 (src_node, src_layer, dst_node), canonical order
    edge_kinds: np.ndarray
    width: int
    spatial_spread: int
    start_layer: int
    end_layer: int

    @property
    def num_members(self) -> int:
        return len(self.members)

    def member_set(self) -> set[tuple[int, int]]:
        return {tuple(row) for row in self.members.tolist()}

    def sort_key(self) -> tuple[int, int]:
        layer, node = self.id.split(":")
        return (int(layer), int(node))


@dataclass(frozen=True)
class ExtractionResult:
    components: list[DynamicComponent]
    num_singletons: int
    num_pairs: int          # all activated pairs, singletons included

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return len(self.components)


class _UnionFind:
    """Array union-find with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def extract_components(h: CausalActivityGraph) -> ExtractionResult:
    """Partition the activity graph into components, discarding singletons.

    Returned components are sorted by descending member count, ties broken by
    the component identifier.
    """
    pairs = h.activity_pairs()
    if not len(pairs):
        return ExtractionResult(components=[], num_singletons=0, num_pairs=0)

    # encode (layer, node) so the smallest key is the lexicographically
    # smallest member; pairs come sorted by that same order
    n = h.num_spatial_nodes
    keys = pairs[:, 1] * n + pairs[:, 0]
    uf = _UnionFind(len(keys))

    if len(h.edges):
        src_keys = h.edges[:, 1] * n + h.edges[:, 0]
        dst_keys = (h.edges[:, 1] + 1) * n + h.edges[:, 2]
        src_pos = np.searchsorted(keys, src_keys)
        dst_pos = np.searchsorted(keys, dst_keys)
        for a, b in zip(src_pos.tolist(), dst_pos.tolist()):
            uf.union(a, b)

    roots = np.fromiter((uf.find(i) for i in range(len(keys))), dtype=np.int64)
    order = np.argsort(roots, kind="stable")
    boundaries = np.flatnonzero(np.r_[True, roots[order][1:] != roots[order][:-1]])
    groups = np.split(order, boundaries[1:])

    edge_roots = np.fromiter((uf.find(i) for i in src_pos.tolist()), dtype=np.int64) \
        if len(h.edges) else np.empty(0, dtype=np.int64)

    components: list[DynamicComponent] = []
    singletons = 0
    for group in groups:
        if len(group) == 1:
            singletons += 1
            continue
        members = pairs[np.sort(group)]
        root = roots[group[0]]
        comp_edges = h.edges[edge_roots == root]
        comp_kinds = h.kinds[edge_roots == root]
        layers = members[:, 1]
        start, end = int(layers.min()), int(layers.max())
        smallest = members[0]  # members sorted by (layer, node)
        components.append(DynamicComponent(
            id=f"{int(smallest[1])}:{int(smallest[0])}",
            num_spatial_nodes=n,
            members=members,
            edges=comp_edges,
            edge_kinds=comp_kinds,
            width=end - start + 1,
            spatial_spread=int(len(np.unique(members[:, 0]))),
            start_layer=start,
            end_layer=end,
        ))

    components.sort(key=lambda c: (-c.num_members, c.sort_key()))
    return ExtractionResult(
        components=components,
        num_singletons=singletons,
        num_pairs=len(pairs),
    )


def validate_extraction(result: ExtractionResult, h: CausalActivityGraph) -> None:
    """Assert partition, edge closure and layer contiguity; used in checked runs."""
    total = sum(c.num_members for c in result.components) + result.num_singletons
    if total != result.num_pairs or result.num_pairs != len(h.activity_pairs()):
        raise ValidationError("components do not partition the activated pairs")
    edge_total = sum(len(c.edges) for c in result.components)
    if edge_total != h.num_edges:
        raise ValidationError("edges are not closed within components")
    for c in result.components:
        layers = np.unique(c.members[:, 1])
        if len(layers) != c.width or layers[0] != c.start_layer or layers[-1] != c.end_layer:
            raise ValidationError(f"component {c.id} has non-contiguous layers")
        if c.num_members < 2:
            raise ValidationError(f"singleton component {c.id} was retained")


def component_summary(result: ExtractionResult, layer_label=None) -> list[dict]:
    """Per-component rows: member count, width, spatial spread, start, end.

    ``layer_label`` optionally maps a layer index to a display timestamp.
    """
    label = layer_label or (lambda t: t)
    return [
        {
            "num_members": c.num_members,
            "num_layers": c.width,
            "spatial_spread": c.spatial_spread,
            "start": label(c.start_layer),
            "end": label(c.end_layer),
        }
        for c in result.components
    ]


def write_summary_csv(result: ExtractionResult, path, layer_label=None) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["num_members", "num_layers", "spatial_spread", "start", "end"])
        for row in component_summary(result, layer_label):
            out.writerow([row["num_members"], row["num_layers"], row["spatial_spread"],
                          row["start"], row["end"]])


def components_to_json(result: ExtractionResult, graph: SpatialGraph | None = None) -> list[dict]:
    """JSON form; node entries use string IDs when a graph is supplied."""
    name = graph.id_of if graph is not None else (lambda i: i)
    out = []
    for c in result.components:
        out.append({
            "id": c.id,
            "members": [[name(int(node)), int(layer)] for node, layer in c.members],
            "edges": [
                [name(int(s)), int(t), name(int(d)), KIND_NAMES[int(k)]]
                for (s, t, d), k in zip(c.edges.tolist(), c.edge_kinds.tolist())
            ],
            "num_members": c.num_members,
            "width": c.width,
            "spatial_spread": c.spatial_spread,
            "start_layer": c.start_layer,
            "end_layer": c.end_layer,
        })
    return out


def write_components_json(result: ExtractionResult, path,
                          graph: SpatialGraph | None = None,
                          num_singletons_key: bool = True) -> None:
    payload = {
        "components": components_to_json(result, graph),
        "num_singletons": result.num_singletons,
        "num_pairs": result.num_pairs,
    }
    if not num_singletons_key:
        payload.pop("num_singletons")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_components_json(path, graph: SpatialGraph | None = None) -> ExtractionResult:
    from pathlib import Path

    path = Path(path)
    if not path.exists():
        raise ValidationError(f"components file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    index = graph.index_of if graph is not None else (lambda x: int(x))
    kind_codes = {name: code for code, name in KIND_NAMES.items()}
    components = []
    for item in payload["components"]:
        members = np.array([[index(node), layer] for node, layer in item["members"]],
                           dtype=np.int64).reshape(-1, 2)
        edges = np.array([[index(s), t, index(d)] for s, t, d, _ in item["edges"]],
                         dtype=np.int64).reshape(-1, 3)
        kinds = np.array([kind_codes[k] for *_, k in item["edges"]], dtype=np.uint8)
        components.append(DynamicComponent(
            id=item["id"],
            num_spatial_nodes=graph.num_nodes if graph is not None
            else int(members[:, 0].max(initial=-1)) + 1,
            members=members,
            edges=edges,
            edge_kinds=kinds,
            width=item["width"],
            spatial_spread=item["spatial_spread"],
            start_layer=item["start_layer"],
            end_layer=item["end_layer"],
        ))
    return ExtractionResult(
        components=components,
        num_singletons=payload.get("num_singletons", 0),
        num_pairs=payload.get("num_pairs", sum(c.num_members for c in components)),
    )
