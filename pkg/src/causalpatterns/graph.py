"""Spatial graph loading, validation and dense indexing.

The spatial graph is the static substrate the activity lives on. String node
IDs are mapped to dense indices in first-seen order, which keeps every
derived artifact reproducible across runs. Undirected edges are stored once,
canonically oriented from the lower to the higher index; duplicate edges are
merged by summing their weights.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class SpatialGraph:
    """Static graph with dense node indices and a string-ID mapping."""

    num_nodes: int
    edges: np.ndarray        # (E, 2) int64, canonical src < dst when undirected
    weights: np.ndarray      # (E,) float64, strictly positive
    directed: bool
    node_ids: tuple[str, ...]
    _index: dict[str, int] = field(repr=False, compare=False, default_factory=dict)
    _edge_index: dict[tuple[int, int], int] = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        if not self._index:
            object.__setattr__(self, "_index", {nid: i for i, nid in enumerate(self.node_ids)})
        if not self._edge_index and len(self.edges):
            object.__setattr__(
                self, "_edge_index",
                {(int(s), int(d)): k for k, (s, d) in enumerate(self.edges)},
            )

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def index_of(self, node_id: str) -> int:
        try:
            return self._index[node_id]
        except KeyError:
            raise ValidationError(f"unknown node ID {node_id!r}") from None

    def id_of(self, index: int) -> str:
        return self.node_ids[index]

    def edge_key(self, src: int, dst: int) -> tuple[int, int]:
        """Canonical storage key of the edge between two indices."""
        if not self.directed and src > dst:
            src, dst = dst, src
        return (src, dst)

    def edge_position(self, src: int, dst: int) -> int:
        """Row of (src, dst) in the edge array, or -1 if absent."""
        return self._edge_index.get(self.edge_key(src, dst), -1)

    def has_edge(self, src: int, dst: int) -> bool:
        return self.edge_position(src, dst) >= 0

    def adjacency(self) -> np.ndarray:
        """Dense weight matrix W; symmetric when undirected. Small graphs only."""
        w = np.zeros((self.num_nodes, self.num_nodes))
        for (s, d), wt in zip(self.edges, self.weights):
            w[s, d] = wt
            if not self.directed:
                w[d, s] = wt
        return w


def build_graph(pairs, directed: bool, node_ids=None) -> SpatialGraph:
    """Assemble a SpatialGraph from (src_id, dst_id, weight) triples.

    IDs are indexed in first-seen order unless an explicit id list is given.
    Duplicate edges merge with summed weights; self-loops and non-positive
    weights are rejected.
    """
    index: dict[str, int] = {}
    if node_ids is not None:
        index = {nid: i for i, nid in enumerate(node_ids)}
    order: list[str] = list(node_ids) if node_ids is not None else []
    edge_rows: list[tuple[int, int]] = []
    edge_pos: dict[tuple[int, int], int] = {}
    weights: list[float] = []

    def resolve(nid: str) -> int:
        if nid not in index:
            if node_ids is not None:
                raise ValidationError(f"unknown node ID {nid!r}")
            index[nid] = len(order)
            order.append(nid)
        return index[nid]

    for line_no, (src_id, dst_id, weight) in enumerate(pairs, start=1):
        if weight <= 0 or not np.isfinite(weight):
            raise ValidationError(f"line {line_no}: weight must be finite and > 0, got {weight}")
        s = resolve(src_id)
        d = resolve(dst_id)
        if s == d:
            raise ValidationError(
                f"line {line_no}: self-loop {src_id!r}; node persistence is modeled "
                "by temporal self-edges, not spatial loops"
            )
        if not directed and s > d:
            s, d = d, s
        key = (s, d)
        at = edge_pos.get(key)
        if at is None:
            edge_pos[key] = len(edge_rows)
            edge_rows.append(key)
            weights.append(weight)
        else:
            weights[at] += weight

    edges = np.array(edge_rows, dtype=np.int64).reshape(-1, 2)
    return SpatialGraph(
        num_nodes=len(order),
        edges=edges,
        weights=np.array(weights, dtype=np.float64),
        directed=directed,
        node_ids=tuple(order),
    )


def _data_rows(path: Path):
    """Yield (line_no, fields) for non-comment, non-empty CSV rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].lstrip().startswith("#")):
                continue
            yield line_no, [f.strip() for f in row]


def load_edge_list(path, directed: bool = False) -> SpatialGraph:
    """Load a graph from an edge-list CSV with header ``src,dst[,weight]``."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"edge list not found: {path}")
    rows = _data_rows(path)
    try:
        header_no, header = next(rows)
    except StopIteration:
        raise ValidationError(f"{path}: empty edge list") from None
    if [h.lower() for h in header[:2]] != ["src", "dst"]:
        raise ValidationError(f"{path} line {header_no}: expected header 'src,dst[,weight]'")

    def parse():
        for line_no, row in rows:
            if len(row) < 2:
                raise ValidationError(f"{path} line {line_no}: expected at least 2 fields")
            weight = 1.0
            if len(row) >= 3 and row[2] != "":
                try:
                    weight = float(row[2])
                except ValueError:
                    raise ValidationError(
                        f"{path} line {line_no}: bad weight {row[2]!r}"
                    ) from None
            yield row[0], row[1], weight

    try:
        return build_graph(parse(), directed=directed)
    except ValidationError as exc:
        # build_graph numbers data rows from 1; surface the file path instead
        raise ValidationError(f"{path}: {exc}") from None


def write_edge_list(graph: SpatialGraph, path) -> None:
    """Write the graph back out; re-loading reproduces indices, weights and flags."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["src", "dst", "weight"])
        for (s, d), w in zip(graph.edges, graph.weights):
            out.writerow([graph.id_of(int(s)), graph.id_of(int(d)), repr(float(w))])


def save_id_map(graph: SpatialGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(list(graph.node_ids), fh, indent=2)
        fh.write("\n")


def load_id_map(path) -> tuple[str, ...]:
    with open(path, encoding="utf-8") as fh:
        ids = json.load(fh)
    return tuple(ids)


@dataclass(frozen=True)
class EdgeEvents:
    """Per-step existence events for edges of a companion graph."""

    events: np.ndarray   # (K, 3) int64: src index, dst index, step; canonical orientation
    num_steps: int

    @property
    def num_events(self) -> int:
        return len(self.events)


def load_edge_events(path, graph: SpatialGraph, num_steps: int) -> EdgeEvents:
    """Load edge events from a CSV with header ``src,dst,t``.

    Every event must reference an existing edge of ``graph`` (either
    orientation for undirected graphs) and a step below ``num_steps``.
    Duplicates collapse to one event.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"event file not found: {path}")
    rows = _data_rows(path)
    try:
        header_no, header = next(rows)
    except StopIteration:
        raise ValidationError(f"{path}: empty event file") from None
    if [h.lower() for h in header[:3]] != ["src", "dst", "t"]:
        raise ValidationError(f"{path} line {header_no}: expected header 'src,dst,t'")

    seen: set[tuple[int, int, int]] = set()
    triples: list[tuple[int, int, int]] = []
    for line_no, row in rows:
        if len(row) < 3:
            raise ValidationError(f"{path} line {line_no}: expected 3 fields")
        try:
            s = graph.index_of(row[0])
            d = graph.index_of(row[1])
        except ValidationError as exc:
            raise ValidationError(f"{path} line {line_no}: {exc}") from None
        try:
            t = int(row[2])
        except ValueError:
            raise ValidationError(f"{path} line {line_no}: bad step {row[2]!r}") from None
        if not 0 <= t < num_steps:
            raise ValidationError(
                f"{path} line {line_no}: step {t} outside [0, {num_steps})"
            )
        s, d = graph.edge_key(s, d)
        if not graph.has_edge(s, d):
            raise ValidationError(
                f"{path} line {line_no}: ({row[0]},{row[1]}) is not an edge of the graph"
            )
        key = (s, d, t)
        if key not in seen:
            seen.add(key)
            triples.append(key)

    events = np.array(triples, dtype=np.int64).reshape(-1, 3)
    return EdgeEvents(events=events, num_steps=num_steps)
