"""Average activation components: the representative pattern of a cluster.

Components assigned to a cluster are aligned at their start layer and their
nodes and causal edges are counted per relative layer. Dividing by the
cluster support turns counts into activation likelihoods, which become node
and edge weights. Sparsification prunes low-likelihood items, removing much
of the noise the clustering pulled in; a weighted walk over the surviving
causal edges then samples representative sequences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .components import DynamicComponent
from .errors import ValidationError


@dataclass(frozen=True)
class AverageComponent:
    """Layer-aligned weighted synthesis of one cluster's components.

    Node keys are spatial node indices in memory, or string node IDs after a
    JSON round-trip; layers are relative to each component's start.
    """

    cluster_id: int
    support: int
    num_layers: int
    node_weights: dict          # (node, layer) -> weight in (0, 1]
    edge_weights: dict          # (src, src_layer, dst) -> weight in (0, 1]
    sparsify_tau: float = 0.0

    @property
    def num_nodes(self) -> int:
        return len(self.node_weights)

    @property
    def num_edges(self) -> int:
        return len(self.edge_weights)

    def layer_nodes(self, layer: int) -> list:
        return sorted(node for node, lay in self.node_weights if lay == layer)

    def out_edges(self, node, layer: int) -> list[tuple]:
        """Causal out-edges of (node, layer), sorted by destination."""
        return sorted(
            (dst, w) for (src, lay, dst), w in self.edge_weights.items()
            if src == node and lay == layer
        )


def build_aac(components: list[DynamicComponent], assignments: dict[str, int],
              cluster_id: int, alignment: str = "start",
              conditional_edges: bool = False) -> AverageComponent:
    """Aggregate all components assigned to ``cluster_id`` into one average.

    Weights are occurrence counts over the cluster support. With
    ``conditional_edges`` the edge denominators become the source node's own
    occurrence count, turning edge weights into conditional likelihoods.
    """
    if alignment != "start":
        raise ValidationError(f"unknown alignment {alignment!r}")
    member = [c for c in components if assignments.get(c.id) == cluster_id]
    if not member:
        raise ValidationError(f"no components assigned to cluster {cluster_id}")

    node_counts: dict[tuple, int] = {}
    edge_counts: dict[tuple, int] = {}
    width = 0
    for dac in member:
        width = max(width, dac.width)
        base = dac.start_layer
        for node, layer in {tuple(m) for m in dac.members.tolist()}:
            key = (node, layer - base)
            node_counts[key] = node_counts.get(key, 0) + 1
        for src, layer, dst in {tuple(e) for e in dac.edges.tolist()}:
            key = (src, layer - base, dst)
            edge_counts[key] = edge_counts.get(key, 0) + 1

    support = len(member)
    node_weights = {k: c / support for k, c in node_counts.items()}
    if conditional_edges:
        edge_weights = {
            (s, t, d): c / node_counts[(s, t)]
            for (s, t, d), c in edge_counts.items()
        }
    else:
        edge_weights = {k: c / support for k, c in edge_counts.items()}

    return AverageComponent(
        cluster_id=cluster_id,
        support=support,
        num_layers=width,
        node_weights=node_weights,
        edge_weights=edge_weights,
    )


def sparsify(aac: AverageComponent, tau: float) -> AverageComponent:
    """Drop nodes and edges whose weight is at most ``tau``; edges whose
    endpoints vanish are dropped with them. Idempotent at fixed tau."""
    if not 0.0 <= tau < 1.0:
        raise ValidationError(f"tau must be in [0, 1), got {tau}")
    nodes = {k: w for k, w in aac.node_weights.items() if w > tau}
    edges = {
        (s, t, d): w for (s, t, d), w in aac.edge_weights.items()
        if w > tau and (s, t) in nodes and (d, t + 1) in nodes
    }
    return AverageComponent(
        cluster_id=aac.cluster_id,
        support=aac.support,
        num_layers=aac.num_layers,
        node_weights=nodes,
        edge_weights=edges,
        sparsify_tau=tau,
    )


def sample_walk(aac: AverageComponent, seed_node=None, rng_seed: int = 0,
                popularity_bias: float = 1.0) -> list:
    """Sample one causal walk through the average component.

    The walk starts on relative layer 0 (at ``seed_node`` if given, else
    drawn proportionally to node weight) and at each step picks an out-edge
    with probability proportional to its weight raised to
    ``popularity_bias``; bias 0 is a uniform choice. It stops at a node with
    no surviving out-edges or at the last layer.
    """
    layer0 = aac.layer_nodes(0)
    if not layer0:
        raise ValidationError("average component has no nodes on layer 0")
    rng = np.random.default_rng(rng_seed)

    if seed_node is not None:
        if (seed_node, 0) not in aac.node_weights:
            raise ValidationError(f"seed node {seed_node!r} is not on layer 0")
        node = seed_node
    else:
        weights = np.array([aac.node_weights[(n, 0)] for n in layer0])
        node = layer0[int(rng.choice(len(layer0), p=weights / weights.sum()))]

    walk = [node]
    layer = 0
    while layer < aac.num_layers - 1:
        choices = aac.out_edges(node, layer)
        if not choices:
            break
        weights = np.array([w for _, w in choices])
        # normalize by the max before biasing so large exponents cannot
        # underflow every probability at once
        probs = (weights / weights.max()) ** popularity_bias
        total = probs.sum()
        if total > 0:
            pick = int(rng.choice(len(choices), p=probs / total))
        else:
            pick = int(np.argmax(weights))
        node = choices[pick][0]
        walk.append(node)
        layer += 1
    return walk


def genre_view(aac: AverageComponent, label_map: dict) -> list[dict]:
    """Per relative layer, the summed weight of each label and the label spread.

    Every surviving node must appear in ``label_map``.
    """
    layers: list[dict] = []
    for layer in range(aac.num_layers):
        sums: dict = {}
        for (node, lay), w in aac.node_weights.items():
            if lay != layer:
                continue
            if node not in label_map:
                raise ValidationError(f"no label for node {node!r}")
            label = label_map[node]
            sums[label] = sums.get(label, 0.0) + w
        layers.append({
            "layer": layer,
            "labels": dict(sorted(sums.items())),
            "spread": len(sums),
        })
    return layers


def aac_to_dict(aac: AverageComponent, name=None) -> dict:
    label = name or (lambda x: x)
    nodes = sorted(aac.node_weights.items(), key=lambda kv: (kv[0][1], str(kv[0][0])))
    edges = sorted(aac.edge_weights.items(), key=lambda kv: (kv[0][1], str(kv[0][0]), str(kv[0][2])))
    return {
        "cluster_id": aac.cluster_id,
        "support": aac.support,
        "tau": aac.sparsify_tau,
        "nodes": [{"node": label(n), "layer": lay, "weight": w} for (n, lay), w in nodes],
        "edges": [{"src": label(s), "src_layer": lay, "dst": label(d), "weight": w}
                  for (s, lay, d), w in edges],
    }


def write_aac_json(aac: AverageComponent, path, name=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(aac_to_dict(aac, name), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_aac_json(path) -> AverageComponent:
    """Load an average component; node keys come back as the serialized IDs."""
    from pathlib import Path

    path = Path(path)
    if not path.exists():
        raise ValidationError(f"average component file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    node_weights = {(item["node"], item["layer"]): item["weight"]
                    for item in payload["nodes"]}
    edge_weights = {(item["src"], item["src_layer"], item["dst"]): item["weight"]
                    for item in payload["edges"]}
    num_layers = 1 + max((lay for _, lay in node_weights), default=-1)
    return AverageComponent(
        cluster_id=payload["cluster_id"],
        support=payload["support"],
        num_layers=num_layers,
        node_weights=node_weights,
        edge_weights=edge_weights,
        sparsify_tau=payload.get("tau", 0.0),
    )


def write_layer_csv(aac: AverageComponent, path, name=None, label_map: dict | None = None) -> None:
    """Per-layer plot data: ``layer,item,weight`` rows (labels when a map is given)."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["layer", "item", "weight"])
        if label_map is not None:
            for row in genre_view(aac, label_map):
                for item, weight in row["labels"].items():
                    out.writerow([row["layer"], item, repr(float(weight))])
        else:
            label = name or (lambda x: x)
            nodes = sorted(aac.node_weights.items(), key=lambda kv: (kv[0][1], str(kv[0][0])))
            for (node, layer), weight in nodes:
                out.writerow([layer, label(node), repr(float(weight))])
