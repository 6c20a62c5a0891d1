"""Feature vectors for components and seeded Lloyd k-means with silhouette.

The static vector of a component counts, per spatial node, how many layers
that node is active on; it deliberately forgets the dynamics (a bag of
nodes) and is the clustering input. The dynamic vector is the flattened
activation sub-mask over the component's bounding box and feeds the average
component stage.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .components import DynamicComponent
from .errors import ValidationError


@dataclass(frozen=True)
class StaticFeatureVector:
    """Sparse per-node activation counts of one component."""

    component_id: str
    length: int
    indices: np.ndarray   # sorted spatial node indices with nonzero counts
    values: np.ndarray    # float64 counts (or unit-norm counts when normalized)
    normalized: bool

    def dense(self) -> np.ndarray:
        out = np.zeros(self.length)
        out[self.indices] = self.values
        return out


@dataclass(frozen=True)
class DynamicFeatureVector:
    """Row-major vectorized activation sub-mask over the bounding box."""

    component_id: str
    bits: np.ndarray        # flat bool, len(nodes) * width
    nodes: np.ndarray       # sorted spatial nodes of the box rows
    start_layer: int
    end_layer: int

    @property
    def width(self) -> int:
        return self.end_layer - self.start_layer + 1

    def popcount(self) -> int:
        return int(self.bits.sum())


def static_features(dac: DynamicComponent, normalize: bool = True) -> StaticFeatureVector:
    nodes, counts = np.unique(dac.members[:, 0], return_counts=True)
    values = counts.astype(np.float64)
    if normalize:
        values = values / np.linalg.norm(values)
    return StaticFeatureVector(
        component_id=dac.id,
        length=dac.num_spatial_nodes,
        indices=nodes.astype(np.int64),
        values=values,
        normalized=normalize,
    )


def dynamic_features(dac: DynamicComponent) -> DynamicFeatureVector:
    nodes = np.unique(dac.members[:, 0])
    row_of = {int(n): r for r, n in enumerate(nodes)}
    width = dac.end_layer - dac.start_layer + 1
    box = np.zeros((len(nodes), width), dtype=bool)
    for node, layer in dac.members.tolist():
        box[row_of[node], layer - dac.start_layer] = True
    return DynamicFeatureVector(
        component_id=dac.id,
        bits=box.reshape(-1),
        nodes=nodes.astype(np.int64),
        start_layer=dac.start_layer,
        end_layer=dac.end_layer,
    )


@dataclass(frozen=True)
class ClusterModel:
    k: int
    centroids: np.ndarray               # (k, N)
    assignments: dict[str, int]         # component id -> cluster index
    wcss: float
    iterations: int
    seed: int
    wcss_history: tuple[float, ...] = field(default=(), compare=False)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "iterations": self.iterations,
            "wcss": self.wcss,
            "assignments": dict(sorted(self.assignments.items())),
        }


def _canonical_matrix(vectors: list[StaticFeatureVector]) -> tuple[list[str], np.ndarray]:
    """Order vectors by component id and densify; order-independent by construction."""
    if not vectors:
        raise ValidationError("no feature vectors given")
    length = vectors[0].length
    ids = [v.component_id for v in vectors]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate component ids among feature vectors")
    by_id = sorted(vectors, key=lambda v: v.component_id)
    x = np.zeros((len(by_id), length))
    for row, v in enumerate(by_id):
        if v.length != length:
            raise ValidationError("feature vectors disagree on length")
        x[row, v.indices] = v.values
    return [v.component_id for v in by_id], x


def _plus_plus_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    chosen = [int(rng.integers(n))]
    d2 = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            probs = d2 / total
            pick = int(rng.choice(n, p=probs))
        else:
            # all remaining points coincide with a centroid; spread uniformly
            remaining = [i for i in range(n) if i not in chosen]
            pick = int(rng.choice(remaining)) if remaining else int(rng.integers(n))
        chosen.append(pick)
        d2 = np.minimum(d2, ((x - x[pick]) ** 2).sum(axis=1))
    return x[chosen].copy()


def _assign(x: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # squared Euclidean distances; argmin breaks ties toward the lowest index
    d2 = (x ** 2).sum(axis=1)[:, None] + (centroids ** 2).sum(axis=1)[None, :] \
        - 2.0 * (x @ centroids.T)
    np.maximum(d2, 0.0, out=d2)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(len(x)), labels]


def _lloyd(x: np.ndarray, k: int, rng: np.random.Generator,
           max_iter: int) -> tuple[np.ndarray, list[float], int]:
    centroids = _plus_plus_init(x, k, rng)
    labels = np.full(len(x), -1)
    history: list[float] = []
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        new_labels, d2 = _assign(x, centroids)

        # repair empty clusters before accepting the assignment; the donor is
        # the farthest point whose own cluster keeps at least one member
        for empty in [c for c in range(k) if not np.any(new_labels == c)]:
            sizes = np.bincount(new_labels, minlength=k)
            candidates = np.where(sizes[new_labels] > 1, d2, -np.inf)
            donor = int(np.argmax(candidates))
            new_labels[donor] = empty
            d2[donor] = 0.0

        wcss = 0.0
        for c in range(k):
            points = x[new_labels == c]
            centroids[c] = points.mean(axis=0)
            wcss += float(((points - centroids[c]) ** 2).sum())
        if history and wcss > history[-1] + 1e-8 * max(1.0, history[-1]):
            raise RuntimeError(f"within-cluster sum of squares increased: "
                               f"{history[-1]} -> {wcss}")
        history.append(wcss)

        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return centroids, history, iterations


def kmeans(vectors: list[StaticFeatureVector], k: int, seed: int = 0,
           max_iter: int = 100, n_init: int = 10) -> ClusterModel:
    """Lloyd iterations from seeded k-means++ starts, best of ``n_init`` runs.

    Scattered small components otherwise lure the plus-plus sampling into
    spending a centroid on them; restarting and keeping the lowest final
    objective makes the outcome robust while staying deterministic for a
    given seed and independent of input order. Empty clusters are repaired
    by donating the point farthest from its centroid (ties toward the
    lowest point index).
    """
    ids, x = _canonical_matrix(vectors)
    n = len(x)
    if not 1 <= k <= n:
        raise ValidationError(f"k must be in [1, {n}], got {k}")
    if n_init < 1:
        raise ValidationError("n_init must be positive")

    best = None
    for child_seed in np.random.SeedSequence(seed).spawn(n_init):
        centroids, history, iterations = _lloyd(x, k, np.random.default_rng(child_seed),
                                                max_iter)
        final_labels, _ = _assign(x, centroids)
        wcss = float(((x - centroids[final_labels]) ** 2).sum())
        if best is None or wcss < best[0]:
            best = (wcss, centroids, final_labels, history, iterations)

    wcss, centroids, final_labels, history, iterations = best
    return ClusterModel(
        k=k,
        centroids=centroids,
        assignments={cid: int(lab) for cid, lab in zip(ids, final_labels)},
        wcss=wcss,
        iterations=iterations,
        seed=seed,
        wcss_history=tuple(history),
    )


def silhouette(vectors: list[StaticFeatureVector], model: ClusterModel,
               max_exact: int = 20000) -> float:
    """Mean silhouette width in [-1, 1] under Euclidean distance.

    Points in singleton clusters score 0, as does the degenerate case where
    both cohesion and separation are 0. Above ``max_exact`` points a seeded
    uniform subsample bounds the quadratic cost.
    """
    if model.k < 2:
        raise ValidationError("silhouette needs at least 2 clusters")
    ids, x = _canonical_matrix(vectors)
    labels = np.array([model.assignments[cid] for cid in ids])

    if len(x) > max_exact:
        rng = np.random.default_rng(model.seed)
        keep = rng.choice(len(x), size=max_exact, replace=False)
        keep.sort()
        x = x[keep]
        labels = labels[keep]

    n = len(x)
    sizes = np.bincount(labels, minlength=model.k)
    sq = (x ** 2).sum(axis=1)
    scores = np.zeros(n)
    chunk = max(1, min(n, 2 ** 22 // max(1, n)))
    for a in range(0, n, chunk):
        b = min(a + chunk, n)
        d2 = sq[a:b, None] + sq[None, :] - 2.0 * (x[a:b] @ x.T)
        dist = np.sqrt(np.maximum(d2, 0.0))
        for row, i in enumerate(range(a, b)):
            li = labels[i]
            if sizes[li] <= 1:
                continue
            sums = np.bincount(labels, weights=dist[row], minlength=model.k)
            ai = sums[li] / (sizes[li] - 1)
            others = [sums[c] / sizes[c] for c in range(model.k) if c != li and sizes[c] > 0]
            if not others:
                continue
            bi = min(others)
            denom = max(ai, bi)
            scores[i] = (bi - ai) / denom if denom > 0 else 0.0
    return float(scores.mean())


def scan_k(vectors: list[StaticFeatureVector], k_values, seed: int = 0,
           max_iter: int = 100) -> list[dict]:
    """Cluster at every k and tabulate (k, wcss, silhouette) for human selection."""
    k_values = list(k_values)
    if not k_values:
        raise ValidationError("empty k range")
    rows = []
    for k in k_values:
        model = kmeans(vectors, k=k, seed=seed, max_iter=max_iter)
        sil = silhouette(vectors, model) if k >= 2 else math.nan
        rows.append({"k": k, "wcss": model.wcss, "silhouette": sil})
    return rows


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Pair-counting agreement between two labelings, corrected for chance."""
    labels_a = list(labels_a)
    labels_b = list(labels_b)
    if len(labels_a) != len(labels_b):
        raise ValidationError("labelings must have equal length")
    n = len(labels_a)
    if n == 0:
        return 1.0
    table: dict[tuple, int] = {}
    count_a: dict = {}
    count_b: dict = {}
    for a, b in zip(labels_a, labels_b):
        table[(a, b)] = table.get((a, b), 0) + 1
        count_a[a] = count_a.get(a, 0) + 1
        count_b[b] = count_b.get(b, 0) + 1
    sum_cells = sum(math.comb(c, 2) for c in table.values())
    sum_a = sum(math.comb(c, 2) for c in count_a.values())
    sum_b = sum(math.comb(c, 2) for c in count_b.values())
    pairs = math.comb(n, 2)
    expected = sum_a * sum_b / pairs if pairs else 0.0
    maximum = (sum_a + sum_b) / 2.0
    if maximum == expected:
        return 1.0
    return (sum_cells - expected) / (maximum - expected)


def write_features_csv(vectors: list[StaticFeatureVector], path, name=None) -> None:
    """Sparse long-format export: component_id,node,count."""
    import csv

    label = name or (lambda i: i)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["component_id", "node", "count"])
        for v in sorted(vectors, key=lambda v: v.component_id):
            for idx, val in zip(v.indices.tolist(), v.values.tolist()):
                out.writerow([v.component_id, label(idx), repr(float(val))])


def read_features_csv(path, length: int, index_of=None,
                      normalized: bool = True) -> list[StaticFeatureVector]:
    import csv
    from pathlib import Path

    path = Path(path)
    if not path.exists():
        raise ValidationError(f"features file not found: {path}")
    to_index = index_of or (lambda x: int(x))
    rows: dict[str, list[tuple[int, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["component_id", "node", "count"]:
            raise ValidationError(f"{path}: bad features header")
        for row in reader:
            if row:
                rows.setdefault(row[0], []).append((to_index(row[1]), float(row[2])))
    vectors = []
    for cid, entries in rows.items():
        entries.sort()
        idx = np.array([e[0] for e in entries], dtype=np.int64)
        val = np.array([e[1] for e in entries])
        vectors.append(StaticFeatureVector(
            component_id=cid, length=length, indices=idx, values=val,
            normalized=normalized,
        ))
    vectors.sort(key=lambda v: v.component_id)
    return vectors


def write_cluster_json(model: ClusterModel, path, centroid_path=None) -> None:
    payload = model.to_dict()
    if centroid_path is not None:
        payload["centroids"] = str(centroid_path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_centroids_csv(model: ClusterModel, path, name=None) -> None:
    """Sparse long-format centroid export: cluster,node,value."""
    import csv

    label = name or (lambda i: i)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["cluster", "node", "value"])
        for c in range(model.k):
            for idx in np.flatnonzero(model.centroids[c]):
                out.writerow([c, label(int(idx)), repr(float(model.centroids[c, idx]))])


def write_scan_csv(rows: list[dict], path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["k", "wcss", "silhouette"])
        for row in rows:
            out.writerow([row["k"], repr(float(row["wcss"])), repr(float(row["silhouette"]))])
