"""Builder scaling benchmark.

Doubles either the spatial edge count (fixed step count) or the step count
(fixed edge count) and fits the growth exponent of the build wall-clock on
a log-log scale; the construction is expected to stay essentially linear.
Also reports the speedup across worker counts on the largest instance.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .activation import ActivationMask, pack_bits
from .builder import build_activity_graph
from .errors import ValidationError
from .synth import random_edge_graph


@dataclass(frozen=True)
class BenchResult:
    mode: str
    rows: list[dict]
    exponent: float
    worker_counts: list[int]
    worker_seconds: list[float]

    def speedup(self) -> float | None:
        if len(self.worker_seconds) < 2 or self.worker_seconds[-1] == 0:
            return None
        return self.worker_seconds[0] / self.worker_seconds[-1]


def random_mask(num_nodes: int, num_steps: int, density: float, seed: int) -> ActivationMask:
    rng = np.random.default_rng(seed)
    dense = rng.random((num_nodes, num_steps)) < density
    return ActivationMask(words=pack_bits(dense), num_steps=num_steps)


def fitted_exponent(sizes: list[int], seconds: list[float]) -> float:
    xs = [math.log2(s) for s in sizes]
    ys = [math.log2(max(t, 1e-9)) for t in seconds]
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sxx if sxx else 0.0


def _timed_build(graph, mask, workers=1, repeats=1) -> float:
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        build_activity_graph(graph, mask, workers=workers)
        best = min(best, time.perf_counter() - start)
    return best


def run_bench(mode: str = "edges", base_edges: int = 100_000, base_steps: int = 256,
              doublings: int = 4, density: float = 0.1, seed: int = 0,
              worker_counts: list[int] | None = None) -> BenchResult:
    """Measure build time across doubled sizes and fit the growth exponent.

    ``mode`` 'edges' doubles the edge count at fixed steps; 'steps' doubles
    the step count at a fixed edge count.
    """
    if mode not in ("edges", "steps"):
        raise ValidationError(f"unknown bench mode {mode!r}")
    worker_counts = worker_counts or []

    rows = []
    for level in range(doublings + 1):
        if mode == "edges":
            num_edges = base_edges << level
            num_steps = base_steps
        else:
            num_edges = base_edges
            num_steps = base_steps << level
        num_nodes = max(16, num_edges // 5)
        graph = random_edge_graph(num_edges, num_nodes, seed=seed + level, directed=True)
        mask = random_mask(num_nodes, num_steps, density, seed=seed + 1000 + level)
        elapsed = _timed_build(graph, mask, workers=1)
        size = num_edges if mode == "edges" else num_steps
        rows.append({
            "size": size,
            "num_edges": num_edges,
            "num_steps": num_steps,
            "build_seconds": elapsed,
        })

    exponent = fitted_exponent([r["size"] for r in rows],
                               [r["build_seconds"] for r in rows])

    worker_seconds = []
    if worker_counts:
        top = rows[-1]
        graph = random_edge_graph(top["num_edges"], max(16, top["num_edges"] // 5),
                                  seed=seed + doublings, directed=True)
        mask = random_mask(graph.num_nodes, top["num_steps"], density,
                           seed=seed + 1000 + doublings)
        for count in worker_counts:
            worker_seconds.append(_timed_build(graph, mask, workers=count))

    return BenchResult(
        mode=mode,
        rows=rows,
        exponent=exponent,
        worker_counts=list(worker_counts),
        worker_seconds=worker_seconds,
    )


def write_bench_csv(result: BenchResult, path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["mode", "size", "num_edges", "num_steps", "build_seconds"])
        for row in result.rows:
            out.writerow([result.mode, row["size"], row["num_edges"],
                          row["num_steps"], f"{row['build_seconds']:.6f}"])
        if result.worker_counts:
            out.writerow([])
            out.writerow(["workers", "seconds"])
            for count, sec in zip(result.worker_counts, result.worker_seconds):
                out.writerow([count, f"{sec:.6f}"])
