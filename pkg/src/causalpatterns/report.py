"""Figure rendering for the reporting outputs.

Every delimited report the CLI writes can be accompanied by a rendered
figure next to it. Rendering is headless (Agg) and avoids volatile PNG
metadata so repeated runs produce stable files.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .average import AverageComponent  # noqa: E402
from .components import ExtractionResult  # noqa: E402

_PNG_META = {"Software": "causalpatterns"}


def _save(fig, path) -> None:
    fig.savefig(path, dpi=110, metadata=_PNG_META)
    plt.close(fig)


def components_figure(result: ExtractionResult, path) -> None:
    """Scatter of component width vs spatial spread, sized by member count."""
    fig, ax = plt.subplots(figsize=(6, 4))
    widths = [c.width for c in result.components]
    spreads = [c.spatial_spread for c in result.components]
    sizes = [c.num_members for c in result.components]
    if widths:
        scale = 200.0 / max(sizes)
        ax.scatter(widths, spreads, s=[max(6, s * scale) for s in sizes],
                   alpha=0.5, edgecolors="none")
    ax.set_xlabel("width (layers)")
    ax.set_ylabel("spatial spread (nodes)")
    ax.set_title(f"{len(result.components)} components "
                 f"({result.num_singletons} singletons discarded)")
    fig.tight_layout()
    _save(fig, path)


def scan_k_figure(rows: list[dict], path) -> None:
    """Within-cluster sum of squares and silhouette across candidate k."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ks = [r["k"] for r in rows]
    ax.plot(ks, [r["wcss"] for r in rows], "o-", color="tab:blue", label="wcss")
    ax.set_xlabel("k")
    ax.set_ylabel("wcss", color="tab:blue")
    twin = ax.twinx()
    sil = [(k, r["silhouette"]) for k, r in zip(ks, rows)
           if not math.isnan(r["silhouette"])]
    if sil:
        twin.plot([k for k, _ in sil], [s for _, s in sil], "s--",
                  color="tab:orange", label="silhouette")
    twin.set_ylabel("silhouette", color="tab:orange")
    ax.set_xticks(ks)
    fig.tight_layout()
    _save(fig, path)


def aac_figure(aac: AverageComponent, path, label_map: dict | None = None) -> None:
    """Layer-by-layer view of an average component.

    Without labels: one dot per (node, layer), shaded by likelihood.
    With labels: per-layer label weights plus the label spread per layer.
    """
    if label_map is None:
        fig, ax = plt.subplots(figsize=(7, 4))
        items = sorted(aac.node_weights.items(), key=lambda kv: (kv[0][1], str(kv[0][0])))
        lanes: dict = {}
        xs, ys, ws = [], [], []
        for (node, layer), w in items:
            lane = lanes.setdefault(node, len(lanes))
            xs.append(layer)
            ys.append(lane)
            ws.append(w)
        if xs:
            sc = ax.scatter(xs, ys, c=ws, cmap="viridis", vmin=0.0, vmax=1.0, s=36)
            fig.colorbar(sc, ax=ax, label="activation likelihood")
        for (src, layer, dst), w in aac.edge_weights.items():
            ax.plot([layer, layer + 1], [lanes[src], lanes[dst]],
                    color="gray", alpha=min(1.0, 0.15 + 0.85 * w), lw=0.8, zorder=0)
        ax.set_xlabel("relative layer")
        ax.set_ylabel("node lane")
        ax.set_title(f"average component, cluster {aac.cluster_id} "
                     f"(support {aac.support}, tau {aac.sparsify_tau})")
    else:
        from .average import genre_view

        view = genre_view(aac, label_map)
        labels = sorted({lab for row in view for lab in row["labels"]})
        fig, (ax, ax2) = plt.subplots(2, 1, figsize=(7, 5), sharex=True,
                                      height_ratios=[3, 1])
        bottom = [0.0] * len(view)
        for lab in labels:
            heights = [row["labels"].get(lab, 0.0) for row in view]
            ax.bar([row["layer"] for row in view], heights, bottom=bottom, label=lab)
            bottom = [b + h for b, h in zip(bottom, heights)]
        ax.set_ylabel("summed likelihood")
        ax.legend(fontsize=7)
        ax2.plot([row["layer"] for row in view], [row["spread"] for row in view], "o-")
        ax2.set_xlabel("relative layer")
        ax2.set_ylabel("label spread")
    fig.tight_layout()
    _save(fig, path)


def bench_figure(rows: list[dict], path) -> None:
    """Log-log runtime against problem size with the fitted growth line."""
    fig, ax = plt.subplots(figsize=(6, 4))
    sizes = [r["size"] for r in rows]
    times = [r["build_seconds"] for r in rows]
    ax.loglog(sizes, times, "o-", base=2, label="measured")
    if len(sizes) >= 2:
        logs = [math.log2(s) for s in sizes]
        logt = [math.log2(t) for t in times]
        slope, intercept = _fit_line(logs, logt)
        fit = [2 ** (intercept + slope * x) for x in logs]
        ax.loglog(sizes, fit, "--", base=2, label=f"fit exponent {slope:.3f}")
    ax.set_xlabel("size")
    ax.set_ylabel("build wall-clock (s)")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def _fit_line(xs: list[float], ys: list[float]) -> tuple[float, float]:
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx if sxx else 0.0
    return slope, my - slope * mx
