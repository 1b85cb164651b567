"""Pixel-level evaluation: confusion matrices, accuracy metrics, overlays.

The confusion matrix counts pixels of true label i predicted j, with
void gold pixels skipped. Global accuracy is the diagonal fraction;
average accuracy is the mean per-class recall over classes present in
the gold (a strict variant divides by the full class count instead).
"""

from __future__ import annotations

import numpy as np

from .imaging import Palette, VOID, label_map_to_rgb
from .model import SceneGraph

__all__ = [
    "new_confusion",
    "accumulate",
    "per_class_recall",
    "global_accuracy",
    "average_accuracy",
    "grouped_accuracy",
    "format_table",
    "metrics_csv",
    "render_overlay",
    "EDGE_COLOR",
    "NODE_COLOR",
]

EDGE_COLOR = (0, 0, 0)
NODE_COLOR = (255, 255, 255)
NODE_HALF = 2  # node markers are (2*NODE_HALF+1) squares
DEFAULT_ALPHA = 0.5


def new_confusion(n_classes: int) -> np.ndarray:
    if n_classes < 1:
        raise ValueError("need at least one class")
    return np.zeros((n_classes, n_classes), dtype=np.int64)


def accumulate(gold: np.ndarray, pred: np.ndarray, cm: np.ndarray) -> np.ndarray:
    """Tally one image pair into the matrix; void gold pixels are skipped."""
    gold = np.asarray(gold)
    pred = np.asarray(pred)
    if gold.shape != pred.shape:
        raise ValueError("gold and prediction sizes differ")
    n = cm.shape[0]
    mask = gold != VOID
    g = gold[mask].astype(np.int64)
    p = pred[mask].astype(np.int64)
    if g.size:
        if g.min() < 0 or g.max() >= n:
            raise ValueError("gold label outside the class range")
        if p.min() < 0 or p.max() >= n:
            raise ValueError("prediction label outside the class range")
        np.add.at(cm, (g, p), 1)
    return cm


def per_class_recall(cm: np.ndarray) -> np.ndarray:
    """Percent recall per class; NaN for classes absent from the gold."""
    totals = cm.sum(axis=1)
    out = np.full(cm.shape[0], np.nan)
    present = totals > 0
    out[present] = 100.0 * cm.diagonal()[present] / totals[present]
    return out


def global_accuracy(cm: np.ndarray) -> float:
    total = int(cm.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    return 100.0 * float(cm.trace()) / total


def average_accuracy(cm: np.ndarray, strict: bool = False) -> float:
    """Mean per-class recall. Absent classes are excluded unless
    ``strict``, which divides the recall sum by the full class count."""
    recalls = per_class_recall(cm)
    present = ~np.isnan(recalls)
    if not present.any():
        raise ValueError("no class present in the confusion matrix")
    if strict:
        return float(np.nansum(recalls) / cm.shape[0])
    return float(recalls[present].mean())


def grouped_accuracy(cm: np.ndarray, groups: dict[int, str]) -> dict[str, float]:
    """Mean per-class recall within each named group of classes."""
    recalls = per_class_recall(cm)
    buckets: dict[str, list[float]] = {}
    for z in range(cm.shape[0]):
        if np.isnan(recalls[z]):
            continue
        if z not in groups:
            raise ValueError(f"class {z} has no group assignment")
        buckets.setdefault(groups[z], []).append(float(recalls[z]))
    return {name: float(np.mean(vals)) for name, vals in sorted(buckets.items())}


def format_table(cm: np.ndarray, class_names, groups: dict[int, str] | None = None) -> str:
    """Aligned plain-text summary of per-class and overall accuracies."""
    recalls = per_class_recall(cm)
    width = max([len(str(n)) for n in class_names] + [len("average")])
    lines = []
    for z, name in enumerate(class_names):
        val = "-" if np.isnan(recalls[z]) else f"{recalls[z]:6.2f}"
        lines.append(f"{str(name):<{width}}  {val}")
    lines.append(f"{'global':<{width}}  {global_accuracy(cm):6.2f}")
    lines.append(f"{'average':<{width}}  {average_accuracy(cm):6.2f}")
    if groups:
        for gname, val in grouped_accuracy(cm, groups).items():
            lines.append(f"{gname:<{width}}  {val:6.2f}")
    return "\n".join(lines) + "\n"


def metrics_csv(cm: np.ndarray, class_names) -> str:
    """CSV: one recall row per class, then global and average rows."""
    recalls = per_class_recall(cm)
    lines = ["class,recall_percent"]
    for z, name in enumerate(class_names):
        val = "" if np.isnan(recalls[z]) else repr(float(recalls[z]))
        lines.append(f"{name},{val}")
    lines.append(f"global,{global_accuracy(cm)!r}")
    lines.append(f"average,{average_accuracy(cm)!r}")
    return "\n".join(lines) + "\n"


def _draw_segment(canvas: np.ndarray, p0, p1, color) -> None:
    h, w = canvas.shape[:2]
    x0, y0 = float(p0[0]), float(p0[1])
    x1, y1 = float(p1[0]), float(p1[1])
    steps = int(max(abs(x1 - x0), abs(y1 - y0))) + 1
    xs = np.rint(np.linspace(x0, x1, steps + 1)).astype(np.int64)
    ys = np.rint(np.linspace(y0, y1, steps + 1)).astype(np.int64)
    ok = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    canvas[ys[ok], xs[ok]] = color


def render_overlay(
    image: np.ndarray,
    pred: np.ndarray,
    graph: SceneGraph | None,
    centroids: np.ndarray | None,
    palette: Palette,
    alpha: float = DEFAULT_ALPHA,
) -> np.ndarray:
    """Blend class colors over the image and draw the graph on top.

    Edges are black segments between part centroids; nodes are small
    white squares drawn after the edges so the centroid pixel always
    shows the marker color. Pass graph=None for a pure label blend.
    """
    image = np.asarray(image)
    if image.shape[:2] != pred.shape:
        raise ValueError("image and prediction sizes differ")
    color = label_map_to_rgb(pred, palette).astype(np.float64)
    out = np.rint((1.0 - alpha) * image.astype(np.float64) + alpha * color)
    out = np.clip(out, 0, 255).astype(np.uint8)
    if graph is None:
        return out
    if centroids is None or len(centroids) != graph.n_parts:
        raise ValueError("need one centroid per graph node")
    for i, j in graph.edges:
        _draw_segment(out, centroids[i], centroids[j], EDGE_COLOR)
    h, w = out.shape[:2]
    for cx, cy in np.asarray(centroids, dtype=np.float64):
        x = int(np.rint(cx))
        y = int(np.rint(cy))
        y0, y1 = max(0, y - NODE_HALF), min(h, y + NODE_HALF + 1)
        x0, x1 = max(0, x - NODE_HALF), min(w, x + NODE_HALF + 1)
        out[y0:y1, x0:x1] = NODE_COLOR
    return out
