"""Parameter learning from labeled training images.

Training needs no sampler: each label map is decomposed into parts
(connected components of same-labeled pixels), and every model piece is
a closed-form estimate over those gold parts. Unary parameters of a
class depend only on that class's parts, so classes can be learned
independently; pairwise models are per ordered class pair with a pooled
fallback for pairs never seen adjacent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .filters import FilterBank, filter_responses, make_filter_bank
from .histograms import BinLayout, QuadHistogram, quantize_features, tally_bins
from .imaging import VOID, rgb_to_lab
from .model import (
    ClassModel,
    ClassModels,
    PairwiseModel,
    Part,
    SHAPE_CELLS,
    SceneGraph,
    Weights,
    angle_potential,
    appearance_potential,
    distance_potential,
    location_potential,
    shape_potential,
)
from .superpixels import narrowband
from .textons import TextonCodebook, assign_textons

__all__ = [
    "KAPPA_MAX",
    "DEFAULT_MIN_PART_SIZE",
    "DEFAULT_BAND_RADIUS",
    "TrainingPart",
    "TrainingImage",
    "graph_from_labeling",
    "quantized_features",
    "texton_training_matrix",
    "prepare_training_image",
    "learn_appearance",
    "learn_shape",
    "learn_location",
    "learn_pairwise",
    "normalize_weights",
    "learn_models",
    "learn_models_prepared",
]

KAPPA_MAX = 500.0
DEFAULT_MIN_PART_SIZE = 50
DEFAULT_BAND_RADIUS = 10
_SHAPE_HALF = (SHAPE_CELLS - 1) // 2

# Fallback distance model when training produced no adjacency samples at
# all: centered mid-diagonal with a variance wide enough to be inert.
_EMPTY_POOLED = (0.5, 1.0)

_BANK: FilterBank | None = None


def _bank() -> FilterBank:
    global _BANK
    if _BANK is None:
        _BANK = make_filter_bank()
    return _BANK


def quantized_features(image: np.ndarray, codebook: TextonCodebook, layout: BinLayout) -> np.ndarray:
    """Per-pixel global bin indices (H, W, 4) for an RGB image."""
    lab = rgb_to_lab(image)
    responses = filter_responses(lab[:, :, 0], _bank())
    textons = assign_textons(responses, codebook)
    return quantize_features(lab, textons, layout)


def texton_training_matrix(images: list[np.ndarray]) -> np.ndarray:
    """Stack filter responses of many images into one (N, n_filters) matrix."""
    blocks = []
    for image in images:
        lab = rgb_to_lab(image)
        resp = filter_responses(lab[:, :, 0], _bank())
        blocks.append(resp.reshape(resp.shape[0], -1).T)
    return np.concatenate(blocks, axis=0)


# ---------------------------------------------------------------------------
# graph extraction


def _adjacent_part_pairs(part_map: np.ndarray) -> np.ndarray:
    """Unique (a, b) with a < b of parts sharing a 4-adjacent pixel pair."""
    pairs = []
    for a, b in (
        (part_map[:, :-1], part_map[:, 1:]),
        (part_map[:-1, :], part_map[1:, :]),
    ):
        mask = (a != b) & (a >= 0) & (b >= 0)
        if mask.any():
            lo = np.minimum(a[mask], b[mask])
            hi = np.maximum(a[mask], b[mask])
            pairs.append(np.stack([lo, hi], axis=1))
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(np.concatenate(pairs, axis=0), axis=0)


def graph_from_labeling(
    labels: np.ndarray, min_part_size: int = DEFAULT_MIN_PART_SIZE
) -> tuple[SceneGraph, list[np.ndarray]]:
    """Decompose a label map into parts and their adjacency graph.

    One part per 8-connected component of same-labeled non-void pixels;
    parts are 4-adjacent neighbors if any of their pixels are. Components
    smaller than ``min_part_size`` are absorbed into their largest
    neighbor (smallest component first; ties toward lower part id); a
    small component with no neighbor is kept. Nodes are ordered by their
    first pixel in scan order.

    Returns the graph and one sorted flat-pixel-index array per node.
    """
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError("label map must be 2-D")
    non_void = labels != VOID
    if not non_void.any():
        raise ValueError("label map is entirely void")
    h, w = labels.shape

    provisional: list[tuple[int, int, np.ndarray]] = []
    s8 = np.ones((3, 3), dtype=bool)
    for c in np.unique(labels[non_void]):
        comp, n_comp = ndimage.label(labels == c, structure=s8)
        flat_comp = comp.ravel()
        order = np.argsort(flat_comp, kind="stable")
        sorted_ids = flat_comp[order]
        starts = np.searchsorted(sorted_ids, np.arange(1, n_comp + 1))
        ends = np.searchsorted(sorted_ids, np.arange(1, n_comp + 1), side="right")
        for ci in range(n_comp):
            flat = np.sort(order[starts[ci] : ends[ci]])
            provisional.append((int(flat[0]), int(c), flat))
    provisional.sort(key=lambda t: t[0])

    part_map = np.full((h, w), -1, dtype=np.int64)
    classes = []
    for pid, (_, c, flat) in enumerate(provisional):
        part_map.ravel()[flat] = pid
        classes.append(c)
    n_prov = len(provisional)
    first_pixel = [t[0] for t in provisional]
    alive = [True] * n_prov

    while True:
        flat_ids = part_map.ravel()
        sizes = np.bincount(flat_ids[flat_ids >= 0], minlength=n_prov)
        pairs = _adjacent_part_pairs(part_map)
        nbrs: dict[int, set[int]] = {p: set() for p in range(n_prov) if alive[p]}
        for a, b in pairs:
            nbrs[int(a)].add(int(b))
            nbrs[int(b)].add(int(a))
        small = [
            p
            for p in range(n_prov)
            if alive[p] and sizes[p] < min_part_size and nbrs[p]
        ]
        if not small:
            break
        p = min(small, key=lambda q: (sizes[q], first_pixel[q]))
        target = max(nbrs[p], key=lambda q: (sizes[q], -q))
        part_map[part_map == p] = target
        alive[p] = False

    survivors = [p for p in range(n_prov) if alive[p]]
    remap = {old: new for new, old in enumerate(survivors)}
    node_classes = tuple(classes[old] for old in survivors)
    pixel_sets = [np.flatnonzero(part_map.ravel() == old) for old in survivors]
    compact = np.full((h, w), -1, dtype=np.int64)
    for old, new in remap.items():
        compact[part_map == old] = new
    edges = tuple((int(a), int(b)) for a, b in _adjacent_part_pairs(compact))
    return SceneGraph(node_classes, edges), pixel_sets


# ---------------------------------------------------------------------------
# per-image preparation


@dataclass
class TrainingPart:
    """Gold part of one training image with everything learning needs."""

    z: int
    pixels: np.ndarray  # sorted flat indices
    n_pixels: int
    counts: np.ndarray  # (bins,) int64
    band_counts: np.ndarray  # (bins,) int64, void pixels excluded
    band_n: int
    centroid: np.ndarray  # (2,) pixel coords (x, y)
    support: np.ndarray  # (H, W) uint8
    coverage: np.ndarray  # (201, 201) float64 in {0, 1}

    def view(self) -> Part:
        n = self.n_pixels
        band = (self.band_counts / self.band_n) if self.band_n > 0 else None
        return Part(self.z, n, self.counts / n, band, self.centroid, self.support)


@dataclass
class TrainingImage:
    shape: tuple[int, int]
    graph: SceneGraph
    parts: list[TrainingPart]


def _coverage_map(xs: np.ndarray, ys: np.ndarray, centroid: np.ndarray, shape) -> np.ndarray:
    h, w = shape
    u = np.clip(
        np.rint((xs - centroid[0]) / w * _SHAPE_HALF).astype(np.int64) + _SHAPE_HALF,
        0,
        SHAPE_CELLS - 1,
    )
    v = np.clip(
        np.rint((ys - centroid[1]) / h * _SHAPE_HALF).astype(np.int64) + _SHAPE_HALF,
        0,
        SHAPE_CELLS - 1,
    )
    cov = np.zeros((SHAPE_CELLS, SHAPE_CELLS), dtype=np.float64)
    cov[v, u] = 1.0
    return cov


def prepare_training_image(
    image: np.ndarray,
    labels: np.ndarray,
    codebook: TextonCodebook,
    layout: BinLayout,
    band_radius: int = DEFAULT_BAND_RADIUS,
    min_part_size: int = DEFAULT_MIN_PART_SIZE,
) -> TrainingImage:
    """Extract gold parts and tally their statistics for one image."""
    labels = np.asarray(labels)
    if image.shape[:2] != labels.shape:
        raise ValueError("image and label map sizes differ")
    h, w = labels.shape
    bins = quantized_features(image, codebook, layout)
    flat_bins = bins.reshape(-1, 4)
    graph, pixel_sets = graph_from_labeling(labels, min_part_size)
    not_void = labels != VOID

    parts = []
    for i, pix in enumerate(pixel_sets):
        support = np.zeros((h, w), dtype=np.uint8)
        support.ravel()[pix] = 1
        band_mask = narrowband(support.astype(bool), band_radius) & not_void
        band_flat = np.flatnonzero(band_mask.ravel())
        xs = (pix % w).astype(np.float64)
        ys = (pix // w).astype(np.float64)
        centroid = np.array([xs.mean(), ys.mean()])
        parts.append(
            TrainingPart(
                z=graph.node_classes[i],
                pixels=pix,
                n_pixels=int(pix.size),
                counts=tally_bins(flat_bins[pix], layout),
                band_counts=tally_bins(flat_bins[band_flat], layout),
                band_n=int(band_flat.size),
                centroid=centroid,
                support=support,
                coverage=_coverage_map(xs, ys, centroid, (h, w)),
            )
        )
    return TrainingImage(shape=(h, w), graph=graph, parts=parts)


def _class_parts(prepared: list[TrainingImage], z: int) -> list[TrainingPart]:
    out = [p for img in prepared for p in img.parts if p.z == z]
    if not out:
        raise ValueError(f"class {z} is absent from the training set")
    return out


# ---------------------------------------------------------------------------
# per-class estimators


def learn_appearance(
    prepared: list[TrainingImage], z: int, layout: BinLayout
) -> tuple[np.ndarray, np.ndarray]:
    """Pooled foreground and narrowband histograms of one class."""
    parts = _class_parts(prepared, z)
    fg = np.zeros(layout.total, dtype=np.int64)
    band = np.zeros(layout.total, dtype=np.int64)
    for p in parts:
        fg += p.counts
        band += p.band_counts
    h_fg = QuadHistogram.from_counts(fg, layout).values
    if band.sum() == 0:
        # No usable narrowband pixels anywhere (all void): fall back to a
        # per-channel uniform histogram rather than an undefined one.
        h_band = np.concatenate(
            [np.full(s.stop - s.start, 1.0 / (s.stop - s.start))
             for s in (layout.channel_slice(c) for c in range(4))]
        )
    else:
        h_band = QuadHistogram.from_counts(band, layout).values
    return h_fg, h_band


def learn_shape(prepared: list[TrainingImage], z: int) -> np.ndarray:
    """Per-cell fraction of class-z training parts covering the cell."""
    parts = _class_parts(prepared, z)
    acc = np.zeros((SHAPE_CELLS, SHAPE_CELLS), dtype=np.float64)
    for p in parts:
        acc += p.coverage
    return acc / len(parts)


def learn_location(prepared: list[TrainingImage], z: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and regularized covariance of normalized class centroids."""
    pts = []
    for img in prepared:
        h, w = img.shape
        for p in img.parts:
            if p.z == z:
                pts.append([p.centroid[0] / w, p.centroid[1] / h])
    if not pts:
        raise ValueError(f"class {z} is absent from the training set")
    pts_arr = np.asarray(pts, dtype=np.float64)
    mean = pts_arr.mean(axis=0)
    if len(pts) == 1:
        cov = 1e-2 * np.eye(2)
    else:
        d = pts_arr - mean
        cov = (d.T @ d) / (len(pts) - 1) + 1e-4 * np.eye(2)
    return mean, cov


# ---------------------------------------------------------------------------
# pairwise estimators


def _pair_samples(prepared: list[TrainingImage]):
    """Ordered-pair distance/angle samples plus the pooled distance list."""
    dist: dict[tuple[int, int], list[float]] = {}
    ang: dict[tuple[int, int], list[float]] = {}
    pooled: list[float] = []
    for img in prepared:
        h, w = img.shape
        diag = math.hypot(w, h)
        for i, j in img.graph.edges:
            pi, pj = img.parts[i], img.parts[j]
            dx = float(pi.centroid[0] - pj.centroid[0])
            dy = float(pi.centroid[1] - pj.centroid[1])
            v = math.hypot(dx, dy) / diag
            pooled.append(v)
            for (za, zb), r in (
                ((pi.z, pj.z), math.atan2(dy, dx)),
                ((pj.z, pi.z), math.atan2(-dy, -dx)),
            ):
                dist.setdefault((za, zb), []).append(v)
                ang.setdefault((za, zb), []).append(r)
    return dist, ang, pooled


def _fit_distance(vs: list[float]) -> tuple[float, float]:
    mean = float(np.mean(vs))
    if len(vs) == 1:
        return mean, 1e-2
    return mean, max(float(np.var(vs, ddof=1)), 1e-6)


def _fit_angle(rs: list[float]) -> tuple[float, float]:
    c = float(np.sum(np.cos(rs)))
    s = float(np.sum(np.sin(rs)))
    omega = math.atan2(s, c)
    r_bar = math.hypot(c, s) / len(rs)
    if r_bar >= 1.0 - 1e-12:
        return omega, KAPPA_MAX
    kappa = r_bar * (2.0 - r_bar**2) / (1.0 - r_bar**2)
    return omega, min(kappa, KAPPA_MAX)


def learn_pairwise(
    prepared: list[TrainingImage], pair: tuple[int, int]
) -> PairwiseModel:
    """Distance Gaussian and von Mises angle model of one ordered pair."""
    dist, ang, _ = _pair_samples(prepared)
    if pair not in dist:
        raise ValueError(f"class pair {pair} never adjacent in training")
    nu, var = _fit_distance(dist[pair])
    omega, kappa = _fit_angle(ang[pair])
    return PairwiseModel(nu, var, omega, kappa, len(dist[pair]))


# ---------------------------------------------------------------------------
# weight normalization and orchestration


def normalize_weights(prepared: list[TrainingImage], models: ClassModels) -> Weights:
    """Inverse-mean-magnitude weights over gold training configurations.

    Each raw potential is evaluated on every gold part (or edge); alpha_k
    is proportional to 1 / mean|potential_k| (mean floored at 1e-6) and
    the five are rescaled to sum to 1.
    """
    mags: list[list[float]] = [[], [], [], [], []]
    for img in prepared:
        views = [p.view() for p in img.parts]
        for part in views:
            mags[0].append(abs(appearance_potential(part, models)))
            mags[1].append(abs(shape_potential(part, models)))
            mags[2].append(abs(location_potential(part.centroid, part.z, models, img.shape)))
        zs = img.graph.node_classes
        for i, j in img.graph.edges:
            mi, mj = views[i].centroid, views[j].centroid
            pair = (zs[i], zs[j])
            mags[3].append(abs(distance_potential(mi, mj, pair, models, img.shape)))
            mags[4].append(abs(angle_potential(mi, mj, pair, models)))
    means = np.array([np.mean(m) if m else 0.0 for m in mags])
    inv = 1.0 / np.maximum(means, 1e-6)
    return Weights.from_array(inv / inv.sum())


def learn_models_prepared(
    prepared: list[TrainingImage],
    class_names: tuple[str, ...],
    codebook: TextonCodebook,
    layout: BinLayout,
    band_radius: int = DEFAULT_BAND_RADIUS,
) -> ClassModels:
    """Fit every model piece from already-prepared training images."""
    n = len(class_names)
    seen = sorted({p.z for img in prepared for p in img.parts})
    if seen and (seen[0] < 0 or seen[-1] >= n):
        raise ValueError("training labels use class indices outside the palette")
    class_models: list[ClassModel | None] = [None] * n
    for z in seen:
        h_fg, h_band = learn_appearance(prepared, z, layout)
        shape_map = learn_shape(prepared, z)
        loc_mean, loc_cov = learn_location(prepared, z)
        class_models[z] = ClassModel(
            name=class_names[z], fg_hist=h_fg, band_hist=h_band,
            shape_map=shape_map, loc_mean=loc_mean, loc_cov=loc_cov,
        )

    dist, ang, pooled = _pair_samples(prepared)
    pairwise = {}
    for pair in sorted(dist):
        nu, var = _fit_distance(dist[pair])
        omega, kappa = _fit_angle(ang[pair])
        pairwise[pair] = PairwiseModel(nu, var, omega, kappa, len(dist[pair]))
    pooled_model = _fit_distance(pooled) if pooled else _EMPTY_POOLED

    models = ClassModels(
        layout=layout,
        band_radius=band_radius,
        class_names=tuple(class_names),
        class_models=tuple(class_models),
        pairwise=pairwise,
        pooled_distance=pooled_model,
        codebook=codebook,
        weights=Weights.uniform(),
    )
    return replace(models, weights=normalize_weights(prepared, models))


def learn_models(
    pairs: list[tuple[np.ndarray, np.ndarray]],
    class_names: tuple[str, ...],
    codebook: TextonCodebook,
    layout: BinLayout | None = None,
    band_radius: int = DEFAULT_BAND_RADIUS,
    min_part_size: int = DEFAULT_MIN_PART_SIZE,
) -> ClassModels:
    """Fit models from (image, label map) training pairs."""
    layout = layout or BinLayout()
    prepared = [
        prepare_training_image(im, lb, codebook, layout, band_radius, min_part_size)
        for im, lb in pairs
    ]
    return learn_models_prepared(prepared, class_names, codebook, layout, band_radius)
