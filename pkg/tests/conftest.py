"""Shared builders for small, fully controlled test instances.

Tests avoid the image-feature pipeline where they can: element features
are synthesized directly as valid global bin indices, and models are
hand-built with random but well-formed parameters. That keeps each test
focused on one contract and fast.
"""

import numpy as np
import pytest

from sceneparts.histograms import BinLayout
from sceneparts.model import (
    ClassModel,
    ClassModels,
    PairwiseModel,
    SceneGraph,
    Weights,
)
from sceneparts.superpixels import attach_features, build_partition, element_proximity
from sceneparts.textons import TextonCodebook

SMALL_LAYOUT = BinLayout(b_lab=4, n_textons=4)


def random_bins(rng: np.random.Generator, h: int, w: int, layout: BinLayout) -> np.ndarray:
    """Valid (H, W, 4) global bin indices drawn uniformly per channel."""
    sizes = (layout.b_lab, layout.b_lab, layout.b_lab, layout.n_textons)
    out = np.empty((h, w, 4), dtype=np.int32)
    for c in range(4):
        lo = layout.channel_slice(c).start
        out[..., c] = lo + rng.integers(0, sizes[c], size=(h, w))
    return out


def random_channel_hist(rng: np.random.Generator, layout: BinLayout) -> np.ndarray:
    """A per-channel normalized histogram vector (each channel sums to 1)."""
    h = np.empty(layout.total, dtype=np.float64)
    for c in range(4):
        sl = layout.channel_slice(c)
        v = rng.random(sl.stop - sl.start) + 0.05
        h[sl] = v / v.sum()
    return h


def grid_partition(rng, blocks_y: int, blocks_x: int, cell: int = 2,
                   layout: BinLayout = SMALL_LAYOUT):
    """A partition of (blocks_y*cell, blocks_x*cell) into rectangular
    elements, with random attached features."""
    h, w = blocks_y * cell, blocks_x * cell
    ys = np.arange(h)[:, None] // cell
    xs = np.arange(w)[None, :] // cell
    element_map = (ys * blocks_x + xs).astype(np.int32)
    partition = build_partition(element_map)
    bins = random_bins(rng, h, w, layout)
    return attach_features(partition, bins, layout)


def tiny_models(rng, n_classes: int, layout: BinLayout = SMALL_LAYOUT,
                band_radius: int = 2, names=None) -> ClassModels:
    """Hand-built models with random but valid parameters for every class
    and every ordered class pair."""
    if names is None:
        names = tuple(f"c{i}" for i in range(n_classes))
    classes = []
    for _ in range(n_classes):
        classes.append(
            ClassModel(
                name=names[len(classes)],
                fg_hist=random_channel_hist(rng, layout),
                band_hist=random_channel_hist(rng, layout),
                shape_map=rng.uniform(0.05, 0.95, size=(201, 201)),
                loc_mean=rng.uniform(0.25, 0.75, size=2),
                loc_cov=np.diag(rng.uniform(0.05, 0.2, size=2)),
            )
        )
    pairwise = {}
    for i in range(n_classes):
        for j in range(n_classes):
            if i == j:
                continue
            pairwise[(i, j)] = PairwiseModel(
                dist_mean=float(rng.uniform(0.2, 0.5)),
                dist_var=float(rng.uniform(0.01, 0.05)),
                angle_mean=float(rng.uniform(-np.pi, np.pi)),
                angle_kappa=float(rng.uniform(0.5, 4.0)),
                n_samples=3,
            )
    w = rng.random(5) + 0.2
    return ClassModels(
        layout=layout,
        band_radius=band_radius,
        class_names=tuple(names),
        class_models=tuple(classes),
        pairwise=pairwise,
        pooled_distance=(0.3, 0.04),
        codebook=TextonCodebook(centers=rng.normal(size=(layout.n_textons, 61)), seed=0),
        weights=Weights.from_array(w / w.sum()),
    )


def chain_graph(classes: tuple[int, ...]) -> SceneGraph:
    """Parts in a path: 0-1, 1-2, ..."""
    edges = tuple((i, i + 1) for i in range(len(classes) - 1))
    return SceneGraph(node_classes=tuple(classes), edges=edges)


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)


def make_configuration(partition, graph, assign, band_radius=2):
    from sceneparts.model import Configuration

    prox = element_proximity(partition, radius=band_radius)
    return Configuration(partition, graph, np.asarray(assign, dtype=np.int32), prox)
