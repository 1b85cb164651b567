"""Element segmentation, partitions, narrowbands, and proximity."""

import numpy as np
from scipy import ndimage

from sceneparts.histograms import quad_histogram
from sceneparts.superpixels import (
    attach_features,
    build_partition,
    element_proximity,
    narrowband,
    segment_image,
)
from tests.conftest import SMALL_LAYOUT, grid_partition, random_bins


def test_constant_image_single_element():
    img = np.full((12, 10, 3), 77, dtype=np.uint8)
    seg = segment_image(img, k_param=100.0, min_size=10)
    assert (seg == 0).all()


def test_two_regions_split():
    img = np.zeros((10, 16, 3), dtype=np.uint8)
    img[:, 8:] = 200
    seg = segment_image(img, k_param=50.0, min_size=5)
    assert sorted(np.unique(seg)) == [0, 1]
    assert (seg[:, :8] == seg[0, 0]).all()
    assert (seg[:, 8:] == seg[0, 8]).all()


def test_labels_canonical_row_major(rng):
    img = rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8)
    seg = segment_image(img, k_param=20.0, min_size=8)
    first = {}
    for i, v in enumerate(seg.ravel()):
        first.setdefault(int(v), i)
    order = [v for v, _ in sorted(first.items(), key=lambda kv: kv[1])]
    assert order == sorted(order)


def test_elements_are_4_connected(rng):
    img = rng.integers(0, 256, size=(30, 22, 3), dtype=np.uint8)
    seg = segment_image(img, k_param=30.0, min_size=10)
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    for e in np.unique(seg):
        _, n = ndimage.label(seg == e, structure=structure)
        assert n == 1


def test_min_size_respected(rng):
    img = rng.integers(0, 256, size=(30, 30, 3), dtype=np.uint8)
    seg = segment_image(img, k_param=25.0, min_size=12)
    sizes = np.bincount(seg.ravel())
    assert sizes.min() >= 12


def test_build_partition_centroids_and_sizes(rng):
    partition = grid_partition(rng, 2, 3, cell=2)
    assert partition.n_elements == 6
    # element 0 covers pixels (0,0),(0,1),(1,0),(1,1): centroid (0.5, 0.5)
    assert np.allclose(partition.centroids[0], [0.5, 0.5])
    assert (partition.el_n == 4).all()


def test_partition_adjacency_matches_brute(rng):
    img = rng.integers(0, 256, size=(18, 14, 3), dtype=np.uint8)
    seg = segment_image(img, k_param=15.0, min_size=6)
    partition = build_partition(seg)
    brute = {e: set() for e in range(partition.n_elements)}
    h, w = seg.shape
    for y in range(h):
        for x in range(w):
            for dy, dx in ((0, 1), (1, 0)):
                if y + dy < h and x + dx < w and seg[y, x] != seg[y + dy, x + dx]:
                    brute[int(seg[y, x])].add(int(seg[y + dy, x + dx]))
                    brute[int(seg[y + dy, x + dx])].add(int(seg[y, x]))
    for e in range(partition.n_elements):
        assert sorted(partition.adjacency[e].tolist()) == sorted(brute[e])


def test_attach_features_counts(rng):
    layout = SMALL_LAYOUT
    partition = grid_partition(rng, 3, 2, cell=3, layout=layout)
    assert partition.counts is not None
    for e in range(partition.n_elements):
        n = int(partition.el_n[e])
        for c in range(4):
            assert partition.counts[e, layout.channel_slice(c)].sum() == n
        assert np.isclose(partition.norm_hist[e].sum(), 4.0)


def test_attach_features_matches_quad_histogram(rng):
    layout = SMALL_LAYOUT
    h, w = 6, 6
    bins = random_bins(rng, h, w, layout)
    em = np.zeros((h, w), dtype=np.int32)
    em[:, 3:] = 1
    partition = attach_features(build_partition(em), bins, layout)
    left = quad_histogram(bins[:, :3].reshape(-1, 4), layout)
    assert np.allclose(partition.norm_hist[0], left.values, atol=1e-12)


def _narrowband_brute(mask: np.ndarray, radius: int) -> np.ndarray:
    """Chebyshev-distance dilation minus the mask, by double loop."""
    h, w = mask.shape
    out = np.zeros_like(mask, dtype=bool)
    ys, xs = np.nonzero(mask)
    for y in range(h):
        for x in range(w):
            if mask[y, x]:
                continue
            if ys.size and (np.maximum(np.abs(ys - y), np.abs(xs - x)) <= radius).any():
                out[y, x] = True
    return out


def test_narrowband_matches_brute(rng):
    for _ in range(5):
        mask = rng.random((14, 11)) < 0.2
        for radius in (1, 2, 4):
            assert np.array_equal(narrowband(mask, radius), _narrowband_brute(mask, radius))


def test_narrowband_empty_mask():
    mask = np.zeros((6, 6), dtype=bool)
    assert not narrowband(mask, 3).any()


def test_element_proximity_symmetric_excludes_self(rng):
    partition = grid_partition(rng, 3, 3, cell=2)
    prox = element_proximity(partition, radius=2)
    for e, near in enumerate(prox):
        assert e not in near.tolist()
        for o in near.tolist():
            assert e in prox[o].tolist()


def test_element_proximity_matches_brute(rng):
    partition = grid_partition(rng, 3, 4, cell=2)
    em = partition.element_map
    radius = 2
    prox = element_proximity(partition, radius=radius)
    for e in range(partition.n_elements):
        band = _narrowband_brute(em == e, radius)
        expected = sorted(set(em[band].tolist()))
        assert sorted(prox[e].tolist()) == expected
