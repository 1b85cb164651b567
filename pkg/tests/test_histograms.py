"""Quantization edges, tallying, and the similarity measure."""

import numpy as np
import pytest

from sceneparts.histograms import (
    BinLayout,
    QuadHistogram,
    hist_similarity,
    merge_histograms,
    quad_histogram,
    quantize_features,
    tally_bins,
)
from tests.conftest import SMALL_LAYOUT, random_bins


def test_layout_offsets():
    layout = BinLayout(b_lab=32, n_textons=64)
    assert layout.total == 160
    assert layout.offsets == (0, 32, 64, 96)
    assert layout.channel_slice(3) == slice(96, 160)


def test_layout_rejects_nonpositive():
    with pytest.raises(ValueError):
        BinLayout(b_lab=0)


def test_quantize_range_edges():
    layout = BinLayout(b_lab=32, n_textons=4)
    lab = np.array(
        [[[0.0, -110.0, -110.0], [100.0, 110.0, 110.0], [50.0, 0.0, 0.0]]]
    )
    textons = np.array([[0, 3, 1]])
    bins = quantize_features(lab, textons, layout)
    o = layout.offsets
    assert bins[0, 0].tolist() == [0, o[1], o[2], o[3]]
    # upper endpoints clip into the last bin
    assert bins[0, 1].tolist() == [31, o[1] + 31, o[2] + 31, o[3] + 3]
    assert bins[0, 2].tolist() == [16, o[1] + 16, o[2] + 16, o[3] + 1]


def test_quantize_rejects_bad_textons():
    layout = BinLayout(b_lab=4, n_textons=4)
    lab = np.zeros((1, 1, 3))
    with pytest.raises(ValueError):
        quantize_features(lab, np.array([[4]]), layout)


def test_tally_counts_each_pixel_once_per_channel(rng):
    layout = SMALL_LAYOUT
    bins = random_bins(rng, 5, 7, layout)
    counts = tally_bins(bins.reshape(-1, 4), layout)
    assert counts.sum() == 4 * 35
    for c in range(4):
        assert counts[layout.channel_slice(c)].sum() == 35


def test_quad_histogram_normalization(rng):
    layout = SMALL_LAYOUT
    bins = random_bins(rng, 6, 6, layout)
    qh = quad_histogram(bins.reshape(-1, 4), layout)
    for c in range(4):
        assert np.isclose(qh.values[layout.channel_slice(c)].sum(), 1.0)
    assert np.isclose(qh.values.sum(), 4.0)


def test_from_counts_rejects_unbalanced_channels():
    layout = SMALL_LAYOUT
    counts = np.zeros(layout.total, dtype=np.int64)
    counts[0] = 3
    counts[layout.offsets[1]] = 2  # channel sums differ
    with pytest.raises(ValueError):
        QuadHistogram.from_counts(counts, layout)


def test_similarity_self_is_four(rng):
    layout = SMALL_LAYOUT
    bins = random_bins(rng, 4, 4, layout)
    qh = quad_histogram(bins.reshape(-1, 4), layout)
    assert np.isclose(hist_similarity(qh, qh), 4.0, atol=1e-12)


def test_similarity_disjoint_is_zero():
    layout = SMALL_LAYOUT
    a = np.zeros(layout.total, dtype=np.int64)
    b = np.zeros(layout.total, dtype=np.int64)
    for c in range(4):
        sl = layout.channel_slice(c)
        a[sl.start] = 5
        b[sl.start + 1] = 5
    ha = QuadHistogram.from_counts(a, layout)
    hb = QuadHistogram.from_counts(b, layout)
    assert hist_similarity(ha, hb) == 0.0


def test_similarity_symmetric_and_bounded(rng):
    layout = SMALL_LAYOUT
    for _ in range(20):
        b1 = random_bins(rng, 3, 5, layout)
        b2 = random_bins(rng, 4, 2, layout)
        h1 = quad_histogram(b1.reshape(-1, 4), layout)
        h2 = quad_histogram(b2.reshape(-1, 4), layout)
        s12 = hist_similarity(h1, h2)
        assert np.isclose(s12, hist_similarity(h2, h1), atol=1e-15)
        assert 0.0 <= s12 <= 4.0 + 1e-12


def test_similarity_hand_value():
    layout = BinLayout(b_lab=2, n_textons=2)
    a = np.array([3, 1, 2, 2, 4, 0, 1, 3], dtype=np.int64)
    b = np.array([1, 3, 4, 0, 2, 2, 2, 2], dtype=np.int64)
    ha = QuadHistogram.from_counts(a, layout)
    hb = QuadHistogram.from_counts(b, layout)
    # per channel: min-sum of ([.75,.25],[.25,.75]) = .5; ([.5,.5],[1,0]) = .5
    #              ([1,0],[.5,.5]) = .5;               ([.25,.75],[.5,.5]) = .75
    assert np.isclose(hist_similarity(ha, hb), 0.5 + 0.5 + 0.5 + 0.75, atol=1e-12)


def test_merge_equals_pooled_counts(rng):
    layout = SMALL_LAYOUT
    b1 = random_bins(rng, 3, 4, layout).reshape(-1, 4)
    b2 = random_bins(rng, 2, 5, layout).reshape(-1, 4)
    h1 = quad_histogram(b1, layout)
    h2 = quad_histogram(b2, layout)
    merged = merge_histograms([(h1, b1.shape[0]), (h2, b2.shape[0])])
    pooled = quad_histogram(np.vstack([b1, b2]), layout)
    assert np.allclose(merged.values, pooled.values, atol=1e-12)
