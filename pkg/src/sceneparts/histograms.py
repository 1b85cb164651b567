"""Quantized color/texture histograms and their intersection similarity.

A quad histogram describes a pixel set by four independently normalized
channels: the L, a, b color channels quantized into ``b_lab`` bins each, and
a texton-id channel with one bin per codebook entry. The four channels are
stored concatenated in a single vector, so histogram intersection over the
whole vector equals the sum of the four per-channel intersections.

Every pixel lands in exactly one bin per channel, which makes raw bin counts
exact integers; part-level histograms elsewhere in the package are merged by
adding counts and normalizing at evaluation time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "L_RANGE",
    "AB_RANGE",
    "BinLayout",
    "QuadHistogram",
    "quantize_features",
    "tally_bins",
    "quad_histogram",
    "merge_histograms",
    "hist_similarity",
]

# Value ranges used for quantization. L is the CIELAB lightness range; the
# a/b range is a fixed symmetric interval covering the sRGB gamut, with
# out-of-range values clipped into the end bins.
L_RANGE = (0.0, 100.0)
AB_RANGE = (-110.0, 110.0)


@dataclass(frozen=True)
class BinLayout:
    """Bin counts and channel offsets for quad histograms."""

    b_lab: int = 32
    n_textons: int = 64

    def __post_init__(self):
        if self.b_lab < 1 or self.n_textons < 1:
            raise ValueError("bin counts must be positive")

    @property
    def total(self) -> int:
        return 3 * self.b_lab + self.n_textons

    @property
    def offsets(self) -> tuple[int, int, int, int]:
        return (0, self.b_lab, 2 * self.b_lab, 3 * self.b_lab)

    def channel_slice(self, channel: int) -> slice:
        """Slice of the concatenated vector for channel 0..3 (L, a, b, texton)."""
        starts = (*self.offsets, self.total)
        return slice(starts[channel], starts[channel + 1])


def _quantize_channel(values: np.ndarray, lo: float, hi: float, bins: int) -> np.ndarray:
    idx = np.floor((values - lo) / (hi - lo) * bins).astype(np.int32)
    return np.clip(idx, 0, bins - 1)


def quantize_features(lab: np.ndarray, textons: np.ndarray, layout: BinLayout) -> np.ndarray:
    """Map per-pixel Lab values and texton ids to global histogram bins.

    Parameters
    ----------
    lab : float array (H, W, 3)
        CIELAB image.
    textons : int array (H, W)
        Per-pixel texton ids in [0, layout.n_textons).
    layout : BinLayout

    Returns
    -------
    int32 array (H, W, 4)
        For each pixel, its bin index in the concatenated histogram vector
        for the L, a, b, and texton channels (channel offsets applied).
    """
    lab = np.asarray(lab, dtype=np.float64)
    textons = np.asarray(textons)
    if lab.ndim != 3 or lab.shape[2] != 3 or textons.shape != lab.shape[:2]:
        raise ValueError("lab must be (H, W, 3) and textons (H, W)")
    if textons.min(initial=0) < 0 or textons.max(initial=0) >= layout.n_textons:
        raise ValueError("texton ids outside codebook range")
    o = layout.offsets
    out = np.empty(lab.shape[:2] + (4,), dtype=np.int32)
    out[..., 0] = o[0] + _quantize_channel(lab[..., 0], *L_RANGE, layout.b_lab)
    out[..., 1] = o[1] + _quantize_channel(lab[..., 1], *AB_RANGE, layout.b_lab)
    out[..., 2] = o[2] + _quantize_channel(lab[..., 2], *AB_RANGE, layout.b_lab)
    out[..., 3] = o[3] + textons.astype(np.int32)
    return out


def tally_bins(bins: np.ndarray, layout: BinLayout) -> np.ndarray:
    """Count global bin hits for a pixel selection.

    ``bins`` is any integer array whose entries are global bin indices (the
    rows of :func:`quantize_features` output for the selected pixels); the
    result is an int64 count vector of length ``layout.total``.
    """
    flat = np.asarray(bins).ravel()
    return np.bincount(flat, minlength=layout.total).astype(np.int64)


@dataclass(frozen=True)
class QuadHistogram:
    """Normalized quad histogram: four channels, each summing to 1."""

    values: np.ndarray  # float64 (layout.total,)
    layout: BinLayout

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.shape != (self.layout.total,):
            raise ValueError("histogram length does not match layout")

    @classmethod
    def from_counts(cls, counts: np.ndarray, layout: BinLayout) -> "QuadHistogram":
        """Normalize raw bin counts; every channel must have the same total."""
        counts = np.asarray(counts, dtype=np.float64)
        if counts.shape != (layout.total,):
            raise ValueError("count vector length does not match layout")
        n = counts[layout.channel_slice(0)].sum()
        if n <= 0:
            raise ValueError("cannot normalize an empty histogram")
        for ch in range(4):
            if counts[layout.channel_slice(ch)].sum() != n:
                raise ValueError("channel totals differ; counts are not per-pixel tallies")
        return cls(counts / n, layout)

    def channel(self, ch: int) -> np.ndarray:
        return self.values[self.layout.channel_slice(ch)]


def quad_histogram(bins: np.ndarray, layout: BinLayout) -> QuadHistogram:
    """Build a normalized quad histogram from selected pixels' global bins."""
    return QuadHistogram.from_counts(tally_bins(bins, layout), layout)


def merge_histograms(parts: list[tuple[QuadHistogram, int]]) -> QuadHistogram:
    """Merge histograms of disjoint pixel sets, weighted by pixel counts.

    Equivalent to rebuilding one histogram over the union of the pixel sets:
    with h_k = counts_k / n_k, the union histogram is sum(n_k h_k) / sum(n_k).
    """
    if not parts:
        raise ValueError("nothing to merge")
    layout = parts[0][0].layout
    total_n = 0
    acc = np.zeros(layout.total, dtype=np.float64)
    for hist, n in parts:
        if hist.layout != layout:
            raise ValueError("mixed bin layouts")
        if n <= 0:
            raise ValueError("pixel counts must be positive")
        acc += n * hist.values
        total_n += n
    return QuadHistogram(acc / total_n, layout)


def hist_similarity(h1: QuadHistogram, h2: QuadHistogram) -> float:
    """Histogram intersection of two quad histograms.

    Returns sum(min(h1, h2)) over the concatenated vector, which lies in
    [0, 4] because each of the four channels is normalized to sum 1; it is
    4 exactly when the histograms are identical. Larger means more similar.
    """
    if h1.layout != h2.layout:
        raise ValueError("mixed bin layouts")
    return float(np.minimum(h1.values, h2.values).sum())
