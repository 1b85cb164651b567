"""Superpixel elements: the atoms every labeling is built from.

Segments a generated scene into irregular elements with the
graph-merge segmenter, then shows the partition bookkeeping the
sampler relies on: per-element pixel sets, centroids, adjacency,
and attached feature histograms.

Run: python3 demos/segmentation_elements.py        (a few seconds)
"""

import numpy as np

from sceneparts.filters import filter_responses, make_filter_bank
from sceneparts.histograms import BinLayout, quantize_features
from sceneparts.imaging import rgb_to_lab
from sceneparts.superpixels import attach_features, build_partition, narrowband, segment_image
from sceneparts.synth import generate_image
from sceneparts.textons import assign_textons, train_textons

rng = np.random.default_rng(11)
image, labels = generate_image(rng, size=64)

# coarseness is controlled by k_param (higher merges more) and the
# minimum element size in pixels
for k_param in (20.0, 60.0, 150.0):
    element_map = segment_image(image, k_param=k_param, min_size=15)
    print(f"k_param={k_param:5.0f}: {element_map.max() + 1} elements")

element_map = segment_image(image, k_param=40.0, min_size=15)
partition = build_partition(element_map)
print(f"\npartition: {partition.n_elements} elements over "
      f"{partition.shape[1]}x{partition.shape[0]} pixels")

sizes = partition.el_n
print(f"element sizes: min={sizes.min()} median={int(np.median(sizes))} "
      f"max={sizes.max()}")
degrees = [len(partition.adjacency[e]) for e in range(partition.n_elements)]
print(f"adjacency degree: min={min(degrees)} mean={np.mean(degrees):.1f} "
      f"max={max(degrees)}")

# how well elements respect gold boundaries: label each element by its
# majority gold class and score the result
majority = np.empty_like(labels)
for el in range(partition.n_elements):
    mask = element_map == el
    vals, counts = np.unique(labels[mask], return_counts=True)
    majority[mask] = vals[np.argmax(counts)]
agree = float((majority == labels).mean())
print(f"majority-label ceiling: {100 * agree:.1f}% of pixels")

# features attach per element: one integer count vector per element,
# normalized lazily into per-channel histograms
lab = rgb_to_lab(image)
responses = filter_responses(lab[..., 0], make_filter_bank())
codebook = train_textons(responses.reshape(61, -1).T, k=16, seed=0)
layout = BinLayout(b_lab=8, n_textons=16)
bins = quantize_features(lab, assign_textons(responses, codebook), layout)
partition = attach_features(partition, bins, layout)
print(f"attached: counts {partition.counts.shape}, "
      f"normalized {partition.norm_hist.shape}")

# the narrowband operator used for appearance context: pixels near a
# mask but outside it
mask = element_map == 0
band = narrowband(mask, radius=4)
print(f"element 0: {mask.sum()} px support, {band.sum()} px narrowband")
