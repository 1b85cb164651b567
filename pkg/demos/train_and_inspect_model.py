"""Learning every model parameter from labeled images.

Generates a small labeled dataset, learns the full parameter set
(class appearance/shape/location, pairwise distance/angle models,
potential weights), inspects the pieces, and shows that the binary
model container round-trips byte-identically.

Run: python3 demos/train_and_inspect_model.py        (~half a minute)
"""

import os
import tempfile

import numpy as np

from sceneparts.histograms import BinLayout
from sceneparts.imaging import load_image, load_label_map, load_palette
from sceneparts.learning import learn_models, texton_training_matrix
from sceneparts.modelio import load_models, save_models
from sceneparts.synth import generate_dataset
from sceneparts.textons import train_textons

workdir = tempfile.mkdtemp(prefix="sceneparts_demo_")
train_stems, test_stems = generate_dataset(workdir, n_images=8, seed=3, size=64)
palette = load_palette(os.path.join(workdir, "palette.txt"))
print(f"dataset: {len(train_stems)} train / {len(test_stems)} test images, "
      f"classes: {', '.join(palette.names)}")

pairs = []
for stem in train_stems:
    image = load_image(os.path.join(workdir, "images", stem + ".png"))
    gold = load_label_map(os.path.join(workdir, "labels", stem + ".png"), palette)
    pairs.append((image, gold))

responses = texton_training_matrix([im for im, _ in pairs])
codebook = train_textons(responses, k=16, seed=0, max_samples=20_000)
layout = BinLayout(b_lab=8, n_textons=16)
models = learn_models(pairs, palette.names, codebook, layout,
                      band_radius=4, min_part_size=20)

print(f"\nlearned {sum(m is not None for m in models.class_models)} "
      f"of {models.n_classes} classes, "
      f"{len(models.pairwise)} ordered class pairs\n")
w = models.weights
print("weights (convex combination over potential families):")
print(f"  appearance={w.appearance:.4f} shape={w.shape:.4f} "
      f"location={w.location:.4f} distance={w.distance:.4f} angle={w.angle:.4f}")
print(f"  sum = {w.appearance + w.shape + w.location + w.distance + w.angle:.12f}")

sky = models.require_class(0)
print(f"\nclass '{sky.name}':")
print(f"  fg histogram mass by channel: "
      f"{[round(float(sky.fg_hist[layout.channel_slice(c)].sum()), 3) for c in range(4)]}")
print(f"  shape map: {sky.shape_map.shape}, coverage mean {sky.shape_map.mean():.3f}")
print(f"  location mean (normalized x, y): {np.round(sky.loc_mean, 3)}")

# (sky, water) is adjacent in training; a pair never seen adjacent falls
# back to the pooled distance Gaussian with a uniform angle (kappa 0)
for a, b in ((0, 1), (0, 2)):
    mean, var, omega, kappa = models.pair_params(a, b)
    tag = "learned" if (a, b) in models.pairwise else "pooled fallback"
    print(f"pair ({palette.names[a]}, {palette.names[b]}): distance "
          f"mean={mean:.3f} var={var:.5f} angle omega={omega:.3f} "
          f"kappa={kappa:.2f}  [{tag}]")

path_a = os.path.join(workdir, "model_a.bin")
path_b = os.path.join(workdir, "model_b.bin")
save_models(models, path_a)
save_models(load_models(path_a), path_b)
with open(path_a, "rb") as fa, open(path_b, "rb") as fb:
    identical = fa.read() == fb.read()
print(f"\ncontainer: {os.path.getsize(path_a)} bytes, "
      f"save -> load -> save byte-identical: {identical}")
print(f"artifacts under {workdir}")
