"""Anatomy of the configuration energy.

Trains a small model, builds the gold part configuration of a held-out
scene, and breaks its energy into the five potential families. Then
perturbs the configuration to show the energy ordering the sampler
exploits: gold scores lower than shuffled or single-move variants.

Run: python3 demos/energy_and_potentials.py        (~half a minute)
"""

import os
import tempfile

import numpy as np

from sceneparts.histograms import BinLayout
from sceneparts.imaging import load_image, load_label_map, load_palette
from sceneparts.learning import learn_models, quantized_features, texton_training_matrix
from sceneparts.model import Configuration, parse_graph_spec, total_energy, von_mises_density
from sceneparts.superpixels import attach_features, build_partition, element_proximity, segment_image
from sceneparts.synth import generate_dataset
from sceneparts.textons import train_textons

workdir = tempfile.mkdtemp(prefix="sceneparts_demo_")
train_stems, test_stems = generate_dataset(workdir, n_images=10, seed=1, size=64)
palette = load_palette(os.path.join(workdir, "palette.txt"))

pairs = [
    (load_image(os.path.join(workdir, "images", s + ".png")),
     load_label_map(os.path.join(workdir, "labels", s + ".png"), palette))
    for s in train_stems
]
codebook = train_textons(texton_training_matrix([im for im, _ in pairs]),
                         k=16, seed=0, max_samples=20_000)
layout = BinLayout(b_lab=8, n_textons=16)
models = learn_models(pairs, palette.names, codebook, layout,
                      band_radius=4, min_part_size=20)

stem = test_stems[0]
image = load_image(os.path.join(workdir, "images", stem + ".png"))
gold = load_label_map(os.path.join(workdir, "labels", stem + ".png"), palette)
graph = parse_graph_spec(
    open(os.path.join(workdir, "graphs", stem + ".txt")).read(), models.class_names)
print(f"scene {stem}: parts {[palette.names[z] for z in graph.node_classes]}, "
      f"{len(graph.edges)} edges")

element_map = segment_image(image, k_param=40.0, min_size=15)
partition = attach_features(
    build_partition(element_map),
    quantized_features(image, models.codebook, models.layout), models.layout)

# gold assignment: each element joins the part whose class matches its
# majority gold label
node_of_class = {int(z): p for p, z in reversed(list(enumerate(graph.node_classes)))}
assign = np.zeros(partition.n_elements, dtype=np.int32)
for el in range(partition.n_elements):
    vals, counts = np.unique(gold[element_map == el], return_counts=True)
    for idx in np.argsort(-counts):
        if int(vals[idx]) in node_of_class:
            assign[el] = node_of_class[int(vals[idx])]
            break
for p in range(graph.n_parts):
    if not (assign == p).any():
        sizes = np.bincount(assign, minlength=graph.n_parts)
        assign[next(e for e in range(len(assign)) if sizes[assign[e]] > 1)] = p

prox = element_proximity(partition, radius=models.band_radius)


def energy_of(a):
    config = Configuration(partition, graph, a.astype(np.int32), prox)
    return total_energy(config, models, models.weights)


bd = energy_of(assign)
print(f"\ngold configuration, weighted total H = {bd.total:.4f}")
w = models.weights
print("  family      weight   raw terms")
print(f"  appearance  {w.appearance:.4f}  {np.round(bd.appearance, 3)}")
print(f"  shape       {w.shape:.4f}  {np.round(bd.shape, 3)}")
print(f"  location    {w.location:.4f}  {np.round(bd.location, 3)}")
print(f"  distance    {w.distance:.4f}  {np.round(bd.distance, 3)}")
print(f"  angle       {w.angle:.4f}  {np.round(bd.angle, 3)}")

# lower energy = more probable under the Gibbs law P(L) ~ exp(-H)
rng = np.random.default_rng(0)
shuffled = assign.copy()
rng.shuffle(shuffled)
for p in range(graph.n_parts):
    if not (shuffled == p).any():
        sizes = np.bincount(shuffled, minlength=graph.n_parts)
        shuffled[next(e for e in range(len(shuffled)) if sizes[shuffled[e]] > 1)] = p
one_move = assign.copy()
movable = next(e for e in range(len(assign)) if np.sum(assign == assign[e]) > 1)
one_move[movable] = (assign[movable] + 1) % graph.n_parts

print(f"\nH(gold)              = {bd.total:9.4f}")
print(f"H(one element moved) = {energy_of(one_move).total:9.4f}")
print(f"H(shuffled)          = {energy_of(shuffled).total:9.4f}")

# the angle potential's density really is a density
xs = np.linspace(-np.pi, np.pi, 100001)
for kappa in (0.0, 5.0):
    integral = np.trapezoid(von_mises_density(xs, 1.0, kappa), xs)
    print(f"von Mises integral over the circle (kappa={kappa}): {integral:.6f}")
