"""Three labelers on one dataset, scored the same way.

Compares the per-element appearance+location baseline, the Potts-MRF
smoothed variant, and the annealed part model on the synthetic test
split, then shows the evaluation helpers: confusion accumulation,
per-class recalls, global/average/grouped accuracies, the plain-text
table, the CSV form, and a rendered overlay.

Run: python3 demos/baselines_and_evaluation.py   (~two minutes)
"""

import tempfile
from pathlib import Path

import numpy as np

from sceneparts.baselines import PottsParams, mle_label, mrf_potts_label
from sceneparts.evaluation import (
    accumulate,
    average_accuracy,
    format_table,
    global_accuracy,
    grouped_accuracy,
    metrics_csv,
    new_confusion,
    per_class_recall,
    render_overlay,
)
from sceneparts.histograms import BinLayout
from sceneparts.imaging import load_image, load_label_map, load_palette, save_image
from sceneparts.inference import anneal, configuration_to_labelmap
from sceneparts.learning import learn_models, quantized_features, texton_training_matrix
from sceneparts.model import parse_graph_spec
from sceneparts.superpixels import attach_features, build_partition, segment_image
from sceneparts.synth import generate_dataset
from sceneparts.textons import train_textons

root = Path(tempfile.mkdtemp(prefix="baseline-demo-"))
train_stems, test_stems = generate_dataset(root, n_images=16, seed=11, size=64)
print(f"dataset at {root}: {len(train_stems)} train / {len(test_stems)} test")

palette = load_palette(root / "palette.txt")
pairs = [
    (load_image(root / "images" / f"{stem}.png"),
     load_label_map(root / "labels" / f"{stem}.png", palette))
    for stem in train_stems
]
codebook = train_textons(texton_training_matrix([im for im, _ in pairs]),
                         k=16, seed=0, max_samples=20_000)
models = learn_models(pairs, palette.names, codebook, BinLayout(b_lab=8, n_textons=16),
                      band_radius=4, min_part_size=20)

K = len(palette.names)
cms = {m: new_confusion(K) for m in ("mle", "mrf", "ps3")}
for stem in test_stems:
    image = load_image(root / "images" / f"{stem}.png")
    gold = load_label_map(root / "labels" / f"{stem}.png", palette)
    graph = parse_graph_spec((root / "graphs" / f"{stem}.txt").read_text(),
                             models.class_names)
    partition = attach_features(
        build_partition(segment_image(image, k_param=40.0, min_size=15)),
        quantized_features(image, models.codebook, models.layout),
        models.layout,
    )
    allowed = sorted(set(int(z) for z in graph.node_classes))
    accumulate(gold, mle_label(partition, allowed, models), cms["mle"])
    accumulate(gold, mrf_potts_label(partition, allowed, models, PottsParams(beta=0.03)),
               cms["mrf"])
    res = anneal(partition, graph, models, n_iter=150 * partition.n_elements,
                 seed=0, gamma_start=0.6, gamma_end=0.005, rho_samples=100)
    accumulate(gold, configuration_to_labelmap(res.config), cms["ps3"])

recalls = {m: per_class_recall(cm) for m, cm in cms.items()}
print("\nper-class recall (percent):")
print(f"{'class':8s}" + "".join(f"{m:>8s}" for m in cms))
for z, name in enumerate(palette.names):
    row = "".join(
        f"{recalls[m][z]:8.1f}" if not np.isnan(recalls[m][z]) else f"{'-':>8s}"
        for m in cms
    )
    print(f"{name:8s}{row}")
for metric, fn in (("global", global_accuracy), ("average", average_accuracy)):
    print(f"{metric:8s}" + "".join(f"{fn(cms[m]):8.2f}" for m in cms))

groups = {0: "stuff", 1: "stuff", 2: "stuff", 3: "things", 4: "things", 5: "things"}
print("\ngrouped accuracy (part model):", grouped_accuracy(cms["ps3"], groups))

print("\nformat_table output for the part model:")
print(format_table(cms["ps3"], palette.names, groups))
print("metrics_csv output (first three lines):")
print("\n".join(metrics_csv(cms["ps3"], palette.names).splitlines()[:3]))

# overlay for the last test image: blended class colors plus the scene
# graph drawn between part centroids
centroids = np.array([res.config.part_view(i).centroid
                      for i in range(res.config.n_parts)])
overlay = render_overlay(image, configuration_to_labelmap(res.config),
                         res.config.graph, centroids, palette, alpha=0.45)
out_png = root / "overlay.png"
save_image(out_png, overlay)
print(f"\noverlay written to {out_png} ({overlay.shape[1]}x{overlay.shape[0]})")
