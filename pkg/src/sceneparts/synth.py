"""Seeded synthetic scenes with exact gold labelings and graph specs.

Each image stacks three horizontal "stuff" bands (sky, optional water,
grass) and places up to three compact objects: a ball in the sky, plus a
tall tower and a wide slab standing on the ground. Tower and slab are
drawn from the same color and texture distribution on purpose: telling
them apart requires their footprint shape or their relations, not their
appearance. Stuff bands additionally receive small off-color speckle
patches (gold labels unchanged), which punish purely independent
per-element labeling more than smoothed labeling.

Everything is drawn from one seeded generator, so a dataset is a pure
function of (seed, n_images, size).
"""

from __future__ import annotations

import os

import numpy as np

from .imaging import Palette, save_image, save_label_map
from .learning import graph_from_labeling
from .model import format_graph_spec

__all__ = [
    "SYNTH_CLASS_NAMES",
    "SYNTH_GROUPS",
    "SYNTH_BASE_COLORS",
    "synth_palette",
    "generate_image",
    "generate_dataset",
]

SYNTH_CLASS_NAMES = ("sky", "water", "grass", "tower", "slab", "ball")
SYNTH_GROUPS = {
    "sky": "stuff",
    "water": "stuff",
    "grass": "stuff",
    "tower": "objects",
    "slab": "objects",
    "ball": "objects",
}

_SKY, _WATER, _GRASS, _TOWER, _SLAB, _BALL = range(6)

SYNTH_BASE_COLORS = {
    _SKY: (150, 185, 225),
    _WATER: (90, 120, 200),
    _GRASS: (75, 150, 75),
    _TOWER: (150, 140, 125),  # identical to slab: shape must separate them
    _SLAB: (150, 140, 125),
    _BALL: (240, 200, 70),
}

_PALETTE_COLORS = (
    (135, 206, 235),
    (70, 130, 180),
    (60, 179, 113),
    (178, 34, 34),
    (255, 140, 0),
    (255, 215, 0),
)

_NOISE_SIGMA = {_SKY: 3.0, _WATER: 4.0, _GRASS: 5.0, _TOWER: 6.0, _SLAB: 6.0, _BALL: 4.0}

# speckle patches confuse stuff classes pairwise: painted with the listed
# class's base color while the gold label stays put
_SPECKLE_PAINT = {_SKY: _WATER, _WATER: _SKY, _GRASS: _WATER}
_SPECKLE_AREA_PER = 350  # one patch per this many pixels of a stuff region


def synth_palette() -> Palette:
    return Palette(
        names=SYNTH_CLASS_NAMES,
        colors=np.array(_PALETTE_COLORS, dtype=np.uint8),
        void_color=(0, 0, 0),
    )


def _paint_class(
    rgb: np.ndarray, mask: np.ndarray, z: int, rng: np.random.Generator
) -> None:
    """Fill a region with its class texture."""
    h, w, _ = rgb.shape
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return
    base = np.array(SYNTH_BASE_COLORS[z], dtype=np.float64)
    shift = rng.uniform(-8.0, 8.0, size=3) if z not in (_TOWER, _SLAB) else rng.uniform(-6.0, 6.0, size=3)
    vals = np.tile(base + shift, (ys.size, 1))
    if z == _SKY:
        vals += ((ys / max(h - 1, 1)) * 12.0 - 6.0)[:, None]
    elif z == _WATER:
        phase = rng.uniform(0.0, 2.0 * np.pi)
        vals += (12.0 * np.sin(2.0 * np.pi * ys / 5.0 + phase))[:, None]
    elif z == _GRASS:
        vals += (((xs + ys) % 2) * 14.0 - 7.0)[:, None]
    elif z in (_TOWER, _SLAB):
        spot = rng.random(ys.size) < 0.08
        vals += np.where(spot, rng.choice([-25.0, 25.0], size=ys.size), 0.0)[:, None]
    vals += rng.normal(0.0, _NOISE_SIGMA[z], size=(ys.size, 3))
    rgb[ys, xs] = np.clip(np.rint(vals), 0, 255).astype(np.uint8)


def _sprinkle_speckles(
    rgb: np.ndarray, labels: np.ndarray, z: int, rng: np.random.Generator
) -> None:
    """Paint small off-class patches inside a stuff region (labels kept)."""
    paint_z = _SPECKLE_PAINT[z]
    mask = labels == z
    area = int(mask.sum())
    n_patches = area // _SPECKLE_AREA_PER
    if n_patches == 0:
        return
    ys, xs = np.nonzero(mask)
    h, w = labels.shape
    base = np.array(SYNTH_BASE_COLORS[paint_z], dtype=np.float64)
    for _ in range(n_patches):
        i = int(rng.integers(ys.size))
        cy, cx = int(ys[i]), int(xs[i])
        ph = int(rng.integers(2, 5))
        pw = int(rng.integers(2, 5))
        y0, y1 = max(0, cy - ph // 2), min(h, cy - ph // 2 + ph)
        x0, x1 = max(0, cx - pw // 2), min(w, cx - pw // 2 + pw)
        block = mask[y0:y1, x0:x1]
        vals = base[None, None, :] + rng.normal(0.0, 3.0, size=(y1 - y0, x1 - x0, 3))
        patch = rgb[y0:y1, x0:x1]
        patch[block] = np.clip(np.rint(vals), 0, 255).astype(np.uint8)[block]


def generate_image(
    rng: np.random.Generator, size: int = 80
) -> tuple[np.ndarray, np.ndarray]:
    """One synthetic scene: (rgb uint8 (H, W, 3), labels int16 (H, W))."""
    h = w = int(size)
    labels = np.full((h, w), _GRASS, dtype=np.int16)

    sky_rows = int(round(rng.uniform(0.25, 0.38) * h))
    labels[:sky_rows] = _SKY
    water_rows = 0
    if rng.random() < 0.75:
        water_rows = int(round(rng.uniform(0.15, 0.28) * h))
        water_rows = min(water_rows, int(0.70 * h) - sky_rows)
        labels[sky_rows : sky_rows + water_rows] = _WATER

    placed_any = False

    # ball: a disk in the sky
    if rng.random() < 0.6:
        r = int(round(rng.uniform(0.09, 0.13) * h))
        if sky_rows >= 2 * r + 5:
            cy = int(rng.integers(r + 2, sky_rows - r - 2))
            cx = int(rng.integers(r + 2, w - r - 2))
            yy, xx = np.ogrid[:h, :w]
            labels[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = _BALL
            placed_any = True

    def _place_tower(forced: bool) -> tuple[int, int, int, int] | None:
        if not forced and rng.random() >= 0.8:
            return None
        tw = int(round(rng.uniform(0.12, 0.18) * w))
        th = int(round(rng.uniform(0.30, 0.42) * h))
        y1 = h - 1 - int(round(rng.uniform(0.04, 0.10) * h))
        y0 = max(0, y1 - th)
        x0 = int(rng.integers(2, w - tw - 2))
        labels[y0 : y1 + 1, x0 : x0 + tw] = _TOWER
        return (y0, y1, x0, x0 + tw - 1)

    tower_box = _place_tower(forced=False)
    if tower_box is not None:
        placed_any = True

    # slab: wide and flat, on the ground, clear of the tower
    if rng.random() < 0.8:
        sw = int(round(rng.uniform(0.30, 0.42) * w))
        sh = int(round(rng.uniform(0.12, 0.18) * h))
        y1 = h - 1 - int(round(rng.uniform(0.02, 0.08) * h))
        y0 = max(0, y1 - sh)
        for _ in range(20):
            x0 = int(rng.integers(2, w - sw - 2))
            if tower_box is None:
                break
            ty0, ty1, tx0, tx1 = tower_box
            if x0 + sw - 1 < tx0 - 2 or x0 > tx1 + 2:
                break
        else:
            x0 = -1
        if x0 >= 0:
            labels[y0 : y1 + 1, x0 : x0 + sw] = _SLAB
            placed_any = True

    if not placed_any:
        _place_tower(forced=True)

    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    for z in np.unique(labels):
        _paint_class(rgb, labels == z, int(z), rng)
    for z in (_SKY, _WATER, _GRASS):
        if (labels == z).any():
            _sprinkle_speckles(rgb, labels, z, rng)
    return rgb, labels


def generate_dataset(
    root: str | os.PathLike,
    n_images: int,
    seed: int,
    size: int = 80,
    n_train: int | None = None,
    min_part_size: int = 50,
) -> tuple[list[str], list[str]]:
    """Write a full dataset under ``root``; returns (train, test) stems.

    Layout: ``images/*.png``, ``labels/*.png``, ``graphs/*.txt``,
    ``palette.txt``, ``split.txt`` (lines ``train <stem>`` and
    ``test <stem>``), ``groups.txt`` (lines ``<class> <group>``).
    """
    if n_images < 1:
        raise ValueError("need at least one image")
    if n_train is None:
        n_train = max(1, (3 * n_images) // 4)
    if not 0 < n_train <= n_images:
        raise ValueError("n_train must be in [1, n_images]")
    root = os.fspath(root)
    palette = synth_palette()
    for sub in ("images", "labels", "graphs"):
        os.makedirs(os.path.join(root, sub), exist_ok=True)

    from .imaging import save_palette

    save_palette(os.path.join(root, "palette.txt"), palette)
    with open(os.path.join(root, "groups.txt"), "w", encoding="utf-8") as fh:
        for name in SYNTH_CLASS_NAMES:
            fh.write(f"{name} {SYNTH_GROUPS[name]}\n")

    rng = np.random.default_rng(seed)
    stems = [f"img{i:03d}" for i in range(n_images)]
    for stem in stems:
        rgb, labels = generate_image(rng, size=size)
        save_image(os.path.join(root, "images", stem + ".png"), rgb)
        save_label_map(os.path.join(root, "labels", stem + ".png"), labels, palette)
        graph, _ = graph_from_labeling(labels, min_part_size=min_part_size)
        with open(os.path.join(root, "graphs", stem + ".txt"), "w", encoding="utf-8") as fh:
            fh.write(format_graph_spec(graph, SYNTH_CLASS_NAMES))

    train, test = stems[:n_train], stems[n_train:]
    with open(os.path.join(root, "split.txt"), "w", encoding="utf-8") as fh:
        for stem in train:
            fh.write(f"train {stem}\n")
        for stem in test:
            fh.write(f"test {stem}\n")
    return train, test
