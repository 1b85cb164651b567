"""Image and palette round trips, and the Lab conversion oracle."""

import numpy as np
import pytest

from sceneparts.imaging import (
    VOID,
    ImagingError,
    Palette,
    label_map_to_rgb,
    load_element_map,
    load_image,
    load_label_map,
    load_palette,
    read_ppm,
    rgb_to_lab,
    rgb_to_label_map,
    save_element_map,
    save_image,
    save_label_map,
    save_palette,
    write_ppm,
)


def _random_rgb(rng, h=9, w=7):
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)


def test_ppm_round_trip(tmp_path, rng):
    img = _random_rgb(rng)
    path = tmp_path / "x.ppm"
    write_ppm(path, img)
    assert np.array_equal(read_ppm(path), img)


def test_png_round_trip(tmp_path, rng):
    img = _random_rgb(rng)
    path = tmp_path / "x.png"
    save_image(path, img)
    assert np.array_equal(load_image(path), img)


def test_load_image_dispatches_on_extension(tmp_path, rng):
    img = _random_rgb(rng)
    write_ppm(tmp_path / "y.ppm", img)
    assert np.array_equal(load_image(tmp_path / "y.ppm"), img)


def test_alpha_channel_rejected(tmp_path):
    from PIL import Image

    Image.new("RGBA", (4, 4)).save(tmp_path / "a.png")
    with pytest.raises(ImagingError):
        load_image(tmp_path / "a.png")


def test_missing_image_raises_tagged_error(tmp_path):
    with pytest.raises(ImagingError):
        load_image(tmp_path / "missing.png")


# Reference Lab values computed by hand from the sRGB D65 definition:
# linearize with the two-piece gamma, multiply by the XYZ matrix, apply
# the cube-root f with the linear toe below (6/29)^3.
_LAB_CASES = [
    ((255, 255, 255), (100.0, 0.0, 0.0)),
    ((0, 0, 0), (0.0, 0.0, 0.0)),
    ((255, 0, 0), (53.2408, 80.0925, 67.2032)),
    ((0, 255, 0), (87.7347, -86.1827, 83.1793)),
    ((0, 0, 255), (32.2970, 79.1875, -107.8602)),
    ((128, 128, 128), (53.5850, 0.0, 0.0)),
]


@pytest.mark.parametrize("rgb,expected", _LAB_CASES)
def test_lab_reference_values(rgb, expected):
    img = np.array([[rgb]], dtype=np.uint8)
    lab = rgb_to_lab(img)[0, 0]
    assert np.allclose(lab, expected, atol=2e-3)


def test_lab_ranges(rng):
    lab = rgb_to_lab(_random_rgb(rng, 16, 16))
    assert lab[..., 0].min() >= 0.0 and lab[..., 0].max() <= 100.0
    assert abs(lab[..., 1:]).max() <= 110.0


def _palette():
    return Palette(
        names=("a", "b", "c"),
        colors=np.array([[255, 0, 0], [0, 255, 0], [0, 0, 255]], dtype=np.uint8),
        void_color=(0, 0, 0),
    )


def test_palette_rejects_duplicate_colors():
    with pytest.raises(ImagingError):
        Palette(names=("a", "b"),
                colors=np.array([[1, 2, 3], [1, 2, 3]], dtype=np.uint8),
                void_color=(0, 0, 0))


def test_palette_rejects_void_collision():
    with pytest.raises(ImagingError):
        Palette(names=("a",), colors=np.array([[0, 0, 0]], dtype=np.uint8),
                void_color=(0, 0, 0))


def test_palette_file_round_trip(tmp_path):
    pal = _palette()
    save_palette(tmp_path / "p.txt", pal)
    back = load_palette(tmp_path / "p.txt")
    assert back.names == pal.names
    assert np.array_equal(back.colors, pal.colors)
    assert np.array_equal(back.void_color, pal.void_color)


def test_label_map_round_trip(tmp_path, rng):
    pal = _palette()
    labels = rng.integers(-1, 3, size=(6, 5)).astype(np.int16)
    save_label_map(tmp_path / "l.png", labels, pal)
    assert np.array_equal(load_label_map(tmp_path / "l.png", pal), labels)


def test_void_color_maps_to_void_index():
    pal = _palette()
    img = np.zeros((2, 2, 3), dtype=np.uint8)
    assert (rgb_to_label_map(img, pal) == VOID).all()


def test_unknown_color_rejected():
    pal = _palette()
    img = np.full((1, 1, 3), 7, dtype=np.uint8)
    with pytest.raises(ImagingError):
        rgb_to_label_map(img, pal)


def test_label_color_round_trip_dense(rng):
    pal = _palette()
    labels = rng.integers(-1, 3, size=(8, 8)).astype(np.int16)
    assert np.array_equal(rgb_to_label_map(label_map_to_rgb(labels, pal), pal), labels)


def test_element_map_round_trip(tmp_path, rng):
    em = rng.integers(0, 40000, size=(5, 9)).astype(np.int32)
    save_element_map(tmp_path / "e.png", em)
    assert np.array_equal(load_element_map(tmp_path / "e.png"), em)
