"""Model and codebook container format: round trips and corruption."""

import struct

import numpy as np
import pytest

from conftest import tiny_models
from sceneparts.modelio import (
    CODEBOOK_MAGIC,
    MODEL_MAGIC,
    ModelFormatError,
    load_codebook,
    load_models,
    save_codebook,
    save_models,
)
from sceneparts.textons import TextonCodebook


def _with_absent_class(models):
    from dataclasses import replace

    cms = list(models.class_models)
    cms[1] = None
    return replace(models, class_models=tuple(cms))


def test_model_round_trip(rng, tmp_path):
    models = tiny_models(rng, n_classes=3)
    path = tmp_path / "m.bin"
    save_models(models, path)
    back = load_models(path)
    assert back.class_names == models.class_names
    assert back.layout == models.layout
    assert back.band_radius == models.band_radius
    assert back.pooled_distance == models.pooled_distance
    assert back.weights == models.weights
    assert back.version == models.version
    for orig, rt in zip(models.class_models, back.class_models):
        assert np.array_equal(rt.fg_hist, orig.fg_hist)
        assert np.array_equal(rt.band_hist, orig.band_hist)
        assert np.array_equal(rt.shape_map, orig.shape_map)
        assert np.array_equal(rt.loc_mean, orig.loc_mean)
        assert np.array_equal(rt.loc_cov, orig.loc_cov)
    assert set(back.pairwise) == set(models.pairwise)
    for key, pm in models.pairwise.items():
        assert back.pairwise[key] == pm
    assert np.array_equal(back.codebook.centers, models.codebook.centers)
    assert back.codebook.seed == models.codebook.seed


def test_round_trip_preserves_absent_class(rng, tmp_path):
    models = _with_absent_class(tiny_models(rng, n_classes=3))
    path = tmp_path / "m.bin"
    save_models(models, path)
    back = load_models(path)
    assert back.class_models[1] is None
    assert back.class_models[0] is not None
    assert back.class_names == models.class_names


def test_save_is_byte_deterministic(rng, tmp_path):
    models = tiny_models(rng, n_classes=2)
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    save_models(models, a)
    save_models(models, b)
    assert a.read_bytes() == b.read_bytes()


def test_bit_flip_detected(rng, tmp_path):
    models = tiny_models(rng, n_classes=2)
    path = tmp_path / "m.bin"
    save_models(models, path)
    raw = bytearray(path.read_bytes())
    raw[len(raw) // 2] ^= 0x40
    path.write_bytes(bytes(raw))
    with pytest.raises(ModelFormatError, match="corrupt"):
        load_models(path)


def test_truncation_detected(rng, tmp_path):
    models = tiny_models(rng, n_classes=2)
    path = tmp_path / "m.bin"
    save_models(models, path)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) - 9])
    with pytest.raises(ModelFormatError):
        load_models(path)
    path.write_bytes(raw[:10])
    with pytest.raises(ModelFormatError, match="too short"):
        load_models(path)


def _recrc(body: bytes) -> bytes:
    import zlib

    return body + struct.pack("<I", zlib.crc32(body))


def test_bad_magic_rejected(rng, tmp_path):
    models = tiny_models(rng, n_classes=2)
    path = tmp_path / "m.bin"
    save_models(models, path)
    body = bytearray(path.read_bytes()[:-4])
    body[:8] = b"NOTMODEL"
    path.write_bytes(_recrc(bytes(body)))
    with pytest.raises(ModelFormatError, match="magic"):
        load_models(path)


def test_bad_version_rejected(rng, tmp_path):
    models = tiny_models(rng, n_classes=2)
    path = tmp_path / "m.bin"
    save_models(models, path)
    body = bytearray(path.read_bytes()[:-4])
    struct.pack_into("<I", body, 8, 99)
    path.write_bytes(_recrc(bytes(body)))
    with pytest.raises(ModelFormatError, match="version"):
        load_models(path)


def test_missing_section_rejected(rng, tmp_path):
    models = tiny_models(rng, n_classes=2)
    path = tmp_path / "m.bin"
    save_models(models, path)
    body = bytearray(path.read_bytes()[:-4])
    # rename the weights section so it goes missing
    pos = bytes(body).rindex(b"WGTS")
    body[pos : pos + 4] = b"XXXX"
    path.write_bytes(_recrc(bytes(body)))
    with pytest.raises(ModelFormatError, match="missing"):
        load_models(path)


def test_codebook_round_trip(tmp_path):
    cb = TextonCodebook(
        centers=np.random.default_rng(2).normal(size=(5, 61)),
        seed=42,
        objective_trace=(3.0, 2.0),
    )
    path = tmp_path / "c.bin"
    save_codebook(cb, path)
    back = load_codebook(path)
    assert np.array_equal(back.centers, cb.centers)
    assert back.seed == 42
    assert back.objective_trace == ()  # the trace is a fit diagnostic, not stored


def test_codebook_corruption_detected(tmp_path):
    cb = TextonCodebook(centers=np.zeros((2, 61)), seed=0)
    path = tmp_path / "c.bin"
    save_codebook(cb, path)
    raw = bytearray(path.read_bytes())
    raw[20] ^= 0x01
    path.write_bytes(bytes(raw))
    with pytest.raises(ModelFormatError, match="corrupt"):
        load_codebook(path)


def test_model_file_is_not_a_codebook(rng, tmp_path):
    models = tiny_models(rng, n_classes=2)
    path = tmp_path / "m.bin"
    save_models(models, path)
    with pytest.raises(ModelFormatError, match="magic"):
        load_codebook(path)
    assert path.read_bytes()[:8] == MODEL_MAGIC != CODEBOOK_MAGIC
