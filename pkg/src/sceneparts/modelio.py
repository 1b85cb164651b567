"""Binary serialization of learned models and texton codebooks.

A model file is a single self-describing container: a fixed header
(magic, version, class count, histogram layout, narrowband radius),
followed by length-prefixed sections in a fixed order, and a trailing
CRC32 of everything before it. All numbers are little-endian; floats are
64-bit. Writing the same model twice produces byte-identical files.

Layout (offsets in bytes):

    0   magic ``SPRTMODL`` (8 bytes)
    8   u32 version, u32 n_classes, u32 lab_bins, u32 n_textons,
        u32 band_radius, u32 reserved (= 0)
    32  sections, each ``tag (4 ascii bytes) | u64 length | payload``:
        NAME  class names joined by newlines, utf-8
        PRES  u8 per class: 1 if learned, 0 if absent
        FGH.  (n_classes, bins) f64 foreground histograms (zeros if absent)
        BGH.  (n_classes, bins) f64 narrowband histograms
        SHAP  (n_classes, 201, 201) f64 shape maps
        LOCM  (n_classes, 2) f64 location means
        LOCC  (n_classes, 2, 2) f64 location covariances
        PAIR  u64 count, then per ordered pair:
              u32 z_i, u32 z_j, u64 n_samples, f64 nu, f64 var,
              f64 omega, f64 kappa (sorted by (z_i, z_j))
        POOL  f64 pooled distance mean, f64 pooled distance var
        CODE  u32 k, u32 dim, i64 seed, (k, dim) f64 centers
        WGTS  5 x f64 (appearance, shape, location, distance, angle)
    end u32 CRC32 over all preceding bytes

A codebook file is the same idea with magic ``SPRTTEXC``: header
(magic, u32 version), one CODE-shaped payload, trailing CRC32.
"""

from __future__ import annotations

import os
import struct
import zlib

import numpy as np

from .histograms import BinLayout
from .model import ClassModel, ClassModels, PairwiseModel, SHAPE_CELLS, Weights
from .textons import TextonCodebook

__all__ = [
    "ModelFormatError",
    "MODEL_MAGIC",
    "CODEBOOK_MAGIC",
    "FORMAT_VERSION",
    "save_models",
    "load_models",
    "save_codebook",
    "load_codebook",
]

MODEL_MAGIC = b"SPRTMODL"
CODEBOOK_MAGIC = b"SPRTTEXC"
FORMAT_VERSION = 1
_SECTION_ORDER = (b"NAME", b"PRES", b"FGH.", b"BGH.", b"SHAP", b"LOCM", b"LOCC",
                  b"PAIR", b"POOL", b"CODE", b"WGTS")


class ModelFormatError(ValueError):
    """Raised for unreadable, corrupt, or incompatible model files."""


def _f64_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def _encode_codebook(codebook: TextonCodebook) -> bytes:
    k, dim = codebook.centers.shape
    return struct.pack("<IIq", k, dim, codebook.seed) + _f64_bytes(codebook.centers)


def _decode_codebook(payload: bytes) -> TextonCodebook:
    if len(payload) < 16:
        raise ModelFormatError("codebook payload truncated")
    k, dim, seed = struct.unpack_from("<IIq", payload, 0)
    need = 16 + 8 * k * dim
    if len(payload) != need:
        raise ModelFormatError("codebook payload has the wrong size")
    centers = np.frombuffer(payload, dtype="<f8", count=k * dim, offset=16)
    return TextonCodebook(
        centers=centers.reshape(k, dim).copy(), seed=int(seed), objective_trace=()
    )


def save_models(models: ClassModels, path: str | os.PathLike) -> None:
    """Write a model file; identical models produce identical bytes."""
    n = models.n_classes
    bins = models.layout.total
    fg = np.zeros((n, bins))
    bg = np.zeros((n, bins))
    shape = np.zeros((n, SHAPE_CELLS, SHAPE_CELLS))
    locm = np.zeros((n, 2))
    locc = np.zeros((n, 2, 2))
    present = np.zeros(n, dtype=np.uint8)
    for z, cm in enumerate(models.class_models):
        if cm is None:
            continue
        present[z] = 1
        fg[z] = cm.fg_hist
        bg[z] = cm.band_hist
        shape[z] = cm.shape_map
        locm[z] = cm.loc_mean
        locc[z] = cm.loc_cov

    pair_blob = [struct.pack("<Q", len(models.pairwise))]
    for (zi, zj) in sorted(models.pairwise):
        pm = models.pairwise[(zi, zj)]
        pair_blob.append(
            struct.pack(
                "<IIQdddd", zi, zj, pm.n_samples,
                pm.dist_mean, pm.dist_var, pm.angle_mean, pm.angle_kappa,
            )
        )

    sections = {
        b"NAME": "\n".join(models.class_names).encode("utf-8"),
        b"PRES": present.tobytes(),
        b"FGH.": _f64_bytes(fg),
        b"BGH.": _f64_bytes(bg),
        b"SHAP": _f64_bytes(shape),
        b"LOCM": _f64_bytes(locm),
        b"LOCC": _f64_bytes(locc),
        b"PAIR": b"".join(pair_blob),
        b"POOL": struct.pack("<dd", *models.pooled_distance),
        b"CODE": _encode_codebook(models.codebook),
        b"WGTS": _f64_bytes(models.weights.as_array()),
    }
    blob = [
        MODEL_MAGIC,
        struct.pack(
            "<IIIIII", models.version, n, models.layout.b_lab,
            models.layout.n_textons, models.band_radius, 0,
        ),
    ]
    for tag in _SECTION_ORDER:
        payload = sections[tag]
        blob.append(tag + struct.pack("<Q", len(payload)) + payload)
    body = b"".join(blob)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


def _read_sections(body: bytes, offset: int) -> dict[bytes, bytes]:
    sections: dict[bytes, bytes] = {}
    while offset < len(body):
        if offset + 12 > len(body):
            raise ModelFormatError("truncated section header")
        tag = body[offset : offset + 4]
        (length,) = struct.unpack_from("<Q", body, offset + 4)
        offset += 12
        if offset + length > len(body):
            raise ModelFormatError(f"truncated section {tag!r}")
        if tag in sections:
            raise ModelFormatError(f"duplicate section {tag!r}")
        sections[tag] = body[offset : offset + length]
        offset += length
    return sections


def _f64_view(payload: bytes, shape: tuple[int, ...], what: str) -> np.ndarray:
    need = 8 * int(np.prod(shape))
    if len(payload) != need:
        raise ModelFormatError(f"section {what} has the wrong size")
    return np.frombuffer(payload, dtype="<f8").reshape(shape).copy()


def load_models(path: str | os.PathLike) -> ClassModels:
    """Read a model file, verifying magic, version, and checksum."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MODEL_MAGIC) + 24 + 4:
        raise ModelFormatError("file too short to be a model file")
    body, (crc_stored,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc_stored:
        raise ModelFormatError("checksum mismatch: file is corrupt")
    if body[:8] != MODEL_MAGIC:
        raise ModelFormatError("bad magic: not a model file")
    version, n, b_lab, n_textons, band_radius, _ = struct.unpack_from("<IIIIII", body, 8)
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    sections = _read_sections(body, 32)
    missing = [t for t in _SECTION_ORDER if t not in sections]
    if missing:
        raise ModelFormatError(f"missing sections: {missing}")

    layout = BinLayout(b_lab=int(b_lab), n_textons=int(n_textons))
    bins = layout.total
    names = tuple(sections[b"NAME"].decode("utf-8").split("\n")) if sections[b"NAME"] else ()
    if len(names) != n:
        raise ModelFormatError("class name count does not match header")
    present = np.frombuffer(sections[b"PRES"], dtype=np.uint8)
    if present.size != n:
        raise ModelFormatError("presence section has the wrong size")
    fg = _f64_view(sections[b"FGH."], (n, bins), "FGH.")
    bg = _f64_view(sections[b"BGH."], (n, bins), "BGH.")
    shape = _f64_view(sections[b"SHAP"], (n, SHAPE_CELLS, SHAPE_CELLS), "SHAP")
    locm = _f64_view(sections[b"LOCM"], (n, 2), "LOCM")
    locc = _f64_view(sections[b"LOCC"], (n, 2, 2), "LOCC")

    pair_raw = sections[b"PAIR"]
    if len(pair_raw) < 8:
        raise ModelFormatError("pairwise section truncated")
    (n_pairs,) = struct.unpack_from("<Q", pair_raw, 0)
    rec = struct.calcsize("<IIQdddd")
    if len(pair_raw) != 8 + n_pairs * rec:
        raise ModelFormatError("pairwise section has the wrong size")
    pairwise: dict[tuple[int, int], PairwiseModel] = {}
    for r in range(n_pairs):
        zi, zj, cnt, nu, var, omega, kappa = struct.unpack_from("<IIQdddd", pair_raw, 8 + r * rec)
        pairwise[(int(zi), int(zj))] = PairwiseModel(nu, var, omega, kappa, int(cnt))

    if len(sections[b"POOL"]) != 16:
        raise ModelFormatError("pooled-distance section has the wrong size")
    pooled = struct.unpack("<dd", sections[b"POOL"])
    codebook = _decode_codebook(sections[b"CODE"])
    weights = Weights.from_array(_f64_view(sections[b"WGTS"], (5,), "WGTS"))

    class_models = tuple(
        ClassModel(
            name=names[z], fg_hist=fg[z], band_hist=bg[z], shape_map=shape[z],
            loc_mean=locm[z], loc_cov=locc[z],
        )
        if present[z]
        else None
        for z in range(n)
    )
    return ClassModels(
        layout=layout,
        band_radius=int(band_radius),
        class_names=names,
        class_models=class_models,
        pairwise=pairwise,
        pooled_distance=(float(pooled[0]), float(pooled[1])),
        codebook=codebook,
        weights=weights,
        version=int(version),
    )


def save_codebook(codebook: TextonCodebook, path: str | os.PathLike) -> None:
    body = CODEBOOK_MAGIC + struct.pack("<I", FORMAT_VERSION) + _encode_codebook(codebook)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


def load_codebook(path: str | os.PathLike) -> TextonCodebook:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16:
        raise ModelFormatError("file too short to be a codebook file")
    body, (crc_stored,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc_stored:
        raise ModelFormatError("checksum mismatch: file is corrupt")
    if body[:8] != CODEBOOK_MAGIC:
        raise ModelFormatError("bad magic: not a codebook file")
    (version,) = struct.unpack_from("<I", body, 8)
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported codebook format version {version}")
    return _decode_codebook(body[12:])
