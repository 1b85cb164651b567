"""Image, label-map, and palette I/O plus sRGB -> CIELAB conversion.

Images are uint8 RGB arrays of shape (H, W, 3). Label maps are int16 arrays
of shape (H, W) where class indices are >= 0 and ``VOID`` (-1) marks pixels
excluded from learning and evaluation. Only two file formats are supported,
PPM (P6, maxval 255) and PNG, both lossless for 8-bit RGB data.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image as _PILImage

__all__ = [
    "VOID",
    "Palette",
    "load_image",
    "save_image",
    "read_ppm",
    "write_ppm",
    "rgb_to_lab",
    "load_palette",
    "save_palette",
    "label_map_to_rgb",
    "rgb_to_label_map",
    "load_label_map",
    "save_label_map",
    "save_element_map",
    "load_element_map",
]

VOID = -1

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class ImagingError(ValueError):
    """Raised for malformed image, palette, or label-map inputs."""


# ---------------------------------------------------------------------------
# raw image I/O


def _check_rgb(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ImagingError(f"expected uint8 (H, W, 3) image, got {image.dtype} {image.shape}")
    return image


def read_ppm(path: str | os.PathLike) -> np.ndarray:
    """Read a binary PPM (P6) file into a uint8 (H, W, 3) array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P6"):
        raise ImagingError(f"{path}: not a P6 PPM file")
    # Header is ASCII tokens (magic, width, height, maxval); '#' starts a
    # comment running to end of line.
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImagingError(f"{path}: truncated PPM header")
        try:
            fields.append(int(data[start:pos]))
        except ValueError as exc:
            raise ImagingError(f"{path}: bad PPM header token {data[start:pos]!r}") from exc
    width, height, maxval = fields
    if maxval != 255:
        raise ImagingError(f"{path}: only maxval 255 supported, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    need = width * height * 3
    raster = data[pos : pos + need]
    if len(raster) != need:
        raise ImagingError(f"{path}: expected {need} raster bytes, got {len(raster)}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3).copy()


def write_ppm(path: str | os.PathLike, image: np.ndarray) -> None:
    """Write a uint8 (H, W, 3) array as a binary PPM (P6) file."""
    image = _check_rgb(image)
    h, w = image.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(image.tobytes())


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Load a PNG or PPM (P6) image as a uint8 (H, W, 3) RGB array.

    The format is detected from the file's magic bytes, not its name.
    Grayscale or paletted PNGs are expanded to RGB; alpha is rejected.
    """
    try:
        with open(path, "rb") as fh:
            magic = fh.read(8)
    except OSError as exc:
        raise ImagingError(f"{path}: {exc.strerror}") from exc
    if magic.startswith(b"P6"):
        return read_ppm(path)
    if magic == _PNG_MAGIC:
        with _PILImage.open(path) as img:
            if img.mode in ("RGBA", "LA", "PA"):
                raise ImagingError(f"{path}: alpha channel not supported")
            return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()
    raise ImagingError(f"{path}: not a PNG or P6 PPM file")


def save_image(path: str | os.PathLike, image: np.ndarray) -> None:
    """Save a uint8 RGB array as PNG or PPM, chosen by file extension."""
    image = _check_rgb(image)
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".ppm":
        write_ppm(path, image)
    elif ext == ".png":
        _PILImage.fromarray(image, mode="RGB").save(str(path), format="PNG")
    else:
        raise ImagingError(f"{path}: unsupported extension {ext!r} (use .png or .ppm)")


# ---------------------------------------------------------------------------
# color conversion

# sRGB (D65) linear RGB -> XYZ, and the D65 reference white.
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_D65_WHITE = np.array([0.95047, 1.00000, 1.08883])


def rgb_to_lab(image: np.ndarray) -> np.ndarray:
    """Convert a uint8 sRGB image to CIELAB, returned as float64 (H, W, 3).

    Uses the standard two-piece sRGB gamma and the D65 white point. L is in
    [0, 100]; a and b are signed (roughly [-110, 110] for sRGB inputs).
    Pure gray inputs map to a = b = 0 up to rounding of the sRGB matrix.
    """
    image = _check_rgb(image)
    c = image.astype(np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _SRGB_TO_XYZ.T
    t = xyz / _D65_WHITE
    delta = 6.0 / 29.0
    f = np.where(t > delta**3, np.cbrt(t), t / (3.0 * delta**2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


# ---------------------------------------------------------------------------
# palettes and label maps


@dataclass(frozen=True)
class Palette:
    """Class names and label colors, plus the reserved void color.

    ``names[i]`` and ``colors[i]`` describe class index i. The void color
    marks pixels with no ground-truth class and must differ from every
    class color.
    """

    names: tuple[str, ...]
    colors: np.ndarray  # uint8 (K, 3)
    void_color: np.ndarray  # uint8 (3,)

    def __post_init__(self):
        colors = np.asarray(self.colors, dtype=np.uint8)
        void = np.asarray(self.void_color, dtype=np.uint8)
        object.__setattr__(self, "colors", colors)
        object.__setattr__(self, "void_color", void)
        if colors.shape != (len(self.names), 3):
            raise ImagingError("palette colors must be (K, 3) matching names")
        seen = {tuple(void.tolist()): "void"}
        for name, color in zip(self.names, colors):
            key = tuple(color.tolist())
            if key in seen:
                raise ImagingError(f"palette color {key} reused by {seen[key]!r} and {name!r}")
            seen[key] = name
        if len(set(self.names)) != len(self.names):
            raise ImagingError("duplicate class names in palette")

    @property
    def n_classes(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown class name {name!r}") from None


def load_palette(path: str | os.PathLike) -> Palette:
    """Parse a palette file.

    Each non-empty line is ``<index> <name> <r> <g> <b>``, and exactly one
    line is ``void <r> <g> <b>``. Indices must cover 0..K-1 exactly once.
    """
    entries: dict[int, tuple[str, tuple[int, int, int]]] = {}
    void_color: tuple[int, int, int] | None = None
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ImagingError(f"{path}: {exc.strerror}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "void":
            if len(parts) != 4 or void_color is not None:
                raise ImagingError(f"{path}:{lineno}: bad or duplicate void line")
            void_color = tuple(_parse_channel(path, lineno, v) for v in parts[1:4])
            continue
        if len(parts) != 5:
            raise ImagingError(f"{path}:{lineno}: expected '<index> <name> <r> <g> <b>'")
        try:
            idx = int(parts[0])
        except ValueError:
            raise ImagingError(f"{path}:{lineno}: bad class index {parts[0]!r}") from None
        if idx in entries:
            raise ImagingError(f"{path}:{lineno}: duplicate class index {idx}")
        rgb = tuple(_parse_channel(path, lineno, v) for v in parts[2:5])
        entries[idx] = (parts[1], rgb)
    if void_color is None:
        raise ImagingError(f"{path}: missing void line")
    if sorted(entries) != list(range(len(entries))) or not entries:
        raise ImagingError(f"{path}: class indices must be exactly 0..K-1")
    names = tuple(entries[i][0] for i in range(len(entries)))
    colors = np.array([entries[i][1] for i in range(len(entries))], dtype=np.uint8)
    return Palette(names, colors, np.array(void_color, dtype=np.uint8))


def _parse_channel(path, lineno, text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise ImagingError(f"{path}:{lineno}: bad channel value {text!r}") from None
    if not 0 <= v <= 255:
        raise ImagingError(f"{path}:{lineno}: channel value {v} outside [0, 255]")
    return v


def save_palette(path: str | os.PathLike, palette: Palette) -> None:
    """Write a palette in the format accepted by :func:`load_palette`."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, name in enumerate(palette.names):
            r, g, b = (int(v) for v in palette.colors[i])
            fh.write(f"{i} {name} {r} {g} {b}\n")
        r, g, b = (int(v) for v in palette.void_color)
        fh.write(f"void {r} {g} {b}\n")


def label_map_to_rgb(labels: np.ndarray, palette: Palette) -> np.ndarray:
    """Render a label map as a uint8 RGB image using palette colors."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ImagingError(f"label map must be 2-D, got shape {labels.shape}")
    if labels.max(initial=VOID) >= palette.n_classes or labels.min(initial=0) < VOID:
        raise ImagingError("label map contains indices outside the palette")
    # Index a (K+1, 3) table where slot K holds the void color.
    table = np.vstack([palette.colors, palette.void_color[None, :]])
    idx = np.where(labels == VOID, palette.n_classes, labels)
    return table[idx]


def rgb_to_label_map(image: np.ndarray, palette: Palette) -> np.ndarray:
    """Invert :func:`label_map_to_rgb`; unknown colors are an error."""
    image = _check_rgb(image)
    packed = (
        image[..., 0].astype(np.int32) * 65536
        + image[..., 1].astype(np.int32) * 256
        + image[..., 2].astype(np.int32)
    )
    lut = {}
    for i, color in enumerate(palette.colors):
        r, g, b = (int(v) for v in color)
        lut[r * 65536 + g * 256 + b] = i
    vr, vg, vb = (int(v) for v in palette.void_color)
    lut[vr * 65536 + vg * 256 + vb] = VOID
    out = np.full(packed.shape, VOID, dtype=np.int16)
    known = np.zeros(packed.shape, dtype=bool)
    for key, idx in lut.items():
        hit = packed == key
        out[hit] = idx
        known |= hit
    if not known.all():
        bad = np.argwhere(~known)[0]
        rgb = tuple(int(v) for v in image[bad[0], bad[1]])
        raise ImagingError(f"label image color {rgb} at {tuple(bad)} not in palette")
    return out


def load_label_map(path: str | os.PathLike, palette: Palette) -> np.ndarray:
    """Load a label map stored as a color image (PNG or PPM)."""
    return rgb_to_label_map(load_image(path), palette)


def save_label_map(path: str | os.PathLike, labels: np.ndarray, palette: Palette) -> None:
    """Save a label map as a color image (PNG or PPM, by extension)."""
    save_image(path, label_map_to_rgb(labels, palette))


# ---------------------------------------------------------------------------
# element-map debug dump


def save_element_map(path: str | os.PathLike, element_map: np.ndarray) -> None:
    """Save an element-id map as a 16-bit grayscale PNG (debug aid)."""
    element_map = np.asarray(element_map)
    if element_map.ndim != 2:
        raise ImagingError("element map must be 2-D")
    if element_map.min(initial=0) < 0 or element_map.max(initial=0) > 65535:
        raise ImagingError("element ids must fit in uint16")
    _PILImage.fromarray(element_map.astype(np.uint16)).save(str(path), format="PNG")


def load_element_map(path: str | os.PathLike) -> np.ndarray:
    """Load a 16-bit grayscale PNG written by :func:`save_element_map`."""
    with _PILImage.open(path) as img:
        if img.mode not in ("I;16", "I"):
            raise ImagingError(f"{path}: not a 16-bit grayscale PNG")
        return np.asarray(img, dtype=np.int32).copy()
