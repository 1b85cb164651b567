"""Texture filter bank and filter-response computation.

The bank holds 61 kernels of support 19 x 19, applied to the L channel of a
CIELAB image:

* 36 oriented Gaussian derivatives: first and second y'-derivatives of an
  elongated Gaussian (sigma_x = 3 sigma_y) at 6 orientations (pi * o / 6)
  and 3 scales (1, sqrt(2), 2);
* 8 Laplacian-of-Gaussian kernels at sigmas (1, sqrt(2), 2, 2 sqrt(2)) and
  3x those;
* 4 isotropic Gaussians at sigmas (1, sqrt(2), 2, 2 sqrt(2));
* 13 isotropic cosine-modulated kernels F(r) = cos(pi tau r / sigma)
  exp(-r^2 / 2 sigma^2) over the classic (sigma, tau) pairs.

Every kernel is L1-normalized (sum of absolute values is 1); every kernel
except the 4 plain Gaussians has exactly zero mean (enforced by subtracting
the sample mean before normalization, so discretization cannot leave a DC
component).

Kernel order: indices 0..17 are first derivatives (scale-major, orientation
``o`` at index ``s * 6 + o``), 18..35 second derivatives in the same layout,
36..43 LoG, 44..47 Gaussians, 48..60 the cosine-modulated set. Rotating an
input patch by 90 degrees maps the response of an oriented kernel to that of
its orientation mate ``o +/- 3 (mod 6)`` at the same scale and order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

__all__ = [
    "SUPPORT",
    "N_ORIENTATIONS",
    "DERIV_SCALES",
    "BLOB_SCALES",
    "SCHMID_PAIRS",
    "FilterBank",
    "make_filter_bank",
    "filter_responses",
]

SUPPORT = 19
N_ORIENTATIONS = 6
DERIV_SCALES = (1.0, np.sqrt(2.0), 2.0)
BLOB_SCALES = (1.0, np.sqrt(2.0), 2.0, 2.0 * np.sqrt(2.0))
SCHMID_PAIRS = (
    (2, 1),
    (4, 1),
    (4, 2),
    (6, 1),
    (6, 2),
    (6, 3),
    (8, 1),
    (8, 2),
    (8, 3),
    (10, 1),
    (10, 2),
    (10, 3),
    (10, 4),
)


def _gaussian_1d(x: np.ndarray, sigma: float, order: int) -> np.ndarray:
    """1-D Gaussian or its first/second derivative, unnormalized scale."""
    var = sigma * sigma
    g = np.exp(-(x * x) / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)
    if order == 0:
        return g
    if order == 1:
        return -g * (x / var)
    if order == 2:
        return g * ((x * x - var) / (var * var))
    raise ValueError(f"unsupported derivative order {order}")


def _finalize(kernel: np.ndarray, zero_mean: bool) -> np.ndarray:
    if zero_mean:
        kernel = kernel - kernel.mean()
    return kernel / np.abs(kernel).sum()


def _oriented_derivative(scale: float, orientation: int, order: int) -> np.ndarray:
    half = SUPPORT // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    xx, yy = np.meshgrid(ax, ax)  # xx varies along columns, yy along rows
    angle = np.pi * orientation / N_ORIENTATIONS
    c, s = np.cos(angle), np.sin(angle)
    # Rotate sample points into the kernel frame; derivative taken along y'.
    xr = c * xx - s * yy
    yr = s * xx + c * yy
    kernel = _gaussian_1d(xr, 3.0 * scale, 0) * _gaussian_1d(yr, scale, order)
    return _finalize(kernel, zero_mean=True)


def _log_kernel(sigma: float) -> np.ndarray:
    half = SUPPORT // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    xx, yy = np.meshgrid(ax, ax)
    r2 = xx * xx + yy * yy
    var = sigma * sigma
    g = np.exp(-r2 / (2.0 * var)) / (2.0 * np.pi * var)
    kernel = g * (r2 - 2.0 * var) / (var * var)
    return _finalize(kernel, zero_mean=True)


def _gaussian_kernel(sigma: float) -> np.ndarray:
    half = SUPPORT // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    xx, yy = np.meshgrid(ax, ax)
    var = sigma * sigma
    kernel = np.exp(-(xx * xx + yy * yy) / (2.0 * var)) / (2.0 * np.pi * var)
    return _finalize(kernel, zero_mean=False)


def _schmid_kernel(sigma: float, tau: float) -> np.ndarray:
    half = SUPPORT // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    xx, yy = np.meshgrid(ax, ax)
    r = np.sqrt(xx * xx + yy * yy)
    kernel = np.cos(np.pi * tau * r / sigma) * np.exp(-(r * r) / (2.0 * sigma * sigma))
    return _finalize(kernel, zero_mean=True)


@dataclass(frozen=True)
class FilterBank:
    """Stack of 61 kernels, shape (61, 19, 19), in the documented order."""

    kernels: np.ndarray

    @property
    def n_filters(self) -> int:
        return self.kernels.shape[0]

    def first_derivative_index(self, scale_idx: int, orientation: int) -> int:
        return scale_idx * N_ORIENTATIONS + orientation

    def second_derivative_index(self, scale_idx: int, orientation: int) -> int:
        return 18 + scale_idx * N_ORIENTATIONS + orientation


def make_filter_bank() -> FilterBank:
    """Construct the 61-kernel bank described in the module docstring."""
    kernels = []
    for order in (1, 2):
        for scale in DERIV_SCALES:
            for orientation in range(N_ORIENTATIONS):
                kernels.append(_oriented_derivative(scale, orientation, order))
    for sigma in BLOB_SCALES:
        kernels.append(_log_kernel(sigma))
    for sigma in BLOB_SCALES:
        kernels.append(_log_kernel(3.0 * sigma))
    for sigma in BLOB_SCALES:
        kernels.append(_gaussian_kernel(sigma))
    for sigma, tau in SCHMID_PAIRS:
        kernels.append(_schmid_kernel(float(sigma), float(tau)))
    bank = np.stack(kernels)
    assert bank.shape == (61, SUPPORT, SUPPORT)
    return FilterBank(bank)


def filter_responses(lightness: np.ndarray, bank: FilterBank) -> np.ndarray:
    """Convolve the L channel with every kernel in the bank.

    Parameters
    ----------
    lightness : float array (H, W)
        The L channel of a CIELAB image (raw values, no rescaling).
    bank : FilterBank

    Returns
    -------
    float64 array (n_filters, H, W)
        True convolution (kernel flipped relative to cross-correlation),
        with the image reflect-padded (edge sample not duplicated) so the
        output keeps the input size.
    """
    lightness = np.asarray(lightness, dtype=np.float64)
    if lightness.ndim != 2:
        raise ValueError("lightness must be a 2-D array")
    half = SUPPORT // 2
    if lightness.shape[0] <= half or lightness.shape[1] <= half:
        raise ValueError(f"image too small for {SUPPORT}x{SUPPORT} kernels with reflect padding")
    padded = np.pad(lightness, half, mode="reflect")
    out = fftconvolve(padded[None, :, :], bank.kernels, mode="valid", axes=(1, 2))
    assert out.shape == (bank.n_filters,) + lightness.shape
    return out
