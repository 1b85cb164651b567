"""Filter bank structure and the convolution contract.

The brute-force oracle below convolves by explicit loops over a
reflect-padded image, written independently of the library's transform
path.
"""

import numpy as np

from sceneparts.filters import SUPPORT, filter_responses, make_filter_bank

_BANK = make_filter_bank()


def _brute_convolve(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """True convolution with reflect boundary, by definition."""
    r = kernel.shape[0] // 2
    padded = np.pad(image, r, mode="reflect")
    flipped = kernel[::-1, ::-1]
    h, w = image.shape
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = (padded[y : y + 2 * r + 1, x : x + 2 * r + 1] * flipped).sum()
    return out


def test_bank_shape():
    assert _BANK.kernels.shape == (61, SUPPORT, SUPPORT)


def test_kernels_l1_normalized():
    l1 = np.abs(_BANK.kernels).sum(axis=(1, 2))
    assert np.allclose(l1, 1.0, atol=1e-12)


def test_band_kernels_zero_mean():
    # all but the 4 plain Gaussians integrate to zero
    sums = _BANK.kernels.sum(axis=(1, 2))
    gaussian = np.isclose(sums, _BANK.kernels.sum(axis=(1, 2)).max(), atol=1e-9)
    n_nonzero_mean = int(np.count_nonzero(np.abs(sums) > 1e-10))
    assert n_nonzero_mean == 4
    assert gaussian.sum() == 4


_ORIENTED = range(36)  # 18 first- plus 18 second-derivative kernels


def test_derivative_index_layout():
    assert _BANK.first_derivative_index(0, 0) == 0
    assert _BANK.first_derivative_index(2, 5) == 17
    assert _BANK.second_derivative_index(0, 0) == 18
    assert _BANK.second_derivative_index(2, 5) == 35


def test_oriented_kernels_have_rotated_mates():
    """Each oriented derivative rotated a quarter turn appears in the bank."""
    idx = _ORIENTED
    kernels = _BANK.kernels
    for i in idx:
        rotated = np.rot90(kernels[i])
        found = any(
            np.allclose(rotated, kernels[j], atol=1e-12)
            or np.allclose(rotated, -kernels[j], atol=1e-12)
            for j in idx
        )
        assert found, f"kernel {i} has no quarter-turn mate"


def test_impulse_response_reproduces_kernel():
    """True convolution with a centered impulse returns the kernel itself."""
    img = np.zeros((41, 41))
    img[20, 20] = 1.0
    resp = filter_responses(img, _BANK)
    r = SUPPORT // 2
    for i in (0, 17, 36, 44, 48):
        patch = resp[i, 20 - r : 20 + r + 1, 20 - r : 20 + r + 1]
        assert np.allclose(patch, _BANK.kernels[i], atol=1e-12)


def test_matches_brute_force(rng):
    img = rng.random((24, 21))
    resp = filter_responses(img, _BANK)
    for i in (0, 9, 36, 40, 44, 50, 60):
        assert np.allclose(resp[i], _brute_convolve(img, _BANK.kernels[i]), atol=1e-10)


def test_constant_image_responses(rng):
    img = np.full((20, 20), 3.7)
    resp = filter_responses(img, _BANK)
    sums = _BANK.kernels.sum(axis=(1, 2))
    expected = 3.7 * sums
    assert np.allclose(resp.reshape(61, -1).mean(axis=1), expected, atol=1e-9)
    assert np.allclose(resp.reshape(61, -1).std(axis=1), 0.0, atol=1e-9)


def test_response_rotation_relation(rng):
    """Rotating the image permutes oriented responses (up to sign)."""
    img = rng.random((31, 31))
    rot = np.rot90(img).copy()
    resp = filter_responses(img, _BANK)
    resp_rot = filter_responses(rot, _BANK)
    idx = _ORIENTED
    for i in idx:
        rotated_kernel = np.rot90(_BANK.kernels[i])
        matched = False
        for j in idx:
            if np.allclose(rotated_kernel, _BANK.kernels[j], atol=1e-12):
                assert np.allclose(np.rot90(resp[i]), resp_rot[j], atol=1e-8)
                matched = True
            elif np.allclose(rotated_kernel, -_BANK.kernels[j], atol=1e-12):
                assert np.allclose(np.rot90(resp[i]), -resp_rot[j], atol=1e-8)
                matched = True
        assert matched
