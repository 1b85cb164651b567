"""Graph-based superpixel segmentation and the element partition.

Segmentation follows the classic greedy graph-merging scheme: pixels are
nodes of an 8-connected graph, edge weights are Euclidean RGB distances,
edges are processed in ascending order, and two components merge when the
edge weight does not exceed either component's internal threshold
``Int(C) + k_param / |C|``. A second pass over the same edge order merges
any component smaller than ``min_size``.

Because merging happens on the 8-connected graph, a finished segment can in
rare cases be connected only through diagonal links. Elements are required
to be 4-connected, so segments are then split into their 4-connected pieces
and any piece smaller than ``min_size`` is absorbed by the 4-adjacent
neighbor sharing the longest boundary (smallest piece first; ties toward
the lower element id). Everything is deterministic: stable edge sort,
row-major relabeling.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .histograms import BinLayout

__all__ = [
    "ElementPartition",
    "segment_image",
    "build_partition",
    "attach_features",
    "element_proximity",
    "narrowband",
    "centroid_of",
]


# ---------------------------------------------------------------------------
# union-find segmentation


def _find(parent: np.ndarray, x: int) -> int:
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


def _edge_list(image: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """8-connectivity edges (a, b, weight) with Euclidean RGB weights."""
    h, w = image.shape[:2]
    rgb = image.astype(np.float64)
    idx = np.arange(h * w, dtype=np.int64).reshape(h, w)
    pairs_a, pairs_b, weights = [], [], []
    # right, down, down-right, down-left
    for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
        if dx >= 0:
            a = idx[: h - dy, : w - dx]
            b = idx[dy:, dx:]
            ca = rgb[: h - dy, : w - dx]
            cb = rgb[dy:, dx:]
        else:
            a = idx[: h - dy, -dx:]
            b = idx[dy:, :dx]
            ca = rgb[: h - dy, -dx:]
            cb = rgb[dy:, :dx]
        pairs_a.append(a.ravel())
        pairs_b.append(b.ravel())
        weights.append(np.sqrt(((ca - cb) ** 2).sum(axis=2)).ravel())
    return np.concatenate(pairs_a), np.concatenate(pairs_b), np.concatenate(weights)


def segment_image(image: np.ndarray, k_param: float = 150.0, min_size: int = 50) -> np.ndarray:
    """Segment a uint8 RGB image into elements; returns int32 (H, W) ids.

    Ids are 0..E-1 in row-major order of first occurrence. Larger
    ``k_param`` favors larger segments; ``min_size`` is enforced as
    described in the module docstring.
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) RGB image")
    h, w = image.shape[:2]
    n = h * w
    ea, eb, ew = _edge_list(image)
    order = np.argsort(ew, kind="stable")
    ea, eb, ew = ea[order], eb[order], ew[order]

    parent = np.arange(n, dtype=np.int64)
    size = np.ones(n, dtype=np.int64)
    thr = np.full(n, float(k_param), dtype=np.float64)
    ea_l, eb_l, ew_l = ea.tolist(), eb.tolist(), ew.tolist()
    for a, b, wgt in zip(ea_l, eb_l, ew_l):
        ra, rb = _find(parent, a), _find(parent, b)
        if ra == rb:
            continue
        if wgt <= thr[ra] and wgt <= thr[rb]:
            parent[rb] = ra
            size[ra] += size[rb]
            thr[ra] = wgt + k_param / size[ra]
    for a, b, wgt in zip(ea_l, eb_l, ew_l):
        ra, rb = _find(parent, a), _find(parent, b)
        if ra == rb:
            continue
        if size[ra] < min_size or size[rb] < min_size:
            parent[rb] = ra
            size[ra] += size[rb]
    roots = np.array([_find(parent, i) for i in range(n)], dtype=np.int64).reshape(h, w)
    segments = _canonical_relabel(roots)
    segments = _split_4connected(segments)
    segments = _absorb_fragments(segments, min_size)
    return _canonical_relabel(segments)


def _canonical_relabel(label_map: np.ndarray) -> np.ndarray:
    """Relabel to 0..E-1 by row-major first occurrence."""
    flat = label_map.ravel()
    uniq, first_pos, inverse = np.unique(flat, return_index=True, return_inverse=True)
    rank = np.empty(len(uniq), dtype=np.int32)
    rank[np.argsort(first_pos, kind="stable")] = np.arange(len(uniq), dtype=np.int32)
    return rank[inverse].reshape(label_map.shape).astype(np.int32)


def _split_4connected(segments: np.ndarray) -> np.ndarray:
    """Split each segment into its 4-connected components."""
    out = np.full(segments.shape, -1, dtype=np.int32)
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    next_id = 0
    slices = ndimage.find_objects(segments + 1)
    for seg, sl in enumerate(slices):
        if sl is None:
            continue
        mask = segments[sl] == seg
        comp, n_comp = ndimage.label(mask, structure=structure)
        view = out[sl]
        view[mask] = comp[mask] + (next_id - 1)
        next_id += n_comp
    assert (out >= 0).all()
    return out


def _absorb_fragments(segments: np.ndarray, min_size: int) -> np.ndarray:
    """Merge pieces below min_size into their longest-boundary 4-neighbor."""
    segments = segments.copy()
    while True:
        sizes = np.bincount(segments.ravel())
        small = [s for s in np.argsort(sizes, kind="stable") if 0 < sizes[s] < min_size]
        merged_any = False
        for frag in small:
            mask = segments == frag
            boundary: dict[int, int] = {}
            for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
                nb = np.roll(segments, shift, axis=axis)
                edge = mask.copy()
                # roll wraps around; cut the wrapped border off
                if axis == 0:
                    edge[0 if shift == 1 else -1, :] = False
                else:
                    edge[:, 0 if shift == 1 else -1] = False
                for nid, cnt in zip(*np.unique(nb[edge], return_counts=True)):
                    if nid != frag:
                        boundary[int(nid)] = boundary.get(int(nid), 0) + int(cnt)
            if not boundary:
                continue  # isolated (single-element image); keep as is
            best = max(sorted(boundary), key=lambda nid: (boundary[nid], -nid))
            segments[mask] = best
            merged_any = True
            break  # sizes changed; recompute
        if not merged_any:
            return segments


# ---------------------------------------------------------------------------
# element partition


@dataclass(frozen=True)
class ElementPartition:
    """Fixed superpixel partition of one image.

    Elements are the atomic units moved by inference. ``pixel_index[e]``
    holds flat (row-major) pixel indices; ``adjacency[e]`` the sorted ids of
    4-adjacent elements. ``counts``/``norm_hist`` (per-element histogram
    tallies and their normalized form) are attached by
    :func:`attach_features` once per image.
    """

    shape: tuple[int, int]
    element_map: np.ndarray  # int32 (H, W)
    pixel_index: tuple[np.ndarray, ...]
    el_n: np.ndarray  # int64 (E,)
    el_coord_sum: np.ndarray  # float64 (E, 2) sums of (x, y)
    adjacency: tuple[np.ndarray, ...]
    layout: BinLayout | None = None
    counts: np.ndarray | None = None  # int64 (E, layout.total)
    norm_hist: np.ndarray | None = None  # float64 (E, layout.total)

    @property
    def n_elements(self) -> int:
        return len(self.pixel_index)

    @property
    def centroids(self) -> np.ndarray:
        return self.el_coord_sum / self.el_n[:, None]


def build_partition(element_map: np.ndarray) -> ElementPartition:
    """Index an element-id map into an :class:`ElementPartition`.

    The map must label every pixel with ids 0..E-1, each id forming one
    nonempty 4-connected region (as :func:`segment_image` produces).
    """
    element_map = np.asarray(element_map, dtype=np.int32)
    if element_map.ndim != 2:
        raise ValueError("element map must be 2-D")
    h, w = element_map.shape
    flat = element_map.ravel()
    n_elements = int(flat.max()) + 1
    counts = np.bincount(flat, minlength=n_elements)
    if (counts == 0).any() or flat.min() < 0:
        raise ValueError("element ids must be 0..E-1 with no gaps")
    order = np.argsort(flat, kind="stable")
    splits = np.cumsum(counts)[:-1]
    pixel_index = tuple(np.ascontiguousarray(a) for a in np.split(order, splits))
    ys, xs = np.divmod(np.arange(h * w, dtype=np.int64), w)
    coord = np.zeros((n_elements, 2), dtype=np.float64)
    np.add.at(coord[:, 0], flat, xs.astype(np.float64))
    np.add.at(coord[:, 1], flat, ys.astype(np.float64))

    pairs = set()
    for a, b in (
        (element_map[:, :-1], element_map[:, 1:]),
        (element_map[:-1, :], element_map[1:, :]),
    ):
        diff = a != b
        pairs.update(zip(a[diff].tolist(), b[diff].tolist()))
    nbrs: list[set[int]] = [set() for _ in range(n_elements)]
    for a, b in pairs:
        nbrs[a].add(b)
        nbrs[b].add(a)
    adjacency = tuple(np.array(sorted(s), dtype=np.int32) for s in nbrs)
    return ElementPartition(
        shape=(h, w),
        element_map=element_map,
        pixel_index=pixel_index,
        el_n=counts.astype(np.int64),
        el_coord_sum=coord,
        adjacency=adjacency,
    )


def attach_features(partition: ElementPartition, bins: np.ndarray, layout: BinLayout) -> ElementPartition:
    """Attach per-element histogram tallies from quantized feature bins.

    ``bins`` is the (H, W, 4) output of ``quantize_features`` for the same
    image. Returns a new partition with exact integer ``counts`` and the
    normalized rows ``norm_hist`` filled in.
    """
    bins = np.asarray(bins)
    if bins.shape != partition.shape + (4,):
        raise ValueError("bins shape does not match partition")
    flat_el = partition.element_map.ravel().astype(np.int64)
    combined = flat_el[:, None] * layout.total + bins.reshape(-1, 4)
    counts = np.bincount(
        combined.ravel(), minlength=partition.n_elements * layout.total
    ).reshape(partition.n_elements, layout.total).astype(np.int64)
    norm = counts.astype(np.float64) / partition.el_n[:, None]
    return replace(partition, layout=layout, counts=counts, norm_hist=norm)


# ---------------------------------------------------------------------------
# proximity and narrowband


def narrowband(mask: np.ndarray, radius: int) -> np.ndarray:
    """Pixels outside ``mask`` within Chebyshev distance ``radius`` of it.

    The band is clipped to the image lattice. ``mask`` is a 2-D boolean
    array; the result has the same shape.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError("mask must be 2-D")
    if radius < 1:
        raise ValueError("radius must be >= 1")
    side = 2 * radius + 1
    dilated = ndimage.maximum_filter(mask.astype(np.uint8), size=side, mode="constant", cval=0)
    return (dilated > 0) & ~mask


def element_proximity(partition: ElementPartition, radius: int = 10) -> tuple[np.ndarray, ...]:
    """For each element, the ids of other elements within Chebyshev ``radius``.

    Element f is near element e when some pixel of f lies within Chebyshev
    distance ``radius`` of some pixel of e; the relation is symmetric and
    excludes the element itself. The union of an arbitrary part's proximity
    sets minus its members is exactly the part's narrowband at element
    granularity.
    """
    h, w = partition.shape
    out: list[np.ndarray] = []
    emap = partition.element_map
    for e in range(partition.n_elements):
        flat = partition.pixel_index[e]
        ys, xs = np.divmod(flat, w)
        y0 = max(0, int(ys.min()) - radius)
        y1 = min(h, int(ys.max()) + radius + 1)
        x0 = max(0, int(xs.min()) - radius)
        x1 = min(w, int(xs.max()) + radius + 1)
        crop = emap[y0:y1, x0:x1]
        band = narrowband(crop == e, radius)
        near = np.unique(crop[band])
        out.append(near[near != e].astype(np.int32))
    return tuple(out)


def centroid_of(flat_index: np.ndarray, width: int) -> np.ndarray:
    """Mean (x, y) of a set of flat row-major pixel indices."""
    ys, xs = np.divmod(np.asarray(flat_index, dtype=np.int64), width)
    return np.array([xs.mean(), ys.mean()], dtype=np.float64)
