"""Scene-model types, potential functions, and energy evaluation.

A scene is described by a :class:`SceneGraph` (class-typed part nodes plus
adjacency edges) and a :class:`Configuration` assigning every superpixel
element to exactly one part. The energy of a configuration is the sum of
weighted unary terms (appearance, shape, location) over parts and weighted
binary terms (distance, angle) over edges; lower is better.

Conventions used throughout:

* pixel coordinates are (x, y) = (column, row); ``image_shape`` is (H, W);
* normalized positions divide x by the width and y by the height;
* pairwise distances are normalized by the image diagonal ``||(W, H)||``;
* part histograms are exact integer bin counts normalized at evaluation
  time, so incremental bookkeeping never drifts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import i0e

from .histograms import BinLayout
from .superpixels import ElementPartition
from .textons import TextonCodebook

__all__ = [
    "SIM_EPS",
    "SHAPE_LOG_EPS",
    "SHAPE_CELLS",
    "Weights",
    "ClassModel",
    "PairwiseModel",
    "ClassModels",
    "SceneGraph",
    "GraphSpecError",
    "parse_graph_spec",
    "format_graph_spec",
    "Part",
    "Move",
    "Configuration",
    "EnergyBreakdown",
    "hist_intersection",
    "von_mises_density",
    "von_mises_log_density",
    "appearance_potential",
    "resample_support",
    "shape_potential",
    "shape_potential_from_map",
    "mahalanobis_sq",
    "location_potential",
    "distance_potential",
    "angle_potential",
    "unary",
    "binary",
    "total_energy",
    "delta_energy",
]

SIM_EPS = 1e-6  # floor for histogram similarities used in ratios
SHAPE_LOG_EPS = 1e-12  # additive guard inside the shape log
SHAPE_CELLS = 201  # normalized shape frame is SHAPE_CELLS x SHAPE_CELLS
_SHAPE_HALF = (SHAPE_CELLS - 1) // 2
_SHAPE_AREA = float(SHAPE_CELLS * SHAPE_CELLS)
_SHAPE_OFFS = (np.arange(SHAPE_CELLS, dtype=np.float64) - _SHAPE_HALF) / _SHAPE_HALF


def hist_intersection(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection similarity of two concatenated histogram vectors."""
    return float(np.minimum(a, b).sum())


# ---------------------------------------------------------------------------
# model containers


@dataclass(frozen=True)
class Weights:
    """Convex combination coefficients over the five potentials."""

    appearance: float
    shape: float
    location: float
    distance: float
    angle: float

    def __post_init__(self):
        vals = self.as_array()
        if (vals < 0).any():
            raise ValueError("weights must be nonnegative")
        if abs(float(vals.sum()) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {vals.sum()!r}")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.appearance, self.shape, self.location, self.distance, self.angle],
            dtype=np.float64,
        )

    @classmethod
    def from_array(cls, arr) -> "Weights":
        a = np.asarray(arr, dtype=np.float64)
        if a.shape != (5,):
            raise ValueError("expected 5 weights")
        return cls(*(float(v) for v in a))

    @classmethod
    def uniform(cls) -> "Weights":
        return cls(0.2, 0.2, 0.2, 0.2, 0.2)


@dataclass(frozen=True)
class ClassModel:
    """Learned unary parameters of one class."""

    name: str
    fg_hist: np.ndarray  # (bins,) normalized quad histogram
    band_hist: np.ndarray  # (bins,) normalized narrowband histogram
    shape_map: np.ndarray  # (201, 201) coverage probabilities in [0, 1]
    loc_mean: np.ndarray  # (2,) normalized (x, y)
    loc_cov: np.ndarray  # (2, 2) SPD

    # derived, filled in __post_init__
    loc_prec: np.ndarray = field(init=False, repr=False, compare=False)
    shape_sq: np.ndarray = field(init=False, repr=False, compare=False)
    shape_comp_sq: np.ndarray = field(init=False, repr=False, compare=False)
    shape_comp_sq_sum: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("fg_hist", "band_hist", "shape_map", "loc_mean", "loc_cov"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.shape_map.shape != (SHAPE_CELLS, SHAPE_CELLS):
            raise ValueError("shape map must be 201x201")
        object.__setattr__(self, "loc_prec", np.linalg.inv(self.loc_cov))
        object.__setattr__(self, "shape_sq", self.shape_map**2)
        comp = (1.0 - self.shape_map) ** 2
        object.__setattr__(self, "shape_comp_sq", comp)
        object.__setattr__(self, "shape_comp_sq_sum", float(comp.sum()))


@dataclass(frozen=True)
class PairwiseModel:
    """Learned binary parameters for one ordered class pair."""

    dist_mean: float
    dist_var: float
    angle_mean: float
    angle_kappa: float
    n_samples: int


@dataclass(frozen=True)
class ClassModels:
    """All learned parameters: per-class unaries, pairwise models, codebook.

    ``class_models[z]`` is None for classes absent from training. Unseen
    ordered class pairs fall back to the pooled distance Gaussian and a
    uniform angle (kappa = 0).
    """

    layout: BinLayout
    band_radius: int
    class_names: tuple[str, ...]
    class_models: tuple[ClassModel | None, ...]
    pairwise: dict[tuple[int, int], PairwiseModel]
    pooled_distance: tuple[float, float]  # (mean, var)
    codebook: TextonCodebook
    weights: Weights
    version: int = 1

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def require_class(self, z: int) -> ClassModel:
        if not 0 <= z < self.n_classes or self.class_models[z] is None:
            raise KeyError(f"class {z} not present in the learned models")
        return self.class_models[z]

    def class_index(self, name: str) -> int:
        try:
            return self.class_names.index(name)
        except ValueError:
            raise KeyError(f"unknown class name {name!r}") from None

    def pair_params(self, z_i: int, z_j: int) -> tuple[float, float, float, float]:
        """(dist_mean, dist_var, angle_mean, angle_kappa) with fallback."""
        pm = self.pairwise.get((z_i, z_j))
        if pm is not None:
            return pm.dist_mean, pm.dist_var, pm.angle_mean, pm.angle_kappa
        mean, var = self.pooled_distance
        return mean, var, 0.0, 0.0


# ---------------------------------------------------------------------------
# scene graph


class GraphSpecError(ValueError):
    """Raised for malformed graph spec files."""


@dataclass(frozen=True)
class SceneGraph:
    """Class-typed part nodes plus undirected adjacency edges.

    Edges are canonicalized to (i, j) with i < j, deduplicated, and sorted.
    """

    node_classes: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    incident: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.node_classes)
        if n < 1:
            raise ValueError("graph needs at least one node")
        if any(z < 0 for z in self.node_classes):
            raise ValueError("negative class index")
        canon = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-edge on node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i},{j}) references a missing node")
            canon.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(canon)))
        incident: list[list[int]] = [[] for _ in range(n)]
        for e, (i, j) in enumerate(self.edges):
            incident[i].append(e)
            incident[j].append(e)
        object.__setattr__(self, "incident", tuple(tuple(v) for v in incident))

    @property
    def n_parts(self) -> int:
        return len(self.node_classes)


def parse_graph_spec(text: str, class_names: tuple[str, ...]) -> SceneGraph:
    """Parse a graph spec: ``nodes: a,b,...`` then ``edge: i j`` lines."""
    nodes: list[int] | None = None
    edges: list[tuple[int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("nodes:"):
            if nodes is not None:
                raise GraphSpecError(f"line {lineno}: duplicate nodes line")
            names = [t.strip() for t in line[len("nodes:") :].split(",")]
            if not names or any(not t for t in names):
                raise GraphSpecError(f"line {lineno}: empty class name in nodes list")
            nodes = []
            for t in names:
                if t not in class_names:
                    raise GraphSpecError(f"line {lineno}: unknown class {t!r}")
                nodes.append(class_names.index(t))
        elif line.startswith("edge:"):
            if nodes is None:
                raise GraphSpecError(f"line {lineno}: edge before nodes line")
            fields = line[len("edge:") :].split()
            if len(fields) != 2:
                raise GraphSpecError(f"line {lineno}: expected 'edge: <i> <j>'")
            try:
                i, j = int(fields[0]), int(fields[1])
            except ValueError:
                raise GraphSpecError(f"line {lineno}: non-integer edge endpoint") from None
            edges.append((i, j))
        else:
            raise GraphSpecError(f"line {lineno}: unrecognized line {line!r}")
    if nodes is None:
        raise GraphSpecError("missing nodes line")
    try:
        return SceneGraph(tuple(nodes), tuple(edges))
    except ValueError as exc:
        raise GraphSpecError(str(exc)) from None


def format_graph_spec(graph: SceneGraph, class_names: tuple[str, ...]) -> str:
    lines = ["nodes: " + ",".join(class_names[z] for z in graph.node_classes)]
    lines += [f"edge: {i} {j}" for i, j in graph.edges]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# part view and potentials


@dataclass
class Part:
    """Evaluation view of one part: class, stats, and pixel support."""

    z: int
    n_pixels: int
    hist: np.ndarray  # (bins,) normalized
    band_hist: np.ndarray | None  # None when the narrowband is empty
    centroid: np.ndarray  # (2,) pixel coords (x, y)
    support: np.ndarray  # (H, W) uint8 binary map


def appearance_potential(part: Part, models: ClassModels) -> float:
    """Appearance mismatch of a part under its class model.

    Ratio of cross similarities (class-foreground vs part-band and
    class-band vs part-foreground) to matched similarities, scaled by 1/4;
    0 for a perfect fit. An empty narrowband contributes the floor value
    on both of its similarities.
    """
    cm = models.require_class(part.z)
    d_fg_part = hist_intersection(cm.fg_hist, part.hist)
    d_band_part = hist_intersection(cm.band_hist, part.hist)
    if part.band_hist is None:
        d_fg_band = SIM_EPS
        d_band_band = SIM_EPS
    else:
        d_fg_band = hist_intersection(cm.fg_hist, part.band_hist)
        d_band_band = hist_intersection(cm.band_hist, part.band_hist)
    num = d_fg_band * d_band_part
    den = max(d_fg_part, SIM_EPS) * max(d_band_band, SIM_EPS)
    return 0.25 * num / den


def resample_support(support: np.ndarray, centroid: np.ndarray) -> np.ndarray:
    """Resample a binary support map into the normalized 201x201 frame.

    Cell (v, u) looks up the pixel nearest to
    ``centroid + ((u - 100)/100 * W, (v - 100)/100 * H)``; cells mapping
    outside the image count as 0.
    """
    h, w = support.shape
    px = np.rint(centroid[0] + _SHAPE_OFFS * w).astype(np.int64)
    py = np.rint(centroid[1] + _SHAPE_OFFS * h).astype(np.int64)
    ok_x = (px >= 0) & (px < w)
    ok_y = (py >= 0) & (py < h)
    # the out-of-range mask is separable, so gather rows then columns and
    # zero whole lines instead of pairing the index arrays
    rows = support[np.clip(py, 0, h - 1)]
    out = rows[:, np.clip(px, 0, w - 1)].astype(np.float64)
    out[~ok_y] = 0.0
    out[:, ~ok_x] = 0.0
    return out


def shape_potential_from_map(resampled: np.ndarray, shape_map: np.ndarray) -> float:
    """Shape potential given an already-resampled binary map.

    -log of the (scaled) sum of two Frobenius norms: support weighted by
    the class coverage map, and the complement weighted by the complement
    map. Low when the part's footprint matches where the class usually is.
    """
    b = np.asarray(resampled, dtype=np.float64)
    s = np.asarray(shape_map, dtype=np.float64)
    n1 = np.sqrt(((b * s) ** 2).sum())
    n2 = np.sqrt((((1.0 - b) * (1.0 - s)) ** 2).sum())
    return float(-np.log((n1 + n2) / _SHAPE_AREA + SHAPE_LOG_EPS))


def shape_potential(part: Part, models: ClassModels) -> float:
    """Shape potential of a part (resample + class-map norms, optimized)."""
    cm = models.require_class(part.z)
    b = resample_support(part.support, part.centroid)
    flat = b.ravel()
    n1 = np.sqrt(np.dot(cm.shape_sq.ravel(), flat))
    n2sq = cm.shape_comp_sq_sum - np.dot(cm.shape_comp_sq.ravel(), flat)
    n2 = np.sqrt(max(n2sq, 0.0))
    return float(-np.log((n1 + n2) / _SHAPE_AREA + SHAPE_LOG_EPS))


def mahalanobis_sq(x: np.ndarray, mean: np.ndarray, prec: np.ndarray) -> float:
    d = np.asarray(x, dtype=np.float64) - mean
    return float(d @ prec @ d)


def location_potential(
    centroid: np.ndarray, z: int, models: ClassModels, image_shape: tuple[int, int]
) -> float:
    """Squared Mahalanobis distance of the normalized centroid to the class."""
    cm = models.require_class(z)
    h, w = image_shape
    pos = np.array([centroid[0] / w, centroid[1] / h], dtype=np.float64)
    return mahalanobis_sq(pos, cm.loc_mean, cm.loc_prec)


def distance_potential(
    mu_i: np.ndarray,
    mu_j: np.ndarray,
    classes: tuple[int, int],
    models: ClassModels,
    image_shape: tuple[int, int],
) -> float:
    """Squared deviation of the diagonal-normalized centroid distance."""
    h, w = image_shape
    diag = float(np.hypot(w, h))
    v = float(np.hypot(mu_i[0] - mu_j[0], mu_i[1] - mu_j[1])) / diag
    mean, var, _, _ = models.pair_params(*classes)
    return (v - mean) ** 2 / var


def von_mises_log_density(r, omega: float, kappa: float):
    """Log density of the von Mises distribution (stable for large kappa)."""
    r = np.asarray(r, dtype=np.float64)
    # log I0(k) = k + log(i0e(k)); i0e is the exponentially scaled Bessel.
    log_norm = np.log(2.0 * np.pi) + kappa + np.log(i0e(kappa))
    return kappa * np.cos(r - omega) - log_norm


def von_mises_density(r, omega: float, kappa: float):
    return np.exp(von_mises_log_density(r, omega, kappa))


def angle_potential(
    mu_i: np.ndarray, mu_j: np.ndarray, classes: tuple[int, int], models: ClassModels
) -> float:
    """Negative log von Mises density of the i-relative-to-j direction."""
    r = float(np.arctan2(mu_i[1] - mu_j[1], mu_i[0] - mu_j[0]))
    _, _, omega, kappa = models.pair_params(*classes)
    return float(-von_mises_log_density(r, omega, kappa))


def unary(part: Part, models: ClassModels, weights: Weights) -> float:
    """Weighted unary energy of one part."""
    value = 0.0
    if weights.appearance != 0.0:
        value += weights.appearance * appearance_potential(part, models)
    if weights.shape != 0.0:
        value += weights.shape * shape_potential(part, models)
    if weights.location != 0.0:
        value += weights.location * location_potential(
            part.centroid, part.z, models, part.support.shape
        )
    return value


def binary(
    mu_i: np.ndarray,
    mu_j: np.ndarray,
    classes: tuple[int, int],
    models: ClassModels,
    weights: Weights,
    image_shape: tuple[int, int],
) -> float:
    """Weighted binary energy of one edge (ordered by node index)."""
    value = 0.0
    if weights.distance != 0.0:
        value += weights.distance * distance_potential(mu_i, mu_j, classes, models, image_shape)
    if weights.angle != 0.0:
        value += weights.angle * angle_potential(mu_i, mu_j, classes, models)
    return value


# ---------------------------------------------------------------------------
# configuration with exact incremental bookkeeping

_ZOBRIST_SEED = 0x5CE9E0A7  # fixed: part content hashes must agree across runs


@dataclass
class Move:
    """One proposed element move with its proposal probabilities."""

    element: int
    src: int
    dst: int
    q_f: float = 0.0
    q_r: float = 0.0


class Configuration:
    """Assignment of every element to a part, with incremental part stats.

    Mutable and single-writer: one chain owns and mutates it through
    :meth:`apply_move`. All derived statistics (pixel counts, coordinate
    sums, histogram counts, narrowband membership counters) are integers
    or exact integer-valued floats, so incremental updates match a from-
    scratch rebuild bit for bit (see :meth:`audit`).

    The narrowband of part p is the set of elements outside p with at
    least one pixel within the proximity radius of p's support; it is
    tracked via ``prox_count[p, e]`` = number of members of p in e's
    proximity list.
    """

    def __init__(
        self,
        partition: ElementPartition,
        graph: SceneGraph,
        assign: np.ndarray,
        prox: tuple[np.ndarray, ...],
    ):
        if partition.counts is None or partition.norm_hist is None:
            raise ValueError("partition lacks attached features")
        assign = np.asarray(assign, dtype=np.int32).copy()
        if assign.shape != (partition.n_elements,):
            raise ValueError("assignment length does not match partition")
        n = graph.n_parts
        if assign.min() < 0 or assign.max() >= n:
            raise ValueError("assignment references a missing part")
        self.partition = partition
        self.graph = graph
        self.prox = prox
        self.assign = assign
        e = partition.n_elements
        h, w = partition.shape
        bins = partition.counts.shape[1]

        self.elements: list[set[int]] = [set() for _ in range(n)]
        for lam in range(e):
            self.elements[int(assign[lam])].add(lam)
        if any(not s for s in self.elements):
            raise ValueError("every part must own at least one element")

        self.n_pix = np.zeros(n, dtype=np.int64)
        self.coord_sum = np.zeros((n, 2), dtype=np.float64)
        self.counts = np.zeros((n, bins), dtype=np.int64)
        self.support = np.zeros((n, h, w), dtype=np.uint8)
        np.add.at(self.n_pix, assign, partition.el_n)
        np.add.at(self.coord_sum, assign, partition.el_coord_sum)
        np.add.at(self.counts, assign, partition.counts)
        for lam in range(e):
            self.support[int(assign[lam])].ravel()[partition.pixel_index[lam]] = 1

        self.prox_count = np.zeros((n, e), dtype=np.int32)
        for lam in range(e):
            self.prox_count[int(assign[lam]), prox[lam]] += 1
        self.band_counts = np.zeros((n, bins), dtype=np.int64)
        self.band_n = np.zeros(n, dtype=np.int64)
        for p in range(n):
            members = np.flatnonzero((self.prox_count[p] >= 1) & (assign != p))
            if members.size:
                self.band_counts[p] = partition.counts[members].sum(axis=0)
                self.band_n[p] = partition.el_n[members].sum()

        rng = np.random.Generator(np.random.PCG64(_ZOBRIST_SEED))
        self._zobrist = rng.integers(0, 2**64, size=(e, 2), dtype=np.uint64)
        self.part_hash = np.zeros((n, 2), dtype=np.uint64)
        for lam in range(e):
            self.part_hash[int(assign[lam])] ^= self._zobrist[lam]

    # -- views --------------------------------------------------------------

    @property
    def n_parts(self) -> int:
        return self.graph.n_parts

    @property
    def image_shape(self) -> tuple[int, int]:
        return self.partition.shape

    def part_view(self, i: int) -> Part:
        n = int(self.n_pix[i])
        band_n = int(self.band_n[i])
        return Part(
            z=self.graph.node_classes[i],
            n_pixels=n,
            hist=self.counts[i] / n,
            band_hist=(self.band_counts[i] / band_n) if band_n > 0 else None,
            centroid=self.coord_sum[i] / n,
            support=self.support[i],
        )

    def part_key(self, i: int) -> tuple:
        """Memoization key identifying part i's class and exact content."""
        return (
            self.graph.node_classes[i],
            int(self.n_pix[i]),
            int(self.part_hash[i, 0]),
            int(self.part_hash[i, 1]),
        )

    def key(self) -> bytes:
        return self.assign.tobytes()

    def labels_per_pixel(self) -> np.ndarray:
        """Label map: each pixel takes its element's part's class."""
        classes = np.fromiter(
            (self.graph.node_classes[int(p)] for p in self.assign),
            dtype=np.int16,
            count=self.assign.size,
        )
        return classes[self.partition.element_map]

    # -- moves --------------------------------------------------------------

    def _band_shift(self, lam: int, src: int, dst: int):
        """Band membership changes if element lam moved src -> dst."""
        pl = self.prox[lam]
        asg = self.assign[pl]
        leave_src = pl[(self.prox_count[src, pl] == 1) & (asg != src)]
        enter_dst = pl[(self.prox_count[dst, pl] == 0) & (asg != dst)]
        lam_enters_src = bool(self.prox_count[src, lam] >= 1)
        lam_leaves_dst = bool(self.prox_count[dst, lam] >= 1)
        return leave_src, lam_enters_src, enter_dst, lam_leaves_dst

    def peek_move(self, lam: int, dst: int) -> tuple[Part, Part]:
        """Part views of source and destination as they would be after
        moving element ``lam`` to part ``dst``, without mutating."""
        src = int(self.assign[lam])
        self._check_move(lam, src, dst)
        part = self.partition
        ec = part.counts[lam]
        en = int(part.el_n[lam])
        leave_src, lam_enters_src, enter_dst, lam_leaves_dst = self._band_shift(lam, src, dst)

        new_counts_src = self.counts[src] - ec
        new_counts_dst = self.counts[dst] + ec
        n_src = int(self.n_pix[src]) - en
        n_dst = int(self.n_pix[dst]) + en
        cen_src = (self.coord_sum[src] - part.el_coord_sum[lam]) / n_src
        cen_dst = (self.coord_sum[dst] + part.el_coord_sum[lam]) / n_dst

        band_c_src = self.band_counts[src] - part.counts[leave_src].sum(axis=0, dtype=np.int64)
        band_n_src = int(self.band_n[src]) - int(part.el_n[leave_src].sum())
        if lam_enters_src:
            band_c_src = band_c_src + ec
            band_n_src += en
        band_c_dst = self.band_counts[dst] + part.counts[enter_dst].sum(axis=0, dtype=np.int64)
        band_n_dst = int(self.band_n[dst]) + int(part.el_n[enter_dst].sum())
        if lam_leaves_dst:
            band_c_dst = band_c_dst - ec
            band_n_dst -= en

        sup_src = self.support[src].copy()
        sup_src.ravel()[part.pixel_index[lam]] = 0
        sup_dst = self.support[dst].copy()
        sup_dst.ravel()[part.pixel_index[lam]] = 1

        zs = self.graph.node_classes
        p_src = Part(zs[src], n_src, new_counts_src / n_src,
                     (band_c_src / band_n_src) if band_n_src > 0 else None, cen_src, sup_src)
        p_dst = Part(zs[dst], n_dst, new_counts_dst / n_dst,
                     (band_c_dst / band_n_dst) if band_n_dst > 0 else None, cen_dst, sup_dst)
        return p_src, p_dst

    def peek_part_keys(self, lam: int, dst: int) -> tuple[tuple, tuple]:
        """Post-move memo keys of (src, dst) without mutating."""
        src = int(self.assign[lam])
        z = self.graph.node_classes
        zb = self._zobrist[lam]
        hs = self.part_hash[src] ^ zb
        hd = self.part_hash[dst] ^ zb
        en = int(self.partition.el_n[lam])
        return (
            (z[src], int(self.n_pix[src]) - en, int(hs[0]), int(hs[1])),
            (z[dst], int(self.n_pix[dst]) + en, int(hd[0]), int(hd[1])),
        )

    def _check_move(self, lam: int, src: int, dst: int) -> None:
        if src == dst:
            raise ValueError("move must change the part")
        if len(self.elements[src]) < 2:
            raise ValueError("move would empty its source part")

    def apply_move(self, lam: int, dst: int) -> None:
        """Commit a move; all updates are exact integer arithmetic."""
        src = int(self.assign[lam])
        self._check_move(lam, src, dst)
        part = self.partition
        leave_src, lam_enters_src, enter_dst, lam_leaves_dst = self._band_shift(lam, src, dst)

        pl = self.prox[lam]
        self.prox_count[src, pl] -= 1
        self.prox_count[dst, pl] += 1

        ec = part.counts[lam]
        en = int(part.el_n[lam])
        self.counts[src] -= ec
        self.counts[dst] += ec
        self.n_pix[src] -= en
        self.n_pix[dst] += en
        self.coord_sum[src] -= part.el_coord_sum[lam]
        self.coord_sum[dst] += part.el_coord_sum[lam]
        self.support[src].ravel()[part.pixel_index[lam]] = 0
        self.support[dst].ravel()[part.pixel_index[lam]] = 1
        self.elements[src].discard(lam)
        self.elements[dst].add(lam)
        self.assign[lam] = dst
        self.part_hash[src] ^= self._zobrist[lam]
        self.part_hash[dst] ^= self._zobrist[lam]

        if leave_src.size:
            self.band_counts[src] -= part.counts[leave_src].sum(axis=0, dtype=np.int64)
            self.band_n[src] -= int(part.el_n[leave_src].sum())
        if lam_enters_src:
            self.band_counts[src] += ec
            self.band_n[src] += en
        if enter_dst.size:
            self.band_counts[dst] += part.counts[enter_dst].sum(axis=0, dtype=np.int64)
            self.band_n[dst] += int(part.el_n[enter_dst].sum())
        if lam_leaves_dst:
            self.band_counts[dst] -= ec
            self.band_n[dst] -= en

    def copy(self) -> "Configuration":
        new = object.__new__(Configuration)
        new.partition = self.partition
        new.graph = self.graph
        new.prox = self.prox
        new.assign = self.assign.copy()
        new.elements = [set(s) for s in self.elements]
        new.n_pix = self.n_pix.copy()
        new.coord_sum = self.coord_sum.copy()
        new.counts = self.counts.copy()
        new.support = self.support.copy()
        new.prox_count = self.prox_count.copy()
        new.band_counts = self.band_counts.copy()
        new.band_n = self.band_n.copy()
        new._zobrist = self._zobrist
        new.part_hash = self.part_hash.copy()
        return new

    def audit(self) -> None:
        """Rebuild from the assignment and require exact agreement."""
        fresh = Configuration(self.partition, self.graph, self.assign, self.prox)
        checks = (
            ("n_pix", self.n_pix, fresh.n_pix),
            ("coord_sum", self.coord_sum, fresh.coord_sum),
            ("counts", self.counts, fresh.counts),
            ("band_counts", self.band_counts, fresh.band_counts),
            ("band_n", self.band_n, fresh.band_n),
            ("prox_count", self.prox_count, fresh.prox_count),
            ("support", self.support, fresh.support),
            ("part_hash", self.part_hash, fresh.part_hash),
        )
        for name, ours, theirs in checks:
            if not np.array_equal(ours, theirs):
                raise RuntimeError(f"incremental state drifted from rebuild: {name}")


# ---------------------------------------------------------------------------
# energy


@dataclass(frozen=True)
class EnergyBreakdown:
    """Per-term energies of a configuration plus the weighted total."""

    appearance: np.ndarray  # (n_parts,)
    shape: np.ndarray  # (n_parts,)
    location: np.ndarray  # (n_parts,)
    distance: np.ndarray  # (n_edges,)
    angle: np.ndarray  # (n_edges,)
    weights: Weights
    total: float

    @classmethod
    def compute(cls, config: Configuration, models: ClassModels, weights: Weights):
        n = config.n_parts
        parts = [config.part_view(i) for i in range(n)]
        app = np.array([appearance_potential(p, models) for p in parts])
        shp = np.array([shape_potential(p, models) for p in parts])
        loc = np.array(
            [
                location_potential(p.centroid, p.z, models, config.image_shape)
                for p in parts
            ]
        )
        dists, angs = [], []
        zs = config.graph.node_classes
        for i, j in config.graph.edges:
            mi, mj = parts[i].centroid, parts[j].centroid
            dists.append(distance_potential(mi, mj, (zs[i], zs[j]), models, config.image_shape))
            angs.append(angle_potential(mi, mj, (zs[i], zs[j]), models))
        dist = np.array(dists) if dists else np.zeros(0)
        ang = np.array(angs) if angs else np.zeros(0)
        total = (
            weights.appearance * app.sum()
            + weights.shape * shp.sum()
            + weights.location * loc.sum()
            + weights.distance * dist.sum()
            + weights.angle * ang.sum()
        )
        return cls(app, shp, loc, dist, ang, weights, float(total))


def total_energy(config: Configuration, models: ClassModels, weights: Weights) -> EnergyBreakdown:
    """Energy of a configuration: weighted unaries plus weighted edge terms."""
    return EnergyBreakdown.compute(config, models, weights)


def _edge_term(
    config: Configuration,
    edge: tuple[int, int],
    centroids: dict[int, np.ndarray],
    models: ClassModels,
    weights: Weights,
) -> float:
    i, j = edge
    zs = config.graph.node_classes
    mi = centroids.get(i)
    if mi is None:
        mi = config.coord_sum[i] / config.n_pix[i]
    mj = centroids.get(j)
    if mj is None:
        mj = config.coord_sum[j] / config.n_pix[j]
    return binary(mi, mj, (zs[i], zs[j]), models, weights, config.image_shape)


def delta_energy(
    config: Configuration, move: Move, models: ClassModels, weights: Weights
) -> float:
    """Energy change of a move, recomputing only terms touching its parts.

    Exactly the unaries of the source and destination parts and the binary
    terms of edges incident to either can change; everything else is
    untouched by construction (other parts' contents, centroids, and
    narrowbands do not depend on where this element sits, as long as it is
    in neither of them).
    """
    lam, a, b = move.element, move.src, move.dst
    if int(config.assign[lam]) != a:
        raise ValueError("move source does not match the configuration")
    config._check_move(lam, a, b)
    old_a = unary(config.part_view(a), models, weights)
    old_b = unary(config.part_view(b), models, weights)
    edge_ids = sorted(set(config.graph.incident[a]) | set(config.graph.incident[b]))
    old_edges = sum(
        _edge_term(config, config.graph.edges[e], {}, models, weights) for e in edge_ids
    )
    new_part_a, new_part_b = config.peek_move(lam, b)
    new_a = unary(new_part_a, models, weights)
    new_b = unary(new_part_b, models, weights)
    new_cent = {a: new_part_a.centroid, b: new_part_b.centroid}
    new_edges = sum(
        _edge_term(config, config.graph.edges[e], new_cent, models, weights) for e in edge_ids
    )
    return (new_a + new_b + new_edges) - (old_a + old_b + old_edges)
