"""MAP labeling by Metropolis-Hastings under simulated annealing.

The sampler walks over configurations by moving one superpixel element
between parts per step. Proposals are a mixture: pick a part uniformly
among those with any usable candidate, then either eject one of its
boundary members (weighted toward elements that resemble the part's
narrowband more than its interior) or pull in an adjacent outside element
(weighted the opposite way). Because the move set and weights depend on
the current configuration, acceptance applies the full Hastings
correction with the reverse-proposal probability; moves whose reverse is
unproposable are rejected outright.

Temperatures follow a data-adaptive schedule: a short all-accepted walk
estimates the typical move magnitude rho, and iteration t runs at
``T_t = -rho / ln(gamma_t)`` with gamma linearly spaced from 0.9 to 0.1.

Two step engines implement the same law: a lazy one that rebuilds
proposal tables every step, and a cached one (small instances) that
enumerates each visited state's full transition table once and reuses it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    ClassModels,
    Configuration,
    Move,
    SceneGraph,
    SIM_EPS,
    Weights,
    binary,
    total_energy,
    unary,
)
from .superpixels import ElementPartition, element_proximity

__all__ = [
    "ChainState",
    "Chain",
    "AnnealResult",
    "Schedule",
    "initialize",
    "propose",
    "acceptance",
    "transition_table",
    "estimate_rho",
    "make_schedule",
    "anneal",
    "sample_fixed",
    "configuration_to_labelmap",
    "write_trace",
    "DEFAULT_ITER_MULTIPLIER",
    "TABLE_MODE_MAX_ELEMENTS",
]

DEFAULT_ITER_MULTIPLIER = 200  # default steps = multiplier * n_elements
TABLE_MODE_MAX_ELEMENTS = 32  # at most this many elements: cache per-state tables
RHO_SAMPLES = 200  # all-accepted proposals used to estimate rho
RHO_FLOOR = 1e-9
GAMMA_START = 0.9
GAMMA_END = 0.1
_MEMO_CAP = 500_000


# ---------------------------------------------------------------------------
# initialization


def initialize(
    partition: ElementPartition, graph: SceneGraph, models: ClassModels
) -> Configuration:
    """Greedy start: each element joins its best part by appearance and
    location score; empty parts then claim their best-scoring element from
    parts that can spare one (ties resolved toward lower indexes)."""
    if partition.norm_hist is None:
        raise ValueError("partition lacks attached features")
    n = graph.n_parts
    n_el = partition.n_elements
    if n > n_el:
        raise ValueError(f"graph has {n} parts but the image has {n_el} elements")
    el_hist = partition.norm_hist
    cents = partition.centroids
    h, w = partition.shape
    pos = cents / np.array([w, h], dtype=np.float64)

    score = np.empty((n_el, n), dtype=np.float64)
    for i, z in enumerate(graph.node_classes):
        cm = models.require_class(z)
        sim = np.minimum(el_hist, cm.fg_hist[None, :]).sum(axis=1)
        app = -np.log(np.maximum(sim, SIM_EPS) / 4.0)
        d = pos - cm.loc_mean[None, :]
        loc = np.einsum("ej,jk,ek->e", d, cm.loc_prec, d)
        score[:, i] = app + loc

    assign = score.argmin(axis=1).astype(np.int32)
    sizes = np.bincount(assign, minlength=n)
    for i in range(n):
        if sizes[i] > 0:
            continue
        best_lam = -1
        best_score = np.inf
        for lam in range(n_el):
            if sizes[assign[lam]] < 2:
                continue
            if score[lam, i] < best_score:
                best_score = score[lam, i]
                best_lam = lam
        if best_lam < 0:
            raise ValueError("cannot seed every part with an element")
        sizes[assign[best_lam]] -= 1
        assign[best_lam] = i
        sizes[i] += 1

    prox = element_proximity(partition, radius=models.band_radius)
    return Configuration(partition, graph, assign, prox)


def configuration_to_labelmap(config: Configuration) -> np.ndarray:
    """Per-pixel class labels induced by a configuration."""
    return config.labels_per_pixel()


# ---------------------------------------------------------------------------
# proposal tables


@dataclass
class _PartTable:
    cands: np.ndarray  # element ids, inside block first, each block sorted
    weights: np.ndarray
    inside: np.ndarray  # bool per candidate
    cum: np.ndarray
    z_total: float


@dataclass
class _ProposalState:
    tables: list
    proposable: np.ndarray  # sorted part ids with a nonempty table

    @property
    def m(self) -> int:
        return len(self.proposable)


class ChainState:
    """A configuration bound to models and weights, with cached energy.

    ``unary_terms`` and ``edge_terms`` hold the weighted contribution of
    every part and edge; the stored total is always recomputed as their
    sum, so accepting moves never accumulates floating-point drift.
    """

    def __init__(self, config: Configuration, models: ClassModels, weights: Weights):
        self.config = config
        self.models = models
        self.weights = weights
        self._memo: dict[tuple, float] = {}
        part = config.partition
        deg = np.fromiter((a.size for a in part.adjacency), dtype=np.int64, count=part.n_elements)
        self._adj_src = np.repeat(np.arange(part.n_elements, dtype=np.int32), deg)
        self._adj_dst = (
            np.concatenate(part.adjacency)
            if part.n_elements and deg.sum() > 0
            else np.zeros(0, dtype=np.int32)
        )
        n = config.n_parts
        self.unary_terms = np.array(
            [self._unary_of(i) for i in range(n)], dtype=np.float64
        )
        self.edge_terms = np.array(
            [self._edge_of(e) for e in range(len(config.graph.edges))], dtype=np.float64
        )
        self.energy = float(self.unary_terms.sum() + self.edge_terms.sum())

    # -- cached term evaluation ---------------------------------------------

    def _unary_of(self, i: int) -> float:
        key = self.config.part_key(i)
        val = self._memo.get(key)
        if val is None:
            val = unary(self.config.part_view(i), self.models, self.weights)
            if len(self._memo) >= _MEMO_CAP:
                self._memo.clear()
            self._memo[key] = val
        return val

    def _edge_of(self, e: int, centroids: dict | None = None) -> float:
        config = self.config
        i, j = config.graph.edges[e]
        cen = centroids or {}
        mi = cen.get(i)
        if mi is None:
            mi = config.coord_sum[i] / config.n_pix[i]
        mj = cen.get(j)
        if mj is None:
            mj = config.coord_sum[j] / config.n_pix[j]
        zs = config.graph.node_classes
        return binary(mi, mj, (zs[i], zs[j]), self.models, self.weights, config.image_shape)

    def move_terms(self, lam: int, dst: int):
        """Old and new weighted terms touched by moving ``lam`` to ``dst``.

        Returns (dh, new_ua, new_ub, new_edge_vals, edge_ids, src).
        """
        config = self.config
        src = int(config.assign[lam])
        old_ua = self._unary_of(src)
        old_ub = self._unary_of(dst)
        edge_ids = sorted(set(config.graph.incident[src]) | set(config.graph.incident[dst]))
        old_edges = [self._edge_of(e) for e in edge_ids]

        key_a, key_b = config.peek_part_keys(lam, dst)
        new_ua = self._memo.get(key_a)
        new_ub = self._memo.get(key_b)
        if new_ua is None or new_ub is None:
            part_a, part_b = config.peek_move(lam, dst)
            if new_ua is None:
                new_ua = unary(part_a, self.models, self.weights)
                if len(self._memo) >= _MEMO_CAP:
                    self._memo.clear()
                self._memo[key_a] = new_ua
            if new_ub is None:
                new_ub = unary(part_b, self.models, self.weights)
                if len(self._memo) >= _MEMO_CAP:
                    self._memo.clear()
                self._memo[key_b] = new_ub
        part = config.partition
        en = part.el_n[lam]
        cen = {
            src: (config.coord_sum[src] - part.el_coord_sum[lam]) / (config.n_pix[src] - en),
            dst: (config.coord_sum[dst] + part.el_coord_sum[lam]) / (config.n_pix[dst] + en),
        }
        new_edges = [self._edge_of(e, cen) for e in edge_ids]
        dh = (new_ua + new_ub + sum(new_edges)) - (old_ua + old_ub + sum(old_edges))
        return dh, new_ua, new_ub, new_edges, edge_ids, src

    def commit(self, lam: int, dst: int, new_ua, new_ub, new_edges, edge_ids, src) -> None:
        self.config.apply_move(lam, dst)
        self.unary_terms[src] = new_ua
        self.unary_terms[dst] = new_ub
        for e, v in zip(edge_ids, new_edges):
            self.edge_terms[e] = v
        self.energy = float(self.unary_terms.sum() + self.edge_terms.sum())


def _build_tables(state: ChainState) -> _ProposalState:
    """Candidate tables of every part under the current configuration."""
    config = state.config
    asg = config.assign
    part = config.partition
    el_hist = part.norm_hist
    n = config.n_parts
    sizes = np.fromiter((len(s) for s in config.elements), dtype=np.int64, count=n)

    asg_src = asg[state._adj_src]
    asg_dst = asg[state._adj_dst]
    cross = asg_src != asg_dst
    c_src_el = state._adj_src[cross]
    c_dst_el = state._adj_dst[cross]
    c_src_part = asg_src[cross]

    # unique (part, candidate) pairs of both blocks at once; the encoded
    # key sorts by part then element, matching per-part sorted tables
    tables: list = [None] * n
    n_el = part.n_elements
    u_in = np.unique(c_src_part.astype(np.int64) * n_el + c_src_el)
    pi = u_in // n_el
    ei = u_in % n_el
    keep_in = sizes[pi] >= 2
    pi, ei = pi[keep_in], ei[keep_in]
    u_out = np.unique(c_src_part.astype(np.int64) * n_el + c_dst_el)
    po = u_out // n_el
    eo = u_out % n_el
    keep_out = sizes[asg[eo]] >= 2
    po, eo = po[keep_out], eo[keep_out]
    if pi.size + po.size == 0:
        return _ProposalState(tables, np.zeros(0, dtype=np.int64))

    in_lo = np.searchsorted(pi, np.arange(n + 1))
    out_lo = np.searchsorted(po, np.arange(n + 1))
    ids_blocks = []
    part_rows = []
    inside_rows = []
    spans = []
    pos = 0
    for i in range(n):
        n_in = int(in_lo[i + 1] - in_lo[i])
        n_out = int(out_lo[i + 1] - out_lo[i])
        total = n_in + n_out
        if total == 0:
            continue
        ids_blocks.append(ei[in_lo[i] : in_lo[i + 1]])
        ids_blocks.append(eo[out_lo[i] : out_lo[i + 1]])
        part_rows.append(np.full(total, i, dtype=np.int64))
        flags = np.zeros(total, dtype=bool)
        flags[:n_in] = True
        inside_rows.append(flags)
        spans.append((i, pos, pos + total))
        pos += total

    all_ids = np.concatenate(ids_blocks)
    p_rows = np.concatenate(part_rows)
    ins = np.concatenate(inside_rows)

    fg_all = config.counts / config.n_pix[:, None]
    band_all = config.band_counts / np.maximum(config.band_n, 1)[:, None]
    hb = (config.band_n > 0)[p_rows]
    cand_hist = el_hist[all_ids]
    sim_fg = np.minimum(cand_hist, fg_all[p_rows]).sum(axis=1)
    sim_band = np.minimum(cand_hist, band_all[p_rows]).sum(axis=1)
    # eject: band-to-candidate over foreground fit; pull: the inverse;
    # a part without a narrowband contributes the floor similarity
    w = np.where(
        ins,
        np.where(hb, sim_band, SIM_EPS) / np.maximum(sim_fg, SIM_EPS),
        sim_fg / np.where(hb, np.maximum(sim_band, SIM_EPS), SIM_EPS),
    )

    proposable = []
    for i, lo, hi in spans:
        keep = w[lo:hi] > 0.0
        if not keep.any():
            continue
        weights = w[lo:hi][keep]
        cum = np.cumsum(weights)
        tables[i] = _PartTable(
            all_ids[lo:hi][keep], weights, ins[lo:hi][keep], cum, float(cum[-1])
        )
        proposable.append(i)
    return _ProposalState(tables, np.asarray(proposable, dtype=np.int64))


def _adj_parts(config: Configuration, lam: int, exclude: int) -> list[int]:
    """Parts owning a neighbor element of lam, excluding one part."""
    nb = config.partition.adjacency[lam]
    parts = set(int(p) for p in config.assign[nb])
    parts.discard(exclude)
    return sorted(parts)


def _move_prob(ps: _ProposalState, config: Configuration, lam: int, src: int, dst: int) -> float:
    """Total probability that the proposal emits the move lam: src -> dst.

    Two routes can generate it: eject lam from src (then pick dst among
    lam's adjacent parts), or pull lam while dst's table is selected.
    """
    m = ps.m
    if m == 0:
        return 0.0
    q = 0.0
    t_src = ps.tables[src]
    if t_src is not None:
        hit = np.nonzero((t_src.cands == lam) & t_src.inside)[0]
        if hit.size:
            dests = _adj_parts(config, lam, exclude=src)
            if dst in dests:
                q += float(t_src.weights[hit[0]]) / t_src.z_total / len(dests)
    t_dst = ps.tables[dst]
    if t_dst is not None:
        hit = np.nonzero((t_dst.cands == lam) & ~t_dst.inside)[0]
        if hit.size:
            q += float(t_dst.weights[hit[0]]) / t_dst.z_total
    return q / m


def _sample_move(
    ps: _ProposalState, config: Configuration, rng: np.random.Generator
) -> tuple[int, int, int]:
    """Draw one move (element, src, dst) from the proposal mixture."""
    i = int(ps.proposable[rng.integers(ps.m)])
    tbl = ps.tables[i]
    r = rng.random() * tbl.z_total
    idx = min(int(np.searchsorted(tbl.cum, r, side="right")), tbl.cands.size - 1)
    lam = int(tbl.cands[idx])
    if tbl.inside[idx]:
        dests = _adj_parts(config, lam, exclude=i)
        dst = dests[int(rng.integers(len(dests)))]
        return lam, i, dst
    return lam, int(config.assign[lam]), i


def propose(state: ChainState, rng: np.random.Generator) -> Move:
    """Draw a move and compute its forward and reverse probabilities.

    The reverse probability is measured in the post-move configuration
    (the state is mutated and exactly restored internally); moves whose
    reverse cannot be generated get q_r = 0.
    """
    ps = _build_tables(state)
    if ps.m == 0:
        raise RuntimeError("no legal moves from this configuration")
    lam, src, dst = _sample_move(ps, state.config, rng)
    q_f = _move_prob(ps, state.config, lam, src, dst)
    state.config.apply_move(lam, dst)
    ps_rev = _build_tables(state)
    q_r = _move_prob(ps_rev, state.config, lam, dst, src)
    state.config.apply_move(lam, src)
    return Move(lam, src, dst, q_f=q_f, q_r=q_r)


def acceptance(state: ChainState, move: Move, temperature: float) -> float:
    """Metropolis-Hastings acceptance probability of a move."""
    if move.q_f <= 0.0:
        raise ValueError("move has zero forward probability")
    if move.q_r <= 0.0:
        return 0.0
    dh, *_ = state.move_terms(move.element, move.dst)
    try:
        boltz = math.exp(-dh / temperature)
    except OverflowError:
        return 1.0
    return min(1.0, boltz * (move.q_r / move.q_f))


# ---------------------------------------------------------------------------
# step engines


@dataclass
class _StateEntry:
    moves: np.ndarray  # (M, 3) int32: element, src, dst
    q_f: np.ndarray
    q_r: np.ndarray
    dh: np.ndarray
    cum: np.ndarray
    new_terms: list  # per move: (new_ua, new_ub, new_edges, edge_ids)
    h: float


def _build_entry(state: ChainState) -> _StateEntry:
    """Enumerate every proposable move from the current configuration."""
    config = state.config
    ps = _build_tables(state)
    agg: dict[tuple[int, int, int], float] = {}
    m = ps.m
    for i in ps.proposable:
        tbl = ps.tables[i]
        for w, lam, is_in in zip(tbl.weights, tbl.cands, tbl.inside):
            lam = int(lam)
            base = float(w) / tbl.z_total / m
            if is_in:
                dests = _adj_parts(config, lam, exclude=i)
                share = base / len(dests)
                for b in dests:
                    key = (lam, int(i), int(b))
                    agg[key] = agg.get(key, 0.0) + share
            else:
                key = (lam, int(config.assign[lam]), int(i))
                agg[key] = agg.get(key, 0.0) + base

    keys = sorted(agg)
    n_m = len(keys)
    moves = np.array(keys, dtype=np.int32).reshape(n_m, 3)
    q_f = np.array([agg[k] for k in keys], dtype=np.float64)
    q_r = np.zeros(n_m)
    dh = np.zeros(n_m)
    new_terms = []
    for r, (lam, src, dst) in enumerate(keys):
        d, new_ua, new_ub, new_edges, edge_ids, _ = state.move_terms(lam, dst)
        dh[r] = d
        new_terms.append((new_ua, new_ub, new_edges, edge_ids))
        config.apply_move(lam, dst)
        ps_rev = _build_tables(state)
        q_r[r] = _move_prob(ps_rev, config, lam, dst, src)
        config.apply_move(lam, src)
    h = float(total_energy(config, state.models, state.weights).total)
    return _StateEntry(moves, q_f, q_r, dh, np.cumsum(q_f), new_terms, h)


def transition_table(state: ChainState):
    """All moves proposable from the current state with q_f, q_r, and the
    energy change; rows sorted by (element, src, dst). For analysis and
    exact-distribution checks on small instances."""
    entry = _build_entry(state)
    return entry.moves.copy(), entry.q_f.copy(), entry.q_r.copy(), entry.dh.copy()


class Chain:
    """One MH chain; picks a step engine by instance size.

    Small instances cache the full transition table of every visited
    state (states recur constantly once the temperature drops); large
    ones rebuild the two proposal tables a move needs on the fly.
    """

    def __init__(self, state: ChainState, use_tables: bool | None = None):
        self.state = state
        if use_tables is None:
            use_tables = state.config.partition.n_elements <= TABLE_MODE_MAX_ELEMENTS
        self.use_tables = use_tables
        self._cache: dict[bytes, _StateEntry] = {}
        self._ps: _ProposalState | None = None
        if use_tables:
            entry = self._entry_for_current()
            self.state.energy = entry.h

    def _entry_for_current(self) -> _StateEntry:
        key = self.state.config.key()
        entry = self._cache.get(key)
        if entry is None:
            entry = _build_entry(self.state)
            self._cache[key] = entry
        return entry

    @property
    def energy(self) -> float:
        return self.state.energy

    def step(self, temperature: float, rng: np.random.Generator) -> bool:
        if self.use_tables:
            return self._step_cached(temperature, rng)
        return self._step_lazy(temperature, rng)

    def _accept_prob(self, dh: float, q_f: float, q_r: float, temperature: float) -> float:
        if q_r <= 0.0:
            return 0.0
        try:
            boltz = math.exp(-dh / temperature)
        except OverflowError:
            return 1.0
        return min(1.0, boltz * (q_r / q_f))

    def _step_lazy(self, temperature: float, rng: np.random.Generator) -> bool:
        # the tables depend only on the committed configuration, so the
        # set built to measure q_r doubles as the next step's forward set
        # when the move lands, and a rejection leaves the cached one valid
        state = self.state
        ps = self._ps
        if ps is None:
            ps = _build_tables(state)
        if ps.m == 0:
            raise RuntimeError("no legal moves from this configuration")
        lam, src, dst = _sample_move(ps, state.config, rng)
        q_f = _move_prob(ps, state.config, lam, src, dst)
        dh, new_ua, new_ub, new_edges, edge_ids, _ = state.move_terms(lam, dst)
        state.config.apply_move(lam, dst)
        ps_rev = _build_tables(state)
        q_r = _move_prob(ps_rev, state.config, lam, dst, src)
        a = self._accept_prob(dh, q_f, q_r, temperature)
        if rng.random() < a:
            state.unary_terms[src] = new_ua
            state.unary_terms[dst] = new_ub
            for e, v in zip(edge_ids, new_edges):
                state.edge_terms[e] = v
            state.energy = float(state.unary_terms.sum() + state.edge_terms.sum())
            self._ps = ps_rev
            return True
        state.config.apply_move(lam, src)
        self._ps = ps
        return False

    def _step_cached(self, temperature: float, rng: np.random.Generator) -> bool:
        state = self.state
        entry = self._entry_for_current()
        if entry.moves.shape[0] == 0:
            raise RuntimeError("no legal moves from this configuration")
        total = entry.cum[-1]
        r = rng.random() * total
        idx = min(int(np.searchsorted(entry.cum, r, side="right")), len(entry.cum) - 1)
        a = self._accept_prob(
            float(entry.dh[idx]), float(entry.q_f[idx]), float(entry.q_r[idx]), temperature
        )
        if rng.random() < a:
            lam, src, dst = (int(v) for v in entry.moves[idx])
            state.config.apply_move(lam, dst)
            nxt = self._entry_for_current()
            state.energy = nxt.h
            return True
        return False


# ---------------------------------------------------------------------------
# schedule and annealing


@dataclass(frozen=True)
class Schedule:
    """Annealing schedule: per-iteration cooling factors and temperatures."""

    rho: float
    gammas: np.ndarray
    temperatures: np.ndarray

    def __len__(self) -> int:
        return len(self.gammas)


def make_schedule(
    rho: float,
    n_iter: int,
    gamma_start: float = GAMMA_START,
    gamma_end: float = GAMMA_END,
) -> Schedule:
    """Linear gamma ramp with exact endpoints; ``T_t = -rho / ln(gamma_t)``."""
    if n_iter < 1:
        raise ValueError("schedule needs at least one iteration")
    if not (0.0 < gamma_end <= gamma_start < 1.0):
        raise ValueError("need 0 < gamma_end <= gamma_start < 1")
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    if n_iter == 1:
        gammas = np.array([gamma_start])
    else:
        t = np.arange(n_iter, dtype=np.float64)
        gammas = gamma_start + (gamma_end - gamma_start) * (t / (n_iter - 1))
        gammas[0] = gamma_start
        gammas[-1] = gamma_end
    temperatures = -rho / np.log(gammas)
    return Schedule(rho=float(rho), gammas=gammas, temperatures=temperatures)


def estimate_rho(
    state: ChainState, rng: np.random.Generator, n_samples: int = RHO_SAMPLES
) -> float:
    """Median absolute energy change along an all-accepted proposal walk.

    Runs on a copy; the caller's state is untouched. The estimate anchors
    the schedule so early temperatures accept typical uphill moves.
    """
    walk = ChainState(state.config.copy(), state.models, state.weights)
    walk._memo = state._memo  # shared cache, keys identify content exactly
    deltas = np.empty(n_samples, dtype=np.float64)
    for s in range(n_samples):
        move = propose(walk, rng)
        dh, new_ua, new_ub, new_edges, edge_ids, src = walk.move_terms(move.element, move.dst)
        deltas[s] = abs(dh)
        walk.commit(move.element, move.dst, new_ua, new_ub, new_edges, edge_ids, src)
    return max(float(np.median(deltas)), RHO_FLOOR)


@dataclass
class AnnealResult:
    """Best configuration visited plus the per-iteration trace."""

    config: Configuration
    energy: float
    trace: np.ndarray  # (rows, 4): iteration, temperature, energy, accepted
    accepted: int
    rho: float


def anneal(
    partition: ElementPartition,
    graph: SceneGraph,
    models: ClassModels,
    weights: Weights | None = None,
    n_iter: int | None = None,
    seed: int = 0,
    gamma_start: float = GAMMA_START,
    gamma_end: float = GAMMA_END,
    rho_samples: int = RHO_SAMPLES,
    use_tables: bool | None = None,
) -> AnnealResult:
    """Anneal from the greedy start and return the best state visited.

    A one-part graph (or a single element) has no moves; the start is
    returned unchanged with a one-row trace.
    """
    if weights is None:
        weights = models.weights
    rng = np.random.default_rng(seed)
    config = initialize(partition, graph, models)
    state = ChainState(config, models, weights)

    if graph.n_parts < 2 or partition.n_elements < 2:
        trace = np.array([[0.0, 0.0, state.energy, 0.0]])
        return AnnealResult(config, state.energy, trace, 0, 0.0)

    rho = estimate_rho(state, rng, rho_samples)
    if n_iter is None:
        n_iter = DEFAULT_ITER_MULTIPLIER * partition.n_elements
    sched = make_schedule(rho, n_iter, gamma_start, gamma_end)

    chain = Chain(state, use_tables=use_tables)
    best_assign = config.assign.copy()
    best_h = chain.energy
    trace = np.empty((n_iter, 4), dtype=np.float64)
    accepted_total = 0
    for t in range(n_iter):
        temp = float(sched.temperatures[t])
        acc = chain.step(temp, rng)
        if acc:
            accepted_total += 1
            if chain.energy < best_h:
                best_h = chain.energy
                best_assign = config.assign.copy()
        trace[t] = (t, temp, chain.energy, float(acc))
    best = Configuration(partition, graph, best_assign, config.prox)
    return AnnealResult(best, best_h, trace, accepted_total, rho)


def sample_fixed(
    state: ChainState,
    temperature: float,
    n_steps: int,
    rng: np.random.Generator,
    use_tables: bool | None = None,
) -> dict[bytes, int]:
    """Run a fixed-temperature chain and count post-step state visits."""
    chain = Chain(state, use_tables=use_tables)
    counts: dict[bytes, int] = {}
    for _ in range(n_steps):
        chain.step(temperature, rng)
        key = state.config.key()
        counts[key] = counts.get(key, 0) + 1
    return counts


def write_trace(path, trace: np.ndarray) -> None:
    """Write an anneal trace as CSV: iteration,temperature,energy,accepted."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,temperature,energy,accepted\n")
        for row in trace:
            fh.write(f"{int(row[0])},{float(row[1])!r},{float(row[2])!r},{int(row[3])}\n")
