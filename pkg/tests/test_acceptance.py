"""Acceptance gate: ten end-to-end correctness criteria.

Each test prints one ``criterion N: PASS/FAIL`` line (run pytest with
``-s`` to see them all) and fails the suite if its bound is violated.
Tolerances are fixed here on purpose; loosening them is a behavior
change, not a test fix.
"""

import hashlib
import itertools
import math
import os
import time

import numpy as np
import pytest

from conftest import (
    SMALL_LAYOUT,
    chain_graph,
    grid_partition,
    make_configuration,
    random_bins,
    tiny_models,
)
from sceneparts.baselines import PottsParams, mle_label, mrf_potts_label
from sceneparts.cli import main as cli_main
from sceneparts.evaluation import (
    accumulate,
    average_accuracy,
    global_accuracy,
    grouped_accuracy,
    new_confusion,
    per_class_recall,
)
from sceneparts.histograms import BinLayout
from sceneparts.imaging import VOID
from sceneparts.inference import (
    ChainState,
    acceptance,
    make_schedule,
    sample_fixed,
    transition_table,
)
from sceneparts.learning import _fit_angle, learn_models_prepared, prepare_training_image
from sceneparts.model import Move, total_energy, von_mises_density
from sceneparts.superpixels import attach_features, build_partition
from sceneparts.textons import TextonCodebook


def _report(n: int, ok: bool, detail: str) -> None:
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {n}: {detail}"


# ---------------------------------------------------------------------------
# shared exact instance: 6 elements, 2 parts, every valid state enumerable


def _brick_partition(rng):
    """Six elements in a brick-like layout whose adjacency graph has odd
    cycles. On a plain grid the adjacency is bipartite and its two proper
    2-colorings have no same-part neighbors anywhere, so neither the pull
    nor the eject route can ever enter them; bricks avoid that."""
    plan = np.array(
        [
            [0, 0, 1, 1, 2, 2],
            [0, 0, 1, 1, 2, 2],
            [3, 3, 3, 4, 4, 4],
            [5, 5, 5, 5, 5, 5],
        ],
        dtype=np.int32,
    )
    element_map = np.kron(plan, np.ones((2, 2), dtype=np.int32)).astype(np.int32)
    partition = build_partition(element_map)
    bins = random_bins(rng, *element_map.shape, SMALL_LAYOUT)
    return attach_features(partition, bins, SMALL_LAYOUT)


@pytest.fixture(scope="module")
def exact_instance():
    rng = np.random.default_rng(42)
    partition = _brick_partition(rng)
    graph = chain_graph((0, 1))
    models = tiny_models(rng, n_classes=2)

    states = {}
    for bits in itertools.product((0, 1), repeat=6):
        assign = np.array(bits, dtype=np.int32)
        if assign.min() == assign.max():
            continue  # one part empty
        config = make_configuration(partition, graph, assign)
        h = total_energy(config, models, models.weights).total
        states[config.key()] = (assign, h)
    assert len(states) == 62
    return partition, graph, models, states


def _state_for(partition, graph, models, assign):
    config = make_configuration(partition, graph, assign)
    return ChainState(config, models, models.weights)


def test_criterion_01_sampler_matches_gibbs(exact_instance):
    partition, graph, models, states = exact_instance
    start = time.time()

    # every valid state must be reachable from the start through the
    # proposal law, else the chain targets a restricted distribution
    first_key = next(iter(states))
    seen = {first_key}
    frontier = [states[first_key][0]]
    while frontier:
        assign = frontier.pop()
        st = _state_for(partition, graph, models, assign)
        moves, _, _, _ = transition_table(st)
        for lam, src, dst in moves.tolist():
            nxt = assign.copy()
            nxt[lam] = dst
            st.config.apply_move(lam, dst)
            key = st.config.key()
            st.config.apply_move(lam, src)
            if key not in seen:
                seen.add(key)
                frontier.append(nxt)
    assert seen == set(states), "proposal law does not reach every valid state"

    temperature = 1.0
    hs = np.array([h for _, h in states.values()])
    log_pi = -hs / temperature
    pi = np.exp(log_pi - log_pi.max())
    pi /= pi.sum()

    n_steps = 10**6
    state = _state_for(partition, graph, models, states[first_key][0])
    counts = sample_fixed(state, temperature, n_steps, np.random.default_rng(7))
    emp = np.array([counts.get(k, 0) / n_steps for k in states])
    tv = 0.5 * float(np.abs(emp - pi).sum())
    elapsed = time.time() - start
    _report(
        1,
        tv < 0.05 and elapsed < 60.0,
        f"tv={tv:.4f} over {len(states)} states, {elapsed:.1f}s",
    )


def test_criterion_02_detailed_balance(exact_instance):
    partition, graph, models, states = exact_instance
    keys = list(states)
    rng = np.random.default_rng(99)
    worst = 0.0
    tables = {}
    n_pairs = 0
    while n_pairs < 1000:
        key = keys[int(rng.integers(len(keys)))]
        assign, h = states[key]
        if key not in tables:
            st = _state_for(partition, graph, models, assign)
            tables[key] = transition_table(st)
        moves, q_f, q_r, dh = tables[key]
        r = int(rng.integers(len(moves)))
        lam, src, dst = (int(v) for v in moves[r])
        rev_assign = assign.copy()
        rev_assign[lam] = dst
        rev_key = make_configuration(partition, graph, rev_assign).key()
        h_rev = states[rev_key][1]
        if rev_key not in tables:
            st = _state_for(partition, graph, models, rev_assign)
            tables[rev_key] = transition_table(st)
        r_moves, r_qf, r_qr, r_dh = tables[rev_key]
        back = np.nonzero(
            (r_moves[:, 0] == lam) & (r_moves[:, 1] == dst) & (r_moves[:, 2] == src)
        )[0]
        st_fwd = _state_for(partition, graph, models, assign)
        if back.size == 0:
            # reverse move not proposable: both flows must vanish, which the
            # acceptance rule guarantees by rejecting moves with q_r = 0
            assert float(q_r[r]) == 0.0
            for temperature in (0.5, 1.0, 5.0):
                a_fwd = acceptance(
                    st_fwd,
                    Move(lam, src, dst, q_f=float(q_f[r]), q_r=0.0),
                    temperature,
                )
                assert a_fwd == 0.0
            n_pairs += 1
            continue
        b = int(back[0])

        st_rev = _state_for(partition, graph, models, rev_assign)
        for temperature in (0.5, 1.0, 5.0):
            a_fwd = acceptance(
                st_fwd, Move(lam, src, dst, q_f=float(q_f[r]), q_r=float(q_r[r])), temperature
            )
            a_rev = acceptance(
                st_rev, Move(lam, dst, src, q_f=float(r_qf[b]), q_r=float(r_qr[b])), temperature
            )
            href = min(h, h_rev)
            lhs = math.exp(-(h - href) / temperature) * q_f[r] * a_fwd
            rhs = math.exp(-(h_rev - href) / temperature) * r_qf[b] * a_rev
            rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs))
            worst = max(worst, rel)
        n_pairs += 1
    _report(2, worst < 1e-9, f"worst relative flow mismatch {worst:.3e} over 1000 pairs x 3 T")


def test_criterion_03_schedule_identity():
    worst = 0.0
    endpoints_ok = True
    for rho, n_iter in ((1e-6, 2), (0.37, 100), (3.5, 1000), (250.0, 20000)):
        sched = make_schedule(rho, n_iter)
        endpoints_ok &= sched.gammas[0] == 0.9 and sched.gammas[-1] == 0.1
        gap = np.abs(np.exp(-sched.rho / sched.temperatures) - sched.gammas).max()
        worst = max(worst, float(gap))
    _report(
        3,
        worst <= 1e-12 and endpoints_ok,
        f"max |exp(-rho/T_t) - gamma_t| = {worst:.2e}, endpoints exact 0.9/0.1",
    )


def test_criterion_04_incremental_energy():
    rng = np.random.default_rng(1234)
    partition = grid_partition(rng, 3, 4)
    graph = chain_graph((0, 1, 2))
    models = tiny_models(rng, n_classes=3)
    assign = np.arange(12, dtype=np.int32) % 3
    state = ChainState(make_configuration(partition, graph, assign), models, models.weights)

    n_moves = 10**5
    n_checked = 0
    worst_delta = 0.0
    config = state.config
    for step in range(n_moves):
        while True:
            lam = int(rng.integers(12))
            src = int(config.assign[lam])
            if len(config.elements[src]) >= 2:
                break
        dst = int((src + 1 + rng.integers(2)) % 3)
        dh, new_ua, new_ub, new_edges, edge_ids, src_out = state.move_terms(lam, dst)
        if step % 100 == 0 and n_checked < 1000:
            before = total_energy(config, models, models.weights).total
            config.apply_move(lam, dst)
            after = total_energy(config, models, models.weights).total
            config.apply_move(lam, src)
            worst_delta = max(worst_delta, abs(dh - (after - before)))
            n_checked += 1
        state.commit(lam, dst, new_ua, new_ub, new_edges, edge_ids, src_out)
    fresh = total_energy(config, models, models.weights).total
    drift = abs(state.energy - fresh)
    _report(
        4,
        drift < 1e-6 and worst_delta < 1e-9 and n_checked == 1000,
        f"drift={drift:.2e} after {n_moves} moves; worst delta gap {worst_delta:.2e} "
        f"on {n_checked} checks",
    )


def test_criterion_06_von_mises():
    worst_integral = 0.0
    xs = np.linspace(-np.pi, np.pi, 200001)
    for kappa in (0.0, 1.0, 5.0, 50.0):
        integral = float(np.trapezoid(von_mises_density(xs, 0.7, kappa), xs))
        worst_integral = max(worst_integral, abs(integral - 1.0))

    # independent rejection sampler: accept x ~ U(-pi, pi] with
    # probability f(x)/f(omega); f(omega) is the density maximum
    omega_true, kappa_true = 1.0, 5.0
    rng = np.random.default_rng(2024)
    peak = float(von_mises_density(np.array(omega_true), omega_true, kappa_true))
    samples = []
    while len(samples) < 100:
        x = float(rng.uniform(-np.pi, np.pi))
        if rng.random() * peak < float(von_mises_density(np.array(x), omega_true, kappa_true)):
            samples.append(x)
    omega_hat, kappa_hat = _fit_angle(samples)
    omega_err = abs(math.atan2(math.sin(omega_hat - omega_true), math.cos(omega_hat - omega_true)))
    kappa_rel = abs(kappa_hat - kappa_true) / kappa_true
    _report(
        6,
        worst_integral < 1e-6 and omega_err < 0.2 and kappa_rel < 0.30,
        f"max |integral-1|={worst_integral:.2e}; omega err {omega_err:.3f} (<0.2), "
        f"kappa rel err {kappa_rel:.2%} (<30%)",
    )


def test_criterion_07_potts_degenerate_equivalence():
    rng = np.random.default_rng(77)
    all_equal = True
    for trial in range(20):
        partition = grid_partition(rng, 2 + trial % 3, 2 + trial % 4)
        n_classes = 2 + trial % 3
        models = tiny_models(rng, n_classes=n_classes)
        allowed = list(range(n_classes))
        a = mle_label(partition, allowed, models)
        b = mrf_potts_label(partition, allowed, models, PottsParams(beta=0.0))
        all_equal &= bool(np.array_equal(a, b))
    _report(7, all_equal, "beta=0 MRF bit-identical to MLE on 20 instances")


def test_criterion_08_learning_independence():
    rng = np.random.default_rng(55)
    layout = BinLayout(b_lab=6, n_textons=3)
    codebook = TextonCodebook(centers=np.random.default_rng(5).normal(size=(3, 61)), seed=5)

    def prep(labels):
        image = rng.integers(0, 256, size=(*labels.shape, 3), dtype=np.uint8)
        return prepare_training_image(image, labels, codebook, layout,
                                      band_radius=2, min_part_size=3)

    three = np.zeros((12, 12), dtype=np.int16)
    three[:, 4:8] = 1
    three[:, 8:] = 2
    other = np.zeros((12, 12), dtype=np.int16)
    other[:, 6:] = 2
    base = [prep(three), prep(three)]
    extended = base + [prep(other), prep(other)]

    names = ("a", "b", "c")
    m1 = learn_models_prepared(base, names, codebook, layout, band_radius=2)
    m2 = learn_models_prepared(extended, names, codebook, layout, band_radius=2)
    one, two = m1.class_models[1], m2.class_models[1]
    same = (
        np.array_equal(one.fg_hist, two.fg_hist)
        and np.array_equal(one.band_hist, two.band_hist)
        and np.array_equal(one.shape_map, two.shape_map)
        and np.array_equal(one.loc_mean, two.loc_mean)
        and np.array_equal(one.loc_cov, two.loc_cov)
    )
    _report(8, same, "class parameters bit-identical when other-class images are added")


def test_criterion_09_metric_formulas():
    rng = np.random.default_rng(31)
    groups = {0: "g0", 1: "g0", 2: "g1", 3: "g1"}
    exact = True
    for _ in range(200):
        n = 4
        gold = rng.integers(-1, n, size=(4, 4)).astype(np.int16)
        pred = rng.integers(0, n, size=(4, 4)).astype(np.int16)
        cm = accumulate(gold, pred, new_confusion(n))

        brute = [[0] * n for _ in range(n)]
        for y in range(4):
            for x in range(4):
                if gold[y, x] != VOID:
                    brute[gold[y, x]][pred[y, x]] += 1
        exact &= cm.tolist() == brute
        total = sum(map(sum, brute))
        if total == 0:
            continue
        diag = sum(brute[z][z] for z in range(n))
        exact &= global_accuracy(cm) == 100.0 * diag / total
        recalls = per_class_recall(cm)
        brute_recalls = {}
        for z in range(n):
            row = sum(brute[z])
            if row == 0:
                exact &= bool(np.isnan(recalls[z]))
            else:
                brute_recalls[z] = 100.0 * brute[z][z] / row
                exact &= recalls[z] == brute_recalls[z]
        if brute_recalls:
            exact &= average_accuracy(cm) == float(
                np.mean([brute_recalls[z] for z in sorted(brute_recalls)])
            )
            got_groups = grouped_accuracy(cm, groups)
            for gname in set(groups.values()):
                vals = [brute_recalls[z] for z in sorted(brute_recalls) if groups[z] == gname]
                if vals:
                    exact &= got_groups[gname] == float(np.mean(vals))
                else:
                    exact &= gname not in got_groups
    _report(9, exact, "confusion, global, recall, average, grouped all exact on 200 instances")


def test_criterion_10_command_determinism(tmp_path):
    root = tmp_path / "work"
    root.mkdir()
    out = root / "out"
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        f"dataset_root = {root}\n"
        f"out_dir = {out}\n"
        f"groups = {root / 'groups.txt'}\n"
        "fh_k = 40\nfh_min_size = 15\nlab_bins = 8\ntexton_count = 8\n"
        "texton_max_samples = 2000\nband_radius = 4\nmin_part_size = 20\n"
        "iter_multiplier = 10\nrho_samples = 20\n"
        "synth_images = 10\nsynth_train = 7\nsynth_size = 64\nseed = 1\n"
    )
    base = ["--config", str(cfg)]

    def run_everything():
        assert cli_main(["synth"] + base) == 0
        assert cli_main(["textons"] + base) == 0
        assert cli_main(["train"] + base) == 0
        split = [ln.split() for ln in (root / "split.txt").read_text().splitlines()]
        stems = [s for kind, s in split if kind == "test"]
        image = str(root / "images" / f"{stems[0]}.png")
        graph = str(root / "graphs" / f"{stems[0]}.txt")
        assert cli_main(["infer"] + base + ["--image", image, "--graph", graph]) == 0
        for which in ("mle", "mrf"):
            for s in stems:
                assert cli_main(
                    ["baseline"] + base
                    + ["--image", str(root / "images" / f"{s}.png"),
                       "--graph", str(root / "graphs" / f"{s}.txt"),
                       "--which", which]
                ) == 0
        assert cli_main(["eval"] + base + ["--pred-dir", str(out / "mle"), "--method", "mle"]) == 0
        assert cli_main(
            ["render"] + base
            + ["--image", image, "--pred", str(out / "mle" / f"{stems[0]}.png")]
        ) == 0

    def tree_digest():
        digests = {}
        for dirpath, _, filenames in os.walk(root):
            for fname in filenames:
                path = os.path.join(dirpath, fname)
                with open(path, "rb") as fh:
                    digests[os.path.relpath(path, root)] = hashlib.sha256(fh.read()).hexdigest()
        return digests

    run_everything()
    first = tree_digest()
    run_everything()
    second = tree_digest()
    differing = sorted(
        set(first) ^ set(second)
        | {rel for rel in set(first) & set(second) if first[rel] != second[rel]}
    )
    _report(
        10,
        not differing and len(first) > 20,
        f"{len(first)} artifacts byte-identical across two runs"
        + (f"; differing: {differing[:5]}" if differing else ""),
    )
