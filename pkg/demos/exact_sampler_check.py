"""The sampler against exact enumeration.

On a six-element, two-part instance every valid configuration can be
enumerated, so the Gibbs distribution P(L) ~ exp(-H(L)/T) is computable
exactly. A long fixed-temperature Metropolis-Hastings run must
reproduce it; this script measures the total-variation gap and spot
checks the detailed-balance identity pi(L) q(L'|L) A(L->L') =
pi(L') q(L|L') A(L'->L) on individual moves.

Run: python3 demos/exact_sampler_check.py        (~half a minute)
"""

import itertools
import math

import numpy as np

from sceneparts.histograms import BinLayout
from sceneparts.inference import ChainState, acceptance, sample_fixed, transition_table
from sceneparts.model import (
    ClassModel,
    ClassModels,
    Configuration,
    Move,
    PairwiseModel,
    SceneGraph,
    Weights,
    total_energy,
)
from sceneparts.superpixels import attach_features, build_partition, element_proximity
from sceneparts.textons import TextonCodebook

rng = np.random.default_rng(5)
layout = BinLayout(b_lab=4, n_textons=4)

# six elements in a brick layout (the adjacency has odd cycles, so the
# chain can reach every valid two-part state), random attached features
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
bins = np.empty((*element_map.shape, 4), dtype=np.int32)
for c in range(4):
    sl = layout.channel_slice(c)
    bins[..., c] = sl.start + rng.integers(0, sl.stop - sl.start, size=element_map.shape)
partition = attach_features(partition, bins, layout)


def random_hist():
    h = np.empty(layout.total)
    for c in range(4):
        sl = layout.channel_slice(c)
        v = rng.random(sl.stop - sl.start) + 0.05
        h[sl] = v / v.sum()
    return h


classes = tuple(
    ClassModel(name=f"c{z}", fg_hist=random_hist(), band_hist=random_hist(),
               shape_map=rng.uniform(0.05, 0.95, size=(201, 201)),
               loc_mean=rng.uniform(0.25, 0.75, size=2),
               loc_cov=np.diag(rng.uniform(0.05, 0.2, size=2)))
    for z in range(2)
)
pairwise = {
    (i, j): PairwiseModel(dist_mean=0.3, dist_var=0.02,
                          angle_mean=float(rng.uniform(-np.pi, np.pi)),
                          angle_kappa=2.0, n_samples=3)
    for i in range(2) for j in range(2) if i != j
}
models = ClassModels(
    layout=layout, band_radius=2, class_names=("c0", "c1"),
    class_models=classes, pairwise=pairwise, pooled_distance=(0.3, 0.04),
    codebook=TextonCodebook(centers=rng.normal(size=(4, 61)), seed=0),
    weights=Weights.from_array(np.full(5, 0.2)),
)
graph = SceneGraph(node_classes=(0, 1), edges=((0, 1),))
prox = element_proximity(partition, radius=2)

# exact Gibbs over all 2^6 - 2 valid assignments
temperature = 1.0
states = {}
for bits in itertools.product((0, 1), repeat=6):
    assign = np.array(bits, dtype=np.int32)
    if assign.min() == assign.max():
        continue
    config = Configuration(partition, graph, assign, prox)
    states[config.key()] = total_energy(config, models, models.weights).total
keys = list(states)
hs = np.array([states[k] for k in keys])
pi = np.exp(-(hs - hs.min()) / temperature)
pi /= pi.sum()
print(f"{len(keys)} valid configurations; Gibbs mass of the best: {pi.max():.3f}")

start = Configuration(partition, graph, np.array([0, 0, 0, 1, 1, 1], np.int32), prox)
state = ChainState(start, models, models.weights)
n_steps = 200_000
counts = sample_fixed(state, temperature, n_steps, np.random.default_rng(9))
emp = np.array([counts.get(k, 0) / n_steps for k in keys])
tv = 0.5 * float(np.abs(emp - pi).sum())
print(f"empirical vs exact after {n_steps} steps: total variation {tv:.4f}")

top = np.argsort(-pi)[:5]
print("top configurations (exact vs sampled):")
for i in top:
    assign = np.frombuffer(keys[i], dtype=np.int32)
    print(f"  {assign.tolist()}  pi={pi[i]:.4f}  emp={emp[i]:.4f}")

# detailed balance on a random move from a random state, three temperatures
state = ChainState(Configuration(partition, graph,
                                 np.array([0, 1, 0, 1, 1, 0], np.int32), prox),
                   models, models.weights)
moves, q_f, q_r, dh = transition_table(state)
r = int(np.random.default_rng(3).integers(len(moves)))
lam, src, dst = (int(v) for v in moves[r])
h_from = state.energy
h_to = h_from + float(dh[r])
print(f"\nmove: element {lam} from part {src} to part {dst}, dH={dh[r]:+.4f}")
rev_config = Configuration(partition, graph, state.config.assign.copy(), prox)
rev_config.apply_move(lam, dst)
rev = ChainState(rev_config, models, models.weights)
for t in (0.5, 1.0, 5.0):
    # the reverse move's forward probability equals this move's measured
    # q_r, and vice versa
    a_fwd = acceptance(state, Move(lam, src, dst, q_f=float(q_f[r]), q_r=float(q_r[r])), t)
    a_rev = acceptance(rev, Move(lam, dst, src, q_f=float(q_r[r]), q_r=float(q_f[r])), t)
    flow_fwd = math.exp(-h_from / t) * float(q_f[r]) * a_fwd
    flow_rev = math.exp(-h_to / t) * float(q_r[r]) * a_rev
    print(f"  T={t}: forward flow {flow_fwd:.3e}, reverse flow {flow_rev:.3e}, "
          f"relative gap {abs(flow_fwd - flow_rev) / flow_fwd:.2e}")
