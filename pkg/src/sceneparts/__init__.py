"""Parts-based semantic pixel labeling.

A scene is segmented into small coherent elements; a given part graph
assigns every element to one part with a known class. Learned potentials
score each part's appearance, footprint shape, and location, plus the
distance and direction between adjacent parts. Labelings are found by a
reversible single-element sampler under a data-adaptive annealing
schedule, with independent and Potts-smoothed baselines for comparison.
"""

from .baselines import PottsParams, mle_label, mrf_potts_label
from .config import RunConfig
from .evaluation import (
    accumulate,
    average_accuracy,
    global_accuracy,
    grouped_accuracy,
    new_confusion,
    per_class_recall,
    render_overlay,
)
from .filters import make_filter_bank
from .histograms import BinLayout, QuadHistogram, hist_similarity
from .imaging import Palette, load_image, load_label_map, load_palette, rgb_to_lab
from .inference import (
    AnnealResult,
    ChainState,
    anneal,
    configuration_to_labelmap,
    initialize,
    make_schedule,
)
from .learning import graph_from_labeling, learn_models, prepare_training_image
from .model import (
    ClassModels,
    Configuration,
    SceneGraph,
    Weights,
    format_graph_spec,
    parse_graph_spec,
    total_energy,
)
from .modelio import load_codebook, load_models, save_codebook, save_models
from .superpixels import ElementPartition, attach_features, build_partition, segment_image
from .textons import TextonCodebook, assign_textons, train_textons

__version__ = "0.1.0"

__all__ = [
    "AnnealResult",
    "BinLayout",
    "ChainState",
    "ClassModels",
    "Configuration",
    "ElementPartition",
    "Palette",
    "PottsParams",
    "QuadHistogram",
    "RunConfig",
    "SceneGraph",
    "TextonCodebook",
    "Weights",
    "accumulate",
    "anneal",
    "assign_textons",
    "attach_features",
    "average_accuracy",
    "build_partition",
    "configuration_to_labelmap",
    "format_graph_spec",
    "global_accuracy",
    "graph_from_labeling",
    "grouped_accuracy",
    "hist_similarity",
    "initialize",
    "learn_models",
    "load_codebook",
    "load_image",
    "load_label_map",
    "load_models",
    "load_palette",
    "make_filter_bank",
    "make_schedule",
    "mle_label",
    "mrf_potts_label",
    "new_confusion",
    "parse_graph_spec",
    "per_class_recall",
    "prepare_training_image",
    "render_overlay",
    "rgb_to_lab",
    "save_codebook",
    "save_models",
    "segment_image",
    "total_energy",
    "train_textons",
    "__version__",
]
