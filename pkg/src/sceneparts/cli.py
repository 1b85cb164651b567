"""Command-line entry points.

Subcommands: textons, train, infer, baseline, eval, synth, render. Every
run-configuration key can come from a ``key = value`` file (--config or
the SCENEPARTS_CONFIG environment variable) and can be overridden by a
flag of the same name. Errors print a single machine-parseable line
``sceneparts:E<code>: message`` on stderr; exit codes are 0 (ok), 2 (bad
arguments), 3 (missing or unreadable input), 4 (model or format
mismatch).

Heavy imports happen inside the command bodies so that --help stays
fast and the thread cap is in place before numeric libraries load.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import CONFIG_HELP, ConfigError, RunConfig

__all__ = ["main", "build_parser", "UsageError", "InputError"]

_ALPHA_KEYS = (
    "alpha_appearance",
    "alpha_shape",
    "alpha_location",
    "alpha_distance",
    "alpha_angle",
)


class UsageError(Exception):
    """Bad command line or option combination."""


class InputError(Exception):
    """An input file is missing, unpaired, or has malformed content."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=None,
                        help="run-configuration file (key = value lines)")
    for key, help_text in CONFIG_HELP.items():
        common.add_argument("--" + key.replace("_", "-"), dest="cfg_" + key,
                            metavar="V", default=None, help=help_text)

    parser = _Parser(prog="sceneparts",
                     description="parts-based semantic pixel labeling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("textons", parents=[common],
                       help="train the texton codebook from the training split")
    p.set_defaults(func=_cmd_textons)

    p = sub.add_parser("train", parents=[common],
                       help="learn class and pairwise models from the training split")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", parents=[common],
                       help="label one image by annealing under a given graph")
    p.add_argument("--image", required=True, metavar="PATH")
    p.add_argument("--graph", required=True, metavar="PATH",
                   help="graph spec file (nodes: line plus edge: lines)")
    p.add_argument("--out-stem", default=None,
                   help="basename for outputs (default: image stem)")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("baseline", parents=[common],
                       help="label one image with an independent or smoothed baseline")
    p.add_argument("--image", required=True, metavar="PATH")
    p.add_argument("--which", required=True, choices=("mle", "mrf"))
    p.add_argument("--classes", default=None,
                   help="comma-separated class names allowed in the image")
    p.add_argument("--graph", default=None, metavar="PATH",
                   help="take the allowed classes from a graph spec instead")
    p.add_argument("--out-stem", default=None)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("eval", parents=[common],
                       help="score predictions against the test-split gold labels")
    p.add_argument("--pred-dir", required=True, metavar="DIR")
    p.add_argument("--method", default="pred",
                   help="name used for the report files")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", parents=[common],
                       help="generate a synthetic dataset under dataset_root")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("render", parents=[common],
                       help="overlay a predicted labeling and its part graph on an image")
    p.add_argument("--image", required=True, metavar="PATH")
    p.add_argument("--pred", required=True, metavar="PATH",
                   help="predicted label map (color-coded image)")
    p.add_argument("--out", default=None, metavar="PATH")
    p.set_defaults(func=_cmd_render)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail(2, str(exc))
    except SystemExit as exc:  # --help
        return exc.code if isinstance(exc.code, int) else 0

    try:
        overrides = {
            key: getattr(args, "cfg_" + key)
            for key in CONFIG_HELP
            if getattr(args, "cfg_" + key, None) is not None
        }
        cfg = RunConfig.from_sources(args.config, overrides)
        _set_thread_env(cfg.threads)
        return int(args.func(cfg, args) or 0)
    except (UsageError, ConfigError) as exc:
        return _fail(2, str(exc))
    except FileNotFoundError as exc:
        return _fail(3, f"{exc.filename or exc}: not found")
    except InputError as exc:
        return _fail(3, str(exc))
    except OSError as exc:
        return _fail(3, str(exc))
    except KeyError as exc:
        return _fail(4, str(exc).strip("'\""))
    except ValueError as exc:
        # modelio and graph parsing raise tagged ValueError subclasses
        from .imaging import ImagingError
        from .model import GraphSpecError
        from .modelio import ModelFormatError

        if isinstance(exc, (ModelFormatError, GraphSpecError)):
            return _fail(4, str(exc))
        if isinstance(exc, ImagingError):
            return _fail(3, str(exc))
        return _fail(2, str(exc))


def _fail(code: int, message: str) -> int:
    flat = " ".join(str(message).split()) or "unknown error"
    print(f"sceneparts:E{code}: {flat}", file=sys.stderr)
    return code


def _set_thread_env(n: int) -> None:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(n)


# ---------------------------------------------------------------------------
# shared plumbing


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _ensure_parent(path: str) -> str:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def _read_split(cfg: RunConfig) -> tuple[list[str], list[str]]:
    path = cfg.split_path()
    train: list[str] = []
    test: list[str] = []
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        fields = body.split()
        if len(fields) != 2 or fields[0] not in ("train", "test"):
            raise InputError(f"{path} line {lineno}: expected 'train <stem>' or 'test <stem>'")
        (train if fields[0] == "train" else test).append(fields[1])
    return train, test


def _find_image(directory: str, stem: str) -> str:
    for ext in (".png", ".ppm"):
        path = os.path.join(directory, stem + ext)
        if os.path.exists(path):
            return path
    raise InputError(f"no image named {stem} under {directory}")


def _load_palette(cfg: RunConfig):
    from .imaging import load_palette

    return load_palette(cfg.palette_path())


def _read_groups(cfg: RunConfig, palette) -> dict[int, str] | None:
    if not cfg.groups:
        return None
    groups: dict[int, str] = {}
    path = cfg.groups
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        fields = body.split()
        if len(fields) != 2:
            raise InputError(f"{path} line {lineno}: expected '<class> <group>'")
        name, group = fields
        if name not in palette.names:
            raise InputError(f"{path} line {lineno}: unknown class {name!r}")
        groups[palette.names.index(name)] = group
    return groups


def _featured_partition(cfg: RunConfig, image, models):
    from .learning import quantized_features
    from .superpixels import attach_features, build_partition, segment_image

    element_map = segment_image(image, k_param=cfg.fh_k, min_size=cfg.fh_min_size)
    partition = build_partition(element_map)
    bins = quantized_features(image, models.codebook, models.layout)
    return attach_features(partition, bins, models.layout)


def _apply_alpha(weights, cfg: RunConfig):
    from .model import Weights

    vals = weights.as_array()
    changed = False
    for i, key in enumerate(_ALPHA_KEYS):
        v = getattr(cfg, key)
        if v >= 0.0:
            vals[i] = v
            changed = True
    if not changed:
        return weights
    total = float(vals.sum())
    if total <= 0.0:
        raise UsageError("weight overrides sum to zero")
    return Weights.from_array(vals / total)


def _check_palette(palette, models) -> None:
    if tuple(palette.names) != tuple(models.class_names):
        from .modelio import ModelFormatError

        raise ModelFormatError("palette class names do not match the model")


def _stem_of(args) -> str:
    stem = getattr(args, "out_stem", None)
    if stem:
        return stem
    return os.path.splitext(os.path.basename(args.image))[0]


# ---------------------------------------------------------------------------
# commands


def _cmd_textons(cfg: RunConfig, args) -> int:
    from .imaging import load_image
    from .learning import texton_training_matrix
    from .modelio import save_codebook
    from .textons import train_textons

    train, _ = _read_split(cfg)
    if not train:
        raise InputError("split file lists no training images")
    img_dir = os.path.join(cfg.dataset_root, "images")
    images = [load_image(_find_image(img_dir, stem)) for stem in train]
    mat = texton_training_matrix(images)
    codebook = train_textons(
        mat, k=cfg.texton_count, seed=cfg.seed, max_samples=cfg.texton_max_samples
    )
    save_codebook(codebook, _ensure_parent(cfg.codebook_path()))
    trace = codebook.objective_trace
    print(f"textons: {codebook.k} centers from {len(train)} images, "
          f"{len(trace)} assignment rounds")
    print("objective_trace: " + " ".join(repr(float(v)) for v in trace))
    print(f"wrote {cfg.codebook_path()}")
    return 0


def _cmd_train(cfg: RunConfig, args) -> int:
    from collections import Counter

    from .histograms import BinLayout
    from .imaging import load_image, load_label_map
    from .learning import learn_models_prepared, prepare_training_image
    from .modelio import load_codebook, save_models

    palette = _load_palette(cfg)
    codebook = load_codebook(cfg.codebook_path())
    layout = BinLayout(b_lab=cfg.lab_bins, n_textons=codebook.k)
    train, _ = _read_split(cfg)
    if not train:
        raise InputError("split file lists no training images")

    img_dir = os.path.join(cfg.dataset_root, "images")
    lab_dir = os.path.join(cfg.dataset_root, "labels")
    prepared = []
    for stem in train:
        image = load_image(_find_image(img_dir, stem))
        labels = load_label_map(_find_image(lab_dir, stem), palette)
        prepared.append(
            prepare_training_image(
                image, labels, codebook, layout, cfg.band_radius, cfg.min_part_size
            )
        )

    models = learn_models_prepared(prepared, palette.names, codebook, layout, cfg.band_radius)

    counts = Counter(p.z for img in prepared for p in img.parts)
    for z, name in enumerate(palette.names):
        if counts.get(z):
            print(f"class {name}: {counts[z]} parts")
        else:
            print(f"warning: class {name} never observed; excluded from the model",
                  file=sys.stderr)
    w = models.weights
    print("weights: "
          f"appearance={w.appearance!r} shape={w.shape!r} location={w.location!r} "
          f"distance={w.distance!r} angle={w.angle!r}")
    save_models(models, _ensure_parent(cfg.model_path()))
    print(f"wrote {cfg.model_path()}")
    return 0


def _cmd_infer(cfg: RunConfig, args) -> int:
    from .evaluation import render_overlay
    from .imaging import load_image, save_image, save_label_map
    from .inference import anneal, configuration_to_labelmap, write_trace
    from .model import parse_graph_spec
    from .modelio import load_models

    palette = _load_palette(cfg)
    models = load_models(cfg.model_path())
    _check_palette(palette, models)
    image = load_image(args.image)
    graph = parse_graph_spec(_read_text(args.graph), models.class_names)
    partition = _featured_partition(cfg, image, models)
    weights = _apply_alpha(models.weights, cfg)

    n_iter = cfg.iter_multiplier * partition.n_elements
    best = None
    for c in range(cfg.chains):
        result = anneal(
            partition, graph, models, weights=weights, n_iter=n_iter,
            seed=cfg.seed + c, gamma_start=cfg.gamma_start,
            gamma_end=cfg.gamma_end, rho_samples=cfg.rho_samples,
        )
        if best is None or result.energy < best.energy:
            best = result

    stem = _stem_of(args)
    pred = configuration_to_labelmap(best.config)
    pred_path = _ensure_parent(os.path.join(cfg.out_dir, "pred", stem + ".png"))
    save_label_map(pred_path, pred, palette)
    trace_path = _ensure_parent(os.path.join(cfg.out_dir, "trace", stem + ".csv"))
    write_trace(trace_path, best.trace)
    cents = best.config.coord_sum / best.config.n_pix[:, None]
    overlay = render_overlay(image, pred, graph, cents, palette, cfg.overlay_alpha)
    overlay_path = _ensure_parent(os.path.join(cfg.out_dir, "overlay", stem + ".png"))
    save_image(overlay_path, overlay)

    print(f"{stem}: elements={partition.n_elements} parts={graph.n_parts} "
          f"energy={best.energy!r} accepted={best.accepted} of {len(best.trace)}")
    print(f"wrote {pred_path}")
    print(f"wrote {trace_path}")
    print(f"wrote {overlay_path}")
    return 0


def _allowed_from_args(cfg: RunConfig, args, models) -> list[int]:
    from .model import parse_graph_spec

    if args.graph is not None:
        graph = parse_graph_spec(_read_text(args.graph), models.class_names)
        return sorted(set(graph.node_classes))
    if args.classes is not None:
        names = [n.strip() for n in args.classes.split(",") if n.strip()]
        if not names:
            raise UsageError("--classes lists no class names")
        return sorted({models.class_index(n) for n in names})
    raise UsageError("baseline needs --classes or --graph")


def _cmd_baseline(cfg: RunConfig, args) -> int:
    from dataclasses import replace

    from .baselines import PottsParams, mle_label, mrf_potts_label
    from .imaging import load_image, save_label_map
    from .modelio import load_models

    palette = _load_palette(cfg)
    models = load_models(cfg.model_path())
    _check_palette(palette, models)
    models = replace(models, weights=_apply_alpha(models.weights, cfg))
    image = load_image(args.image)
    allowed = _allowed_from_args(cfg, args, models)
    partition = _featured_partition(cfg, image, models)

    if args.which == "mle":
        pred = mle_label(partition, allowed, models, cfg.include_location)
    else:
        params = PottsParams(beta=cfg.beta, max_sweeps=cfg.max_sweeps)
        pred = mrf_potts_label(partition, allowed, models, params, cfg.include_location)

    stem = _stem_of(args)
    pred_path = _ensure_parent(os.path.join(cfg.out_dir, args.which, stem + ".png"))
    save_label_map(pred_path, pred, palette)
    print(f"{stem}: elements={partition.n_elements} classes={len(allowed)}")
    print(f"wrote {pred_path}")
    return 0


def _cmd_eval(cfg: RunConfig, args) -> int:
    from .evaluation import accumulate, average_accuracy, format_table, metrics_csv, new_confusion
    from .imaging import load_label_map

    palette = _load_palette(cfg)
    _, test = _read_split(cfg)
    if not test:
        raise InputError("split file lists no test images")
    groups = _read_groups(cfg, palette)

    lab_dir = os.path.join(cfg.dataset_root, "labels")
    cm = new_confusion(len(palette.names))
    for stem in test:
        gold = load_label_map(_find_image(lab_dir, stem), palette)
        pred_path = os.path.join(args.pred_dir, stem + ".png")
        if not os.path.exists(pred_path):
            raise InputError(f"no prediction for {stem} under {args.pred_dir}")
        pred = load_label_map(pred_path, palette)
        if pred.shape != gold.shape:
            raise InputError(f"{stem}: prediction and gold sizes differ")
        accumulate(gold, pred, cm)

    text = format_table(cm, palette.names, groups)
    if cfg.strict_average:
        text += f"{'average_strict':<{max(len(n) for n in palette.names)}}  " \
                f"{average_accuracy(cm, strict=True):6.2f}\n"
    print(text, end="")
    txt_path = _ensure_parent(os.path.join(cfg.out_dir, f"eval_{args.method}.txt"))
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    csv_path = _ensure_parent(os.path.join(cfg.out_dir, f"eval_{args.method}.csv"))
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(metrics_csv(cm, palette.names))
    print(f"wrote {txt_path}")
    print(f"wrote {csv_path}")
    return 0


def _cmd_synth(cfg: RunConfig, args) -> int:
    from .synth import generate_dataset

    train, test = generate_dataset(
        cfg.dataset_root, cfg.synth_images, cfg.seed,
        size=cfg.synth_size, n_train=min(cfg.synth_train, cfg.synth_images),
        min_part_size=cfg.min_part_size,
    )
    print(f"synth: {len(train)} train + {len(test)} test images under {cfg.dataset_root}")
    return 0


def _cmd_render(cfg: RunConfig, args) -> int:
    import numpy as np

    from .evaluation import render_overlay
    from .imaging import load_image, load_label_map, save_image
    from .learning import graph_from_labeling

    palette = _load_palette(cfg)
    image = load_image(args.image)
    pred = load_label_map(args.pred, palette)
    if pred.shape != image.shape[:2]:
        raise InputError("image and prediction sizes differ")
    graph, pixel_sets = graph_from_labeling(pred, cfg.min_part_size)
    w = pred.shape[1]
    cents = np.array(
        [[(pix % w).mean(), (pix // w).mean()] for pix in pixel_sets]
    )
    overlay = render_overlay(image, pred, graph, cents, palette, cfg.overlay_alpha)
    out_path = args.out or os.path.join(
        cfg.out_dir, "render", os.path.splitext(os.path.basename(args.pred))[0] + ".png"
    )
    save_image(_ensure_parent(out_path), overlay)
    print(f"wrote {out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
