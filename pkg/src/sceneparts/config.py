"""Run configuration: a flat ``key = value`` file plus overrides.

Every key has a default, can be set in the config file, and can be
overridden from the command line. ``SCENEPARTS_CONFIG`` names a default
config file used when no explicit path is given. Unknown keys are
rejected rather than ignored, so typos fail loudly.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

__all__ = ["ConfigError", "RunConfig", "CONFIG_ENV_VAR", "CONFIG_HELP"]

CONFIG_ENV_VAR = "SCENEPARTS_CONFIG"


class ConfigError(ValueError):
    """Malformed config file or invalid key/value."""


@dataclass
class RunConfig:
    """All tunable settings, with one flat namespace.

    Path-like keys left empty resolve to defaults derived from
    ``dataset_root`` or ``out_dir``. Negative ``alpha_*`` values mean
    "keep the learned weight"; setting any component non-negative
    replaces it and the whole vector is rescaled to sum to one.
    """

    dataset_root: str = "."
    palette: str = ""
    split: str = ""
    groups: str = ""
    out_dir: str = "out"
    codebook: str = ""
    model: str = ""

    fh_k: float = 150.0
    fh_min_size: int = 50
    lab_bins: int = 32
    texton_count: int = 64
    texton_max_samples: int = 100000
    band_radius: int = 10
    min_part_size: int = 50

    iter_multiplier: int = 200
    chains: int = 1
    gamma_start: float = 0.9
    gamma_end: float = 0.1
    rho_samples: int = 200

    alpha_appearance: float = -1.0
    alpha_shape: float = -1.0
    alpha_location: float = -1.0
    alpha_distance: float = -1.0
    alpha_angle: float = -1.0

    beta: float = 1.0
    max_sweeps: int = 100
    include_location: bool = True
    strict_average: bool = False
    overlay_alpha: float = 0.5

    synth_images: int = 80
    synth_train: int = 60
    synth_size: int = 80

    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.fh_k <= 0 or self.fh_min_size < 1:
            raise ConfigError("fh_k must be positive and fh_min_size at least 1")
        if self.lab_bins < 1 or self.texton_count < 1:
            raise ConfigError("histogram bin counts must be positive")
        if self.texton_max_samples < 1:
            raise ConfigError("texton_max_samples must be positive")
        if self.band_radius < 1 or self.min_part_size < 1:
            raise ConfigError("band_radius and min_part_size must be positive")
        if self.iter_multiplier < 1 or self.chains < 1:
            raise ConfigError("iter_multiplier and chains must be positive")
        if not (0.0 < self.gamma_end <= self.gamma_start < 1.0):
            raise ConfigError("need 0 < gamma_end <= gamma_start < 1")
        if self.rho_samples < 1:
            raise ConfigError("rho_samples must be positive")
        if self.beta < 0 or self.max_sweeps < 1:
            raise ConfigError("beta must be nonnegative and max_sweeps positive")
        if not (0.0 <= self.overlay_alpha <= 1.0):
            raise ConfigError("overlay_alpha must lie in [0, 1]")
        if self.synth_images < 1 or self.synth_train < 1 or self.synth_size < 16:
            raise ConfigError("synthetic dataset sizes are too small")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.threads < 1:
            raise ConfigError("threads must be positive")

    # resolved paths

    def palette_path(self) -> str:
        return self.palette or os.path.join(self.dataset_root, "palette.txt")

    def split_path(self) -> str:
        return self.split or os.path.join(self.dataset_root, "split.txt")

    def codebook_path(self) -> str:
        return self.codebook or os.path.join(self.out_dir, "textons.bin")

    def model_path(self) -> str:
        return self.model or os.path.join(self.out_dir, "model.bin")

    # construction

    @classmethod
    def field_types(cls) -> dict[str, type]:
        return {f.name: f.type_real for f in _fields()}

    @classmethod
    def from_sources(
        cls, path: str | None = None, overrides: dict[str, str] | None = None
    ) -> "RunConfig":
        """Defaults, then the config file (if any), then overrides.

        ``path=None`` falls back to the SCENEPARTS_CONFIG environment
        variable; if neither is set, only defaults and overrides apply.
        """
        if path is None:
            path = os.environ.get(CONFIG_ENV_VAR) or None
        values: dict[str, object] = {}
        if path is not None:
            with open(path, "r", encoding="utf-8") as fh:
                values.update(parse_config(fh.read()))
        for key, raw in (overrides or {}).items():
            values[key] = _convert(key, raw)
        return cls(**values)


@dataclasses.dataclass(frozen=True)
class _Field:
    name: str
    type_real: type


def _fields() -> tuple[_Field, ...]:
    out = []
    probe = RunConfig()
    for f in dataclasses.fields(RunConfig):
        out.append(_Field(f.name, type(getattr(probe, f.name))))
    return tuple(out)


_TRUE_WORDS = {"true", "yes", "on", "1"}
_FALSE_WORDS = {"false", "no", "off", "0"}


def _convert(key: str, raw: str) -> object:
    types = {f.name: f.type_real for f in _fields()}
    if key not in types:
        raise ConfigError(f"unknown config key: {key!r}")
    kind = types[key]
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in _TRUE_WORDS:
                return True
            if low in _FALSE_WORDS:
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw, 10)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str) -> dict[str, object]:
    """Parse ``key = value`` lines; '#' starts a comment, blanks allowed."""
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = body.split("=", 1)
        key = key.strip()
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw)
    return values


def _config_help() -> dict[str, str]:
    return {
        "dataset_root": "directory holding images/, labels/, graphs/",
        "palette": "palette file (default: <dataset_root>/palette.txt)",
        "split": "train/test split file (default: <dataset_root>/split.txt)",
        "groups": "optional class-to-group file for grouped metrics",
        "out_dir": "directory for generated artifacts",
        "codebook": "texton codebook file (default: <out_dir>/textons.bin)",
        "model": "model file (default: <out_dir>/model.bin)",
        "fh_k": "graph-segmentation scale parameter",
        "fh_min_size": "minimum element size in pixels",
        "lab_bins": "histogram bins per color channel",
        "texton_count": "texton codebook size",
        "texton_max_samples": "pixel subsample cap for texton training",
        "band_radius": "boundary-band radius in pixels",
        "min_part_size": "minimum part size when reading labelings",
        "iter_multiplier": "sampler steps per element",
        "chains": "independent annealing chains (best energy wins)",
        "gamma_start": "acceptance target at the first step",
        "gamma_end": "acceptance target at the last step",
        "rho_samples": "probe moves for the energy-scale estimate",
        "alpha_appearance": "override for the appearance weight (<0 keeps learned)",
        "alpha_shape": "override for the shape weight (<0 keeps learned)",
        "alpha_location": "override for the location weight (<0 keeps learned)",
        "alpha_distance": "override for the distance weight (<0 keeps learned)",
        "alpha_angle": "override for the angle weight (<0 keeps learned)",
        "beta": "smoothing strength for the Potts baseline",
        "max_sweeps": "sweep cap for the Potts baseline",
        "include_location": "include the location term in baseline unaries",
        "strict_average": "count absent classes as zero recall in averages",
        "overlay_alpha": "blend factor for overlay rendering",
        "synth_images": "synthetic dataset size",
        "synth_train": "synthetic training-image count",
        "synth_size": "synthetic image side length",
        "seed": "master random seed",
        "threads": "worker thread cap for numeric kernels",
    }


CONFIG_HELP = _config_help()
