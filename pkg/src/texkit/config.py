"""Flat key = value run configuration shared by the CLI and service.

Grammar: one ``key = value`` pair per line, ``#`` starts a comment,
blank lines are ignored. Lists are comma separated. Unknown keys are
rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .attention import AttentionParams, load_params
from .glcm import BinningConfig
from .image import PreprocessConfig
from .optimize import OptimizeConfig
from .texture import OffsetGrid


@dataclass(frozen=True)
class RunConfig:
    # binning
    n_bins: int = 32
    sigma: float | None = None
    bin_centers: tuple[float, ...] | None = None
    # offset grid
    distances: tuple[int, ...] = (1, 3, 5, 7)
    angles: tuple[int, ...] = (0, 45, 90, 135)
    # attention
    attention_c: int = 4
    seed: int = 0
    params_file: str | None = None
    # optimizer
    iterations: int = 500
    step_size: float = 0.05
    momentum: float = 0.9
    learn_attention: bool = False
    backtrack: bool = True
    log_every: int = 50
    # preprocessing
    rescale_slope: float = 1.0
    rescale_intercept: float = 0.0
    target_spacing: float = 1.0
    canvas_size: int = 512
    background: float = -1024.0
    clamp_min: float = -1024.0
    clamp_max: float = 3071.0
    # evaluation
    feature_distance: int = 1
    alpha: float = 0.01
    # execution
    threads: int = 1

    def binning(self) -> BinningConfig:
        if self.bin_centers is not None:
            sigma = self.sigma
            if sigma is None:
                sigma = (self.bin_centers[1] - self.bin_centers[0]) / 2.0
            return BinningConfig(list(self.bin_centers), sigma)
        return BinningConfig.uniform(self.n_bins, self.sigma)

    def offset_grid(self) -> OffsetGrid:
        return OffsetGrid(self.distances, self.angles)

    def attention_params(self) -> AttentionParams:
        if self.params_file is not None:
            return load_params(self.params_file)
        return AttentionParams.initialize(self.attention_c, self.seed)

    def optimizer(self) -> OptimizeConfig:
        return OptimizeConfig(iterations=self.iterations, step_size=self.step_size,
                              momentum=self.momentum, learn_attention=self.learn_attention,
                              backtrack=self.backtrack, seed=self.seed,
                              log_every=self.log_every)

    def preprocess(self) -> PreprocessConfig:
        return PreprocessConfig(rescale_slope=self.rescale_slope,
                                rescale_intercept=self.rescale_intercept,
                                target_spacing=self.target_spacing,
                                canvas_size=self.canvas_size, background=self.background,
                                clamp_window=(self.clamp_min, self.clamp_max))


_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _parse_value(key: str, raw: str, target_type):
    if target_type == "int":
        return int(raw)
    if target_type == "float":
        return float(raw)
    if target_type == "bool":
        try:
            return _BOOL[raw.lower()]
        except KeyError:
            raise ValueError(f"config key '{key}': expected a boolean, got '{raw}'") from None
    if target_type == "str":
        return raw
    if target_type == "int_list":
        return tuple(int(v.strip()) for v in raw.split(","))
    if target_type == "float_list":
        return tuple(float(v.strip()) for v in raw.split(","))
    raise AssertionError(target_type)


_KEY_TYPES = {
    "n_bins": "int", "sigma": "float", "bin_centers": "float_list",
    "distances": "int_list", "angles": "int_list",
    "attention_c": "int", "seed": "int", "params_file": "str",
    "iterations": "int", "step_size": "float", "momentum": "float",
    "learn_attention": "bool", "backtrack": "bool", "log_every": "int",
    "rescale_slope": "float", "rescale_intercept": "float", "target_spacing": "float",
    "canvas_size": "int", "background": "float", "clamp_min": "float", "clamp_max": "float",
    "feature_distance": "int", "alpha": "float", "threads": "int",
}

assert set(_KEY_TYPES) == {f.name for f in fields(RunConfig)}


def parse_config(text: str, name: str = "<config>") -> RunConfig:
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{name}:{lineno}: expected 'key = value', got '{line}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEY_TYPES:
            raise ValueError(f"{name}:{lineno}: unknown config key '{key}'")
        try:
            updates[key] = _parse_value(key, value, _KEY_TYPES[key])
        except ValueError as exc:
            raise ValueError(f"{name}:{lineno}: {exc}") from None
    return replace(RunConfig(), **updates)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ValueError(f"no such config file: {path}") from None
    return parse_config(text, str(path))
