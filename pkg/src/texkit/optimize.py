"""Pixel-space texture matching by projected gradient descent.

Drives a source image toward a target texture by descending the texture
loss directly in pixel space, with heavy-ball momentum, per-iteration
backtracking (step halving whenever the trial loss increases), and
projection of pixels back onto [-1, 1]. With backtracking on, the
recorded loss trace is monotone non-increasing; a rejected step also
resets the momentum so the iterate can never drift uphill.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .attention import (AttentionParams, LossOutput, attention_backward, attention_forward,
                        deviation)
from .errors import NumericError
from .glcm import BinningConfig
from .image import GrayImage, PixelDomain
from .texture import OffsetGrid, TextureMatrix, texture_matrix, texture_matrix_backward

_MAX_HALVINGS = 40


@dataclass(frozen=True)
class OptimizeConfig:
    iterations: int = 500
    step_size: float = 0.05
    momentum: float = 0.9
    learn_attention: bool = False
    backtrack: bool = True
    seed: int = 0
    log_every: int = 50

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")


@dataclass
class Trajectory:
    """Recorded optimization run: losses[0] is the starting loss."""

    losses: np.ndarray
    initial: GrayImage
    final: GrayImage
    texture_final: TextureMatrix
    texture_target: TextureMatrix
    params: AttentionParams

    def __post_init__(self):
        if not np.all(np.isfinite(self.losses)):
            raise ValueError("trajectory contains non-finite losses")


def _evaluate(data: np.ndarray, target: TextureMatrix, grid, bins, params,
              workers: int) -> LossOutput:
    img = GrayImage(data, PixelDomain.NORMALIZED)
    t_x = texture_matrix(img, grid, bins, workers)
    out = attention_forward(deviation(t_x, target), params)
    out._pair_cache = {"img": img, "t_x": t_x}
    return out


def _gradients(out: LossOutput, target: TextureMatrix, grid, bins, params, workers: int):
    ddelta, param_grads = attention_backward(out)
    sign = np.sign(out._pair_cache["t_x"].values - target.values)
    grad_img = texture_matrix_backward(out._pair_cache["img"], grid, bins, ddelta * sign,
                                       workers)
    return grad_img, param_grads


def texture_match_optimize(source: GrayImage, target: GrayImage, grid: OffsetGrid,
                           bins: BinningConfig, params: AttentionParams | None = None,
                           cfg: OptimizeConfig = OptimizeConfig(), workers: int = 1,
                           progress: Callable[[int, float], None] | None = None) -> Trajectory:
    """Descend the texture loss from source toward target's texture.

    ``params`` defaults to a fresh seeded initialization from cfg.seed.
    Deterministic: identical inputs, config, and seed reproduce the
    trajectory bitwise.
    """
    if source.domain != PixelDomain.NORMALIZED or target.domain != PixelDomain.NORMALIZED:
        raise ValueError("optimizer expects normalized images")
    if source.data.shape != target.data.shape:
        raise ValueError(f"source {source.data.shape} and target {target.data.shape} differ in size")
    if params is None:
        params = AttentionParams.initialize(c=4, seed=cfg.seed)

    t_target = texture_matrix(target, grid, bins, workers)
    x = source.data.copy()
    velocity = np.zeros_like(x)
    pvel = {"w_q": np.zeros_like(params.w_q), "w_k": np.zeros_like(params.w_k),
            "w_v": 0.0, "gamma": 0.0}

    out = _evaluate(x, t_target, grid, bins, params, workers)
    losses = [out.loss]
    if progress is not None:
        progress(0, out.loss)

    for it in range(1, cfg.iterations + 1):
        grad_img, param_grads = _gradients(out, t_target, grid, bins, params, workers)
        velocity = cfg.momentum * velocity + grad_img
        if cfg.learn_attention:
            for key in pvel:
                pvel[key] = cfg.momentum * pvel[key] + param_grads[key]

        accepted = False
        step = cfg.step_size
        for _ in range(_MAX_HALVINGS):
            x_new = np.clip(x - step * velocity, -1.0, 1.0)
            params_new = params
            if cfg.learn_attention:
                params_new = params.replace(
                    w_q=params.w_q - step * pvel["w_q"], w_k=params.w_k - step * pvel["w_k"],
                    w_v=params.w_v - step * pvel["w_v"], gamma=params.gamma - step * pvel["gamma"])
            trial = _evaluate(x_new, t_target, grid, bins, params_new, workers)
            if not np.isfinite(trial.loss):
                raise NumericError(f"loss diverged to {trial.loss!r} at iteration {it}")
            if not cfg.backtrack or trial.loss <= out.loss:
                accepted = True
                break
            step *= 0.5
        if accepted:
            x, params, out = x_new, params_new, trial
        else:
            # No productive step at any scale: hold position, drop momentum.
            velocity = np.zeros_like(x)
            for key in pvel:
                pvel[key] = 0.0 if np.isscalar(pvel[key]) else np.zeros_like(pvel[key])
        losses.append(out.loss)
        if progress is not None and (it % cfg.log_every == 0 or it == cfg.iterations):
            progress(it, out.loss)

    final = GrayImage(x, PixelDomain.NORMALIZED, source.spacing)
    return Trajectory(np.asarray(losses), source, final, out._pair_cache["t_x"], t_target, params)
