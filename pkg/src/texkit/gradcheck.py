"""Finite-difference verification of the hand-written backward passes.

Each registered op knows how to build a seeded random instance, evaluate
its scalar objective, and produce analytic gradients split into named
blocks. grad_check compares every block against central differences and
reports the worst relative error per block; failures are reported, never
raised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import attention, glcm, texture
from .image import GrayImage, PixelDomain

# Relative error floor: treats gradients below this magnitude as zero-scale.
_REL_FLOOR = 1e-6


@dataclass(frozen=True)
class GradCheckBlock:
    name: str
    max_rel_error: float
    passed: bool


@dataclass(frozen=True)
class GradCheckReport:
    op: str
    step: float
    tolerance: float
    blocks: tuple[GradCheckBlock, ...]

    @property
    def passed(self) -> bool:
        return all(b.passed for b in self.blocks)

    @property
    def max_rel_error(self) -> float:
        return max(b.max_rel_error for b in self.blocks)


def _random_image(rng: np.random.Generator, size: int) -> GrayImage:
    # Stay inside (-0.9, 0.9): perturbed copies must remain a valid
    # normalized image for any finite-difference step below 0.1.
    return GrayImage(rng.uniform(-0.9, 0.9, (size, size)), PixelDomain.NORMALIZED)


def _build_soft_glcm(rng, size, bins, grid, params):
    off = glcm.Offset(int(rng.integers(1, max(2, size // 2))),
                      int(rng.choice(glcm.ALLOWED_ANGLES)))
    return {
        "img": _random_image(rng, size),
        "offset": off,
        "bins": bins,
        "upstream": rng.standard_normal((bins.n_bins, bins.n_bins)),
    }


def _loss_soft_glcm(inst, img=None):
    img = img if img is not None else inst["img"]
    out = glcm.soft_glcm_forward(img, inst["offset"], inst["bins"])
    return float((inst["upstream"] * out.matrix).sum())


def _analytic_soft_glcm(inst):
    g = glcm.soft_glcm_backward(inst["img"], inst["offset"], inst["bins"], inst["upstream"])
    return {"image": g}


def _build_texture_matrix(rng, size, bins, grid, params):
    return {
        "img": _random_image(rng, size),
        "grid": grid,
        "bins": bins,
        "upstream": rng.standard_normal(grid.shape),
    }


def _loss_texture_matrix(inst, img=None):
    img = img if img is not None else inst["img"]
    tm = texture.texture_matrix(img, inst["grid"], inst["bins"])
    return float((inst["upstream"] * tm.values).sum())


def _analytic_texture_matrix(inst):
    g = texture.texture_matrix_backward(inst["img"], inst["grid"], inst["bins"], inst["upstream"])
    return {"image": g}


def _build_texture_loss(rng, size, bins, grid, params, identical=False):
    img_a = _random_image(rng, size)
    img_b = img_a if identical else _random_image(rng, size)
    if params is None:
        params = attention.AttentionParams.initialize(c=4, seed=int(rng.integers(0, 2**31)))
        params = params.replace(gamma=float(rng.uniform(-0.5, 0.5)))
    return {"img_a": img_a, "img_b": img_b, "grid": grid, "bins": bins, "params": params}


def _loss_texture_loss(inst, img_a=None, img_b=None, params=None):
    out = attention.texture_loss(
        img_a if img_a is not None else inst["img_a"],
        img_b if img_b is not None else inst["img_b"],
        inst["grid"], inst["bins"],
        params if params is not None else inst["params"])
    return out.loss


def _analytic_texture_loss(inst):
    out = attention.texture_loss(inst["img_a"], inst["img_b"], inst["grid"],
                                 inst["bins"], inst["params"])
    grad_a, grad_b, pgrads = attention.texture_loss_backward(out)
    return {"img_a": grad_a, "img_b": grad_b,
            "w_q": pgrads["w_q"], "w_k": pgrads["w_k"],
            "w_v": np.float64(pgrads["w_v"]), "gamma": np.float64(pgrads["gamma"])}


GRAD_OPS = {
    "soft_glcm": {"build": _build_soft_glcm, "loss": _loss_soft_glcm,
                  "analytic": _analytic_soft_glcm},
    "texture_matrix": {"build": _build_texture_matrix, "loss": _loss_texture_matrix,
                       "analytic": _analytic_texture_matrix},
    "texture_loss": {"build": _build_texture_loss, "loss": _loss_texture_loss,
                     "analytic": _analytic_texture_loss},
}


def make_instance(op: str, seed: int = 0, *, size: int = 8, n_bins: int = 8,
                  distances: tuple[int, ...] = (1, 2), angles: tuple[int, ...] = (0, 45, 90, 135),
                  c: int = 4, identical: bool = False,
                  params: attention.AttentionParams | None = None) -> dict:
    """Seeded random inputs for one registered op."""
    if op not in GRAD_OPS:
        raise ValueError(f"unknown gradient-checked op '{op}'; known: {sorted(GRAD_OPS)}")
    rng = np.random.default_rng(seed)
    bins = glcm.BinningConfig.uniform(n_bins)
    grid = texture.OffsetGrid(distances, angles)
    if op == "texture_loss":
        return _build_texture_loss(rng, size, bins, grid, params, identical=identical)
    return GRAD_OPS[op]["build"](rng, size, bins, grid, params)


def _fd_image(loss, inst, key: str, step: float) -> np.ndarray:
    base = inst[key].data
    grad = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        plus, minus = base.copy(), base.copy()
        plus[idx] += step
        minus[idx] -= step
        hi = loss(inst, **{key: GrayImage(plus, PixelDomain.NORMALIZED)})
        lo = loss(inst, **{key: GrayImage(minus, PixelDomain.NORMALIZED)})
        grad[idx] = (hi - lo) / (2.0 * step)
    return grad


def _fd_params(loss, inst, step: float) -> dict[str, np.ndarray]:
    params: attention.AttentionParams = inst["params"]
    out = {}
    for name in ("w_q", "w_k"):
        vec = getattr(params, name)
        grad = np.zeros_like(vec)
        for i in range(vec.size):
            plus, minus = vec.copy(), vec.copy()
            plus[i] += step
            minus[i] -= step
            grad[i] = (loss(inst, params=params.replace(**{name: plus}))
                       - loss(inst, params=params.replace(**{name: minus}))) / (2.0 * step)
        out[name] = grad
    for name in ("w_v", "gamma"):
        val = getattr(params, name)
        out[name] = np.float64(
            (loss(inst, params=params.replace(**{name: val + step}))
             - loss(inst, params=params.replace(**{name: val - step}))) / (2.0 * step))
    return out


def _max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Worst deviation relative to the block's largest gradient magnitude.

    Per-component denominators would let finite-difference truncation noise
    on near-zero components dominate, so the block scale sets the reference.
    """
    analytic = np.atleast_1d(np.asarray(analytic, dtype=np.float64))
    numeric = np.atleast_1d(np.asarray(numeric, dtype=np.float64))
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), _REL_FLOOR)
    return float(np.abs(analytic - numeric).max() / scale)


def grad_check(op: str, instance: dict | None = None, step: float = 1e-4,
               tolerance: float = 1e-4, seed: int = 0, **instance_kw) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Returns a per-block report; a failing block never raises.
    """
    if op not in GRAD_OPS:
        raise ValueError(f"unknown gradient-checked op '{op}'; known: {sorted(GRAD_OPS)}")
    if step <= 0 or tolerance <= 0:
        raise ValueError("step and tolerance must be positive")
    entry = GRAD_OPS[op]
    inst = instance if instance is not None else make_instance(op, seed, **instance_kw)
    analytic = entry["analytic"](inst)
    loss = entry["loss"]

    numeric: dict[str, np.ndarray] = {}
    for key in analytic:
        if key in ("image", "img_a", "img_b"):
            numeric[key] = _fd_image(loss, inst, "img" if key == "image" else key, step)
    if op == "texture_loss":
        numeric.update(_fd_params(loss, inst, step))

    blocks = []
    for name, a in analytic.items():
        err = _max_rel_error(a, numeric[name])
        blocks.append(GradCheckBlock(name, err, err < tolerance))
    return GradCheckReport(op, step, tolerance, tuple(blocks))
