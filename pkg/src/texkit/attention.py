"""Attention-aggregated texture loss between two images.

The elementwise absolute deviation between two texture matrices is
flattened to a vector x, pushed through a single-head self-attention
layer (1x1 projections without bias), and summed:

    scores(i, j) = (w_q . w_k) * x_i * x_j       queries vs keys
    A            = row softmax of scores
    y            = gamma * A (w_v x) + x
    loss         = sum(y)

Computing the score matrix through the collapsed scalar alpha = w_q . w_k
is exact for single-channel input and makes two parameter sets with equal
alpha produce bitwise-identical attention maps. With gamma = 0 the loss
reduces to the plain L1 sum, and identical inputs give exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, NumericError
from .glcm import BinningConfig
from .image import GrayImage
from .texture import OffsetGrid, TextureMatrix, texture_matrix, texture_matrix_backward


@dataclass(frozen=True)
class AttentionParams:
    """Projection weights and the trainable aggregation gain gamma."""

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: float
    gamma: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        wq = np.asarray(self.w_q, dtype=np.float64).reshape(-1)
        wk = np.asarray(self.w_k, dtype=np.float64).reshape(-1)
        if wq.size < 1 or wq.size != wk.size:
            raise ValueError(f"w_q and w_k must share a channel count >= 1, got {wq.size} and {wk.size}")
        if not (np.all(np.isfinite(wq)) and np.all(np.isfinite(wk))
                and np.isfinite(self.w_v) and np.isfinite(self.gamma)):
            raise ValueError("attention parameters must be finite")
        object.__setattr__(self, "w_q", wq)
        object.__setattr__(self, "w_k", wk)
        object.__setattr__(self, "w_v", float(self.w_v))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def c(self) -> int:
        return int(self.w_q.size)

    @classmethod
    def initialize(cls, c: int = 4, seed: int = 0) -> "AttentionParams":
        """Seeded uniform [-0.1, 0.1] projections; gamma starts at 0 so the
        aggregation begins as a plain L1 sum."""
        rng = np.random.default_rng(seed)
        return cls(w_q=rng.uniform(-0.1, 0.1, c), w_k=rng.uniform(-0.1, 0.1, c),
                   w_v=float(rng.uniform(-0.1, 0.1)), gamma=0.0, seed=seed)

    def replace(self, **kw) -> "AttentionParams":
        values = {"w_q": self.w_q, "w_k": self.w_k, "w_v": self.w_v,
                  "gamma": self.gamma, "seed": self.seed}
        values.update(kw)
        return AttentionParams(**values)


def save_params(params: AttentionParams, path: str | Path) -> None:
    lines = [f"c = {params.c}"]
    if params.seed is not None:
        lines.append(f"seed = {params.seed}")
    lines.append(f"gamma = {params.gamma!r}")
    lines.append("w_q = " + ",".join(repr(float(v)) for v in params.w_q))
    lines.append("w_k = " + ",".join(repr(float(v)) for v in params.w_k))
    lines.append(f"w_v = {params.w_v!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_params(path: str | Path) -> AttentionParams:
    kv = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        kv[key] = value
    try:
        params = AttentionParams(
            w_q=[float(v) for v in kv["w_q"].split(",")],
            w_k=[float(v) for v in kv["w_k"].split(",")],
            w_v=float(kv["w_v"]),
            gamma=float(kv.get("gamma", 0.0)),
            seed=int(kv["seed"]) if "seed" in kv else None,
        )
    except KeyError as exc:
        raise FormatError(f"{path}: missing parameter key {exc}") from None
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if "c" in kv and int(kv["c"]) != params.c:
        raise FormatError(f"{path}: c = {kv['c']} does not match {params.c} weights")
    return params


@dataclass
class LossOutput:
    """Scalar loss plus the attention by-products and backward caches."""

    loss: float
    delta_prime: np.ndarray
    attention_map: np.ndarray
    _attn_cache: dict | None = field(repr=False, default=None)
    _pair_cache: dict | None = field(repr=False, default=None)

    def __post_init__(self):
        rows = self.attention_map.sum(axis=1)
        if np.max(np.abs(rows - 1.0)) > 1e-6:
            raise ValueError("attention rows must sum to 1")


def deviation(t: TextureMatrix, t_other: TextureMatrix) -> np.ndarray:
    """Elementwise absolute difference of two texture matrices on one grid."""
    if t.grid != t_other.grid:
        raise ValueError("texture matrices were extracted on different offset grids")
    return np.abs(t.values - t_other.values)


def _row_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def attention_forward(delta: np.ndarray, params: AttentionParams) -> LossOutput:
    """Aggregate a deviation matrix into the scalar loss."""
    delta = np.asarray(delta, dtype=np.float64)
    if delta.ndim != 2:
        raise ValueError(f"deviation must be 2-D, got shape {delta.shape}")
    x = delta.reshape(-1)
    alpha = float(params.w_q @ params.w_k)
    scores = alpha * np.outer(x, x)
    if not np.all(np.isfinite(scores)):
        raise NumericError("attention scores overflowed; deviation values are too large")
    attn = _row_softmax(scores)
    v = params.w_v * x
    av = attn @ v
    y = params.gamma * av + x
    loss = float(y.sum())
    if not np.isfinite(loss):
        raise NumericError("texture loss is non-finite")
    cache = {"x": x, "attn": attn, "v": v, "av": av, "alpha": alpha,
             "params": params, "shape": delta.shape}
    return LossOutput(loss, y.reshape(delta.shape), attn, cache)


def attention_backward(out: LossOutput) -> tuple[np.ndarray, dict[str, np.ndarray | float]]:
    """Gradients of the loss w.r.t. the deviation matrix and the parameters."""
    cache = out._attn_cache
    if cache is None:
        raise ValueError("backward needs the output of attention_forward or texture_loss")
    x, attn, v, av = cache["x"], cache["attn"], cache["v"], cache["av"]
    params: AttentionParams = cache["params"]
    gamma, alpha = params.gamma, cache["alpha"]

    dgamma = float(av.sum())
    dv = gamma * attn.sum(axis=0)
    # Softmax backward with upstream dA[i, j] = gamma * v[j].
    dscores = attn * (gamma * (v[None, :] - av[:, None]))
    dalpha = float(x @ dscores @ x)
    dx = 1.0 + params.w_v * dv + alpha * (dscores @ x + dscores.T @ x)
    grads = {"w_q": dalpha * params.w_k, "w_k": dalpha * params.w_q,
             "w_v": float(dv @ x), "gamma": dgamma}
    return dx.reshape(cache["shape"]), grads


def texture_loss(img_a: GrayImage, img_b: GrayImage, grid: OffsetGrid,
                 bins: BinningConfig, params: AttentionParams,
                 workers: int = 1) -> LossOutput:
    """Texture loss between two images: extract, deviate, aggregate.

    Symmetric in its two arguments by construction of the deviation.
    """
    t_a = texture_matrix(img_a, grid, bins, workers)
    t_b = texture_matrix(img_b, grid, bins, workers)
    out = attention_forward(deviation(t_a, t_b), params)
    out._pair_cache = {"img_a": img_a, "img_b": img_b, "grid": grid, "bins": bins,
                       "t_a": t_a, "t_b": t_b, "workers": workers}
    return out


def texture_loss_backward(out: LossOutput) -> tuple[np.ndarray, np.ndarray, dict]:
    """Gradients w.r.t. both images and the attention parameters.

    The L1 subgradient at exact ties is 0, so identical images produce
    identically zero image gradients.
    """
    pair = out._pair_cache
    if pair is None:
        raise ValueError("backward needs the output of texture_loss, not a bare attention pass")
    ddelta, param_grads = attention_backward(out)
    sign = np.sign(pair["t_a"].values - pair["t_b"].values)
    up_a = ddelta * sign
    grad_a = texture_matrix_backward(pair["img_a"], pair["grid"], pair["bins"], up_a,
                                     pair["workers"])
    grad_b = texture_matrix_backward(pair["img_b"], pair["grid"], pair["bins"], -up_a,
                                     pair["workers"])
    return grad_a, grad_b, param_grads
