"""Pydantic request/response models for the texture service."""

from __future__ import annotations

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict

from .attention import AttentionParams
from .glcm import BinningConfig
from .image import GrayImage, PixelDomain
from .texture import OffsetGrid


class StrictModel(BaseModel):
    # "constants" keeps degenerate Welch statistics (t = +-inf) intact in JSON.
    model_config = ConfigDict(extra="forbid", ser_json_inf_nan="constants")


class ImageModel(StrictModel):
    data: list[list[float]]
    domain: Literal["raw", "hounsfield", "normalized"] = "normalized"
    spacing: tuple[float, float] | None = None

    def to_image(self) -> GrayImage:
        return GrayImage(np.asarray(self.data, dtype=np.float64),
                         PixelDomain(self.domain), self.spacing)

    @classmethod
    def from_image(cls, img: GrayImage) -> "ImageModel":
        return cls(data=img.data.tolist(), domain=img.domain.value, spacing=img.spacing)


class BinningModel(StrictModel):
    n_bins: int = 32
    bin_centers: list[float] | None = None
    sigma: float | None = None

    def to_binning(self) -> BinningConfig:
        if self.bin_centers is not None:
            sigma = self.sigma
            if sigma is None:
                if len(self.bin_centers) < 2:
                    raise ValueError("need at least two bin centers")
                sigma = (self.bin_centers[1] - self.bin_centers[0]) / 2.0
            return BinningConfig(self.bin_centers, sigma)
        return BinningConfig.uniform(self.n_bins, self.sigma)


class GridModel(StrictModel):
    distances: list[int] = [1, 3, 5, 7]
    angles: list[int] = [0, 45, 90, 135]

    def to_grid(self) -> OffsetGrid:
        return OffsetGrid(tuple(self.distances), tuple(self.angles))


class AttentionModel(StrictModel):
    w_q: list[float]
    w_k: list[float]
    w_v: float
    gamma: float = 0.0
    seed: int | None = None

    def to_params(self) -> AttentionParams:
        return AttentionParams(self.w_q, self.w_k, self.w_v, self.gamma, self.seed)

    @classmethod
    def from_params(cls, p: AttentionParams) -> "AttentionModel":
        return cls(w_q=p.w_q.tolist(), w_k=p.w_k.tolist(), w_v=p.w_v,
                   gamma=p.gamma, seed=p.seed)


class TableModel(StrictModel):
    ids: list[str]
    features: list[str]
    values: list[list[float]]


class ParamsInitRequest(StrictModel):
    c: int = 4
    seed: int = 0


class HealthResponse(StrictModel):
    status: str
    version: str


class PreprocessRequest(StrictModel):
    image: ImageModel
    rescale_slope: float = 1.0
    rescale_intercept: float = 0.0
    target_spacing: float = 1.0
    canvas_size: int = 512
    background: float = -1024.0
    clamp_min: float = -1024.0
    clamp_max: float = 3071.0
    bbox: tuple[int, int, int, int] | None = None


class PreprocessResponse(StrictModel):
    image: ImageModel


class GlcmRequest(StrictModel):
    image: ImageModel
    d: int = 1
    theta: int = 0
    binning: BinningModel = BinningModel()


class GlcmResponse(StrictModel):
    matrix: list[list[float]]
    valid_pairs: int


class TextureRequest(StrictModel):
    image: ImageModel
    grid: GridModel = GridModel()
    binning: BinningModel = BinningModel()
    workers: int = 1


class TextureResponse(StrictModel):
    values: list[list[float]]
    distances: list[int]
    angles: list[int]


class LossRequest(StrictModel):
    image_a: ImageModel
    image_b: ImageModel
    grid: GridModel = GridModel()
    binning: BinningModel = BinningModel()
    params: AttentionModel | None = None
    attention_c: int = 4
    seed: int = 0
    with_gradients: bool = False
    workers: int = 1


class ParamGradsModel(StrictModel):
    w_q: list[float]
    w_k: list[float]
    w_v: float
    gamma: float


class LossResponse(StrictModel):
    loss: float
    delta_prime: list[list[float]]
    angles: list[int]
    params: AttentionModel
    grad_a: list[list[float]] | None = None
    grad_b: list[list[float]] | None = None
    param_grads: ParamGradsModel | None = None


class GradCheckRequest(StrictModel):
    op: Literal["soft_glcm", "texture_matrix", "texture_loss"]
    seed: int = 0
    step: float = 1e-4
    tolerance: float = 1e-4
    size: int = 8
    n_bins: int = 8
    distances: list[int] = [1, 2]
    angles: list[int] = [0, 45, 90, 135]


class GradCheckBlockModel(StrictModel):
    name: str
    max_rel_error: float
    passed: bool


class GradCheckResponse(StrictModel):
    op: str
    step: float
    tolerance: float
    blocks: list[GradCheckBlockModel]
    passed: bool


class OptimizeRequest(StrictModel):
    source: ImageModel
    target: ImageModel
    grid: GridModel = GridModel()
    binning: BinningModel = BinningModel()
    params: AttentionModel | None = None
    attention_c: int = 4
    iterations: int = 500
    step_size: float = 0.05
    momentum: float = 0.9
    learn_attention: bool = False
    backtrack: bool = True
    seed: int = 0
    log_every: int = 50
    workers: int = 1


class OptimizeResponse(StrictModel):
    losses: list[float]
    final: ImageModel
    texture_final: list[list[float]]
    texture_target: list[list[float]]
    angles: list[int]
    params: AttentionModel


class FeaturesRequest(StrictModel):
    images: list[ImageModel]
    ids: list[str]
    d: int = 1
    binning: BinningModel = BinningModel()


class FeaturesResponse(StrictModel):
    table: TableModel


class WelchRequest(StrictModel):
    table_a: TableModel
    table_b: TableModel


class WelchRowModel(StrictModel):
    feature: str
    t_stat: float
    dof: float
    p_value: float


class WelchResponse(StrictModel):
    results: list[WelchRowModel]


class AlignRequest(StrictModel):
    before_a: TableModel
    before_b: TableModel
    after_a: TableModel
    after_b: TableModel
    alpha: float = 0.01


class AlignResponse(StrictModel):
    features: list[str]
    alpha: float
    before: list[WelchRowModel]
    after: list[WelchRowModel]
    r_features: list[str]
    z_features: list[str]
    percentage: float | None


class FrechetRequest(StrictModel):
    mu_r: list[float]
    cov_r: list[list[float]]
    mu_g: list[float]
    cov_g: list[list[float]]


class FrechetResponse(StrictModel):
    distance: float
