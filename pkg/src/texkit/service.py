"""FastAPI service around the texture toolkit.

Every endpoint is stateless: requests carry the full configuration, so
any number of clients can share one instance. The CLI reuses the same
handlers through an in-process dispatch table, which keeps command-line
and HTTP results identical byte for byte.

Run with:  uvicorn texkit.service:app
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__, schemas as s
from .attention import AttentionParams, texture_loss, texture_loss_backward
from .errors import NumericError, TexkitError
from .glcm import Offset, soft_glcm_forward
from .gradcheck import grad_check
from .image import PreprocessConfig, preprocess
from .optimize import OptimizeConfig, texture_match_optimize
from .radiomics import FeatureTable, feature_table
from .stats import alignment_workflow, frechet_distance, welch_test
from .texture import texture_matrix


def _to_table(m: s.TableModel) -> FeatureTable:
    return FeatureTable(m.ids, m.features, np.asarray(m.values, dtype=np.float64))


def _from_table(t: FeatureTable) -> s.TableModel:
    return s.TableModel(ids=t.ids, features=t.features, values=t.values.tolist())


def handle_health(_: None = None) -> s.HealthResponse:
    return s.HealthResponse(status="ok", version=__version__)


def handle_preprocess(req: s.PreprocessRequest) -> s.PreprocessResponse:
    cfg = PreprocessConfig(rescale_slope=req.rescale_slope,
                           rescale_intercept=req.rescale_intercept,
                           target_spacing=req.target_spacing, canvas_size=req.canvas_size,
                           background=req.background,
                           clamp_window=(req.clamp_min, req.clamp_max))
    out = preprocess(req.image.to_image(), cfg, req.bbox)
    return s.PreprocessResponse(image=s.ImageModel.from_image(out))


def handle_params_init(req: s.ParamsInitRequest) -> s.AttentionModel:
    return s.AttentionModel.from_params(AttentionParams.initialize(req.c, req.seed))


def handle_glcm(req: s.GlcmRequest) -> s.GlcmResponse:
    out = soft_glcm_forward(req.image.to_image(), Offset(req.d, req.theta),
                            req.binning.to_binning())
    return s.GlcmResponse(matrix=out.matrix.tolist(), valid_pairs=out.valid_pairs)


def handle_texture(req: s.TextureRequest) -> s.TextureResponse:
    grid = req.grid.to_grid()
    tm = texture_matrix(req.image.to_image(), grid, req.binning.to_binning(), req.workers)
    return s.TextureResponse(values=tm.values.tolist(), distances=list(grid.distances),
                             angles=list(grid.angles))


def _resolve_params(params: s.AttentionModel | None, c: int, seed: int) -> AttentionParams:
    if params is not None:
        return params.to_params()
    return AttentionParams.initialize(c, seed)


def handle_loss(req: s.LossRequest) -> s.LossResponse:
    params = _resolve_params(req.params, req.attention_c, req.seed)
    grid = req.grid.to_grid()
    out = texture_loss(req.image_a.to_image(), req.image_b.to_image(), grid,
                       req.binning.to_binning(), params, req.workers)
    resp = s.LossResponse(loss=out.loss, delta_prime=out.delta_prime.tolist(),
                          angles=list(grid.angles), params=s.AttentionModel.from_params(params))
    if req.with_gradients:
        grad_a, grad_b, pgrads = texture_loss_backward(out)
        resp.grad_a = grad_a.tolist()
        resp.grad_b = grad_b.tolist()
        resp.param_grads = s.ParamGradsModel(w_q=pgrads["w_q"].tolist(),
                                             w_k=pgrads["w_k"].tolist(),
                                             w_v=pgrads["w_v"], gamma=pgrads["gamma"])
    return resp


def handle_gradcheck(req: s.GradCheckRequest) -> s.GradCheckResponse:
    report = grad_check(req.op, step=req.step, tolerance=req.tolerance, seed=req.seed,
                        size=req.size, n_bins=req.n_bins,
                        distances=tuple(req.distances), angles=tuple(req.angles))
    return s.GradCheckResponse(
        op=report.op, step=report.step, tolerance=report.tolerance,
        blocks=[s.GradCheckBlockModel(name=b.name, max_rel_error=b.max_rel_error,
                                      passed=b.passed) for b in report.blocks],
        passed=report.passed)


def handle_optimize(req: s.OptimizeRequest) -> s.OptimizeResponse:
    cfg = OptimizeConfig(iterations=req.iterations, step_size=req.step_size,
                         momentum=req.momentum, learn_attention=req.learn_attention,
                         backtrack=req.backtrack, seed=req.seed, log_every=req.log_every)
    params = req.params.to_params() if req.params is not None else None
    traj = texture_match_optimize(req.source.to_image(), req.target.to_image(),
                                  req.grid.to_grid(), req.binning.to_binning(),
                                  params, cfg, req.workers)
    return s.OptimizeResponse(losses=traj.losses.tolist(),
                              final=s.ImageModel.from_image(traj.final),
                              texture_final=traj.texture_final.values.tolist(),
                              texture_target=traj.texture_target.values.tolist(),
                              angles=list(req.grid.angles),
                              params=s.AttentionModel.from_params(traj.params))


def handle_features(req: s.FeaturesRequest) -> s.FeaturesResponse:
    if len(req.images) != len(req.ids):
        raise ValueError(f"{len(req.images)} images but {len(req.ids)} ids")
    if len(set(req.ids)) != len(req.ids):
        raise ValueError("image ids must be unique")
    images = {i: m.to_image() for i, m in zip(req.ids, req.images)}
    table = feature_table(images, req.d, req.binning.to_binning())
    return s.FeaturesResponse(table=_from_table(table))


def handle_welch(req: s.WelchRequest) -> s.WelchResponse:
    ta, tb = _to_table(req.table_a), _to_table(req.table_b)
    if ta.features != tb.features:
        raise ValueError("tables disagree on feature names")
    rows = []
    for f in ta.features:
        r = welch_test(ta.column(f), tb.column(f))
        rows.append(s.WelchRowModel(feature=f, t_stat=r.t_stat, dof=r.dof, p_value=r.p_value))
    return s.WelchResponse(results=rows)


def handle_align(req: s.AlignRequest) -> s.AlignResponse:
    report = alignment_workflow((_to_table(req.before_a), _to_table(req.before_b)),
                                (_to_table(req.after_a), _to_table(req.after_b)), req.alpha)

    def rows(results):
        return [s.WelchRowModel(feature=f, t_stat=r.t_stat, dof=r.dof, p_value=r.p_value)
                for f, r in results.items()]

    return s.AlignResponse(features=report.features, alpha=report.alpha,
                           before=rows(report.before), after=rows(report.after),
                           r_features=report.r_features, z_features=report.z_features,
                           percentage=report.percentage)


def handle_frechet(req: s.FrechetRequest) -> s.FrechetResponse:
    return s.FrechetResponse(distance=frechet_distance(req.mu_r, req.cov_r,
                                                       req.mu_g, req.cov_g))


# Path -> (request model, handler, response model). The CLI drives the same
# table in-process; FastAPI wires it to HTTP below.
ROUTES = {
    "/params": (s.ParamsInitRequest, handle_params_init, s.AttentionModel),
    "/preprocess": (s.PreprocessRequest, handle_preprocess, s.PreprocessResponse),
    "/glcm": (s.GlcmRequest, handle_glcm, s.GlcmResponse),
    "/texture": (s.TextureRequest, handle_texture, s.TextureResponse),
    "/loss": (s.LossRequest, handle_loss, s.LossResponse),
    "/gradcheck": (s.GradCheckRequest, handle_gradcheck, s.GradCheckResponse),
    "/optimize": (s.OptimizeRequest, handle_optimize, s.OptimizeResponse),
    "/features": (s.FeaturesRequest, handle_features, s.FeaturesResponse),
    "/welch": (s.WelchRequest, handle_welch, s.WelchResponse),
    "/align": (s.AlignRequest, handle_align, s.AlignResponse),
    "/frechet": (s.FrechetRequest, handle_frechet, s.FrechetResponse),
}


def error_kind(exc: Exception) -> str:
    if isinstance(exc, NumericError):
        return "numeric"
    if isinstance(exc, TexkitError):
        return "data"
    return "usage"


def create_app() -> FastAPI:
    app = FastAPI(title="texkit service", version=__version__)

    @app.exception_handler(ValueError)
    @app.exception_handler(TexkitError)
    async def _tool_error(_: Request, exc: Exception):
        kind = error_kind(exc)
        status = {"usage": 400, "data": 422, "numeric": 500}[kind]
        return JSONResponse(status_code=status,
                            content={"detail": {"kind": kind, "message": str(exc)}})

    @app.get("/health", response_model=s.HealthResponse)
    async def health():
        return handle_health()

    @app.post("/params", response_model=s.AttentionModel)
    async def route_params(req: s.ParamsInitRequest):
        return handle_params_init(req)

    @app.post("/preprocess", response_model=s.PreprocessResponse)
    async def route_preprocess(req: s.PreprocessRequest):
        return handle_preprocess(req)

    @app.post("/glcm", response_model=s.GlcmResponse)
    async def route_glcm(req: s.GlcmRequest):
        return handle_glcm(req)

    @app.post("/texture", response_model=s.TextureResponse)
    async def route_texture(req: s.TextureRequest):
        return handle_texture(req)

    @app.post("/loss", response_model=s.LossResponse)
    async def route_loss(req: s.LossRequest):
        return handle_loss(req)

    @app.post("/gradcheck", response_model=s.GradCheckResponse)
    async def route_gradcheck(req: s.GradCheckRequest):
        return handle_gradcheck(req)

    @app.post("/optimize", response_model=s.OptimizeResponse)
    async def route_optimize(req: s.OptimizeRequest):
        return handle_optimize(req)

    @app.post("/features", response_model=s.FeaturesResponse)
    async def route_features(req: s.FeaturesRequest):
        return handle_features(req)

    @app.post("/welch", response_model=s.WelchResponse)
    async def route_welch(req: s.WelchRequest):
        return handle_welch(req)

    @app.post("/align", response_model=s.AlignResponse)
    async def route_align(req: s.AlignRequest):
        return handle_align(req)

    @app.post("/frechet", response_model=s.FrechetResponse)
    async def route_frechet(req: s.FrechetRequest):
        return handle_frechet(req)

    return app


app = create_app()
