"""Command-line client for the texture service.

Every subcommand builds a request model, sends it through the service
layer (in-process by default, or to a running server with ``--server``),
and renders the response with stable 9-significant-digit formatting.
One command per process; identical inputs, config, and seed produce
byte-identical outputs.

Exit codes: 0 success, 2 usage, 3 data, 4 numeric.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import httpx
import numpy as np
import pydantic

from . import schemas as s
from .attention import load_params, save_params
from .config import RunConfig, load_config
from .errors import TexkitError
from .formatting import matrix_csv, sci9, vector_csv
from .image import GrayImage, load_image, save_image
from .radiomics import FeatureTable
from .service import ROUTES, error_kind

_EXIT_CODES = {"usage": 2, "data": 3, "numeric": 4}


class ClientError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class ServiceClient:
    """Thin transport: local in-process dispatch or HTTP to a server."""

    def __init__(self, server: str | None = None):
        self.server = server.rstrip("/") if server else None

    def post(self, path, request, response_cls):
        payload = request.model_dump_json()
        if self.server is None:
            req_cls, handler, resp_cls = ROUTES[path]
            try:
                resp = handler(req_cls.model_validate_json(payload))
            except (ValueError, TexkitError) as exc:
                raise ClientError(error_kind(exc), str(exc)) from exc
            return response_cls.model_validate_json(resp.model_dump_json())
        try:
            r = httpx.post(self.server + path, content=payload,
                           headers={"content-type": "application/json"}, timeout=600.0)
        except httpx.HTTPError as exc:
            raise ClientError("data", f"cannot reach server {self.server}: {exc}") from exc
        if r.status_code != 200:
            raise ClientError(*_parse_error(r))
        return response_cls.model_validate_json(r.text)


def _parse_error(r: httpx.Response) -> tuple[str, str]:
    try:
        detail = r.json().get("detail")
    except ValueError:
        return "data", f"server returned status {r.status_code}"
    if isinstance(detail, dict) and "kind" in detail:
        return detail["kind"], detail.get("message", "")
    return "usage", f"request rejected by server: {detail}"


# ---------------------------------------------------------------------------
# Shared request pieces
# ---------------------------------------------------------------------------

def _binning_model(cfg: RunConfig) -> s.BinningModel:
    return s.BinningModel(n_bins=cfg.n_bins, sigma=cfg.sigma,
                          bin_centers=list(cfg.bin_centers) if cfg.bin_centers else None)


def _grid_model(cfg: RunConfig) -> s.GridModel:
    return s.GridModel(distances=list(cfg.distances), angles=list(cfg.angles))


def _params_model(cfg: RunConfig) -> s.AttentionModel | None:
    if cfg.params_file is not None:
        return s.AttentionModel.from_params(load_params(cfg.params_file))
    return None


def _load_image_model(path: str, spacing: tuple[float, float] | None = None) -> s.ImageModel:
    img = load_image(path)
    if spacing is not None:
        img = GrayImage(img.data, img.domain, spacing)
    return s.ImageModel.from_image(img)


def _angle_header(angles: list[int]) -> list[str]:
    return [f"theta_{a}" for a in angles]


def _write_or_print(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _merge(cfg: RunConfig, args, keys: dict[str, str]) -> RunConfig:
    updates = {}
    for arg_name, cfg_name in keys.items():
        value = getattr(args, arg_name, None)
        if value is not None:
            updates[cfg_name] = value
    return replace(cfg, **updates)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v.strip()) for v in text.split(","))


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v.strip()) for v in text.split(","))


def _bbox(text: str) -> tuple[int, int, int, int]:
    parts = _ints(text)
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("bbox needs 4 integers: row0,col0,row1,col1")
    return parts  # type: ignore[return-value]


def _pair(text: str) -> tuple[float, float]:
    parts = _floats(text)
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected 2 comma-separated numbers")
    return parts  # type: ignore[return-value]


def _read_moments(path: str) -> tuple[list[float], list[list[float]]]:
    """Moments file: first row the mean, then k rows of covariance."""
    try:
        rows = [_floats(line) for line in Path(path).read_text().splitlines()
                if line.strip() and not line.lstrip().startswith("#")]
    except FileNotFoundError:
        raise ClientError("data", f"no such moments file: {path}") from None
    except ValueError as exc:
        raise ClientError("data", f"{path}: {exc}") from None
    if len(rows) < 2:
        raise ClientError("data", f"{path}: expected a mean row plus covariance rows")
    mean, cov = list(rows[0]), [list(r) for r in rows[1:]]
    if len(cov) != len(mean) or any(len(r) != len(mean) for r in cov):
        raise ClientError("data", f"{path}: covariance must be {len(mean)}x{len(mean)}")
    return mean, cov


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_preprocess(args, cfg: RunConfig, client: ServiceClient) -> int:
    cfg = _merge(cfg, args, {"slope": "rescale_slope", "intercept": "rescale_intercept",
                             "target_spacing": "target_spacing", "canvas": "canvas_size",
                             "background": "background"})
    if args.window is not None:
        cfg = replace(cfg, clamp_min=args.window[0], clamp_max=args.window[1])
    req = s.PreprocessRequest(image=_load_image_model(args.input, args.spacing),
                              rescale_slope=cfg.rescale_slope,
                              rescale_intercept=cfg.rescale_intercept,
                              target_spacing=cfg.target_spacing, canvas_size=cfg.canvas_size,
                              background=cfg.background, clamp_min=cfg.clamp_min,
                              clamp_max=cfg.clamp_max, bbox=args.bbox)
    resp = client.post("/preprocess", req, s.PreprocessResponse)
    save_image(resp.image.to_image(), args.output)
    print(f"wrote {args.output}")
    return 0


def cmd_glcm(args, cfg: RunConfig, client: ServiceClient) -> int:
    req = s.GlcmRequest(image=_load_image_model(args.image), d=args.d, theta=args.theta,
                        binning=_binning_model(cfg))
    resp = client.post("/glcm", req, s.GlcmResponse)
    _write_or_print(matrix_csv(np.asarray(resp.matrix)), args.output)
    if args.output is not None:
        print(f"valid_pairs = {resp.valid_pairs}")
    return 0


def cmd_texture(args, cfg: RunConfig, client: ServiceClient) -> int:
    req = s.TextureRequest(image=_load_image_model(args.image), grid=_grid_model(cfg),
                           binning=_binning_model(cfg), workers=cfg.threads)
    resp = client.post("/texture", req, s.TextureResponse)
    csv_text = matrix_csv(np.asarray(resp.values), _angle_header(resp.angles))
    _write_or_print(csv_text, args.output)
    return 0


def cmd_loss(args, cfg: RunConfig, client: ServiceClient) -> int:
    req = s.LossRequest(image_a=_load_image_model(args.image_a),
                        image_b=_load_image_model(args.image_b),
                        grid=_grid_model(cfg), binning=_binning_model(cfg),
                        params=_params_model(cfg), attention_c=cfg.attention_c,
                        seed=cfg.seed, with_gradients=args.grad_prefix is not None,
                        workers=cfg.threads)
    resp = client.post("/loss", req, s.LossResponse)
    print(sci9(resp.loss))
    if args.delta_out is not None:
        Path(args.delta_out).write_text(
            matrix_csv(np.asarray(resp.delta_prime), _angle_header(resp.angles)))
    if args.grad_prefix is not None:
        prefix = args.grad_prefix
        Path(f"{prefix}_img_a.csv").write_text(matrix_csv(np.asarray(resp.grad_a)))
        Path(f"{prefix}_img_b.csv").write_text(matrix_csv(np.asarray(resp.grad_b)))
        g = resp.param_grads
        rows = [(f"w_q_{i}", v) for i, v in enumerate(g.w_q)]
        rows += [(f"w_k_{i}", v) for i, v in enumerate(g.w_k)]
        rows += [("w_v", g.w_v), ("gamma", g.gamma)]
        Path(f"{prefix}_params.csv").write_text(vector_csv(rows, ["param", "gradient"]))
    return 0


def cmd_gradcheck(args, cfg: RunConfig, client: ServiceClient) -> int:
    req = s.GradCheckRequest(op=args.op, seed=cfg.seed, step=args.step,
                             tolerance=args.tolerance, size=args.size, n_bins=cfg.n_bins,
                             distances=list(cfg.distances), angles=list(cfg.angles))
    resp = client.post("/gradcheck", req, s.GradCheckResponse)
    for block in resp.blocks:
        status = "PASS" if block.passed else "FAIL"
        print(f"{status} {resp.op}.{block.name} max_rel_error = {sci9(block.max_rel_error)}")
    print(f"gradcheck {resp.op}: {'PASS' if resp.passed else 'FAIL'} "
          f"(step = {sci9(resp.step)}, tolerance = {sci9(resp.tolerance)})")
    return 0


def cmd_optimize(args, cfg: RunConfig, client: ServiceClient) -> int:
    req = s.OptimizeRequest(source=_load_image_model(args.source),
                            target=_load_image_model(args.target),
                            grid=_grid_model(cfg), binning=_binning_model(cfg),
                            params=_params_model(cfg), attention_c=cfg.attention_c,
                            iterations=cfg.iterations, step_size=cfg.step_size,
                            momentum=cfg.momentum, learn_attention=cfg.learn_attention,
                            backtrack=cfg.backtrack, seed=cfg.seed, log_every=cfg.log_every,
                            workers=cfg.threads)
    resp = client.post("/optimize", req, s.OptimizeResponse)
    rows = [(str(i), loss) for i, loss in enumerate(resp.losses)]
    Path(args.trajectory).write_text(vector_csv(rows, ["iteration", "loss"]))
    save_image(resp.final.to_image(), args.out_image)
    if args.save_params is not None:
        save_params(resp.params.to_params(), args.save_params)
    print(sci9(resp.losses[-1]))
    return 0


def cmd_features(args, cfg: RunConfig, client: ServiceClient) -> int:
    cfg = _merge(cfg, args, {"distance": "feature_distance"})
    ids = [Path(p).stem for p in args.images]
    req = s.FeaturesRequest(images=[_load_image_model(p) for p in args.images], ids=ids,
                            d=cfg.feature_distance, binning=_binning_model(cfg))
    resp = client.post("/features", req, s.FeaturesResponse)
    table = FeatureTable(resp.table.ids, resp.table.features,
                         np.asarray(resp.table.values))
    _write_or_print(table.to_csv(), args.output)
    return 0


def _table_model(path: str) -> s.TableModel:
    t = FeatureTable.read(path)
    return s.TableModel(ids=t.ids, features=t.features, values=t.values.tolist())


def cmd_welch(args, cfg: RunConfig, client: ServiceClient) -> int:
    req = s.WelchRequest(table_a=_table_model(args.table_a), table_b=_table_model(args.table_b))
    resp = client.post("/welch", req, s.WelchResponse)
    rows = [(r.feature, r.t_stat, r.dof, r.p_value) for r in resp.results]
    _write_or_print(vector_csv(rows, ["feature", "t_stat", "dof", "p_value"]), args.output)
    return 0


def cmd_align(args, cfg: RunConfig, client: ServiceClient) -> int:
    cfg = _merge(cfg, args, {"alpha": "alpha"})
    req = s.AlignRequest(before_a=_table_model(args.before_a),
                         before_b=_table_model(args.before_b),
                         after_a=_table_model(args.after_a),
                         after_b=_table_model(args.after_b), alpha=cfg.alpha)
    resp = client.post("/align", req, s.AlignResponse)
    if args.output is not None:
        after = {r.feature: r for r in resp.after}
        rows = []
        for r in resp.before:
            a = after.get(r.feature)
            rows.append((r.feature, r.t_stat, r.dof, r.p_value,
                         str(int(r.feature in resp.r_features)),
                         a.t_stat if a else "", a.dof if a else "", a.p_value if a else "",
                         str(int(r.feature in resp.z_features))))
        Path(args.output).write_text(vector_csv(
            rows, ["feature", "t_before", "dof_before", "p_before", "in_r",
                   "t_after", "dof_after", "p_after", "in_z"]))
    print(f"features tested: {len(resp.features)}")
    print(f"significance threshold: p < {resp.alpha:g}")
    print(f"misaligned before (R): {len(resp.r_features)}"
          + (f" [{', '.join(resp.r_features)}]" if resp.r_features else ""))
    print(f"aligned after (Z): {len(resp.z_features)}"
          + (f" [{', '.join(resp.z_features)}]" if resp.z_features else ""))
    if resp.percentage is None:
        print("alignment percentage: undefined (R is empty)")
    else:
        print(f"alignment percentage: {resp.percentage:.2f}")
    return 0


def cmd_frechet(args, cfg: RunConfig, client: ServiceClient) -> int:
    mu_r, cov_r = _read_moments(args.real)
    mu_g, cov_g = _read_moments(args.generated)
    req = s.FrechetRequest(mu_r=mu_r, cov_r=cov_r, mu_g=mu_g, cov_g=cov_g)
    resp = client.post("/frechet", req, s.FrechetResponse)
    print(sci9(resp.distance))
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--server", help="base URL of a running texkit service "
                                         "(default: run in-process)")
    common.add_argument("--threads", type=int, help="cap parallel workers")
    common.add_argument("--bins", dest="n_bins", type=int, help="number of intensity bins")
    common.add_argument("--sigma", type=float, help="soft assignment width")
    common.add_argument("--bin-centers", type=_floats, help="explicit bin centers a,b,...")
    common.add_argument("--distances", type=_ints, help="spatial offsets, e.g. 1,3,5,7")
    common.add_argument("--angles", type=_ints, help="angular offsets, e.g. 0,45,90,135")
    common.add_argument("--seed", type=int, help="seed for attention init")
    common.add_argument("--params", dest="params_file", help="attention parameter file")
    common.add_argument("--attention-c", type=int, help="attention channel count")

    parser = argparse.ArgumentParser(
        prog="texkit",
        description="Multi-scale texture descriptors, texture loss, and evaluation stats.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", parents=[common],
                       help="rescale to HU, resample, center on canvas, normalize")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--slope", type=float, help="raw-count rescale slope")
    p.add_argument("--intercept", type=float, help="raw-count rescale intercept")
    p.add_argument("--spacing", type=_pair, help="input pixel spacing row_mm,col_mm")
    p.add_argument("--target-spacing", type=float, help="output pixel spacing in mm")
    p.add_argument("--bbox", type=_bbox, help="content box row0,col0,row1,col1 (half-open)")
    p.add_argument("--canvas", type=int, help="output canvas size in pixels")
    p.add_argument("--background", type=float, help="canvas fill value in HU")
    p.add_argument("--window", type=_pair, help="HU clamp window lo,hi for normalization")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("glcm", parents=[common], help="soft co-occurrence matrix as CSV")
    p.add_argument("image")
    p.add_argument("-d", type=int, default=1, help="offset distance in pixels")
    p.add_argument("--theta", type=int, default=0, choices=(0, 45, 90, 135))
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_glcm)

    p = sub.add_parser("texture", parents=[common], help="multi-scale texture matrix as CSV")
    p.add_argument("image")
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_texture)

    p = sub.add_parser("loss", parents=[common],
                       help="texture loss between two images")
    p.add_argument("image_a")
    p.add_argument("image_b")
    p.add_argument("-o", "--delta-out", help="write the aggregated deviation matrix CSV")
    p.add_argument("--grad-prefix", help="write gradients to <prefix>_img_a.csv, "
                                         "<prefix>_img_b.csv, <prefix>_params.csv")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("gradcheck", parents=[common],
                       help="compare analytic gradients against finite differences")
    p.add_argument("--op", default="texture_loss",
                   choices=("soft_glcm", "texture_matrix", "texture_loss"))
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--size", type=int, default=8, help="test image side length")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("optimize", parents=[common],
                       help="gradient descent on pixels toward a target texture")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--out-image", required=True, help="final image path (.img)")
    p.add_argument("--trajectory", required=True, help="iteration,loss CSV path")
    p.add_argument("--save-params", help="write final attention parameters")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("features", parents=[common],
                       help="hard-GLCM feature table for a set of images")
    p.add_argument("images", nargs="+")
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    p.add_argument("-d", "--distance", type=int, help="co-occurrence distance")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("welch", parents=[common],
                       help="per-feature Welch tests between two feature tables")
    p.add_argument("table_a")
    p.add_argument("table_b")
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_welch)

    p = sub.add_parser("align", parents=[common],
                       help="before/after alignment report over feature tables")
    p.add_argument("before_a")
    p.add_argument("before_b")
    p.add_argument("after_a")
    p.add_argument("after_b")
    p.add_argument("--alpha", type=float, help="significance threshold")
    p.add_argument("-o", "--output", help="per-feature CSV path")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("frechet", parents=[common],
                       help="Fréchet distance between two Gaussian moment files")
    p.add_argument("real", help="moments CSV: mean row, then covariance rows")
    p.add_argument("generated")
    p.set_defaults(func=cmd_frechet)

    return parser


def _apply_common_overrides(cfg: RunConfig, args) -> RunConfig:
    cfg = _merge(cfg, args, {"threads": "threads", "n_bins": "n_bins", "sigma": "sigma",
                             "bin_centers": "bin_centers", "distances": "distances",
                             "angles": "angles", "seed": "seed", "params_file": "params_file",
                             "attention_c": "attention_c"})
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = _apply_common_overrides(cfg, args)
        client = ServiceClient(args.server)
        return args.func(args, cfg, client)
    except ClientError as exc:
        print(f"texkit: {exc.kind} error: {exc}", file=sys.stderr)
        return _EXIT_CODES[exc.kind]
    except pydantic.ValidationError as exc:
        print(f"texkit: usage error: {exc}", file=sys.stderr)
        return 2
    except TexkitError as exc:
        print(f"texkit: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"texkit: usage error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"texkit: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
