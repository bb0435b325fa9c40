/**
 * Client bindings for the texture-loss service.
 *
 * `TextureLoss` holds the loss configuration (binning, offset grid,
 * attention parameters) loaded from the same flat config files the CLI
 * uses, and exposes array-in/array-out `forward` and `backward` so the
 * loss can join an external training loop. All numerics run inside the
 * service; requests carry full state, so one server handles any number
 * of concurrent clients and results match the CLI digit for digit.
 */

import { AttentionParams, RunConfig, loadParamsFile, loadRunConfig } from "./config.js";

export { sci9 } from "./format.js";
export { decodeImg, encodeImg } from "./imgfile.js";
export type { AttentionParams, RunConfig } from "./config.js";
export { loadParamsFile, loadRunConfig, parseParamsFile, parseRunConfig } from "./config.js";

export type ErrorKind = "usage" | "data" | "numeric" | "transport";

export class TextureLossError extends Error {
  readonly kind: ErrorKind;

  constructor(kind: ErrorKind, message: string) {
    super(message);
    this.name = "TextureLossError";
    this.kind = kind;
  }
}

export interface ParamGrads {
  w_q: number[];
  w_k: number[];
  w_v: number;
  gamma: number;
}

/** Opaque handle tying a backward call to its forward inputs. */
export interface LossCache {
  readonly token: symbol;
}

interface CacheInternals {
  token: symbol;
  a: number[][];
  b: number[][];
}

export interface ForwardResult {
  loss: number;
  deltaPrime: number[][];
  cache: LossCache;
}

export interface BackwardResult {
  gradA: number[][];
  gradB: number[][];
  paramGrads: ParamGrads;
}

interface LossResponse {
  loss: number;
  delta_prime: number[][];
  params: AttentionParams & { c?: number };
  grad_a: number[][] | null;
  grad_b: number[][] | null;
  param_grads: ParamGrads | null;
}

const CACHE_TOKEN = Symbol("texture-loss-cache");

function checkImagePair(a: number[][], b: number[][]): void {
  for (const [label, arr] of [["first", a], ["second", b]] as const) {
    if (!Array.isArray(arr) || arr.length === 0 || !Array.isArray(arr[0])) {
      throw new TextureLossError("usage", `texture-loss: ${label} input must be a 2-D array`);
    }
    const width = arr[0].length;
    for (const row of arr) {
      if (row.length !== width) {
        throw new TextureLossError("usage", `texture-loss: ${label} input is ragged`);
      }
      for (const v of row) {
        if (typeof v !== "number" || !Number.isFinite(v)) {
          throw new TextureLossError("usage", `texture-loss: ${label} input has a non-finite value`);
        }
        if (v < -1 || v > 1) {
          throw new TextureLossError(
            "usage", `texture-loss: ${label} input value ${v} outside [-1, 1]`);
        }
      }
    }
  }
  if (a.length !== b.length || a[0].length !== b[0].length) {
    throw new TextureLossError(
      "usage",
      `texture-loss: shape mismatch ${a.length}x${a[0].length} vs ${b.length}x${b[0].length}`);
  }
}

export interface TextureLossOptions {
  /** Base URL of a running service, default http://127.0.0.1:8000. */
  baseUrl?: string;
  fetchImpl?: typeof fetch;
}

export class TextureLoss {
  private readonly config: RunConfig;
  private readonly baseUrl: string;
  private readonly fetchImpl: typeof fetch;
  private explicitParams: AttentionParams | null;
  private resolvedParams: AttentionParams | null = null;

  constructor(configPath: string, options: TextureLossOptions = {}) {
    this.config = loadRunConfig(configPath);
    this.baseUrl = (options.baseUrl ?? "http://127.0.0.1:8000").replace(/\/$/, "");
    this.fetchImpl = options.fetchImpl ?? fetch;
    this.explicitParams =
      this.config.paramsFile !== null ? loadParamsFile(this.config.paramsFile) : null;
  }

  /** Attention parameters in effect; seeded defaults resolve via the service. */
  async params(): Promise<AttentionParams> {
    if (this.explicitParams !== null) return this.explicitParams;
    if (this.resolvedParams === null) {
      this.resolvedParams = await this.post<AttentionParams>("/params", {
        c: this.config.attentionC,
        seed: this.config.seed,
      });
    }
    return this.resolvedParams;
  }

  setParams(params: AttentionParams): void {
    if (params.w_q.length !== params.w_k.length || params.w_q.length < 1) {
      throw new TextureLossError("usage", "texture-loss: w_q and w_k must share a length >= 1");
    }
    this.explicitParams = params;
    this.resolvedParams = null;
  }

  async forward(a: number[][], b: number[][]): Promise<ForwardResult> {
    checkImagePair(a, b);
    const body = await this.lossRequest(a, b, false);
    const cache: CacheInternals & LossCache = { token: CACHE_TOKEN, a, b };
    return { loss: body.loss, deltaPrime: body.delta_prime, cache };
  }

  async backward(cache: LossCache): Promise<BackwardResult> {
    const internals = cache as CacheInternals;
    if (internals?.token !== CACHE_TOKEN) {
      throw new TextureLossError("usage", "texture-loss: backward needs a cache from forward");
    }
    const body = await this.lossRequest(internals.a, internals.b, true);
    if (body.grad_a === null || body.grad_b === null || body.param_grads === null) {
      throw new TextureLossError("transport", "texture-loss: service omitted gradients");
    }
    return { gradA: body.grad_a, gradB: body.grad_b, paramGrads: body.param_grads };
  }

  private async lossRequest(a: number[][], b: number[][], gradients: boolean): Promise<LossResponse> {
    return this.post<LossResponse>("/loss", {
      image_a: { data: a, domain: "normalized" },
      image_b: { data: b, domain: "normalized" },
      grid: { distances: this.config.distances, angles: this.config.angles },
      binning: {
        n_bins: this.config.nBins,
        bin_centers: this.config.binCenters,
        sigma: this.config.sigma,
      },
      params: this.explicitParams,
      attention_c: this.config.attentionC,
      seed: this.config.seed,
      with_gradients: gradients,
    });
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      });
    } catch (err) {
      throw new TextureLossError(
        "transport", `texture-loss: cannot reach service at ${this.baseUrl}: ${err}`);
    }
    const text = await response.text();
    if (!response.ok) {
      let kind: ErrorKind = "usage";
      let message = `service returned status ${response.status}`;
      try {
        const detail = JSON.parse(text).detail;
        if (detail && typeof detail === "object" && "kind" in detail) {
          kind = detail.kind as ErrorKind;
          message = detail.message as string;
        } else {
          message = JSON.stringify(detail);
        }
      } catch {
        // non-JSON error body: keep the status message
      }
      throw new TextureLossError(kind, `texture-loss: ${message}`);
    }
    return JSON.parse(text) as T;
  }
}
