/**
 * Flat `key = value` configuration files shared with the texture service
 * CLI, plus the attention parameter file format.
 */

import { readFileSync } from "node:fs";

export interface AttentionParams {
  w_q: number[];
  w_k: number[];
  w_v: number;
  gamma: number;
  seed?: number | null;
}

export interface RunConfig {
  nBins: number;
  sigma: number | null;
  binCenters: number[] | null;
  distances: number[];
  angles: number[];
  attentionC: number;
  seed: number;
  paramsFile: string | null;
}

const DEFAULTS: RunConfig = {
  nBins: 32,
  sigma: null,
  binCenters: null,
  distances: [1, 3, 5, 7],
  angles: [0, 45, 90, 135],
  attentionC: 4,
  seed: 0,
  paramsFile: null,
};

function parsePairs(text: string, name: string): Map<string, string> {
  const pairs = new Map<string, string>();
  text.split(/\r?\n/).forEach((raw, idx) => {
    const line = raw.split("#", 1)[0].trim();
    if (line.length === 0) return;
    const eq = line.indexOf("=");
    if (eq < 0) {
      throw new Error(`texture-loss: ${name}:${idx + 1}: expected 'key = value'`);
    }
    pairs.set(line.slice(0, eq).trim(), line.slice(eq + 1).trim());
  });
  return pairs;
}

function numberList(value: string): number[] {
  return value.split(",").map((v) => {
    const parsed = Number(v.trim());
    if (!Number.isFinite(parsed)) {
      throw new Error(`texture-loss: invalid number '${v.trim()}'`);
    }
    return parsed;
  });
}

export function parseRunConfig(text: string, name = "<config>"): RunConfig {
  const cfg: RunConfig = { ...DEFAULTS, distances: [...DEFAULTS.distances], angles: [...DEFAULTS.angles] };
  for (const [key, value] of parsePairs(text, name)) {
    switch (key) {
      case "n_bins": cfg.nBins = Number(value); break;
      case "sigma": cfg.sigma = Number(value); break;
      case "bin_centers": cfg.binCenters = numberList(value); break;
      case "distances": cfg.distances = numberList(value); break;
      case "angles": cfg.angles = numberList(value); break;
      case "attention_c": cfg.attentionC = Number(value); break;
      case "seed": cfg.seed = Number(value); break;
      case "params_file": cfg.paramsFile = value; break;
      default:
        // Keys owned by other subcommands (optimizer, preprocessing) are
        // irrelevant to the loss and intentionally ignored here.
        break;
    }
  }
  return cfg;
}

export function loadRunConfig(path: string): RunConfig {
  return parseRunConfig(readFileSync(path, "utf-8"), path);
}

export function parseParamsFile(text: string, name = "<params>"): AttentionParams {
  const pairs = parsePairs(text, name);
  const wq = pairs.get("w_q");
  const wk = pairs.get("w_k");
  const wv = pairs.get("w_v");
  if (wq === undefined || wk === undefined || wv === undefined) {
    throw new Error(`texture-loss: ${name}: missing w_q, w_k, or w_v`);
  }
  return {
    w_q: numberList(wq),
    w_k: numberList(wk),
    w_v: Number(wv),
    gamma: Number(pairs.get("gamma") ?? "0"),
    seed: pairs.has("seed") ? Number(pairs.get("seed")) : null,
  };
}

export function loadParamsFile(path: string): AttentionParams {
  return parseParamsFile(readFileSync(path, "utf-8"), path);
}
