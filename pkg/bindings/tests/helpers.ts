import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export const BASE_URL = () => process.env.TEXKIT_TEST_URL ?? "http://127.0.0.1:8974";
export const PYTHON = process.env.TEXKIT_PYTHON ?? "python3";

/** Small deterministic PRNG so fixtures are reproducible across runs. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Random grid with binary32-exact values, safe for the .img format. */
export function randomGrid(seed: number, size: number, bound = 0.9): number[][] {
  const rand = mulberry32(seed);
  const data: number[][] = [];
  for (let r = 0; r < size; r++) {
    const row: number[] = [];
    for (let c = 0; c < size; c++) {
      row.push(Math.fround(bound * (2 * rand() - 1)));
    }
    data.push(row);
  }
  return data;
}

export function tempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export function writeConfig(dir: string, text: string): string {
  const path = join(dir, "run.cfg");
  writeFileSync(path, text);
  return path;
}
