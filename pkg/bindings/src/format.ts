/**
 * Render a number exactly like the service CLI does: scientific notation
 * with 9 significant digits and a sign-prefixed two-digit exponent
 * (e.g. 1.23456789e-01). Negative zero collapses to zero.
 */
export function sci9(x: number): string {
  if (!Number.isFinite(x)) {
    throw new Error(`texture-loss: cannot format non-finite value ${x}`);
  }
  if (Object.is(x, -0)) x = 0;
  const s = x.toExponential(8);
  const m = /^(-?\d\.\d{8})e([+-])(\d+)$/.exec(s);
  if (m === null) {
    throw new Error(`texture-loss: unexpected exponential form '${s}'`);
  }
  return `${m[1]}e${m[2]}${m[3].padStart(2, "0")}`;
}
