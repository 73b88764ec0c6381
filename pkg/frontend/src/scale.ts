/**
 * Axis mathematics: linear and log10 scales with "nice" tick positions,
 * plus the one statistic the figures are allowed to compute — the
 * least-squares slope used for the order annotation.  Everything here is
 * a pure function of its inputs so renders stay reproducible.
 */

export interface Scale {
  /** Map a data value to a pixel coordinate. */
  (value: number): number;
  domain: [number, number];
  range: [number, number];
  ticks: number[];
  /** Render a tick value as its axis label. */
  tickLabel(value: number): string;
}

/** Round x to strip float noise introduced by tick-stepping arithmetic. */
function clean(x: number): number {
  return Number(x.toPrecision(12));
}

export function tickLabel(value: number): string {
  if (value === 0) return "0";
  const magnitude = Math.abs(value);
  if (magnitude >= 1e4 || magnitude < 1e-3) {
    const exp = value.toExponential();
    const [mantissa, exponent] = exp.split("e") as [string, string];
    const trimmed = mantissa.replace(/\.?0+$/, "");
    return `${trimmed}e${exponent.replace("+", "")}`;
  }
  return String(clean(value));
}

/** A 1-2-5 progression step that yields roughly `count` intervals. */
function niceStep(span: number, count: number): number {
  const raw = span / Math.max(1, count);
  const power = Math.pow(10, Math.floor(Math.log10(raw)));
  const fraction = raw / power;
  let nice: number;
  if (fraction <= 1) nice = 1;
  else if (fraction <= 2) nice = 2;
  else if (fraction <= 5) nice = 5;
  else nice = 10;
  return nice * power;
}

export function linearScale(
  domain: [number, number],
  range: [number, number],
  tickCount = 6
): Scale {
  let [d0, d1] = domain;
  if (!Number.isFinite(d0) || !Number.isFinite(d1)) {
    throw new Error(`linear scale domain is not finite: [${d0}, ${d1}]`);
  }
  if (d0 === d1) {
    // Degenerate data (a constant column) still gets a drawable axis.
    d0 -= 1;
    d1 += 1;
  }
  const [r0, r1] = range;
  const scale = ((value: number) =>
    r0 + ((value - d0) / (d1 - d0)) * (r1 - r0)) as Scale;
  const step = niceStep(d1 - d0, tickCount);
  const ticks: number[] = [];
  for (let t = Math.ceil(d0 / step) * step; t <= d1 + step * 1e-9; t += step) {
    ticks.push(clean(t));
  }
  scale.domain = [d0, d1];
  scale.range = range;
  scale.ticks = ticks;
  scale.tickLabel = tickLabel;
  return scale;
}

/** Log10 scale over strictly positive data; ticks at powers of ten. */
export function logScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  if (!(d0 > 0) || !(d1 > 0)) {
    throw new Error(`log scale needs positive bounds, got [${d0}, ${d1}]`);
  }
  let lo = Math.log10(d0);
  let hi = Math.log10(d1);
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const [r0, r1] = range;
  const scale = ((value: number) =>
    r0 + ((Math.log10(value) - lo) / (hi - lo)) * (r1 - r0)) as Scale;
  const first = Math.ceil(lo - 1e-9);
  const last = Math.floor(hi + 1e-9);
  const decades = last - first;
  const stride = decades > 8 ? Math.ceil(decades / 8) : 1;
  const ticks: number[] = [];
  for (let e = first; e <= last; e += stride) ticks.push(Math.pow(10, e));
  scale.domain = [d0, d1];
  scale.range = range;
  scale.ticks = ticks;
  scale.tickLabel = (value: number) => {
    const exp = Math.round(Math.log10(value));
    return `1e${exp}`;
  };
  return scale;
}

/** Least-squares slope of ys against xs (used on log10-transformed data). */
export function leastSquaresSlope(xs: number[], ys: number[]): number {
  const n = xs.length;
  if (n !== ys.length || n < 2) {
    throw new Error(`slope fit needs two matched samples, got ${n}/${ys.length}`);
  }
  const xMean = xs.reduce((a, b) => a + b, 0) / n;
  const yMean = ys.reduce((a, b) => a + b, 0) / n;
  let num = 0;
  let den = 0;
  for (let i = 0; i < n; i++) {
    const dx = xs[i]! - xMean;
    num += dx * (ys[i]! - yMean);
    den += dx * dx;
  }
  if (den === 0) throw new Error("slope fit is degenerate: all xs equal");
  return num / den;
}

export function extent(values: number[]): [number, number] {
  let lo = Number.POSITIVE_INFINITY;
  let hi = Number.NEGATIVE_INFINITY;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo > hi) throw new Error("extent of empty or all-non-finite data");
  return [lo, hi];
}
