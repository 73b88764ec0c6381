/**
 * The six figure renderers.  Each consumes documented CSV artifacts from
 * one experiment's output directory (`--in`) and returns a standalone SVG
 * document.  Rendering is read-only and deterministic: no numerical work
 * happens here beyond axis transforms and the least-squares slope drawn
 * on the convergence figure.
 */

import { readdirSync } from "node:fs";
import { join } from "node:path";

import { column, columnsWithPrefix, readTable, requireColumns, SchemaError, Table } from "./csv.js";
import { extent, leastSquaresSlope, linearScale, logScale } from "./scale.js";
import { el, escapeText, FONT, PALETTE, plotArea, polylinePoints, px, renderFrame } from "./svg.js";

/** The requested figure id is not one of the registered renderers. */
export class UnknownFigureError extends Error {
  constructor(id: string) {
    super(`unknown figure '${id}' (valid: ${Object.keys(FIGURES).join(", ")})`);
    this.name = "UnknownFigureError";
  }
}

export interface FigureDef {
  id: string;
  /** Files read from the input directory. */
  inputs: string;
  /** The experiment whose output directory this figure consumes. */
  producer: string;
  render(inDir: string): string;
}

/** Piecewise-linear color ramp between fixed stops, t in [0, 1]. */
function rampColor(t: number): string {
  const stops: [number, number, number][] = [
    [0x44, 0x01, 0x54],
    [0x21, 0x91, 0x8c],
    [0xfd, 0xe7, 0x25],
  ];
  const clamped = Math.min(1, Math.max(0, t));
  const scaled = clamped * (stops.length - 1);
  const low = Math.min(stops.length - 2, Math.floor(scaled));
  const frac = scaled - low;
  const a = stops[low]!;
  const b = stops[low + 1]!;
  const channel = (i: number) => Math.round(a[i]! + frac * (b[i]! - a[i]!));
  const hex = (v: number) => v.toString(16).padStart(2, "0");
  return `#${hex(channel(0))}${hex(channel(1))}${hex(channel(2))}`;
}

function uniqueSorted(values: number[]): number[] {
  return Array.from(new Set(values)).sort((a, b) => a - b);
}

function gridStep(axis: number[], table: Table, name: string): number {
  if (axis.length < 2) {
    throw new SchemaError(
      `${table.path}: column '${name}' holds a single coordinate; a surface grid needs at least 2`
    );
  }
  return (axis[axis.length - 1]! - axis[0]!) / (axis.length - 1);
}

function renderValueFunction(inDir: string): string {
  const table = readTable(join(inDir, "value_surface.csv"));
  const [iz1, iz2, iv] = requireColumns(table, ["z_1", "z_2", "V"]);
  const z1 = table.rows.map((r) => r[iz1!]!);
  const z2 = table.rows.map((r) => r[iz2!]!);
  const v = table.rows.map((r) => r[iv!]!);
  const [vLo, vHi] = extent(v);
  const vSpan = vHi > vLo ? vHi - vLo : 1;
  const axis1 = uniqueSorted(z1);
  const axis2 = uniqueSorted(z2);
  const step1 = gridStep(axis1, table, "z_1");
  const step2 = gridStep(axis2, table, "z_2");
  const area = plotArea();
  const x = linearScale([axis1[0]! - step1 / 2, axis1[axis1.length - 1]! + step1 / 2], area.x);
  const y = linearScale([axis2[0]! - step2 / 2, axis2[axis2.length - 1]! + step2 / 2], area.y);
  const cellW = Math.abs(x(step1) - x(0));
  const cellH = Math.abs(y(step2) - y(0));
  const cells: string[] = [];
  for (let i = 0; i < table.rows.length; i++) {
    const color = rampColor((v[i]! - vLo) / vSpan);
    cells.push(
      el("rect", {
        x: x(z1[i]! - step1 / 2),
        y: y(z2[i]! + step2 / 2),
        width: cellW + 0.5,
        height: cellH + 0.5,
        fill: color,
      })
    );
  }
  const caption = el(
    "text",
    {
      x: area.x[0] + 8, y: area.y[1] + 16, "font-family": FONT,
      "font-size": "11", fill: "#ffffff",
    },
    escapeText(`V range [${vLo.toPrecision(3)}, ${vHi.toPrecision(3)}]`)
  );
  return renderFrame({
    title: "value function V over the solve domain",
    xLabel: "z_1",
    yLabel: "z_2",
    x,
    y,
    content: cells,
    overlay: [caption],
  });
}

interface Series {
  label: string;
  t: number[];
  values: number[];
}

function lineFigure(
  title: string,
  xLabel: string,
  yLabel: string,
  series: Series[],
  options: { logY?: boolean; yFromZero?: boolean } = {}
): string {
  const area = plotArea();
  const allT = series.flatMap((s) => s.t);
  const allV = series.flatMap((s) => s.values);
  const x = linearScale(extent(allT), area.x);
  let yDomain = extent(allV);
  if (options.yFromZero) yDomain = [0, yDomain[1]];
  const y = options.logY ? logScale(yDomain, area.y) : linearScale(yDomain, area.y);
  const content: string[] = [];
  series.forEach((s, i) => {
    content.push(
      el("polyline", {
        points: polylinePoints(s.t.map(x), s.values.map(y)),
        fill: "none",
        stroke: PALETTE[i % PALETTE.length]!,
        "stroke-width": "1.5",
      })
    );
  });
  return renderFrame({
    title,
    xLabel,
    yLabel,
    x,
    y,
    content,
    legend: series.map((s, i) => ({ label: s.label, color: PALETTE[i % PALETTE.length]! })),
  });
}

function renderCoupledTrajectory(inDir: string): string {
  const table = readTable(join(inDir, "trajectory_passive.csv"));
  const t = column(table, "t");
  const zNames = columnsWithPrefix(table, "z_");
  if (zNames.length === 0) {
    throw new SchemaError(`${table.path}: missing required column 'z_1' (no z_* columns)`);
  }
  // The coupled run stacks two plant states then two controller states;
  // label them by role when the file has exactly that shape.
  const roleLabels =
    zNames.length === 4
      ? ["plant z_1", "plant z_2", "controller z_1", "controller z_2"]
      : zNames;
  const series = zNames.map((name, i) => ({
    label: roleLabels[i]!,
    t,
    values: column(table, name),
  }));
  return lineFigure(
    "coupled closed-loop trajectory (passive controller)",
    "t",
    "state",
    series
  );
}

function renderStateDecay(inDir: string): string {
  const table = readTable(join(inDir, "state_decay.csv"));
  requireColumns(table, ["t"]);
  const t = column(table, "t");
  const runNames = table.header.filter((name) => name !== "t");
  if (runNames.length === 0) {
    throw new SchemaError(`${table.path}: no run columns besides 't'`);
  }
  const series = runNames.map((name) => ({ label: name, t, values: column(table, name) }));
  return lineFigure("plant state norm per run", "t", "|z|", series, {
    yFromZero: true,
  });
}

function renderConvergence(inDir: string): string {
  const table = readTable(join(inDir, "convergence.csv"));
  const [idt, ierr] = requireColumns(table, ["dt", "error"]);
  const rows = [...table.rows].sort((a, b) => a[idt!]! - b[idt!]!);
  const dts = rows.map((r) => r[idt!]!);
  const errors = rows.map((r) => r[ierr!]!);
  if (dts.some((v) => !(v > 0)) || errors.some((v) => !(v > 0))) {
    throw new SchemaError(
      `${table.path}: columns 'dt' and 'error' must be positive for a log-log plot`
    );
  }
  const slope = leastSquaresSlope(dts.map(Math.log10), errors.map(Math.log10));
  // Order-2 guide anchored half a decade below the first data point.
  const guide = dts.map((dt) => 0.5 * errors[0]! * Math.pow(dt / dts[0]!, 2));
  const area = plotArea();
  const x = logScale(extent(dts), area.x);
  const y = logScale(extent([...errors, ...guide]), area.y);
  const content: string[] = [
    el("polyline", {
      points: polylinePoints(dts.map(x), guide.map(y)),
      fill: "none",
      stroke: "#888888",
      "stroke-width": "1.5",
      "stroke-dasharray": "6 4",
    }),
    el("polyline", {
      points: polylinePoints(dts.map(x), errors.map(y)),
      fill: "none",
      stroke: PALETTE[0]!,
      "stroke-width": "1.5",
    }),
    ...dts.map((dt, i) =>
      el("circle", { cx: x(dt), cy: y(errors[i]!), r: 3, fill: PALETTE[0]! })
    ),
    el(
      "text",
      {
        x: x(dts[dts.length - 1]!) - 8,
        y: y(guide[guide.length - 1]!) + 16,
        "font-family": FONT, "font-size": "11", fill: "#888888",
        "text-anchor": "end",
      },
      "slope 2"
    ),
  ];
  const annotation = el(
    "text",
    {
      x: area.x[0] + 10, y: area.y[1] + 20, "font-family": FONT,
      "font-size": "13", fill: "#111111", "data-role": "fitted-order",
    },
    escapeText(`fitted order ${slope.toFixed(4)}`)
  );
  return renderFrame({
    title: "discrete-gradient scheme: error vs step size",
    xLabel: "step size dt",
    yLabel: "error against reference",
    x,
    y,
    content,
    overlay: [annotation],
  });
}

function controllerRunTables(inDir: string): { label: string; table: Table }[] {
  let names: string[];
  try {
    names = readdirSync(inDir);
  } catch (err) {
    throw new SchemaError(`cannot read '${inDir}': ${(err as Error).message}`);
  }
  const files = names
    .filter((n) => n.startsWith("controller_run_") && n.endsWith(".csv"))
    .sort();
  if (files.length === 0) {
    throw new SchemaError(`${inDir}: no controller_run_*.csv files`);
  }
  return files.map((name) => ({
    label: name.slice("controller_run_".length, -".csv".length),
    table: readTable(join(inDir, name)),
  }));
}

function renderHcDecay(inDir: string): string {
  const runs = controllerRunTables(inDir);
  const series = runs.map(({ label, table }) => {
    const t = column(table, "t");
    const h = column(table, "H");
    const keptT: number[] = [];
    const keptH: number[] = [];
    for (let i = 0; i < h.length; i++) {
      if (h[i]! > 0) {
        keptT.push(t[i]!);
        keptH.push(h[i]!);
      }
    }
    if (keptH.length === 0) {
      throw new SchemaError(
        `${table.path}: column 'H' has no positive samples to draw on a log axis`
      );
    }
    return { label, t: keptT, values: keptH };
  });
  return lineFigure("controller storage decay", "t", "H_c", series, { logY: true });
}

function renderPowerBalance(inDir: string): string {
  const runs = controllerRunTables(inDir);
  const area = plotArea();
  const series = runs.map(({ label, table }) => {
    const t = column(table, "t");
    const residual = column(table, "power_residual");
    const keptT: number[] = [];
    const keptR: number[] = [];
    for (let i = 0; i < residual.length; i++) {
      const magnitude = Math.abs(residual[i]!);
      // The first node carries nan (no step yet); exact zeros cannot sit
      // on a log axis and are omitted the same way.
      if (Number.isFinite(magnitude) && magnitude > 0) {
        keptT.push(t[i]!);
        keptR.push(magnitude);
      }
    }
    if (keptR.length === 0) {
      throw new SchemaError(
        `${table.path}: column 'power_residual' has no finite nonzero samples`
      );
    }
    return { label, t: keptT, values: keptR };
  });
  const x = linearScale(extent(series.flatMap((s) => s.t)), area.x);
  const y = logScale(extent(series.flatMap((s) => s.values)), area.y);
  const content: string[] = [];
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length]!;
    for (let j = 0; j < s.t.length; j++) {
      content.push(
        el("circle", { cx: x(s.t[j]!), cy: y(s.values[j]!), r: 1.5, fill: color })
      );
    }
  });
  return renderFrame({
    title: "per-step power-balance residual",
    xLabel: "t",
    yLabel: "|residual| (relative)",
    x,
    y,
    content,
    legend: series.map((s, i) => ({ label: s.label, color: PALETTE[i % PALETTE.length]! })),
  });
}

export const FIGURES: Record<string, FigureDef> = {
  value_function: {
    id: "value_function",
    inputs: "value_surface.csv",
    producer: "solve-hjb",
    render: renderValueFunction,
  },
  coupled_trajectory: {
    id: "coupled_trajectory",
    inputs: "trajectory_passive.csv",
    producer: "simulate",
    render: renderCoupledTrajectory,
  },
  state_decay: {
    id: "state_decay",
    inputs: "state_decay.csv",
    producer: "simulate",
    render: renderStateDecay,
  },
  convergence: {
    id: "convergence",
    inputs: "convergence.csv",
    producer: "convergence",
    render: renderConvergence,
  },
  hc_decay: {
    id: "hc_decay",
    inputs: "controller_run_*.csv",
    producer: "verify-passivity",
    render: renderHcDecay,
  },
  powerbalance: {
    id: "powerbalance",
    inputs: "controller_run_*.csv",
    producer: "verify-passivity",
    render: renderPowerBalance,
  },
};

/** Render one figure id from an experiment output directory. */
export function renderFigure(id: string, inDir: string): string {
  const def = FIGURES[id];
  if (def === undefined) throw new UnknownFigureError(id);
  return def.render(inDir);
}

export { px };
