/**
 * Minimal deterministic SVG assembly.
 *
 * Elements are plain strings built with attributes in call order and
 * coordinates rounded to 1/100 px, so the same inputs always produce the
 * same bytes — there are no timestamps, random ids, or library version
 * strings anywhere in the output.
 */

import { Scale } from "./scale.js";

export type AttrValue = string | number;
export type Attrs = Record<string, AttrValue>;

/** Fixed-point pixel coordinate: "12.34", "7", "-0.25". */
export function px(value: number): string {
  const rounded = value.toFixed(2);
  return rounded.replace(/\.?0+$/, "").replace(/^-0$/, "0");
}

export function escapeText(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}

export function el(tag: string, attrs: Attrs, children?: string[] | string): string {
  const parts = [`<${tag}`];
  for (const [key, value] of Object.entries(attrs)) {
    const text = typeof value === "number" ? px(value) : value;
    parts.push(` ${key}="${text}"`);
  }
  if (children === undefined) {
    parts.push("/>");
  } else {
    const body = Array.isArray(children) ? children.join("") : children;
    parts.push(`>${body}</${tag}>`);
  }
  return parts.join("");
}

/** Fixed series palette (assigned in data order). */
export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
];

export const FONT = "Helvetica, Arial, sans-serif";

export interface FrameSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  x: Scale;
  y: Scale;
  /** Marks drawn inside the plot area, already in pixel coordinates. */
  content: string[];
  /** Optional legend entries drawn in the top-right of the plot area. */
  legend?: { label: string; color: string }[];
  /** Optional extra marks drawn above the content (annotations). */
  overlay?: string[];
}

export const WIDTH = 720;
export const HEIGHT = 480;
export const MARGIN = { left: 72, right: 24, top: 40, bottom: 56 };

export function plotArea(): { x: [number, number]; y: [number, number] } {
  return {
    x: [MARGIN.left, WIDTH - MARGIN.right],
    // SVG y grows downward; the data range is flipped so larger values sit higher.
    y: [HEIGHT - MARGIN.bottom, MARGIN.top],
  };
}

export function polylinePoints(xs: number[], ys: number[]): string {
  const pairs: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    pairs.push(`${px(xs[i]!)},${px(ys[i]!)}`);
  }
  return pairs.join(" ");
}

function axisMarks(spec: FrameSpec): string[] {
  const marks: string[] = [];
  const [xPix0, xPix1] = spec.x.range;
  const [yPix0, yPix1] = spec.y.range;
  for (const t of spec.x.ticks) {
    const xp = spec.x(t);
    marks.push(
      el("line", {
        x1: xp, y1: yPix1, x2: xp, y2: yPix0,
        stroke: "#e0e0e0", "stroke-width": "1",
      })
    );
    marks.push(
      el("line", {
        x1: xp, y1: yPix0, x2: xp, y2: yPix0 + 5,
        stroke: "#333333", "stroke-width": "1",
      })
    );
    marks.push(
      el(
        "text",
        {
          x: xp, y: yPix0 + 18, "font-family": FONT, "font-size": "11",
          fill: "#333333", "text-anchor": "middle",
        },
        escapeText(spec.x.tickLabel(t))
      )
    );
  }
  for (const t of spec.y.ticks) {
    const yp = spec.y(t);
    marks.push(
      el("line", {
        x1: xPix0, y1: yp, x2: xPix1, y2: yp,
        stroke: "#e0e0e0", "stroke-width": "1",
      })
    );
    marks.push(
      el("line", {
        x1: xPix0 - 5, y1: yp, x2: xPix0, y2: yp,
        stroke: "#333333", "stroke-width": "1",
      })
    );
    marks.push(
      el(
        "text",
        {
          x: xPix0 - 8, y: yp + 4, "font-family": FONT, "font-size": "11",
          fill: "#333333", "text-anchor": "end",
        },
        escapeText(spec.y.tickLabel(t))
      )
    );
  }
  marks.push(
    el("rect", {
      x: xPix0, y: yPix1, width: xPix1 - xPix0, height: yPix0 - yPix1,
      fill: "none", stroke: "#333333", "stroke-width": "1",
    })
  );
  return marks;
}

function legendMarks(entries: { label: string; color: string }[]): string[] {
  const marks: string[] = [];
  const [, xPix1] = plotArea().x;
  const [, yPix1] = plotArea().y;
  const boxWidth = 170;
  const rowHeight = 18;
  const x0 = xPix1 - boxWidth - 8;
  const y0 = yPix1 + 8;
  marks.push(
    el("rect", {
      x: x0, y: y0, width: boxWidth, height: entries.length * rowHeight + 10,
      fill: "#ffffff", "fill-opacity": "0.85", stroke: "#cccccc", "stroke-width": "1",
    })
  );
  entries.forEach((entry, i) => {
    const yRow = y0 + 14 + i * rowHeight;
    marks.push(
      el("line", {
        x1: x0 + 8, y1: yRow - 4, x2: x0 + 30, y2: yRow - 4,
        stroke: entry.color, "stroke-width": "2",
      })
    );
    marks.push(
      el(
        "text",
        {
          x: x0 + 36, y: yRow, "font-family": FONT, "font-size": "11",
          fill: "#333333",
        },
        escapeText(entry.label)
      )
    );
  });
  return marks;
}

/** Assemble a complete standalone SVG document around the plotted marks. */
export function renderFrame(spec: FrameSpec): string {
  const pieces: string[] = [];
  pieces.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}">`
  );
  pieces.push(
    el("rect", { x: 0, y: 0, width: WIDTH, height: HEIGHT, fill: "#ffffff" })
  );
  pieces.push(...axisMarks(spec));
  pieces.push(...spec.content);
  if (spec.legend && spec.legend.length > 0) pieces.push(...legendMarks(spec.legend));
  if (spec.overlay) pieces.push(...spec.overlay);
  pieces.push(
    el(
      "text",
      {
        x: WIDTH / 2, y: 24, "font-family": FONT, "font-size": "15",
        fill: "#111111", "text-anchor": "middle", "font-weight": "bold",
      },
      escapeText(spec.title)
    )
  );
  pieces.push(
    el(
      "text",
      {
        x: (MARGIN.left + WIDTH - MARGIN.right) / 2, y: HEIGHT - 14,
        "font-family": FONT, "font-size": "13", fill: "#111111",
        "text-anchor": "middle",
      },
      escapeText(spec.xLabel)
    )
  );
  pieces.push(
    el(
      "text",
      {
        x: 20, y: (MARGIN.top + HEIGHT - MARGIN.bottom) / 2,
        "font-family": FONT, "font-size": "13", fill: "#111111",
        "text-anchor": "middle",
        transform: `rotate(-90 20 ${px((MARGIN.top + HEIGHT - MARGIN.bottom) / 2)})`,
      },
      escapeText(spec.yLabel)
    )
  );
  pieces.push("</svg>");
  return pieces.join("\n") + "\n";
}
