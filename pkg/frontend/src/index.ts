export { column, columnsWithPrefix, readTable, requireColumns, SchemaError } from "./csv.js";
export type { Table } from "./csv.js";
export { extent, leastSquaresSlope, linearScale, logScale, tickLabel } from "./scale.js";
export type { Scale } from "./scale.js";
export { el, escapeText, PALETTE, px, renderFrame } from "./svg.js";
export { FIGURES, renderFigure, UnknownFigureError } from "./figures.js";
export type { FigureDef } from "./figures.js";
