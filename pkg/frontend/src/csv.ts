/**
 * Reading and validating the solver's CSV artifacts.
 *
 * The artifact format is strict: one header row of column names, then
 * numeric rows (17-significant-digit decimal, with "nan"/"inf"/"-inf"
 * allowed where a producer legitimately emits them, e.g. the undefined
 * power residual at the first trajectory node).  Lines starting with "#"
 * are comments.  Every violation is reported with the file, the 1-based
 * line, and the offending column, so a schema mismatch from a stale or
 * foreign file is immediately attributable.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";

/** A CSV artifact did not match its documented schema. */
export class SchemaError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SchemaError";
  }
}

export interface Table {
  /** Path the table was read from (used in error messages). */
  path: string;
  header: string[];
  /** Row-major numeric data; NaN/±Infinity preserved where the file says so. */
  rows: number[][];
}

const SPECIAL_VALUES = new Map<string, number>([
  ["nan", Number.NaN],
  ["-nan", Number.NaN],
  ["inf", Number.POSITIVE_INFINITY],
  ["infinity", Number.POSITIVE_INFINITY],
  ["-inf", Number.NEGATIVE_INFINITY],
  ["-infinity", Number.NEGATIVE_INFINITY],
]);

function parseCell(raw: string, path: string, line: number, column: string): number {
  const text = raw.trim();
  if (text.length > 0) {
    const special = SPECIAL_VALUES.get(text.toLowerCase());
    if (special !== undefined) return special;
    const value = Number(text);
    if (!Number.isNaN(value)) return value;
  }
  throw new SchemaError(
    `${path} line ${line}, column '${column}': cannot parse '${raw}' as a number`
  );
}

/** Read one artifact table, enforcing the header + numeric-rows shape. */
export function readTable(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new SchemaError(`cannot read '${path}': ${(err as Error).message}`);
  }
  // papaparse keeps one output row per physical line for this quoting-free
  // format, so row index maps straight back to a 1-based file line.
  const parsed = Papa.parse<string[]>(text, { delimiter: "," });
  let header: string[] | null = null;
  const rows: number[][] = [];
  parsed.data.forEach((cells, index) => {
    const line = index + 1;
    if (cells.length === 1 && (cells[0] ?? "").trim() === "") return;
    if ((cells[0] ?? "").trimStart().startsWith("#")) return;
    if (header === null) {
      header = cells.map((c) => c.trim());
      return;
    }
    if (cells.length !== header.length) {
      throw new SchemaError(
        `${path} line ${line}: expected ${header.length} fields, got ${cells.length}`
      );
    }
    rows.push(
      cells.map((cell, j) => parseCell(cell, path, line, header![j] ?? `#${j + 1}`))
    );
  });
  if (header === null) throw new SchemaError(`${path}: empty file`);
  if (rows.length === 0) throw new SchemaError(`${path}: no data rows`);
  return { path, header, rows };
}

/**
 * Resolve required column names to indices, naming the first missing
 * column.  Extra columns are allowed: consumers bind by name, and the
 * trajectory schema deliberately carries more than any one figure needs.
 */
export function requireColumns(table: Table, names: string[]): number[] {
  return names.map((name) => {
    const index = table.header.indexOf(name);
    if (index < 0) {
      throw new SchemaError(
        `${table.path}: missing required column '${name}' ` +
          `(have: ${table.header.join(", ")})`
      );
    }
    return index;
  });
}

/** Extract one named column as a plain array. */
export function column(table: Table, name: string): number[] {
  const [index] = requireColumns(table, [name]);
  return table.rows.map((row) => row[index!]!);
}

/** Column names matching a prefix, in header order (e.g. all z_* columns). */
export function columnsWithPrefix(table: Table, prefix: string): string[] {
  return table.header.filter((name) => name.startsWith(prefix));
}
