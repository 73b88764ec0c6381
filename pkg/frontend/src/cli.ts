#!/usr/bin/env node
/**
 * Figure regeneration entry point.
 *
 *   hjbpass-plots --figure <id> --in <experiment output dir> --out <file.svg>
 *
 * Exit codes: 0 written; 1 schema/data mismatch (message names the
 * offending file and column); 2 usage error.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { SchemaError } from "./csv.js";
import { FIGURES, renderFigure, UnknownFigureError } from "./figures.js";

const USAGE = `usage: hjbpass-plots --figure <id> --in <dir> --out <file.svg>

Renders one figure from an experiment's CSV artifacts.

figure ids (and the experiment output directory each consumes):
${Object.values(FIGURES)
  .map((def) => `  ${def.id.padEnd(20)} ${def.producer}: ${def.inputs}`)
  .join("\n")}
`;

export function main(argv: string[]): number {
  let values: { figure?: string; in?: string; out?: string; help?: boolean };
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        figure: { type: "string" },
        in: { type: "string" },
        out: { type: "string" },
        help: { type: "boolean", short: "h" },
      },
      allowPositionals: false,
    }));
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n${USAGE}`);
    return 2;
  }
  if (values.help) {
    process.stdout.write(USAGE);
    return 0;
  }
  const missing = ["figure", "in", "out"].filter(
    (name) => values[name as "figure" | "in" | "out"] === undefined
  );
  if (missing.length > 0) {
    process.stderr.write(
      `error: missing required option(s): ${missing.map((m) => `--${m}`).join(", ")}\n${USAGE}`
    );
    return 2;
  }
  let svg: string;
  try {
    svg = renderFigure(values.figure!, values.in!);
  } catch (err) {
    if (err instanceof UnknownFigureError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 2;
    }
    if (err instanceof SchemaError) {
      process.stderr.write(`schema error: ${err.message}\n`);
      return 1;
    }
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
  mkdirSync(dirname(values.out!), { recursive: true });
  writeFileSync(values.out!, svg);
  process.stdout.write(`wrote ${values.out}\n`);
  return 0;
}

if (
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(process.argv[1]).href
) {
  process.exit(main(process.argv.slice(2)));
}
