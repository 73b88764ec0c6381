/**
 * End-to-end acceptance: run every producing experiment through the Python
 * CLI, then render all six figures from the artifacts it wrote.  The
 * convergence figure's fitted-order annotation must agree with the order
 * recorded in the producer's manifest to 0.01.
 */

import { spawnSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { beforeAll, describe, expect, it } from "vitest";

const HERE = dirname(fileURLToPath(import.meta.url));
const CLI = join(HERE, "..", "dist", "cli.js");

let root: string;
let dirs: Record<string, string>;

function runPython(args: string[], outDir: string): void {
  const result = spawnSync("python3", ["-m", "hjbpass.cli", ...args, "--out", outDir], {
    encoding: "utf8",
  });
  if (result.status !== 0) {
    throw new Error(
      `python3 -m hjbpass.cli ${args.join(" ")} exited ${result.status}:\n` +
        `${result.stdout}\n${result.stderr}`
    );
  }
}

function renderToFile(figure: string, inDir: string, outFile: string): void {
  const result = spawnSync(
    process.execPath,
    [CLI, "--figure", figure, "--in", inDir, "--out", outFile],
    { encoding: "utf8" }
  );
  expect(
    result.status,
    `render ${figure} failed: ${result.stderr}${result.stdout}`
  ).toBe(0);
}

// Which experiment's output directory each figure consumes.
const FIGURE_SOURCES: [string, string][] = [
  ["value_function", "solve"],
  ["coupled_trajectory", "sim"],
  ["state_decay", "sim"],
  ["convergence", "conv"],
  ["hc_decay", "verify"],
  ["powerbalance", "verify"],
];

beforeAll(() => {
  expect(existsSync(CLI), `build output missing at ${CLI} (run npm run build)`).toBe(true);
  root = mkdtempSync(join(tmpdir(), "plots-pipeline-"));
  dirs = {
    solve: join(root, "solve"),
    sim: join(root, "sim"),
    conv: join(root, "conv"),
    verify: join(root, "verify"),
  };
  runPython(["solve-hjb", "--preset", "pendulum-paper"], dirs.solve!);
  runPython(["simulate", "--preset", "pendulum-paper"], dirs.sim!);
  runPython(["convergence"], dirs.conv!);
  runPython(["verify-passivity"], dirs.verify!);
}, 600_000);

describe("full pipeline", () => {
  it.each(FIGURE_SOURCES)("renders %s from live artifacts", (figure, source) => {
    const outFile = join(root, `${figure}.svg`);
    renderToFile(figure, dirs[source]!, outFile);
    const svg = readFileSync(outFile, "utf8");
    expect(svg.startsWith("<svg ")).toBe(true);
    expect(svg.trimEnd().endsWith("</svg>")).toBe(true);
    expect(svg.length).toBeGreaterThan(1000);
  });

  it("re-renders every figure byte-identically", () => {
    for (const [figure, source] of FIGURE_SOURCES) {
      const again = join(root, `${figure}.again.svg`);
      renderToFile(figure, dirs[source]!, again);
      expect(readFileSync(again)).toEqual(readFileSync(join(root, `${figure}.svg`)));
    }
  });

  it("annotates the convergence order to within 0.01 of the manifest", () => {
    const svg = readFileSync(join(root, "convergence.svg"), "utf8");
    const match = svg.match(/fitted order ([0-9.]+)/);
    expect(match).not.toBeNull();
    const annotated = Number(match![1]);
    const manifest = JSON.parse(
      readFileSync(join(dirs.conv!, "manifest.json"), "utf8")
    );
    const recorded = manifest.fitted_order as number;
    expect(typeof recorded).toBe("number");
    expect(Math.abs(annotated - recorded)).toBeLessThanOrEqual(0.01);
    expect(annotated).toBeGreaterThan(1.8);
    expect(annotated).toBeLessThan(2.2);
  });

  it("shows both verification presets in the storage-decay legend", () => {
    const svg = readFileSync(join(root, "hc_decay.svg"), "utf8");
    expect(svg).toContain(">pendulum-paper</text>");
    expect(svg).toContain(">vdp-paper</text>");
  });
});
