import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { SchemaError } from "../src/csv.js";
import { FIGURES, renderFigure, UnknownFigureError } from "../src/figures.js";

function artifactDir(files: Record<string, string>): string {
  const dir = mkdtempSync(join(tmpdir(), "plots-fig-"));
  for (const [name, content] of Object.entries(files)) {
    writeFileSync(join(dir, name), content);
  }
  return dir;
}

function surfaceCsv(): string {
  const lines = ["z_1,z_2,V"];
  for (const z2 of [-1, 0, 1]) {
    for (const z1 of [-1, 0, 1]) {
      lines.push(`${z1},${z2},${z1 * z1 + 0.5 * z2 * z2}`);
    }
  }
  return lines.join("\n") + "\n";
}

const TRAJECTORY_CSV =
  "t,z_1,z_2,z_3,z_4,u_1,y_1,H,power_residual\n" +
  "0,1,-0.5,0,0,0,0.2,1.25,nan\n" +
  "0.5,0.6,-0.2,0.1,0.05,-0.01,0.12,0.8,nan\n" +
  "1,0.3,-0.1,0.15,0.08,-0.02,0.05,0.4,nan\n";

describe("figure registry", () => {
  it("exposes exactly the six documented ids", () => {
    expect(Object.keys(FIGURES).sort()).toEqual([
      "convergence",
      "coupled_trajectory",
      "hc_decay",
      "powerbalance",
      "state_decay",
      "value_function",
    ]);
  });

  it("rejects an unknown id listing the valid ones", () => {
    expect(() => renderFigure("surface", "/tmp")).toThrowError(UnknownFigureError);
    expect(() => renderFigure("surface", "/tmp")).toThrowError(/value_function/);
  });
});

describe("value_function", () => {
  it("renders one cell per surface sample plus a range caption", () => {
    const dir = artifactDir({ "value_surface.csv": surfaceCsv() });
    const svg = renderFigure("value_function", dir);
    expect(svg.startsWith("<svg ")).toBe(true);
    expect(svg.match(/<rect /g)!.length).toBeGreaterThanOrEqual(9);
    expect(svg).toContain("V range [0.00, 1.50]");
    expect(svg).toContain(">z_1</text>");
    expect(svg).toContain(">z_2</text>");
  });

  it("names a missing column", () => {
    const dir = artifactDir({
      "value_surface.csv": "z_1,z_2,value\n0,0,1\n",
    });
    expect(() => renderFigure("value_function", dir)).toThrowError(
      /missing required column 'V'/
    );
  });

  it("rejects a single-point surface", () => {
    const dir = artifactDir({ "value_surface.csv": "z_1,z_2,V\n0,0,1\n" });
    expect(() => renderFigure("value_function", dir)).toThrowError(
      /column 'z_1' holds a single coordinate/
    );
  });
});

describe("coupled_trajectory", () => {
  it("labels plant and controller states for the stacked run", () => {
    const dir = artifactDir({ "trajectory_passive.csv": TRAJECTORY_CSV });
    const svg = renderFigure("coupled_trajectory", dir);
    expect(svg.match(/<polyline /g)!.length).toBe(4);
    for (const label of ["plant z_1", "plant z_2", "controller z_1", "controller z_2"]) {
      expect(svg).toContain(`>${label}</text>`);
    }
  });

  it("falls back to raw column names for other shapes", () => {
    const dir = artifactDir({
      "trajectory_passive.csv": "t,z_1,z_2,H\n0,1,2,1\n1,0.5,1,0.6\n",
    });
    const svg = renderFigure("coupled_trajectory", dir);
    expect(svg).toContain(">z_1</text>");
    expect(svg).toContain(">z_2</text>");
  });

  it("rejects an empty trajectory file", () => {
    const dir = artifactDir({
      "trajectory_passive.csv": "t,z_1,z_2,z_3,z_4,u_1,y_1,H,power_residual\n",
    });
    expect(() => renderFigure("coupled_trajectory", dir)).toThrowError(/no data rows/);
  });
});

describe("state_decay", () => {
  it("draws one labeled curve per run column", () => {
    const dir = artifactDir({
      "state_decay.csv":
        "t,uncontrolled,passive,ekf\n0,1,1,1\n1,0.9,0.5,0.4\n2,0.8,0.2,0.1\n",
    });
    const svg = renderFigure("state_decay", dir);
    expect(svg.match(/<polyline /g)!.length).toBe(3);
    for (const label of ["uncontrolled", "passive", "ekf"]) {
      expect(svg).toContain(`>${label}</text>`);
    }
  });

  it("names a missing t column", () => {
    const dir = artifactDir({
      "state_decay.csv": "time,uncontrolled\n0,1\n",
    });
    expect(() => renderFigure("state_decay", dir)).toThrowError(
      /missing required column 't'/
    );
  });
});

describe("convergence", () => {
  function convergenceCsv(order: number): string {
    const lines = ["dt,error"];
    for (const dt of [1e-3, 2e-3, 4e-3, 8e-3]) {
      lines.push(`${dt},${3.0 * Math.pow(dt, order)}`);
    }
    return lines.join("\n") + "\n";
  }

  it("annotates the least-squares order and draws a slope-2 guide", () => {
    const dir = artifactDir({ "convergence.csv": convergenceCsv(2.0) });
    const svg = renderFigure("convergence", dir);
    const match = svg.match(/fitted order ([0-9.]+)/);
    expect(match).not.toBeNull();
    expect(Number(match![1])).toBeCloseTo(2.0, 10);
    expect(svg).toContain('data-role="fitted-order"');
    expect(svg).toContain("stroke-dasharray");
    expect(svg).toContain(">slope 2</text>");
    expect(svg.match(/<circle /g)!.length).toBe(4);
  });

  it("reports a non-quadratic slope faithfully", () => {
    const dir = artifactDir({ "convergence.csv": convergenceCsv(1.5) });
    const svg = renderFigure("convergence", dir);
    expect(svg).toContain("fitted order 1.5000");
  });

  it("rejects nonpositive entries before the log transform", () => {
    const dir = artifactDir({ "convergence.csv": "dt,error\n0.001,0\n0.002,1\n" });
    expect(() => renderFigure("convergence", dir)).toThrowError(/must be positive/);
  });
});

describe("hc_decay", () => {
  const RUN_A =
    "t,z_1,z_2,u_1,y_1,H,power_residual\n0,1,1,0,0.5,4.1,nan\n" +
    "1,0.5,0.5,0,0.2,1.0,1e-15\n2,0.1,0.1,0,0.05,1e-4,2e-15\n";
  const RUN_B =
    "t,z_1,z_2,u_1,y_1,H,power_residual\n0,1,1,0,0.4,1.3,nan\n" +
    "1,0.4,0.4,0,0.1,0.5,3e-15\n2,0.1,0.1,0,0.02,1e-5,1e-15\n";

  it("plots every controller run on a log axis with preset labels", () => {
    const dir = artifactDir({
      "controller_run_pendulum-paper.csv": RUN_A,
      "controller_run_vdp-paper.csv": RUN_B,
    });
    const svg = renderFigure("hc_decay", dir);
    expect(svg.match(/<polyline /g)!.length).toBe(2);
    expect(svg).toContain(">pendulum-paper</text>");
    expect(svg).toContain(">vdp-paper</text>");
    expect(svg).toContain(">1e-4</text>");
  });

  it("fails when the directory has no controller runs", () => {
    const dir = artifactDir({});
    expect(() => renderFigure("hc_decay", dir)).toThrowError(
      /no controller_run_\*\.csv files/
    );
  });

  it("fails when H has no positive samples", () => {
    const dir = artifactDir({
      "controller_run_x.csv":
        "t,H,power_residual\n0,0,nan\n1,-1,1e-15\n",
    });
    expect(() => renderFigure("hc_decay", dir)).toThrowError(
      /column 'H' has no positive samples/
    );
  });
});

describe("powerbalance", () => {
  it("skips the undefined first node and plots magnitudes", () => {
    const dir = artifactDir({
      "controller_run_pendulum-paper.csv":
        "t,H,power_residual\n0,2,nan\n1,1,-3e-15\n2,0.5,5e-16\n",
    });
    const svg = renderFigure("powerbalance", dir);
    expect(svg.match(/<circle /g)!.length).toBe(2);
    expect(svg).toContain(">pendulum-paper</text>");
  });

  it("names a missing residual column", () => {
    const dir = artifactDir({
      "controller_run_x.csv": "t,H\n0,1\n1,0.5\n",
    });
    expect(() => renderFigure("powerbalance", dir)).toThrowError(
      /missing required column 'power_residual'/
    );
  });

  it("fails when every residual is nan or zero", () => {
    const dir = artifactDir({
      "controller_run_x.csv": "t,H,power_residual\n0,1,nan\n1,0.5,0\n",
    });
    expect(() => renderFigure("powerbalance", dir)).toThrowError(
      /no finite nonzero samples/
    );
  });
});

describe("determinism", () => {
  it("renders identical bytes for identical inputs", () => {
    const dir = artifactDir({
      "value_surface.csv": surfaceCsv(),
      "trajectory_passive.csv": TRAJECTORY_CSV,
      "state_decay.csv": "t,uncontrolled,passive\n0,1,1\n1,0.8,0.3\n",
    });
    for (const id of ["value_function", "coupled_trajectory", "state_decay"]) {
      expect(renderFigure(id, dir)).toBe(renderFigure(id, dir));
    }
  });

  it("contains no timestamps or dates", () => {
    const dir = artifactDir({ "value_surface.csv": surfaceCsv() });
    const svg = renderFigure("value_function", dir);
    expect(svg).not.toMatch(/\b20\d\d-\d\d-\d\d\b/);
    expect(svg).not.toMatch(/date|time/i);
  });
});

describe("error typing", () => {
  it("schema failures are SchemaError instances", () => {
    const dir = artifactDir({ "state_decay.csv": "t\n0\n" });
    try {
      renderFigure("state_decay", dir);
      expect.unreachable();
    } catch (err) {
      expect(err).toBeInstanceOf(SchemaError);
    }
  });
});
