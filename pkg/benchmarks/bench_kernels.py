#!/usr/bin/env python3
"""Timing comparison of the compiled and pure-python per-point kernels.

Measures the hot per-point operations (series evaluation with derivatives,
gradient inversion, cancellation-free value differences) on realistic solved
coefficients, plus one end-to-end discrete-gradient controller run per
backend.  Run from the repository root:

    python3 benchmarks/bench_kernels.py [--points N] [--repeat R]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from hjbpass import _kernels_py
from hjbpass.controllers import PassiveController
from hjbpass.hjb import PolicyIterConfig, policy_iteration
from hjbpass.integrators import DgSystem, TimeGrid, simulate
from hjbpass.models import get_preset

try:
    from hjbpass import _kernels as _compiled
except ImportError:  # pragma: no cover - build without the extension
    _compiled = None


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=20000, help="per-point sample count")
    parser.add_argument("--repeat", type=int, default=3, help="best-of repetitions")
    args = parser.parse_args()

    preset = get_preset("pendulum-paper")
    report = policy_iteration(
        preset.plant, PolicyIterConfig(degree=preset.degree, domain=preset.domain)
    )
    value = report.value
    alpha = value.alpha
    dom = value.basis.domain
    box = (dom.x_lo, dom.x_hi, dom.y_lo, dom.y_hi)

    rng = np.random.default_rng(0)
    pts = rng.uniform(
        [0.6 * dom.x_lo, 0.6 * dom.y_lo], [0.6 * dom.x_hi, 0.6 * dom.y_hi], size=(args.points, 2)
    )
    grads = value.gradients(pts)

    backends = [("python", _kernels_py)]
    if _compiled is not None:
        backends.append(("compiled", _compiled))
    else:
        print("compiled extension not available; timing the python backend only")

    print(f"degree {preset.degree} basis, {args.points} sample points, best of {args.repeat}")
    header = f"{'kernel':<28}" + "".join(f"{label:>14}" for label, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)

    per_call: dict = {}

    def row(name: str, timers: dict) -> None:
        per_call[name] = timers
        line = f"{name:<28}"
        for label, _ in backends:
            line += f"{timers[label] * 1e6:>12.2f}us"
        if len(backends) == 2:
            line += f"{timers['python'] / timers['compiled']:>9.1f}x"
        print(line)

    timers = {}
    for label, mod in backends:

        def run_eval(_mod=mod):
            for x, y in pts:
                _mod.eval_point(alpha, value.offset, *box, x, y)

        timers[label] = best_of(run_eval, args.repeat) / args.points
    row("eval_point (v, grad, hess)", dict(timers))

    timers = {}
    for label, mod in backends:

        def run_inverse(_mod=mod):
            for (x, y), (vx, vy) in zip(pts, grads):
                _mod.eta_inverse(alpha, *box, vx, vy, 0.9 * x, 0.9 * y, 10, 1e-14)

        timers[label] = best_of(run_inverse, args.repeat) / args.points
    row("eta_inverse (warm start)", dict(timers))

    timers = {}
    for label, mod in backends:

        def run_diff(_mod=mod):
            for x, y in pts:
                _mod.value_diff(alpha, *box, x, y, x + 1e-6, y - 1e-6)

        timers[label] = best_of(run_diff, args.repeat) / args.points
    row("value_diff (close pair)", dict(timers))

    controller = PassiveController(preset.plant, value)
    grid = TimeGrid.uniform(preset.horizon, preset.num_nodes)
    timers = {}
    for label, mod in backends:
        value._kern = mod
        system = DgSystem(
            energy=value,
            drift=controller.drift,
            B=preset.plant.B,
            domain=dom,
            n=preset.plant.n,
            n_in=preset.plant.m,
        )

        def run_dg(_system=system):
            simulate(_system, grid, np.array([1.0, 1.0]))

        timers[label] = best_of(run_dg, args.repeat)
    line = f"{'dg controller run (500 steps)':<28}"
    for label, _ in backends:
        line += f"{timers[label]:>13.3f}s"
    if len(backends) == 2:
        line += f"{timers['python'] / timers['compiled']:>9.1f}x"
    print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
