"""Experiment pipelines behind the command line.

Each ``run_*`` function turns a validated :class:`ExperimentConfig` into
artifacts on disk — CSV tables plus a JSON manifest — and returns an
:class:`ExperimentResult` with the artifact paths, check outcomes, and the
lines the command prints.  Independent runs inside one experiment (controller
variants, step-size levels, presets) execute concurrently; results are
collected in a fixed order so all numeric CSVs are deterministic:
identical config and seed produce identical bytes.

Checks are always evaluated and recorded in the manifest; whether a failed
check affects the exit code is the caller's decision (the ``--check`` flag).
"""

from __future__ import annotations

import dataclasses
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .controllers import ClosedLoop, EkfController, PassiveController, closed_loop_rhs
from .diagnostics import (
    counterexample_check,
    hjb_residual_map,
    quadratic_fit_residual,
    storage_monotonicity,
)
from .errors import ConfigurationError, HjbpassError
from .galerkin import Rectangle, ValueFunctionApprox
from .hjb import PolicyIterConfig, policy_iteration, test_grid
from .integrators import DgSystem, MidpointSystem, TimeGrid, Trajectory, simulate
from .io import (
    manifest_payload,
    write_audit_csv,
    write_csv,
    write_field_csv,
    write_manifest,
    write_trajectory_csv,
)
from .linalg import solve_linear
from .models import (
    PRESET_NAMES,
    Preset,
    get_preset,
    pendulum_plant,
    van_der_pol_plant,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "CheckResult",
    "parse_config_file",
    "run_solve_hjb",
    "run_simulate",
    "run_convergence",
    "run_verify_passivity",
    "run_counterexample",
]

#: Step sizes of the order study (fixed ladder, factor 2 apart).
CONVERGENCE_DTS = (1e-3, 2e-3, 4e-3, 8e-3)
#: Reference step: three halvings below the finest ladder rung.
CONVERGENCE_REF_DT = CONVERGENCE_DTS[0] / 8.0
#: Per-step relative power-balance residual bound checked by verify runs.
VERIFY_POWER_TOL = 1e-12
#: Allowed per-step storage increase in verify runs.
VERIFY_MONOTONE_TOL = 1e-10
#: Relative quadratic-fit residual above which a surface counts as non-quadratic.
NON_QUADRATIC_THRESHOLD = 0.05

_PLANT_KINDS = ("pendulum", "van-der-pol")
_CONTROLLER_KINDS = ("passive", "ekf", "both")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated flat configuration shared by all commands.

    A plant comes either from ``preset`` (named bundle with solve and
    simulation defaults) or inline via ``plant`` + parameters, in which case
    ``degree``, ``domain``, and ``z0`` must be given too.  Unset optional
    fields fall back to the preset or to command defaults at resolution
    time.  Construction validates everything before any computation runs.
    """

    preset: Optional[str] = None
    plant: Optional[str] = None
    gravity: Optional[float] = None
    damping: Optional[float] = None
    mu: Optional[float] = None
    z0: Optional[np.ndarray] = None
    degree: Optional[int] = None
    domain: Optional[Rectangle] = None
    tol_abs: float = 1e-14
    tol_rel: float = 1e-10
    max_iters: int = 30
    horizon: Optional[float] = None
    num_nodes: int = 500
    controller: str = "both"
    value_function: Optional[str] = None
    out: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        if self.preset is not None and self.preset not in PRESET_NAMES:
            raise ConfigurationError(
                f"unknown preset '{self.preset}' (available: {', '.join(PRESET_NAMES)})"
            )
        if self.plant is not None and self.plant not in _PLANT_KINDS:
            raise ConfigurationError(
                f"unknown plant kind '{self.plant}' (available: {', '.join(_PLANT_KINDS)})"
            )
        if self.preset is not None and self.plant is not None:
            raise ConfigurationError("give either preset= or plant=, not both")
        for key in ("gravity", "damping", "mu"):
            if getattr(self, key) is not None and self.plant is None:
                raise ConfigurationError(f"{key}= is only valid with an inline plant=")
        if self.gravity is not None and self.plant != "pendulum":
            raise ConfigurationError("gravity= applies to plant=pendulum only")
        if self.mu is not None and self.plant != "van-der-pol":
            raise ConfigurationError("mu= applies to plant=van-der-pol only")
        if self.z0 is not None:
            z0 = np.asarray(self.z0, dtype=float)
            if z0.shape != (2,):
                raise ConfigurationError(f"z0 must have two components, got shape {z0.shape}")
            object.__setattr__(self, "z0", z0)
        if self.degree is not None and self.degree < 1:
            raise ConfigurationError(f"degree must be >= 1, got {self.degree}")
        if self.tol_abs <= 0.0 or self.tol_rel <= 0.0:
            raise ConfigurationError("stopping tolerances must be positive")
        if self.max_iters < 1:
            raise ConfigurationError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.horizon is not None and self.horizon <= 0.0:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        if self.num_nodes < 2:
            raise ConfigurationError(f"num_nodes must be >= 2, got {self.num_nodes}")
        if self.controller not in _CONTROLLER_KINDS:
            raise ConfigurationError(
                f"controller must be one of {', '.join(_CONTROLLER_KINDS)}, got '{self.controller}'"
            )

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        """Build from flat string key-value pairs; unknown keys are rejected."""
        kwargs = {}
        for key, raw in mapping.items():
            parser = _KEY_PARSERS.get(key)
            if parser is None:
                raise ConfigurationError(
                    f"unknown config key '{key}' (known: {', '.join(sorted(_KEY_PARSERS))})"
                )
            value = raw if not isinstance(raw, str) else raw.strip()
            try:
                kwargs[key] = parser(value) if isinstance(value, str) else value
            except (ValueError, TypeError) as exc:
                raise ConfigurationError(f"config key '{key}': {exc}") from exc
        return cls(**kwargs)


def _parse_floats(raw: str, counts) -> tuple:
    parts = [p for p in raw.replace(",", " ").split() if p]
    if len(parts) not in counts:
        raise ValueError(f"expected {' or '.join(map(str, counts))} numbers, got {len(parts)}")
    return tuple(float(p) for p in parts)


def _parse_z0(raw: str) -> np.ndarray:
    return np.array(_parse_floats(raw, (2,)))


def _parse_domain(raw: str) -> Rectangle:
    vals = _parse_floats(raw, (1, 4))
    if len(vals) == 1:
        return Rectangle.square(vals[0])
    return Rectangle(*vals)


_KEY_PARSERS = {
    "preset": str,
    "plant": str,
    "gravity": float,
    "damping": float,
    "mu": float,
    "z0": _parse_z0,
    "degree": int,
    "domain": _parse_domain,
    "tol_abs": float,
    "tol_rel": float,
    "max_iters": int,
    "horizon": float,
    "num_nodes": int,
    "controller": str,
    "value_function": str,
    "out": str,
    "seed": int,
}


def parse_config_file(path: str) -> dict:
    """Read flat ``key = value`` lines; ``#``/``;`` comments and blanks skipped."""
    try:
        with open(path, "r") as fh:
            raw_lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file '{path}': {exc}") from exc
    mapping: dict = {}
    for lineno, raw in enumerate(raw_lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigurationError(f"{path}:{lineno}: empty key")
        if key in mapping:
            raise ConfigurationError(f"{path}:{lineno}: duplicate key '{key}'")
        mapping[key] = value.strip()
    return mapping


def resolve_setup(cfg: ExperimentConfig, horizon_default: Optional[float] = None) -> Preset:
    """Merge the config onto its preset (or inline plant) into one bundle."""
    if cfg.preset is not None:
        base = get_preset(cfg.preset)
    elif cfg.plant is not None:
        if cfg.plant == "pendulum":
            kwargs = {}
            if cfg.gravity is not None:
                kwargs["gravity"] = cfg.gravity
            if cfg.damping is not None:
                kwargs["damping"] = cfg.damping
            plant = pendulum_plant(**kwargs)
        else:
            kwargs = {}
            if cfg.mu is not None:
                kwargs["mu"] = cfg.mu
            if cfg.damping is not None:
                kwargs["damping"] = cfg.damping
            plant = van_der_pol_plant(**kwargs)
        missing = [k for k in ("degree", "domain", "z0") if getattr(cfg, k) is None]
        if missing:
            raise ConfigurationError(
                f"inline plant= needs {', '.join(missing)} to be configured"
            )
        base = Preset(
            name=f"custom-{cfg.plant}",
            plant=plant,
            z0=cfg.z0,
            degree=cfg.degree,
            domain=cfg.domain,
        )
    else:
        raise ConfigurationError("configure a plant: preset=<name> or plant=<kind>")
    horizon = cfg.horizon
    if horizon is None:
        horizon = horizon_default if horizon_default is not None else base.horizon
    return dataclasses.replace(
        base,
        z0=cfg.z0 if cfg.z0 is not None else base.z0,
        degree=cfg.degree if cfg.degree is not None else base.degree,
        domain=cfg.domain if cfg.domain is not None else base.domain,
        horizon=horizon,
        num_nodes=cfg.num_nodes,
    )


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one named acceptance check."""

    name: str
    passed: bool
    detail: str


@dataclass
class ExperimentResult:
    """Artifacts, check outcomes, and printable summary of one command run."""

    command: str
    out_dir: str
    artifacts: list
    checks: list
    manifest: dict
    summary_lines: list

    @property
    def checks_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _out_dir(cfg: ExperimentConfig, command: str, suffix: Optional[str] = None) -> str:
    if cfg.out is not None:
        return cfg.out
    stem = command if suffix is None else f"{command}-{suffix}"
    return os.path.join("artifacts", stem)


def _config_echo(cfg: ExperimentConfig, setup: Optional[Preset] = None) -> dict:
    echo = {
        "preset": cfg.preset,
        "plant": cfg.plant,
        "tol_abs": cfg.tol_abs,
        "tol_rel": cfg.tol_rel,
        "max_iters": cfg.max_iters,
        "controller": cfg.controller,
        "value_function": cfg.value_function,
        "seed": cfg.seed,
    }
    if setup is not None:
        dom = setup.domain
        echo.update(
            {
                "resolved_name": setup.name,
                "degree": setup.degree,
                "domain": [dom.x_lo, dom.x_hi, dom.y_lo, dom.y_hi],
                "z0": list(map(float, setup.z0)),
                "horizon": setup.horizon,
                "num_nodes": setup.num_nodes,
            }
        )
    return echo


def _atomic_save(path: str, save_fn: Callable) -> None:
    """Run a path-taking writer against a temp file, then rename into place."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-save-")
    os.close(fd)
    try:
        save_fn(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _check_dict(checks) -> list:
    return [dataclasses.asdict(c) for c in checks]


def _norms(states: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.asarray(states, dtype=float) ** 2, axis=1))


def _policy_config(cfg: ExperimentConfig, setup: Preset) -> PolicyIterConfig:
    return PolicyIterConfig(
        degree=setup.degree,
        domain=setup.domain,
        tol_abs=cfg.tol_abs,
        tol_rel=cfg.tol_rel,
        max_iters=cfg.max_iters,
    )


def _acquire_value(cfg: ExperimentConfig, setup: Preset):
    """(value function, solve report or None): load an artifact or solve inline."""
    if cfg.value_function is not None:
        return ValueFunctionApprox.load(cfg.value_function), None
    report = policy_iteration(setup.plant, _policy_config(cfg, setup))
    return report.value, report


def run_solve_hjb(cfg: ExperimentConfig) -> ExperimentResult:
    """Solve the stationary optimality equation for the configured plant.

    Artifacts: value-function file, per-iteration log, residual audit on the
    test grid, and a dense surface sample for plotting.
    """
    t0 = time.perf_counter()
    setup = resolve_setup(cfg)
    out = _out_dir(cfg, "solve-hjb", setup.name)
    report = policy_iteration(setup.plant, _policy_config(cfg, setup))
    value = report.value

    vf_path = os.path.join(out, "value_function.csv")
    _atomic_save(vf_path, value.save)

    iter_rows = [
        [float(i + 1), report.delta_abs_history[i], report.delta_rel_history[i], report.hjb_residual_history[i]]
        for i in range(report.iterations)
    ]
    iter_path = os.path.join(out, "iterations.csv")
    write_csv(iter_path, ["iteration", "delta_abs", "delta_rel", "hjb_residual_rms"], iter_rows)

    grid = test_grid(setup.domain, 100)
    audit = hjb_residual_map(value, setup.plant, grid)
    audit_path = os.path.join(out, "hjb_residual.csv")
    write_audit_csv(audit_path, audit)

    surface_path = os.path.join(out, "value_surface.csv")
    write_field_csv(surface_path, grid, value.values(grid), "V")

    quad_res = quadratic_fit_residual(value, grid)
    checks = [
        CheckResult("converged", report.converged, f"converged={report.converged}"),
        CheckResult(
            "iterations-under-10",
            report.iterations < 10,
            f"iterations={report.iterations}",
        ),
    ]
    if setup.plant.name == "van-der-pol":
        checks.append(
            CheckResult(
                "clearly-not-quadratic",
                quad_res > NON_QUADRATIC_THRESHOLD,
                f"relative quadratic-fit residual {quad_res:.4f} "
                f"(threshold {NON_QUADRATIC_THRESHOLD})",
            )
        )

    manifest = manifest_payload(
        _config_echo(cfg, setup),
        time.perf_counter() - t0,
        command="solve-hjb",
        iterations=report.iterations,
        converged=report.converged,
        final_hjb_residual_rms=report.final_hjb_residual,
        hjb_residual_max=audit.max_abs,
        hjb_residual_rms=audit.rms,
        quadratic_fit_residual=quad_res,
        checks=_check_dict(checks),
    )
    manifest_path = os.path.join(out, "manifest.json")
    write_manifest(manifest_path, manifest)

    summary = [
        f"solved {setup.name}: {report.iterations} iterations, "
        f"final policy change {report.delta_abs_history[-1]:.3e}",
        audit.summary(),
        f"quadratic-fit residual: {quad_res:.4f}",
    ]
    return ExperimentResult(
        command="solve-hjb",
        out_dir=out,
        artifacts=[vf_path, iter_path, audit_path, surface_path, manifest_path],
        checks=checks,
        manifest=manifest,
        summary_lines=summary,
    )


def _run_with_flush(path_stem: str, fn: Callable) -> Trajectory:
    """Run one simulation; on failure flush the completed prefix next to the
    intended artifact (``<stem>.partial.csv``) and re-raise."""
    try:
        return fn()
    except HjbpassError as exc:
        partial = getattr(exc, "partial", None)
        if partial is not None:
            partial_path = f"{path_stem}.partial.csv"
            write_trajectory_csv(partial_path, partial)
            exc.partial_path = partial_path
        raise


def _gather(jobs) -> dict:
    """Run named thunks concurrently; return {name: result} or raise the
    first failure in job order once all have settled."""
    results: dict = {}
    errors: dict = {}
    with ThreadPoolExecutor(max_workers=max(1, len(jobs))) as pool:
        futures = [(name, pool.submit(fn)) for name, fn in jobs]
        for name, fut in futures:
            try:
                results[name] = fut.result()
            except Exception as exc:  # noqa: BLE001 - re-raised below
                errors[name] = exc
    if errors:
        first = next(name for name, _ in jobs if name in errors)
        raise errors[first]
    return results


def run_simulate(cfg: ExperimentConfig) -> ExperimentResult:
    """Simulate the uncontrolled plant and the selected closed loops.

    All runs use the implicit midpoint rule from the preset initial state.
    Closed-loop state columns are the plant states followed by the
    controller states (filter covariance entries are dropped from the CSV).
    """
    t0 = time.perf_counter()
    setup = resolve_setup(cfg)
    out = _out_dir(cfg, "simulate", setup.name)
    plant = setup.plant
    value, solve_report = _acquire_value(cfg, setup)
    grid = TimeGrid.uniform(setup.horizon, setup.num_nodes)

    kinds = ["uncontrolled"]
    if cfg.controller in ("passive", "both"):
        kinds.append("passive")
    if cfg.controller in ("ekf", "both"):
        kinds.append("ekf")

    loops = {}
    systems = {}
    plain_storage = plant.storage.value if plant.storage is not None else None
    systems["uncontrolled"] = MidpointSystem(
        rhs=lambda t, x, u: plant.f(x),
        n=plant.n,
        n_in=0,
        port_log=lambda x: (np.zeros(plant.m), plant.output(x)),
        storage=plain_storage,
    )
    for kind in kinds[1:]:
        if kind == "passive":
            controller = PassiveController(plant, value)
        else:
            controller = EkfController(plant, value)
        loop = ClosedLoop(plant, controller)
        loops[kind] = loop

        def loop_storage(x, _loop=loop):
            return plant.storage.value(_loop.plant_trajectory_state(x))

        systems[kind] = MidpointSystem(
            rhs=lambda t, x, u, _loop=loop: closed_loop_rhs(_loop, x, t),
            n=loop.state_dim,
            n_in=0,
            port_log=lambda x, _loop=loop: _loop.ports(x)[:2],
            storage=loop_storage if plant.storage is not None else None,
        )

    paths = {kind: os.path.join(out, f"trajectory_{kind}.csv") for kind in kinds}
    jobs = [
        (
            kind,
            lambda _kind=kind: _run_with_flush(
                paths[_kind][: -len(".csv")],
                lambda: simulate(
                    systems[_kind],
                    grid,
                    setup.z0 if _kind == "uncontrolled" else loops[_kind].initial_state(setup.z0),
                ),
            ),
        )
        for kind in kinds
    ]
    trajectories = _gather(jobs)

    artifacts = []
    n = plant.n
    for kind in kinds:
        traj = trajectories[kind]
        if kind == "ekf":
            traj = traj.restricted(slice(0, 2 * n))
        write_trajectory_csv(paths[kind], traj)
        artifacts.append(paths[kind])

    plant_norms = {
        kind: _norms(
            trajectories[kind].states if kind == "uncontrolled" else trajectories[kind].states[:, :n]
        )
        for kind in kinds
    }
    decay_path = os.path.join(out, "state_decay.csv")
    write_csv(
        decay_path,
        ["t"] + kinds,
        np.column_stack([grid.t] + [plant_norms[k] for k in kinds]),
    )
    artifacts.append(decay_path)

    controller_norm_max = {
        kind: float(np.max(_norms(trajectories[kind].states[:, n : 2 * n])))
        for kind in kinds[1:]
    }
    final_norms = {kind: float(plant_norms[kind][-1]) for kind in kinds}
    ratios = {}
    for kind in kinds[1:]:
        u_final = final_norms["uncontrolled"]
        c_final = final_norms[kind]
        if u_final > 0.0:
            ratios[kind] = c_final / u_final
        else:
            ratios[kind] = 0.0 if c_final == 0.0 else math.inf

    checks = []
    if plant.name == "pendulum":
        for kind in kinds[1:]:
            u_final = final_norms["uncontrolled"]
            c_final = final_norms[kind]
            passed = c_final < u_final or (u_final == 0.0 and c_final == 0.0)
            checks.append(
                CheckResult(
                    f"{kind}-final-norm-reduced",
                    passed,
                    f"|z(T)| {c_final:.6e} vs uncontrolled {u_final:.6e}",
                )
            )
        if "passive" in kinds and "ekf" in kinds:
            checks.append(
                CheckResult(
                    "ekf-controller-state-exceeds-passive",
                    controller_norm_max["ekf"] > controller_norm_max["passive"],
                    f"max |controller state|: ekf {controller_norm_max['ekf']:.4f}, "
                    f"passive {controller_norm_max['passive']:.4f}",
                )
            )

    manifest = manifest_payload(
        _config_echo(cfg, setup),
        time.perf_counter() - t0,
        command="simulate",
        runs=kinds,
        solve_iterations=None if solve_report is None else solve_report.iterations,
        final_plant_norms=final_norms,
        norm_ratios=ratios,
        controller_state_max=controller_norm_max,
        checks=_check_dict(checks),
    )
    manifest_path = os.path.join(out, "manifest.json")
    write_manifest(manifest_path, manifest)
    artifacts.append(manifest_path)

    summary = [
        f"simulated {setup.name} over [0, {setup.horizon:g}] with {setup.num_nodes} nodes: "
        + ", ".join(kinds)
    ]
    for kind in kinds:
        summary.append(f"  |z(T)| {kind}: {final_norms[kind]:.6e}")
    return ExperimentResult(
        command="simulate",
        out_dir=out,
        artifacts=artifacts,
        checks=checks,
        manifest=manifest,
        summary_lines=summary,
    )


def _fit_order(dts, errors) -> float:
    """Least-squares slope of log(error) against log(dt)."""
    x = np.log(np.asarray(dts, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    A = np.column_stack([x, np.ones_like(x)])
    coef = solve_linear(A.T @ A, A.T @ y)
    return float(coef[0])


def run_convergence(cfg: ExperimentConfig) -> ExperimentResult:
    """Order study of the discrete-gradient scheme on a driven storage plant.

    Runs the scheme at the fixed step ladder against an implicit-midpoint
    reference three halvings finer than the smallest step, with input
    u(t) = sin t, and fits the convergence order.  The reference validates
    itself against one further halving.
    """
    t0 = time.perf_counter()
    if cfg.preset is None and cfg.plant is None:
        cfg = dataclasses.replace(cfg, preset="pendulum-paper")
    setup = resolve_setup(cfg, horizon_default=1.0)
    plant = setup.plant
    if plant.storage is None:
        raise ConfigurationError(
            f"convergence study needs a plant with a storage function; '{plant.name}' has none"
        )
    out = _out_dir(cfg, "convergence", setup.name)
    T = setup.horizon

    def steps_for(dt: float) -> int:
        k = round(T / dt)
        if k < 1 or abs(k * dt - T) > 1e-9 * max(1.0, T):
            raise ConfigurationError(
                f"horizon {T} is not an integer multiple of step {dt}"
            )
        return k

    def input_signal(t: float) -> np.ndarray:
        return np.array([math.sin(t)])

    dg_system = DgSystem(
        energy=plant.storage,
        drift=plant.f,
        B=plant.B,
        domain=setup.domain,
        n=plant.n,
        n_in=plant.m,
    )
    mid_system = MidpointSystem(
        rhs=lambda t, x, u_bar: plant.dynamics(x, u_bar),
        n=plant.n,
        n_in=plant.m,
        output=plant.output,
        storage=plant.storage.value,
    )

    def dg_run(dt: float) -> Trajectory:
        grid = TimeGrid.uniform(T, steps_for(dt) + 1)
        return simulate(dg_system, grid, setup.z0, input_signal=input_signal)

    def mid_run(dt: float) -> Trajectory:
        grid = TimeGrid.uniform(T, steps_for(dt) + 1)
        return simulate(mid_system, grid, setup.z0, input_signal=input_signal)

    jobs = [(f"dg-{dt:g}", lambda _dt=dt: dg_run(_dt)) for dt in CONVERGENCE_DTS]
    jobs.append(("reference", lambda: mid_run(CONVERGENCE_REF_DT)))
    jobs.append(("reference-half", lambda: mid_run(CONVERGENCE_REF_DT / 2.0)))
    runs = _gather(jobs)

    ref = runs["reference"]
    ref_half = runs["reference-half"]

    def compare(coarse: Trajectory, fine: Trajectory) -> float:
        stride = (fine.grid.num_nodes - 1) // (coarse.grid.num_nodes - 1)
        if stride * (coarse.grid.num_nodes - 1) != fine.grid.num_nodes - 1:
            raise ConfigurationError("grids do not nest")
        diff = coarse.states - fine.states[::stride]
        return float(np.max(_norms(diff)))

    errors = [compare(runs[f"dg-{dt:g}"], ref) for dt in CONVERGENCE_DTS]
    self_check = compare(ref, ref_half)
    order = _fit_order(CONVERGENCE_DTS, errors)

    table_path = os.path.join(out, "convergence.csv")
    write_csv(table_path, ["dt", "error"], np.column_stack([CONVERGENCE_DTS, errors]))

    strictly_decreasing = all(errors[i] < errors[i + 1] for i in range(len(errors) - 1))
    checks = [
        CheckResult(
            "fitted-order-second",
            1.8 <= order <= 2.2,
            f"fitted order {order:.4f} (window [1.8, 2.2])",
        ),
        CheckResult(
            "errors-strictly-decreasing",
            strictly_decreasing,
            "errors " + " > ".join(f"{e:.3e}" for e in reversed(errors)),
        ),
        CheckResult(
            "reference-self-check",
            self_check < min(errors) / 10.0,
            f"reference halving moves {self_check:.3e} "
            f"(< smallest error/10 = {min(errors) / 10.0:.3e})",
        ),
    ]

    manifest = manifest_payload(
        _config_echo(cfg, setup),
        time.perf_counter() - t0,
        command="convergence",
        dts=list(CONVERGENCE_DTS),
        errors=errors,
        fitted_order=order,
        reference_dt=CONVERGENCE_REF_DT,
        reference_self_check=self_check,
        checks=_check_dict(checks),
    )
    manifest_path = os.path.join(out, "manifest.json")
    write_manifest(manifest_path, manifest)

    summary = [f"order study on {setup.name} over [0, {T:g}], input sin(t):"]
    for dt, err in zip(CONVERGENCE_DTS, errors):
        summary.append(f"  dt {dt:.0e}: max error {err:.6e}")
    summary.append(f"fitted order: {order:.4f}")
    summary.append(f"reference self-check: {self_check:.3e}")
    return ExperimentResult(
        command="convergence",
        out_dir=out,
        artifacts=[table_path, manifest_path],
        checks=checks,
        manifest=manifest,
        summary_lines=summary,
    )


def run_verify_passivity(cfg: ExperimentConfig) -> ExperimentResult:
    """Audit the unforced controller runs: power balance and storage decay.

    Runs the discrete-gradient scheme on the controller dynamics with zero
    input from controller state (1, 1) — for the configured plant, or for
    both benchmark presets (``pendulum-paper``, ``vdp-paper``) when none is
    configured — and checks the per-step relative power-balance residual
    and the monotone decay of the controller storage.
    """
    t0 = time.perf_counter()
    if cfg.preset is None and cfg.plant is None:
        names = ["pendulum-paper", "vdp-paper"]
        if cfg.value_function is not None:
            raise ConfigurationError(
                "value_function= needs an explicit preset=/plant= to attach to"
            )
        configs = [dataclasses.replace(cfg, preset=name) for name in names]
    else:
        configs = [cfg]
    out = _out_dir(cfg, "verify-passivity")

    def one(sub_cfg: ExperimentConfig):
        setup = resolve_setup(sub_cfg)
        value, _ = _acquire_value(sub_cfg, setup)
        controller = PassiveController(setup.plant, value)
        system = DgSystem(
            energy=value,
            drift=controller.drift,
            B=setup.plant.B,
            domain=value.basis.domain,
            n=setup.plant.n,
            n_in=setup.plant.m,
        )
        z_hat0 = sub_cfg.z0 if sub_cfg.z0 is not None else np.array([1.0, 1.0])
        grid = TimeGrid.uniform(setup.horizon, setup.num_nodes)
        stem = os.path.join(out, f"controller_run_{setup.name}")
        traj = _run_with_flush(stem, lambda: simulate(system, grid, z_hat0))
        return setup, traj

    jobs = [(sub.preset or "custom", lambda _sub=sub: one(_sub)) for sub in configs]
    results = _gather(jobs)

    artifacts = []
    checks = []
    summary = []
    per_preset = {}
    for name, _ in jobs:
        setup, traj = results[name]
        run_path = os.path.join(out, f"controller_run_{setup.name}.csv")
        write_trajectory_csv(run_path, traj)
        artifacts.append(run_path)

        mono = storage_monotonicity(traj, VERIFY_MONOTONE_TOL)
        mono_path = os.path.join(out, f"monotonicity_{setup.name}.csv")
        write_audit_csv(mono_path, mono)
        artifacts.append(mono_path)

        power = traj.power_residual[1:]
        power_max = float(np.max(np.abs(power)))
        checks.append(
            CheckResult(
                f"{setup.name}-power-residual-small",
                power_max < VERIFY_POWER_TOL,
                f"max relative power residual {power_max:.3e} (< {VERIFY_POWER_TOL:.0e})",
            )
        )
        checks.append(
            CheckResult(
                f"{setup.name}-storage-nonincreasing",
                mono.passed,
                f"largest per-step increase {mono.max_abs:.3e} "
                f"(tol {VERIFY_MONOTONE_TOL:.0e})",
            )
        )
        per_preset[setup.name] = {
            "power_residual_max": power_max,
            "storage_initial": float(traj.storage[0]),
            "storage_final": float(traj.storage[-1]),
            "largest_storage_increase": mono.max_abs,
        }
        summary.append(
            f"{setup.name}: storage {traj.storage[0]:.6f} -> {traj.storage[-1]:.3e}, "
            f"max power residual {power_max:.3e}"
        )
        summary.append(mono.summary())

    manifest = manifest_payload(
        _config_echo(cfg),
        time.perf_counter() - t0,
        command="verify-passivity",
        runs=per_preset,
        checks=_check_dict(checks),
    )
    manifest_path = os.path.join(out, "manifest.json")
    write_manifest(manifest_path, manifest)
    artifacts.append(manifest_path)

    return ExperimentResult(
        command="verify-passivity",
        out_dir=out,
        artifacts=artifacts,
        checks=checks,
        manifest=manifest,
        summary_lines=summary,
    )


def run_counterexample(cfg: ExperimentConfig) -> ExperimentResult:
    """Print and check the summed-storage indefiniteness witness."""
    t0 = time.perf_counter()
    out = _out_dir(cfg, "counterexample")
    report = counterexample_check()

    root = math.sqrt(2.0)
    spread = 2.0 * math.sqrt(2.0 - root)
    expected = np.array([-root - spread, -root + spread])
    expected_pc = np.diag([root - 1.0, 1.0])
    eig_err = float(np.max(np.abs(report.eigenvalues - expected)))
    pc_err = float(np.max(np.abs(report.P_c - expected_pc)))

    checks = [
        CheckResult(
            "eigenvalues-match-closed-form",
            eig_err <= 1e-10,
            f"max deviation {eig_err:.3e} from (-sqrt(2) -+ 2 sqrt(2 - sqrt(2)))",
        ),
        CheckResult(
            "riccati-solution-matches-closed-form",
            pc_err <= 1e-10,
            f"max deviation {pc_err:.3e} from diag(sqrt(2) - 1, 1)",
        ),
        CheckResult(
            "one-positive-one-negative",
            report.lambda_neg < 0.0 < report.lambda_pos,
            f"eigenvalues ({report.lambda_pos:.5f}, {report.lambda_neg:.5f})",
        ),
    ]

    manifest = manifest_payload(
        _config_echo(cfg),
        time.perf_counter() - t0,
        command="counterexample",
        P_c=[list(map(float, row)) for row in report.P_c],
        eigenvalues=[report.lambda_pos, report.lambda_neg],
        checks=_check_dict(checks),
    )
    manifest_path = os.path.join(out, "manifest.json")
    write_manifest(manifest_path, manifest)

    summary = [
        "summed-storage Lyapunov test witness:",
        f"  P_c = [[{report.P_c[0, 0]:.12f}, {report.P_c[0, 1]:.12f}],"
        f" [{report.P_c[1, 0]:.12f}, {report.P_c[1, 1]:.12f}]]",
        f"  eigenvalues of the test matrix: {report.lambda_pos:.6f}, {report.lambda_neg:.6f}",
        "  verdict: indefinite (one positive, one negative) — the plain storage sum"
        " certifies nothing for the loop",
    ]
    return ExperimentResult(
        command="counterexample",
        out_dir=out,
        artifacts=[manifest_path],
        checks=checks,
        manifest=manifest,
        summary_lines=summary,
    )
