"""Command-line front end: JSON configs in, CSV/JSON artifacts out.

Commands:
    solve <config>                      run one continuation solve
    sweep <config> --levels k           refinement study against an oracle
    blowup <config> --amplitudes a,...  map critical times over data sizes

Exit codes for solve: 0 horizon reached, 2 blow-up detected, 3 window
budget exhausted, 1 error (bad config or failed contraction planning).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import grids, oracles
from .core import (
    NormedPairElement,
    SolveReport,
    SolverConfig,
    Termination,
    continuation_solve,
)
from .instances import (
    INSTANCE_NAMES,
    OdeSpec,
    ProblemInstance,
    make_advect_instance,
    make_burgers_instance,
    make_decay_instance,
    make_element,
    make_riccati_instance,
)

OUTPUT_ROOT_ENV = "TWONORM_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BLOWUP = 2
EXIT_BUDGET = 3

_EXIT_BY_TERMINATION = {
    Termination.HORIZON_REACHED: EXIT_OK,
    Termination.BLOW_UP_DETECTED: EXIT_BLOWUP,
    Termination.BUDGET_EXHAUSTED: EXIT_BUDGET,
    Termination.CONTRACTION_FAILURE: EXIT_ERROR,
}


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    instance: str
    t_max: float
    output_dir: str
    params: dict
    solver: SolverConfig
    emit_trajectory: bool = False
    emit_norms: bool = True
    emit_report: bool = True


_SOLVER_FIELDS = {f.name for f in fields(SolverConfig)}


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return parse_config(raw, source=path)


def parse_config(raw: dict, source: str = "<config>") -> RunConfig:
    def fail(field: str, msg: str):
        raise ConfigError(f"{source}: field '{field}': {msg}")

    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    name = raw.get("instance")
    if name not in INSTANCE_NAMES:
        fail("instance", f"must be one of {', '.join(INSTANCE_NAMES)}, got {name!r}")
    t_max = raw.get("t_max")
    if not isinstance(t_max, (int, float)) or not t_max > 0:
        fail("t_max", f"must be a positive number, got {t_max!r}")
    output_dir = raw.get("output_dir")
    if not isinstance(output_dir, str) or not output_dir:
        fail("output_dir", "must be a non-empty string")

    params = raw.get("params", {})
    if not isinstance(params, dict):
        fail("params", "must be an object")
    params = dict(params)
    if name.startswith("transport."):
        n = params.setdefault("n", 256)
        if not isinstance(n, int) or n < 16:
            fail("params.n", f"must be an integer >= 16, got {n!r}")
        length = params.setdefault("length", 2.0 * math.pi)
        if not length > 0:
            fail("params.length", "must be positive")
        scheme = params.setdefault("interpolation", "cubic")
        if scheme not in grids.INTERP_SCHEMES:
            fail("params.interpolation", f"must be one of {grids.INTERP_SCHEMES}")
        profile = params.setdefault("profile", "sine")
        if profile not in oracles.PROFILES:
            fail("params.profile", f"unknown profile {profile!r}")
        params.setdefault("amplitude", 1.0)
        if not isinstance(params["amplitude"], (int, float)):
            fail("params.amplitude", "must be a number")
    else:
        x0 = params.setdefault("x0", 1.0)
        if not isinstance(x0, (int, float)):
            fail("params.x0", f"must be a number, got {x0!r}")
        if name == "ode.decay":
            rate = params.setdefault("rate", 1.0)
            if not isinstance(rate, (int, float)) or not rate > 0:
                fail("params.rate", "must be a positive number")

    solver_raw = raw.get("solver", {})
    if not isinstance(solver_raw, dict):
        fail("solver", "must be an object")
    unknown = set(solver_raw) - _SOLVER_FIELDS
    if unknown:
        fail("solver", f"unknown keys {sorted(unknown)}")
    try:
        solver = SolverConfig(**solver_raw)
    except (TypeError, ValueError) as exc:
        fail("solver", str(exc))

    emit = raw.get("emit", {})
    if not isinstance(emit, dict):
        fail("emit", "must be an object")
    return RunConfig(
        instance=name,
        t_max=float(t_max),
        output_dir=output_dir,
        params=params,
        solver=solver,
        emit_trajectory=bool(emit.get("trajectory", False)),
        emit_norms=bool(emit.get("norms", True)),
        emit_report=bool(emit.get("report", True)),
    )


# -- problem assembly ---------------------------------------------------------

def build_instance(config: RunConfig, n_override: int | None = None) -> ProblemInstance:
    p = config.params
    if config.instance == "ode.decay":
        return make_decay_instance(rate=float(p["rate"]))
    if config.instance == "ode.riccati":
        return make_riccati_instance()
    n = int(n_override if n_override is not None else p["n"])
    if config.instance == "transport.advect":
        return make_advect_instance(n, length=float(p["length"]),
                                    interpolation=p["interpolation"])
    return make_burgers_instance(n, length=float(p["length"]),
                                 interpolation=p["interpolation"])


def build_initial_state(config: RunConfig, instance: ProblemInstance,
                        amplitude_override: float | None = None,
                        n_override: int | None = None) -> NormedPairElement:
    p = config.params
    if config.instance.startswith("ode."):
        x0 = amplitude_override if amplitude_override is not None else p["x0"]
        state = np.array([float(x0)])
    else:
        amp = amplitude_override if amplitude_override is not None else p["amplitude"]
        profile = oracles.PROFILES[p["profile"]](float(p["length"])).scaled(float(amp))
        n = int(n_override if n_override is not None else p["n"])
        state = grids.from_callable(profile.value, n, float(p["length"]))
    return make_element(instance, state)


def _transport_profile(config: RunConfig, amplitude: float | None = None) -> oracles.SmoothProfile:
    p = config.params
    amp = p["amplitude"] if amplitude is None else amplitude
    return oracles.PROFILES[p["profile"]](float(p["length"])).scaled(float(amp))


# -- artifact writing ---------------------------------------------------------

def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def resolve_output_dir(config: RunConfig) -> str:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    out = os.path.join(root, config.output_dir) if root else config.output_dir
    os.makedirs(out, exist_ok=True)
    return out


def _write_atomic(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    return "\n".join(lines) + "\n"


def write_report_json(path: str, report: SolveReport) -> None:
    _write_atomic(path, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def write_norms_csv(path: str, segments) -> None:
    rows = []
    for si, seg in enumerate(segments):
        start = 1 if si > 0 else 0  # junction states are shared with the previous window
        for t, s in list(zip(seg.times, seg.states))[start:]:
            rows.append([_fmt(t), _fmt(s.weak_norm), _fmt(s.strong_norm)])
    _write_atomic(path, _csv_text(["t", "weak_norm", "strong_norm"], rows))


def write_windows_csv(path: str, report: SolveReport) -> None:
    rows = []
    for w in report.windows:
        max_ratio = _fmt(max(w.observed_ratios)) if w.observed_ratios else "na"
        rows.append([_fmt(w.t_start), _fmt(w.t_end), str(w.picard_iters), max_ratio])
    _write_atomic(path, _csv_text(["t_start", "t_end", "iters", "max_ratio"], rows))


def write_trajectory(out_dir: str, config: RunConfig, segments) -> None:
    if config.instance.startswith("ode."):
        rows = []
        dim = len(np.atleast_1d(segments[0].states[0].state))
        header = ["t"] + [f"x{i}" for i in range(dim)]
        for si, seg in enumerate(segments):
            start = 1 if si > 0 else 0
            for t, s in list(zip(seg.times, seg.states))[start:]:
                vec = np.atleast_1d(s.state)
                rows.append([_fmt(t)] + [_fmt(v) for v in vec])
        _write_atomic(os.path.join(out_dir, "trajectory.csv"), _csv_text(header, rows))
    else:
        final = segments[-1].states[-1].state
        grids.write_csv(final, os.path.join(out_dir, "final_state.csv"))


# -- commands ------------------------------------------------------------------

def run_solve(config: RunConfig):
    """Execute one continuation solve and write its artifacts.

    Returns (exit_code, report, segments).
    """
    instance = build_instance(config)
    x0 = build_initial_state(config, instance)
    segments, report = continuation_solve(instance, x0, config.t_max, config.solver)
    out_dir = resolve_output_dir(config)
    if config.emit_report:
        write_report_json(os.path.join(out_dir, "report.json"), report)
        write_windows_csv(os.path.join(out_dir, "windows.csv"), report)
    if config.emit_norms:
        write_norms_csv(os.path.join(out_dir, "norms.csv"), segments)
    if config.emit_trajectory and segments:
        write_trajectory(out_dir, config, segments)
    return _EXIT_BY_TERMINATION[report.termination], report, segments


def _oracle_final_error(config: RunConfig, instance, segments) -> float:
    """Weak-norm distance between the computed final state and the oracle."""
    final = segments[-1].states[-1].state
    t_final = segments[-1].t_end
    if config.instance.startswith("ode."):
        spec_f = (lambda t, y, x: -float(config.params["rate"]) * x) \
            if config.instance == "ode.decay" else (lambda t, y, x: y * x)
        ref_spec = OdeSpec(dimension=1, f=spec_f)
        _, ref = oracles.dense_reference(ref_spec, np.atleast_1d(config.params["x0"]),
                                         t_final, h_fine=1e-4 * t_final)
        return float(np.max(np.abs(np.atleast_1d(final) - ref[-1])))
    profile = _transport_profile(config)
    xs = final.nodes()
    if config.instance == "transport.advect":
        exact = profile.value(np.mod(xs + t_final, final.length))
    else:
        exact = oracles.burgers_profile_at(profile, t_final, xs)
    return float(np.max(np.abs(final.values - np.asarray(exact))))


def run_sweep(config: RunConfig, levels: int):
    """Refinement study: transport refines the grid, ODEs halve the substep.

    Writes sweep.csv with columns level, error, observed_order, where the
    order on row k+1 is log2(err_k / err_{k+1}) and 'na' marks the first
    row or degenerate (zero-error) ratios.
    """
    if levels < 1:
        raise ConfigError("levels must be >= 1")
    errors = []
    for lev in range(levels):
        if config.instance.startswith("ode."):
            solver = SolverConfig(**{
                **_solver_as_dict(config.solver),
                "substeps_per_window": config.solver.substeps_per_window * 2 ** lev,
            })
            instance = build_instance(config)
            x0 = build_initial_state(config, instance)
            segments, report = continuation_solve(instance, x0, config.t_max, solver)
        else:
            n = int(config.params["n"]) * 2 ** lev
            instance = build_instance(config, n_override=n)
            x0 = build_initial_state(config, instance, n_override=n)
            segments, report = continuation_solve(instance, x0, config.t_max, config.solver)
        if report.termination is not Termination.HORIZON_REACHED:
            raise ConfigError(
                f"sweep level {lev} did not reach the horizon "
                f"({report.termination.value}); choose t_max before blow-up")
        errors.append(_oracle_final_error(config, instance, segments))

    rows = []
    for lev, err in enumerate(errors):
        if lev == 0 or errors[lev - 1] == 0.0 or err == 0.0:
            order = "na"
        else:
            order = _fmt(math.log2(errors[lev - 1] / err))
        rows.append([str(lev), _fmt(err), order])
    out_dir = resolve_output_dir(config)
    _write_atomic(os.path.join(out_dir, "sweep.csv"),
                  _csv_text(["level", "error", "observed_order"], rows))
    return EXIT_OK, errors


def _solver_as_dict(cfg: SolverConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(SolverConfig)}


def _oracle_t_star(config: RunConfig, amplitude: float) -> float:
    if config.instance == "ode.riccati":
        return 1.0 / amplitude if amplitude > 0 else math.inf
    profile = _transport_profile(config, amplitude)
    return oracles.blowup_time(profile)


def run_blowup_scan(config: RunConfig, amplitudes):
    """Solve once per amplitude and record the critical-time estimates.

    A configured strong_norm_cap is interpreted relative to the config's
    base amplitude and rescaled per case, so the threshold tracks the
    data size (the auto cap already does).
    """
    if config.instance not in ("transport.burgers", "ode.riccati"):
        raise ConfigError("blow-up scans need instance transport.burgers or ode.riccati")
    base_amp = float(config.params.get("amplitude", config.params.get("x0", 1.0)))
    rows = []
    results = []
    for amp in amplitudes:
        solver = config.solver
        if solver.strong_norm_cap is not None and amp > 0 and base_amp > 0:
            solver = SolverConfig(**{
                **_solver_as_dict(solver),
                "strong_norm_cap": solver.strong_norm_cap * (amp / base_amp),
            })
        instance = build_instance(config)
        x0 = build_initial_state(config, instance, amplitude_override=amp)
        _, report = continuation_solve(instance, x0, config.t_max, solver)
        if report.termination is Termination.BLOW_UP_DETECTED:
            t_c = report.t_c_estimate
        else:
            t_c = math.inf
        oracle = _oracle_t_star(config, amp)
        rows.append([_fmt(amp), _fmt(t_c), _fmt(oracle)])
        results.append((amp, t_c, oracle, report.termination))
    out_dir = resolve_output_dir(config)
    _write_atomic(os.path.join(out_dir, "blowup.csv"),
                  _csv_text(["amplitude", "t_c_estimate", "oracle_T_star"], rows))
    return EXIT_OK, results


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="twonorm",
                                     description="windowed two-norm evolution solver")
    sub = parser.add_subparsers(dest="command", required=True)
    p_solve = sub.add_parser("solve", help="run one continuation solve")
    p_solve.add_argument("config")
    p_sweep = sub.add_parser("sweep", help="refinement study against an oracle")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--levels", type=int, default=3)
    p_blow = sub.add_parser("blowup", help="critical-time scan over amplitudes")
    p_blow.add_argument("config")
    p_blow.add_argument("--amplitudes", required=True,
                        help="comma-separated list, e.g. 0.5,1,2")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        if args.command == "solve":
            code, report, _ = run_solve(config)
            print(f"{config.instance}: {report.termination.value}"
                  + (f" (t_c ~ {report.t_c_estimate:.6g})"
                     if report.t_c_estimate is not None else ""))
            return code
        if args.command == "sweep":
            code, errors = run_sweep(config, args.levels)
            print(f"{config.instance}: sweep errors {[f'{e:.3e}' for e in errors]}")
            return code
        amplitudes = [float(a) for a in args.amplitudes.split(",") if a]
        code, results = run_blowup_scan(config, amplitudes)
        for amp, t_c, oracle, term in results:
            print(f"amplitude {amp:g}: t_c {t_c:g} (oracle {oracle:g}, {term.value})")
        return code
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
