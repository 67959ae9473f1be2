"""Config-driven entry point for the experiment suite.

One invocation runs one experiment described by a JSON config: a single
planning solve, an open-loop Monte Carlo comparison, a closed-loop
replanning simulation, or a parameter sweep. Artifacts (CSV and JSON)
land in the output directory together with a manifest that echoes the
effective config and records seeds, package versions, and wall time.
Set the ETOC_LOG environment variable (DEBUG, INFO, ...) for verbosity.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import platform
import sys
import time
from fractions import Fraction
from importlib import metadata
from typing import Dict, List, Optional

import jsonschema
import numpy as np

from . import __version__
from .harness import (
    ARRIVAL_TOL,
    SPLIT_THRESHOLD,
    ClosedLoopTrace,
    run_closed_loop,
    run_open_loop_mc,
    sweep_consensus,
    sweep_weights,
    write_histogram_csv,
    write_samples_csv,
    write_summary_json,
    write_table_csv,
)
from .models import double_integrator, double_integrator_1d, dubins_car
from .scp import solve_expected_time
from .soncost import custom_weights, terminal_step, weight_sequence
from .stochastic import GaussianSpec, sample_ensemble
from .transcription import SolveConfig

__all__ = ["main", "load_config", "validate_config", "run_experiment"]

log = logging.getLogger("etoc.cli")

_WEIGHT_KINDS = ["const", "lin", "log", "quad"]
_MODES = ["solve", "mc-open-loop", "closed-loop", "sweep-weights", "sweep-consensus"]

# state / control dimensions per model kind, needed before the model exists
_STATE_DIM = {"double_integrator": 4, "double_integrator_1d": 2, "dubins": 3}
_CONTROL_DIM = {"double_integrator": 2, "double_integrator_1d": 1, "dubins": 2}

_COVARIANCE_SCHEMA = {
    "oneOf": [
        {"type": "array", "items": {"type": "number"}, "minItems": 1},
        {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            "minItems": 1,
        },
    ]
}

_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["model", "uncertainty", "solver", "experiment"],
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "required": ["kind", "ts", "gamma"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": list(_STATE_DIM)},
                "ts": {"type": ["number", "string"]},
                "gamma": {"type": "integer", "minimum": 2},
                "v_bounds": {
                    "type": "array",
                    "items": {"type": "number"},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "steer_bound": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "uncertainty": {
            "type": "object",
            "required": ["mean", "covariance", "m"],
            "additionalProperties": False,
            "properties": {
                "mean": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "covariance": _COVARIANCE_SCHEMA,
                "m": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "solver": {
            "type": "object",
            "required": ["tc", "weights"],
            "additionalProperties": False,
            "properties": {
                "tc": {"type": "integer", "minimum": 2},
                "weights": {
                    "oneOf": [
                        {"enum": _WEIGHT_KINDS},
                        {"type": "array", "items": {"type": "number"}, "minItems": 2},
                    ]
                },
                "omega_vc": {"type": "number", "exclusiveMinimum": 0},
                "omega_tr": {"type": "number", "exclusiveMinimum": 0},
                "delta_tol": {"type": "number", "exclusiveMinimum": 0},
                "feas_tol": {"type": "number", "exclusiveMinimum": 0},
                "max_scp_iter": {"type": "integer", "minimum": 1},
                "nu_tol": {"type": "number", "exclusiveMinimum": 0},
                "guess_control": {"type": "array", "items": {"type": "number"}},
                "scaling_margin": {"type": "number", "minimum": 0},
                "method": {"enum": ["auto", "direct", "ptr"]},
            },
        },
        "experiment": {
            "type": "object",
            "required": ["mode"],
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": _MODES},
                "n_mc": {"type": "integer", "minimum": 1},
                "threshold": {"type": "number", "exclusiveMinimum": 0},
                "noise_covariance": _COVARIANCE_SCHEMA,
                "max_steps": {"type": "integer", "minimum": 1},
                "split_threshold": {"type": "integer", "minimum": 1},
                "kinds": {
                    "type": "array",
                    "items": {"enum": _WEIGHT_KINDS},
                    "minItems": 1,
                },
                "horizons": {
                    "type": "array",
                    "items": {"type": "integer"},
                    "minItems": 1,
                },
                "policies": {
                    "type": "array",
                    "items": {"enum": ["proposed", "baseline"]},
                    "minItems": 1,
                },
            },
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(_SCHEMA)


class ConfigError(Exception):
    """Raised when a config fails validation; carries the violation list."""

    def __init__(self, violations: List[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


def load_config(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _parse_ts(raw) -> float:
    """Sample time as a number or an exact 'a/b' fraction string."""
    if isinstance(raw, str):
        num, _, den = raw.partition("/")
        if not den:
            raise ValueError(f"ts string must look like 'a/b', got {raw!r}")
        return float(Fraction(num.strip()) / Fraction(den.strip()))
    return float(raw)


def _covariance_matrix(raw, n: int) -> np.ndarray:
    # a flat list is shorthand for a diagonal
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 1:
        arr = np.diag(arr)
    return arr


def _check_covariance(raw, n: int, field: str, out: List[str]) -> None:
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 1:
        if arr.shape[0] != n:
            out.append(f"{field} has {arr.shape[0]} diagonal entries, expected {n}")
            return
        if np.any(arr < 0):
            out.append(f"{field} diagonal entries must be nonnegative")
        return
    if arr.shape != (n, n):
        out.append(f"{field} must be {n}x{n} or a {n}-entry diagonal, got shape {arr.shape}")
        return
    if np.max(np.abs(arr - arr.T), initial=0.0) > 1e-12:
        out.append(f"{field} must be symmetric")
        return
    eigs = np.linalg.eigvalsh(arr)
    if eigs.size and eigs.min() < -1e-12:
        out.append(f"{field} must be positive semidefinite (min eigenvalue {eigs.min():.3e})")


def _schema_path(error) -> str:
    return ".".join(str(p) for p in error.absolute_path) or "(root)"


def validate_config(doc: dict) -> List[str]:
    """Full schema plus cross-field checks; returns violations, never raises."""
    violations = [
        f"{_schema_path(e)}: {e.message}"
        for e in sorted(_VALIDATOR.iter_errors(doc), key=_schema_path)
    ]

    model = doc.get("model", {}) if isinstance(doc, dict) else {}
    unc = doc.get("uncertainty", {}) if isinstance(doc, dict) else {}
    solver = doc.get("solver", {}) if isinstance(doc, dict) else {}
    exp = doc.get("experiment", {}) if isinstance(doc, dict) else {}
    if not isinstance(model, dict) or not isinstance(unc, dict) \
            or not isinstance(solver, dict) or not isinstance(exp, dict):
        return violations

    kind = model.get("kind")
    gamma = model.get("gamma")

    ts_raw = model.get("ts")
    if ts_raw is not None:
        try:
            ts = _parse_ts(ts_raw)
        except (ValueError, ZeroDivisionError) as err:
            violations.append(f"model.ts: {err}")
        else:
            if ts <= 0:
                violations.append(f"model.ts = {ts:g} must be positive")

    tc = solver.get("tc")
    if isinstance(tc, int) and isinstance(gamma, int) and tc > gamma:
        violations.append(
            f"solver.tc = {tc} exceeds model.gamma = {gamma}; the consensus "
            "horizon cannot be longer than the trajectory horizon"
        )

    if kind in _STATE_DIM:
        n_x = _STATE_DIM[kind]
        mean = unc.get("mean")
        if isinstance(mean, list) and len(mean) != n_x:
            violations.append(
                f"uncertainty.mean has {len(mean)} entries, model.kind "
                f"'{kind}' has {n_x} states"
            )
        if isinstance(mean, list) and len(mean) == n_x and "covariance" in unc:
            _check_covariance(unc["covariance"], n_x, "uncertainty.covariance", violations)
        guess = solver.get("guess_control")
        if isinstance(guess, list) and len(guess) != _CONTROL_DIM[kind]:
            violations.append(
                f"solver.guess_control has {len(guess)} entries, model.kind "
                f"'{kind}' has {_CONTROL_DIM[kind]} controls"
            )
        if kind != "dubins":
            for key in ("v_bounds", "steer_bound"):
                if key in model:
                    violations.append(f"model.{key} only applies to the dubins model")
        elif isinstance(model.get("v_bounds"), list) and len(model["v_bounds"]) == 2:
            lo, hi = model["v_bounds"]
            if not lo < hi:
                violations.append(f"model.v_bounds must satisfy lower < upper, got {model['v_bounds']}")

    weights = solver.get("weights")
    if isinstance(weights, list) and isinstance(gamma, int) and len(weights) != gamma:
        violations.append(
            f"solver.weights lists {len(weights)} values, model.gamma = {gamma}"
        )
    if isinstance(weights, list):
        try:
            custom_weights(weights)
        except ValueError as err:
            violations.append(f"solver.weights: {err}")

    mode = exp.get("mode")
    if mode in ("mc-open-loop", "sweep-weights", "sweep-consensus") and "n_mc" not in exp:
        violations.append(f"experiment.n_mc is required for mode '{mode}'")
    if mode == "closed-loop":
        for key in ("threshold", "noise_covariance"):
            if key not in exp:
                violations.append(f"experiment.{key} is required for mode 'closed-loop'")
        if "noise_covariance" in exp and kind in _STATE_DIM:
            _check_covariance(
                exp["noise_covariance"], _STATE_DIM[kind],
                "experiment.noise_covariance", violations,
            )
    if mode == "sweep-consensus":
        horizons = exp.get("horizons")
        if horizons is None:
            violations.append("experiment.horizons is required for mode 'sweep-consensus'")
        elif isinstance(horizons, list) and isinstance(gamma, int):
            for i, h in enumerate(horizons):
                if isinstance(h, int) and not 2 <= h <= gamma:
                    violations.append(
                        f"experiment.horizons[{i}] = {h} must lie in [2, model.gamma = {gamma}]"
                    )

    return violations


def build_model(doc: dict):
    block = doc["model"]
    ts = _parse_ts(block["ts"])
    if block["kind"] == "dubins":
        v_bounds = tuple(block.get("v_bounds", (0.0, 0.5)))
        return dubins_car(ts, v_bounds=v_bounds, steer_bound=float(block.get("steer_bound", 5.0)))
    if block["kind"] == "double_integrator_1d":
        return double_integrator_1d(ts)
    return double_integrator(ts)


def build_distribution(doc: dict) -> GaussianSpec:
    unc = doc["uncertainty"]
    mean = np.asarray(unc["mean"], dtype=float)
    return GaussianSpec(mean, _covariance_matrix(unc["covariance"], mean.shape[0]))


def build_solve_config(doc: dict, model) -> SolveConfig:
    solver = doc["solver"]
    gamma = doc["model"]["gamma"]
    raw = solver["weights"]
    weights = custom_weights(raw) if isinstance(raw, list) else weight_sequence(raw, gamma)
    kwargs = {
        key: solver[key]
        for key in ("omega_vc", "omega_tr", "delta_tol", "feas_tol",
                    "max_scp_iter", "nu_tol", "scaling_margin")
        if key in solver
    }
    if "guess_control" in solver:
        kwargs["guess_control"] = np.asarray(solver["guess_control"], dtype=float)
    return SolveConfig.for_model(model, gamma=gamma, tc=solver["tc"], weights=weights, **kwargs)


def _dump_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_solve(doc, model, dist, cfg, seed, jobs, out_dir) -> List[str]:
    ensemble = sample_ensemble(dist, doc["uncertainty"]["m"], seed)
    plan = solve_expected_time(model, ensemble, cfg, method=doc["solver"].get("method", "auto"))
    plan_steps = []
    for states in plan.states:
        arrived = terminal_step(states, tol=ARRIVAL_TOL)
        plan_steps.append(None if arrived is None else arrived - 1)
    _dump_json(os.path.join(out_dir, "solution.json"), {
        "objective": plan.objective,
        "iterations": plan.iterations,
        "converged": plan.converged,
        "consensus": plan.consensus.tolist(),
        "plan_terminal_steps": plan_steps,
        "deviation_history": list(plan.deviation_history),
        "nu_history": list(plan.nu_history),
    })
    return ["solution.json"]


def _cmd_mc_open_loop(doc, model, dist, cfg, seed, jobs, out_dir) -> List[str]:
    exp = doc["experiment"]
    summaries = run_open_loop_mc(
        model, cfg, dist, exp["n_mc"], seed, doc["uncertainty"]["m"],
        policies=tuple(exp.get("policies", ("proposed", "baseline"))),
        jobs=jobs,
        split_threshold=exp.get("split_threshold", SPLIT_THRESHOLD),
    )
    write_samples_csv(os.path.join(out_dir, "samples.csv"), summaries)
    write_histogram_csv(os.path.join(out_dir, "histogram.csv"), summaries)
    write_summary_json(os.path.join(out_dir, "summary.json"), summaries)
    return ["samples.csv", "histogram.csv", "summary.json"]


def _write_trace_csv(path, traces: Dict[str, ClosedLoopTrace]) -> None:
    n_x = next(iter(traces.values())).true_states.shape[1]
    header = "policy,step,distance," + ",".join(f"x{i}" for i in range(n_x))
    lines = [header]
    for policy in traces:
        trace = traces[policy]
        for step in range(trace.true_states.shape[0]):
            state = ",".join(repr(float(v)) for v in trace.true_states[step])
            lines.append(f"{policy},{step},{repr(float(trace.distances[step]))},{state}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _cmd_closed_loop(doc, model, dist, cfg, seed, jobs, out_dir) -> List[str]:
    exp = doc["experiment"]
    noise = GaussianSpec(
        np.zeros(dist.dim),
        _covariance_matrix(exp["noise_covariance"], dist.dim),
    )
    traces = {}
    for policy in tuple(exp.get("policies", ("proposed", "baseline"))):
        traces[policy] = run_closed_loop(
            model, cfg, dist, noise, exp["threshold"], policy, seed,
            m=doc["uncertainty"]["m"], max_steps=exp.get("max_steps", 300),
        )
    _write_trace_csv(os.path.join(out_dir, "trace.csv"), traces)
    _dump_json(os.path.join(out_dir, "summary.json"), {
        policy: {
            "steps_taken": trace.steps_taken,
            "converged": bool(trace.converged),
            "convergence_step": trace.convergence_step,
            "replan_count": trace.replan_count,
            "final_distance": float(trace.distances[-1]),
        }
        for policy, trace in traces.items()
    })
    return ["trace.csv", "summary.json"]


def _cmd_sweep_weights(doc, model, dist, cfg, seed, jobs, out_dir) -> List[str]:
    exp = doc["experiment"]
    table = sweep_weights(
        model, cfg, dist, exp["n_mc"], seed, doc["uncertainty"]["m"],
        kinds=tuple(exp.get("kinds", _WEIGHT_KINDS)), jobs=jobs,
    )
    write_table_csv(os.path.join(out_dir, "weights_table.csv"), "kind", table)
    _dump_json(os.path.join(out_dir, "summary.json"), {"mean_steps": table})
    return ["weights_table.csv", "summary.json"]


def _cmd_sweep_consensus(doc, model, dist, cfg, seed, jobs, out_dir) -> List[str]:
    exp = doc["experiment"]
    table = sweep_consensus(
        model, cfg, dist, exp["n_mc"], seed, doc["uncertainty"]["m"],
        horizons=tuple(exp["horizons"]), jobs=jobs,
    )
    write_table_csv(os.path.join(out_dir, "consensus_table.csv"), "tc", table)
    _dump_json(os.path.join(out_dir, "summary.json"), {
        "mean_steps": {str(k): v for k, v in table.items()}
    })
    return ["consensus_table.csv", "summary.json"]


_COMMANDS = {
    "solve": _cmd_solve,
    "mc-open-loop": _cmd_mc_open_loop,
    "closed-loop": _cmd_closed_loop,
    "sweep-weights": _cmd_sweep_weights,
    "sweep-consensus": _cmd_sweep_consensus,
}


def _versions() -> Dict[str, str]:
    found = {"python": platform.python_version(), "etoc": __version__}
    for package in ("numpy", "scipy", "clarabel"):
        try:
            found[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            found[package] = "unknown"
    return found


def run_experiment(command: str, doc: dict, seed: int, jobs: int, out_dir) -> dict:
    """Dispatch one validated config and return the manifest payload."""
    doc = copy.deepcopy(doc)
    doc["uncertainty"]["seed"] = seed
    model = build_model(doc)
    dist = build_distribution(doc)
    cfg = build_solve_config(doc, model)

    os.makedirs(out_dir, exist_ok=True)
    start = time.perf_counter()
    artifacts = _COMMANDS[command](doc, model, dist, cfg, seed, jobs, out_dir)
    elapsed = time.perf_counter() - start

    for name in artifacts:
        path = os.path.join(out_dir, name)
        if not (os.path.exists(path) and os.path.getsize(path) > 0):
            raise RuntimeError(f"artifact {name} missing or empty after the run")

    manifest = {
        "command": command,
        "config": doc,
        "seeds": {"root": seed},
        "jobs": jobs,
        "artifacts": artifacts,
        "versions": _versions(),
        "wall_time_s": elapsed,
    }
    _dump_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest


def _emit_error(kind: str, message: str, violations: Optional[List[str]] = None) -> None:
    payload = {"error": {"type": kind, "message": message}}
    if violations is not None:
        payload["error"]["violations"] = violations
    json.dump(payload, sys.stderr, indent=2, sort_keys=True)
    sys.stderr.write("\n")


def _configure_logging() -> None:
    name = os.environ.get("ETOC_LOG", "WARNING").upper()
    level = getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="etoc",
        description="Expected-time trajectory optimization experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _MODES:
        cmd = sub.add_parser(name, help=f"run the {name} experiment from a config")
        cmd.add_argument("--config", required=True, help="path to a JSON experiment config")
        cmd.add_argument("--seed", type=int, default=None, help="override the sampling seed")
        cmd.add_argument("--jobs", type=int, default=1, help="parallel worker cap")
        cmd.add_argument("--out", default=".", help="artifact output directory")
    check = sub.add_parser("validate", help="check a config without running it")
    check.add_argument("--config", required=True, help="path to a JSON experiment config")
    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)

    if args.command == "validate":
        try:
            doc = load_config(args.config)
        except OSError as err:
            report = {"valid": False, "violations": [f"config unreadable: {err}"]}
        except json.JSONDecodeError as err:
            report = {"valid": False, "violations": [f"config is not valid JSON: {err}"]}
        else:
            violations = validate_config(doc)
            report = {"valid": not violations, "violations": violations}
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return 0 if report["valid"] else 1

    try:
        try:
            doc = load_config(args.config)
        except OSError as err:
            raise ConfigError([f"config unreadable: {err}"])
        except json.JSONDecodeError as err:
            raise ConfigError([f"config is not valid JSON: {err}"])
        violations = validate_config(doc)
        if violations:
            raise ConfigError(violations)
        mode = doc["experiment"]["mode"]
        if mode != args.command:
            raise ConfigError([
                f"experiment.mode is '{mode}' but the '{args.command}' subcommand was invoked"
            ])
        seed = args.seed if args.seed is not None else doc["uncertainty"].get("seed", 0)
        if args.jobs < 1:
            raise ConfigError([f"--jobs must be at least 1, got {args.jobs}"])
        run_experiment(args.command, doc, seed, args.jobs, args.out)
        return 0
    except ConfigError as err:
        _emit_error("config", "configuration failed validation", err.violations)
        return 2
    except Exception as err:
        # keep stderr machine readable; traceback only under ETOC_LOG=DEBUG
        log.debug("experiment failed", exc_info=True)
        _emit_error("runtime", f"{type(err).__name__}: {err}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
