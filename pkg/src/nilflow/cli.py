"""Command-line experiment runner.

Every command reads an optional JSON config, applies flag overrides, validates
all parameters before computing and writes deterministic artifacts into
``--out``.  Exit codes: 0 success, 1 input or config error, 2 contract
violation, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import algebras
from .bundle import (
    BaseGrid,
    blowdown_driver,
    conjugate_heat_backward,
    flow_rhs,
    integrate_bundle,
    monotonicity_report,
    random_potential,
    random_smooth_state,
    rigidity_diagnostics,
    save_checkpoint,
)
from .bundle.rigidity import RESIDUAL_NAMES
from .curvature import ricci_arrays
from .errors import ConfigError, ContractViolation, InputError, NotASoliton, NumericalFailure
from .group_flow import (
    TRACE_CONVENTION,
    integrate_group_flow,
    trajectory_csv,
    w_plus_group_rate,
)
from .lie import MetricState, NilpotentAlgebra, load_algebra_json, nil3_model
from .solitons import (
    FAMILIES,
    four_dim_soliton_rate,
    four_dim_soliton_state,
    nil3_group_closed_form,
    ode_system_residual,
    rigid_scaling_family,
    rigid_scaling_seed,
    soliton_grid,
)

EXIT_OK, EXIT_INPUT, EXIT_CONTRACT, EXIT_NUMERICAL = 0, 1, 2, 3

_BUNDLE_INIT = {
    "algebra": "nil3",
    "gamma": 1.0,
    "N": 64,
    "L": 2 * math.pi,
    "t0": 1.0,
    "cfl": 0.2,
    "amplitude": 0.3,
    "modes": 2,
    "gss_mean": 1.0,
    "gamma_amplitude": 0.2,
}

DEFAULTS = {
    "group-flow": {"algebra": "nil3", "gamma": 1.0, "G0": None, "t0": 1.0, "t1": 2.0, "steps": 1000},
    "bundle-flow": {**_BUNDLE_INIT, "t1": 2.0, "snapshots": 10},
    "functional-report": {
        **_BUNDLE_INIT,
        "t1": 4.0,
        "a": 0.0,
        "stride": 25,
        "potential_amplitude": 0.3,
        "rate_rtol": 1e-3,
        "monotone_slack": 1e-8,
        "term_floor": 1e-9,
        "mass_tol": 1e-6,
    },
    "soliton-verify": {
        "family": "four_dim_soliton",
        "x": 1.0,
        "N": 128,
        "times": [1.0, 2.0, 5.0],
        "C": 0.0,
        "a0": 1.0,
        "b0": 1.0,
        "t0": 1.0,
        "t1": 2.0,
        "steps": 1000,
        "tol": 1e-6,
    },
    "blowdown": {**_BUNDLE_INIT, "N": 32, "gss_mean": 4.0, "scales": [1.0, 10.0, 100.0]},
}

UNITS = "t is flow time; metrics are in the algebra basis; s is the base coordinate"


# ---------------------------------------------------------------- config handling


def _coerce(key, value, default):
    """Convert ``value`` to the type of ``default``; raise ConfigError naming ``key``."""
    try:
        if default is None:
            return value
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if isinstance(default, str):
            if not isinstance(value, str):
                raise TypeError
            return value
        if isinstance(default, list):
            if not isinstance(value, (list, tuple)) or not value:
                raise TypeError
            return [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"key {key!r}: cannot use {value!r} (expected {type(default).__name__})") from None
    return value


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return doc


def resolve_params(command: str, config: dict, overrides: dict) -> dict:
    """Defaults, then config entries, then flag overrides; unknown keys are rejected."""
    defaults = DEFAULTS[command]
    params = dict(defaults)
    for source in (config, overrides):
        for key, value in source.items():
            if key not in defaults:
                raise ConfigError(f"unknown key {key!r} for command {command}")
            params[key] = _coerce(key, value, defaults[key])
    return params


def parse_algebra(source, gamma: float) -> NilpotentAlgebra:
    """``nil3``, ``heisenberg:m``, ``filiform:n``, an inline bracket document or a path to one."""
    if isinstance(source, dict):
        return load_algebra_json(source)
    name, _, arg = str(source).partition(":")
    if name == "nil3":
        return nil3_model(gamma)
    if name in ("heisenberg", "filiform"):
        try:
            size = int(arg or (1 if name == "heisenberg" else 4))
        except ValueError:
            raise ConfigError(f"key 'algebra': size in {source!r} is not an integer") from None
        if name == "heisenberg":
            return algebras.heisenberg(size, gamma)
        return algebras.filiform(size)
    if Path(source).exists():
        return load_algebra_json(Path(source))
    raise ConfigError(f"key 'algebra': unknown algebra {source!r}")


# ---------------------------------------------------------------- output helpers


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(_clean(doc), indent=1, sort_keys=True) + "\n")


def header_lines(command: str, params: dict, seed: int) -> list[str]:
    return [
        f"nilflow {command}",
        f"seed={seed}",
        "config=" + json.dumps(_clean(params), sort_keys=True),
        f"convention: {TRACE_CONVENTION}",
        f"units: {UNITS}",
    ]


def _table_csv(header, names, rows) -> str:
    lines = [f"# {h}" for h in header] + [",".join(names)]
    for row in rows:
        lines.append(",".join("" if row[k] is None else repr(float(row[k])) for k in names))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- commands


def _require(cond, key, msg):
    if not cond:
        raise ConfigError(f"key {key!r}: {msg}")


def _bundle_initial(p, seed):
    _require(p["N"] >= 16, "N", "need at least 16 grid points")
    _require(p["L"] > 0, "L", "must be positive")
    _require(p["t0"] > 0, "t0", "must be positive")
    _require(0 < p["cfl"] < 1, "cfl", "must lie in (0, 1)")
    _require(p["gss_mean"] > 0, "gss_mean", "must be positive")
    _require(p["modes"] >= 1, "modes", "must be at least 1")
    fiber = parse_algebra(p["algebra"], p["gamma"])
    rng = np.random.default_rng(seed)
    grid = BaseGrid(p["N"], p["L"])
    state = random_smooth_state(
        rng,
        grid,
        fiber,
        t=p["t0"],
        amplitude=p["amplitude"],
        modes=p["modes"],
        gss_mean=p["gss_mean"],
        gamma_amplitude=p["gamma_amplitude"],
    )
    return rng, state


def run_group_flow(p, seed, out: Path) -> int:
    _require(0 < p["t0"] < p["t1"], "t1", "need 0 < t0 < t1")
    _require(p["steps"] >= 1, "steps", "must be positive")
    alg = parse_algebra(p["algebra"], p["gamma"])
    G0 = np.eye(alg.dim) if p["G0"] is None else np.asarray(p["G0"], dtype=float)
    _require(G0.shape == (alg.dim, alg.dim), "G0", f"must be a {alg.dim}x{alg.dim} matrix")
    traj = integrate_group_flow(MetricState(alg, G0), p["t0"], p["t1"], p["steps"])
    (out / "trajectory.csv").write_text(trajectory_csv(traj, header_lines("group-flow", p, seed)))
    final = traj.G[-1]
    diag = {
        "command": "group-flow",
        "t_final": traj.times[-1],
        "G_final": final,
        "R_final": float(ricci_arrays(alg.c, final).R),
        "W_plus_rate_final": w_plus_group_rate(MetricState(alg, final), traj.times[-1]),
        "min_cholesky_margin": float(np.min(traj.step_stats["margin"])),
    }
    is_nil3_diag = (
        alg.dim == 3
        and alg.nilpotency_degree == 2
        and np.allclose(alg.c[2, 0, 1], -alg.c[2, 1, 0])
        and np.count_nonzero(alg.c) == 2
        and np.allclose(G0, np.diag(np.diag(G0)))
        and G0[0, 0] == G0[1, 1]
    )
    if is_nil3_diag:
        exact = nil3_group_closed_form(
            p["t1"], G0[0, 0], G0[2, 2], p["t0"], gamma=float(alg.c[2, 0, 1])
        ).G
        diag["closed_form_max_abs_error"] = float(np.max(np.abs(final - exact)))
    write_json(out / "diagnostics.json", diag)
    return EXIT_OK


def _snapshot_row(state):
    row = {"t": state.t}
    res = rigidity_diagnostics(state)
    row.update({k: res[k] for k in RESIDUAL_NAMES if k != "reconstruction"})
    row["gss_min"], row["gss_max"] = float(state.gss.min()), float(state.gss.max())
    R = ricci_arrays(state.fiber.c, state.Gf).R
    row["R_G_min"], row["R_G_max"] = float(R.min()), float(R.max())
    return row


def run_bundle_flow(p, seed, out: Path) -> int:
    _require(p["t1"] > p["t0"], "t1", "must exceed t0")
    _require(p["snapshots"] >= 1, "snapshots", "must be positive")
    _, state = _bundle_initial(p, seed)
    saves = np.linspace(p["t0"], p["t1"], p["snapshots"] + 1)[1:]
    traj = integrate_bundle(state, p["t1"], p["cfl"], save_times=list(saves))
    rows = [_snapshot_row(s) for s in traj]
    names = list(rows[0])
    header = header_lines("bundle-flow", p, seed)
    (out / "trajectory.csv").write_text(_table_csv(header, names, rows))
    save_checkpoint(traj[-1], out / "final_state")
    write_json(
        out / "diagnostics.json",
        {"command": "bundle-flow", "t_final": traj[-1].t, "final": rows[-1], "snapshots": len(traj)},
    )
    return EXIT_OK


def run_functional_report(p, seed, out: Path) -> int:
    _require(p["t1"] > p["t0"], "t1", "must exceed t0")
    _require(0.0 <= p["a"] <= 1.0, "a", "must lie in [0, 1]")
    _require(p["stride"] >= 1, "stride", "must be positive")
    rng, state = _bundle_initial(p, seed)
    f_T = random_potential(rng, state.grid, amplitude=p["potential_amplitude"], modes=p["modes"])
    traj = integrate_bundle(state, p["t1"], p["cfl"], store_every=1)
    f_traj = conjugate_heat_backward(traj, f_T)
    rep = monotonicity_report(traj, f_traj, p["a"], stride=p["stride"])
    header = header_lines("functional-report", p, seed)
    (out / "report.csv").write_text(rep.to_csv(header))
    rel = np.abs(rep.fd_rates - rep.theorem_rates) / np.abs(rep.theorem_rates)
    checks = {
        "min_W_increment": float(np.min(np.diff(rep.W_values))),
        "max_rate_rel_error": float(np.max(rel)),
        "min_term": float(min(np.min(v) for v in rep.term_breakdown.values())),
        "mass_drift": float(np.ptp(rep.mass)),
    }
    failures = []
    if checks["min_W_increment"] < -p["monotone_slack"]:
        failures.append("W decreased beyond the slack")
    if checks["max_rate_rel_error"] > p["rate_rtol"]:
        failures.append("finite-difference and formula rates disagree")
    if checks["min_term"] < -p["term_floor"]:
        failures.append("a derivative term is negative")
    if checks["mass_drift"] > p["mass_tol"]:
        failures.append("heat mass is not conserved")
    write_json(
        out / "diagnostics.json",
        {"command": "functional-report", "a": p["a"], "checks": checks, "failures": failures,
         "states": len(traj)},
    )
    if failures:
        raise ContractViolation("; ".join(failures))
    return EXIT_OK


def _verify_four_dim(p):
    x = p["x"]
    grid = soliton_grid(p["N"])
    sl = grid.interior
    ref = four_dim_soliton_state(x, 1.0, grid)
    per_time = {}
    for t in p["times"]:
        st = four_dim_soliton_state(x, t, grid)
        exact = four_dim_soliton_rate(x, t, grid)
        rhs = flow_rhs(st)
        res = {
            "flow_dGf": float(np.max(np.abs(rhs.dGf[sl] - exact.dGf[sl]))),
            "flow_dgss": float(np.max(np.abs(rhs.dgss[sl] - exact.dgss[sl]))),
            "flow_dGamma": float(np.max(np.abs(rhs.dGamma[sl] - exact.dGamma[sl]))),
        }
        res.update(rigidity_diagnostics(st, reference=ref))
        per_time[repr(float(t))] = res
    ode = ode_system_residual(ref)
    worst = max(v for r in per_time.values() for v in r.values() if v is not None)
    worst = max(worst, max(ode.values()))
    return {"per_time": per_time, "ode_system": ode}, worst


def _verify_nil3_group(p):
    _require(0 < p["t0"] < p["t1"], "t1", "need 0 < t0 < t1")
    G0 = nil3_group_closed_form(p["t0"], p["a0"], p["b0"], p["t0"])
    traj = integrate_group_flow(G0, p["t0"], p["t1"], p["steps"])
    err = max(
        float(np.max(np.abs(G - nil3_group_closed_form(t, p["a0"], p["b0"], p["t0"]).G)))
        for t, G in zip(traj.times, traj.G)
    )
    return {"max_abs_error": err}, err


def _verify_rigid_scaling(p):
    C = p["C"]
    G1 = rigid_scaling_seed(C, p["a0"])
    h = 1e-4
    out, worst = {}, 0.0
    for t in p["times"]:
        G = rigid_scaling_family(t, C, G1)
        dG = (rigid_scaling_family(t + h, C, G1).G - rigid_scaling_family(t - h, C, G1).G) / (2 * h)
        cp = ricci_arrays(G.algebra.c, G.G)
        res = {
            "flow": float(np.max(np.abs(dG + 2 * cp.Ric))),
            "scalar_law": abs(float(cp.R) + 1.0 / (6.0 * (t + C))),
        }
        out[repr(float(t))] = res
        worst = max(worst, *res.values())
    return out, worst


def run_soliton_verify(p, seed, out: Path) -> int:
    family = p["family"]
    if family not in FAMILIES:
        raise ConfigError(f"key 'family': unknown family {family!r}; choose from {FAMILIES}")
    _require(all(t > 0 for t in p["times"]), "times", "must be positive")
    runner = {
        "four_dim_soliton": _verify_four_dim,
        "nil3_group": _verify_nil3_group,
        "rigid_scaling": _verify_rigid_scaling,
    }[family]
    residuals, worst = runner(p)
    passed = worst <= p["tol"]
    write_json(
        out / "diagnostics.json",
        {"command": "soliton-verify", "family": family, "residuals": residuals,
         "max_residual": worst, "tol": p["tol"], "passed": passed},
    )
    if not passed:
        raise NotASoliton(f"largest residual {worst:.3e} exceeds tol {p['tol']:.1e}")
    return EXIT_OK


def run_blowdown(p, seed, out: Path) -> int:
    scales = sorted(p["scales"])
    _require(scales[0] * 1.0 >= p["t0"], "scales", "the rescaled time must not precede t0")
    _, state = _bundle_initial(p, seed)
    t1 = max(scales)
    traj = (
        [state] if t1 <= state.t else integrate_bundle(state, t1, p["cfl"], save_times=scales)
    )
    rows = blowdown_driver(traj, scales)
    names = ["scale"] + list(RESIDUAL_NAMES)
    (out / "report.csv").write_text(_table_csv(header_lines("blowdown", p, seed), names, rows))
    write_json(out / "diagnostics.json", {"command": "blowdown", "rows": rows})
    return EXIT_OK


RUNNERS = {
    "group-flow": run_group_flow,
    "bundle-flow": run_bundle_flow,
    "functional-report": run_functional_report,
    "soliton-verify": run_soliton_verify,
    "blowdown": run_blowdown,
}


# ---------------------------------------------------------------- argument parsing


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; route that to the input-error code."""

    def error(self, message):
        raise ConfigError(message)


def _flag_type(default):
    if isinstance(default, bool):
        return lambda v: v.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    if default is None:
        return json.loads
    return str


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nilflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, defaults in DEFAULTS.items():
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", type=Path, help="JSON file with parameters")
        sp.add_argument("--out", type=Path, default=None, help="output directory (default .)")
        sp.add_argument("--seed", type=int, default=None, help="seed for random initial data")
        for key, default in defaults.items():
            flag = "--" + key.replace("_", "-")
            if isinstance(default, list):
                sp.add_argument(flag, dest=key, type=float, nargs="+", default=None)
            else:
                sp.add_argument(flag, dest=key, type=_flag_type(default), default=None)
    return parser


def run(argv=None) -> int:
    """Parse arguments, run one experiment and return the exit code."""
    args = build_parser().parse_args(argv)
    command = args.command
    config = load_config(args.config) if args.config else {}
    seed = config.pop("seed", 0)
    if args.seed is not None:
        seed = args.seed
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"key 'seed': expected a nonnegative integer, got {seed!r}")
    named = config.pop("command", command)
    if named != command:
        raise ConfigError(f"key 'command': config is for {named!r}, not {command!r}")
    out = Path(config.pop("out", "."))
    if args.out is not None:
        out = args.out
    overrides = {k: getattr(args, k) for k in DEFAULTS[command] if getattr(args, k) is not None}
    params = resolve_params(command, config, overrides)
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[command](params, seed, out)


def main(argv=None) -> int:
    try:
        return run(argv)
    except InputError as exc:
        print(f"nilflow: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ContractViolation as exc:
        print(f"nilflow: contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except NumericalFailure as exc:
        print(f"nilflow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
