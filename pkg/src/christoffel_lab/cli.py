"""Command line runner: configuration, experiment orchestration and
machine-readable reports.

One experiment per process.  The configuration is a single JSON document;
individual keys can be overridden on the command line with dot paths
(--set grid.n_theta=24).  Re-running a command with the same
configuration and seed produces byte-identical reports.

Exit codes
    0  success; for `solve`, geometric solution confirmed (W > 0)
    2  invalid input: configuration, body, compatibility, ellipticity,
       or a solve that did not converge
    3  solve converged but the solution is not geometric (min eig <= 0)
    4  a requested sufficient-condition check failed (solve still runs
       and the report is written, flagged)
"""

from __future__ import annotations

import os

# thread count is the only environment interface; BLAS reads these at load
_threads = os.environ.get("CHRISTOFFEL_LAB_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import json
import sys

import numpy as np

from . import conditions, diagnostics, reporting, solver, spherecore
from . import bodies as bodies_mod
from .errors import (ChristoffelLabError, CompatibilityError, ConfigurationError,
                     ConvergenceError, EllipticityError)
from .spherecore import SphericalField

DEFAULT_TOLERANCES = {"compat": 1e-8, "residual": 1e-6, "psd": 1e-8,
                      "rank": 1e-6, "roundtrip": 1e-6}

CHECKS_NEEDING_TENSOR = {"diagonal_convexity", "structure_condition"}
CHECKS_NEEDING_BODY = {"directional_condition", "matrix_convexity",
                       "perturbation_bound"}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def body_from_json(spec):
    """Build a catalog body from its JSON description."""
    try:
        variant = spec["variant"]
        if variant == "ball":
            return bodies_mod.Ball(spec["r"])
        if variant == "translated_ball":
            return bodies_mod.TranslatedBall(spec["r"], spec["v"])
        if variant == "ellipsoid":
            return bodies_mod.Ellipsoid(*spec["semiaxes"])
        if variant == "harmonic_perturbation":
            return bodies_mod.harmonic_perturbation(
                spec["base"], [tuple(t) for t in spec["coeffs"]])
        if variant == "minkowski_sum":
            return bodies_mod.MinkowskiSum(
                [(body_from_json(t["body"]), t["weight"]) for t in spec["terms"]])
    except KeyError as exc:
        raise ConfigurationError(f"body spec missing key {exc}") from exc
    raise ConfigurationError(f"unknown body variant {spec.get('variant')!r}")


def field_from_json(spec, grid):
    """Build a density/data field from its JSON description.

    kinds: constant {value}; affine {constant, vector}; harmonic
    {offset, coeffs: [[l, m, c], ...]}; reciprocal {of: <field spec>}.
    """
    try:
        kind = spec["kind"]
        if kind == "constant":
            return SphericalField.constant(grid, spec["value"])
        if kind == "affine":
            c0 = float(spec["constant"])
            v = np.asarray(spec["vector"], dtype=float)
            return SphericalField.from_function(grid, lambda pts: c0 + pts @ v)
        if kind == "harmonic":
            return SphericalField.harmonic(
                grid, [tuple(t) for t in spec.get("coeffs", [])],
                offset=spec.get("offset", 0.0))
        if kind == "reciprocal":
            return field_from_json(spec["of"], grid).reciprocal()
    except KeyError as exc:
        raise ConfigurationError(f"field spec missing key {exc}") from exc
    raise ConfigurationError(f"unknown field kind {spec.get('kind')!r}")


def load_config(path, overrides):
    with open(path) as fh:
        config = json.load(fh)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not key=value")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        target = config
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
        target[parts[-1]] = value
    return config


def _validated(config):
    grid_spec = config.get("grid", {})
    grid = spherecore.build_grid(grid_spec.get("n_theta", 16),
                                 grid_spec.get("n_phi", 32))
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(config.get("tolerances", {}))
    for key, value in tol.items():
        if value <= 0:
            raise ConfigurationError(f"tolerance {key} must be positive")
    seed = int(config.get("seed", 0))
    return grid, tol, seed


def _require_c2plus(body, grid, tol):
    ok, min_eig = bodies_mod.is_c2plus(body, grid, tol["psd"])
    if not ok:
        raise ConfigurationError(
            f"body is not smooth and strictly convex (min eig {min_eig:.3e})")
    return min_eig


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def write_json(payload, out_dir, name="report.json"):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path

def write_field_csv(out_dir, name, grid, columns, values):
    """Node field CSV: node,theta,phi then one column per value."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    thetas = grid.node_thetas()
    phis = grid.node_phis()
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] == grid.n_nodes:
        values = values.T
    with open(path, "w") as fh:
        fh.write("node,theta,phi," + ",".join(columns) + "\n")
        for i in range(grid.n_nodes):
            row = ",".join(repr(float(v)) for v in values[:, i])
            fh.write(f"{i},{float(thetas[i])!r},{float(phis[i])!r},{row}\n")
    return path


# ---------------------------------------------------------------------------
# condition dispatch
# ---------------------------------------------------------------------------

def run_checks(names, grid, f, tol, seed, A=None, front_body=None):
    verdicts = {}
    for name in names:
        if name == "reciprocal_convexity":
            verdicts[name] = conditions.check_reciprocal_convexity(f, grid, tol["psd"])
        elif name == "diagonal_convexity":
            verdicts[name] = conditions.check_diagonal_convexity(
                A, f, grid, tol=tol["psd"], seed=seed)
        elif name == "structure_condition":
            verdicts[name] = conditions.check_structure_condition(
                A, f, grid, tol=tol["psd"], seed=seed)
        elif name == "directional_condition":
            verdicts[name] = conditions.check_directional_condition(
                front_body, f, grid, tol=tol["psd"], seed=seed)
        elif name == "matrix_convexity":
            verdicts[name] = conditions.check_matrix_convexity(
                front_body, f, grid, tol=tol["psd"], seed=seed)
        elif name == "perturbation_bound":
            if not isinstance(front_body, bodies_mod.HarmonicPerturbation):
                raise ConfigurationError(
                    "perturbation_bound applies to harmonic_perturbation bodies only")
            verdicts[name] = conditions.check_perturbation_bound(
                front_body.c, front_body.psi_coeffs, grid, tol=tol["psd"], seed=seed)
        else:
            raise ConfigurationError(f"unknown check {name!r}")
    return verdicts


def _checks_context(config, grid, tol):
    """Front body and coefficient tensor for the requested checks."""
    names = config.get("checks", [])
    body_specs = config.get("bodies", [])
    front_body = None
    A = None
    if set(names) & (CHECKS_NEEDING_TENSOR | CHECKS_NEEDING_BODY):
        if not body_specs:
            raise ConfigurationError("requested checks need at least one body")
        front_body = body_from_json(body_specs[0])
        _require_c2plus(front_body, grid, tol)
    if set(names) & CHECKS_NEEDING_TENSOR:
        W = bodies_mod.weingarten_form(front_body, grid)
        A = bodies_mod.scaled_cofactor_field([W])
    return names, front_body, A


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_measure(config, out_dir):
    """Mixed-measure density of n bodies plus moment and pairing checks."""
    grid, tol, seed = _validated(config)
    body_specs = config.get("bodies", [])
    if len(body_specs) != 2:
        raise ConfigurationError("measure needs exactly two bodies on S^2")
    bodies = [body_from_json(s) for s in body_specs]
    for b in bodies:
        _require_c2plus(b, grid, tol)
    front, last = bodies[0], bodies[1]
    dens = diagnostics.mixed_density_values(
        [front], diagnostics._as_tensor(last, grid), grid)
    moments = diagnostics.density_moments(dens, grid)
    probe = bodies_mod.Ball(1.0)
    i1, i2, defect = diagnostics.mixed_volume_pairing([front], last, probe, grid)
    write_field_csv(out_dir, "density.csv", grid, ["density"], dens)
    report = {
        "command": "measure",
        "exit_code": 0,
        "seed": seed,
        "density_scale_note": "density = n * mixed discriminant of Weingarten forms "
                              "(n = 2): two unit balls give the constant 2",
        "moments": [float(m) for m in moments],
        "moments_pass": bool(np.all(np.abs(moments) <= tol["compat"]
                                    * abs(spherecore.quadrature(dens, grid)))),
        "pairing": {"i1": i1, "i2": i2, "defect": defect,
                    "relative_defect": defect / max(abs(i1), abs(i2), 1e-300),
                    "probe": "unit ball"},
    }
    write_json(report, out_dir)
    return 0


def cmd_solve(config, out_dir):
    """Full pipeline: compatibility, ellipticity, checks, solve, diagnostics."""
    grid, tol, seed = _validated(config)
    body_specs = config.get("bodies", [])
    if len(body_specs) != 1:
        raise ConfigurationError("solve needs exactly one fixed body on S^2")
    front = body_from_json(body_specs[0])
    _require_c2plus(front, grid, tol)
    W_front = bodies_mod.weingarten_form(front, grid)
    A = bodies_mod.scaled_cofactor_field([W_front])
    f = field_from_json(config["f"], grid)
    l_max = int(config.get("l_max", 16))

    verdicts = run_checks(config.get("checks", []), grid, f, tol, seed,
                          A=A, front_body=front)
    report = solver.solve(A, f, grid, l_max, compat_tol=tol["compat"],
                          residual_tol=tol["residual"], rank_tol=tol["rank"])
    report.condition_verdicts = verdicts

    Wu = solver.weingarten_of_solution(grid, report.u_coeffs)
    profile = diagnostics.rank_profile(Wu)
    recovered = diagnostics.mixed_density_values([W_front], Wu, grid)
    u_vals = spherecore.sh_synthesis(report.u_coeffs, grid)

    write_field_csv(out_dir, "solution.csv", grid, ["u"], u_vals)
    write_field_csv(out_dir, "eigenvalues.csv", grid, ["lambda1", "lambda2"],
                    profile.eigenvalues)
    write_field_csv(out_dir, "density.csv", grid,
                    ["density", "recovered"],
                    np.stack([f.values, recovered]))

    failed_checks = [n for n, v in verdicts.items() if not v.passed]
    exit_code = 4 if failed_checks else (0 if report.w_min_eig > 0 else 3)
    payload = {
        "command": "solve",
        "exit_code": exit_code,
        "seed": seed,
        "solve": report.to_json_dict(),
        "condition_verdicts": {k: v.to_json_dict() for k, v in verdicts.items()},
        "failed_checks": failed_checks,
        "rank_profile": profile.to_json_dict(),
        "geometric": bool(report.w_min_eig > 0),
        "recovered_density_relative_error":
            float(np.linalg.norm(recovered - f.values)
                  / max(np.linalg.norm(f.values), 1e-300)),
    }
    write_json(payload, out_dir)
    return exit_code


def cmd_check(config, out_dir):
    """Run only the requested condition checkers, no solve."""
    grid, tol, seed = _validated(config)
    f = field_from_json(config["f"], grid)
    names, front_body, A = _checks_context(config, grid, tol)
    verdicts = run_checks(names, grid, f, tol, seed, A=A, front_body=front_body)
    failed = [n for n, v in verdicts.items() if not v.passed]
    payload = {
        "command": "check",
        "exit_code": 4 if failed else 0,
        "seed": seed,
        "condition_verdicts": {k: v.to_json_dict() for k, v in verdicts.items()},
        "failed_checks": failed,
    }
    write_json(payload, out_dir)
    return payload["exit_code"]


def cmd_roundtrip(config, out_dir):
    """Forward-generate a density from a target solution, solve it back,
    and report recovery errors."""
    grid, tol, seed = _validated(config)
    body_specs = config.get("bodies", [])
    if len(body_specs) != 1:
        raise ConfigurationError("roundtrip needs exactly one fixed body")
    front = body_from_json(body_specs[0])
    _require_c2plus(front, grid, tol)
    W_front = bodies_mod.weingarten_form(front, grid)
    A = bodies_mod.scaled_cofactor_field([W_front])
    l_max = int(config.get("l_max", 24))

    target_spec = config.get("target", {"kind": "harmonic", "offset": 1.0,
                                        "coeffs": [[3, 0, 0.1]]})
    target = field_from_json(target_spec, grid)
    t_coeffs = target.coeffs()
    if t_coeffs.size > spherecore.n_coeffs(l_max):
        raise ConfigurationError("target degree exceeds l_max")
    if np.abs(t_coeffs[1:4]).max() > 0:
        raise ConfigurationError("target must have no degree-1 component")
    u_star = np.zeros(spherecore.n_coeffs(l_max))
    u_star[: t_coeffs.size] = t_coeffs

    f = solver.operator_apply(A, u_star, grid)
    report = solver.solve(A, f, grid, l_max, compat_tol=tol["compat"],
                          residual_tol=tol["residual"], rank_tol=tol["rank"])
    rel_err = float(np.linalg.norm(report.u_coeffs - u_star)
                    / np.linalg.norm(u_star))
    recovered = diagnostics.mixed_density_values(
        [W_front], solver.weingarten_of_solution(grid, report.u_coeffs), grid)
    dens_err = float(np.linalg.norm(recovered - f.values)
                     / np.linalg.norm(f.values))
    passed = rel_err <= tol["roundtrip"] and dens_err <= tol["roundtrip"]
    write_field_csv(out_dir, "density.csv", grid, ["density", "recovered"],
                    np.stack([f.values, recovered]))
    payload = {
        "command": "roundtrip",
        "exit_code": 0 if (passed and report.w_min_eig > 0) else 3,
        "seed": seed,
        "solve": report.to_json_dict(),
        "roundtrip": {"relative_solution_error": rel_err,
                      "relative_density_error": dens_err,
                      "tolerance": tol["roundtrip"], "passed": passed},
        "geometric": bool(report.w_min_eig > 0),
    }
    write_json(payload, out_dir)
    return payload["exit_code"]


def cmd_report(result_dir, out_dir):
    written = reporting.render_report(result_dir, out_dir)
    for path in written:
        print(path)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _error_payload(command, exc, out_dir):
    payload = {
        "command": command,
        "exit_code": 2,
        "error": {"type": type(exc).__name__, "message": str(exc)},
    }
    if isinstance(exc, CompatibilityError):
        payload["error"]["moments"] = list(exc.moments)
    if isinstance(exc, EllipticityError):
        payload["error"]["node"] = exc.node
        payload["error"]["margin"] = exc.margin
    if isinstance(exc, ConvergenceError):
        payload["error"]["residual"] = exc.residual
    try:
        write_json(payload, out_dir)
    except OSError:
        pass
    return payload


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="christoffel-lab",
        description="numerical laboratory for the mixed Christoffel problem")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (("measure", "mixed-measure density of two bodies"),
                      ("solve", "solve the mixed equation for a density"),
                      ("check", "run sufficient-condition checkers only"),
                      ("roundtrip", "forward-generate and re-solve")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("-c", "--config", required=True, help="JSON configuration")
        p.add_argument("-o", "--output", default="out", help="output directory")
        p.add_argument("--set", action="append", dest="overrides", metavar="KEY=VALUE",
                       help="override a config key (dot path, JSON value)")
    p = sub.add_parser("report", help="render summary and figures for results")
    p.add_argument("-i", "--input", required=True, help="result directory")
    p.add_argument("-o", "--output", default=None, help="figure directory")

    args = parser.parse_args(argv)
    if args.command == "report":
        return cmd_report(args.input, args.output)

    dispatch = {"measure": cmd_measure, "solve": cmd_solve,
                "check": cmd_check, "roundtrip": cmd_roundtrip}
    try:
        config = load_config(args.config, args.overrides)
        return dispatch[args.command](config, args.output)
    except (ChristoffelLabError, OSError, json.JSONDecodeError) as exc:
        payload = _error_payload(args.command, exc, args.output)
        print(f"error: {payload['error']['type']}: {payload['error']['message']}",
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
