"""Command-line runner: ``movingpoint --config run.json --out results/``.

The config is a flat JSON object with ``"version": 1`` and a
``"subcommand"`` among ``spectrum``, ``forms-audit``, ``resolvent-audit``,
``evolve`` and ``convergence``.  Unknown keys are rejected.  Every run
writes ``report.json`` (inputs, computed values, tolerances and pass
flags); ``evolve`` also writes ``traces.csv`` and field snapshots.

Exit status: 0 when every check passes, 1 when a check fails, 2 for an
invalid config, 3 when a numerical guard trips (named in the report).
"""

import argparse
import json
import math
import os
import sys
import warnings

import jsonschema
import numpy as np

from . import forms, kernels, propagator, spectrum
from .errors import MisalignedTimeError, NumericalGuardError
from .grid import GridSpec, WaveField, gaussian_state, random_smooth_field, write_slice_png
from .hamiltonian import (
    PointInteractionOperator,
    dense_materialize,
    gamma_difference_defect,
    krein_resolvent_apply,
)

CONFIG_VERSION = 1
SUBCOMMANDS = ("spectrum", "forms-audit", "resolvent-audit", "evolve", "convergence")

# Documented defaults for every tolerance used in pass/fail logic.
DEFAULT_TOLERANCES = {
    "tol_root": 1e-12,
    "tol_dense": 1e-8,
    "tol_form_identity": 1e-2,
    "tol_krein": 1e-10,
    "tol_resolvent_identity": 1e-10,
    "tol_norm": 1e-11,
    "tol_gamma_final": 0.1,
    "tol_rate": 3.0,
}

_number = {"type": "number"}
_vec3 = {"type": "array", "items": _number, "minItems": 3, "maxItems": 3}
_complex = {"anyOf": [_number, {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}]}
_posint = {"type": "integer", "minimum": 1}

_COMMON = {
    "version": {"const": CONFIG_VERSION},
    "subcommand": {"enum": list(SUBCOMMANDS)},
    "seed": {"type": "integer", "minimum": 0},
    "out": {"type": "string"},
    "alpha": {"type": ["number", "null"]},
    "n": {"type": "integer", "minimum": 4, "multipleOf": 2},
    "L": {"type": "number", "exclusiveMinimum": 0},
}

_FIELDS = {
    "spectrum": {
        "v": _vec3,
        "dense": {"type": "boolean"},
        "png": {"type": "boolean"},
        "tol_root": _number,
        "tol_dense": _number,
    },
    "forms-audit": {
        "v": _vec3,
        "lambda_ref": _number,
        "n_states": _posint,
        "tol_form_identity": _number,
    },
    "resolvent-audit": {
        "v": _vec3,
        "lambdas": {"type": "array", "items": _complex, "minItems": 2},
        "n_fields": _posint,
        "dense": {"type": "boolean"},
        "tol_krein": _number,
        "tol_resolvent_identity": _number,
    },
    "evolve": {
        "trajectory": {"enum": ["line", "circle", "sinusoid", "stationary"]},
        "velocity": _vec3,
        "start": _vec3,
        "center": _vec3,
        "amplitude": _vec3,
        "radius": _number,
        "omega": _number,
        "phase": _number,
        "initial": {"enum": ["bound_state", "gaussian"]},
        "width": {"type": "number", "exclusiveMinimum": 0},
        "momentum": _vec3,
        "t_start": _number,
        "t_end": _number,
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "stride": _posint,
        "lambda_star": {"type": ["number", "null"]},
        "snapshots": {"type": "boolean"},
        "png": {"type": "boolean"},
        "tol_norm": _number,
    },
    "convergence": {
        "study": {"enum": ["gamma", "timestep"]},
        "v": _vec3,
        "ns": {"type": "array", "items": {"type": "integer", "minimum": 4, "multipleOf": 2}, "minItems": 2},
        "lam": _number,
        "mu": _number,
        "dts": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2},
        "t_end": _number,
        "tol_gamma_final": _number,
        "tol_rate": _number,
    },
}

_REQUIRED = {
    "spectrum": ["alpha", "v"],
    "forms-audit": ["alpha", "v", "n", "L"],
    "resolvent-audit": ["alpha", "v", "n", "L", "lambdas"],
    "evolve": ["alpha", "n", "L", "trajectory", "dt", "t_end"],
    "convergence": ["study"],
}


def schema_for(subcommand):
    return {
        "type": "object",
        "properties": {**_COMMON, **_FIELDS[subcommand]},
        "required": ["version", "subcommand", *_REQUIRED[subcommand]],
        "additionalProperties": False,
    }


class ConfigError(ValueError):
    pass


def validate_config(cfg):
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    sub = cfg.get("subcommand")
    if sub not in SUBCOMMANDS:
        raise ConfigError(f"subcommand must be one of {SUBCOMMANDS}, got {sub!r}")
    try:
        jsonschema.validate(cfg, schema_for(sub))
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {exc.message}") from None
    return cfg


def _alpha(cfg):
    a = cfg.get("alpha")
    return kernels.DECOUPLED if a is None else float(a)


def _tol(cfg, key):
    return float(cfg.get(key, DEFAULT_TOLERANCES[key]))


def _as_complex(x):
    return complex(x[0], x[1]) if isinstance(x, list) else complex(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(float(x.real)), _jsonable(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


class Checks:
    def __init__(self):
        self.items = []

    def add(self, name, value, tolerance, passed):
        self.items.append({"name": name, "value": value, "tolerance": tolerance, "passed": bool(passed)})

    def upper(self, name, value, tolerance):
        self.add(name, value, tolerance, value <= tolerance)

    @property
    def passed(self):
        return all(c["passed"] for c in self.items)


def _grid(cfg):
    if "n" not in cfg or "L" not in cfg:
        raise ConfigError(f"{cfg['subcommand']}: this run needs the grid keys 'n' and 'L'")
    return GridSpec(int(cfg["n"]), float(cfg["L"]))


# -- subcommands -------------------------------------------------------------


def run_spectrum(cfg, out, checks):
    alpha, v = _alpha(cfg), np.asarray(cfg["v"], dtype=float)
    rep = spectrum.spectrum_report(alpha, v)
    energy = spectrum.bound_state_energy(alpha, v)
    results = {**rep.to_dict(), "bound_state_energy": energy}
    if energy is not None:
        scale = max(1.0, abs(energy))
        checks.upper("closed_form_vs_root", abs(energy - rep.point_spectrum) / scale, _tol(cfg, "tol_root"))
    if cfg.get("dense"):
        grid = _grid(cfg)
        lam0 = rep.gamma_root
        P = PointInteractionOperator.calibrated(alpha, v, grid, lam0)
        evals = np.linalg.eigvalsh(dense_materialize(P))
        results["dense_lowest"] = evals[0]
        if energy is not None:
            checks.upper("dense_bound_state", abs(evals[0] - energy) / abs(energy), _tol(cfg, "tol_dense"))
    if cfg.get("png") and energy is not None:
        field = spectrum.bound_state_field(alpha, v, _grid(cfg))
        write_slice_png(os.path.join(out, "eigenfunction.png"), field)
    return results


def _random_states(grid, rng, lam, count):
    out = []
    for _ in range(count):
        q = complex(rng.normal(), rng.normal())
        out.append(forms.DecomposedState(random_smooth_field(grid, rng), q, lam))
    return out


def run_forms_audit(cfg, out, checks, rng):
    grid, alpha = _grid(cfg), _alpha(cfg)
    v = np.asarray(cfg["v"], dtype=float)
    lam = float(cfg.get("lambda_ref", 1.0 + kernels.speed_squared(v) / 4.0))
    states = _random_states(grid, rng, lam, int(cfg.get("n_states", 20)))
    gdesc = {"n": grid.n, "L": grid.L}
    records, worst = [], 0.0
    for i, d1 in enumerate(states):
        d2 = states[(i + 1) % len(states)]
        fv, f0, qv, res = forms.form_identity_residual(alpha, v, d1, d2)
        worst = max(worst, res)
        for name, val in (("F_v_alpha", fv), ("F_alpha_0", f0), ("Q_v", qv)):
            records.append({"form": name, "value_re": val.real, "value_im": val.imag, "residual": res, "grid": gdesc})
    checks.upper("form_identity", worst, _tol(cfg, "tol_form_identity"))
    return {"records": records, "max_residual": worst}


def run_resolvent_audit(cfg, out, checks, rng):
    grid, alpha = _grid(cfg), _alpha(cfg)
    v = np.asarray(cfg["v"], dtype=float)
    P = PointInteractionOperator.calibrated(alpha, v, grid)
    lams = [_as_complex(x) for x in cfg["lambdas"]]
    fields = [
        WaveField(rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape), grid)
        for _ in range(int(cfg.get("n_fields", 5)))
    ]
    lam, mu = lams[0], lams[1]
    ident = 0.0
    for f in fields:
        kl, km = krein_resolvent_apply(P, lam, f), krein_resolvent_apply(P, mu, f)
        rhs = (mu - lam) * krein_resolvent_apply(P, lam, km)
        ident = max(ident, ((kl - km) - rhs).norm() / f.norm())
    checks.upper("first_resolvent_identity", ident, _tol(cfg, "tol_resolvent_identity"))
    results = {"lambdas": lams, "resolvent_identity_defect": ident}
    if cfg.get("dense", grid.n <= 12):
        errs = []
        for z in lams:
            K = dense_materialize(P, z)
            for f in fields:
                a = krein_resolvent_apply(P, z, f).values.ravel()
                b = K @ f.values.ravel()
                errs.append(np.linalg.norm(a - b) / np.linalg.norm(b))
        results["krein_vs_dense"] = max(errs)
        checks.upper("krein_vs_dense", max(errs), _tol(cfg, "tol_krein"))
    return results


def _trajectory(cfg):
    kind = cfg["trajectory"]
    keys = {
        "line": ("velocity", "start"),
        "circle": ("radius", "omega", "center", "phase"),
        "sinusoid": ("amplitude", "omega", "center"),
        "stationary": ("velocity", "center"),
    }[kind]
    params = {k: cfg[k] for k in keys if k in cfg}
    builder = getattr(propagator, kind)
    try:
        return builder(**params)
    except TypeError as exc:
        raise ConfigError(f"trajectory {kind!r}: {exc}") from None


def run_evolve(cfg, out, checks):
    grid, alpha = _grid(cfg), _alpha(cfg)
    traj = _trajectory(cfg)
    pc = propagator.PropagatorConfig(
        grid,
        alpha,
        traj,
        float(cfg.get("t_start", 0.0)),
        float(cfg["t_end"]),
        float(cfg["dt"]),
        int(cfg.get("stride", 10)),
        cfg.get("lambda_star"),
    )
    if cfg.get("initial", "bound_state") == "bound_state":
        b, energy = propagator.stationary_eigenstate(pc)
        psi0 = propagator.translate(b, -traj.position(pc.t_start))
    else:
        energy = None
        psi0 = gaussian_state(grid, traj.position(pc.t_start), cfg.get("width", 1.0), cfg.get("momentum", (0, 0, 0)))
    res = propagator.evolve_lab(psi0, pc.t_start, pc.t_end, pc)
    rows = propagator.save_result(res, out, snapshots=cfg.get("snapshots", True))
    norms = np.array([r[1] for r in rows])
    drift = float(np.max(np.abs(norms - norms[0])))
    checks.upper("norm_drift", drift, _tol(cfg, "tol_norm"))
    trace = [(r[0], r[2]) for r in rows]
    if cfg.get("png"):
        write_slice_png(os.path.join(out, "final.png"), res.final)
    return {
        "steps": pc.n_steps,
        "checkpoints": len(rows),
        "norm_drift": drift,
        "discrete_energy": energy,
        "form_energy_increment_constant": propagator.increment_constant(trace),
        "trace_columns": list(propagator.TRACE_COLUMNS),
    }


def run_convergence(cfg, out, checks):
    study = cfg["study"]
    v = np.asarray(cfg.get("v", (0.0, 0.0, 0.0)), dtype=float)
    if study == "gamma":
        L = float(cfg.get("L", 20.0))
        ns = [int(n) for n in cfg.get("ns", (32, 64, 128))]
        lam, mu = float(cfg.get("lam", 1.0)), float(cfg.get("mu", 2.0))
        errs = [gamma_difference_defect(GridSpec(n, L), v, lam, mu) for n in ns]
        monotone = all(b < a for a, b in zip(errs, errs[1:]))
        checks.add("monotone_decrease", errs, None, monotone)
        checks.upper("final_relative_error", errs[-1], _tol(cfg, "tol_gamma_final"))
        return {"ns": ns, "errors": errs}
    grid = GridSpec(int(cfg.get("n", 32)), float(cfg.get("L", 20.0)))
    alpha = _alpha(cfg)
    t_end = float(cfg.get("t_end", 1.0))
    dts = [float(d) for d in cfg.get("dts", (1e-3, 5e-4, 2.5e-4))]
    defects = []
    for dt in dts:
        pc = propagator.PropagatorConfig(grid, alpha, propagator.line(v), 0.0, t_end, dt, stride=10**9)
        defects.append(stationary_phase_defect(pc))
    rates = [a / b for a, b in zip(defects, defects[1:])]
    checks.add("second_order", rates, _tol(cfg, "tol_rate"), all(r >= _tol(cfg, "tol_rate") for r in rates))
    return {"dts": dts, "defects": defects, "rates": rates}


def stationary_phase_defect(pc):
    """``|1 - <exp(-iE t) psi_expected, psi(t)>|`` for the lab-frame bound state on a line."""
    b, energy = propagator.stationary_eigenstate(pc)
    traj = pc.trajectory
    lab0 = propagator.translate(b, -traj.position(pc.t_start))
    res = propagator.evolve_lab(lab0, pc.t_start, pc.t_end, pc)
    shift = traj.position(pc.t_end) - traj.position(pc.t_start)
    expected = propagator.translate(lab0, -shift)
    overlap = expected.inner(res.final)
    return abs(1.0 - np.exp(1j * energy * (pc.t_end - pc.t_start)) * overlap)


# -- driver --------------------------------------------------------------------


def execute(cfg, out):
    """Run a validated config; returns ``(report, exit_code)``."""
    seed = int(cfg.get("seed", 0))
    rng = np.random.default_rng(seed)
    checks = Checks()
    sub = cfg["subcommand"]
    report = {"version": CONFIG_VERSION, "subcommand": sub, "seed": seed, "config": cfg}
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            if sub == "spectrum":
                results = run_spectrum(cfg, out, checks)
            elif sub == "forms-audit":
                results = run_forms_audit(cfg, out, checks, rng)
            elif sub == "resolvent-audit":
                results = run_resolvent_audit(cfg, out, checks, rng)
            elif sub == "evolve":
                results = run_evolve(cfg, out, checks)
            else:
                results = run_convergence(cfg, out, checks)
    except NumericalGuardError as exc:
        report.update({"passed": False, "guard": type(exc).__name__, "message": str(exc)})
        return report, 3
    report["results"] = results
    report["checks"] = checks.items
    report["warnings"] = sorted({str(w.message) for w in caught})
    report["passed"] = checks.passed
    return report, 0 if checks.passed else 1


def write_report(report, out):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="movingpoint", description=__doc__.splitlines()[0])
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="output directory (overrides the config's 'out')")
    parser.add_argument("--seed", type=int, help="seed override (non-negative 64-bit integer)")
    parser.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")
    args = parser.parse_args(argv)

    out = args.out
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must fit in an unsigned 64-bit integer")
            cfg["seed"] = args.seed
        validate_config(cfg)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        if out:
            write_report({"version": CONFIG_VERSION, "passed": False, "config_error": str(exc)}, out)
        return 2
    out = out or cfg.get("out") or "movingpoint-out"
    os.makedirs(out, exist_ok=True)
    try:
        report, code = execute(cfg, out)
    except (ConfigError, MisalignedTimeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        write_report({"version": CONFIG_VERSION, "passed": False, "config_error": str(exc)}, out)
        return 2
    write_report(report, out)
    if not args.quiet:
        if code == 3:
            print(f"{cfg['subcommand']}: guard {report['guard']} tripped: {report['message']}")
        else:
            for c in report["checks"]:
                print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {json.dumps(_jsonable(c['value']))}")
            print(f"{cfg['subcommand']}: {'passed' if code == 0 else 'FAILED'} -> {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
