"""Batch front door: parse a JSON config, dispatch verification and
simulation subcommands, emit text/CSV artifacts with deterministic seeds.

Exit codes: 0 all checks passed, 1 a verification failed, 2 usage or
config error.  Identical config + seed gives byte-identical outputs; no
subcommand writes outside the chosen output directory.
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import jsonschema

from .algebra import AlgebraError, classify, structure_constants
from .dynamics import (IntegrationError, evaluate_on, integrate, monitor,
                       write_drift_csv, write_trajectory_csv)
from .expr import ExprError, ONE, ParseError, ZERO, parse, to_str
from .jet import (PointGenerator, cartan_generator, determining_equations,
                  format_determining, is_symmetry, noether_first_integral,
                  verify_dynamical)
from .models import (DEFAULT_DOMAIN, KEParams, ModelError, UnaryFunc,
                     build_lagrangian, build_system, curl_free_shape,
                     ermakov_invariant, euler_lagrange_system,
                     lagrangian_compatibility)
from .models import bindings as model_bindings
from .numeric import (EvalDomainError, UnboundFunctionError,
                      UnboundSymbolError, max_abs_on)
from .sigma import pinney_reduction
from .simplify import is_zero_structural, simplify

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

DEFAULT_SEED = 1729
DEFAULT_SAMPLES = 200


class ConfigError(Exception):
    """Anything wrong with the config file itself."""


def _fmt(v) -> str:
    return "%.17g" % float(v)


# ---------------------------------------------------------------------------
# Config loading


def _schema() -> dict:
    text = resources.files("kesym").joinpath("config.schema.json").read_text(
        encoding="utf-8")
    return json.loads(text)


def load_config(path) -> dict:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(exc))
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})")
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(cfg),
                    key=lambda e: list(e.absolute_path))
    if errors:
        best = jsonschema.exceptions.best_match(errors)
        pointer = "/" + "/".join(str(p) for p in best.absolute_path)
        raise ConfigError(f"{path}: at {pointer}: {best.message}")
    return cfg


def _parse_expr(text, where: str):
    try:
        return parse(text)
    except ParseError as exc:
        raise ConfigError(f"{where}: {exc}")


def _functions(cfg) -> dict:
    table = {}
    for name, spec in (cfg.get("functions") or {}).items():
        try:
            table[name] = UnaryFunc(name, spec.get("param", "u"),
                                    spec.get("body"), None,
                                    spec.get("dbody"))
        except ParseError as exc:
            raise ConfigError(f"functions.{name}: {exc}")
    return table


def _shape(model: dict, key: str, table: dict):
    """A model entry is either the name of a declared function or an
    inline closed-form body in u."""
    value = model.get(key)
    if value is None:
        return None
    if value in table:
        return table[value]
    return UnaryFunc(key, "u", _parse_expr(value, f"model.{key}"))


def params_from(cfg) -> KEParams:
    model = cfg.get("model") or {}
    table = _functions(cfg)
    f = _shape(model, "f", table) or UnaryFunc("f", "u")
    g = _shape(model, "g", table) or UnaryFunc("g", "u")
    h = _shape(model, "h", table)
    if h is None and model.get("C0"):
        h = curl_free_shape(model["C0"])
    w = _parse_expr(model.get("w", "0"), "model.w")
    H = _parse_expr(model["H"], "model.H") if "H" in model else None
    try:
        return KEParams(f=f, g=g, h=h, w=w, C=model.get("C", 0),
                        h_exponent=model.get("h_exponent", 2), H_override=H)
    except ExprError as exc:
        raise ConfigError(f"model: {exc}")


def generators_from(cfg) -> dict:
    gens = {}
    for name, spec in (cfg.get("generators") or {}).items():
        try:
            gens[name] = PointGenerator(
                parse(spec["xi"]),
                {"x": parse(spec["eta1"]), "y": parse(spec["eta2"])},
                ("x", "y"))
        except (ParseError, ExprError) as exc:
            raise ConfigError(f"generators.{name}: {exc}")
    return gens


def _constants(cfg) -> dict:
    return {k: float(v) for k, v in (cfg.get("constants") or {}).items()}


def _run_section(cfg) -> dict:
    return cfg.get("run") or {}


def _need(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"{where}.{key} is required for this subcommand")
    return section[key]


def _out_path(args, cfg, key: str, default_name: str) -> Path:
    outputs = cfg.get("outputs") or {}
    name = outputs.get(key, default_name)
    rel = Path(name)
    if rel.is_absolute() or ".." in rel.parts:
        raise ConfigError(
            f"outputs.{key}: path must stay inside the output directory")
    base = Path(args.out) if args.out else Path(".")
    full = base / rel
    full.parent.mkdir(parents=True, exist_ok=True)
    return full


def _zero_or_small(e, domain, b, samples, tol, seed):
    """(passed, detail) — structural proof first, sampling fallback."""
    if is_zero_structural(e):
        return True, "structural 0"
    m = max_abs_on(e, domain, samples=samples, seed=seed, bindings=b)
    return m < tol, f"max |residual| = {m:.3e}"


# ---------------------------------------------------------------------------
# Subcommands


def cmd_verify_symmetry(args, cfg) -> int:
    p = params_from(cfg)
    system = build_system(p)
    gens = generators_from(cfg)
    if not gens:
        raise ConfigError("generators: at least one generator is required")
    if args.generator:
        if args.generator not in gens:
            raise ConfigError(f"generators.{args.generator}: not defined")
        names = [args.generator]
    else:
        names = sorted(gens)
    b = model_bindings(p, _constants(cfg))
    tol = args.tol if args.tol is not None else 1e-10
    failed = []
    for name in names:
        report = is_symmetry(gens[name], system, domain=DEFAULT_DOMAIN,
                             bindings=b, samples=args.samples, tol=tol,
                             seed=args.seed)
        status = "pass" if report.passed else "FAIL"
        print(f"{name}: {status}  max residual {report.max_abs:g}")
        if not report.passed:
            failed.append(name)
            for line in report.summary().splitlines():
                print(f"  {line}")
    if failed:
        print(f"not a symmetry: {', '.join(failed)}")
        return EXIT_FAIL
    return EXIT_OK


def cmd_determining(args, cfg) -> int:
    p = params_from(cfg)
    system = build_system(p)
    lines = format_determining(determining_equations(system))
    text = "\n".join(lines) + "\n"
    outputs = cfg.get("outputs") or {}
    if "determining" in outputs or args.out:
        path = _out_path(args, cfg, "determining", "determining.txt")
        path.write_text(text, encoding="utf-8")
        print(f"wrote {path} ({len(lines)} conditions)")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_commutators(args, cfg) -> int:
    gens = generators_from(cfg)
    if len(gens) < 2:
        raise ConfigError("generators: commutators need at least two")
    names = sorted(gens)
    basis = [gens[n] for n in names]
    consts = _constants(cfg)
    b = model_bindings(params_from(cfg), consts) if consts else None
    table = structure_constants(basis, bindings=b, tol=args.tol or 1e-9,
                                seed=args.seed)
    print(table.render(names))
    try:
        label = classify(table, syms=consts or None)
        print(f"classification: {label}")
    except AlgebraError:
        print("classification: needs numeric values for every constant "
              "(add them to \"constants\")")
    return EXIT_OK


def _energy(p: KEParams):
    """Total energy via the time-translation generator, or None when the
    model is not variational (overridden H, curl-carrying h, or an
    incompatible (f, g) pair)."""
    if p.H_override is not None:
        return None
    try:
        L = build_lagrangian(p)
    except (ModelError, UnboundFunctionError):
        return None
    compat = lagrangian_compatibility(p.f, p.g)
    if not is_zero_structural(simplify(compat)):
        try:
            b = model_bindings(p)
            m = max_abs_on(compat, {"x": (0.5, 2.0), "y": (0.5, 2.0)},
                           samples=64, seed=DEFAULT_SEED, bindings=b)
            if m > 1e-9:
                return None
        except (UnboundFunctionError, UnboundSymbolError, EvalDomainError):
            return None
    shift = PointGenerator(ONE, {"x": ZERO, "y": ZERO}, ("x", "y"))
    return simplify(noether_first_integral(shift, L))


def cmd_simulate(args, cfg) -> int:
    p = params_from(cfg)
    system = build_system(p)
    run = _run_section(cfg)
    t0 = float(_need(run, "t0", "run"))
    t1 = float(_need(run, "t1", "run"))
    init = _need(run, "init", "run")
    if len(init) != 4:
        raise ConfigError("run.init needs [x, y, xdot, ydot]")
    inv = ermakov_invariant(p)
    b = model_bindings(p, _constants(cfg), extra_fns=inv.fn_bindings)
    rtol = args.rtol if args.rtol is not None else run.get("rtol", 1e-10)
    atol = args.atol if args.atol is not None else run.get("atol", 1e-12)
    n_samples = args.samples if args.samples_given else run.get("samples",
                                                                201)
    traj = integrate(system, init, t0, t1, n_samples=n_samples, rtol=rtol,
                     atol=atol, bindings=b)
    invariants = {"I": inv.expr}
    energy = _energy(p)
    if energy is not None:
        invariants["E"] = energy
    report = monitor(traj, invariants, b)

    traj_path = _out_path(args, cfg, "trajectory", "trajectory.csv")
    drift_path = _out_path(args, cfg, "drift", "drift.csv")
    extra = {name: report[name].values for name in invariants}
    write_trajectory_csv(traj_path, traj, extra=extra)
    write_drift_csv(drift_path, traj, report)
    written = [str(traj_path), str(drift_path)]
    if args.polar:
        polar_path = _out_path(args, cfg, "polar", "polar.csv")
        _write_polar(polar_path, traj)
        written.append(str(polar_path))

    print(report.summary())
    print("wrote " + ", ".join(written))
    tol = args.tol if args.tol is not None else 1e-6
    worst = report.worst()
    if worst.drift > tol:
        print(f"drift check FAILED: {worst.name} relative drift "
              f"{worst.drift:.3e} > {tol:g}")
        return EXIT_FAIL
    print(f"drift check passed: worst {worst.name} {worst.drift:.3e} "
          f"<= {tol:g}")
    return EXIT_OK


def _write_polar(path, traj):
    """Columns t,r,theta,rdot,thetadot from a planar Cartesian trajectory."""
    import numpy as np

    x = traj.column("x")
    y = traj.column("y")
    xd = traj.column("xdot")
    yd = traj.column("ydot")
    r = np.hypot(x, y)
    theta = np.arctan2(y, x)
    rdot = (x * xd + y * yd) / r
    thetadot = (x * yd - y * xd) / (r * r)
    with open(path, "w", newline="") as fh:
        fh.write("t,r,theta,rdot,thetadot\n")
        for row in zip(traj.times, r, theta, rdot, thetadot):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def cmd_pinney(args, cfg) -> int:
    pin = cfg.get("pinney") or {}
    run = _run_section(cfg)
    model = cfg.get("model") or {}
    w_text = pin.get("w", model.get("w", "0"))
    w = _parse_expr(w_text, "pinney.w")
    c2 = pin.get("c2", 1)
    t0 = float(run.get("t0", 0.0))
    t1 = float(_need(run, "t1", "run"))
    init = _need(run, "init", "run")
    if len(init) != 2:
        raise ConfigError("run.init needs [rho, rhodot]")
    red = pinney_reduction(w=w, c2=c2)
    consts = _constants(cfg)
    b = model_bindings(KEParams(), consts) if consts else None
    rtol = args.rtol if args.rtol is not None else run.get("rtol", 1e-10)
    atol = args.atol if args.atol is not None else run.get("atol", 1e-12)
    n_samples = args.samples if args.samples_given else run.get("samples",
                                                                201)
    traj = integrate(red.system, init, t0, t1, n_samples=n_samples,
                     rtol=rtol, atol=atol, bindings=b)
    sigma = evaluate_on(traj, red.sigma, b)
    fi = evaluate_on(traj, red.first_integral, b)
    path = _out_path(args, cfg, "pinney", "pinney.csv")
    with open(path, "w", newline="") as fh:
        fh.write("t,rho,rhodot,sigma,first_integral\n")
        for row in zip(traj.times, traj.column("rho"),
                       traj.column("rhodot"), sigma, fi):
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    drift = float(max(abs(v - fi[0]) for v in fi)) / (1.0 + abs(float(fi[0])))
    print(f"wrote {path}")
    print(f"first integral: initial {fi[0]:.12g}, relative drift "
          f"{drift:.3e}")
    tol = args.tol if args.tol is not None else 1e-8
    if drift > tol:
        print(f"drift check FAILED: {drift:.3e} > {tol:g}")
        return EXIT_FAIL
    print(f"drift check passed: {drift:.3e} <= {tol:g}")
    return EXIT_OK


def cmd_cartan(args, cfg) -> int:
    p = params_from(cfg)
    system = build_system(p)
    try:
        L = build_lagrangian(p)
    except ModelError as exc:
        raise ConfigError(f"model: {exc}")
    inv = ermakov_invariant(p)
    gen = cartan_generator(inv.expr, L, system)
    print(gen.describe())
    b = model_bindings(p, _constants(cfg), extra_fns=inv.fn_bindings)
    tol = args.tol if args.tol is not None else 1e-9
    report = verify_dynamical(gen, inv.expr, system, L=L,
                              derivative_rules=inv.derivative_rules,
                              domain=DEFAULT_DOMAIN, bindings=b,
                              samples=args.samples, tol=tol, seed=args.seed)
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_lagrangian_check(args, cfg) -> int:
    p = params_from(cfg)
    b = model_bindings(p, _constants(cfg))
    tol = args.tol if args.tol is not None else 1e-9
    xy = {"x": (0.5, 2.0), "y": (0.5, 2.0)}
    ok = True

    compat = simplify(lagrangian_compatibility(p.f, p.g))
    passed, detail = _zero_or_small(compat, xy, b, args.samples, tol,
                                    args.seed)
    print(f"[{'pass' if passed else 'FAIL'}] coupling compatibility "
          f"y^2 f' + x^2 g' = 0 ({detail})")
    ok = ok and passed

    try:
        L = build_lagrangian(p)
    except ModelError as exc:
        raise ConfigError(f"model: {exc}")
    target = build_system(p)
    derived = euler_lagrange_system(L, constants=target.constants)
    for c in target.coords:
        diff = simplify(derived.rhs_of(c) - target.rhs_of(c))
        passed, detail = _zero_or_small(diff, DEFAULT_DOMAIN, b,
                                        args.samples, tol, args.seed)
        print(f"[{'pass' if passed else 'FAIL'}] Euler-Lagrange matches "
              f"{c}'' ({detail})")
        ok = ok and passed
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# Entry point


_HANDLERS = {
    "verify-symmetry": cmd_verify_symmetry,
    "determining": cmd_determining,
    "commutators": cmd_commutators,
    "simulate": cmd_simulate,
    "pinney": cmd_pinney,
    "cartan": cmd_cartan,
    "lagrangian-check": cmd_lagrangian_check,
}


def _positive(kind):
    def convert(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError("must be positive")
        return v
    return convert


def _seed(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _add_common(sp):
    sp.add_argument("--config", required=True, help="JSON config file")
    sp.add_argument("--out", help="output directory (default: current)")
    sp.add_argument("--seed", type=_seed, default=None,
                    help="sampling seed (default: run.seed or 1729)")
    sp.add_argument("--samples", type=_positive(int), default=None,
                    help="sample count (verification points or CSV rows)")
    sp.add_argument("--tol", type=_positive(float), default=None,
                    help="pass/fail tolerance (per-subcommand default)")
    sp.add_argument("--rtol", type=_positive(float), default=None,
                    help="integrator relative tolerance")
    sp.add_argument("--atol", type=_positive(float), default=None,
                    help="integrator absolute tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kesym",
        description="Symmetry verification and invariant-monitored runs "
                    "for planar Ermakov-type systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("verify-symmetry",
                        help="check configured generators against the model")
    _add_common(sp)
    sp.add_argument("--generator", help="check only this named generator")

    sp = sub.add_parser("determining",
                        help="emit the determining equations, one per line")
    _add_common(sp)

    sp = sub.add_parser("commutators",
                        help="pairwise bracket table and algebra label")
    _add_common(sp)

    sp = sub.add_parser("simulate",
                        help="integrate the model and monitor invariants")
    _add_common(sp)
    sp.add_argument("--polar", action="store_true",
                    help="also write the trajectory in polar coordinates")

    sp = sub.add_parser("pinney",
                        help="run the nonlinear-oscillator reduction")
    _add_common(sp)

    sp = sub.add_parser("cartan",
                        help="build and verify the velocity-space generator "
                             "paired to the angular invariant")
    _add_common(sp)

    sp = sub.add_parser("lagrangian-check",
                        help="coupling compatibility and Euler-Lagrange "
                             "consistency")
    _add_common(sp)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.samples is None:
        args.samples_given = False
        args.samples = DEFAULT_SAMPLES
    else:
        args.samples_given = True
    try:
        cfg = load_config(args.config)
        if args.seed is None:
            args.seed = _run_section(cfg).get("seed", DEFAULT_SEED)
        return _HANDLERS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UnboundSymbolError, UnboundFunctionError) as exc:
        print(f"config error: {exc} (declare constants in \"constants\", "
              f"give functions a closed-form body)", file=sys.stderr)
        return EXIT_USAGE
    except (AlgebraError, IntegrationError, EvalDomainError) as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ParseError, ExprError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
