"""Backend micro-benchmarks: tape evaluation throughput and a full
adaptive integration run, timed for every importable backend.

Run with ``python -m kesym.bench`` (options: --points N --repeats R).
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from . import backend
from .dynamics import _pack, auto_guards
from .models import bindings as model_bindings
from .models import (UnaryFunc, build_system, ermakov_invariant,
                     standard_params)
from .numeric import compile_tape


def _standard_setup():
    p = standard_params(C=0.5, C0=0.2, f=UnaryFunc("f", "u", 1),
                        g=UnaryFunc("g", "u", 1))
    system = build_system(p)
    inv = ermakov_invariant(p)
    b = model_bindings(p, extra_fns=inv.fn_bindings)
    return p, system, inv, b


def bench_eval(impl, system, b, points, repeats):
    var_names = (system.time, *system.coords, *system.velocities)
    tape = compile_tape(system.rhs_of("x"), var_names, b)
    codes = np.asarray(tape.codes, dtype=np.int32)
    consts = np.asarray(tape.consts, dtype=np.float64)
    impl.eval_many(codes, consts, points[:16])  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = impl.eval_many(codes, consts, points)
        best = min(best, time.perf_counter() - t0)
    if not np.isfinite(out).all():
        raise RuntimeError("benchmark tape produced non-finite values")
    return best


def bench_integrate(impl, system, b, repeats):
    var_names = (system.time, *system.coords, *system.velocities)
    r = _pack(system.rhs, var_names, b)
    guards = auto_guards(system)
    g = _pack(guards, var_names, b)
    y0 = np.array([1.0, 1.0, 0.0, 0.5])
    sample_ts = np.linspace(0.0, 20.0, 201)
    args = (*r, system.dim, *g, len(guards), y0, 0.0, 20.0, 1e-10, 1e-12,
            sample_ts, 1e-8, 1_000_000)
    best = float("inf")
    nfev = 0
    for _ in range(repeats):
        t0 = time.perf_counter()
        states, status, t_stop, nsteps, naccept, nreject, nfev = \
            impl.integrate_core(*args)
        best = min(best, time.perf_counter() - t0)
        if status != 0:
            raise RuntimeError(f"benchmark integration failed ({status})")
    return best, int(nfev)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="python -m kesym.bench",
        description="Compare tape-VM backends on evaluation and "
                    "integration workloads.")
    ap.add_argument("--points", type=int, default=200_000,
                    help="evaluation points (default 200000)")
    ap.add_argument("--repeats", type=int, default=3,
                    help="repeats per measurement, best kept (default 3)")
    args = ap.parse_args(argv)

    _, system, _, b = _standard_setup()
    rng = np.random.default_rng(1729)
    nvar = 1 + 2 * system.dim
    points = rng.uniform(0.5, 1.5, size=(args.points, nvar))

    names = backend.available_backends()
    print(f"backends: {', '.join(names)} (active: {backend.NAME})")
    print(f"eval workload: rhs tape at {args.points} points; "
          f"integrate workload: t in [0, 20], rtol 1e-10")
    rows = []
    for name in names:
        impl = backend.get_impl(name)
        t_eval = bench_eval(impl, system, b, points, args.repeats)
        t_int, nfev = bench_integrate(impl, system, b, args.repeats)
        rows.append((name, t_eval, args.points / t_eval, t_int, nfev))

    print(f"{'backend':<10} {'eval [s]':>10} {'evals/s':>12} "
          f"{'integrate [s]':>14} {'rhs evals':>10}")
    for name, t_eval, rate, t_int, nfev in rows:
        print(f"{name:<10} {t_eval:>10.4f} {rate:>12.0f} {t_int:>14.4f} "
              f"{nfev:>10d}")
    if len(rows) == 2:
        print(f"speedup (eval): {rows[1][1] / rows[0][1]:.1f}x, "
              f"(integrate): {rows[1][3] / rows[0][3]:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
