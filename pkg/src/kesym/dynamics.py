"""Numeric trajectories for second-order systems, and invariant monitoring.

Right-hand sides compile to the backend tape VM and run through the
embedded Runge-Kutta 5(4) core with PI step control; singular denominators
are watched by guard expressions so near-collision runs fail loudly with
the last good time instead of silently producing NaNs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import backend
from ._ops import ST_MAX_STEPS, ST_OK, ST_SINGULAR, ST_STEP_UNDERFLOW
from .expr import Add, Call, Expr, Fn, HALF, Mul, Num, Pow, ONE
from .jet import SecondOrderSystem
from .numeric import (Bindings, UnboundFunctionError, compile_tape, evaluate)

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
DEFAULT_GUARD_BAND = 1e-8


class IntegrationError(RuntimeError):
    """Integration stopped before the last sample time."""

    def __init__(self, message, status, last_time, partial=None):
        super().__init__(message)
        self.status = status
        self.last_time = last_time
        self.partial = partial


class SingularityError(IntegrationError):
    """A guard expression fell inside the singular band."""


@dataclass
class Trajectory:
    """Sampled solution: ``states[i]`` is (q..., qdot...) at ``times[i]``."""
    times: np.ndarray
    states: np.ndarray
    coords: tuple
    velocities: tuple
    time: str = "t"
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        if name == self.time:
            return self.times
        if name in self.coords:
            return self.states[:, self.coords.index(name)]
        if name in self.velocities:
            return self.states[:, len(self.coords)
                               + self.velocities.index(name)]
        raise KeyError(name)

    def points(self) -> np.ndarray:
        """(t, q..., qdot...) rows — the tape variable layout."""
        return np.column_stack([self.times, self.states])


def _pack(exprs, var_names, bindings):
    codes, consts = [], []
    coff, koff = [0], [0]
    for e in exprs:
        tp = compile_tape(e, var_names, bindings)
        codes.append(np.asarray(tp.codes, dtype=np.int32))
        consts.append(np.asarray(tp.consts, dtype=np.float64))
        coff.append(coff[-1] + codes[-1].size)
        koff.append(koff[-1] + consts[-1].size)
    return (np.concatenate(codes) if codes else np.zeros(0, np.int32),
            np.asarray(coff, dtype=np.int32),
            np.concatenate(consts) if consts else np.zeros(0, np.float64),
            np.asarray(koff, dtype=np.int32))


def auto_guards(sys: SecondOrderSystem):
    """Denominator watch-list: every base raised to a negative power in any
    rhs.  Non-atomic bases are guarded through their square root so the
    band acts on the natural length scale."""
    found = []

    def note(g):
        if g not in found:
            found.append(g)

    def walk(e):
        if isinstance(e, Pow):
            if isinstance(e.exp, Num) and e.exp.value < 0:
                b = e.base
                note(Pow(b, HALF) if isinstance(b, (Add, Mul)) else b)
            walk(e.base)
            if not isinstance(e.exp, Num):
                walk(e.exp)
        elif isinstance(e, (Add, Mul)):
            for a in e.args:
                walk(a)
        elif isinstance(e, Call):
            walk(e.arg)
        elif isinstance(e, Fn):
            for a in e.fnargs:
                walk(a)

    for w in sys.rhs:
        walk(w)
    return found


def integrate(sys: SecondOrderSystem, y0, t0: float, t1: float,
              sample_ts=None, n_samples: int = 201,
              rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
              bindings: Optional[Bindings] = None, guards=None,
              guard_band: float = DEFAULT_GUARD_BAND,
              max_steps: int = 1_000_000) -> Trajectory:
    """Integrate from t0 to t1 (either direction) and sample.

    ``guards`` defaults to the automatic denominator watch-list; pass a
    sequence of expressions to override, or [] for none.  Raises
    SingularityError / IntegrationError with the last good time and the
    partial trajectory on failure.  Returned times always increase.
    """
    n = sys.dim
    dim = 2 * n
    y0 = np.asarray([float(v) for v in y0], dtype=np.float64)
    if y0.shape != (dim,):
        raise ValueError(f"initial state needs {dim} entries "
                         f"({n} coordinates + {n} velocities)")
    t0 = float(t0)
    t1 = float(t1)
    if t1 == t0:
        raise ValueError("empty integration span")
    direction = 1.0 if t1 > t0 else -1.0

    if sample_ts is None:
        sample_ts = np.linspace(t0, t1, int(n_samples))
    sample_ts = np.asarray(sample_ts, dtype=np.float64)
    if sample_ts.size == 0:
        raise ValueError("no sample times")
    d = np.diff(sample_ts)
    if sample_ts.size > 1 and not np.all(d * direction > 0):
        raise ValueError("sample times must be strictly monotone toward t1")
    lo = min(t0, t1) - 1e-12 * max(1.0, abs(t0), abs(t1))
    hi = max(t0, t1) + 1e-12 * max(1.0, abs(t0), abs(t1))
    if sample_ts.min() < lo or sample_ts.max() > hi:
        raise ValueError("sample times fall outside the integration span")

    var_names = (sys.time, *sys.coords, *sys.velocities)
    r_codes, r_coff, r_consts, r_koff = _pack(sys.rhs, var_names, bindings)
    guard_exprs = auto_guards(sys) if guards is None else list(guards)
    if not guard_exprs:
        guard_exprs = [ONE]
    g_codes, g_coff, g_consts, g_koff = _pack(guard_exprs, var_names,
                                              bindings)

    states, status, t_stop, nsteps, naccept, nreject, nfev = \
        backend.integrate_core(r_codes, r_coff, r_consts, r_koff, n,
                               g_codes, g_coff, g_consts, g_koff,
                               len(guard_exprs), y0, t0, t1, float(rtol),
                               float(atol), sample_ts, float(guard_band),
                               int(max_steps))
    states = np.asarray(states)
    meta = {"backend": backend.NAME, "rtol": rtol, "atol": atol,
            "guard_band": guard_band, "direction": direction,
            "nsteps": int(nsteps), "naccept": int(naccept),
            "nreject": int(nreject), "nfev": int(nfev),
            "t0": t0, "t1": t1}

    times = sample_ts
    if direction < 0:
        times = times[::-1].copy()
        states = states[::-1].copy()

    if status == ST_OK:
        return Trajectory(times, states, sys.coords, sys.velocities,
                          sys.time, meta)

    ok = np.isfinite(states).all(axis=1)
    partial = Trajectory(times[ok], states[ok], sys.coords, sys.velocities,
                         sys.time, meta)
    if status == ST_SINGULAR:
        raise SingularityError(
            f"guard tripped near t = {t_stop:.6g} "
            f"(band {guard_band:g})", status, t_stop, partial)
    reason = {ST_MAX_STEPS: "step budget exhausted",
              ST_STEP_UNDERFLOW: "step size underflow"}.get(status,
                                                            "unknown status")
    raise IntegrationError(f"{reason} near t = {t_stop:.6g}", status, t_stop,
                           partial)


# ---------------------------------------------------------------------------
# Evaluating expressions and invariants along trajectories


def evaluate_on(traj: Trajectory, expr: Expr,
                bindings: Optional[Bindings] = None) -> np.ndarray:
    """Values of ``expr`` at every trajectory sample.

    Tape-compiled when possible; numeric-backed opaque functions (e.g.
    quadrature antiderivatives) fall back to per-row tree evaluation.
    """
    names = (traj.time, *traj.coords, *traj.velocities)
    pts = traj.points()
    try:
        tape = compile_tape(expr, names, bindings)
    except UnboundFunctionError:
        b = bindings if bindings is not None else Bindings()
        out = np.empty(len(pts))
        for i, row in enumerate(pts):
            out[i] = evaluate(expr, b.with_syms(dict(zip(names, row))))
        return out
    return tape.eval_many(pts)


@dataclass
class DriftSeries:
    """One monitored invariant: drift = max |I - I0| / (1 + |I0|)."""
    name: str
    values: np.ndarray
    initial: float
    max_abs_delta: float
    drift: float


@dataclass
class DriftReport:
    series: list = field(default_factory=list)

    def __getitem__(self, name: str) -> DriftSeries:
        for s in self.series:
            if s.name == name:
                return s
        raise KeyError(name)

    def worst(self) -> DriftSeries:
        return max(self.series, key=lambda s: s.drift)

    def summary(self) -> str:
        return "\n".join(
            f"{s.name}: initial {s.initial:.12g}, max|delta| "
            f"{s.max_abs_delta:.3e}, drift {s.drift:.3e}"
            for s in self.series)


def monitor(traj: Trajectory, invariants: dict,
            bindings: Optional[Bindings] = None) -> DriftReport:
    """Evaluate each named invariant along the trajectory and report drift."""
    report = DriftReport()
    for name, expr in invariants.items():
        vals = evaluate_on(traj, expr, bindings)
        if not np.isfinite(vals).all():
            raise IntegrationError(
                f"invariant {name!r} is not finite along the trajectory",
                None, float(traj.times[-1]))
        i0 = float(vals[0])
        delta = float(np.abs(vals - i0).max())
        report.series.append(DriftSeries(name, vals, i0, delta,
                                         delta / (1.0 + abs(i0))))
    return report


# ---------------------------------------------------------------------------
# CSV output (17 significant digits, deterministic)


def _fmt(v: float) -> str:
    return "%.17g" % float(v)


def write_trajectory_csv(path, traj: Trajectory,
                         extra: Optional[dict] = None):
    """Columns: t, coordinates, velocities, then any extra named series."""
    extra = extra or {}
    names = [traj.time, *traj.coords, *traj.velocities, *extra]
    cols = [traj.times] + [traj.column(c) for c in traj.coords] \
        + [traj.column(v) for v in traj.velocities] \
        + [np.asarray(v) for v in extra.values()]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_drift_csv(path, traj: Trajectory, report: DriftReport):
    """Rows: t, invariant name, value, delta from the initial value."""
    with open(path, "w", newline="") as fh:
        fh.write("t,invariant,value,delta\n")
        for s in report.series:
            for t, v in zip(traj.times, s.values):
                fh.write(f"{_fmt(t)},{s.name},{_fmt(v)},"
                         f"{_fmt(v - s.initial)}\n")
