"""Pure-Python tape evaluation and integration backend.

Mirror of the compiled kernel (kesym._kernel).  eval_many is vectorized with
numpy over sample points; the integrator advances a single state with plain
scalar arithmetic so that both backends follow the identical operation
sequence (their trajectories agree to rounding).
"""
from __future__ import annotations

import math

import numpy as np

from ._ops import (OP_ADD, OP_CONST, OP_COS, OP_EXP, OP_LOG, OP_MUL, OP_POW,
                   OP_POWI, OP_SIN, OP_SQRT, OP_VAR, ST_MAX_STEPS, ST_OK,
                   ST_SINGULAR, ST_STEP_UNDERFLOW)

NAME = "python"


def eval_many(codes, consts, points):
    """Evaluate one tape at many points.  points: (n, nvars) float64.

    Domain violations produce NaN/Inf entries, never exceptions; the caller
    decides how to report them.
    """
    n = points.shape[0]
    stack = []
    with np.errstate(all="ignore"):
        i = 0
        m = len(codes)
        while i < m:
            op = codes[i]
            arg = codes[i + 1]
            i += 2
            if op == OP_CONST:
                stack.append(np.full(n, consts[arg]))
            elif op == OP_VAR:
                stack.append(points[:, arg])
            elif op == OP_ADD:
                b = stack.pop()
                stack[-1] = stack[-1] + b
            elif op == OP_MUL:
                b = stack.pop()
                stack[-1] = stack[-1] * b
            elif op == OP_POW:
                b = stack.pop()
                stack[-1] = np.power(stack[-1], b)
            elif op == OP_POWI:
                stack[-1] = _powi_vec(stack[-1], int(arg))
            elif op == OP_SQRT:
                stack[-1] = np.sqrt(stack[-1])
            elif op == OP_SIN:
                stack[-1] = np.sin(stack[-1])
            elif op == OP_COS:
                stack[-1] = np.cos(stack[-1])
            elif op == OP_EXP:
                stack[-1] = np.exp(stack[-1])
            elif op == OP_LOG:
                stack[-1] = np.log(stack[-1])
            else:
                raise ValueError(f"bad opcode {op}")
    out = stack[0]
    return out.copy() if out.base is not None else out


def _powi_vec(x, k):
    with np.errstate(all="ignore"):
        return np.power(x, float(k))


def eval_one(codes, consts, point):
    """Scalar tape evaluation; domain errors come back as NaN."""
    stack = [0.0] * 128
    sp = 0
    i = 0
    m = len(codes)
    while i < m:
        op = codes[i]
        arg = codes[i + 1]
        i += 2
        if op == OP_CONST:
            stack[sp] = consts[arg]
            sp += 1
        elif op == OP_VAR:
            stack[sp] = point[arg]
            sp += 1
        elif op == OP_ADD:
            sp -= 1
            stack[sp - 1] += stack[sp]
        elif op == OP_MUL:
            sp -= 1
            stack[sp - 1] *= stack[sp]
        elif op == OP_POW:
            sp -= 1
            stack[sp - 1] = _pow(stack[sp - 1], stack[sp])
        elif op == OP_POWI:
            stack[sp - 1] = _powi(stack[sp - 1], int(arg))
        elif op == OP_SQRT:
            v = stack[sp - 1]
            stack[sp - 1] = math.sqrt(v) if v >= 0.0 else math.nan
        elif op == OP_SIN:
            stack[sp - 1] = math.sin(stack[sp - 1])
        elif op == OP_COS:
            stack[sp - 1] = math.cos(stack[sp - 1])
        elif op == OP_EXP:
            stack[sp - 1] = _exp(stack[sp - 1])
        elif op == OP_LOG:
            v = stack[sp - 1]
            stack[sp - 1] = math.log(v) if v > 0.0 else math.nan
        else:
            raise ValueError(f"bad opcode {op}")
    return stack[0]


def _pow(b, e):
    try:
        return math.pow(b, e)
    except ValueError:
        return math.nan
    except OverflowError:
        if b < 0.0 and e == int(e) and int(e) % 2:
            return -math.inf
        return math.inf


def _powi(x, k):
    if k < 0:
        if x == 0.0:
            return math.nan
        x = 1.0 / x
        k = -k
    out = 1.0
    while k:
        if k & 1:
            out *= x
        x *= x
        k >>= 1
    return out


def _exp(v):
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


# --------------------------------------------------------------------------
# Dormand-Prince 5(4) with FSAL and PI step-size control.

_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = (9017 / 3168, -355 / 33, 46732 / 5247,
                                49 / 176, -5103 / 18656)
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920,
                                -17253 / 339200, 22 / 525, -1 / 40)

_SAFETY = 0.9
_MIN_SCALE = 0.2
_MAX_SCALE = 10.0
_ALPHA = 0.17            # PI controller: err^-alpha * errold^beta
_BETA = 0.04


def integrate_core(rhs_codes, rhs_coff, rhs_consts, rhs_koff, n_eq,
                   g_codes, g_coff, g_consts, g_koff, n_guards,
                   y0, t0, t1, rtol, atol, sample_ts, guard_band, max_steps):
    """Advance q'' = w(t,q,q') and record the state at each sample time.

    State layout: y = (q_1..q_n, qd_1..qd_n); tape variables (t, y...).
    Returns (states, status, t_stop, nsteps, naccept, nreject, nfev).
    """
    dim = 2 * n_eq
    if dim > 64:
        raise ValueError("at most 32 second-order equations supported")
    nsamp = len(sample_ts)
    out = np.full((nsamp, dim), np.nan)
    y = [float(v) for v in y0]
    t = float(t0)
    direction = 1.0 if t1 >= t0 else -1.0
    span = abs(t1 - t0)

    point = [0.0] * (dim + 1)
    stats = {"nfev": 0}

    def rhs(tt, yy, out_dy):
        point[0] = tt
        for j in range(dim):
            point[j + 1] = yy[j]
        for a in range(n_eq):
            out_dy[a] = yy[n_eq + a]
        for a in range(n_eq):
            codes = rhs_codes[rhs_coff[a]:rhs_coff[a + 1]]
            consts = rhs_consts[rhs_koff[a]:rhs_koff[a + 1]]
            out_dy[n_eq + a] = eval_one(codes, consts, point)
        stats["nfev"] += 1

    def guards_ok(tt, yy):
        point[0] = tt
        for j in range(dim):
            point[j + 1] = yy[j]
        for gi in range(n_guards):
            codes = g_codes[g_coff[gi]:g_coff[gi + 1]]
            consts = g_consts[g_koff[gi]:g_koff[gi + 1]]
            v = eval_one(codes, consts, point)
            if not math.isfinite(v) or abs(v) < guard_band:
                return False
        return True

    k1 = [0.0] * dim
    k2 = [0.0] * dim
    k3 = [0.0] * dim
    k4 = [0.0] * dim
    k5 = [0.0] * dim
    k6 = [0.0] * dim
    k7 = [0.0] * dim
    ytmp = [0.0] * dim
    y5 = [0.0] * dim

    nsteps = naccept = nreject = 0
    si = 0

    if not guards_ok(t, y):
        return out, ST_SINGULAR, t, nsteps, naccept, nreject, stats["nfev"]

    # Record samples that coincide with t0.
    while si < nsamp and abs(sample_ts[si] - t) <= 1e-14 * max(1.0, abs(t)):
        out[si] = y
        si += 1
    if si >= nsamp:
        return out, ST_OK, t, nsteps, naccept, nreject, stats["nfev"]

    rhs(t, y, k1)
    h = _initial_step(rhs, t, y, k1, dim, rtol, atol, span, direction)
    errold = 1e-4

    while si < nsamp:
        if nsteps >= max_steps:
            return out, ST_MAX_STEPS, t, nsteps, naccept, nreject, stats["nfev"]
        hmin = 1e-14 * max(1.0, abs(t))
        if abs(h) < hmin:
            return (out, ST_STEP_UNDERFLOW, t, nsteps, naccept, nreject,
                    stats["nfev"])
        target = sample_ts[si]
        h_natural = h
        hit_target = False
        if (t + h - target) * direction >= 0.0:
            h = target - t
            hit_target = True
        nsteps += 1

        for j in range(dim):
            ytmp[j] = y[j] + h * _A21 * k1[j]
        rhs(t + _C2 * h, ytmp, k2)
        for j in range(dim):
            ytmp[j] = y[j] + h * (_A31 * k1[j] + _A32 * k2[j])
        rhs(t + _C3 * h, ytmp, k3)
        for j in range(dim):
            ytmp[j] = y[j] + h * (_A41 * k1[j] + _A42 * k2[j] + _A43 * k3[j])
        rhs(t + _C4 * h, ytmp, k4)
        for j in range(dim):
            ytmp[j] = y[j] + h * (_A51 * k1[j] + _A52 * k2[j] + _A53 * k3[j]
                                  + _A54 * k4[j])
        rhs(t + _C5 * h, ytmp, k5)
        for j in range(dim):
            ytmp[j] = y[j] + h * (_A61 * k1[j] + _A62 * k2[j] + _A63 * k3[j]
                                  + _A64 * k4[j] + _A65 * k5[j])
        rhs(t + h, ytmp, k6)
        for j in range(dim):
            y5[j] = y[j] + h * (_B1 * k1[j] + _B3 * k3[j] + _B4 * k4[j]
                                + _B5 * k5[j] + _B6 * k6[j])
        rhs(t + h, y5, k7)

        err = 0.0
        bad = False
        for j in range(dim):
            ej = h * (_E1 * k1[j] + _E3 * k3[j] + _E4 * k4[j] + _E5 * k5[j]
                      + _E6 * k6[j] + _E7 * k7[j])
            sc = atol + rtol * max(abs(y[j]), abs(y5[j]))
            if not (math.isfinite(ej) and math.isfinite(y5[j])):
                bad = True
                break
            err += (ej / sc) ** 2
        err = math.sqrt(err / dim) if not bad else math.inf

        if err <= 1.0:
            naccept += 1
            t = target if hit_target else t + h
            y, y5 = y5, y
            k1, k7 = k7, k1
            if not guards_ok(t, y):
                return (out, ST_SINGULAR, t, nsteps, naccept, nreject,
                        stats["nfev"])
            if hit_target:
                out[si] = y
                si += 1
            if hit_target:
                # The clip shortened this step artificially; resume with the
                # step the controller had chosen before the clip.
                h = h_natural
            else:
                if err == 0.0:
                    scale = _MAX_SCALE
                else:
                    scale = _SAFETY * err ** (-_ALPHA) * errold ** _BETA
                    scale = min(_MAX_SCALE, max(_MIN_SCALE, scale))
                errold = max(err, 1e-4)
                h *= scale
        else:
            nreject += 1
            if bad:
                h *= 0.1
            else:
                scale = max(_MIN_SCALE,
                            _SAFETY * err ** (-0.2))
                h *= min(1.0, scale)

    return out, ST_OK, t, nsteps, naccept, nreject, stats["nfev"]


def _initial_step(rhs, t0, y0, f0, dim, rtol, atol, span, direction):
    d0 = d1 = 0.0
    for j in range(dim):
        sc = atol + rtol * abs(y0[j])
        d0 += (y0[j] / sc) ** 2
        d1 += (f0[j] / sc) ** 2
    d0 = math.sqrt(d0 / dim)
    d1 = math.sqrt(d1 / dim)
    if not (math.isfinite(d0) and math.isfinite(d1)):
        return direction * min(1e-6, span)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)

    y1 = [y0[j] + direction * h0 * f0[j] for j in range(dim)]
    f1 = [0.0] * dim
    rhs(t0 + direction * h0, y1, f1)
    d2 = 0.0
    for j in range(dim):
        sc = atol + rtol * abs(y0[j])
        d2 += ((f1[j] - f0[j]) / sc) ** 2
    d2 = math.sqrt(d2 / dim) / h0
    if not math.isfinite(d2):
        return direction * min(1e-6, span)

    dm = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
    return direction * min(100.0 * h0, h1, span)
