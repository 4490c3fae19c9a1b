# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tape evaluation and integration kernel.

Direct translation of kesym._purevm (the reference implementation); both
backends execute the identical operation sequence so trajectories agree to
float64 rounding.  Opcodes and status values are read from kesym._ops at
import time, so the two backends cannot drift apart.
"""
from libc.math cimport (INFINITY, NAN, fabs, isfinite, pow as cpow, sqrt,
                        sin, cos, exp, log)
from libc.stdint cimport int32_t

import numpy as np

from . import _ops

NAME = "compiled"

cdef int OP_CONST = _ops.OP_CONST
cdef int OP_VAR = _ops.OP_VAR
cdef int OP_ADD = _ops.OP_ADD
cdef int OP_MUL = _ops.OP_MUL
cdef int OP_POW = _ops.OP_POW
cdef int OP_POWI = _ops.OP_POWI
cdef int OP_SQRT = _ops.OP_SQRT
cdef int OP_SIN = _ops.OP_SIN
cdef int OP_COS = _ops.OP_COS
cdef int OP_EXP = _ops.OP_EXP
cdef int OP_LOG = _ops.OP_LOG
cdef int ST_OK = _ops.ST_OK
cdef int ST_SINGULAR = _ops.ST_SINGULAR
cdef int ST_MAX_STEPS = _ops.ST_MAX_STEPS
cdef int ST_STEP_UNDERFLOW = _ops.ST_STEP_UNDERFLOW

cdef int _LAST_OP = _ops.OP_LOG


def _check_codes(codes):
    c = np.asarray(codes)
    if c.size % 2:
        raise ValueError("truncated tape")
    ops = c[0::2]
    if ops.size:
        bad = ops[(ops < 0) | (ops > _LAST_OP)]
        if bad.size:
            raise ValueError(f"bad opcode {int(bad[0])}")


cdef inline double _pow_strict(double b, double e) nogil:
    # math.pow semantics from the reference backend: 0**negative is a
    # domain error (NaN), not the libm infinity.
    if b == 0.0 and e < 0.0:
        return NAN
    return cpow(b, e)


cdef inline double _powi_strict(double x, int k) nogil:
    cdef double out = 1.0
    if k < 0:
        if x == 0.0:
            return NAN
        x = 1.0 / x
        k = -k
    while k:
        if k & 1:
            out *= x
        x *= x
        k >>= 1
    return out


cdef double _tape_strict(const int32_t* codes, Py_ssize_t m,
                         const double* consts, const double* point) nogil:
    """eval_one semantics: binary exponentiation for POWI, NaN at domain
    violations of sqrt/log and 0**negative."""
    cdef double stack[128]
    cdef int sp = 0
    cdef Py_ssize_t i = 0
    cdef int op, arg
    cdef double v
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
            stack[sp - 1] = _pow_strict(stack[sp - 1], stack[sp])
        elif op == OP_POWI:
            stack[sp - 1] = _powi_strict(stack[sp - 1], arg)
        elif op == OP_SQRT:
            v = stack[sp - 1]
            stack[sp - 1] = sqrt(v) if v >= 0.0 else NAN
        elif op == OP_SIN:
            stack[sp - 1] = sin(stack[sp - 1])
        elif op == OP_COS:
            stack[sp - 1] = cos(stack[sp - 1])
        elif op == OP_EXP:
            stack[sp - 1] = exp(stack[sp - 1])
        else:
            v = stack[sp - 1]
            stack[sp - 1] = log(v) if v > 0.0 else NAN
    return stack[0]


cdef double _tape_raw(const int32_t* codes, Py_ssize_t m,
                      const double* consts, const double* point) nogil:
    """eval_many semantics: elementwise libm behavior throughout (mirrors
    the vectorized numpy path of the reference backend)."""
    cdef double stack[128]
    cdef int sp = 0
    cdef Py_ssize_t i = 0
    cdef int op, arg
    cdef double v
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
            stack[sp - 1] = cpow(stack[sp - 1], stack[sp])
        elif op == OP_POWI:
            stack[sp - 1] = cpow(stack[sp - 1], <double>arg)
        elif op == OP_SQRT:
            v = stack[sp - 1]
            stack[sp - 1] = sqrt(v) if v >= 0.0 else NAN
        elif op == OP_SIN:
            stack[sp - 1] = sin(stack[sp - 1])
        elif op == OP_COS:
            stack[sp - 1] = cos(stack[sp - 1])
        elif op == OP_EXP:
            stack[sp - 1] = exp(stack[sp - 1])
        else:
            v = stack[sp - 1]
            if v > 0.0:
                stack[sp - 1] = log(v)
            elif v == 0.0:
                stack[sp - 1] = -INFINITY
            else:
                stack[sp - 1] = NAN
    return stack[0]


def eval_many(codes, consts, points):
    """Evaluate one tape at many points.  points: (n, nvars) float64."""
    _check_codes(np.asarray(codes))
    cdef const int32_t[::1] c = np.ascontiguousarray(codes, dtype=np.int32)
    cdef const double[::1] k = np.ascontiguousarray(consts, dtype=np.float64)
    cdef const double[:, ::1] pts = np.ascontiguousarray(points,
                                                         dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t m = c.shape[0]
    if m == 0:
        raise ValueError("empty tape")
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef const double* kp = &k[0] if k.shape[0] else NULL
    cdef Py_ssize_t p
    if n == 0:
        return out_arr
    with nogil:
        for p in range(n):
            out[p] = _tape_raw(&c[0], m, kp, &pts[p, 0])
    return out_arr


def eval_one(codes, consts, point):
    """Scalar tape evaluation; domain errors come back as NaN."""
    _check_codes(np.asarray(codes))
    cdef const int32_t[::1] c = np.ascontiguousarray(codes, dtype=np.int32)
    cdef const double[::1] k = np.ascontiguousarray(consts, dtype=np.float64)
    cdef const double[::1] pt = np.ascontiguousarray(point, dtype=np.float64)
    if c.shape[0] == 0:
        raise ValueError("empty tape")
    cdef const double* kp = &k[0] if k.shape[0] else NULL
    cdef const double* pp = &pt[0] if pt.shape[0] else NULL
    return _tape_strict(&c[0], c.shape[0], kp, pp)


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) with FSAL and PI step-size control (reference: _purevm).

cdef double _C2 = 1.0 / 5.0
cdef double _C3 = 3.0 / 10.0
cdef double _C4 = 4.0 / 5.0
cdef double _C5 = 8.0 / 9.0
cdef double _A21 = 1.0 / 5.0
cdef double _A31 = 3.0 / 40.0
cdef double _A32 = 9.0 / 40.0
cdef double _A41 = 44.0 / 45.0
cdef double _A42 = -56.0 / 15.0
cdef double _A43 = 32.0 / 9.0
cdef double _A51 = 19372.0 / 6561.0
cdef double _A52 = -25360.0 / 2187.0
cdef double _A53 = 64448.0 / 6561.0
cdef double _A54 = -212.0 / 729.0
cdef double _A61 = 9017.0 / 3168.0
cdef double _A62 = -355.0 / 33.0
cdef double _A63 = 46732.0 / 5247.0
cdef double _A64 = 49.0 / 176.0
cdef double _A65 = -5103.0 / 18656.0
cdef double _B1 = 35.0 / 384.0
cdef double _B3 = 500.0 / 1113.0
cdef double _B4 = 125.0 / 192.0
cdef double _B5 = -2187.0 / 6784.0
cdef double _B6 = 11.0 / 84.0
cdef double _E1 = 71.0 / 57600.0
cdef double _E3 = -71.0 / 16695.0
cdef double _E4 = 71.0 / 1920.0
cdef double _E5 = -17253.0 / 339200.0
cdef double _E6 = 22.0 / 525.0
cdef double _E7 = -1.0 / 40.0

cdef double _SAFETY = 0.9
cdef double _MIN_SCALE = 0.2
cdef double _MAX_SCALE = 10.0
cdef double _ALPHA = 0.17
cdef double _BETA = 0.04


cdef struct TapeSet:
    int32_t* codes
    int32_t* coff
    double* consts
    int32_t* koff
    int n


cdef void _rhs_eval(TapeSet* ts, int n_eq, double t, const double* y,
                    double* dy, double* point, long* nfev) nogil:
    cdef int dim = 2 * n_eq
    cdef int j, a
    point[0] = t
    for j in range(dim):
        point[j + 1] = y[j]
    for a in range(n_eq):
        dy[a] = y[n_eq + a]
    for a in range(n_eq):
        dy[n_eq + a] = _tape_strict(ts.codes + ts.coff[a],
                                    ts.coff[a + 1] - ts.coff[a],
                                    ts.consts + ts.koff[a], point)
    nfev[0] += 1


cdef bint _guards_ok(TapeSet* gs, int dim, double t, const double* y,
                     double guard_band, double* point) nogil:
    cdef int j, gi
    cdef double v
    point[0] = t
    for j in range(dim):
        point[j + 1] = y[j]
    for gi in range(gs.n):
        v = _tape_strict(gs.codes + gs.coff[gi],
                         gs.coff[gi + 1] - gs.coff[gi],
                         gs.consts + gs.koff[gi], point)
        if not isfinite(v) or fabs(v) < guard_band:
            return False
    return True


cdef double _initial_step_c(TapeSet* ts, int n_eq, double t0,
                            const double* y0, const double* f0, int dim,
                            double rtol, double atol, double span,
                            double direction, double* y1, double* f1,
                            double* point, long* nfev) nogil:
    cdef double d0 = 0.0
    cdef double d1 = 0.0
    cdef double d2 = 0.0
    cdef double sc, h0, h1, dm, m
    cdef int j
    for j in range(dim):
        sc = atol + rtol * fabs(y0[j])
        d0 += (y0[j] / sc) ** 2
        d1 += (f0[j] / sc) ** 2
    d0 = sqrt(d0 / dim)
    d1 = sqrt(d1 / dim)
    if not (isfinite(d0) and isfinite(d1)):
        return direction * (1e-6 if 1e-6 < span else span)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    if span < h0:
        h0 = span

    for j in range(dim):
        y1[j] = y0[j] + direction * h0 * f0[j]
    _rhs_eval(ts, n_eq, t0 + direction * h0, y1, f1, point, nfev)
    for j in range(dim):
        sc = atol + rtol * fabs(y0[j])
        d2 += ((f1[j] - f0[j]) / sc) ** 2
    d2 = sqrt(d2 / dim) / h0
    if not isfinite(d2):
        return direction * (1e-6 if 1e-6 < span else span)

    dm = d1 if d1 > d2 else d2
    if dm <= 1e-15:
        h1 = h0 * 1e-3
        if h1 < 1e-6:
            h1 = 1e-6
    else:
        h1 = cpow(0.01 / dm, 0.2)
    m = 100.0 * h0
    if h1 < m:
        m = h1
    if span < m:
        m = span
    return direction * m


def integrate_core(rhs_codes, rhs_coff, rhs_consts, rhs_koff, n_eq,
                   g_codes, g_coff, g_consts, g_koff, n_guards,
                   y0, t0, t1, rtol, atol, sample_ts, guard_band, max_steps):
    """Advance q'' = w(t,q,q') and record the state at each sample time.

    State layout: y = (q_1..q_n, qd_1..qd_n); tape variables (t, y...).
    Returns (states, status, t_stop, nsteps, naccept, nreject, nfev).
    """
    _check_codes(np.asarray(rhs_codes))
    _check_codes(np.asarray(g_codes))
    cdef int neq = int(n_eq)
    cdef int dim = 2 * neq
    if dim > 64:
        raise ValueError("at most 32 second-order equations supported")

    cdef const int32_t[::1] rc = np.ascontiguousarray(rhs_codes, np.int32)
    cdef const int32_t[::1] rco = np.ascontiguousarray(rhs_coff, np.int32)
    cdef const double[::1] rk = np.ascontiguousarray(rhs_consts, np.float64)
    cdef const int32_t[::1] rko = np.ascontiguousarray(rhs_koff, np.int32)
    cdef const int32_t[::1] gc = np.ascontiguousarray(g_codes, np.int32)
    cdef const int32_t[::1] gco = np.ascontiguousarray(g_coff, np.int32)
    cdef const double[::1] gk = np.ascontiguousarray(g_consts, np.float64)
    cdef const int32_t[::1] gko = np.ascontiguousarray(g_koff, np.int32)
    cdef const double[::1] y0v = np.ascontiguousarray(y0, np.float64)
    cdef const double[::1] ts_v = np.ascontiguousarray(sample_ts, np.float64)

    cdef TapeSet rts
    rts.codes = <int32_t*> &rc[0] if rc.shape[0] else NULL
    rts.coff = <int32_t*> &rco[0]
    rts.consts = <double*> &rk[0] if rk.shape[0] else NULL
    rts.koff = <int32_t*> &rko[0]
    rts.n = neq
    cdef TapeSet gts
    gts.codes = <int32_t*> &gc[0] if gc.shape[0] else NULL
    gts.coff = <int32_t*> &gco[0] if gco.shape[0] else NULL
    gts.consts = <double*> &gk[0] if gk.shape[0] else NULL
    gts.koff = <int32_t*> &gko[0] if gko.shape[0] else NULL
    gts.n = int(n_guards)

    cdef Py_ssize_t nsamp = ts_v.shape[0]
    out_arr = np.full((nsamp, dim), np.nan)
    cdef double[:, ::1] out = out_arr

    cdef double buf_y[64]
    cdef double buf_y5[64]
    cdef double buf_k1[64]
    cdef double buf_k2[64]
    cdef double buf_k3[64]
    cdef double buf_k4[64]
    cdef double buf_k5[64]
    cdef double buf_k6[64]
    cdef double buf_k7[64]
    cdef double ytmp[64]
    cdef double point[65]
    cdef double* y = buf_y
    cdef double* y5 = buf_y5
    cdef double* k1 = buf_k1
    cdef double* k7 = buf_k7
    cdef double* k2 = buf_k2
    cdef double* k3 = buf_k3
    cdef double* k4 = buf_k4
    cdef double* k5 = buf_k5
    cdef double* k6 = buf_k6
    cdef double* swp

    cdef double t = float(t0)
    cdef double tend = float(t1)
    cdef double rtol_c = float(rtol)
    cdef double atol_c = float(atol)
    cdef double band = float(guard_band)
    cdef long max_steps_c = int(max_steps)
    cdef double direction = 1.0 if tend >= t else -1.0
    cdef double span = fabs(tend - t)

    cdef int j
    for j in range(dim):
        y[j] = y0v[j]

    cdef long nsteps = 0
    cdef long naccept = 0
    cdef long nreject = 0
    cdef long nfev = 0
    cdef Py_ssize_t si = 0
    cdef int status = ST_OK
    cdef bint done = False

    cdef double h, h_natural, hmin, target, err, errold, ej, sc, scale, absmax
    cdef bint hit_target, bad

    with nogil:
        if not _guards_ok(&gts, dim, t, y, band, point):
            status = ST_SINGULAR
            done = True

        if not done:
            while si < nsamp and fabs(ts_v[si] - t) <= 1e-14 * (
                    1.0 if fabs(t) < 1.0 else fabs(t)):
                for j in range(dim):
                    out[si, j] = y[j]
                si += 1
            if si >= nsamp:
                done = True

        if not done:
            _rhs_eval(&rts, neq, t, y, k1, point, &nfev)
            h = _initial_step_c(&rts, neq, t, y, k1, dim, rtol_c, atol_c,
                                span, direction, ytmp, k2, point, &nfev)
            errold = 1e-4

            while si < nsamp:
                if nsteps >= max_steps_c:
                    status = ST_MAX_STEPS
                    break
                hmin = 1e-14 * (1.0 if fabs(t) < 1.0 else fabs(t))
                if fabs(h) < hmin:
                    status = ST_STEP_UNDERFLOW
                    break
                target = ts_v[si]
                h_natural = h
                hit_target = False
                if (t + h - target) * direction >= 0.0:
                    h = target - t
                    hit_target = True
                nsteps += 1

                for j in range(dim):
                    ytmp[j] = y[j] + h * _A21 * k1[j]
                _rhs_eval(&rts, neq, t + _C2 * h, ytmp, k2, point, &nfev)
                for j in range(dim):
                    ytmp[j] = y[j] + h * (_A31 * k1[j] + _A32 * k2[j])
                _rhs_eval(&rts, neq, t + _C3 * h, ytmp, k3, point, &nfev)
                for j in range(dim):
                    ytmp[j] = y[j] + h * (_A41 * k1[j] + _A42 * k2[j]
                                          + _A43 * k3[j])
                _rhs_eval(&rts, neq, t + _C4 * h, ytmp, k4, point, &nfev)
                for j in range(dim):
                    ytmp[j] = y[j] + h * (_A51 * k1[j] + _A52 * k2[j]
                                          + _A53 * k3[j] + _A54 * k4[j])
                _rhs_eval(&rts, neq, t + _C5 * h, ytmp, k5, point, &nfev)
                for j in range(dim):
                    ytmp[j] = y[j] + h * (_A61 * k1[j] + _A62 * k2[j]
                                          + _A63 * k3[j] + _A64 * k4[j]
                                          + _A65 * k5[j])
                _rhs_eval(&rts, neq, t + h, ytmp, k6, point, &nfev)
                for j in range(dim):
                    y5[j] = y[j] + h * (_B1 * k1[j] + _B3 * k3[j]
                                        + _B4 * k4[j] + _B5 * k5[j]
                                        + _B6 * k6[j])
                _rhs_eval(&rts, neq, t + h, y5, k7, point, &nfev)

                err = 0.0
                bad = False
                for j in range(dim):
                    ej = h * (_E1 * k1[j] + _E3 * k3[j] + _E4 * k4[j]
                              + _E5 * k5[j] + _E6 * k6[j] + _E7 * k7[j])
                    absmax = fabs(y[j])
                    if fabs(y5[j]) > absmax:
                        absmax = fabs(y5[j])
                    sc = atol_c + rtol_c * absmax
                    if not (isfinite(ej) and isfinite(y5[j])):
                        bad = True
                        break
                    err += (ej / sc) ** 2
                err = INFINITY if bad else sqrt(err / dim)

                if err <= 1.0:
                    naccept += 1
                    t = target if hit_target else t + h
                    swp = y
                    y = y5
                    y5 = swp
                    swp = k1
                    k1 = k7
                    k7 = swp
                    if not _guards_ok(&gts, dim, t, y, band, point):
                        status = ST_SINGULAR
                        break
                    if hit_target:
                        for j in range(dim):
                            out[si, j] = y[j]
                        si += 1
                        h = h_natural
                    else:
                        if err == 0.0:
                            scale = _MAX_SCALE
                        else:
                            scale = _SAFETY * cpow(err, -_ALPHA) \
                                * cpow(errold, _BETA)
                            if scale > _MAX_SCALE:
                                scale = _MAX_SCALE
                            elif scale < _MIN_SCALE:
                                scale = _MIN_SCALE
                        errold = err if err > 1e-4 else 1e-4
                        h *= scale
                else:
                    nreject += 1
                    if bad:
                        h *= 0.1
                    else:
                        scale = _SAFETY * cpow(err, -0.2)
                        if scale < _MIN_SCALE:
                            scale = _MIN_SCALE
                        if scale > 1.0:
                            scale = 1.0
                        h *= scale

    return out_arr, status, t, nsteps, naccept, nreject, nfev
