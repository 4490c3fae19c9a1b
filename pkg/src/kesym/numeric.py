"""Numeric evaluation: bindings, tree-walk evaluation, tape compilation, and
sampling-based equivalence testing.

Two evaluation paths exist on purpose.  The tree walk raises precise errors
(unbound names, domain violations identified with the offending subtree) and
handles quadrature-backed opaque functions; the compiled tape path (see
kesym.backend) is the fast inner loop for sampling and integration and
requires every opaque call to inline to a closed form first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from . import backend
from ._ops import (MAX_POWI, MAX_STACK, OP_ADD, OP_CONST, OP_COS, OP_EXP,
                   OP_LOG, OP_MUL, OP_POW, OP_POWI, OP_SIN, OP_SQRT, OP_VAR)
from .expr import (Add, Call, Expr, ExprError, Fn, Mul, Num, Pow, Sym,
                   differentiate, substitute_function, to_str)

DEFAULT_SAMPLES = 200
DEFAULT_TOL = 1e-9
DEFAULT_SEED = 1729


class UnboundSymbolError(ExprError):
    pass


class UnboundFunctionError(ExprError):
    pass


class EvalDomainError(ExprError):
    """Raised when evaluation hits a pole, log/sqrt domain violation, or a
    non-finite result; carries the offending subtree."""

    def __init__(self, message: str, subtree: Optional[Expr] = None,
                 point: Optional[dict] = None):
        detail = message
        if subtree is not None:
            detail += f" in {to_str(subtree)}"
        if point:
            at = ", ".join(f"{k}={v:.6g}" for k, v in sorted(point.items()))
            detail += f" at {at}"
        super().__init__(detail)
        self.subtree = subtree
        self.point = point


@dataclass(frozen=True)
class FnBinding:
    """Closed-form or numeric realization of an opaque function.

    Either ``body`` is a closed-form Expression over ``params``, or
    ``numeric`` is a Python callable (order-0 evaluations only) with
    ``dbody`` supplying the closed form of the first derivative so that
    primed calls remain evaluable (unary functions only).
    """
    params: tuple
    body: Optional[Expr] = None
    numeric: Optional[Callable] = None
    dbody: Optional[Expr] = None

    def __post_init__(self):
        if self.body is None and self.numeric is None:
            raise ValueError("FnBinding needs a body or a numeric callable")

    @property
    def is_closed(self) -> bool:
        return self.body is not None


class Bindings:
    """Symbol values and opaque-function realizations for evaluation."""

    def __init__(self, syms: Optional[dict] = None, fns: Optional[dict] = None):
        self.syms: dict[str, float] = {}
        for k, v in (syms or {}).items():
            self.syms[k] = float(v)
        self.fns: dict[str, FnBinding] = {}
        for name, fb in (fns or {}).items():
            if isinstance(fb, FnBinding):
                self.fns[name] = fb
            else:  # (param, body) shorthand
                params, body = fb
                if isinstance(params, str):
                    params = (params,)
                self.fns[name] = FnBinding(tuple(params), body)
        self._deriv_cache: dict[tuple, Expr] = {}

    def with_syms(self, extra: dict) -> "Bindings":
        merged = dict(self.syms)
        merged.update({k: float(v) for k, v in extra.items()})
        b = Bindings(merged)
        b.fns = self.fns
        b._deriv_cache = self._deriv_cache
        return b

    def derived_body(self, name: str, orders: tuple) -> Expr:
        """Closed-form body of the ``orders``-derivative of a bound function."""
        key = (name, orders)
        hit = self._deriv_cache.get(key)
        if hit is not None:
            return hit
        fb = self.fns[name]
        if fb.body is not None:
            if orders == (0,) * len(orders):
                out = fb.body
            else:
                lower = None
                for i, k in enumerate(orders):
                    if k > 0:
                        lower = orders[:i] + (k - 1,) + orders[i + 1:]
                        out = differentiate(self.derived_body(name, lower),
                                            fb.params[i])
                        break
        elif fb.dbody is not None and len(orders) == 1 and orders[0] >= 1:
            out = fb.dbody
            for _ in range(orders[0] - 1):
                out = differentiate(out, fb.params[0])
        else:
            raise UnboundFunctionError(
                f"no closed form for derivative of {name!r}")
        self._deriv_cache[key] = out
        return out


def evaluate(e: Expr, b: Bindings) -> float:
    """Tree-walk evaluation.  Fails loudly: unbound names and domain errors
    raise; NaN/Inf are never returned."""
    v = _eval(e, b)
    if not math.isfinite(v):
        raise EvalDomainError("non-finite result", e, dict(b.syms))
    return v


def _eval(e: Expr, b: Bindings) -> float:
    if isinstance(e, Num):
        return float(e.value)
    if isinstance(e, Sym):
        try:
            return b.syms[e.name]
        except KeyError:
            raise UnboundSymbolError(f"unbound symbol {e.name!r}") from None
    if isinstance(e, Add):
        return math.fsum(_eval(a, b) for a in e.args)
    if isinstance(e, Mul):
        out = 1.0
        for a in e.args:
            out *= _eval(a, b)
        return out
    if isinstance(e, Pow):
        base = _eval(e.base, b)
        exp = _eval(e.exp, b)
        try:
            return math.pow(base, exp)
        except (ValueError, OverflowError):
            raise EvalDomainError(
                f"pow domain: base={base:.6g}, exp={exp:.6g}", e,
                dict(b.syms)) from None
    if isinstance(e, Call):
        v = _eval(e.arg, b)
        try:
            if e.fn == "sin":
                return math.sin(v)
            if e.fn == "cos":
                return math.cos(v)
            if e.fn == "exp":
                return math.exp(v)
            if e.fn == "log":
                return math.log(v)
            return math.sqrt(v)
        except (ValueError, OverflowError):
            raise EvalDomainError(
                f"{e.fn} domain: argument {v:.6g}", e, dict(b.syms)) from None
    if isinstance(e, Fn):
        fb = b.fns.get(e.name)
        if fb is None:
            raise UnboundFunctionError(f"unbound function {e.name!r}")
        args = [_eval(a, b) for a in e.fnargs]
        if fb.numeric is not None and all(k == 0 for k in e.orders):
            return float(fb.numeric(*args))
        body = b.derived_body(e.name, e.orders)
        inner = b.with_syms(dict(zip(fb.params, args)))
        return _eval(body, inner)
    raise TypeError(f"cannot evaluate {type(e)}")


def inline_functions(e: Expr, b: Optional[Bindings]) -> Expr:
    """Substitute every closed-form bound function; error on leftovers."""
    if b is not None:
        for name, fb in b.fns.items():
            if fb.is_closed:
                e = substitute_function(e, name, fb.params, fb.body)
    leftovers = _opaque_names(e)
    if leftovers:
        raise UnboundFunctionError(
            "no closed form for: " + ", ".join(sorted(leftovers)))
    return e


def _opaque_names(e: Expr) -> set:
    out = set()

    def walk(x):
        if isinstance(x, Fn):
            out.add(x.name)
            for a in x.fnargs:
                walk(a)
        elif isinstance(x, (Add, Mul)):
            for a in x.args:
                walk(a)
        elif isinstance(x, Pow):
            walk(x.base)
            walk(x.exp)
        elif isinstance(x, Call):
            walk(x.arg)

    walk(e)
    return out


@dataclass
class Tape:
    """Flat-instruction form of an expression over a fixed variable order."""
    codes: np.ndarray          # int32, (op, operand) pairs
    consts: np.ndarray         # float64 constant pool
    var_names: tuple
    depth: int = field(default=0)

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        return backend.eval_many(self.codes, self.consts, points)

    def eval_one(self, point) -> float:
        pts = np.asarray(point, dtype=np.float64).reshape(1, -1)
        return float(self.eval_many(pts)[0])


def compile_tape(e: Expr, var_names, bindings: Optional[Bindings] = None) -> Tape:
    """Compile to the backend instruction set.

    ``var_names`` fixes the point layout.  Opaque calls are inlined from
    ``bindings`` first; symbols not among the variables are baked in as
    constants from ``bindings.syms``.  Raises on anything unresolvable.
    """
    var_names = tuple(var_names)
    e = inline_functions(e, bindings)
    index = {n: i for i, n in enumerate(var_names)}
    codes: list[int] = []
    consts: list[float] = []
    pool: dict[float, int] = {}

    def emit_const(v: float):
        i = pool.get(v)
        if i is None:
            i = len(consts)
            consts.append(v)
            pool[v] = i
        codes.append(OP_CONST)
        codes.append(i)
        return 1

    def emit(x: Expr) -> int:
        """Emit code for x; return stack depth used."""
        if isinstance(x, Num):
            return emit_const(float(x.value))
        if isinstance(x, Sym):
            i = index.get(x.name)
            if i is None:
                if bindings is not None and x.name in bindings.syms:
                    return emit_const(bindings.syms[x.name])
                raise UnboundSymbolError(
                    f"symbol {x.name!r} is neither a variable nor bound")
            codes.append(OP_VAR)
            codes.append(i)
            return 1
        if isinstance(x, (Add, Mul)):
            op = OP_ADD if isinstance(x, Add) else OP_MUL
            depth = emit(x.args[0])
            for a in x.args[1:]:
                d = emit(a)
                depth = max(depth, 1 + d)
                codes.append(op)
                codes.append(0)
            return depth
        if isinstance(x, Pow):
            if isinstance(x.exp, Num) and x.exp.is_exact:
                v = x.exp.value
                if v.denominator == 1 and abs(v) <= MAX_POWI:
                    d = emit(x.base)
                    codes.append(OP_POWI)
                    codes.append(int(v))
                    return d
                if v == Fraction(1, 2):
                    d = emit(x.base)
                    codes.append(OP_SQRT)
                    codes.append(0)
                    return d
                if v == Fraction(-1, 2):
                    d = emit(x.base)
                    codes.append(OP_SQRT)
                    codes.append(0)
                    codes.append(OP_POWI)
                    codes.append(-1)
                    return d
            d1 = emit(x.base)
            d2 = emit(x.exp)
            codes.append(OP_POW)
            codes.append(0)
            return max(d1, 1 + d2)
        if isinstance(x, Call):
            d = emit(x.arg)
            codes.append({"sqrt": OP_SQRT, "sin": OP_SIN, "cos": OP_COS,
                          "exp": OP_EXP, "log": OP_LOG}[x.fn])
            codes.append(0)
            return d
        raise TypeError(f"cannot compile {type(x)}")

    depth = emit(e)
    if depth > MAX_STACK:
        raise ExprError(f"expression too deep to compile (depth {depth})")
    return Tape(np.asarray(codes, dtype=np.int32),
                np.asarray(consts, dtype=np.float64), var_names, depth)


def sample_points(domain: dict, samples: int, seed: int):
    """Deterministic uniform samples over a box; returns (names, array)."""
    names = tuple(sorted(domain))
    rng = np.random.default_rng(seed)
    pts = np.empty((samples, len(names)))
    for j, n in enumerate(names):
        lo, hi = domain[n]
        lo, hi = float(lo), float(hi)
        if not lo <= hi:
            raise ValueError(f"bad range for {n!r}: ({lo}, {hi})")
        pts[:, j] = rng.uniform(lo, hi, samples)
    return names, pts


def _values_on(e: Expr, names, pts, bindings: Optional[Bindings]):
    """Evaluate e at every sample row, via tape when possible."""
    try:
        tape = compile_tape(e, names, bindings)
    except UnboundFunctionError:
        # Quadrature-backed opaque functions: walk the tree per point.
        base = bindings if bindings is not None else Bindings()
        vals = np.empty(len(pts))
        for i, row in enumerate(pts):
            local = base.with_syms(dict(zip(names, row)))
            vals[i] = _eval(e, local)
        return vals
    return tape.eval_many(pts)


def equivalent(e1: Expr, e2: Expr, domain: dict,
               samples: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL,
               seed: int = DEFAULT_SEED,
               bindings: Optional[Bindings] = None) -> bool:
    """Numeric equivalence over a sample box.

    True iff |e1-e2| <= tol*(1+|e1|) at every sampled point.  Every free
    symbol must lie in ``domain`` or in ``bindings.syms``; opaque functions
    must be realized in ``bindings``.  Deterministic for a fixed seed.
    """
    names, pts = sample_points(domain, samples, seed)
    v1 = _values_on(e1, names, pts, bindings)
    v2 = _values_on(e2, names, pts, bindings)
    bad = ~(np.isfinite(v1) & np.isfinite(v2))
    if bad.any():
        i = int(np.argmax(bad))
        point = dict(zip(names, pts[i]))
        # Re-walk the tree at the failing point for a precise error.
        base = bindings if bindings is not None else Bindings()
        local = base.with_syms(point)
        culprit = e1 if not np.isfinite(v1[i]) else e2
        evaluate(culprit, local)  # raises with subtree detail
        raise EvalDomainError("non-finite sample", culprit, point)
    return bool(np.all(np.abs(v1 - v2) <= tol * (1.0 + np.abs(v1))))


def max_abs_on(e: Expr, domain: dict, samples: int = DEFAULT_SAMPLES,
               seed: int = DEFAULT_SEED,
               bindings: Optional[Bindings] = None) -> float:
    """Max |e| over the sample box (reported by verification paths)."""
    names, pts = sample_points(domain, samples, seed)
    vals = _values_on(e, names, pts, bindings)
    if not np.isfinite(vals).all():
        i = int(np.argmax(~np.isfinite(vals)))
        base = bindings if bindings is not None else Bindings()
        evaluate(e, base.with_syms(dict(zip(names, pts[i]))))
        raise EvalDomainError("non-finite sample", e,
                              dict(zip(names, pts[i])))
    return float(np.max(np.abs(vals)))
