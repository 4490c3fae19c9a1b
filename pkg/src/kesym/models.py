"""Builders for the planar Ermakov-type family.

The family couples a time-dependent harmonic term, an inverse-cubic radial
interaction H(x,y)/r^3, and angular shape functions:

    xddot + w(t)^2 x = -(x/r^3) H + f(y/x)/x^3,
    yddot + w(t)^2 y = -(y/r^3) H + g(y/x)/y^3,     r = sqrt(x^2 + y^2).

By convention H = -h(x/y)/y^e + (C/5) r^3; the shape h takes v = x/y while
f and g take u = y/x.  This module builds the system, its Lagrangian and
polar form when they exist, the angular first integral, and the residuals
deciding when each construction applies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .expr import (Add, Call, Expr, ExprError, Fn, HALF, MINUS_ONE, Mul, Num,
                   ONE, Pow, Sym, ZERO, differentiate, free_symbols, parse,
                   substitute)
from .jet import SecondOrderSystem, _as_expr, _invert_rational
from .numeric import Bindings, FnBinding, evaluate
from .simplify import (NonElementaryAntiderivative, NonPolynomialError,
                       antiderivative_power, is_zero_structural, simplify)

DEFAULT_DOMAIN = {
    "t": (0.1, 2.1),
    "x": (0.5, 2.0),
    "y": (0.5, 2.0),
    "xdot": (-1.0, 1.0),
    "ydot": (-1.0, 1.0),
}

POLAR_DOMAIN = {
    "t": (0.1, 2.1),
    "r": (0.7, 2.0),
    "theta": (0.2, 1.2),
    "rdot": (-1.0, 1.0),
    "thetadot": (-1.0, 1.0),
}


class ModelError(ExprError):
    def __init__(self, message, residual: Optional[Expr] = None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class UnaryFunc:
    """One scalar shape function.

    ``body`` (closed form in ``param``) makes it inlinable; ``numeric`` (a
    float callable) makes it evaluable without one, with ``dbody`` giving
    the closed form of the first derivative so primed calls still work.
    With none of these it stays a purely symbolic unknown.
    """
    name: str
    param: str = "u"
    body: Optional[Expr] = None
    numeric: Optional[Callable] = None
    dbody: Optional[Expr] = None

    def __post_init__(self):
        for attr in ("body", "dbody"):
            v = getattr(self, attr)
            if isinstance(v, str):
                object.__setattr__(self, attr, parse(v))
            elif isinstance(v, (int, float, Fraction)):
                object.__setattr__(self, attr, Num(v))

    def call(self, arg: Expr) -> Expr:
        """Opaque call node."""
        return Fn(self.name, (0,), (arg,))

    def inline(self, arg: Expr) -> Expr:
        if self.body is None:
            raise ModelError(f"{self.name} has no closed form")
        return simplify(substitute(self.body, {self.param: arg}))

    def best_call(self, arg: Expr) -> Expr:
        return self.inline(arg) if self.body is not None else self.call(arg)

    def deriv(self, arg: Expr) -> Expr:
        """First derivative evaluated at ``arg``, closed form when known."""
        if self.body is not None:
            d = differentiate(self.body, self.param)
            return simplify(substitute(d, {self.param: arg}))
        if self.dbody is not None:
            return simplify(substitute(self.dbody, {self.param: arg}))
        return Fn(self.name, (1,), (arg,))

    def binding(self) -> Optional[FnBinding]:
        if self.body is None and self.numeric is None:
            return None
        return FnBinding((self.param,), body=self.body, numeric=self.numeric,
                         dbody=self.dbody)


def curl_free_shape(strength, name: str = "h") -> UnaryFunc:
    """The unique coupling shape (up to scale) whose force field admits a
    potential: h(v) = strength / (1 + v^2)."""
    v = Sym("v")
    body = Mul(_as_expr(strength), Pow(Add(ONE, Pow(v, Num(2))), MINUS_ONE))
    return UnaryFunc(name, "v", body=simplify(body))


@dataclass
class KEParams:
    """Everything that pins one member of the family down."""
    f: UnaryFunc = field(default_factory=lambda: UnaryFunc("f", "u"))
    g: UnaryFunc = field(default_factory=lambda: UnaryFunc("g", "u"))
    h: Optional[UnaryFunc] = None
    w: Expr = ZERO
    C: Expr = ZERO
    h_exponent: int = 2
    H_override: Optional[Expr] = None

    def __post_init__(self):
        for name in ("f", "g"):
            if not isinstance(getattr(self, name), UnaryFunc):
                raise ModelError(f"{name} must be a UnaryFunc")
        if self.h is not None and not isinstance(self.h, UnaryFunc):
            raise ModelError("h must be a UnaryFunc or None")
        self.w = simplify(_as_expr(self.w))
        self.C = simplify(_as_expr(self.C))
        if self.H_override is not None:
            self.H_override = simplify(_as_expr(self.H_override))
        if self.h_exponent not in (1, 2):
            raise ModelError("h_exponent must be 1 or 2")


def standard_params(C=0, C0=0, f: Optional[UnaryFunc] = None,
                    g: Optional[UnaryFunc] = None, w=0,
                    h_exponent: int = 2) -> KEParams:
    """Variational branch: coupling shape fixed to the curl-free family with
    strength C0 (no coupling when C0 = 0)."""
    h = curl_free_shape(C0) if _as_expr(C0) != ZERO else None
    return KEParams(f=f if f is not None else UnaryFunc("f", "u"),
                    g=g if g is not None else UnaryFunc("g", "u"),
                    h=h, w=w, C=C, h_exponent=h_exponent)


def _r2(x: Expr, y: Expr) -> Expr:
    return Add(Pow(x, Num(2)), Pow(y, Num(2)))


def _rpow(x: Expr, y: Expr, p) -> Expr:
    return Pow(_r2(x, y), Num(Fraction(p, 2)))


def standard_H(p: KEParams) -> Expr:
    """The radial-interaction numerator: -h(x/y)/y^e + (C/5) r^3."""
    if p.H_override is not None:
        return p.H_override
    x, y = Sym("x"), Sym("y")
    parts = []
    if p.h is not None:
        parts.append(Mul(MINUS_ONE, p.h.call(Mul(x, Pow(y, MINUS_ONE))),
                         Pow(y, Num(-p.h_exponent))))
    if p.C != ZERO:
        parts.append(Mul(p.C, Num(Fraction(1, 5)), _rpow(x, y, 3)))
    if not parts:
        return ZERO
    return simplify(parts[0] if len(parts) == 1 else Add(*parts))


def _auto_constants(exprs, coords, time):
    used = set()
    for e in exprs:
        used |= set(free_symbols(e))
    reserved = {time, *coords, *(c + "dot" for c in coords)}
    return sorted(used - reserved)


def build_system(p: KEParams, time: str = "t") -> SecondOrderSystem:
    """The coupled pair of second-order equations for the given parameters.

    Shape functions stay opaque in the right-hand sides; closed forms are
    inlined at compile/evaluation time through ``bindings``.
    """
    x, y = Sym("x"), Sym("y")
    u = Mul(y, Pow(x, MINUS_ONE))
    H = standard_H(p)
    rm3 = _rpow(x, y, -3)
    w2 = simplify(Pow(p.w, Num(2)))
    rhs = []
    for q, shape, other in ((x, p.f, u), (y, p.g, u)):
        parts = []
        if w2 != ZERO:
            parts.append(Mul(MINUS_ONE, w2, q))
        if H != ZERO:
            parts.append(Mul(MINUS_ONE, q, H, rm3))
        if shape.body != ZERO:
            parts.append(Mul(shape.call(other), Pow(q, Num(-3))))
        if not parts:
            parts.append(ZERO)
        rhs.append(simplify(Add(*parts) if len(parts) > 1 else parts[0]))
    return SecondOrderSystem(("x", "y"), rhs, time,
                             constants=_auto_constants(rhs, ("x", "y"), time))


def bindings(p: KEParams, syms: Optional[dict] = None,
             extra_fns: Optional[dict] = None) -> Bindings:
    """Numeric realizations of every shape that has one."""
    fns = {}
    for uf in (p.f, p.g, p.h):
        if uf is None:
            continue
        fb = uf.binding()
        if fb is not None:
            fns[uf.name] = fb
    if extra_fns:
        fns.update(extra_fns)
    return Bindings(dict(syms or {}), fns)


def inlined_rhs(sys: SecondOrderSystem, b: Bindings):
    """Right-hand sides with every closed-form shape substituted in."""
    from .numeric import inline_functions
    return tuple(simplify(inline_functions(w, b)) for w in sys.rhs)


# ---------------------------------------------------------------------------
# Residuals deciding which constructions apply


def radial_constraint_residual(H: Expr, C=ZERO) -> Expr:
    """x H_x + y H_y + 2 H - C r^3: zero iff H scales correctly under the
    similarity generators (degree -2 up to the allowed cubic part)."""
    x, y = Sym("x"), Sym("y")
    e = Add(Mul(x, differentiate(H, "x")), Mul(y, differentiate(H, "y")),
            Mul(Num(2), H), Mul(MINUS_ONE, _as_expr(C), _rpow(x, y, 3)))
    e = simplify(e)
    return ZERO if is_zero_structural(e) else e


def lagrangian_compatibility(f: UnaryFunc, g: UnaryFunc) -> Expr:
    """y^2 f'(y/x) + x^2 g'(y/x): zero iff the angular forces derive from a
    single potential (the pair is variational)."""
    x, y = Sym("x"), Sym("y")
    u = Mul(y, Pow(x, MINUS_ONE))
    return simplify(Add(Mul(Pow(y, Num(2)), f.deriv(u)),
                        Mul(Pow(x, Num(2)), g.deriv(u))))


def derive_g_from_f(f: UnaryFunc, name: str = "g") -> UnaryFunc:
    """The partner shape making the pair variational: g'(u) = -u^2 f'(u),
    normalized so g(1) = 0."""
    s = Sym(f.param)
    integrand = simplify(Mul(MINUS_ONE, Pow(s, Num(2)), f.deriv(s)))
    if f.body is not None:
        try:
            raw = antiderivative_power(integrand, s)
            body = simplify(Add(raw, Mul(MINUS_ONE,
                                         substitute(raw, {f.param: ONE}))))
            return UnaryFunc(name, f.param, body=body)
        except (NonElementaryAntiderivative, NonPolynomialError):
            from scipy.integrate import quad
            base = Bindings()

            def gn(val, _e=integrand, _p=f.param, _b=base):
                return quad(lambda ss: evaluate(_e, _b.with_syms({_p: ss})),
                            1.0, val, epsabs=1e-12, limit=200)[0]

            return UnaryFunc(name, f.param, numeric=gn, dbody=integrand)
    return UnaryFunc(name, f.param, dbody=integrand)


def psi_potential(h: Optional[UnaryFunc]) -> Expr:
    """Scalar potential reproducing the coupling force, when one exists.

    The force field is (-x h/(y^2 r^3), -y h/(y^2 r^3)) with h = h(x/y);
    it is a gradient only for the curl-free shape family, giving
    psi = (k/3) r^-3 with k = 2 h(1).  Raises ModelError (carrying the curl
    residual) otherwise.
    """
    if h is None:
        return ZERO
    if h.body is None:
        raise ModelError("potential construction needs a closed-form shape")
    x, y = Sym("x"), Sym("y")
    hb = h.inline(Mul(x, Pow(y, MINUS_ONE)))
    common = Mul(hb, Pow(y, Num(-2)), _rpow(x, y, -3))
    px = simplify(Mul(MINUS_ONE, x, common))
    py = simplify(Mul(MINUS_ONE, y, common))
    curl = simplify(Add(differentiate(px, "y"),
                        Mul(MINUS_ONE, differentiate(py, "x"))))
    if not is_zero_structural(curl):
        raise ModelError("coupling shape admits no potential", residual=curl)
    k = simplify(Mul(Num(2), h.inline(ONE)))
    psi = simplify(Mul(Num(Fraction(1, 3)), k, _rpow(x, y, -3)))
    for var, target in (("x", px), ("y", py)):
        diff = Add(differentiate(psi, var), Mul(MINUS_ONE, target))
        if not is_zero_structural(diff):
            raise ModelError("curl-free shape outside the recognized family",
                             residual=simplify(diff))
    return psi


def _psi_strength(h: Optional[UnaryFunc]):
    """Coefficient k in psi = (k/3) r^-3 (zero when no coupling)."""
    if h is None:
        return ZERO
    psi_potential(h)
    return simplify(Mul(Num(2), h.inline(ONE)))


# ---------------------------------------------------------------------------
# Lagrangian structure


def build_lagrangian(p: KEParams) -> Expr:
    """L = (xdot^2 + ydot^2)/2 - w^2 r^2/2 - (C/10) r^2 - psi
    - [f(y/x)/x^2 + g(y/x)/y^2]/2.

    This is the variational partner of the built system exactly when the
    (f, g) pair is compatible; the construction itself never enforces that,
    so conservation tests against incompatible pairs stay meaningful.
    """
    if p.H_override is not None:
        raise ModelError("no Lagrangian construction for an overridden "
                         "radial interaction")
    x, y = Sym("x"), Sym("y")
    xd, yd = Sym("xdot"), Sym("ydot")
    u = Mul(y, Pow(x, MINUS_ONE))
    parts = [Mul(HALF, Add(Pow(xd, Num(2)), Pow(yd, Num(2))))]
    if p.w != ZERO:
        parts.append(Mul(Num(Fraction(-1, 2)), Pow(p.w, Num(2)), _r2(x, y)))
    if p.C != ZERO:
        parts.append(Mul(Num(Fraction(-1, 10)), p.C, _r2(x, y)))
    psi = psi_potential(p.h)
    if psi != ZERO:
        parts.append(Mul(MINUS_ONE, psi))
    parts.append(Mul(Num(Fraction(-1, 2)), p.f.call(u), Pow(x, Num(-2))))
    parts.append(Mul(Num(Fraction(-1, 2)), p.g.call(u), Pow(y, Num(-2))))
    return simplify(Add(*parts))


def euler_lagrange_system(L: Expr, coords=("x", "y"), time: str = "t",
                          constants=None) -> SecondOrderSystem:
    """Solved-form equations of motion of a Lagrangian with a constant,
    exact-rational, invertible velocity Hessian."""
    vels = [c + "dot" for c in coords]
    n = len(coords)
    hess = []
    for va in vels:
        row = []
        for vb in vels:
            entry = simplify(differentiate(differentiate(L, va), vb))
            if not (isinstance(entry, Num) and entry.is_exact):
                raise ModelError(
                    f"velocity Hessian entry for ({va},{vb}) is not an exact "
                    f"constant")
            row.append(entry.value)
        hess.append(row)
    inv = _invert_rational(hess)
    forces = []
    for b, vb in enumerate(vels):
        mom = differentiate(L, vb)
        drift = [differentiate(mom, time)]
        for c, vc in zip(coords, vels):
            d = differentiate(mom, c)
            if d != ZERO:
                drift.append(Mul(Sym(vc), d))
        forces.append(simplify(Add(differentiate(L, coords[b]),
                                   *[Mul(MINUS_ONE, d) for d in drift])))
    rhs = []
    for a in range(n):
        parts = [Mul(Num(inv[a][b]), forces[b]) for b in range(n)
                 if inv[a][b] != 0]
        rhs.append(simplify(Add(*parts) if len(parts) > 1 else
                            (parts[0] if parts else ZERO)))
    if constants is None:
        constants = _auto_constants(rhs, coords, time)
    return SecondOrderSystem(coords, rhs, time, constants=constants)


# ---------------------------------------------------------------------------
# The angular first integral


@dataclass
class InvariantSpec:
    """A first integral plus the machinery its opaque pieces need:
    ``derivative_rules`` rewrites primed opaque calls structurally, and
    ``fn_bindings`` supplies numeric realizations."""
    expr: Expr
    derivative_rules: dict
    fn_bindings: dict


def _shape_integral(p: KEParams, fname: str = "elint"):
    """(F, rules, fns): F(arg) is the antiderivative of s f(s) - g(s)/s^3
    at ``arg``, normalized to vanish at 1."""
    s = Sym("u")
    integrand = simplify(Add(Mul(s, p.f.best_call(s)),
                             Mul(MINUS_ONE, Pow(s, Num(-3)),
                                 p.g.best_call(s))))
    if p.f.body is not None and p.g.body is not None:
        try:
            raw = antiderivative_power(integrand, s)
            c0 = simplify(substitute(raw, {"u": ONE}))

            def F(arg, _raw=raw, _c0=c0):
                return simplify(Add(substitute(_raw, {"u": arg}),
                                    Mul(MINUS_ONE, _c0)))

            return F, {}, {}
        except (NonElementaryAntiderivative, NonPolynomialError):
            pass
    rules = {fname: ("u", integrand)}
    fns = {}
    inner = bindings(p)
    if all(uf.body is not None or uf.numeric is not None
           for uf in (p.f, p.g)):
        from scipy.integrate import quad

        def nfn(val, _e=integrand, _b=inner):
            return quad(lambda ss: evaluate(_e, _b.with_syms({"u": ss})),
                        1.0, val, epsabs=1e-12, limit=200)[0]

        fns[fname] = FnBinding(("u",), body=None, numeric=nfn,
                               dbody=integrand)

    def F(arg, _name=fname):
        return Fn(_name, (0,), (arg,))

    return F, rules, fns


def ermakov_invariant(p: KEParams) -> InvariantSpec:
    """I = (xdot y - x ydot)^2 / 2 + int_1^{y/x} [s f(s) - g(s)/s^3] ds.

    Conserved along the built system for every coupling H and frequency w;
    the proof needs only the angular part of the equations.
    """
    x, y = Sym("x"), Sym("y")
    xd, yd = Sym("xdot"), Sym("ydot")
    F, rules, fns = _shape_integral(p)
    ang = Mul(HALF, Pow(Add(Mul(xd, y), Mul(MINUS_ONE, x, yd)), Num(2)))
    expr = simplify(Add(ang, F(Mul(y, Pow(x, MINUS_ONE)))))
    return InvariantSpec(expr, rules, fns)


# ---------------------------------------------------------------------------
# Polar form (variational branch only)


@dataclass
class PolarModel:
    system: SecondOrderSystem
    G: Expr
    lagrangian: Expr
    invariant: InvariantSpec


def to_polar(p: KEParams, time: str = "t") -> PolarModel:
    """Polar form of the variational branch.

    G(theta) = f(tan)/cos^2 + g(tan)/sin^2 collects both shapes; the radial
    equation keeps the central terms and the angular one reads
    thetaddot = -2 rdot thetadot / r - G'(theta)/(2 r^4).
    """
    if p.H_override is not None:
        raise ModelError("no polar construction for an overridden "
                         "radial interaction")
    r, th = Sym("r"), Sym("theta")
    rd, thd = Sym("rdot"), Sym("thetadot")
    sn, cs = Call("sin", th), Call("cos", th)
    tan = Mul(sn, Pow(cs, MINUS_ONE))
    G = simplify(Add(Mul(p.f.call(tan), Pow(cs, Num(-2))),
                     Mul(p.g.call(tan), Pow(sn, Num(-2)))))
    Gp = differentiate(G, "theta")
    k = _psi_strength(p.h)
    w2 = simplify(Pow(p.w, Num(2)))

    parts = [Mul(r, Pow(thd, Num(2))), Mul(G, Pow(r, Num(-3)))]
    if p.C != ZERO:
        parts.append(Mul(Num(Fraction(-1, 5)), p.C, r))
    if k != ZERO:
        parts.append(Mul(k, Pow(r, Num(-4))))
    if w2 != ZERO:
        parts.append(Mul(MINUS_ONE, w2, r))
    rhs_r = simplify(Add(*parts))
    rhs_th = simplify(Add(Mul(Num(-2), rd, thd, Pow(r, MINUS_ONE)),
                          Mul(Num(Fraction(-1, 2)), Gp, Pow(r, Num(-4)))))
    rhs = [rhs_r, rhs_th]
    system = SecondOrderSystem(("r", "theta"), rhs, time,
                               constants=_auto_constants(rhs, ("r", "theta"),
                                                         time))

    lag = [Mul(HALF, Add(Pow(rd, Num(2)),
                         Mul(Pow(r, Num(2)), Pow(thd, Num(2)))))]
    if p.C != ZERO:
        lag.append(Mul(Num(Fraction(-1, 10)), p.C, Pow(r, Num(2))))
    if k != ZERO:
        lag.append(Mul(Num(Fraction(-1, 3)), k, Pow(r, Num(-3))))
    if w2 != ZERO:
        lag.append(Mul(Num(Fraction(-1, 2)), w2, Pow(r, Num(2))))
    lag.append(Mul(Num(Fraction(-1, 2)), G, Pow(r, Num(-2))))
    lagrangian = simplify(Add(*lag))

    F, rules, fns = _shape_integral(p)
    inv_expr = simplify(Add(Mul(HALF, Pow(Mul(Pow(r, Num(2)), thd), Num(2))),
                            F(tan)))
    return PolarModel(system, G, lagrangian,
                      InvariantSpec(inv_expr, rules, fns))


def cartesian_to_polar_state(state):
    """(x, y, xdot, ydot) -> (r, theta, rdot, thetadot)."""
    x, y, xd, yd = [float(v) for v in state]
    r = math.hypot(x, y)
    if r == 0.0:
        raise ModelError("polar chart breaks down at the origin")
    return (r, math.atan2(y, x), (x * xd + y * yd) / r,
            (x * yd - y * xd) / (r * r))


def polar_to_cartesian_state(state):
    """(r, theta, rdot, thetadot) -> (x, y, xdot, ydot)."""
    r, th, rd, thd = [float(v) for v in state]
    c, s = math.cos(th), math.sin(th)
    return (r * c, r * s, rd * c - r * thd * s, rd * s + r * thd * c)
