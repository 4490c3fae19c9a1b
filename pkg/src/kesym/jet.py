"""Vector fields over second-order dynamical systems.

The calculus implemented here: the total time derivative A along a system,
first extensions (prolongations) of point generators, the linearized
symmetry-condition residual, determining-equation extraction by collecting
velocity monomials, and the first-integral constructions — the conserved
quantity paired to a point symmetry of a Lagrangian, and the velocity-space
generator recovered from a first integral through the kinetic Hessian.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .expr import (Add, Expr, ExprError, Fn, HALF, MINUS_ONE, Mul, Num, Pow,
                   Sym, ZERO, differentiate, free_symbols, opaque, parse,
                   substitute, to_str)
from .simplify import collect_poly, is_zero_structural, simplify

DEFAULT_SAMPLES = 200
DEFAULT_TOL = 1e-9
DEFAULT_SEED = 1729


class JetError(ExprError):
    pass


def _as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float, Fraction)):
        return Num(v)
    if isinstance(v, str):
        return parse(v)
    raise TypeError(f"cannot treat {v!r} as an expression")


class SecondOrderSystem:
    """N second-order equations in solved form: qddot^a = w^a(t, q, qdot).

    Velocities are first-class symbols named ``<coord>dot``.  Every rhs may
    reference only the time symbol, coordinates, velocities, and any names
    declared in ``constants``.
    """

    def __init__(self, coords: Sequence[str], rhs, time: str = "t",
                 constants: Sequence[str] = ()):
        self.coords = tuple(coords)
        if not self.coords:
            raise JetError("system needs at least one coordinate")
        if len(set(self.coords)) != len(self.coords):
            raise JetError("duplicate coordinate names")
        self.time = time
        self.velocities = tuple(c + "dot" for c in self.coords)
        self.constants = tuple(constants)
        if isinstance(rhs, dict):
            unknown = set(rhs) - set(self.coords)
            if unknown:
                raise JetError(f"rhs for undeclared coordinates: {sorted(unknown)}")
            missing = [c for c in self.coords if c not in rhs]
            if missing:
                raise JetError(f"missing rhs for {missing}")
            seq = [rhs[c] for c in self.coords]
        else:
            seq = list(rhs)
            if len(seq) != len(self.coords):
                raise JetError(
                    f"{len(seq)} rhs expressions for {len(self.coords)} coordinates")
        self.rhs = tuple(simplify(_as_expr(w)) for w in seq)
        allowed = {time, *self.coords, *self.velocities, *self.constants}
        for c, w in zip(self.coords, self.rhs):
            extra = set(free_symbols(w)) - allowed
            if extra:
                raise JetError(
                    f"rhs for {c!r} references undeclared symbols: {sorted(extra)}")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def coord_syms(self):
        return tuple(Sym(c) for c in self.coords)

    def vel_syms(self):
        return tuple(Sym(v) for v in self.velocities)

    def time_sym(self):
        return Sym(self.time)

    def rhs_of(self, coord: str) -> Expr:
        return self.rhs[self.coords.index(coord)]

    def __repr__(self):
        eqs = "; ".join(f"{c}ddot = {to_str(w)}"
                        for c, w in zip(self.coords, self.rhs))
        return f"SecondOrderSystem({eqs})"


def total_derivative(e: Expr, sys: SecondOrderSystem) -> Expr:
    """One application of A = d/dt + qdot^a d/dq^a + w^a d/dqdot^a."""
    parts = []
    d = differentiate(e, sys.time)
    if d != ZERO:
        parts.append(d)
    for c, v in zip(sys.coords, sys.velocities):
        d = differentiate(e, c)
        if d != ZERO:
            parts.append(Mul(Sym(v), d))
    for v, w in zip(sys.velocities, sys.rhs):
        d = differentiate(e, v)
        if d != ZERO:
            parts.append(Mul(w, d))
    if not parts:
        return ZERO
    return simplify(parts[0] if len(parts) == 1 else Add(*parts))


class PointGenerator:
    """xi(t,q) d/dt + eta^a(t,q) d/dq^a.

    Construction rejects any velocity symbol in the coefficients; that is
    what distinguishes a point generator from a dynamical one.
    """

    def __init__(self, xi, etas, coords: Sequence[str], time: str = "t"):
        self.coords = tuple(coords)
        self.time = time
        self.xi = simplify(_as_expr(xi))
        if isinstance(etas, dict):
            unknown = set(etas) - set(self.coords)
            if unknown:
                raise JetError(f"eta for undeclared coordinates: {sorted(unknown)}")
            etas = [etas.get(c, ZERO) for c in self.coords]
        self.etas = tuple(simplify(_as_expr(h)) for h in etas)
        if len(self.etas) != len(self.coords):
            raise JetError(
                f"{len(self.etas)} eta components for {len(self.coords)} coordinates")
        forbidden = {c + "dot" for c in self.coords}
        for label, e in [("xi", self.xi)] + list(zip(self.coords, self.etas)):
            hit = forbidden & set(free_symbols(e))
            if hit:
                raise JetError(
                    f"velocity symbol {sorted(hit)[0]!r} in point-generator "
                    f"component {label!r}")

    def eta_of(self, coord: str) -> Expr:
        return self.etas[self.coords.index(coord)]

    def scale(self, c) -> "PointGenerator":
        c = _as_expr(c)
        return PointGenerator(Mul(c, self.xi),
                              [Mul(c, h) for h in self.etas],
                              self.coords, self.time)

    def add(self, other: "PointGenerator") -> "PointGenerator":
        _check_same_space(self, other)
        return PointGenerator(Add(self.xi, other.xi),
                              [Add(a, b) for a, b in zip(self.etas, other.etas)],
                              self.coords, self.time)

    def apply(self, e: Expr) -> Expr:
        """X(e) for e over (t, q)."""
        parts = []
        d = differentiate(e, self.time)
        if d != ZERO:
            parts.append(Mul(self.xi, d))
        for c, eta in zip(self.coords, self.etas):
            d = differentiate(e, c)
            if d != ZERO:
                parts.append(Mul(eta, d))
        if not parts:
            return ZERO
        return simplify(parts[0] if len(parts) == 1 else Add(*parts))

    def is_zero(self) -> bool:
        return self.xi == ZERO and all(h == ZERO for h in self.etas)

    def same_as(self, other: "PointGenerator") -> bool:
        from .simplify import structurally_equal
        _check_same_space(self, other)
        if not structurally_equal(self.xi, other.xi):
            return False
        return all(structurally_equal(a, b)
                   for a, b in zip(self.etas, other.etas))

    def describe(self) -> str:
        bits = [f"xi = {to_str(self.xi)}"]
        bits += [f"eta[{c}] = {to_str(h)}"
                 for c, h in zip(self.coords, self.etas)]
        return "\n".join(bits)

    def __repr__(self):
        comps = ", ".join([to_str(self.xi)] + [to_str(h) for h in self.etas])
        return f"PointGenerator({comps})"


def _check_same_space(a, b):
    if a.coords != b.coords or a.time != b.time:
        raise JetError("generators live on different coordinate spaces")


def _check_gen_sys(g, sys):
    if g.coords != sys.coords or g.time != sys.time:
        raise JetError("generator and system coordinate spaces differ")


def prolong(g: PointGenerator, sys: SecondOrderSystem) -> dict:
    """First-extension velocity coefficients P^a = A(eta^a) - qdot^a A(xi)."""
    _check_gen_sys(g, sys)
    axi = total_derivative(g.xi, sys)
    out = {}
    for c, v, eta in zip(sys.coords, sys.velocities, g.etas):
        out[c] = simplify(Add(total_derivative(eta, sys),
                              Mul(MINUS_ONE, Sym(v), axi)))
    return out


def apply_extended(g: PointGenerator, e: Expr, sys: SecondOrderSystem,
                   _prolonged: Optional[dict] = None) -> Expr:
    """Apply the first extension of g to a function of (t, q, qdot)."""
    P = prolong(g, sys) if _prolonged is None else _prolonged
    parts = []
    d = differentiate(e, sys.time)
    if d != ZERO:
        parts.append(Mul(g.xi, d))
    for c, eta in zip(sys.coords, g.etas):
        d = differentiate(e, c)
        if d != ZERO:
            parts.append(Mul(eta, d))
    for c, v in zip(sys.coords, sys.velocities):
        d = differentiate(e, v)
        if d != ZERO:
            parts.append(Mul(P[c], d))
    if not parts:
        return ZERO
    return simplify(parts[0] if len(parts) == 1 else Add(*parts))


def symmetry_residual(g: PointGenerator, sys: SecondOrderSystem) -> dict:
    """Residual of the linearized symmetry condition, per coordinate.

    residual_a = Xdot(w^a) + w^a A(xi) - A(P^a), fully expanded over
    (t, q, qdot); g generates a symmetry iff every component vanishes
    identically.
    """
    _check_gen_sys(g, sys)
    P = prolong(g, sys)
    axi = total_derivative(g.xi, sys)
    out = {}
    for c, w in zip(sys.coords, sys.rhs):
        xw = apply_extended(g, w, sys, _prolonged=P)
        apa = total_derivative(P[c], sys)
        out[c] = simplify(Add(xw, Mul(w, axi), Mul(MINUS_ONE, apa)))
    return out


# ---------------------------------------------------------------------------
# Determining equations


@dataclass(frozen=True)
class MonomialCondition:
    """One determining equation: the coefficient of a velocity monomial in
    one component of the symmetry residual, required to vanish."""
    component: str
    exponents: tuple
    coeff: Expr


def determining_equations(sys: SecondOrderSystem, xi_name: str = "xi",
                          eta_prefix: str = "eta") -> list:
    """Determining equations for a generic point generator on ``sys``.

    The generator coefficients are opaque functions of (t, q); the residual
    is collected over velocity monomials and every coefficient is returned
    as a MonomialCondition.  Requires rhs polynomial in the velocities.
    """
    t = sys.time_sym()
    args = (t, *sys.coord_syms())
    xi = opaque(xi_name, *args)
    etas = [opaque(f"{eta_prefix}{i + 1}", *args) for i in range(sys.dim)]
    g = PointGenerator(xi, etas, sys.coords, sys.time)
    res = symmetry_residual(g, sys)
    vels = sys.vel_syms()
    out = []
    for c in sys.coords:
        poly = collect_poly(res[c], vels)
        for exps in sorted(poly, key=lambda k: (-sum(k), tuple(-x for x in k))):
            out.append(MonomialCondition(c, exps, poly[exps]))
    return out


def subscript_form(e: Expr, unknowns: Sequence[str]) -> Expr:
    """Replace opaque unknowns by subscript symbols for display.

    xi(t,x,y) becomes the symbol xi; its t,x-derivative becomes xi_tx.  Only
    calls whose arguments are all plain symbols are rewritten.
    """
    names = set(unknowns)

    def walk(x: Expr) -> Expr:
        if isinstance(x, (Num, Sym)):
            return x
        if isinstance(x, Add):
            return Add(*[walk(a) for a in x.args])
        if isinstance(x, Mul):
            return Mul(*[walk(a) for a in x.args])
        if isinstance(x, Pow):
            return Pow(walk(x.base), walk(x.exp))
        if isinstance(x, Fn):
            if x.name in names and all(isinstance(a, Sym) for a in x.fnargs):
                letters = "".join(a.name * k
                                  for a, k in zip(x.fnargs, x.orders))
                return Sym(x.name if not letters else f"{x.name}_{letters}")
            return Fn(x.name, x.orders, [walk(a) for a in x.fnargs])
        from .expr import Call
        if isinstance(x, Call):
            return Call(x.fn, walk(x.arg))
        raise TypeError(f"cannot rewrite {type(x)}")

    return walk(e)


def format_determining(conds, unknowns=("xi", "eta1", "eta2")) -> list:
    """Human-readable lines ``<coeff> = 0``, deduplicated, order-preserving."""
    seen = set()
    lines = []
    for c in conds:
        text = f"{to_str(simplify(subscript_form(c.coeff, unknowns)))} = 0"
        if text not in seen:
            seen.add(text)
            lines.append(text)
    return lines


# ---------------------------------------------------------------------------
# Ansatz assembly for the two-coordinate family


class AnsatzFamily:
    """Separable solution shape for the two-coordinate determining equations.

    xi = kappa(t) x + delta(t) y + sigma(t); eta1 is quadratic in x with
    t-coefficients and linear in y (symmetrically for eta2):

        eta1 = (delta' x + phi1) y + kappa' x^2 + phi3 x + phi5,
        eta2 = (kappa' y + phi2) x + delta' y^2 + phi4 y + phi6.
    """

    def __init__(self, kappa=ZERO, delta=ZERO, sigma=ZERO,
                 phis=(ZERO,) * 6, c1=ZERO, c2=ZERO, time: str = "t"):
        self.kappa = simplify(_as_expr(kappa))
        self.delta = simplify(_as_expr(delta))
        self.sigma = simplify(_as_expr(sigma))
        phis = tuple(simplify(_as_expr(p)) for p in phis)
        if len(phis) != 6:
            raise JetError("ansatz needs exactly six phi functions")
        self.phis = phis
        self.c1 = simplify(_as_expr(c1))
        self.c2 = simplify(_as_expr(c2))
        self.time = time

    @classmethod
    def reduced(cls, sigma, c1=ZERO, c2=ZERO, time: str = "t") -> "AnsatzFamily":
        """The branch forced by the linear-velocity conditions: kappa and
        delta vanish, phi3 = (sigma' - c1)/2, phi4 = (sigma' - c2)/2."""
        sigma = simplify(_as_expr(sigma))
        sd = differentiate(sigma, time)
        c1 = _as_expr(c1)
        c2 = _as_expr(c2)
        phi3 = Mul(HALF, Add(sd, Mul(MINUS_ONE, c1)))
        phi4 = Mul(HALF, Add(sd, Mul(MINUS_ONE, c2)))
        return cls(sigma=sigma, phis=(ZERO, ZERO, phi3, phi4, ZERO, ZERO),
                   c1=c1, c2=c2, time=time)

    def generator(self, coords=("x", "y")) -> PointGenerator:
        if len(coords) != 2:
            raise JetError("this ansatz is for two-coordinate systems")
        x, y = Sym(coords[0]), Sym(coords[1])
        kd = differentiate(self.kappa, self.time)
        dd = differentiate(self.delta, self.time)
        p1, p2, p3, p4, p5, p6 = self.phis
        xi = Add(Mul(self.kappa, x), Mul(self.delta, y), self.sigma)
        eta1 = Add(Mul(Add(Mul(dd, x), p1), y),
                   Mul(kd, Pow(x, Num(2))), Mul(p3, x), p5)
        eta2 = Add(Mul(Add(Mul(kd, y), p2), x),
                   Mul(dd, Pow(y, Num(2))), Mul(p4, y), p6)
        return PointGenerator(xi, [eta1, eta2], coords, self.time)


# ---------------------------------------------------------------------------
# First integrals: the Noether pairing and the Hessian-based construction


def noether_first_integral(g: PointGenerator, L: Expr, gauge=ZERO) -> Expr:
    """First integral paired to a variational point symmetry:

        phi = xi (qdot^k dL/dqdot^k - L) - eta^k dL/dqdot^k + gauge.
    """
    vels = [c + "dot" for c in g.coords]
    momenta = [differentiate(L, v) for v in vels]
    energy = Add(*[Mul(Sym(v), p) for v, p in zip(vels, momenta)],
                 Mul(MINUS_ONE, L))
    parts = [Mul(g.xi, energy)]
    for eta, p in zip(g.etas, momenta):
        parts.append(Mul(MINUS_ONE, eta, p))
    parts.append(_as_expr(gauge))
    return simplify(Add(*parts))


class DynamicalGenerator:
    """Generator whose coefficients may reference velocities; the
    velocity-direction components are stored explicitly rather than derived.
    """

    def __init__(self, xi, etas, eta_dots, coords: Sequence[str],
                 time: str = "t"):
        self.coords = tuple(coords)
        self.time = time
        self.xi = simplify(_as_expr(xi))
        self.etas = tuple(simplify(_as_expr(h)) for h in etas)
        self.eta_dots = tuple(simplify(_as_expr(h)) for h in eta_dots)
        if len(self.etas) != len(self.coords):
            raise JetError("eta component count does not match coordinates")
        if len(self.eta_dots) != len(self.coords):
            raise JetError("eta_dot component count does not match coordinates")

    def apply(self, e: Expr) -> Expr:
        parts = []
        d = differentiate(e, self.time)
        if d != ZERO:
            parts.append(Mul(self.xi, d))
        for c, eta in zip(self.coords, self.etas):
            d = differentiate(e, c)
            if d != ZERO:
                parts.append(Mul(eta, d))
        for c, hdot in zip(self.coords, self.eta_dots):
            d = differentiate(e, c + "dot")
            if d != ZERO:
                parts.append(Mul(hdot, d))
        if not parts:
            return ZERO
        return simplify(parts[0] if len(parts) == 1 else Add(*parts))

    def describe(self) -> str:
        bits = [f"xi = {to_str(self.xi)}"]
        bits += [f"eta[{c}] = {to_str(h)}"
                 for c, h in zip(self.coords, self.etas)]
        bits += [f"eta_dot[{c}] = {to_str(h)}"
                 for c, h in zip(self.coords, self.eta_dots)]
        return "\n".join(bits)

    def __repr__(self):
        return f"DynamicalGenerator({self.describe()!r})"


def _invert_rational(m):
    """Inverse of a square Fraction matrix by Gauss-Jordan elimination."""
    n = len(m)
    a = [[Fraction(m[i][j]) for j in range(n)]
         + [Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            raise JetError("singular kinetic Hessian")
        a[col], a[piv] = a[piv], a[col]
        d = a[col][col]
        a[col] = [v / d for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [vr - f * vc for vr, vc in zip(a[r], a[col])]
    return [row[n:] for row in a]


def cartan_generator(phi: Expr, L: Expr,
                     sys: SecondOrderSystem) -> DynamicalGenerator:
    """Velocity-space generator paired to a first integral through the
    kinetic Hessian, in the gauge with no time component:

        eta^a = -(d2L/dqdot dqdot)^{-1}_{ab} dphi/dqdot^b,

    with the velocity-direction components filled in by the total derivative
    along the system.  Requires a constant, exact-rational, invertible
    Hessian (unit-mass kinetic terms qualify).
    """
    vels = sys.velocities
    n = sys.dim
    hess = []
    for va in vels:
        row = []
        for vb in vels:
            entry = simplify(differentiate(differentiate(L, va), vb))
            if not (isinstance(entry, Num) and entry.is_exact):
                raise JetError(
                    f"kinetic Hessian entry for ({va},{vb}) is not an exact "
                    f"constant: {to_str(entry)}")
            row.append(entry.value)
        hess.append(row)
    inv = _invert_rational(hess)
    grads = [differentiate(phi, v) for v in vels]
    etas = []
    for a in range(n):
        parts = [Mul(Num(-inv[a][b]), grads[b]) for b in range(n)]
        etas.append(simplify(parts[0] if n == 1 else Add(*parts)))
    eta_dots = [total_derivative(h, sys) for h in etas]
    return DynamicalGenerator(ZERO, etas, eta_dots, sys.coords, sys.time)


# ---------------------------------------------------------------------------
# Verification reports


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    max_abs: Optional[float] = None


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def max_abs(self) -> float:
        vals = [c.max_abs for c in self.checks if c.max_abs is not None]
        return max(vals) if vals else 0.0

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            detail = f" ({c.detail})" if c.detail else ""
            lines.append(f"[{status}] {c.name}{detail}")
        return "\n".join(lines)


def _zero_check(name: str, e: Expr, domain, bindings, samples, tol,
                seed) -> CheckResult:
    if is_zero_structural(e):
        return CheckResult(name, True, "structural zero", 0.0)
    if domain is None:
        return CheckResult(
            name, False, f"not reducible to zero: {to_str(simplify(e))}")
    from .numeric import max_abs_on
    m = max_abs_on(e, domain, samples=samples, seed=seed, bindings=bindings)
    return CheckResult(name, m <= tol,
                       f"max residual {m:.3e} over {samples} samples", m)


def apply_derivative_rules(e: Expr, rules: Optional[dict]) -> Expr:
    """Rewrite derivatives of unary opaque functions with declared
    closed-form first derivatives.

    ``rules`` maps a function name to (param_name, first_derivative_body).
    Order-k calls (k >= 1) are replaced by the (k-1)-th derivative of the
    declared body; order-0 calls stay opaque.
    """
    if not rules:
        return e

    def walk(x: Expr) -> Expr:
        if isinstance(x, (Num, Sym)):
            return x
        if isinstance(x, Add):
            return Add(*[walk(a) for a in x.args])
        if isinstance(x, Mul):
            return Mul(*[walk(a) for a in x.args])
        if isinstance(x, Pow):
            return Pow(walk(x.base), walk(x.exp))
        if isinstance(x, Fn):
            args = [walk(a) for a in x.fnargs]
            rule = rules.get(x.name)
            if rule is not None and len(x.orders) == 1 and x.orders[0] >= 1:
                param, body = rule
                for _ in range(x.orders[0] - 1):
                    body = differentiate(body, param)
                return substitute(body, {param: args[0]})
            return Fn(x.name, x.orders, args)
        from .expr import Call
        if isinstance(x, Call):
            return Call(x.fn, walk(x.arg))
        raise TypeError(f"cannot rewrite {type(x)}")

    return simplify(walk(e))


def is_symmetry(g: PointGenerator, sys: SecondOrderSystem, domain=None,
                bindings=None, samples: int = DEFAULT_SAMPLES,
                tol: float = 1e-10,
                seed: int = DEFAULT_SEED) -> VerificationReport:
    """Check the symmetry residual of g, component by component.

    Structural proof first; when a domain is given, numeric sampling decides
    the leftovers to ``tol``.
    """
    res = symmetry_residual(g, sys)
    report = VerificationReport()
    for c in sys.coords:
        report.checks.append(_zero_check(
            f"residual[{c}] = 0", res[c], domain, bindings, samples, tol,
            seed))
    return report


def verify_dynamical(g: DynamicalGenerator, phi: Expr,
                     sys: SecondOrderSystem, L: Optional[Expr] = None,
                     derivative_rules: Optional[dict] = None, domain=None,
                     bindings=None, samples: int = DEFAULT_SAMPLES,
                     tol: float = DEFAULT_TOL,
                     seed: int = DEFAULT_SEED) -> VerificationReport:
    """Checks pairing a velocity-space generator with a first integral.

    Verified: phi is conserved (A(phi) = 0), the stored velocity components
    agree with the total derivative of the eta components, and — when the
    Lagrangian is supplied — the Hessian pairing
    sum_a d2L/dqdot^a dqdot^b (eta^a - qdot^a xi) + dphi/dqdot^b = 0.
    """
    report = VerificationReport()

    aphi = apply_derivative_rules(total_derivative(phi, sys), derivative_rules)
    report.checks.append(_zero_check("conservation: A(phi) = 0", aphi,
                                     domain, bindings, samples, tol, seed))

    for c, eta, hdot in zip(sys.coords, g.etas, g.eta_dots):
        diff = Add(hdot, Mul(MINUS_ONE, total_derivative(eta, sys)))
        diff = apply_derivative_rules(diff, derivative_rules)
        report.checks.append(_zero_check(
            f"velocity component[{c}] matches A(eta[{c}])", diff, domain,
            bindings, samples, tol, seed))

    if L is not None:
        for b, vb in enumerate(sys.velocities):
            parts = [differentiate(phi, vb)]
            for a, va in enumerate(sys.velocities):
                m_ab = simplify(differentiate(differentiate(L, va), vb))
                if m_ab == ZERO:
                    continue
                parts.append(Mul(m_ab, Add(g.etas[a],
                                           Mul(MINUS_ONE, Sym(va), g.xi))))
            lhs = apply_derivative_rules(
                simplify(parts[0] if len(parts) == 1 else Add(*parts)),
                derivative_rules)
            report.checks.append(_zero_check(
                f"Hessian pairing[{sys.coords[b]}]", lhs, domain, bindings,
                samples, tol, seed))
    return report
