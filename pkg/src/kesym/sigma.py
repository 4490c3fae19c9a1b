"""Time-rescaling symmetries and the scalar condition behind them.

The family admits generators xi = sigma(t), eta = (sigma' x/2, sigma' y/2)
exactly when sigma solves

    sigma''' + 4 w^2 sigma' + 4 w w' sigma + k sigma' = 0,

where k is the coefficient induced by a cubic radial part (k = (4/5) C for
H = (C/5) r^3, confirmed by a numeric self-test rather than taken on faith).
This module builds those generators, closed-form sigma bases, the self-tests
resolving k and the coupling-shape exponent, and the nonlinear-oscillator
reduction that produces sigma = rho^2 from rho'' + w^2 rho = c2 / rho^3.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .expr import (Add, Call, Expr, ExprError, HALF, MINUS_ONE, Mul, Num,
                   ONE, Pow, Sym, ZERO, differentiate)
from .jet import (PointGenerator, SecondOrderSystem, _as_expr,
                  symmetry_residual, total_derivative)
from .models import (DEFAULT_DOMAIN, KEParams, UnaryFunc, bindings,
                     build_system, _auto_constants)
from .numeric import max_abs_on
from .simplify import simplify

RESOLVE_TOL = 1e-10


class SigmaError(ExprError):
    pass


def build_generator_family(sigma, coords=("x", "y"),
                           time: str = "t") -> PointGenerator:
    """xi = sigma(t), eta^a = sigma'(t) q^a / 2."""
    sigma = simplify(_as_expr(sigma))
    half_sd = simplify(Mul(HALF, differentiate(sigma, time)))
    etas = [Mul(half_sd, Sym(c)) for c in coords]
    return PointGenerator(sigma, etas, coords, time)


def sigma_residual(sigma, w=ZERO, k=ZERO, time: str = "t") -> Expr:
    """sigma''' + 4 w^2 sigma' + 4 w w' sigma + k sigma'."""
    sigma = simplify(_as_expr(sigma))
    w = simplify(_as_expr(w))
    k = _as_expr(k)
    s1 = differentiate(sigma, time)
    s3 = differentiate(differentiate(s1, time), time)
    parts = [s3, Mul(Num(4), Pow(w, Num(2)), s1),
             Mul(Num(4), w, differentiate(w, time), sigma), Mul(k, s1)]
    return simplify(Add(*parts))


def sigma_basis(w=ZERO, C=ZERO, k_coeff=Fraction(4, 5)):
    """Closed-form span of solutions for constant w and C.

    The condition collapses to sigma'' + mu^2 sigma = const with
    mu^2 = 4 w^2 + k_coeff * C, giving {1, cos(mu t), sin(mu t)} for
    mu^2 > 0, {1, t, t^2} for mu^2 = 0, and {1, exp(lam t), exp(-lam t)}
    for mu^2 < 0.  Non-constant data has no closed basis here; reduce
    through the nonlinear oscillator instead.
    """
    w = simplify(_as_expr(w))
    C = simplify(_as_expr(C))
    if not isinstance(w, Num) or not isinstance(C, Num):
        raise SigmaError("closed bases need constant frequency and cubic "
                         "strength; use the nonlinear-oscillator reduction")
    mu2 = 4 * Fraction(w.value) ** 2 + Fraction(k_coeff) * Fraction(C.value) \
        if (w.is_exact and C.is_exact and
            isinstance(k_coeff, (int, Fraction))) \
        else 4 * float(w.value) ** 2 + float(k_coeff) * float(C.value)
    t = Sym("t")
    if mu2 == 0:
        return (ONE, t, Pow(t, Num(2)))
    if mu2 > 0:
        mu = simplify(Pow(Num(mu2), HALF))
        arg = simplify(Mul(mu, t))
        return (ONE, Call("cos", arg), Call("sin", arg))
    lam = simplify(Pow(Num(-mu2), HALF))
    return (ONE, Call("exp", simplify(Mul(lam, t))),
            Call("exp", simplify(Mul(MINUS_ONE, lam, t))))


# ---------------------------------------------------------------------------
# Self-tests resolving the two contested coefficients


def _zero_shape(name: str) -> UnaryFunc:
    return UnaryFunc(name, "u", body=ZERO)


def _family_residual(p: KEParams, sigma) -> float:
    sys = build_system(p)
    gen = build_generator_family(sigma)
    res = symmetry_residual(gen, sys)
    b = bindings(p)
    return max(max_abs_on(res[c], DEFAULT_DOMAIN, bindings=b)
               for c in sys.coords)


@dataclass(frozen=True)
class Resolution:
    """Outcome of a coefficient self-test: the winning candidate and the
    measured residual for every candidate."""
    winner: object
    residuals: dict

    def report(self) -> str:
        lines = [f"  candidate {k}: max residual {v:.3e}"
                 for k, v in self.residuals.items()]
        return "\n".join([f"winner: {self.winner}"] + lines)


@lru_cache(maxsize=None)
def resolve_sigma_k(C: float = 1.0) -> Resolution:
    """Which multiple of C multiplies sigma' for a pure cubic radial part?

    Candidates C and (4/5) C.  For each, sigma = cos(sqrt(k) t) solves
    sigma''' + k sigma' = 0; the rescaling family it generates is a symmetry
    of the w = 0, H = (C/5) r^3 system only for the true k.
    """
    if C <= 0:
        raise SigmaError("self-test needs C > 0")
    residuals = {}
    for label, mult in (("C", Fraction(1)), ("4C/5", Fraction(4, 5))):
        k = float(mult) * C
        sigma = Call("cos", Mul(Num(math.sqrt(k)), Sym("t")))
        p = KEParams(f=_zero_shape("f"), g=_zero_shape("g"), C=Num(C))
        residuals[label] = _family_residual(p, sigma)
    winner_label = min(residuals, key=residuals.get)
    if residuals[winner_label] > RESOLVE_TOL:
        raise SigmaError(
            f"no candidate passes the rescaling self-test: {residuals}")
    winner = Fraction(1) if winner_label == "C" else Fraction(4, 5)
    return Resolution(winner, residuals)


@lru_cache(maxsize=None)
def resolve_h_exponent() -> Resolution:
    """Which power of y divides the coupling shape h(x/y) in H?

    Candidates 2 and 1.  With w = 0, C = 0, and a constant shape, sigma = t^2
    generates a symmetry only for the exponent that makes H scale with
    degree -1 (so that the radial combination x H_x + y H_y + H vanishes).
    """
    residuals = {}
    sigma = Pow(Sym("t"), Num(2))
    for e in (2, 1):
        p = KEParams(f=_zero_shape("f"), g=_zero_shape("g"),
                     h=UnaryFunc("h", "v", body=ONE), h_exponent=e)
        residuals[e] = _family_residual(p, sigma)
    winner = min(residuals, key=residuals.get)
    if residuals[winner] > RESOLVE_TOL:
        raise SigmaError(
            f"no candidate passes the coupling-shape self-test: {residuals}")
    return Resolution(winner, residuals)


# ---------------------------------------------------------------------------
# Nonlinear-oscillator reduction: sigma = rho^2


@dataclass
class PinneyReduction:
    """rho'' = -w^2 rho + c2 / rho^3 together with sigma = rho^2 and the
    reduction's first integral, all expressed over (rho, rhodot)."""
    system: SecondOrderSystem
    sigma: Expr
    sigma_dot: Expr
    first_integral: Expr


def pinney_reduction(w=ZERO, c2=ONE, time: str = "t") -> PinneyReduction:
    """Reduce the scalar condition through the nonlinear oscillator.

    Any positive solution rho gives sigma = rho^2 with
    sigma sigma'' - sigma'^2/2 + 2 sigma^2 w^2 constant (equal to 2 c2);
    the returned expressions are written over (rho, rhodot) by
    differentiating along the oscillator flow.
    """
    w = simplify(_as_expr(w))
    c2 = simplify(_as_expr(c2))
    rho = Sym("rho")
    rhs = simplify(Add(Mul(MINUS_ONE, Pow(w, Num(2)), rho),
                       Mul(c2, Pow(rho, Num(-3)))))
    sys = SecondOrderSystem(("rho",), [rhs], time,
                            constants=_auto_constants([rhs], ("rho",), time))
    sigma = Pow(rho, Num(2))
    s1 = total_derivative(sigma, sys)
    s2 = total_derivative(s1, sys)
    fi = simplify(Add(Mul(sigma, s2),
                      Mul(Num(Fraction(-1, 2)), Pow(s1, Num(2))),
                      Mul(Num(2), Pow(sigma, Num(2)), Pow(w, Num(2)))))
    return PinneyReduction(sys, sigma, s1, fi)
