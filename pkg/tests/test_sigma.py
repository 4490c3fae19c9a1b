"""Tests for the time-rescaling family and the scalar sigma condition."""
from fractions import Fraction

import pytest

from kesym.expr import (Add, Call, Mul, Num, ONE, Pow, Sym, ZERO, MINUS_ONE,
                        parse)
from kesym.jet import symmetry_residual, total_derivative
from kesym.models import (DEFAULT_DOMAIN, KEParams, UnaryFunc, bindings,
                          build_system, curl_free_shape)
from kesym.numeric import max_abs_on
from kesym.sigma import (PinneyReduction, Resolution, SigmaError,
                         build_generator_family, pinney_reduction,
                         resolve_h_exponent, resolve_sigma_k, sigma_basis,
                         sigma_residual)
from kesym.simplify import is_zero_structural, simplify

T = Sym("t")


def _zero_shape(name):
    return UnaryFunc(name, "u", body=ZERO)


def _family_residual(p, sigma):
    sys = build_system(p)
    gen = build_generator_family(sigma)
    res = symmetry_residual(gen, sys)
    b = bindings(p)
    return max(max_abs_on(res[c], DEFAULT_DOMAIN, bindings=b)
               for c in sys.coords)


# ---------------------------------------------------------------------------
# scalar residual


def test_residual_zero_polynomials():
    for s in (ONE, T, parse("t^2"), parse("3*t^2 - 2*t + 7")):
        assert sigma_residual(s) == ZERO


def test_residual_zero_harmonic():
    # w = 1: sigma''' + 4 sigma' = 0 for cos(2t), sin(2t).
    for s in (parse("cos(2*t)"), parse("sin(2*t)"), ONE):
        assert is_zero_structural(sigma_residual(s, w=ONE))


def test_residual_zero_with_k():
    # w = 0, k = 4: cos(2t) again.
    assert is_zero_structural(sigma_residual(parse("cos(2*t)"), k=Num(4)))


def test_residual_nonzero_cubic():
    assert sigma_residual(parse("t^3")) == Num(6)


def test_residual_nonconstant_frequency():
    # sigma = 1 leaves only the 4 w w' sigma term.
    r = sigma_residual(ONE, w=T)
    assert is_zero_structural(Add(r, Mul(Num(-4), T)))


def test_residual_accepts_strings():
    assert sigma_residual("t^2 + 5") == ZERO


# ---------------------------------------------------------------------------
# closed bases


def test_basis_free():
    assert sigma_basis() == (ONE, T, Pow(T, Num(2)))


def test_basis_harmonic():
    b = sigma_basis(w=ONE)
    assert b == (ONE, Call("cos", Mul(Num(2), T)), Call("sin", Mul(Num(2), T)))


def test_basis_cubic_matches_harmonic():
    # C = 5 with the 4/5 coefficient gives mu^2 = 4, same span as w = 1.
    assert sigma_basis(C=Num(5)) == sigma_basis(w=ONE)


def test_basis_exponential():
    b = sigma_basis(C=Num(-5))
    assert b == (ONE, Call("exp", Mul(Num(2), T)),
                 Call("exp", Mul(Num(-2), T)))


def test_basis_elements_solve_residual():
    cases = [(ZERO, ZERO), (ONE, ZERO), (ZERO, Num(5)), (ZERO, Num(-5)),
             (Num(Fraction(1, 2)), Num(3))]
    for w, C in cases:
        k = simplify(Mul(Num(Fraction(4, 5)), C))
        for s in sigma_basis(w=w, C=C):
            assert is_zero_structural(sigma_residual(s, w=w, k=k)), (w, C, s)


def test_basis_needs_constant_data():
    with pytest.raises(SigmaError):
        sigma_basis(w=T)
    with pytest.raises(SigmaError):
        sigma_basis(C=Sym("C"))


# ---------------------------------------------------------------------------
# generator family


def test_family_shape():
    g = build_generator_family(parse("t^2"))
    assert g.xi == Pow(T, Num(2))
    assert is_zero_structural(Add(g.etas[0], Mul(MINUS_ONE, T, Sym("x"))))
    assert is_zero_structural(Add(g.etas[1], Mul(MINUS_ONE, T, Sym("y"))))


def test_family_is_symmetry_with_coupling():
    # coupling shape present, resolved exponent: whole free basis works.
    p = KEParams(f=_zero_shape("f"), g=_zero_shape("g"),
                 h=curl_free_shape(Num(Fraction(1, 5))), h_exponent=1)
    for s in sigma_basis():
        assert _family_residual(p, s) < 1e-10


def test_family_ignores_angular_shapes():
    # arbitrary f, g drop out of the residual for any member of the family.
    p = KEParams(f=UnaryFunc("f", "u", body=parse("u^2")),
                 g=UnaryFunc("g", "u", body=parse("u^3 + 1")))
    for s in sigma_basis():
        assert _family_residual(p, s) < 1e-10


def test_family_harmonic_case():
    p = KEParams(f=_zero_shape("f"), g=_zero_shape("g"), w=ONE)
    for s in sigma_basis(w=ONE):
        assert _family_residual(p, s) < 1e-10


def test_family_wrong_sigma_fails():
    p = KEParams(f=_zero_shape("f"), g=_zero_shape("g"), w=ONE)
    assert _family_residual(p, parse("t^2")) > 1e-3


# ---------------------------------------------------------------------------
# coefficient self-tests


def test_resolve_sigma_k():
    r = resolve_sigma_k(C=1.0)
    assert isinstance(r, Resolution)
    assert r.winner == Fraction(4, 5)
    assert set(r.residuals) == {"C", "4C/5"}
    assert r.residuals["4C/5"] < 1e-10
    assert r.residuals["C"] > 1e-3
    rep = r.report()
    assert "winner" in rep and "4C/5" in rep and "candidate C" in rep


def test_resolve_sigma_k_needs_positive_strength():
    with pytest.raises(SigmaError):
        resolve_sigma_k(C=-1.0)


def test_resolve_h_exponent():
    r = resolve_h_exponent()
    assert r.winner == 1
    assert r.residuals[1] < 1e-10
    assert r.residuals[2] > 1e-2


# ---------------------------------------------------------------------------
# nonlinear-oscillator reduction


def test_pinney_system_shape():
    red = pinney_reduction(w=ZERO, c2=Num(Fraction(3, 2)))
    assert isinstance(red, PinneyReduction)
    assert red.system.coords == ("rho",)
    want = Mul(Num(Fraction(3, 2)), Pow(Sym("rho"), Num(-3)))
    assert is_zero_structural(Add(red.system.rhs[0], Mul(MINUS_ONE, want)))


def test_pinney_first_integral_is_twice_c2():
    for c2 in (ONE, Num(Fraction(3, 2)), Num(0.25)):
        red = pinney_reduction(w=ONE, c2=c2)
        assert is_zero_structural(Add(red.first_integral,
                                      Mul(Num(-2), c2)))


def test_pinney_sigma_dot():
    red = pinney_reduction(w=ONE)
    assert red.sigma == Pow(Sym("rho"), Num(2))
    want = Mul(Num(2), Sym("rho"), Sym("rhodot"))
    assert is_zero_structural(Add(red.sigma_dot, Mul(MINUS_ONE, want)))


def test_pinney_flow_solves_sigma_condition():
    # sigma''' + 4 w^2 sigma' vanishes identically along the oscillator flow.
    red = pinney_reduction(w=ONE)
    s1 = red.sigma_dot
    s2 = total_derivative(s1, red.system)
    s3 = total_derivative(s2, red.system)
    assert is_zero_structural(Add(s3, Mul(Num(4), s1)))


def test_pinney_flow_with_free_frequency():
    red = pinney_reduction(w=ZERO, c2=Num(2))
    s1 = red.sigma_dot
    s3 = total_derivative(total_derivative(s1, red.system), red.system)
    assert is_zero_structural(s3)
