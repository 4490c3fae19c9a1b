"""Twelve end-to-end acceptance checks, one printed line each.

Every test prints  ``ACCEPT <nn> <PASS|XFAIL> <what was established>``  so a
plain pytest run doubles as a checklist.  Tolerances are pinned in the
asserts.  One strict-xfail companion documents the coupling-exponent variant
the resolver rejects: it prints its line, then asserts the thing that fails.
"""
import math
from fractions import Fraction

import numpy as np
import pytest

from kesym.expr import (Add, Call, MINUS_ONE, Mul, Num, ONE, Pow, Sym, ZERO,
                        differentiate, parse)
from kesym.algebra import classify, structure_constants
from kesym.dynamics import evaluate_on, integrate, monitor
from kesym.jet import (PointGenerator, cartan_generator,
                       determining_equations, is_symmetry,
                       noether_first_integral, symmetry_residual,
                       verify_dynamical)
from kesym.models import (DEFAULT_DOMAIN, KEParams, UnaryFunc, bindings,
                          build_lagrangian, build_system,
                          cartesian_to_polar_state, curl_free_shape,
                          ermakov_invariant, radial_constraint_residual,
                          standard_H, standard_params, to_polar)
from kesym.numeric import max_abs_on
from kesym.sigma import build_generator_family, resolve_sigma_k, sigma_basis
from kesym.simplify import is_zero_structural, simplify

T, X, Y = Sym("t"), Sym("x"), Sym("y")
XD, YD = Sym("xdot"), Sym("ydot")


def _shape(name, body=ONE):
    return UnaryFunc(name, "u", body=body)


def _announce(capsys, n, label, status="PASS"):
    with capsys.disabled():
        print(f"ACCEPT {n:02d} {status} {label}")


def _projective_triple():
    g1 = PointGenerator(Pow(T, Num(2)), {"x": Mul(T, X), "y": Mul(T, Y)},
                        ("x", "y"))
    g2 = PointGenerator(T, {"x": Mul(Num(Fraction(1, 2)), X),
                            "y": Mul(Num(Fraction(1, 2)), Y)}, ("x", "y"))
    g3 = PointGenerator(ONE, {"x": ZERO, "y": ZERO}, ("x", "y"))
    return g1, g2, g3


def _coupled_params(exponent):
    return KEParams(f=_shape("f"), g=_shape("g"),
                    h=curl_free_shape(Num(Fraction(1, 5))),
                    h_exponent=exponent)


@pytest.fixture(scope="module")
def cubic_run():
    """Compatible variational model with a cubic central part, integrated."""
    p = standard_params(C=0.5, C0=0.2, f=_shape("f"), g=_shape("g"))
    system = build_system(p)
    inv = ermakov_invariant(p)
    b = bindings(p, extra_fns=inv.fn_bindings)
    traj = integrate(system, (1.0, 1.0, 0.0, 0.5), 0.0, 20.0,
                     rtol=1e-10, atol=1e-12, bindings=b)
    return p, system, inv, b, traj


# ---------------------------------------------------------------------------
# 1. determining equations


def test_criterion_01_determining_fidelity(capsys):
    system = build_system(standard_params(C=1, C0=1))
    conds = determining_equations(system)
    high = [c for c in conds if sum(c.exponents) >= 2]
    assert len(high) >= 9

    def d2(fn, *wrt):
        e = parse(f"{fn}(t, x, y)")
        for v in wrt:
            e = differentiate(e, v)
        return e

    expected = [
        d2("xi", "x", "x"), d2("xi", "x", "y"), d2("xi", "y", "y"),
        Add(d2("eta1", "x", "x"), Mul(Num(-2), d2("xi", "t", "x"))),
        Add(d2("eta1", "x", "y"), Mul(MINUS_ONE, d2("xi", "t", "y"))),
        Add(d2("eta2", "x", "y"), Mul(MINUS_ONE, d2("xi", "t", "x"))),
        Add(d2("eta2", "y", "y"), Mul(Num(-2), d2("xi", "t", "y"))),
        d2("eta1", "y", "y"), d2("eta2", "x", "x"),
    ]
    scales = [Num(v) for v in (1, -1, 2, -2, Fraction(1, 2),
                               Fraction(-1, 2))]
    matched = set()
    for c in high:
        hit = None
        for i, want in enumerate(expected):
            if any(is_zero_structural(Add(c.coeff, Mul(MINUS_ONE, lam, want)))
                   for lam in scales):
                hit = i
                break
        assert hit is not None, f"unexpected condition: {c.coeff}"
        matched.add(hit)
    assert matched == set(range(9))
    _announce(capsys, 1, "determining equations: velocity-quadratic block "
                         "reproduces the nine reference conditions exactly")


# ---------------------------------------------------------------------------
# 2. projective symmetries of the coupled model


def test_criterion_02_projective_symmetries(capsys):
    p = _coupled_params(1)
    system = build_system(p)
    b = bindings(p)
    for g in _projective_triple():
        rep = is_symmetry(g, system, domain=DEFAULT_DOMAIN, bindings=b,
                          samples=200, tol=1e-10)
        assert rep.passed
        assert rep.max_abs < 1e-10
    _announce(capsys, 2, "projective symmetries (1, t, t^2) with coupling "
                         "exponent 1: residuals structurally zero")


@pytest.mark.xfail(strict=True,
                   reason="with the coupling denominator written over y^2 "
                          "the t and t^2 rescalings are not symmetries; the "
                          "self-test resolves the exponent to 1")
def test_criterion_02_literal_coupling_exponent(capsys):
    _announce(capsys, 2,
              "coupling exponent 2 keeps the projective symmetries",
              status="XFAIL")
    p = _coupled_params(2)
    system = build_system(p)
    b = bindings(p)
    for g in _projective_triple():
        rep = is_symmetry(g, system, domain=DEFAULT_DOMAIN, bindings=b,
                          samples=200, tol=1e-10)
        assert rep.passed


# ---------------------------------------------------------------------------
# 3. constant-frequency family


def test_criterion_03_harmonic_family(capsys):
    p = KEParams(f=_shape("f"), g=_shape("g"),
                 h=curl_free_shape(Num(Fraction(1, 5))), h_exponent=1,
                 w=ONE)
    system = build_system(p)
    b = bindings(p)
    for sigma in sigma_basis(w=ONE):
        gen = build_generator_family(sigma)
        res = symmetry_residual(gen, system)
        worst = max(max_abs_on(res[c], DEFAULT_DOMAIN, samples=200,
                               bindings=b) for c in system.coords)
        assert worst < 1e-10, sigma
    _announce(capsys, 3, "harmonic family (1, cos 2t, sin 2t) at w = 1: "
                         "residuals < 1e-10")


@pytest.mark.xfail(strict=True,
                   reason="with the coupling denominator written over y^2 "
                          "the oscillating rescalings are not symmetries; "
                          "the self-test resolves the exponent to 1")
def test_criterion_03_literal_coupling_exponent(capsys):
    _announce(capsys, 3,
              "coupling exponent 2 keeps the harmonic family",
              status="XFAIL")
    p = KEParams(f=_shape("f"), g=_shape("g"),
                 h=curl_free_shape(Num(Fraction(1, 5))), h_exponent=2,
                 w=ONE)
    system = build_system(p)
    b = bindings(p)
    for sigma in sigma_basis(w=ONE):
        gen = build_generator_family(sigma)
        res = symmetry_residual(gen, system)
        worst = max(max_abs_on(res[c], DEFAULT_DOMAIN, samples=200,
                               bindings=b) for c in system.coords)
        assert worst < 1e-10, sigma


# ---------------------------------------------------------------------------
# 4. commutator tables


def test_criterion_04_commutator_tables(capsys):
    g1, g2, g3 = _projective_triple()
    tab = structure_constants([g1, g2, g3])
    assert tab.bracket_coeffs(2, 1) == (ZERO, ZERO, ONE)       # [G3,G2]=G3
    assert tab.bracket_coeffs(2, 0) == (ZERO, Num(2), ZERO)    # [G3,G1]=2G2
    assert tab.bracket_coeffs(1, 0) == (ONE, ZERO, ZERO)       # [G2,G1]=G1
    assert classify(tab) == "sl2R"

    b = Sym("b")
    up = Call("exp", Mul(b, T))
    dn = Call("exp", Mul(MINUS_ONE, b, T))
    h1 = PointGenerator(up, {"x": Mul(Num(Fraction(1, 2)), b, up, X),
                             "y": Mul(Num(Fraction(1, 2)), b, up, Y)},
                        ("x", "y"))
    h2 = PointGenerator(dn, {"x": Mul(Num(Fraction(-1, 2)), b, dn, X),
                             "y": Mul(Num(Fraction(-1, 2)), b, dn, Y)},
                        ("x", "y"))
    h3 = PointGenerator(Mul(MINUS_ONE, Pow(b, Num(-2))),
                        {"x": ZERO, "y": ZERO}, ("x", "y"))
    et = structure_constants([h1, h2, h3])
    # [G1,G3] = (1/b) G1 and [G3,G2] = (1/b) G2
    c13 = et.bracket_coeffs(0, 2)
    assert is_zero_structural(Add(c13[0], Mul(MINUS_ONE, Pow(b, MINUS_ONE))))
    assert c13[1] == ZERO and c13[2] == ZERO
    c32 = et.bracket_coeffs(2, 1)
    assert is_zero_structural(Add(c32[1], Mul(MINUS_ONE, Pow(b, MINUS_ONE))))
    assert c32[0] == ZERO and c32[2] == ZERO
    # central bracket: the engine derives 2 b^3, not 5/2 b^3
    c12 = et.bracket_coeffs(0, 1)
    assert c12[0] == ZERO and c12[1] == ZERO
    assert is_zero_structural(Add(c12[2], Mul(Num(-2), Pow(b, Num(3)))))
    assert not is_zero_structural(
        Add(c12[2], Mul(Num(Fraction(-5, 2)), Pow(b, Num(3)))))
    assert classify(et, syms={"b": 0.7}) == "sl2R"
    _announce(capsys, 4, "commutator tables: projective triple exact, "
                         "exponential triple central coefficient 2*b^3 "
                         "(5/2*b^3 variant rejected); both classify sl2R")


# ---------------------------------------------------------------------------
# 5. sigma-equation coefficient self-test


def test_criterion_05_sigma_coefficient(capsys):
    r = resolve_sigma_k(C=1.0)
    assert r.winner == Fraction(4, 5)
    assert r.residuals["4C/5"] < 1e-10
    assert r.residuals["C"] > 1e-3
    _announce(capsys, 5, "sigma-equation coefficient self-test: k = (4/5)C "
                         "wins")
    with capsys.disabled():
        for line in r.report().splitlines():
            print(f"          {line}")


# ---------------------------------------------------------------------------
# 6. radial similarity constraint


def test_criterion_06_radial_constraint(capsys):
    flat = _coupled_params(2)
    assert radial_constraint_residual(standard_H(flat)) == ZERO
    cubic = KEParams(f=_shape("f"), g=_shape("g"),
                     h=curl_free_shape(Num(Fraction(1, 5))), h_exponent=2,
                     C=Num(Fraction(1, 2)))
    assert radial_constraint_residual(standard_H(cubic),
                                      C=Num(Fraction(1, 2))) == ZERO
    _announce(capsys, 6, "radial similarity constraint structurally zero "
                         "for both interaction families")


# ---------------------------------------------------------------------------
# 7. conservation on the compatible cubic run


def test_criterion_07_conservation(capsys, cubic_run):
    p, system, inv, b, traj = cubic_run
    L = build_lagrangian(p)
    shift = PointGenerator(ONE, {"x": ZERO, "y": ZERO}, ("x", "y"))
    energy = simplify(noether_first_integral(shift, L))
    rep = monitor(traj, {"I": inv.expr, "E": energy}, b)
    assert rep["I"].drift < 1e-6
    assert rep["E"].drift < 1e-6

    bad = standard_params(C=0.5, C0=0.2, f=_shape("f", body=Sym("u")),
                          g=_shape("g", body=Sym("u")))
    bad_sys = build_system(bad)
    bad_b = bindings(bad)
    bad_E = simplify(noether_first_integral(shift, build_lagrangian(bad)))
    bad_traj = integrate(bad_sys, (1.0, 1.0, 0.0, 0.5), 0.0, 20.0,
                         rtol=1e-10, atol=1e-12, bindings=bad_b)
    assert monitor(bad_traj, {"E": bad_E}, bad_b)["E"].drift > 1e-3
    _announce(capsys, 7, "angular invariant and energy drift < 1e-6 on the "
                         "compatible cubic run; incompatible shapes push "
                         "energy drift past 1e-3")


# ---------------------------------------------------------------------------
# 8. invariant universality


def test_criterion_08_invariant_universality(capsys):
    p = KEParams(f=_shape("f"), g=_shape("g"), w=Call("sin", T),
                 H_override=X)
    system = build_system(p)
    inv = ermakov_invariant(p)
    b = bindings(p, extra_fns=inv.fn_bindings)
    traj = integrate(system, (1.0, 1.0, 0.0, 0.5), 0.0, 20.0,
                     rtol=1e-10, atol=1e-12, bindings=b)
    rep = monitor(traj, {"I": inv.expr}, b)
    assert rep["I"].drift < 1e-6
    _announce(capsys, 8, "angular invariant survives an arbitrary radial "
                         "interaction (H = x) with w = sin t: drift < 1e-6")


# ---------------------------------------------------------------------------
# 9. velocity-space generator from the invariant


def test_criterion_09_cartan_reconstruction(capsys, cubic_run):
    p, system, inv, b, _ = cubic_run
    L = build_lagrangian(p)
    gen = cartan_generator(inv.expr, L, system)
    ang = Add(Mul(X, YD), Mul(MINUS_ONE, XD, Y))
    assert gen.xi == ZERO
    assert is_zero_structural(Add(gen.etas[0], Mul(MINUS_ONE, Y, ang)))
    assert is_zero_structural(Add(gen.etas[1], Mul(X, ang)))
    rep = verify_dynamical(gen, inv.expr, system, L=L,
                           derivative_rules=inv.derivative_rules,
                           domain=DEFAULT_DOMAIN, bindings=b)
    assert rep.passed
    _announce(capsys, 9, "velocity-space generator rebuilt from the "
                         "invariant matches (y, -x) * angular momentum and "
                         "verifies dynamically")


# ---------------------------------------------------------------------------
# 10. time-translation first integral


def test_criterion_10_noether_energy(capsys, cubic_run):
    exact = KEParams(f=_shape("f"), g=_shape("g"),
                     h=curl_free_shape(Num(Fraction(1, 5))),
                     C=Num(Fraction(1, 2)), h_exponent=2)
    L = build_lagrangian(exact)
    shift = PointGenerator(ONE, {"x": ZERO, "y": ZERO}, ("x", "y"))
    E = simplify(noether_first_integral(shift, L))
    r2 = Add(Pow(X, Num(2)), Pow(Y, Num(2)))
    want = Add(
        Mul(Num(Fraction(1, 2)), Add(Pow(XD, Num(2)), Pow(YD, Num(2)))),
        Mul(Num(Fraction(1, 20)), r2),
        Mul(Num(Fraction(1, 15)), Pow(r2, Num(Fraction(-3, 2)))),
        Mul(Num(Fraction(1, 2)), Pow(X, Num(-2)), parse("f(y*x^(-1))")),
        Mul(Num(Fraction(1, 2)), Pow(Y, Num(-2)), parse("g(y*x^(-1))")))
    assert is_zero_structural(Add(E, Mul(MINUS_ONE, want)))

    p, system, inv, b, traj = cubic_run
    energy = simplify(noether_first_integral(shift, build_lagrangian(p)))
    assert monitor(traj, {"E": energy}, b)["E"].drift < 1e-6
    _announce(capsys, 10, "time-translation first integral equals kinetic "
                          "plus potential energy structurally; drift < 1e-6")


# ---------------------------------------------------------------------------
# 11. nonlinear-oscillator reduction


def test_criterion_11_pinney_reduction(capsys):
    from kesym.sigma import pinney_reduction
    red = pinney_reduction(w=ONE, c2=ONE)
    traj = integrate(red.system, (2.0, 0.0), 0.0, 20.0,
                     rtol=1e-10, atol=1e-12)
    fi = evaluate_on(traj, red.first_integral)
    drift = float(np.abs(fi - fi[0]).max()) / (1.0 + abs(float(fi[0])))
    assert drift < 1e-8
    _announce(capsys, 11, "nonlinear-oscillator reduction: first-integral "
                          "drift < 1e-8 over the full window")


# ---------------------------------------------------------------------------
# 12. polar equivalence


def test_criterion_12_polar_equivalence(capsys):
    p = standard_params(C=0.5, C0=0.2, f=_shape("f"), g=_shape("g"))
    system = build_system(p)
    inv = ermakov_invariant(p)
    b = bindings(p, extra_fns=inv.fn_bindings)
    init = (1.0, 1.0, 0.0, 0.3)
    cart = integrate(system, init, 0.0, 5.0, rtol=1e-10, atol=1e-12,
                     bindings=b)

    pol = to_polar(p)
    bp = bindings(p, extra_fns=pol.invariant.fn_bindings)
    polar = integrate(pol.system, cartesian_to_polar_state(init), 0.0, 5.0,
                      rtol=1e-10, atol=1e-12, bindings=bp)

    xe, ye = cart.states[-1][:2]
    assert abs(math.hypot(xe, ye) - polar.column("r")[-1]) < 1e-7
    assert abs(math.atan2(ye, xe) - polar.column("theta")[-1]) < 1e-7

    i_cart = evaluate_on(cart, inv.expr, b)
    i_polar = evaluate_on(polar, pol.invariant.expr, bp)
    assert float(np.abs(i_cart - i_polar).max()) < 1e-8
    _announce(capsys, 12, "polar and Cartesian runs agree: coordinates "
                          "< 1e-7 at the endpoint, invariants < 1e-8 "
                          "throughout")
