"""Shared test helpers: seeded random expression trees and sample boxes."""
from fractions import Fraction

from kesym import Add, Call, Mul, Num, Pow, Sym

# Positive box keeps log/sqrt/fractional powers out of trouble for most
# random trees; overflow and the rare residual domain hit are skipped by
# the callers (with a cap so the tests keep teeth).
POS_BOX = {"x": (0.5, 2.0), "y": (0.5, 2.0), "t": (0.5, 2.0)}

SMOOTH_CALLS = ("sin", "cos", "exp")
ALL_CALLS = ("sin", "cos", "exp", "log", "sqrt")


def random_tree(rng, depth=4, symbols=("x", "y", "t"), calls=SMOOTH_CALLS):
    """Random expression over ``symbols`` with rational leaves."""
    if depth == 0 or rng.random() < 0.25:
        u = rng.random()
        if u < 0.55:
            return Sym(rng.choice(symbols))
        if u < 0.8:
            return Num(rng.randint(-4, 4))
        return Num(Fraction(rng.randint(-6, 6), rng.randint(1, 5)))
    kind = rng.random()
    if kind < 0.35:
        return Add(*[random_tree(rng, depth - 1, symbols, calls)
                     for _ in range(rng.randint(2, 3))])
    if kind < 0.70:
        return Mul(*[random_tree(rng, depth - 1, symbols, calls)
                     for _ in range(rng.randint(2, 3))])
    if kind < 0.85:
        return Pow(random_tree(rng, depth - 1, symbols, calls),
                   Num(rng.choice([-2, -1, 2, 3])))
    return Call(rng.choice(calls),
                random_tree(rng, depth - 1, symbols, calls))
