"""Structural simplification, expansion, and polynomial collection.

``simplify`` is best-effort and idempotent, not a canonical form: it folds
constants, flattens nested sums/products, merges like terms and like bases,
and applies safe power/call rewrites.  It never distributes products over
sums; ``expand`` does that when a zero-proof needs it.
"""
from __future__ import annotations

import math
from fractions import Fraction

from .expr import (Add, Call, Expr, ExprError, Fn, Mul, Num, Pow, Sym,
                   HALF, MINUS_ONE, ONE, free_symbols)


class NonPolynomialError(ExprError):
    """Raised when an expression is not polynomial in the requested symbols."""


class NonElementaryAntiderivative(ExprError):
    """Raised when the power-rule integrator meets a non-Laurent term."""


# --------------------------------------------------------------------------
# Canonical ordering

_RANK = {Num: 0, Sym: 1, Pow: 2, Call: 3, Fn: 4, Mul: 5, Add: 6}


def sort_key(e: Expr):
    """Total, deterministic order over expression trees."""
    if isinstance(e, Num):
        return (0, not e.is_exact, float(e.value), str(e.value))
    if isinstance(e, Sym):
        return (1, e.name)
    if isinstance(e, Pow):
        return (2, sort_key(e.base), sort_key(e.exp))
    if isinstance(e, Call):
        return (3, e.fn, sort_key(e.arg))
    if isinstance(e, Fn):
        return (4, e.name, e.orders, tuple(sort_key(a) for a in e.fnargs))
    if isinstance(e, Mul):
        return (5, tuple(sort_key(a) for a in e.args))
    if isinstance(e, Add):
        return (6, tuple(sort_key(a) for a in e.args))
    raise TypeError(f"no sort key for {type(e)}")


# --------------------------------------------------------------------------
# Constant folding helpers


def _fold_pow(b: Num, p: Num):
    """Exact/real constant power, or None when it must stay symbolic."""
    bv, pv = b.value, p.value
    if not b.is_exact or not p.is_exact:
        bf, pf = float(bv), float(pv)
        if bf == 0.0 and pf <= 0.0:
            return None
        if bf < 0.0 and pf != int(pf):
            return None
        try:
            return Num(math.pow(bf, pf))
        except (OverflowError, ValueError):
            return None
    if pv.denominator == 1:
        n = int(pv)
        if bv == 0 and n <= 0:
            return None
        return Num(bv ** n)
    if bv < 0:
        return None  # fractional power of a negative rational: stay symbolic
    if bv == 0:
        return Num(Fraction(0)) if pv > 0 else None
    rn = _iroot(bv.numerator, pv.denominator)
    rd = _iroot(bv.denominator, pv.denominator)
    if rn is None or rd is None:
        return None  # not a perfect root: keep 2^(1/2) exact-symbolic
    return Num(Fraction(rn, rd) ** pv.numerator)


def _iroot(n: int, k: int):
    if n == 0:
        return 0
    r = round(n ** (1.0 / k))
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand ** k == n:
            return cand
    return None


_CALL_EXACT = {
    ("sin", Fraction(0)): Num(0),
    ("cos", Fraction(0)): Num(1),
    ("exp", Fraction(0)): Num(1),
    ("log", Fraction(1)): Num(0),
}

_CALL_FLOAT = {"sin": math.sin, "cos": math.cos, "exp": math.exp,
               "log": math.log}


# --------------------------------------------------------------------------
# simplify


def simplify(e: Expr) -> Expr:
    if isinstance(e, (Num, Sym)):
        return e
    if isinstance(e, Add):
        return _simplify_add([simplify(a) for a in e.args])
    if isinstance(e, Mul):
        return _simplify_mul([simplify(a) for a in e.args])
    if isinstance(e, Pow):
        return _make_pow(simplify(e.base), simplify(e.exp))
    if isinstance(e, Call):
        return _make_call(e.fn, simplify(e.arg))
    if isinstance(e, Fn):
        return Fn(e.name, e.orders, [simplify(a) for a in e.fnargs])
    raise TypeError(f"cannot simplify {type(e)}")


def _simplify_add(terms: list) -> Expr:
    flat = []
    for t in terms:
        if isinstance(t, Add):
            flat.extend(t.args)
        else:
            flat.append(t)

    const = Fraction(0)
    const_exact = True
    buckets: dict[tuple, object] = {}   # rest-factors tuple -> coefficient
    order: list[tuple] = []
    for t in flat:
        if isinstance(t, Num):
            v = t.value
            if isinstance(v, float):
                const = float(const) + v
                const_exact = False
            else:
                const = const + v if const_exact else const + float(v)
            continue
        if isinstance(t, Mul) and isinstance(t.args[0], Num):
            coeff = t.args[0].value
            rest = t.args[1:]
        elif isinstance(t, Mul):
            coeff = Fraction(1)
            rest = t.args
        else:
            coeff = Fraction(1)
            rest = (t,)
        if rest in buckets:
            prev = buckets[rest]
            if isinstance(prev, float) or isinstance(coeff, float):
                buckets[rest] = float(prev) + float(coeff)
            else:
                buckets[rest] = prev + coeff
        else:
            buckets[rest] = coeff
            order.append(rest)

    out = []
    for rest in sorted(order, key=lambda r: tuple(sort_key(f) for f in r)):
        c = buckets[rest]
        if c == 0:
            continue
        if c == 1 and not isinstance(c, float):
            out.append(rest[0] if len(rest) == 1 else Mul(*rest))
        else:
            out.append(Mul(Num(c if isinstance(c, float) else Fraction(c)),
                           *rest))
    if const != 0:
        cnode = Num(const if const_exact else float(const))
        out.append(cnode)
    if not out:
        return Num(Fraction(0)) if const_exact else Num(0.0)
    if len(out) == 1:
        return out[0]
    return Add(*out)


def _simplify_mul(factors: list) -> Expr:
    # Iterate: collection can produce new Mul/Num parts (e.g. distributing an
    # integer power over a product), which must be flattened again.
    for _ in range(8):
        flat = []
        changed = False
        for f in factors:
            if isinstance(f, Mul):
                flat.extend(f.args)
                changed = True
            else:
                flat.append(f)

        coeff = Fraction(1)
        coeff_exact = True
        powers: dict[Expr, list] = {}   # base -> list of exponent Exprs
        order: list[Expr] = []
        for f in flat:
            if isinstance(f, Num):
                v = f.value
                if isinstance(v, float):
                    coeff = float(coeff) * v
                    coeff_exact = False
                else:
                    coeff = coeff * v if coeff_exact else coeff * float(v)
                continue
            base, ex = (f.base, f.exp) if isinstance(f, Pow) else (f, ONE)
            if base in powers:
                powers[base].append(ex)
            else:
                powers[base] = [ex]
                order.append(base)

        if coeff == 0:
            return Num(Fraction(0)) if coeff_exact else Num(0.0)

        # exp(a)^p * exp(b)^q = exp(p*a + q*b): fold all exponential factors
        # into one (valid unconditionally over the reals).
        exp_bases = [b for b in order if isinstance(b, Call) and b.fn == "exp"]
        if exp_bases and (len(exp_bases) > 1
                          or powers[exp_bases[0]] != [ONE]):
            contribs = []
            for b in exp_bases:
                exps = powers.pop(b)
                total = exps[0] if len(exps) == 1 else _simplify_add(exps)
                contribs.append(b.arg if total == ONE
                                else _simplify_mul([b.arg, total]))
            order = [b for b in order
                     if not (isinstance(b, Call) and b.fn == "exp")]
            combined = (contribs[0] if len(contribs) == 1
                        else _simplify_add(contribs))
            folded = _make_call("exp", combined)
            if folded in powers:
                powers[folded].append(ONE)
            else:
                powers[folded] = [ONE]
                order.append(folded)

        parts = []
        for base in order:
            exps = powers[base]
            total = exps[0] if len(exps) == 1 else _simplify_add(exps)
            p = _make_pow(base, total)
            if isinstance(p, Num):
                v = p.value
                if isinstance(v, float):
                    coeff = float(coeff) * v
                    coeff_exact = False
                else:
                    coeff = coeff * v if coeff_exact else coeff * float(v)
            elif p != ONE:
                parts.append(p)
                if isinstance(p, Mul):
                    changed = True

        if not changed or not parts:
            parts.sort(key=sort_key)
            if coeff == 0:
                return Num(Fraction(0)) if coeff_exact else Num(0.0)
            cnode = Num(coeff if coeff_exact else float(coeff))
            if not parts:
                return cnode
            if cnode != ONE:
                parts.insert(0, cnode)
            return parts[0] if len(parts) == 1 else Mul(*parts)

        factors = parts
        if coeff != 1 or not coeff_exact:
            factors = [Num(coeff if coeff_exact else float(coeff))] + factors
    raise AssertionError("product simplification did not stabilize")


def _make_pow(b: Expr, p: Expr) -> Expr:
    if isinstance(p, Num):
        if p.value == 0:
            return ONE   # includes 0^0 -> 1 convention
        if p.value == 1 and p.is_exact:
            return b
    if isinstance(b, Num) and isinstance(p, Num):
        folded = _fold_pow(b, p)
        if folded is not None:
            return folded
        return Pow(b, p)
    if b == ONE:
        return ONE
    if isinstance(b, Num) and b.value == 0:
        if isinstance(p, Num) and p.value > 0:
            return b
        return Pow(b, p)
    if isinstance(b, Call) and b.fn == "exp":
        # exp(a)^p = exp(p*a), unconditionally valid over the reals.
        return _make_call("exp", _simplify_mul([b.arg, p]))
    is_int = isinstance(p, Num) and p.is_exact and p.value.denominator == 1
    if isinstance(b, Pow) and is_int:
        # (u^q)^n = u^(q*n) for integer n, unconditionally valid.
        return _make_pow(b.base, _simplify_mul([b.exp, p]))
    if isinstance(b, Mul):
        if is_int:
            return _simplify_mul([_make_pow(f, p) for f in b.args])
        head = b.args[0]
        if (isinstance(p, Num) and isinstance(head, Num) and head.is_exact
                and head.value > 0):
            root = _fold_pow(head, p)
            if root is not None:
                rest = b.args[1] if len(b.args) == 2 else Mul(*b.args[1:])
                return _simplify_mul([root, Pow(rest, p)])
    return Pow(b, p)


def _make_call(fn: str, a: Expr) -> Expr:
    if fn == "sqrt":
        return _make_pow(a, HALF)
    if isinstance(a, Num):
        if a.is_exact:
            hit = _CALL_EXACT.get((fn, a.value))
            if hit is not None:
                return hit
        else:
            v = a.value
            if fn == "log" and v <= 0.0:
                return Call(fn, a)
            return Num(_CALL_FLOAT[fn](v))
    return Call(fn, a)


# --------------------------------------------------------------------------
# expand


def expand(e: Expr) -> Expr:
    """Distribute products/integer powers over sums, then simplify."""
    return simplify(_expand(simplify(e)))


def _expand(e: Expr) -> Expr:
    if isinstance(e, (Num, Sym)):
        return e
    if isinstance(e, Add):
        return Add(*[_expand(a) for a in e.args])
    if isinstance(e, Mul):
        return _distribute([_expand(a) for a in e.args])
    if isinstance(e, Pow):
        base = _expand(e.base)
        if (isinstance(e.exp, Num) and e.exp.is_exact
                and e.exp.value.denominator == 1 and e.exp.value >= 2
                and isinstance(base, (Add, Mul))):
            n = int(e.exp.value)
            if _poly_size(base) ** n <= 20000:
                return _distribute([base] * n)
        return Pow(base, e.exp)
    if isinstance(e, Call):
        return Call(e.fn, _expand(e.arg))
    if isinstance(e, Fn):
        return Fn(e.name, e.orders, [_expand(a) for a in e.fnargs])
    raise TypeError(f"cannot expand {type(e)}")


def _poly_size(e: Expr) -> int:
    return len(e.args) if isinstance(e, Add) else 1


def _addends(f: Expr) -> list:
    # Raw Add nodes don't flatten on construction, and _expand can return
    # Adds of Adds; distribution must see every leaf term.
    if isinstance(f, Add):
        out = []
        for a in f.args:
            out.extend(_addends(a))
        return out
    return [f]


def _distribute(factors: list) -> Expr:
    combos: list[list] = [[]]
    for f in factors:
        combos = [c + [a] for c in combos for a in _addends(f)]
    terms = [c[0] if len(c) == 1 else Mul(*c) for c in combos]
    return terms[0] if len(terms) == 1 else Add(*terms)


def is_zero_structural(e: Expr) -> bool:
    """True when simplification (with expansion) proves e == 0.

    Three stages: simplify, expand, then collect terms sharing the same
    irrational/opaque factors (fractional powers, calls, opaque functions)
    and prove each polynomial cofactor zero by expansion.  False means
    "not proven": callers fall back to numeric equivalence.
    """
    s = simplify(e)
    if isinstance(s, Num) and s.value == 0:
        return True
    s = expand(s)
    if isinstance(s, Num) and s.value == 0:
        return True
    return _factor_groups_vanish(s)


def _split_factor(fac):
    """Classify one multiplicand for the factor-group zero test.

    Returns (kind, payload): ("num", value) for exact constants,
    ("int", (base, n)) for an exact-rational power folded to base^n with
    integer n plus an optional fractional layer appended to the key, or
    ("key", node) for anything opaque.  Fractional layers come back as a
    second element: (kind, payload, key_node_or_None).
    """
    if isinstance(fac, Num):
        return ("num", fac, None)
    if isinstance(fac, Sym):
        return ("int", (fac, 1), None)
    if isinstance(fac, Pow) and isinstance(fac.exp, Num) and fac.exp.is_exact:
        p = Fraction(fac.exp.value)
        n = math.floor(p)
        frac = p - n
        key = Pow(fac.base, Num(frac)) if frac else None
        return ("int", (fac.base, n), key)
    return ("key", fac, None)


def _factor_groups_vanish(e: Expr) -> bool:
    """Group additive terms by their non-polynomial factors; each group's
    rational cofactor (shifted to clear negative powers) must expand to 0."""
    terms = e.args if isinstance(e, Add) else (e,)
    groups = {}
    for term in terms:
        factors = term.args if isinstance(term, Mul) else (term,)
        key_parts = []
        ints = {}
        const = ONE
        for fac in factors:
            kind, payload, key_extra = _split_factor(fac)
            if key_extra is not None:
                key_parts.append(key_extra)
            if kind == "num":
                const = Mul(const, payload)
            elif kind == "int":
                base, n = payload
                if n:
                    ints[base] = ints.get(base, 0) + n
            else:
                key_parts.append(payload)
        key = tuple(sorted(key_parts, key=sort_key))
        groups.setdefault(key, []).append((ints, const))
    for entries in groups.values():
        bases = set()
        for ints, _ in entries:
            bases.update(ints)
        shift = {b: min(ints.get(b, 0) for ints, _ in entries) for b in bases}
        parts = []
        for ints, const in entries:
            fs = [const]
            for b in bases:
                n = ints.get(b, 0) - shift[b]
                if n:
                    fs.append(Pow(b, Num(n)))
            parts.append(Mul(*fs) if len(fs) > 1 else fs[0])
        total = expand(parts[0] if len(parts) == 1 else Add(*parts))
        if not (isinstance(total, Num) and total.value == 0):
            return False
    return True


def structurally_equal(e1: Expr, e2: Expr) -> bool:
    """True when simplify maps both to the same tree, or their difference
    expands to zero."""
    a, b = simplify(e1), simplify(e2)
    if a == b:
        return True
    return is_zero_structural(Add(a, Mul(MINUS_ONE, b)))


# --------------------------------------------------------------------------
# Polynomial collection


def collect_poly(e: Expr, symbols) -> dict:
    """Coefficients of e as a polynomial in ``symbols``.

    Returns {exponent vector: coefficient Expression}; coefficients are free
    of the collected symbols.  Raises NonPolynomialError on non-polynomial
    dependence (negative/fractional powers, symbols inside calls).
    """
    names = tuple(s.name if isinstance(s, Sym) else str(s) for s in symbols)
    poly = _to_poly(simplify(e), names)
    out = {}
    for exps, parts in poly.items():
        c = simplify(parts[0] if len(parts) == 1 else Add(*parts))
        if isinstance(c, Num) and c.value == 0:
            continue
        out[exps] = c
    return out


def _depends(e: Expr, names) -> bool:
    fs = free_symbols(e)
    return any(n in fs for n in names)


def _to_poly(e: Expr, names) -> dict:
    zero = (0,) * len(names)
    if not _depends(e, names):
        return {zero: [e]}
    if isinstance(e, Sym):
        vec = tuple(1 if n == e.name else 0 for n in names)
        return {vec: [ONE]}
    if isinstance(e, Add):
        out: dict = {}
        for t in e.args:
            for k, parts in _to_poly(t, names).items():
                out.setdefault(k, []).extend(parts)
        return out
    if isinstance(e, Mul):
        acc = {zero: [ONE]}
        for f in e.args:
            acc = _poly_mul(acc, _to_poly(f, names), len(names))
        return acc
    if isinstance(e, Pow):
        if _depends(e.exp, names):
            raise NonPolynomialError(f"symbol in exponent: {e}")
        if not (isinstance(e.exp, Num) and e.exp.is_exact
                and e.exp.value.denominator == 1 and e.exp.value >= 0):
            raise NonPolynomialError(f"non-polynomial power: {e}")
        n = int(e.exp.value)
        acc = {zero: [ONE]}
        base = _to_poly(e.base, names)
        for _ in range(n):
            acc = _poly_mul(acc, base, len(names))
        return acc
    # Calls/opaque calls with a collected symbol inside are non-polynomial.
    raise NonPolynomialError(f"non-polynomial dependence: {e}")


def _poly_mul(p1: dict, p2: dict, width: int) -> dict:
    out: dict = {}
    for k1, parts1 in p1.items():
        e1 = parts1[0] if len(parts1) == 1 else Add(*parts1)
        for k2, parts2 in p2.items():
            e2 = parts2[0] if len(parts2) == 1 else Add(*parts2)
            k = tuple(k1[i] + k2[i] for i in range(width))
            out.setdefault(k, []).append(Mul(e1, e2))
    return out


# --------------------------------------------------------------------------
# Power-rule antiderivative (Laurent terms only)


def antiderivative_power(e: Expr, var) -> Expr:
    """Antiderivative of a Laurent polynomial in ``var`` (rational exponents
    allowed); the k = -1 term integrates to log(var).

    Raises NonElementaryAntiderivative when any term is not coeff * var^k
    with a constant k and var-free coefficient.
    """
    name = var.name if isinstance(var, Sym) else str(var)
    ee = expand(e)
    terms = ee.args if isinstance(ee, Add) else (ee,)
    out = []
    for t in terms:
        coeff_parts = []
        k = Fraction(0)
        factors = t.args if isinstance(t, Mul) else (t,)
        for f in factors:
            if isinstance(f, Sym) and f.name == name:
                k += 1
            elif (isinstance(f, Pow) and isinstance(f.base, Sym)
                  and f.base.name == name and isinstance(f.exp, Num)
                  and f.exp.is_exact):
                k += f.exp.value
            elif name in free_symbols(f):
                raise NonElementaryAntiderivative(
                    f"term not a power of {name}: {t}")
            else:
                coeff_parts.append(f)
        coeff = Mul(*coeff_parts) if len(coeff_parts) > 1 else (
            coeff_parts[0] if coeff_parts else ONE)
        v = Sym(name)
        if k == -1:
            out.append(Mul(coeff, Call("log", v)))
        else:
            out.append(Mul(coeff, Num(Fraction(1) / (k + 1)),
                           Pow(v, Num(k + 1))))
    return simplify(Add(*out) if len(out) > 1 else out[0])
