"""Immutable symbolic expression trees.

Node kinds: exact/real constants (Num), symbols (Sym), n-ary sums (Add) and
products (Mul), powers (Pow), elementary calls (Call: sin, cos, exp, log,
sqrt), and opaque calls (Fn) carrying a per-argument derivative multi-index.

Design notes:

* Integer and fraction literals are exact (fractions.Fraction); a constant is
  real (float) only when the source text carries a decimal point or exponent
  marker.  Mixed arithmetic contaminates to float, as usual.
* Unary minus is represented as Mul(-1, e); there is no dedicated node.
* ``xdot``/``ydot`` etc. are ordinary independent symbols; the total time
  derivative lives in :mod:`kesym.jet`, not here.
* Trees are immutable; every transformation returns a new tree.  Structural
  equality and hashing are by value.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Union

Number = Union[int, float, Fraction]

ELEMENTARY = ("sin", "cos", "exp", "log", "sqrt")


class ExprError(Exception):
    """Base class for expression-layer errors."""


class ParseError(ExprError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at offset {pos})")
        self.pos = pos


def _coerce(value) -> "Expr":
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, Fraction)):
        return Num(Fraction(value))
    if isinstance(value, float):
        return Num(value)
    raise TypeError(f"cannot treat {value!r} as an expression")


class Expr:
    """Base node.  Subclasses are value types: compare and hash structurally."""

    __slots__ = ("_hash",)

    def _key(self):
        raise NotImplementedError

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other):
            return NotImplemented if not isinstance(other, Expr) else False
        return self._key() == other._key()

    def __hash__(self):
        h = getattr(self, "_hash", None)
        if h is None:
            h = hash((type(self).__name__, self._key()))
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self):
        return f"{type(self).__name__}({to_str(self)!r})"

    def __str__(self):
        return to_str(self)

    # Arithmetic sugar.  Construction is literal; no simplification happens
    # here (see kesym.simplify).
    def __add__(self, other):
        return Add(self, _coerce(other))

    def __radd__(self, other):
        return Add(_coerce(other), self)

    def __sub__(self, other):
        return Add(self, Mul(Num(-1), _coerce(other)))

    def __rsub__(self, other):
        return Add(_coerce(other), Mul(Num(-1), self))

    def __mul__(self, other):
        return Mul(self, _coerce(other))

    def __rmul__(self, other):
        return Mul(_coerce(other), self)

    def __truediv__(self, other):
        return Mul(self, Pow(_coerce(other), Num(-1)))

    def __rtruediv__(self, other):
        return Mul(_coerce(other), Pow(self, Num(-1)))

    def __pow__(self, other):
        return Pow(self, _coerce(other))

    def __neg__(self):
        return Mul(Num(-1), self)


class Num(Expr):
    """Constant: Fraction (exact) or float (real)."""

    __slots__ = ("value",)

    def __init__(self, value: Number):
        if isinstance(value, bool):
            raise TypeError("bool is not a number")
        if isinstance(value, int):
            value = Fraction(value)
        elif not isinstance(value, (Fraction, float)):
            raise TypeError(f"Num takes int/Fraction/float, not {type(value)}")
        object.__setattr__(self, "value", value)

    def __setattr__(self, *_):
        raise AttributeError("expressions are immutable")

    @property
    def is_exact(self) -> bool:
        return isinstance(self.value, Fraction)

    def _key(self):
        # Fraction(1) == 1.0 under ==, but exact 1 and real 1.0 are distinct
        # trees; include exactness in the identity.
        return (self.is_exact, self.value)


class Sym(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        if not name or not (name[0].isalpha() or name[0] == "_"):
            raise ValueError(f"bad symbol name {name!r}")
        object.__setattr__(self, "name", name)

    def __setattr__(self, *_):
        raise AttributeError("expressions are immutable")

    def _key(self):
        return self.name


class _Nary(Expr):
    __slots__ = ("args",)

    def __init__(self, *args):
        if len(args) < 2:
            raise ValueError(f"{type(self).__name__} needs at least 2 operands")
        object.__setattr__(self, "args", tuple(_coerce(a) for a in args))

    def __setattr__(self, *_):
        raise AttributeError("expressions are immutable")

    def _key(self):
        return self.args


class Add(_Nary):
    __slots__ = ()


class Mul(_Nary):
    __slots__ = ()


class Pow(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base, exp):
        object.__setattr__(self, "base", _coerce(base))
        object.__setattr__(self, "exp", _coerce(exp))

    def __setattr__(self, *_):
        raise AttributeError("expressions are immutable")

    def _key(self):
        return (self.base, self.exp)


class Call(Expr):
    """Elementary function call (sin, cos, exp, log, sqrt)."""

    __slots__ = ("fn", "arg")

    def __init__(self, fn: str, arg):
        if fn not in ELEMENTARY:
            raise ValueError(f"unknown elementary function {fn!r}")
        object.__setattr__(self, "fn", fn)
        object.__setattr__(self, "arg", _coerce(arg))

    def __setattr__(self, *_):
        raise AttributeError("expressions are immutable")

    def _key(self):
        return (self.fn, self.arg)


class Fn(Expr):
    """Opaque function call with a derivative multi-index.

    ``orders[i]`` is how many times the function has been differentiated with
    respect to its i-th argument slot.  The common case is a unary function
    (one argument, one order): f(u), f'(u), f''(u).  Multi-argument calls are
    used for the generic unknowns of determining-equation extraction.
    """

    __slots__ = ("name", "orders", "fnargs")

    def __init__(self, name: str, orders: Iterable[int], args: Iterable):
        orders = tuple(int(k) for k in orders)
        args = tuple(_coerce(a) for a in args)
        if len(orders) != len(args):
            raise ValueError("orders and args must have the same length")
        if not args:
            raise ValueError("opaque call needs at least one argument")
        if any(k < 0 for k in orders):
            raise ValueError("derivative orders must be nonnegative")
        if name in ELEMENTARY:
            raise ValueError(f"{name!r} is elementary, not opaque")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "orders", orders)
        object.__setattr__(self, "fnargs", args)

    def __setattr__(self, *_):
        raise AttributeError("expressions are immutable")

    def _key(self):
        return (self.name, self.orders, self.fnargs)


ZERO = Num(0)
ONE = Num(1)
MINUS_ONE = Num(-1)
HALF = Num(Fraction(1, 2))


def opaque(name: str, *args) -> Fn:
    """Order-zero opaque call: opaque("f", u) is f(u)."""
    return Fn(name, (0,) * len(args), args)


def sqrt(e) -> Call:
    return Call("sqrt", e)


def free_symbols(e: Expr) -> frozenset:
    """Names of all symbols appearing in e (inside opaque arguments too)."""
    out = set()
    _walk_symbols(e, out)
    return frozenset(out)


def _walk_symbols(e: Expr, out: set):
    if isinstance(e, Sym):
        out.add(e.name)
    elif isinstance(e, (Add, Mul)):
        for a in e.args:
            _walk_symbols(a, out)
    elif isinstance(e, Pow):
        _walk_symbols(e.base, out)
        _walk_symbols(e.exp, out)
    elif isinstance(e, Call):
        _walk_symbols(e.arg, out)
    elif isinstance(e, Fn):
        for a in e.fnargs:
            _walk_symbols(a, out)


def free_functions(e: Expr) -> frozenset:
    """Names of all opaque functions appearing in e."""
    out = set()
    _walk_functions(e, out)
    return frozenset(out)


def _walk_functions(e: Expr, out: set):
    if isinstance(e, (Add, Mul)):
        for a in e.args:
            _walk_functions(a, out)
    elif isinstance(e, Pow):
        _walk_functions(e.base, out)
        _walk_functions(e.exp, out)
    elif isinstance(e, Call):
        _walk_functions(e.arg, out)
    elif isinstance(e, Fn):
        out.add(e.name)
        for a in e.fnargs:
            _walk_functions(a, out)


def contains_symbol(e: Expr, name: str) -> bool:
    return name in free_symbols(e)


# --------------------------------------------------------------------------
# Differentiation


def differentiate(e: Expr, s) -> Expr:
    """Exact partial derivative of e with respect to symbol s.

    Opaque calls chain: d/dx f(u) = f'(u) * u_x, with the derivative order of
    the corresponding argument slot incremented.  The result is simplified.
    """
    from .simplify import simplify

    name = s.name if isinstance(s, Sym) else str(s)
    return simplify(_diff(e, name))


def _diff(e: Expr, s: str) -> Expr:
    if isinstance(e, Num):
        return ZERO
    if isinstance(e, Sym):
        return ONE if e.name == s else ZERO
    if isinstance(e, Add):
        return Add(*[_diff(a, s) for a in e.args])
    if isinstance(e, Mul):
        terms = []
        args = e.args
        for i in range(len(args)):
            di = _diff(args[i], s)
            if di == ZERO:
                continue
            rest = args[:i] + args[i + 1:]
            terms.append(Mul(di, *rest) if rest else di)
        if not terms:
            return ZERO
        return terms[0] if len(terms) == 1 else Add(*terms)
    if isinstance(e, Pow):
        db = _diff(e.base, s)
        de = _diff(e.exp, s)
        if de == ZERO:
            if db == ZERO:
                return ZERO
            # d b^p = p * b^(p-1) * db
            return Mul(e.exp, Pow(e.base, Add(e.exp, MINUS_ONE)), db)
        if db == ZERO:
            # d a^e = a^e * log(a) * de
            return Mul(e, Call("log", e.base), de)
        return Mul(e, Add(Mul(de, Call("log", e.base)),
                          Mul(e.exp, db, Pow(e.base, MINUS_ONE))))
    if isinstance(e, Call):
        da = _diff(e.arg, s)
        if da == ZERO:
            return ZERO
        u = e.arg
        outer = {
            "sin": lambda: Call("cos", u),
            "cos": lambda: Mul(MINUS_ONE, Call("sin", u)),
            "exp": lambda: e,
            "log": lambda: Pow(u, MINUS_ONE),
            "sqrt": lambda: Mul(HALF, Pow(u, Num(Fraction(-1, 2)))),
        }[e.fn]()
        return Mul(outer, da)
    if isinstance(e, Fn):
        terms = []
        for i, a in enumerate(e.fnargs):
            da = _diff(a, s)
            if da == ZERO:
                continue
            orders = list(e.orders)
            orders[i] += 1
            terms.append(Mul(Fn(e.name, orders, e.fnargs), da))
        if not terms:
            return ZERO
        return terms[0] if len(terms) == 1 else Add(*terms)
    raise TypeError(f"cannot differentiate {type(e)}")


# --------------------------------------------------------------------------
# Substitution


def substitute(e: Expr, mapping: dict) -> Expr:
    """Simultaneous substitution of symbols by expressions.

    Keys may be Sym or str; values anything coercible to Expr.
    """
    table = {}
    for k, v in mapping.items():
        name = k.name if isinstance(k, Sym) else str(k)
        table[name] = _coerce(v)
    return _subst(e, table)


def _subst(e: Expr, table: dict) -> Expr:
    if isinstance(e, Num):
        return e
    if isinstance(e, Sym):
        return table.get(e.name, e)
    if isinstance(e, Add):
        return Add(*[_subst(a, table) for a in e.args])
    if isinstance(e, Mul):
        return Mul(*[_subst(a, table) for a in e.args])
    if isinstance(e, Pow):
        return Pow(_subst(e.base, table), _subst(e.exp, table))
    if isinstance(e, Call):
        return Call(e.fn, _subst(e.arg, table))
    if isinstance(e, Fn):
        return Fn(e.name, e.orders, [_subst(a, table) for a in e.fnargs])
    raise TypeError(f"cannot substitute in {type(e)}")


def substitute_function(e: Expr, name: str, params, body: Expr) -> Expr:
    """Replace every opaque call to ``name`` by a closed-form body.

    ``params`` is the parameter name (str) for a unary function or a sequence
    of names matching the call's argument count.  Derivative orders are
    honored by differentiating the body before substituting the arguments.
    """
    if isinstance(params, str):
        params = (params,)
    params = tuple(params)
    cache: dict[tuple, Expr] = {(0,) * len(params): _coerce(body)}
    return _subst_fn(e, name, params, cache)


def _derived_body(orders, params, cache):
    if orders in cache:
        return cache[orders]
    # Walk down one derivative at a time so intermediate bodies get cached.
    for i, k in enumerate(orders):
        if k > 0:
            lower = orders[:i] + (k - 1,) + orders[i + 1:]
            base = _derived_body(lower, params, cache)
            out = differentiate(base, params[i])
            cache[orders] = out
            return out
    raise AssertionError("unreachable")


def _subst_fn(e: Expr, name: str, params, cache) -> Expr:
    if isinstance(e, (Num, Sym)):
        return e
    if isinstance(e, Add):
        return Add(*[_subst_fn(a, name, params, cache) for a in e.args])
    if isinstance(e, Mul):
        return Mul(*[_subst_fn(a, name, params, cache) for a in e.args])
    if isinstance(e, Pow):
        return Pow(_subst_fn(e.base, name, params, cache),
                   _subst_fn(e.exp, name, params, cache))
    if isinstance(e, Call):
        return Call(e.fn, _subst_fn(e.arg, name, params, cache))
    if isinstance(e, Fn):
        args = [_subst_fn(a, name, params, cache) for a in e.fnargs]
        if e.name != name:
            return Fn(e.name, e.orders, args)
        if len(args) != len(params):
            raise ExprError(
                f"{name} called with {len(args)} argument(s), body has "
                f"{len(params)} parameter(s)")
        body = _derived_body(e.orders, params, cache)
        return substitute(body, dict(zip(params, args)))
    raise TypeError(f"cannot substitute in {type(e)}")


# --------------------------------------------------------------------------
# Printing

_PREC_ADD = 10
_PREC_MUL = 20
_PREC_UNARY = 25
_PREC_POW = 30
_PREC_ATOM = 40


def _num_str(v) -> str:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return repr(v)


def _num_prec(v) -> int:
    if isinstance(v, Fraction):
        if v < 0:
            return _PREC_UNARY if v.denominator == 1 else _PREC_MUL
        return _PREC_ATOM if v.denominator == 1 else _PREC_MUL
    s = repr(v)
    return _PREC_UNARY if s.startswith("-") else _PREC_ATOM


def _is_negative_const(e: Expr) -> bool:
    return isinstance(e, Num) and (
        (e.is_exact and e.value < 0) or (not e.is_exact and e.value < 0.0))


def _split_sign(t: Expr):
    """Return (sign, magnitude-expression) for printing sums."""
    if _is_negative_const(t):
        return "-", Num(-t.value)
    if isinstance(t, Mul) and _is_negative_const(t.args[0]):
        head = Num(-t.args[0].value)
        rest = t.args[1:]
        if head == ONE and len(rest) == 1:
            return "-", rest[0]
        if head == ONE:
            return "-", Mul(*rest)
        return "-", Mul(head, *rest)
    return "+", t


def to_str(e: Expr) -> str:
    """Deterministic text form in the parser's grammar."""
    return _render(e, 0)


def _paren(s: str, prec: int, minimum: int) -> str:
    return f"({s})" if prec < minimum else s


def _render(e: Expr, minimum: int) -> str:
    if isinstance(e, Num):
        return _paren(_num_str(e.value), _num_prec(e.value), minimum)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Add):
        parts = []
        for i, t in enumerate(e.args):
            sign, mag = _split_sign(t)
            rendered = _render(mag, _PREC_ADD + 1)
            if i == 0:
                parts.append(rendered if sign == "+" else f"-{rendered}")
            else:
                parts.append(f" {sign} {rendered}")
        return _paren("".join(parts), _PREC_ADD, minimum)
    if isinstance(e, Mul):
        sign, mag = _split_sign(e)
        if sign == "-":
            inner = _render(mag, _PREC_MUL)
            return _paren(f"-{inner}", _PREC_UNARY, minimum)
        parts = [_render(a, _PREC_MUL + 1) for a in e.args]
        return _paren("*".join(parts), _PREC_MUL, minimum)
    if isinstance(e, Pow):
        if e.exp == HALF:
            return f"sqrt({_render(e.base, 0)})"
        base = _render(e.base, _PREC_ATOM)
        expo = _render(e.exp, _PREC_ATOM)
        return _paren(f"{base}^{expo}", _PREC_POW, minimum)
    if isinstance(e, Call):
        return f"{e.fn}({_render(e.arg, 0)})"
    if isinstance(e, Fn):
        args = ",".join(_render(a, 0) for a in e.fnargs)
        if len(e.orders) == 1:
            k = e.orders[0]
            mark = "'" * k if k <= 2 else f"^({k})"
            return f"{e.name}{mark}({args})"
        total = sum(e.orders)
        if total == 0:
            return f"{e.name}({args})"
        # Multi-argument derivative: subscript letters, one per derivative,
        # named after the argument when it is a plain symbol.
        letters = []
        for a, k in zip(e.fnargs, e.orders):
            tag = a.name if isinstance(a, Sym) else "?"
            letters.append(tag * k)
        return f"{e.name}_{''.join(letters)}({args})"
    raise TypeError(f"cannot render {type(e)}")


# --------------------------------------------------------------------------
# Parsing

_TOK_NUM = "num"
_TOK_IDENT = "ident"
_TOK_OP = "op"
_TOK_END = "end"


def _tokenize(text: str):
    toks = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            is_real = False
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                is_real = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    is_real = True
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            toks.append((_TOK_NUM, text[i:j], i, is_real))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append((_TOK_IDENT, text[i:j], i, False))
            i = j
            continue
        if c in "+-*/^(),'":
            toks.append((_TOK_OP, c, i, False))
            i += 1
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    toks.append((_TOK_END, "", n, False))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_op(self, op: str):
        kind, val, pos, _ = self.next()
        if kind != _TOK_OP or val != op:
            raise ParseError(f"expected {op!r}, found {val!r}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos, _ = self.peek()
        if kind != _TOK_END:
            raise ParseError(f"trailing input {val!r}", pos)
        return e

    def expr(self) -> Expr:
        terms = [self.term()]
        while True:
            kind, val, _, _ = self.peek()
            if kind == _TOK_OP and val in "+-":
                self.next()
                t = self.term()
                terms.append(t if val == "+" else Mul(MINUS_ONE, t))
            else:
                break
        return terms[0] if len(terms) == 1 else Add(*terms)

    def term(self) -> Expr:
        factors = [self.factor()]
        while True:
            kind, val, _, _ = self.peek()
            if kind == _TOK_OP and val in "*/":
                self.next()
                f = self.factor()
                if val == "*":
                    factors.append(f)
                elif (isinstance(factors[-1], Num) and factors[-1].is_exact
                      and isinstance(f, Num) and f.is_exact and f.value != 0):
                    # Adjacent exact literals divide exactly: 3/2 is a constant.
                    factors[-1] = Num(factors[-1].value / f.value)
                else:
                    factors.append(Pow(f, MINUS_ONE))
            else:
                break
        return factors[0] if len(factors) == 1 else Mul(*factors)

    def factor(self) -> Expr:
        # Unary minus binds looser than ^ (so -x^2 is -(x^2)) but the
        # exponent itself may be signed (x^-2).
        kind, val, _, _ = self.peek()
        if kind == _TOK_OP and val == "-":
            self.next()
            inner = self.factor()
            if isinstance(inner, Num):
                return Num(-inner.value)
            return Mul(MINUS_ONE, inner)
        u = self.atom()
        kind, val, _, _ = self.peek()
        if kind == _TOK_OP and val == "^":
            self.next()
            return Pow(u, self.factor())  # right-associative
        return u

    def atom(self) -> Expr:
        kind, val, pos, is_real = self.next()
        if kind == _TOK_NUM:
            if is_real:
                return Num(float(val))
            return Num(Fraction(int(val)))
        if kind == _TOK_OP and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        if kind == _TOK_IDENT:
            return self.ident_tail(val, pos)
        raise ParseError(f"unexpected token {val!r}", pos)

    def ident_tail(self, name: str, pos: int) -> Expr:
        order = 0
        while True:
            kind, val, _, _ = self.peek()
            if kind == _TOK_OP and val == "'":
                self.next()
                order += 1
            else:
                break
        # Caret derivative order: f^(3)(x).  Only taken when the caret wraps a
        # bare integer AND an argument list follows; otherwise it is a power.
        if order == 0 and self._caret_order_ahead():
            self.next()  # ^
            self.next()  # (
            _, val, _, _ = self.next()
            order = int(val)
            self.next()  # )
        kind, val, pos2, _ = self.peek()
        if kind == _TOK_OP and val == "(":
            self.next()
            args = [self.expr()]
            while True:
                kind, val, pos3, _ = self.peek()
                if kind == _TOK_OP and val == ",":
                    self.next()
                    args.append(self.expr())
                else:
                    break
            self.expect_op(")")
            if name in ELEMENTARY:
                if order > 0:
                    raise ParseError(
                        f"elementary function {name!r} cannot carry "
                        f"derivative marks", pos)
                if len(args) != 1:
                    raise ParseError(
                        f"elementary function {name!r} takes one argument", pos)
                return Call(name, args[0])
            if order > 0 and len(args) != 1:
                raise ParseError(
                    "derivative marks require a single-argument call", pos)
            orders = (order,) if len(args) == 1 else (0,) * len(args)
            return Fn(name, orders, args)
        if order > 0:
            raise ParseError("derivative mark without an argument list", pos)
        return Sym(name)

    def _caret_order_ahead(self) -> bool:
        t = self.toks
        i = self.i
        return (t[i][:2] == (_TOK_OP, "^")
                and t[i + 1][:2] == (_TOK_OP, "(")
                and t[i + 2][0] == _TOK_NUM and not t[i + 2][3]
                and t[i + 3][:2] == (_TOK_OP, ")")
                and t[i + 4][:2] == (_TOK_OP, "("))


def parse(text: str) -> Expr:
    """Parse the expression grammar.  Errors carry the byte offset."""
    return _Parser(text).parse()
