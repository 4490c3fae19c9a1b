"""Finite-dimensional algebras of point generators.

Commutators, structure constants (structural extraction first, numeric
least-squares as fallback), a consistency-checked table type, and
classification through the Killing form and derived/lower-central series.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .expr import (Add, Expr, ExprError, MINUS_ONE, Mul, Num, Pow, ZERO,
                   free_symbols, to_str)
from .jet import PointGenerator, _as_expr, _check_same_space
from .numeric import Bindings, evaluate
from .simplify import is_zero_structural, simplify

DEFAULT_SEED = 1729


class AlgebraError(ExprError):
    pass


def lie_bracket(g1: PointGenerator, g2: PointGenerator) -> PointGenerator:
    """[X1, X2]: componentwise X1(coeffs of X2) - X2(coeffs of X1)."""
    _check_same_space(g1, g2)
    xi = simplify(Add(g1.apply(g2.xi), Mul(MINUS_ONE, g2.apply(g1.xi))))
    etas = [simplify(Add(g1.apply(b), Mul(MINUS_ONE, g2.apply(a))))
            for a, b in zip(g1.etas, g2.etas)]
    return PointGenerator(xi, etas, g1.coords, g1.time)


def _components(g: PointGenerator):
    return (g.xi,) + g.etas


def _is_constant(e: Expr, variables) -> bool:
    return not (set(free_symbols(e)) & set(variables))


def _match_structural(bracket, basis, variables):
    """Greedy structural extraction of bracket = sum c_k basis_k.

    Repeatedly takes the first nonvanishing component slot, tries each
    unused basis element whose slot entry is nonzero, and commits the
    constant ratio that clears the slot.  Returns coefficient list or None.
    """
    coeffs = [ZERO] * len(basis)
    residual = list(_components(bracket))
    used = set()
    for _ in range(len(basis) + 1):
        slot = next((s for s, e in enumerate(residual)
                     if not is_zero_structural(e)), None)
        if slot is None:
            return [simplify(c) for c in coeffs]
        committed = False
        for k, e_k in enumerate(basis):
            if k in used:
                continue
            ek_comp = _components(e_k)[slot]
            if is_zero_structural(ek_comp):
                continue
            cand = simplify(Mul(residual[slot], Pow(ek_comp, MINUS_ONE)))
            if not _is_constant(cand, variables):
                continue
            trial = simplify(Add(residual[slot],
                                 Mul(MINUS_ONE, cand, ek_comp)))
            if not is_zero_structural(trial):
                continue
            coeffs[k] = cand
            used.add(k)
            residual = [simplify(Add(r, Mul(MINUS_ONE, cand, c)))
                        for r, c in zip(residual, _components(e_k))]
            committed = True
            break
        if not committed:
            return None
    return None


def _match_numeric(bracket, basis, variables, domain, bindings, samples,
                   tol, seed):
    """Least-squares coefficients over sampled points, snapped to small
    rationals and verified; raises when the bracket leaves the span."""
    names = tuple(sorted(domain))
    rng = np.random.default_rng(seed)
    pts = {n: rng.uniform(*domain[n], samples) for n in names}
    b = bindings if bindings is not None else Bindings()
    m = len(basis)
    slots = len(_components(bracket))
    rows = []
    rhs = []
    for i in range(samples):
        syms = {n: pts[n][i] for n in names}
        at = b.with_syms(syms)
        for s in range(slots):
            rows.append([evaluate(_components(e)[s], at) if
                         _components(e)[s] != ZERO else 0.0 for e in basis])
            rhs.append(evaluate(_components(bracket)[s], at)
                       if _components(bracket)[s] != ZERO else 0.0)
    A = np.array(rows)
    y = np.array(rhs)
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    coeffs = []
    for c in sol:
        snap = Fraction(float(c)).limit_denominator(64)
        coeffs.append(Num(snap) if abs(float(snap) - c) <= 1e-6 * max(1.0, abs(c))
                      else Num(float(c)))
    resid = np.abs(A @ np.array([float(c.value) for c in coeffs]) - y)
    scale = 1.0 + np.abs(y).max(initial=0.0)
    if resid.max(initial=0.0) > tol * scale:
        raise AlgebraError(
            f"bracket is not in the span of the basis "
            f"(residual {resid.max():.3e})")
    return coeffs


class AlgebraTable:
    """Structure constants over a generator basis: [e_i, e_j] = c^k_ij e_k.

    Stores i < j; antisymmetry fills the rest.  Construction verifies the
    Jacobi identity (exactly for exact entries, to 1e-12 for floats) unless
    symbolic entries make that impossible without bindings.
    """

    def __init__(self, basis: Sequence[PointGenerator], coeffs: dict,
                 check: bool = True):
        self.basis = list(basis)
        self.coeffs = {k: tuple(v) for k, v in coeffs.items()}
        n = len(self.basis)
        for (i, j) in self.coeffs:
            if not (0 <= i < j < n):
                raise AlgebraError("coefficient keys must satisfy i < j")
        if check:
            self._check_jacobi()

    @property
    def dim(self) -> int:
        return len(self.basis)

    def coeff(self, i: int, j: int, k: int) -> Expr:
        if i == j:
            return ZERO
        if i < j:
            return self.coeffs.get((i, j), (ZERO,) * self.dim)[k]
        return simplify(Mul(MINUS_ONE, self.coeff(j, i, k)))

    def bracket_coeffs(self, i: int, j: int):
        return tuple(self.coeff(i, j, k) for k in range(self.dim))

    def is_symbolic(self) -> bool:
        return any(not isinstance(self.coeff(i, j, k), Num)
                   for (i, j) in self.coeffs for k in range(self.dim))

    def _check_jacobi(self):
        n = self.dim
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(j + 1, n):
                    for l in range(n):
                        parts = []
                        for m in range(n):
                            parts.append(Mul(self.coeff(i, j, m),
                                             self.coeff(m, k, l)))
                            parts.append(Mul(self.coeff(j, k, m),
                                             self.coeff(m, i, l)))
                            parts.append(Mul(self.coeff(k, i, m),
                                             self.coeff(m, j, l)))
                        total = simplify(Add(*parts))
                        if not free_symbols(total):
                            v = total.value if isinstance(total, Num) else None
                            if v is not None and abs(float(v)) <= 1e-12:
                                continue
                        if is_zero_structural(total):
                            continue
                        raise AlgebraError(
                            f"Jacobi identity fails at ({i},{j},{k})->{l}: "
                            f"{to_str(total)}")

    def render(self, names: Optional[Sequence[str]] = None) -> str:
        names = list(names or [f"G{i + 1}" for i in range(self.dim)])
        lines = []
        for (i, j) in sorted(self.coeffs):
            terms = []
            for k, c in enumerate(self.coeffs[(i, j)]):
                if c == ZERO:
                    continue
                cs = to_str(c)
                terms.append(names[k] if cs == "1"
                             else f"-{names[k]}" if cs == "-1"
                             else f"({cs})*{names[k]}")
            rhs = " + ".join(terms) if terms else "0"
            lines.append(f"[{names[i]}, {names[j]}] = {rhs}")
        return "\n".join(lines)


def structure_constants(basis: Sequence[PointGenerator], domain=None,
                        bindings=None, samples: int = 24, tol: float = 1e-9,
                        seed: int = DEFAULT_SEED,
                        check: bool = True) -> AlgebraTable:
    """Expand every pairwise bracket over the basis.

    Structural extraction handles exact and symbolic-constant coefficients;
    the numeric least-squares fallback (over ``domain``, default a unit-ish
    box) covers what simplification cannot prove, and anything outside the
    span raises AlgebraError.
    """
    basis = list(basis)
    if not basis:
        raise AlgebraError("empty basis")
    g0 = basis[0]
    for g in basis[1:]:
        _check_same_space(g0, g)
    variables = {g0.time, *g0.coords}
    if domain is None:
        domain = {g0.time: (0.3, 1.3)}
        domain.update({c: (0.5, 1.7) for c in g0.coords})
    if samples < 2 * (1 + len(g0.coords)):
        samples = 2 * (1 + len(g0.coords))
    coeffs = {}
    for i in range(len(basis)):
        for j in range(i + 1, len(basis)):
            br = lie_bracket(basis[i], basis[j])
            got = _match_structural(br, basis, variables)
            if got is None:
                got = _match_numeric(br, basis, variables, domain, bindings,
                                     samples, tol, seed)
            coeffs[(i, j)] = got
    return AlgebraTable(basis, coeffs, check=check)


def basis_change(basis: Sequence[PointGenerator], matrix):
    """New generators f_i = sum_j matrix[i][j] e_j."""
    out = []
    for row in matrix:
        if len(row) != len(basis):
            raise AlgebraError("matrix shape does not match basis")
        g = None
        for coef, e in zip(row, basis):
            coef = _as_expr(coef)
            if coef == ZERO:
                continue
            term = e.scale(coef)
            g = term if g is None else g.add(term)
        if g is None:
            raise AlgebraError("basis change produced a zero generator")
        out.append(g)
    return out


# ---------------------------------------------------------------------------
# Classification


def _numeric_constants(table: AlgebraTable, syms: Optional[dict]) -> np.ndarray:
    n = table.dim
    C = np.zeros((n, n, n))
    b = Bindings(syms or {})
    for (i, j), vec in table.coeffs.items():
        for k, e in enumerate(vec):
            if isinstance(e, Num):
                v = float(e.value)
            else:
                try:
                    v = evaluate(e, b)
                except Exception as exc:
                    raise AlgebraError(
                        f"structure constant ({i},{j},{k}) is symbolic; "
                        f"bind its symbols to classify") from exc
            C[i, j, k] = v
            C[j, i, k] = -v
    return C


def _span_rows(vectors: np.ndarray, tol: float) -> np.ndarray:
    if vectors.size == 0:
        return np.zeros((0, vectors.shape[-1]))
    u, s, vt = np.linalg.svd(vectors)
    if s.size == 0 or s[0] <= tol:
        return np.zeros((0, vectors.shape[-1]))
    rank = int((s > tol * s[0]).sum())
    return vt[:rank]

def _bracket_space(U: np.ndarray, V: np.ndarray, C: np.ndarray,
                   tol: float) -> np.ndarray:
    vecs = [np.einsum("i,j,ijk->k", u, v, C) for u in U for v in V]
    if not vecs:
        return np.zeros((0, C.shape[0]))
    return _span_rows(np.array(vecs), tol)


def classify(table: AlgebraTable, syms: Optional[dict] = None,
             tol: float = 1e-9) -> str:
    """Label the algebra by its numeric structure constants.

    Three-dimensional algebras get the fine labels (abelian, heisenberg,
    nilpotent, solvable, sl2R, su2, other); higher dimensions only the
    coarse ones, with "unclassified" for anything semisimple-like.
    """
    C = _numeric_constants(table, syms)
    n = table.dim
    scale = max(1.0, float(np.abs(C).max(initial=0.0)))
    if np.abs(C).max(initial=0.0) <= tol * scale:
        return "abelian"

    full = np.eye(n)
    # Lower central series: nilpotency.
    L = full
    nilpotent = False
    for _ in range(n + 1):
        L = _bracket_space(full, L, C, tol)
        if L.shape[0] == 0:
            nilpotent = True
            break
    # Derived series: solvability.
    D = full
    solvable = False
    for _ in range(n + 1):
        D = _bracket_space(D, D, C, tol)
        if D.shape[0] == 0:
            solvable = True
            break

    if nilpotent:
        derived_dim = _bracket_space(full, full, C, tol).shape[0]
        if n == 3 and derived_dim == 1:
            return "heisenberg"
        return "nilpotent"
    if solvable:
        return "solvable"

    # Killing form K_ab = c^i_aj c^j_bi.
    K = np.einsum("aji,bij->ab", C, C)
    eigs = np.linalg.eigvalsh(K)
    cut = tol * max(1.0, float(np.abs(eigs).max(initial=0.0)))
    pos = int((eigs > cut).sum())
    neg = int((eigs < -cut).sum())
    zero = n - pos - neg
    if n == 3 and zero == 0:
        if pos == 2 and neg == 1:
            return "sl2R"
        if neg == 3:
            return "su2"
        return "other"
    if n > 3:
        return "unclassified"
    return "other"
