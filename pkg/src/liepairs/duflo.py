"""PBW symmetrization, the Duflo element and multiplicativity on invariants.

S(g) elements are GradedElements whose even generators are the basis names of
g.  Functions on g (elements of S^(g^v)) use generators ``y<i>`` for the dual
basis.  U(g) elements are PBWAlgebra dictionaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iproduct
from math import factorial
from typing import Sequence

from . import linalg
from .atiyah import series_log
from .graded import Derivation, Frame, GradedElement, contract, multi_index_factorial
from .pbw import LieAlgebra, PBWAlgebra, PBWElement

__all__ = [
    "DufloSeries",
    "DufloReport",
    "sym_frame",
    "dual_frame",
    "uea_product",
    "pbw_sym",
    "pbw_sym_bruteforce",
    "ad_action",
    "coad_action",
    "duflo_element",
    "apply_duflo",
    "invariants",
    "uea_invariants",
    "duflo_check",
    "monomials",
]


def sym_frame(lie: LieAlgebra) -> Frame:
    return Frame(sym=lie.names)


def dual_frame(lie: LieAlgebra) -> Frame:
    return Frame(sym=tuple(f"y{i}" for i in range(lie.dim)))


def monomials(dim: int, degree: int) -> list[tuple[int, ...]]:
    return [e for e in iproduct(range(degree + 1), repeat=dim) if sum(e) == degree]


def uea_product(U: PBWAlgebra, x: PBWElement, y: PBWElement) -> PBWElement:
    return U.product(x, y)


def pbw_sym(U: PBWAlgebra, s: GradedElement) -> PBWElement:
    """Symmetrization S(g) -> U(g).

    pbw(e^I) = I!/k! * [t^I] (sum_i t_i e_i)^k, computed by expanding the power
    in U(g) with polynomial coefficients in t.
    """
    out: PBWElement = {}
    by_degree: dict[int, list] = {}
    for (_, exps, _, _), c in s.terms.items():
        by_degree.setdefault(sum(exps), []).append((exps, c))
    for k, items in by_degree.items():
        power = _linear_power(U, k)
        for exps, c in items:
            scale = Fraction(multi_index_factorial(exps), factorial(k)) * c
            for mono, v in power.get(tuple(exps), {}).items():
                out[mono] = out.get(mono, 0) + scale * v
    return {m: v for m, v in out.items() if v}


def _linear_power(U: PBWAlgebra, k: int) -> dict:
    """(sum_i t_i e_i)^k as {t-exponent: PBW element}, memoized on the algebra."""
    cache = U.__dict__.setdefault("_linear_powers", {})
    if k in cache:
        return cache[k]
    dim = U.lie.dim
    if k == 0:
        res = {(0,) * dim: U.one()}
    else:
        prev = _linear_power(U, k - 1)
        res: dict = {}
        for texp, elt in prev.items():
            for i in range(dim):
                t2 = tuple(e + (j == i) for j, e in enumerate(texp))
                prod = U.product(elt, U.gen(i))
                acc = res.setdefault(t2, {})
                for mono, v in prod.items():
                    acc[mono] = acc.get(mono, 0) + v
        res = {t: {m: v for m, v in e.items() if v} for t, e in res.items()}
    cache[k] = res
    return res


def pbw_sym_bruteforce(U: PBWAlgebra, s: GradedElement) -> PBWElement:
    """Average over orderings, term by term; used as an independent check."""
    out: PBWElement = {}
    for (_, exps, _, _), c in s.terms.items():
        for m, v in U.symmetrize(exps).items():
            out[m] = out.get(m, 0) + c * v
    return {m: v for m, v in out.items() if v}


def ad_action(lie: LieAlgebra, a: int, frame: Frame | None = None) -> Derivation:
    """ad_{e_a} extended to S(g) as a derivation."""
    frame = sym_frame(lie) if frame is None else frame
    images = {}
    for j in range(lie.dim):
        img = GradedElement.zero(frame)
        for k, v in lie.bracket_vec(a, j).items():
            img = img + GradedElement.gen(frame, lie.names[k]) * v
        images[lie.names[j]] = img
    return Derivation.from_images(frame, 0, images)


def coad_action(lie: LieAlgebra, a: int, frame: Frame | None = None, trunc: int | None = None) -> Derivation:
    """Coadjoint action of e_a on functions on g: y_k -> -sum_j c_{a j}^k y_j."""
    frame = dual_frame(lie) if frame is None else frame
    images = {}
    for k in range(lie.dim):
        img = GradedElement.zero(frame, trunc)
        for j in range(lie.dim):
            v = lie.c[a][j][k]
            if v:
                img = img - GradedElement.gen(frame, f"y{j}", trunc) * v
        images[f"y{k}"] = img
    return Derivation.from_images(frame, 0, images, trunc)


@dataclass(frozen=True)
class DufloSeries:
    """J (and its square root) as truncated functions on g."""

    lie: LieAlgebra
    K: int
    J: GradedElement
    sqrt_J: GradedElement
    log_J: GradedElement


def _duflo_log_coefficients(K: int) -> list[Fraction]:
    """log((1 - e^{-u})/u) to order K."""
    base = [Fraction((-1) ** n, factorial(n + 1)) for n in range(K + 1)]
    return series_log(base, K)


def duflo_element(lie: LieAlgebra, K: int) -> DufloSeries:
    """J(x) = det((1 - e^{-ad_x})/ad_x) = exp(sum_s t_s tr(ad_x^s)), to degree K."""
    if K < 0:
        raise ValueError("order must be nonnegative")
    frame = dual_frame(lie)
    n = lie.dim
    y = [GradedElement.gen(frame, f"y{i}", K) for i in range(n)]
    zero = GradedElement.zero(frame, K)
    # ad_x[k][j] = sum_i y_i c_{ij}^k
    ad = [[zero for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            for k in range(n):
                v = lie.c[i][j][k]
                if v:
                    ad[k][j] = ad[k][j] + y[i] * v
    t = _duflo_log_coefficients(K)
    log_J = zero
    power = ad
    for s in range(1, K + 1):
        tr = zero
        for k in range(n):
            tr = tr + power[k][k]
        if t[s] and tr:
            log_J = log_J + tr * t[s]
        power = [[sum((power[a][b] * ad[b][c] for b in range(n) if power[a][b] and ad[b][c]), zero)
                  for c in range(n)] for a in range(n)]
    J = _exp_series(log_J, K)
    sqrt_J = _exp_series(log_J * Fraction(1, 2), K)
    return DufloSeries(lie, K, J, sqrt_J, log_J)


def _exp_series(a: GradedElement, K: int) -> GradedElement:
    out = GradedElement.one(a.frame, K)
    term = GradedElement.one(a.frame, K)
    for n in range(1, K + 1):
        term = term * a
        if not term:
            break
        out = out + term * Fraction(1, factorial(n))
    return out


def apply_duflo(series_elt: GradedElement, s: GradedElement, lie: LieAlgebra) -> GradedElement:
    """Let y^I act on S(g) as the constant-coefficient operator d^I.

    This is contraction through the pairing <nu_1..nu_k, v_1..v_k> = sum over
    permutations of prod <nu_i, v_sigma(i)>, so that <nu nu, v v> = 2 <nu, v>^2.
    """
    out = GradedElement.zero(s.frame)
    names = lie.names
    for (_, exps, _, _), c in series_elt.terms.items():
        piece = s
        for name, e in zip(names, exps):
            for _ in range(e):
                if not piece:
                    break
                piece = contract(name, piece)
        if piece:
            out = out + piece * c
    return out


def invariants(lie: LieAlgebra, degree: int) -> dict[int, list[GradedElement]]:
    """Basis of S^k(g)^g for k = 0..degree, as exact kernels of the ad maps."""
    frame = sym_frame(lie)
    ads = [ad_action(lie, a, frame) for a in range(lie.dim)]
    out = {}
    for k in range(degree + 1):
        monos = monomials(lie.dim, k)
        columns = []
        for e in monos:
            x = GradedElement(frame, {((), e, (), ()): Fraction(1)})
            col = {}
            for a, D in enumerate(ads):
                for w, v in D(x).terms.items():
                    col[(a, w)] = v
            columns.append(col)
        basis = []
        for vec in linalg.nullspace(columns):
            basis.append(GradedElement(frame, {((), e, (), ()): v for e, v in zip(monos, vec) if v}))
        out[k] = basis
    return out


def uea_invariants(U: PBWAlgebra, degree: int) -> list[PBWElement]:
    """Basis of the centre of U(g) within PBW filtration <= degree."""
    monos = [tuple(p for p, e in enumerate(exps) for _ in range(e))
             for k in range(degree + 1) for exps in monomials(U.lie.dim, k)]
    columns = []
    for mono in monos:
        x = {mono: Fraction(1)}
        col = {}
        for a in range(U.lie.dim):
            g = U.gen(U.order[a])
            comm = U.add(U.product(g, x), U.product(x, g), coeffs=[1, -1])
            for m, v in comm.items():
                col[(a, m)] = v
        columns.append(col)
    return [{m: v for m, v in zip(monos, vec) if v} for vec in linalg.nullspace(columns)]


@dataclass(frozen=True)
class DufloReport:
    lie: LieAlgebra
    degree: int
    invariant_dims: dict
    pairs_checked: int
    duflo_failures: list
    plain_discrepancies: list  # (label, nonzero PBW element)

    @property
    def ok(self) -> bool:
        return not self.duflo_failures


def duflo_check(lie: LieAlgebra, degree: int = 4, order: Sequence[int] | None = None) -> DufloReport:
    """pbw(J^{1/2}(p q)) = pbw(J^{1/2} p) pbw(J^{1/2} q) for invariant p, q of degree <= ``degree``."""
    U = PBWAlgebra(lie, order)
    inv = invariants(lie, degree)
    basis = [(k, i, p) for k, ps in inv.items() for i, p in enumerate(ps)]
    duflo = duflo_element(lie, 2 * degree)
    failures = []
    plain = []
    count = 0
    for a, (k1, i1, p) in enumerate(basis):
        for (k2, i2, q) in basis[a:]:
            count += 1
            pq = p * q
            lhs = pbw_sym(U, apply_duflo(duflo.sqrt_J, pq, lie))
            rhs = U.product(pbw_sym(U, apply_duflo(duflo.sqrt_J, p, lie)),
                            pbw_sym(U, apply_duflo(duflo.sqrt_J, q, lie)))
            label = f"S^{k1}[{i1}] * S^{k2}[{i2}]"
            if U.add(lhs, rhs, coeffs=[1, -1]):
                failures.append(label)
            disc = U.add(pbw_sym(U, pq), U.product(pbw_sym(U, p), pbw_sym(U, q)), coeffs=[1, -1])
            if disc:
                plain.append((label, disc))
    return DufloReport(lie, degree, {k: len(v) for k, v in inv.items()}, count, failures, plain)
