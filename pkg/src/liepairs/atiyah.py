"""Atiyah and Todd cocycles of a Lie pair and of its Fedosov resolution.

Forms along B are written with odd generators ``th0 .. th{r-1}`` (the frame of
B^v = A-perp on the pair side, dchi_k on the Fedosov side).  Endomorphism
valued forms are square matrices of even elements, ``M[j][k]`` being the
d_k-component of the image of d_j.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import Sequence

from .fedosov import FedosovData
from .graded import Derivation, Frame, GradedElement, contract, koszul_sign, relabel
from .liepair import (
    ConnectionSpec,
    LiePairSpec,
    PreconditionError,
    bott_module,
    ce_derivation,
    ce_differential,
    cochain_frame,
    curvature,
    dual_module,
    extends_bott,
    lift_poly,
    solve_coboundary,
    tensor_module,
)

__all__ = [
    "CharacteristicSeries",
    "ToddCocycle",
    "SERIES_KINDS",
    "todd_series",
    "series_log",
    "series_exp",
    "series_sqrt",
    "series_mul",
    "atiyah_cocycle_pair",
    "atiyah_cocycle_fedosov",
    "atiyah_frame",
    "sigma_tilde",
    "divergence",
    "d_F",
    "trace",
    "todd_cocycle",
    "det_direct",
    "contract_by",
    "exp_form",
    "atiyah_pair_cochain",
    "atiyah_pair_residual",
    "atiyah_class_difference",
    "pair_form_differential",
    "fedosov_form_differential",
    "atiyah_fedosov_residual",
    "low_part",
]


# one-variable power series with exact coefficients

def series_mul(a: Sequence[Fraction], b: Sequence[Fraction], K: int) -> list[Fraction]:
    out = [Fraction(0)] * (K + 1)
    for i, x in enumerate(a[:K + 1]):
        if x:
            for j, y in enumerate(b[:K + 1 - i]):
                out[i + j] += x * y
    return out


def series_log(a: Sequence[Fraction], K: int) -> list[Fraction]:
    """log of a unit series (a[0] = 1) via (log a)' = a'/a."""
    if a[0] != 1:
        raise ValueError("log needs constant term 1")
    a = list(a) + [Fraction(0)] * (K + 1 - len(a))
    out = [Fraction(0)] * (K + 1)
    # n a_n = sum_{k=1}^{n} k l_k a_{n-k}
    for n in range(1, K + 1):
        s = n * a[n] - sum(k * out[k] * a[n - k] for k in range(1, n))
        out[n] = s / n
    return out


def series_exp(a: Sequence[Fraction], K: int) -> list[Fraction]:
    """exp of a series with zero constant term via e' = a' e."""
    if a and a[0] != 0:
        raise ValueError("exp needs constant term 0")
    a = list(a) + [Fraction(0)] * (K + 1 - len(a))
    out = [Fraction(0)] * (K + 1)
    out[0] = Fraction(1)
    for n in range(1, K + 1):
        out[n] = sum(k * a[k] * out[n - k] for k in range(1, n + 1)) / n
    return out


def series_sqrt(a: Sequence[Fraction], K: int) -> list[Fraction]:
    if a[0] != 1:
        raise ValueError("square root needs constant term 1")
    return series_exp([x / 2 for x in series_log(a, K)], K)


def bernoulli_plus(K: int) -> list[Fraction]:
    """B_n with B_1 = +1/2, from sum_{k<=n} binom(n+1, k) B_k = n + 1."""
    B = [Fraction(0)] * (K + 1)
    for n in range(K + 1):
        s = sum(comb(n + 1, k) * B[k] for k in range(n))
        B[n] = (Fraction(n + 1) - s) / (n + 1)
    return B


SERIES_KINDS = ("td", "ttodd", "sqrt_td", "sqrt_ttodd")


@dataclass(frozen=True)
class CharacteristicSeries:
    kind: str
    coefficients: tuple[Fraction, ...]

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def __getitem__(self, n: int) -> Fraction:
        return self.coefficients[n]

    def log_coefficients(self) -> list[Fraction]:
        return series_log(self.coefficients, self.order)


def todd_series(kind: str, K: int) -> CharacteristicSeries:
    """x/(1 - e^{-x}), x/(e^{x/2} - e^{-x/2}) and their square roots, to order K.

    td uses the Bernoulli numbers B_n^+; ttodd uses B_n(1/2) = (2^{1-n} - 1) B_n.
    """
    if K < 0:
        raise ValueError("order must be nonnegative")
    if kind not in SERIES_KINDS:
        raise ValueError(f"unknown series {kind!r}; expected one of {SERIES_KINDS}")
    B = bernoulli_plus(K)
    td = [B[n] / factorial(n) for n in range(K + 1)]
    tt = [Fraction(0) if n == 1 else (Fraction(2) ** (1 - n) - 1) * B[n] / factorial(n) for n in range(K + 1)]
    base = td if kind in ("td", "sqrt_td") else tt
    coeffs = series_sqrt(base, K) if kind.startswith("sqrt") else base
    return CharacteristicSeries(kind, tuple(coeffs))


# Atiyah cocycles

def atiyah_frame(spec: LiePairSpec, fedosov: bool = False, N: int | None = None, with_xi: bool = False) -> Frame:
    """Frame for Atiyah forms: lam (all of L on the Fedosov side, A otherwise), th, optional xi."""
    nl = spec.l if fedosov else spec.rA
    odd = tuple(f"lam{i}" for i in range(nl)) + tuple(f"th{k}" for k in range(spec.r))
    if with_xi:
        odd = odd + tuple(f"xi{k}" for k in range(spec.r))
    sym = tuple(f"chi{k}" for k in range(spec.r)) if fedosov else ()
    return Frame(odd=odd, sym=sym, base=spec.coords)


def atiyah_cocycle_pair(spec: LiePairSpec, conn: ConnectionSpec, frame: Frame | None = None) -> list[list[GradedElement]]:
    """M[j][k] = sum_{alpha, i} R11[alpha][i][j][k] lam_alpha th_i."""
    if not extends_bott(spec, conn):
        raise PreconditionError("the Atiyah cocycle needs a connection extending the Bott action")
    frame = atiyah_frame(spec) if frame is None else frame
    R11 = curvature(spec, conn).R11
    r = spec.r
    M = [[GradedElement.zero(frame) for _ in range(r)] for _ in range(r)]
    for a in range(spec.rA):
        lam = GradedElement.gen(frame, f"lam{a}")
        for i in range(r):
            th = GradedElement.gen(frame, f"th{i}")
            for j in range(r):
                for k in range(r):
                    v = R11[a][i][j][k]
                    if v:
                        M[j][k] = M[j][k] + lam * th * relabel(v, frame)
    return M


def atiyah_cocycle_fedosov(data: FedosovData, frame: Frame | None = None) -> list[list[GradedElement]]:
    """M[j][k] = sum_i (d_i d_j f_k) th_i with X = sum_k f_k d/dchi_k."""
    spec = data.ctx.spec
    frame = atiyah_frame(spec, fedosov=True, N=data.N) if frame is None else frame
    X = data.X_total()
    r = spec.r
    f = [relabel(X.image(f"chi{k}"), frame) for k in range(r)]
    M = [[GradedElement.zero(frame, data.N) for _ in range(r)] for _ in range(r)]
    for j in range(r):
        for k in range(r):
            djf = contract(f"chi{j}", f[k])
            for i in range(r):
                M[j][k] = M[j][k] + contract(f"chi{i}", djf) * GradedElement.gen(frame, f"th{i}")
    return M


def atiyah_pair_cochain(spec: LiePairSpec, conn: ConnectionSpec) -> GradedElement:
    """R11 as a 1-cochain of A valued in B^v (x) B^v (x) B, slot ((i, j, k),)."""
    frame = cochain_frame(spec, spec.rA)
    R11 = curvature(spec, conn).R11
    out = GradedElement.zero(frame)
    for a in range(spec.rA):
        lam = GradedElement.gen(frame, f"lam{a}")
        for i in range(spec.r):
            for j in range(spec.r):
                for k in range(spec.r):
                    v = R11[a][i][j][k]
                    if v:
                        out = out + GradedElement(frame, {(w[0], w[1], w[2], ((i, j, k),)): c
                                                           for w, c in (lam * lift_poly(v, frame)).terms.items()})
    return out


def _atiyah_module(spec: LiePairSpec):
    bott = bott_module(spec)
    return tensor_module(dual_module(bott), dual_module(bott), bott)


def atiyah_pair_residual(spec: LiePairSpec, conn: ConnectionSpec) -> GradedElement:
    """d_A of the Atiyah cochain; zero for a cocycle."""
    if not extends_bott(spec, conn):
        raise PreconditionError("the Atiyah cocycle needs a connection extending the Bott action")
    return ce_differential(spec, _atiyah_module(spec), atiyah_pair_cochain(spec, conn))


def atiyah_class_difference(spec: LiePairSpec, conn1: ConnectionSpec, conn2: ConnectionSpec,
                            degree_bound: int = 2) -> GradedElement | None:
    """A 0-cochain whose d_A is the difference of the two Atiyah cochains, if one exists."""
    diff = atiyah_pair_cochain(spec, conn1) - atiyah_pair_cochain(spec, conn2)
    if not diff:
        return GradedElement.zero(diff.frame)
    return solve_coboundary(spec, _atiyah_module(spec), diff, degree_bound)


def pair_form_differential(spec: LiePairSpec, frame: Frame | None = None) -> Derivation:
    """d_A on Lambda A^v (x) Lambda A-perp: Chevalley-Eilenberg on lam, dual Bott action on th."""
    frame = atiyah_frame(spec) if frame is None else frame
    D = ce_derivation(spec, frame, spec.rA)
    images = {name: D.image(name) for name in frame.generators if name in D.images}
    rA = spec.rA
    for b in range(spec.r):
        img = GradedElement.zero(frame)
        for a in range(rA):
            lam = GradedElement.gen(frame, f"lam{a}")
            for k in range(spec.r):
                cf = spec.c[a][rA + k][rA + b]
                if cf:
                    img = img - lam * GradedElement.gen(frame, f"th{k}") * lift_poly(cf, frame)
        images[f"th{b}"] = img
    return Derivation.from_images(frame, 1, images)


def fedosov_form_differential(data: FedosovData, frame: Frame | None = None) -> Derivation:
    """L_Q on functions, on th_i (as d chi_i, forms on the right) and on xi_k (as d/dchi_k)."""
    spec = data.ctx.spec
    frame = atiyah_frame(spec, fedosov=True) if frame is None else frame
    Q = data.Q
    r = spec.r
    images = {}
    for name in data.ctx.frame.generators:
        if name in frame.generators:
            images[name] = relabel(Q.image(name), frame)
    Qc = [images[f"chi{k}"] for k in range(r)]
    J = [[contract(f"chi{j}", Qc[i]) for i in range(r)] for j in range(r)]  # J[j][i] = d_j Q chi_i
    names = set(frame.generators)
    for i in range(r):
        if f"th{i}" in names:
            img = GradedElement.zero(frame)
            for j in range(r):
                img = img + J[j][i] * GradedElement.gen(frame, f"th{j}")
            images[f"th{i}"] = img
        if f"xi{i}" in names:
            img = GradedElement.zero(frame)
            for j in range(r):
                img = img - J[i][j] * GradedElement.gen(frame, f"xi{j}")
            images[f"xi{i}"] = img
    return Derivation.from_images(frame, 1, images)


def low_part(x: GradedElement, below: int) -> GradedElement:
    """Terms of symmetric degree < ``below``."""
    return x.with_trunc(None).filter(lambda w: sum(w[1]) < below)


def atiyah_fedosov_residual(data: FedosovData, below: int | None = None) -> list[GradedElement]:
    """L_Q of the Atiyah tensor a_ijn = d_i d_j f_n, kept below the given symmetric degree.

    (L_Q a)_ijn = Q(a_ijn) + a_ijk J_kn + J_ik a_kjn + J_jk a_ikn with J_mk = d_m Q chi_k.
    Two chi-derivatives lower the degree by two, so the default cutoff is N - 2.
    """
    spec = data.ctx.spec
    frame = atiyah_frame(spec, fedosov=True)
    below = data.N - 2 if below is None else below
    r = spec.r
    D = fedosov_form_differential(data, frame)
    f = [relabel(data.X_total().image(f"chi{k}"), frame) for k in range(r)]
    Qc = [D.image(f"chi{k}") for k in range(r)]
    J = [[contract(f"chi{m}", Qc[k]) for k in range(r)] for m in range(r)]
    a = [[[contract(f"chi{i}", contract(f"chi{j}", f[k])) for k in range(r)] for j in range(r)] for i in range(r)]
    out = []
    for i in range(r):
        for j in range(r):
            for n in range(r):
                v = D(a[i][j][n])
                for k in range(r):
                    v = v + a[i][j][k] * J[k][n] + J[i][k] * a[k][j][n] + J[j][k] * a[i][k][n]
                out.append(low_part(v, below))
    return out


def sigma_tilde(a: GradedElement, spec: LiePairSpec, target: Frame) -> GradedElement:
    """Set chi = 0, drop q^T factors, read lam_A and th over ``target``."""
    bnames = {f"lam{i}" for i in range(spec.rA, spec.l)}
    keep = {}
    src = a.frame
    for (odd, sym, base, slots), c in a.terms.items():
        if any(sym) or any(src.odd[g] in bnames for g in odd):
            continue
        keep[(odd, (0,) * len(sym), base, slots)] = c
    return relabel(GradedElement(src, keep), target, trunc=None)


def trace(M: Sequence[Sequence[GradedElement]]) -> GradedElement:
    out = M[0][0] * 0
    for k in range(len(M)):
        out = out + M[k][k]
    return out


def divergence(data: FedosovData, frame: Frame) -> GradedElement:
    """div X = sum_k d f_k / dchi_k."""
    X = data.X_total()
    out = GradedElement.zero(frame, data.N)
    for k in range(data.ctx.r):
        out = out + contract(f"chi{k}", relabel(X.image(f"chi{k}"), frame))
    return out


def d_F(g: GradedElement, r: int) -> GradedElement:
    """Fibrewise de Rham differential g -> sum_i (d g/dchi_i) th_i (forms written on the right)."""
    out = GradedElement.zero(g.frame, g.trunc)
    for i in range(r):
        out = out + contract(f"chi{i}", g) * GradedElement.gen(g.frame, f"th{i}")
    return out


# Todd cocycles by exp-trace-log

@dataclass(frozen=True)
class ToddCocycle:
    kind: str
    components: tuple[GradedElement, ...]  # k -> part with k forms of each type

    def total(self) -> GradedElement:
        out = self.components[0]
        for c in self.components[1:]:
            out = out + c
        return out


def _matmul(A, B):
    n = len(A)
    zero = A[0][0] * 0
    out = [[zero for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for k in range(n):
            if not A[i][k]:
                continue
            for j in range(n):
                if B[k][j]:
                    out[i][j] = out[i][j] + A[i][k] * B[k][j]
    return out


def exp_form(a: GradedElement, max_terms: int = 64) -> GradedElement:
    """exp of an even nilpotent element; the series stops once powers vanish."""
    out = GradedElement.one(a.frame, a.trunc)
    term = out
    for n in range(1, max_terms):
        term = term * a * Fraction(1, n)
        if not term:
            return out
        out = out + term
    raise ArithmeticError("element is not nilpotent within the term budget")


def todd_cocycle(M: Sequence[Sequence[GradedElement]], kind: str = "td", K: int | None = None) -> ToddCocycle:
    """det f(M) = exp(sum_s t_s tr(M^s)) with log f(x) = sum_s t_s x^s.

    Entries of M must be even.  Components are indexed by half the exterior degree.
    """
    r = len(M)
    if r == 0:
        raise PreconditionError("Todd cocycle of a rank-zero bundle is 1")
    frame = M[0][0].frame
    trunc = M[0][0].trunc
    n_odd = len(frame.odd)
    K = n_odd if K is None else K
    t = todd_series(kind, K).log_coefficients()
    acc = GradedElement.zero(frame, trunc)
    power = M
    for s in range(1, K + 1):
        tr = trace(power)
        if t[s] and tr:
            acc = acc + tr * t[s]
        power = _matmul(power, M)
    total = exp_form(acc)
    top = n_odd // 2
    comps = []
    for k in range(top + 1):
        comps.append(total.component(2 * k))
    return ToddCocycle(kind, tuple(comps))


def det_direct(M: Sequence[Sequence[GradedElement]], kind: str = "td", K: int | None = None) -> GradedElement:
    """det of f(M) for 1x1 and 2x2 matrices by expanding the matrix power series."""
    r = len(M)
    if r not in (1, 2):
        raise ValueError("direct determinant is implemented for 1x1 and 2x2 matrices")
    frame = M[0][0].frame
    K = len(frame.odd) if K is None else K
    coeffs = todd_series(kind, K).coefficients
    one = GradedElement.one(frame, M[0][0].trunc)
    zero = one * 0
    F = [[one if i == j else zero for j in range(r)] for i in range(r)]
    F = [[F[i][j] * coeffs[0] for j in range(r)] for i in range(r)]
    power = [[one if i == j else zero for j in range(r)] for i in range(r)]
    for n in range(1, K + 1):
        power = _matmul(power, M)
        if coeffs[n]:
            F = [[F[i][j] + power[i][j] * coeffs[n] for j in range(r)] for i in range(r)]
    if r == 1:
        return F[0][0]
    return F[0][0] * F[1][1] - F[0][1] * F[1][0]


# contraction of polyvector fields by forms

def contract_by(form: GradedElement, target: GradedElement) -> GradedElement:
    """c th_{i_1} .. th_{i_k} acts by c * d/dxi_{i_1} o ... o d/dxi_{i_k}.

    lam and chi act by multiplication and th_i by the left derivative in xi_i,
    which makes this an action of the form algebra.  Both arguments live on
    one frame carrying th and xi generators.
    """
    frame = form.frame
    th_pos = {g: name for g, name in enumerate(frame.odd) if name.startswith("th")}
    out = GradedElement.zero(frame, target.trunc)
    for (odd, sym, base, slots), c in form.terms.items():
        ths = [th_pos[g] for g in odd if g in th_pos]
        rest = tuple(g for g in odd if g not in th_pos)
        # move the th block to the right of the coefficient
        order = [i for i, g in enumerate(odd) if g not in th_pos] + [i for i, g in enumerate(odd) if g in th_pos]
        sign = koszul_sign(order, [1] * len(odd))
        coeff = GradedElement(frame, {(rest, sym, base, ()): c * sign}, form.trunc)
        piece = target
        # th_{i_1} .. th_{i_k} acts as d_{i_1} o .. o d_{i_k}, so the last one acts first
        for name in reversed(ths):
            piece = contract("xi" + name[2:], piece)
            if not piece:
                break
        if piece:
            out = out + coeff * piece
    return out
