"""Fedosov resolution of a Lie pair: contraction, recursion, perturbation, transfer.

The algebra is Lambda(L^v) (x) S^(B^v) over the chart, with generators

* ``lam0 .. lam{l-1}``: odd frame of L^v; the last r of them are q^T(chi_k);
* ``chi0 .. chi{r-1}``: symmetric generators of B^v, truncated at order N;
* the chart coordinates;
* optionally ``xi0 .. xi{r-1}``: odd generators standing for the vertical
  vector fields d/dchi_k, used for polyvector fields.

The target of the contraction is Lambda(A^v) over the chart (plus the xi).
Contraction identities follow id - tau sigma = d h + h d.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

from .graded import (
    Derivation,
    Frame,
    GradedElement,
    commutator,
    contract,
    koszul_sign,
    parity_sign,
    truncate,
    word_mul,
)
from .liepair import (
    ConnectionSpec,
    LiePairSpec,
    PreconditionError,
    bott_connection,
    ce_derivation,
    lift_poly,
)

__all__ = [
    "FedosovContext",
    "Contraction",
    "FedosovData",
    "TorsionfulConnection",
    "FiltrationError",
    "fedosov_context",
    "delta",
    "h_op",
    "sigma",
    "tau",
    "fedosov_contraction",
    "contraction_residuals",
    "fedosov_X",
    "q_square_residual",
    "perturb_contraction",
    "transfer_brackets",
    "linfty_jacobi_residuals",
]


class TorsionfulConnection(PreconditionError):
    pass


class FiltrationError(ValueError):
    pass


@dataclass(frozen=True)
class FedosovContext:
    spec: LiePairSpec
    N: int | None
    frame: Frame
    target: Frame
    with_xi: bool

    @property
    def rA(self) -> int:
        return self.spec.rA

    @property
    def r(self) -> int:
        return self.spec.r

    def lam(self, i: int) -> GradedElement:
        return GradedElement.gen(self.frame, f"lam{i}", self.N)

    def chi(self, k: int) -> GradedElement:
        return GradedElement.gen(self.frame, f"chi{k}", self.N)

    def xi(self, k: int) -> GradedElement:
        return GradedElement.gen(self.frame, f"xi{k}", self.N)

    def lam_names(self) -> list[str]:
        return [f"lam{i}" for i in range(self.spec.l)]

    def chi_names(self) -> list[str]:
        return [f"chi{k}" for k in range(self.r)]

    def xi_names(self) -> list[str]:
        return [f"xi{k}" for k in range(self.r)] if self.with_xi else []

    def poly(self, p) -> GradedElement:
        return lift_poly(p, self.frame).with_trunc(self.N)

    def zero(self) -> GradedElement:
        return GradedElement.zero(self.frame, self.N)


def fedosov_context(spec: LiePairSpec, N: int | None = 6, with_xi: bool = False) -> FedosovContext:
    l, rA, r = spec.l, spec.rA, spec.r
    xi = tuple(f"xi{k}" for k in range(r)) if with_xi else ()
    frame = Frame(odd=tuple(f"lam{i}" for i in range(l)) + xi,
                  sym=tuple(f"chi{k}" for k in range(r)), base=spec.coords)
    target = Frame(odd=tuple(f"lam{i}" for i in range(rA)) + xi, base=spec.coords)
    return FedosovContext(spec, N, frame, target, with_xi)


# the contraction against delta

def _is_b(ctx: FedosovContext, odd_index: int) -> bool:
    return ctx.rA <= odd_index < ctx.spec.l


def delta(ctx: FedosovContext, a: GradedElement) -> GradedElement:
    """delta(omega chi^J) = sum_m J_m q^T(chi_m) omega chi^{J - e_m}."""
    rA = ctx.rA
    out: dict = {}
    for (odd, sym, base, slots), c in a.terms.items():
        for m, e in enumerate(sym):
            if not e:
                continue
            lam_word = ((rA + m,), (0,) * len(sym), (0,) * len(base), ())
            rest = tuple(x - 1 if j == m else x for j, x in enumerate(sym))
            sign, w = word_mul(lam_word, (odd, rest, base, slots))
            if sign:
                out[w] = out.get(w, 0) + sign * e * c
    return GradedElement(a.frame, out, a.trunc)


def h_op(ctx: FedosovContext, a: GradedElement) -> GradedElement:
    """h(omega chi^J) = 1/(v + |J|) sum_k iota_k(omega) chi^{J + e_k}; zero when v = 0.

    v counts the q^T factors of omega.  Not a derivation.
    """
    out: dict = {}
    for (odd, sym, base, slots), c in a.terms.items():
        positions = [p for p, gi in enumerate(odd) if _is_b(ctx, gi)]
        v = len(positions)
        if v == 0:
            continue
        scale = Fraction(1, v + sum(sym))
        for p in positions:
            k = odd[p] - ctx.rA
            new_odd = odd[:p] + odd[p + 1:]
            new_sym = tuple(x + 1 if j == k else x for j, x in enumerate(sym))
            if a.trunc is not None and sum(new_sym) > a.trunc:
                continue
            w = (new_odd, new_sym, base, slots)
            out[w] = out.get(w, 0) + (-1 if p % 2 else 1) * scale * c
    return GradedElement(a.frame, out, a.trunc)


def _odd_map(src: Frame, dst: Frame) -> dict:
    return {i: dst.odd.index(n) for i, n in enumerate(src.odd) if n in dst.odd}


def sigma(ctx: FedosovContext, a: GradedElement) -> GradedElement:
    """Keep the part with v = 0 and |J| = 0, read over Lambda(A^v)."""
    omap = _odd_map(ctx.frame, ctx.target)
    out: dict = {}
    for (odd, sym, base, slots), c in a.terms.items():
        if any(sym) or any(_is_b(ctx, gi) for gi in odd):
            continue
        w = (tuple(omap[gi] for gi in odd), (), base, slots)
        out[w] = out.get(w, 0) + c
    return GradedElement(ctx.target, out)


def tau(ctx: FedosovContext, a: GradedElement) -> GradedElement:
    """p^T(alpha) (x) 1."""
    omap = _odd_map(ctx.target, ctx.frame)
    zs = (0,) * len(ctx.frame.sym)
    out = {(tuple(omap[gi] for gi in odd), zs, base, slots): c for (odd, sym, base, slots), c in a.terms.items()}
    return GradedElement(ctx.frame, out, ctx.N)


@dataclass(frozen=True)
class Contraction:
    """Maps sigma: S -> T, tau: T -> S, h: S -> S with id - tau sigma = d h + h d."""

    sigma: Callable[[GradedElement], GradedElement]
    tau: Callable[[GradedElement], GradedElement]
    h: Callable[[GradedElement], GradedElement]
    d_source: Callable[[GradedElement], GradedElement]
    d_target: Callable[[GradedElement], GradedElement]
    trunc: int | None = None


def fedosov_contraction(ctx: FedosovContext, sign: int = -1) -> Contraction:
    """Contraction of (S, sign*delta) onto (Lambda A^v, 0); the homotopy is sign*h."""
    return Contraction(
        sigma=lambda a: sigma(ctx, a),
        tau=lambda a: tau(ctx, a),
        h=lambda a: h_op(ctx, a) * sign,
        d_source=lambda a: delta(ctx, a) * sign,
        d_target=lambda a: GradedElement.zero(a.frame),
        trunc=ctx.N,
    )


def contraction_residuals(c: Contraction, source: Sequence[GradedElement],
                          target: Sequence[GradedElement], below: int | None = None) -> dict[str, bool]:
    """Check the contraction identities; ``below`` ignores S-degrees >= below."""

    def low(x: GradedElement) -> GradedElement:
        if below is None:
            return x
        return x.filter(lambda w: sum(w[1]) < below)

    ok = {k: True for k in ("sigma_tau", "homotopy", "sigma_h", "h_tau", "h_h", "d_source_sq", "d_target_sq",
                             "sigma_chain", "tau_chain")}
    for x in source:
        if low(x - c.tau(c.sigma(x)) - c.d_source(c.h(x)) - c.h(c.d_source(x))):
            ok["homotopy"] = False
        if low(c.sigma(c.h(x))):
            ok["sigma_h"] = False
        if low(c.h(c.h(x))):
            ok["h_h"] = False
        if low(c.d_source(c.d_source(x))):
            ok["d_source_sq"] = False
        if low(c.sigma(c.d_source(x)) - c.d_target(c.sigma(x))):
            ok["sigma_chain"] = False
    for y in target:
        if c.sigma(c.tau(y)) != y:
            ok["sigma_tau"] = False
        if low(c.h(c.tau(y))):
            ok["h_tau"] = False
        if c.d_target(c.d_target(y)):
            ok["d_target_sq"] = False
        if low(c.d_source(c.tau(y)) - c.tau(c.d_target(y))):
            ok["tau_chain"] = False
    return ok


# the Fedosov recursion

def nabla_derivation(ctx: FedosovContext, conn: ConnectionSpec) -> Derivation:
    """d_L^nabla: CE on lam and chart, chi_k -> -sum Gamma_ij^k lam_i chi_j, xi untouched."""
    spec = ctx.spec
    base = ce_derivation(spec, ctx.frame, spec.l)
    images = dict(base.images)
    for k in range(ctx.r):
        img = ctx.zero()
        for i in range(spec.l):
            for j in range(ctx.r):
                g = conn.coeff(i, j, k)
                if g:
                    img = img - ctx.poly(g) * ctx.lam(i) * ctx.chi(j)
        images[f"chi{k}"] = img
    for n in ctx.xi_names():
        images[n] = ctx.zero()
    return Derivation(ctx.frame, 1, images, ctx.N)


def delta_derivation(ctx: FedosovContext) -> Derivation:
    return Derivation.from_images(ctx.frame, 1, {f"chi{k}": ctx.lam(ctx.rA + k) for k in range(ctx.r)}, ctx.N)


def h_tilde(ctx: FedosovContext, D: Derivation) -> Derivation:
    """Apply h to the chi-components of a derivation with values along d/dchi."""
    images = {g: ctx.zero() for g in ctx.frame.generators}
    for n in ctx.chi_names():
        images[n] = h_op(ctx, D.image(n))
    return Derivation(ctx.frame, D.degree - 1, images, ctx.N)


def chi_part(ctx: FedosovContext, D: Derivation) -> Derivation:
    images = {g: ctx.zero() for g in ctx.frame.generators}
    for n in ctx.chi_names():
        images[n] = D.image(n)
    return Derivation(ctx.frame, D.degree, images, ctx.N)


@dataclass(frozen=True)
class FedosovData:
    ctx: FedosovContext
    conn: ConnectionSpec
    d: Derivation
    delta: Derivation
    R: Derivation
    X: dict  # k -> Derivation of S-degree k, 2 <= k <= N
    Q: Derivation = field(default=None)

    @property
    def N(self) -> int:
        return self.ctx.N

    def X_total(self) -> Derivation:
        out = Derivation.zero(self.ctx.frame, 1, self.ctx.N)
        for k in sorted(self.X):
            out = out + self.X[k]
        return out

    def omega(self) -> Derivation:
        """Q - d_L^nabla = -delta + X."""
        return self.X_total() - self.delta

    def without(self, k: int) -> "FedosovData":
        X = {j: v for j, v in self.X.items() if j != k}
        return replace(self, X=X, Q=assemble_Q(self.ctx, self.d, self.delta, X))


def assemble_Q(ctx: FedosovContext, d: Derivation, dlt: Derivation, X: dict) -> Derivation:
    Q = d - dlt
    for k in sorted(X):
        Q = Q + X[k]
    return Q


def fedosov_X(spec: LiePairSpec, conn: ConnectionSpec, N: int = 6, X2: Derivation | None = None,
              with_xi: bool = False) -> FedosovData:
    """X_2 = h(R), X_{k+1} = h([d, X_k] + sum_{p+q=k+1} X_p X_q), and Q = -delta + d + X."""
    if N < 2:
        raise PreconditionError("truncation order must be at least 2")
    if not conn.is_full:
        raise PreconditionError("the recursion needs a connection defined along all of L")
    bott = bott_connection(spec)
    if any(conn.gamma[a] != bott.gamma[a] for a in range(spec.rA)):
        raise PreconditionError("connection does not extend the Bott action")
    ctx = fedosov_context(spec, N, with_xi)
    d = nabla_derivation(ctx, conn)
    dlt = delta_derivation(ctx)
    anti = commutator(dlt, d)
    if not anti.is_zero():
        raise TorsionfulConnection(f"delta d + d delta != 0, connection has torsion: {anti!r}")
    R = chi_part(ctx, commutator(d, d) * Fraction(1, 2))
    X = {2: h_tilde(ctx, R) if X2 is None else X2}
    for k in range(2, N):
        acc = commutator(d, X[k])
        for p in range(2, k):
            q = k + 1 - p
            if q in X and p in X:
                acc = acc + commutator(X[p], X[q]) * Fraction(1, 2)
        X[k + 1] = h_tilde(ctx, chi_part(ctx, acc))
    X = {k: v for k, v in X.items() if not v.is_zero()}
    return FedosovData(ctx, conn, d, dlt, R, X, assemble_Q(ctx, d, dlt, X))


def q_square_residual(data: FedosovData) -> Derivation:
    """1/2 [Q, Q] on generators, truncated at N."""
    return commutator(data.Q, data.Q) * Fraction(1, 2)


def residual_below(D: Derivation, N: int) -> Derivation:
    """Part of a derivation of S-degree < N (the visible part of a truncated identity)."""
    return D.map_images(lambda x: x.filter(lambda w: sum(w[1]) < N))


# homological perturbation

def _min_sym_degree(x: GradedElement) -> int | None:
    return min((sum(w[1]) for w in x.terms), default=None)


def check_filtration(eps: Derivation) -> None:
    """The perturbation must not lower S-degree on generators."""
    frame = eps.frame
    for n in frame.generators:
        if n not in eps.images:
            continue
        own = 1 if frame.kind(n)[0] == "sym" else 0
        low = _min_sym_degree(eps.images[n])
        if low is not None and low < own:
            raise FiltrationError(f"perturbation lowers the symmetric filtration on {n}")


def perturb_contraction(base: Contraction, eps: Derivation, N: int | None = None) -> Contraction:
    """Perturbation lemma for a filtration-preserving eps (eps h raises S-degree).

    A = sum_n (-eps h)^n eps, tau' = tau - h A tau, h' = h - h A h,
    d_target' = d_target + sigma A tau; sigma is unchanged since sigma eps h = 0.
    """
    check_filtration(eps)
    N = base.trunc if N is None else N
    if N is None:
        raise PreconditionError("perturbation needs a finite truncation order")

    def A(x: GradedElement) -> GradedElement:
        x = truncate(x, N)
        term = eps(x)
        total = term
        for _ in range(N + 2):
            term = -eps(base.h(term))
            if not term:
                break
            total = total + term
        else:
            if term:
                raise FiltrationError("perturbation series did not terminate")
        return total

    def tau_p(y):
        t = base.tau(y)
        return t - base.h(A(t))

    def h_p(x):
        hx = base.h(truncate(x, N))
        return hx - base.h(A(hx))

    def d_src(x):
        return base.d_source(x) + eps(x)

    def d_tgt(y):
        return base.d_target(y) + base.sigma(A(base.tau(y)))

    return Contraction(base.sigma, tau_p, h_p, d_src, d_tgt, N)


# polyvector fields: Lie derivative along Q and the vertical Schouten bracket

def lie_derivative(ctx: FedosovContext, Q: Derivation) -> Derivation:
    """L_Q on the xi-extended algebra: Q on lam, chi, chart; xi_k -> -sum_j d(Q chi_j)/dchi_k xi_j."""
    if not ctx.with_xi:
        raise PreconditionError("Lie derivative on polyvector fields needs the xi generators")
    images = {n: Q.image(n) for n in ctx.lam_names() + ctx.chi_names() + list(ctx.spec.coords)}
    for k in range(ctx.r):
        img = ctx.zero()
        for j in range(ctx.r):
            img = img - contract(f"chi{k}", Q.image(f"chi{j}")) * ctx.xi(j)
        images[f"xi{k}"] = img
    return Derivation(ctx.frame, 1, images, ctx.N)


def _parity_split(a: GradedElement) -> list[tuple[int, GradedElement]]:
    return [(d % 2, a.component(d)) for d in sorted(a.degrees())]


def schouten_vertical(ctx: FedosovContext, P: GradedElement, R: GradedElement) -> GradedElement:
    """Odd Poisson bracket in (chi, xi): sum_k (P <d_xi_k)(d_chi_k R) - (P <d_chi_k)(d_xi_k R)."""
    out = ctx.zero()
    for degree, Pd in _parity_split(P):
        right_sign = 1 if (degree - 1) % 2 == 0 else -1
        for k in range(ctx.r):
            dxi = contract(f"xi{k}", Pd) * right_sign
            if dxi:
                out = out + dxi * contract(f"chi{k}", R)
            dchi = contract(f"chi{k}", Pd)
            if dchi:
                out = out - dchi * contract(f"xi{k}", R)
    return out


# transfer of L-infinity structures along a contraction

def decalage(bracket: Callable[[GradedElement, GradedElement], GradedElement]):
    """Q2(x, y) = (-1)^{|x|_g} [x, y] with |x|_g = parity - 1; graded symmetric in the shifted grading."""

    def q2(x: GradedElement, y: GradedElement) -> GradedElement:
        out = None
        for px, xd in _parity_split(x):
            term = bracket(xd, y) * (1 if (px - 1) % 2 == 0 else -1)
            out = term if out is None else out + term
        return out if out is not None else GradedElement.zero(x.frame, x.trunc)

    return q2


@dataclass(frozen=True)
class TransferredBrackets:
    q1: Callable
    q2: Callable
    q3: Callable
    tau2: Callable


def _split_homogeneous(x: GradedElement) -> list[GradedElement]:
    return [x.component(d) for d in sorted(x.degrees())]


def _shifted_parity(x: GradedElement) -> int:
    return x.degree() % 2


def transfer_brackets(c: Contraction, Q2: Callable, arity: int = 3) -> TransferredBrackets:
    """Tree formulas for the transferred L-infinity[1] brackets up to arity 3.

    Q2 is the binary bracket in shifted (graded symmetric) form.  The inclusion
    correction is tau_2 = -h Q2(tau x, tau y) for the convention id - tau sigma = dh + hd.
    """
    if arity > 3:
        raise NotImplementedError("transferred brackets are implemented through arity 3")

    def q1(x):
        return c.d_target(x)

    def q2(x, y):
        return c.sigma(Q2(c.tau(x), c.tau(y)))

    def tau2(x, y):
        return -c.h(Q2(c.tau(x), c.tau(y)))

    def q3(x, y, z):
        out = None
        for xs in (_split_homogeneous(x) or [x]):
            for ys in (_split_homogeneous(y) or [y]):
                for zs in (_split_homogeneous(z) or [z]):
                    val = _q3_homogeneous(xs, ys, zs)
                    out = val if out is None else out + val
        return out

    def _q3_homogeneous(x, y, z):
        px, py, pz = (_shifted_parity(v) if v else 0 for v in (x, y, z))
        total = c.sigma(Q2(tau2(x, y), c.tau(z)))
        total = total + c.sigma(Q2(tau2(x, z), c.tau(y))) * parity_sign(py * pz)
        total = total + c.sigma(Q2(tau2(y, z), c.tau(x))) * parity_sign(px * (py + pz))
        return total

    return TransferredBrackets(q1, q2, q3, tau2)


def linfty_jacobi_residuals(T: TransferredBrackets, elements: Sequence[GradedElement]) -> dict[int, GradedElement]:
    """Generalized Jacobi identities of arity 1, 2, 3 in the shifted convention.

    Returns the largest-support residual found for each arity over all tuples of
    homogeneous inputs drawn from ``elements``.
    """
    homog = [h for e in elements for h in _split_homogeneous(e)]
    res: dict[int, GradedElement] = {}

    def keep(n, v):
        if n not in res or len(v) > len(res[n]):
            res[n] = v

    for x in homog:
        keep(1, T.q1(T.q1(x)))
    for x in homog:
        for y in homog:
            px = _shifted_parity(x)
            py = _shifted_parity(y)
            v = T.q1(T.q2(x, y)) + T.q2(T.q1(x), y) + T.q2(T.q1(y), x) * parity_sign(px * py)
            keep(2, v)
    for x in homog:
        for y in homog:
            for z in homog:
                keep(3, jacobi3(T, x, y, z))
    return res


def _unshuffles_3():
    """(j, n-j) unshuffles of (0, 1, 2) as (chosen, rest) pairs, j = 1, 2, 3."""
    return [
        ((0,), (1, 2)), ((1,), (0, 2)), ((2,), (0, 1)),
        ((0, 1), (2,)), ((0, 2), (1,)), ((1, 2), (0,)),
        ((0, 1, 2), ()),
    ]


def jacobi3(T: TransferredBrackets, x, y, z) -> GradedElement:
    xs = (x, y, z)
    par = [_shifted_parity(v) for v in xs]
    total = None
    for chosen, rest in _unshuffles_3():
        perm = list(chosen) + list(rest)
        sign = koszul_sign(perm, par)
        inner = [xs[i] for i in chosen]
        outer = [xs[i] for i in rest]
        if len(chosen) == 1:
            val = T.q3(T.q1(inner[0]), *outer)
        elif len(chosen) == 2:
            val = T.q2(T.q2(*inner), outer[0])
        else:
            val = T.q1(T.q3(*inner))
        total = val * sign if total is None else total + val * sign
    return total
