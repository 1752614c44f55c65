"""Polyvector fields and polydifferential operators of a Lie pair.

Pair side (Lie algebra pairs):

* T_poly = Lambda(A^v) (x) Lambda(B) is modelled on the frame with odd
  ``lam0 .. lam{rA-1}`` followed by odd ``xi0 .. xi{r-1}`` (xi_k stands for d_k).
* D_poly = Lambda(A^v) (x) (D^0)^{(x) n} with D^0 = U(g)/U(g)h.  D^0 is spanned by
  B-ordered PBW monomials b^J, J a multi-index over B.  An element is a
  ``GradedElement`` on the frame ``lam0 .. lam{rA-1}`` whose slot tuple holds the
  n multi-indices (J_1, .., J_n).

Fedosov side: polydifferential operators along the fibre are ``GradedElement``
values on the Fedosov frame whose slots hold derivative multi-indices in chi;
f (x) (J_1, .., J_n) acts as (g_1, .., g_n) -> f d^{J_1} g_1 ... d^{J_n} g_n.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations, product as iproduct
from math import comb, factorial
from typing import Sequence

from . import linalg
from .graded import Derivation, Frame, GradedElement, koszul_sign, parity_sign
from .liepair import LiePairSpec, PreconditionError, bott_connection, ce_derivation
from .pbw import LieAlgebra, PBWAlgebra

__all__ = [
    "PairComplexes",
    "PairSideBracket",
    "NotMatchedPair",
    "pair_complexes",
    "comultiply",
    "hochschild_d",
    "ce_d_T",
    "ce_d_D",
    "total_d_D",
    "schouten",
    "gerstenhaber",
    "gerstenhaber_star",
    "multiplication_element",
    "hkr",
    "cup",
    "cohomology",
    "CohomologyReport",
]


class PairSideBracket(ValueError):
    pass


class NotMatchedPair(ValueError):
    pass


def lie_algebra_of(spec: LiePairSpec) -> LieAlgebra:
    if not spec.is_point:
        raise PreconditionError("this construction needs a Lie algebra pair (base = point)")
    c = tuple(tuple(tuple(v.scalar_part() for v in row) for row in plane) for plane in spec.c)
    return LieAlgebra(spec.names, c)


@dataclass
class PairComplexes:
    spec: LiePairSpec
    frame_T: Frame
    frame_D: Frame
    U: PBWAlgebra
    _action_memo: dict = field(default_factory=dict)

    @property
    def rA(self) -> int:
        return self.spec.rA

    @property
    def r(self) -> int:
        return self.spec.r

    def unit_index(self) -> tuple:
        return (0,) * self.r

    def e(self, k: int) -> tuple:
        return tuple(int(j == k) for j in range(self.r))

    # D^0 = U(g)/U(g)h in B-ordered PBW monomials
    def _mono_of(self, J: tuple) -> tuple:
        return tuple(p for p, e in enumerate(J) for _ in range(e))

    def _exps_of(self, mono: tuple) -> tuple | None:
        if any(p >= self.r for p in mono):
            return None
        J = [0] * self.r
        for p in mono:
            J[p] += 1
        return tuple(J)

    def act(self, alpha: int, J: tuple) -> dict:
        """a_alpha . b^J in D^0."""
        key = (alpha, J)
        hit = self._action_memo.get(key)
        if hit is not None:
            return hit
        prod = self.U.mono_times_mono((self.U.pos[alpha],), self._mono_of(J))
        out: dict = {}
        for mono, c in prod.items():
            K = self._exps_of(mono)
            if K is not None:
                out[K] = out.get(K, 0) + c
        out = {k: v for k, v in out.items() if v}
        self._action_memo[key] = out
        return out

    def lam(self, alpha: int, frame: Frame | None = None) -> GradedElement:
        return GradedElement.gen(frame or self.frame_D, f"lam{alpha}")

    def xi(self, k: int) -> GradedElement:
        return GradedElement.gen(self.frame_T, f"xi{k}")

    def d0(self, *Js: tuple, coeff=1, lam: Sequence[int] = ()) -> GradedElement:
        """lam_I (x) b^{J_1} (x) ... (x) b^{J_n}."""
        return GradedElement.monomial(self.frame_D, odd=lam, slots=tuple(tuple(J) for J in Js), coeff=coeff)


def pair_complexes(spec: LiePairSpec) -> PairComplexes:
    lie = lie_algebra_of(spec)
    order = list(range(spec.rA, spec.l)) + list(range(spec.rA))
    lam = tuple(f"lam{i}" for i in range(spec.rA))
    return PairComplexes(
        spec=spec,
        frame_T=Frame(odd=lam + tuple(f"xi{k}" for k in range(spec.r))),
        frame_D=Frame(odd=lam),
        U=PBWAlgebra(lie, order),
    )


# comultiplication and the Hochschild differential

def comultiply(pc: PairComplexes, u: dict) -> dict:
    """Delta(b^J) = sum_{K <= J} binom(J, K) b^K (x) b^{J-K}; input and output are sparse dicts."""
    out: dict = {}
    for J, c in u.items():
        for K in iproduct(*(range(j + 1) for j in J)):
            coef = 1
            for j, k in zip(J, K):
                coef *= comb(j, k)
            L = tuple(j - k for j, k in zip(J, K))
            key = (tuple(K), L)
            out[key] = out.get(key, 0) + c * coef
    return {k: v for k, v in out.items() if v}


def _map_slots(x: GradedElement, fn) -> GradedElement:
    """Apply fn(slots) -> {new_slots: coeff} termwise, keeping the exterior part."""
    out: dict = {}
    for (o, s, b, t), c in x.terms.items():
        for t2, c2 in fn(t).items():
            w = (o, s, b, t2)
            out[w] = out.get(w, 0) + c * c2
    return GradedElement(x.frame, out, x.trunc)


def hochschild_d(pc: PairComplexes, x: GradedElement) -> GradedElement:
    """1 (x) u + sum_i (-1)^i (.. Delta(u_i) ..) + (-1)^{k+1} u (x) 1, on each tensor word."""
    one = pc.unit_index()

    def d_word(t: tuple) -> dict:
        k = len(t)
        out: dict = {}

        def add(key, v):
            out[key] = out.get(key, 0) + v

        add((one,) + t, 1)
        for i, J in enumerate(t, start=1):
            for (K, L), c in comultiply(pc, {J: Fraction(1)}).items():
                add(t[:i - 1] + (K, L) + t[i:], parity_sign(i) * c)
        add(t + (one,), parity_sign(k + 1))
        return {kk: v for kk, v in out.items() if v}

    return _map_slots(x, d_word)


def _act_on_tensor(pc: PairComplexes, alpha: int, t: tuple) -> dict:
    out: dict = {}
    for i, J in enumerate(t):
        for K, c in pc.act(alpha, J).items():
            key = t[:i] + (K,) + t[i + 1:]
            out[key] = out.get(key, 0) + c
    return {k: v for k, v in out.items() if v}


def ce_d_D(pc: PairComplexes, x: GradedElement) -> GradedElement:
    """d(omega (x) U) = d_A omega (x) U + (-1)^|omega| omega lam_alpha (x) a_alpha . U."""
    D = ce_derivation(pc.spec, pc.frame_D, pc.rA)
    out: dict = {}
    for (o, s, b, t), c in x.terms.items():
        omega = GradedElement(pc.frame_D, {(o, s, b, ()): c})
        for (o2, s2, b2, _), c2 in D(omega).terms.items():
            w = (o2, s2, b2, t)
            out[w] = out.get(w, 0) + c2
        sign = -1 if len(o) % 2 else 1
        for alpha in range(pc.rA):
            acted = _act_on_tensor(pc, alpha, t)
            if not acted:
                continue
            wl = omega * pc.lam(alpha)
            for (o2, s2, b2, _), c2 in wl.terms.items():
                for t2, c3 in acted.items():
                    w = (o2, s2, b2, t2)
                    out[w] = out.get(w, 0) + sign * c2 * c3
    return GradedElement(pc.frame_D, out)


def total_d_D(pc: PairComplexes, x: GradedElement) -> GradedElement:
    """CE part plus (-1)^p id (x) d_H, p the exterior degree."""
    out = ce_d_D(pc, x)
    for p in x.degrees():
        part = x.component(p)
        out = out + hochschild_d(pc, part) * (-1 if p % 2 else 1)
    return out


def bott_derivation_T(pc: PairComplexes) -> Derivation:
    """d_A^Bott on Lambda(A^v) (x) Lambda(B): lam by CE, xi_k -> sum lam_alpha nabla_alpha(xi_k)."""
    spec = pc.spec
    frame = pc.frame_T
    D = ce_derivation(spec, frame, pc.rA)
    images = dict(D.images)
    bott = bott_connection(spec)
    for k in range(pc.r):
        img = GradedElement.zero(frame)
        for a in range(pc.rA):
            for j in range(pc.r):
                g = bott.gamma[a][k][j].scalar_part()
                if g:
                    img = img + pc.lam(a, frame) * pc.xi(j) * g
        images[f"xi{k}"] = img
    return Derivation.from_images(frame, 1, images)


def ce_d_T(pc: PairComplexes, x: GradedElement) -> GradedElement:
    return bott_derivation_T(pc)(x)


# brackets

def _check_matched(pc: PairComplexes) -> None:
    spec = pc.spec
    for i in range(spec.rA, spec.l):
        for j in range(spec.rA, spec.l):
            for k in range(spec.rA):
                if spec.c[i][j][k]:
                    raise NotMatchedPair(
                        "the bracket on Lambda(A^v) (x) Lambda(B) needs B to be a subalgebra; "
                        f"[{spec.names[i]}, {spec.names[j]}] has a component along {spec.names[k]}")


def _generator_bracket(pc: PairComplexes, g1: int, g2: int) -> GradedElement:
    """Bracket of two odd generators of frame_T (positions in frame_T.odd)."""
    spec, rA = pc.spec, pc.rA
    frame = pc.frame_T
    out = GradedElement.zero(frame)
    is_xi1, is_xi2 = g1 >= rA, g2 >= rA
    if is_xi1 and is_xi2:
        i, j = g1, g2
        for k in range(pc.r):
            v = spec.c[i][j][rA + k].scalar_part()
            if v:
                out = out + pc.xi(k) * v
    elif is_xi1 and not is_xi2:
        # nabla_{b_i} lam_alpha = -sum_beta c_{b_i, beta}^alpha lam_beta
        i, alpha = g1, g2
        for beta in range(rA):
            v = spec.c[i][beta][alpha].scalar_part()
            if v:
                out = out - pc.lam(beta, frame) * v
    elif not is_xi1 and is_xi2:
        out = -_generator_bracket(pc, g2, g1)
    return out


def _word_element(frame: Frame, odd: Sequence[int]) -> GradedElement:
    return GradedElement(frame, {(tuple(odd), (), (), ()): Fraction(1)})


def _bracket_words(pc: PairComplexes, P: tuple, R: tuple) -> GradedElement:
    frame = pc.frame_T
    n = len(P)
    out = GradedElement.zero(frame)
    for j, rj in enumerate(R):
        left = _word_element(frame, R[:j])
        right = _word_element(frame, R[j + 1:])
        sign_j = -1 if ((n - 1) * j) % 2 else 1
        inner = GradedElement.zero(frame)
        for i, pi in enumerate(P):
            g = _generator_bracket(pc, rj, pi)
            if g:
                inner = inner + _word_element(frame, P[:i]) * g * _word_element(frame, P[i + 1:])
        if inner:
            out = out - left * inner * right * sign_j
    return out


def schouten(pc: PairComplexes, x: GradedElement, y: GradedElement) -> GradedElement:
    """Bracket on Lambda(A^v) (x) Lambda(B) of a matched pair, extended from generators.

    [b_1, b_2] is the Lie bracket, [b, lam] = nabla_b lam, [lam, lam'] = 0; the
    extension is a biderivation of degree -1 for the exterior product.
    """
    _check_matched(pc)
    out = GradedElement.zero(pc.frame_T)
    for (o1, _, _, _), c1 in x.terms.items():
        for (o2, _, _, _), c2 in y.terms.items():
            out = out + _bracket_words(pc, o1, o2) * (c1 * c2)
    return out


# Fedosov-side polydifferential operators

def multiplication_element(frame: Frame, n_vars: int, trunc: int | None = None) -> GradedElement:
    z = (0,) * n_vars
    return GradedElement(frame, {frame.unit_word((z, z)): Fraction(1)}, trunc)


def _multinomial_splits(J: tuple, parts: int):
    """All ways to write J = A_0 + ... + A_{parts-1} with the multinomial weight."""
    per_coord = []
    for j in J:
        opts = []
        for split in iproduct(range(j + 1), repeat=parts):
            if sum(split) == j:
                w = factorial(j)
                for s in split:
                    w //= factorial(s)
                opts.append((split, w))
        per_coord.append(opts)
    for choice in iproduct(*per_coord):
        weight = 1
        for _, w in choice:
            weight *= w
        parts_idx = tuple(tuple(choice[c][0][p] for c in range(len(J))) for p in range(parts))
        yield parts_idx, weight


def _derivative(a: GradedElement, names: Sequence[str], A: tuple) -> GradedElement:
    from .graded import contract

    out = a
    for name, e in zip(names, A):
        for _ in range(e):
            out = contract(name, out)
            if not out:
                return out
    return out


def _split_by_slots(a: GradedElement) -> dict:
    res: dict = {}
    for (o, s, b, t), c in a.terms.items():
        res.setdefault(t, {})[(o, s, b, ())] = c
    return {t: GradedElement(a.frame, v, a.trunc) for t, v in res.items()}


def _restore_slots(a: GradedElement, t: tuple) -> GradedElement:
    return GradedElement(a.frame, {(o, s, b, t): c for (o, s, b, _), c in a.terms.items()}, a.trunc)


def _check_fedosov_side(x: GradedElement, names: Sequence[str]) -> None:
    if not names:
        raise PairSideBracket(
            "the Gerstenhaber bracket is only available on fibrewise polydifferential operators; "
            "it does not descend to U(L)/U(L)A on the pair side")
    for n in names:
        if n not in x.frame.generators:
            raise PairSideBracket(f"{n} is not a coordinate of this frame")


def compose_at(phi: GradedElement, psi: GradedElement, i: int, names: Sequence[str]) -> GradedElement:
    """phi o_i psi for single-arity elements (slot i, 0-based), coefficients composed by Leibniz."""
    out = GradedElement.zero(phi.frame, phi.trunc if psi.trunc is None else psi.trunc)
    for t1, f in _split_by_slots(phi).items():
        if i >= len(t1):
            continue
        Ji = t1[i]
        for t2, g in _split_by_slots(psi).items():
            m = len(t2)
            for parts, weight in _multinomial_splits(Ji, m + 1):
                dg = _derivative(g, names, parts[0])
                if not dg:
                    continue
                new_slots = tuple(tuple(k + a for k, a in zip(K, A)) for K, A in zip(t2, parts[1:]))
                slots = t1[:i] + new_slots + t1[i + 1:]
                out = out + _restore_slots(f * dg, slots) * weight
    return out


def _arity_parts(x: GradedElement) -> dict:
    """Split into (arity, exterior degree) homogeneous parts."""
    res: dict = {}
    for w, c in x.terms.items():
        res.setdefault((len(w[3]), len(w[0])), {})[w] = c
    return {k: GradedElement(x.frame, v, x.trunc) for k, v in res.items()}


def gerstenhaber_star(x: GradedElement, y: GradedElement, names: Sequence[str]) -> GradedElement:
    """phi * psi = (-1)^{(n-1) p_psi} sum_i (-1)^{(m-1)(i-1)} phi o_i psi."""
    _check_fedosov_side(x, names)
    out = GradedElement.zero(x.frame, x.trunc)
    for (n, _), phi in _arity_parts(x).items():
        for (m, p_psi), psi in _arity_parts(y).items():
            outer = -1 if ((n - 1) * p_psi) % 2 else 1
            for i in range(n):
                s = outer * (-1 if ((m - 1) * i) % 2 else 1)
                out = out + compose_at(phi, psi, i, names) * s
    return out


def total_degree_D(x: GradedElement) -> int:
    degs = {len(w[0]) + len(w[3]) - 1 for w in x.terms}
    if len(degs) > 1:
        raise ValueError(f"element is not homogeneous: total degrees {sorted(degs)}")
    return degs.pop() if degs else 0


def _total_parts(x: GradedElement) -> dict:
    res: dict = {}
    for w, c in x.terms.items():
        res.setdefault(len(w[0]) + len(w[3]) - 1, {})[w] = c
    return {k: GradedElement(x.frame, v, x.trunc) for k, v in res.items()}


def gerstenhaber(x: GradedElement, y: GradedElement, names: Sequence[str]) -> GradedElement:
    """[phi, psi] = phi * psi - (-1)^{uv} psi * phi, u and v the total degrees p + n - 1."""
    _check_fedosov_side(x, names)
    out = GradedElement.zero(x.frame, x.trunc)
    for u, xu in _total_parts(x).items():
        for v, yv in _total_parts(y).items():
            out = out + gerstenhaber_star(xu, yv, names) - gerstenhaber_star(yv, xu, names) * parity_sign(u * v)
    return out


def apply_polydiff(op: GradedElement, args: Sequence[GradedElement], names: Sequence[str]) -> GradedElement:
    """Evaluate f (x) (J_1..J_n) on functions g_1..g_n (even arguments)."""
    out = GradedElement.zero(op.frame, op.trunc)
    for t, f in _split_by_slots(op).items():
        if len(t) != len(args):
            continue
        term = f
        for J, g in zip(t, args):
            term = term * _derivative(g, names, J)
        out = out + term
    return out


def cup(x: GradedElement, y: GradedElement) -> GradedElement:
    """(omega (x) U) cup (eta (x) V) = (-1)^{n_U p_eta} omega eta (x) U (x) V."""
    out = GradedElement.zero(x.frame, x.trunc)
    for (n, _), a in _arity_parts(x).items():
        for (_, p), b in _arity_parts(y).items():
            out = out + a * b * (-1 if (n * p) % 2 else 1)
    return out


# HKR

def hkr(pc: PairComplexes, x: GradedElement) -> GradedElement:
    """lam_I xi_{k_1} .. xi_{k_n} -> lam_I (x) (1/n!) sum_s sgn(s) b_{k_s(1)} (x) .. (x) b_{k_s(n)}."""
    rA = pc.rA
    out: dict = {}
    for (o, s, b, _), c in x.terms.items():
        lam = tuple(g for g in o if g < rA)
        ks = [g - rA for g in o if g >= rA]
        n = len(ks)
        scale = Fraction(1, factorial(n))
        for perm in permutations(range(n)):
            sgn = koszul_sign(perm, [1] * n)
            slots = tuple(pc.e(ks[p]) for p in perm)
            w = (lam, (), (), slots)
            out[w] = out.get(w, 0) + c * sgn * scale
    return GradedElement(pc.frame_D, out)


# cohomology of filtered pieces

@dataclass
class CohomologyReport:
    side: str
    filtration: int
    dims: dict  # total degree -> dim H
    chain_dims: dict
    representatives: dict  # total degree -> list of GradedElement
    hkr_rank: dict = field(default_factory=dict)
    target_dims: dict = field(default_factory=dict)


def _t_basis(pc: PairComplexes, d: int) -> dict:
    rA, r = pc.rA, pc.r
    out: dict = {}
    for p in range(rA + 1):
        for I in combinations(range(rA), p):
            for q1 in range(min(d, r) + 1):
                for K in combinations(range(r), q1):
                    odd = tuple(I) + tuple(rA + k for k in K)
                    out.setdefault(p + q1 - 1, []).append(_word_element(pc.frame_T, odd))
    return out


def _multi_indices(r: int, total: int):
    if r == 0:
        if total == 0:
            yield ()
        return
    for first in range(total + 1):
        for rest in _multi_indices(r - 1, total - first):
            yield (first,) + rest


def _normalized_tensors(r: int, d: int):
    """Tuples (J_1..J_n) with |J_i| >= 1 and sum |J_i| <= d."""
    yield ()
    frontier = [()]
    while frontier:
        nxt = []
        for t in frontier:
            used = sum(sum(J) for J in t)
            for w in range(1, d - used + 1):
                for J in _multi_indices(r, w):
                    tt = t + (J,)
                    nxt.append(tt)
        for t in nxt:
            yield t
        frontier = nxt


def _d_basis(pc: PairComplexes, d: int) -> dict:
    rA = pc.rA
    out: dict = {}
    tensors = list(_normalized_tensors(pc.r, d)) if pc.r else [()]
    for p in range(rA + 1):
        for I in combinations(range(rA), p):
            for t in tensors:
                el = GradedElement(pc.frame_D, {(tuple(I), (), (), t): Fraction(1)})
                out.setdefault(p + len(t) - 1, []).append(el)
    return out


def _complex_cohomology(basis: dict, diff, degrees: Sequence[int]):
    dims, reps, images, kernels = {}, {}, {}, {}
    for k in sorted(set(degrees) | {k - 1 for k in degrees}):
        cols = [dict(diff(v).terms) for v in basis.get(k, [])]
        images[k] = cols
    for k in degrees:
        cols = images[k]
        ns = linalg.nullspace(cols) if cols else []
        kern = []
        for vec in ns:
            el = None
            for c, v in zip(vec, basis.get(k, [])):
                if c:
                    el = v * c if el is None else el + v * c
            if el is not None:
                kern.append(el)
        kernels[k] = kern
        prev = images.get(k - 1, [])
        rk_prev = linalg.rank(prev)
        dims[k] = len(kern) - rk_prev
        chosen = []
        cur = list(prev)
        base_rank = rk_prev
        for z in kern:
            trial = cur + [dict(z.terms)]
            rk = linalg.rank(trial)
            if rk > base_rank:
                chosen.append(z)
                cur = trial
                base_rank = rk
        reps[k] = chosen
    return dims, reps, images, kernels


def cohomology(spec: LiePairSpec, side: str, filtration: int, degrees: Sequence[int] | None = None,
               with_hkr: bool = True) -> CohomologyReport:
    """Exact cohomology of the filtered piece of the T or D complex in the given total degrees."""
    pc = pair_complexes(spec)
    top = spec.rA + filtration - 1
    allowed = range(-1, top + 1)
    degrees = list(allowed) if degrees is None else list(degrees)
    for k in degrees:
        if k not in allowed:
            raise PreconditionError(f"total degree {k} is outside [-1, {top}] for filtration {filtration}")
    if side == "T":
        basis = _t_basis(pc, filtration)
        diff = lambda v: ce_d_T(pc, v)
    elif side == "D":
        basis = _d_basis(pc, filtration)
        diff = lambda v: total_d_D(pc, v)
    else:
        raise ValueError("side must be 'T' or 'D'")
    dims, reps, images, _ = _complex_cohomology(basis, diff, degrees)
    report = CohomologyReport(side, filtration, dims, {k: len(basis.get(k, [])) for k in degrees}, reps)
    if with_hkr and side == "T":
        dbasis = _d_basis(pc, filtration)
        dd, _, dimages, _ = _complex_cohomology(dbasis, lambda v: total_d_D(pc, v), degrees)
        for k in degrees:
            prev = dimages.get(k - 1, [])
            base = linalg.rank(prev)
            mapped = [dict(hkr(pc, z).terms) for z in reps[k]]
            report.hkr_rank[k] = (linalg.rank(prev + mapped) - base) if mapped else 0
        report.target_dims = dd
    return report
