"""Admissible graphs, operator assembly, weights, star products and the fibrewise Phi_n.

Aerial vertices are 0..n-1 and terrestrial vertices n..n+m-1.  Edges are stored
in lexicographic order: grouped by source, and within a source in the order
e_k^1, e_k^2, ...  That order fixes the orientation of every weight integral.

Polyvector fields are GradedElements over a frame whose even generators are the
fibre coordinates and whose odd generators include ``xi<k>`` (the frame vectors
d/dx_k).  Any other odd generators are coefficients.  Polydifferential operators
use the slot format of ``poly``: one derivative multi-index per argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations, product as iproduct
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .graded import Frame, GradedElement, contract, koszul_sign
from .poly import apply_polydiff

__all__ = [
    "AdmissibleGraph",
    "GraphWeight",
    "WeightBudget",
    "WeightedElement",
    "BudgetExhausted",
    "NotPoisson",
    "flat_frame",
    "enumerate_graphs",
    "assemble",
    "polyvector_degree",
    "weight",
    "weights_admit",
    "assembly_admits",
    "taylor_U",
    "star_product",
    "poisson_residual",
    "phi_n",
    "fedosov_omega",
    "fedosov_hkr",
    "GraphCache",
    "hkr_graph",
    "bidifferential_series",
    "apply_series",
]


class BudgetExhausted(RuntimeError):
    """More Monte Carlo weights were requested than the budget allows."""


class NotPoisson(ValueError):
    pass


@dataclass(frozen=True)
class AdmissibleGraph:
    n: int
    m: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = set()
        last_source = -1
        for s, t in self.edges:
            if not 0 <= s < self.n:
                raise ValueError(f"edge {(s, t)} does not start at an aerial vertex")
            if not 0 <= t < self.n + self.m:
                raise ValueError(f"edge {(s, t)} ends outside the graph")
            if s == t:
                raise ValueError(f"loop at vertex {s}")
            if (s, t) in seen:
                raise ValueError(f"parallel edges {s}->{t}")
            if s < last_source:
                raise ValueError("edges must be grouped by source in increasing order")
            seen.add((s, t))
            last_source = s

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def dimension(self) -> int:
        return 2 * self.n + self.m - 2

    def star(self, k: int) -> tuple[int, ...]:
        """Targets of the edges leaving aerial vertex k, in label order."""
        return tuple(t for s, t in self.edges if s == k)

    def out_degrees(self) -> tuple[int, ...]:
        return tuple(len(self.star(k)) for k in range(self.n))

    def key(self) -> str:
        return f"{self.n} {self.m} " + ",".join(f"{s}>{t}" for s, t in self.edges)


def enumerate_graphs(n: int, m: int, edge_count: int,
                     out_degrees: Sequence[int] | None = None) -> list[AdmissibleGraph]:
    """All admissible graphs of type (n, m) with the given number of edges.

    ``out_degrees`` optionally prescribes |Star(k)| for each aerial vertex.
    """
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    others = [[v for v in range(n + m) if v != k] for k in range(n)]
    if out_degrees is not None:
        if len(out_degrees) != n or sum(out_degrees) != edge_count:
            return []
        profiles = [tuple(out_degrees)]
    else:
        profiles = [p for p in iproduct(range(n + m), repeat=n) if sum(p) == edge_count]
    out = []
    for prof in profiles:
        choices = [list(permutations(others[k], prof[k])) for k in range(n)]
        for pick in iproduct(*choices):
            edges = tuple((k, t) for k in range(n) for t in pick[k])
            out.append(AdmissibleGraph(n, m, edges))
    return out


def hkr_graph(m: int, order: Sequence[int] | None = None) -> AdmissibleGraph:
    """The (1, m) graph whose k-th edge ends at terrestrial vertex order[k]."""
    order = range(m) if order is None else order
    return AdmissibleGraph(1, m, tuple((0, 1 + j) for j in order))


# assembly

def flat_frame(d: int, extra_odd: Sequence[str] = ()) -> Frame:
    """Coordinates x0..x{d-1}, frame vectors xi0..xi{d-1}, optional odd coefficients."""
    return Frame(odd=tuple(extra_odd) + tuple(f"xi{k}" for k in range(d)),
                 sym=tuple(f"x{k}" for k in range(d)))


def _xi_positions(frame: Frame) -> dict[int, int]:
    return {g: int(name[2:]) for g, name in enumerate(frame.odd) if name.startswith("xi")}


def polyvector_degree(gamma: GradedElement) -> int:
    """|gamma| = (number of xi factors) - 1; the element must be homogeneous in xi."""
    xi = _xi_positions(gamma.frame)
    counts = {sum(1 for g in w[0] if g in xi) for w in gamma.terms}
    if len(counts) != 1:
        raise ValueError("polyvector is not homogeneous in its number of frame vectors")
    return counts.pop() - 1


def _components(gamma: GradedElement) -> dict[tuple[int, ...], GradedElement]:
    """Skew components gamma^{i_1..i_s} for every ordered tuple of distinct indices."""
    frame = gamma.frame
    xi = _xi_positions(frame)
    base: dict = {}
    for (odd, sym, b, slots), c in gamma.terms.items():
        J = tuple(xi[g] for g in odd if g in xi)
        rest = tuple(g for g in odd if g not in xi)
        base.setdefault(J, {})
        key = (rest, sym, b, ())
        base[J][key] = base[J].get(key, 0) + c
    out = {}
    for J, terms in base.items():
        elt = GradedElement(frame, terms, gamma.trunc)
        if not elt:
            continue
        for perm in permutations(range(len(J))):
            I = tuple(J[p] for p in perm)
            out[I] = elt * koszul_sign(perm, [1] * len(J))
    return out


def _parity_flip(a: GradedElement) -> GradedElement:
    """Negate the odd part of a coefficient."""
    return GradedElement(a.frame, {k: (-c if len(k[0]) % 2 else c) for k, c in a.terms.items()}, a.trunc)


def _partials(a: GradedElement, names: Sequence[str], counts: Sequence[int]) -> GradedElement:
    for name, c in zip(names, counts):
        for _ in range(c):
            if not a:
                return a
            a = contract(name, a)
    return a


def assemble(graph: AdmissibleGraph, gammas: Sequence[GradedElement],
             fs: Sequence[GradedElement] | None = None,
             coords: Sequence[str] | None = None) -> GradedElement:
    """U_Gamma(gamma_1..gamma_n) as a polydifferential operator, or applied to fs.

    Sum over labelings I: E -> {coords}; vertex k contributes
    D^k_I(gamma_k^{I(Star k)}) and terrestrial vertex l the derivative multi-index
    of its incoming labels.  Coefficients multiply in vertex order, after being
    moved left past the frame vectors of earlier vertices: an odd coefficient
    at vertex k picks up (-1)^(|Star 0| + .. + |Star k-1|).
    """
    if len(gammas) != graph.n:
        raise ValueError(f"graph has {graph.n} aerial vertices, got {len(gammas)} polyvectors")
    if fs is not None and len(fs) != graph.m:
        raise ValueError(f"graph has {graph.m} terrestrial vertices, got {len(fs)} functions")
    frame = gammas[0].frame
    coords = list(frame.sym) if coords is None else list(coords)
    d = len(coords)
    n, m = graph.n, graph.m
    comps = []
    for k, g in enumerate(gammas):
        c = _components(g)
        deg = len(graph.star(k))
        c = {I: v for I, v in c.items() if len(I) == deg}
        if not c:
            return GradedElement.zero(frame)
        if sum(len(graph.star(l)) for l in range(k)) % 2:
            c = {I: _parity_flip(v) for I, v in c.items()}
        comps.append(c)
    E = graph.edges
    out = GradedElement.zero(frame)
    for I in iproduct(range(d), repeat=len(E)):
        incoming = [[0] * d for _ in range(n + m)]
        stars = [[] for _ in range(n)]
        for (s, t), i in zip(E, I):
            incoming[t][i] += 1
            stars[s].append(i)
        term = None
        for k in range(n):
            comp = comps[k].get(tuple(stars[k]))
            if comp is None:
                term = None
                break
            piece = _partials(comp, coords, incoming[k])
            if not piece:
                term = None
                break
            term = piece if term is None else term * piece
            if not term:
                break
        if term is None or not term:
            continue
        slots = tuple(tuple(incoming[n + l]) for l in range(m))
        out = out + GradedElement(frame, {(o, s, b, slots): c for (o, s, b, _), c in term.terms.items()})
    if fs is None:
        return out
    return apply_polydiff(out, list(fs), coords)


def weights_admit(graph: AdmissibleGraph) -> bool:
    """A weight can be nonzero only when |E| = 2n + m - 2."""
    return graph.edge_count == graph.dimension


def assembly_admits(graph: AdmissibleGraph, degrees: Sequence[int]) -> bool:
    """U_Gamma can be nonzero only when |Star(k)| = |gamma_k| + 1 for every k."""
    return graph.out_degrees() == tuple(g + 1 for g in degrees)


# weights

@dataclass(frozen=True)
class GraphWeight:
    value: Fraction | float
    error: float
    provenance: str  # "closed-form" or "monte-carlo"
    samples: int = 0
    seed: int | None = None

    @property
    def is_exact(self) -> bool:
        return self.provenance == "closed-form"


def _closed_form(graph: AdmissibleGraph) -> Fraction | None:
    if not weights_admit(graph):
        return Fraction(0)
    if graph.n == 1 and graph.edge_count == graph.m:
        # each terrestrial vertex hit once; the lexicographic edge order contributes sgn
        targets = [t - 1 for t in graph.star(0)]
        perm = sorted(range(graph.m), key=lambda e: targets[e])
        sign = koszul_sign(perm, [1] * graph.m)
        return Fraction(sign, math.factorial(graph.m) ** 2)
    return None


def _stream(graph: AdmissibleGraph, seed: int) -> np.random.Generator:
    flat = [graph.n, graph.m] + [v for e in graph.edges for v in e]
    return np.random.default_rng(np.random.SeedSequence([seed] + flat))


def _dphi(z, w, w_is_real: bool):
    """Partial derivatives of phi(z, w) = arg((z - w)/(conj z - w)) / 2pi.

    Returns (d/dRe z, d/dIm z, d/dRe w, d/dIm w); the last is None for real w.
    """
    a = 1.0 / (z - w)
    b = 1.0 / (np.conj(z) - w)
    two_pi = 2.0 * np.pi
    dzx = (a.imag - b.imag) / two_pi
    dzy = (a.real + b.real) / two_pi
    dwx = (-a.imag + b.imag) / two_pi
    dwy = None if w_is_real else (-a.real + b.real) / two_pi
    return dzx, dzy, dwx, dwy


def _aerial_proposal(rng: np.random.Generator, centers: list, B: int):
    """Draw a point of the plane from a mixture and return it with its density.

    Half the mass is the product of tangent maps onto H; the rest is split over
    radial proposals centred at the points already placed, with radius density
    1/(1 + rho)^2 and uniform angle.  Near a centre the area density grows like
    1/rho, cancelling the 1/rho singularity of colliding angle forms.
    """
    k = len(centers)
    comp = rng.integers(0, 2 * k, size=B) if k else np.zeros(B, dtype=int)
    u = rng.random(B)
    v = rng.random(B)
    x = np.tan(np.pi * (u - 0.5))
    y = np.tan(0.5 * np.pi * v)
    z = x + 1j * y
    rho = u / (1.0 - u)
    ang = 2.0 * np.pi * v
    for j, c in enumerate(centers):
        sel = comp == k + j
        z = np.where(sel, c + rho * np.exp(1j * ang), z)
    zx, zy = z.real, z.imag
    inside = zy > 0
    base = np.where(inside, 1.0 / (np.pi * (1 + zx * zx) * 0.5 * np.pi * (1 + zy * zy)), 0.0)
    dens = 0.5 * base if k else base
    for c in centers:
        r = np.abs(z - c)
        dens = dens + (0.5 / k) / ((1 + r) ** 2 * 2.0 * np.pi * np.maximum(r, 1e-300))
    return z, dens, inside


def _monte_carlo(graph: AdmissibleGraph, samples: int, seed: int, batch: int = 200_000) -> tuple[float, float]:
    """Estimate of the integral of the wedge of d phi_e over C_{n,m} with z_1 = i.

    Coordinates are (Re z_2, Im z_2, .., Re z_n, Im z_n, q_1 < .. < q_m).  The
    ordered q's come from sorted tangent-mapped uniforms; aerial points are drawn
    one at a time from ``_aerial_proposal`` around everything placed before them.
    """
    n, m = graph.n, graph.m
    dim = graph.dimension
    rng = _stream(graph, seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        B = min(batch, samples - done)
        weight_ = np.ones(B)
        zs = [np.full(B, 1j)]
        qs = []
        if m:
            q = np.tan(np.pi * (np.sort(rng.random((B, m)), axis=1) - 0.5))
            weight_ *= np.prod(np.pi * (1 + q * q), axis=1) / math.factorial(m)
            qs = [q[:, j].astype(complex) for j in range(m)]
        for _ in range(n - 1):
            z, dens, inside = _aerial_proposal(rng, zs + qs, B)
            weight_ = np.where(inside, weight_ / np.where(inside, dens, 1.0), 0.0)
            zs.append(np.where(inside, z, 1j))
        pts = zs + qs
        A = np.zeros((B, dim, dim))
        with np.errstate(all="ignore"):
            vals = _integrand(graph, pts, A, n) * weight_ if dim else weight_
        vals = np.where((weight_ != 0) & np.isfinite(vals), vals, 0.0)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += B
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return mean, math.sqrt(var / samples)


def _integrand(graph: AdmissibleGraph, pts: list, A: np.ndarray, n: int) -> np.ndarray:
    """det of the pulled-back edge forms; rows in lexicographic edge order."""
    for row, (s, t) in enumerate(graph.edges):
        dzx, dzy, dwx, dwy = _dphi(pts[s], pts[t], t >= n)
        if s > 0:
            A[:, row, 2 * (s - 1)] += dzx
            A[:, row, 2 * (s - 1) + 1] += dzy
        if t >= n:
            A[:, row, 2 * (n - 1) + (t - n)] += dwx
        elif t > 0:
            A[:, row, 2 * (t - 1)] += dwx
            A[:, row, 2 * (t - 1) + 1] += dwy
    return np.linalg.det(A)


def weight(graph: AdmissibleGraph, mode: str = "exact-if-known", samples: int = 100_000,
           seed: int | None = None) -> GraphWeight:
    """W_Gamma = prod 1/|Star(k)|! times the integral of the angle forms.

    ``mode`` is "exact-if-known" (closed form when available, else Monte Carlo)
    or "monte-carlo" (always sample, except for the dimension-count zero).
    """
    if mode not in ("exact-if-known", "monte-carlo"):
        raise ValueError(f"unknown weight mode {mode!r}")
    if not weights_admit(graph):
        return GraphWeight(Fraction(0), 0.0, "closed-form")
    if mode == "exact-if-known":
        cf = _closed_form(graph)
        if cf is not None:
            return GraphWeight(cf, 0.0, "closed-form")
    if seed is None:
        raise ValueError("Monte Carlo weights need an explicit seed")
    prefactor = 1.0
    for k in range(graph.n):
        prefactor /= math.factorial(len(graph.star(k)))
    mean, err = _monte_carlo(graph, samples, seed)
    return GraphWeight(prefactor * mean, prefactor * err, "monte-carlo", samples, seed)


@dataclass
class WeightBudget:
    """Sampling parameters and a cap on the number of Monte Carlo weights."""

    samples: int = 100_000
    seed: int = 0
    max_graphs: int = 256
    mode: str = "exact-if-known"
    cache: "GraphCache | None" = None
    used: int = 0

    def weigh(self, graph: AdmissibleGraph) -> GraphWeight:
        if self.cache is not None:
            hit = self.cache.get(graph, self.seed, self.samples)
            if hit is not None:
                return hit
        w = weight(graph, "exact-if-known", self.samples, self.seed) if self.mode == "exact-if-known" \
            else weight(graph, "monte-carlo", self.samples, self.seed)
        if w.provenance == "monte-carlo":
            self.used += 1
            if self.used > self.max_graphs:
                raise BudgetExhausted(f"more than {self.max_graphs} Monte Carlo weights requested")
        if self.cache is not None:
            self.cache.put(graph, w)
        return w


class WeightedElement:
    """Exact part plus sum_Gamma W_Gamma * (exact element) over Monte Carlo weights.

    Keeping each sampled weight symbolic lets residuals stay exact in everything
    except the weights, whose errors are then propagated linearly.
    """

    def __init__(self, frame: Frame, exact: GradedElement | None = None,
                 parts: Mapping[str, GradedElement] | None = None,
                 weights: Mapping[str, GraphWeight] | None = None):
        self.frame = frame
        self.exact = GradedElement.zero(frame) if exact is None else exact
        self.parts = {k: v for k, v in (parts or {}).items() if v}
        self.weights = dict(weights or {})

    def __add__(self, other: "WeightedElement") -> "WeightedElement":
        parts = dict(self.parts)
        for k, v in other.parts.items():
            parts[k] = parts[k] + v if k in parts else v
        return WeightedElement(self.frame, self.exact + other.exact, parts, {**self.weights, **other.weights})

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c) -> "WeightedElement":
        return WeightedElement(self.frame, self.exact * c, {k: v * c for k, v in self.parts.items()}, self.weights)

    __rmul__ = __mul__

    def map(self, fn) -> "WeightedElement":
        """Apply a linear map to the exact part and to every weighted part."""
        return WeightedElement(self.frame, fn(self.exact), {k: fn(v) for k, v in self.parts.items()}, self.weights)

    def add_graph(self, graph: AdmissibleGraph, w: GraphWeight, element: GradedElement) -> None:
        if not element or (w.is_exact and w.value == 0):
            return
        if w.is_exact:
            self.exact = self.exact + element * w.value
            return
        k = graph.key()
        self.weights[k] = w
        self.parts[k] = self.parts[k] + element if k in self.parts else element

    def is_exact(self) -> bool:
        return not self.parts

    def evaluate(self) -> dict[tuple, tuple[float, float]]:
        """word -> (value, standard error) with independent weight errors."""
        vals: dict = {w: float(c) for w, c in self.exact.terms.items()}
        var: dict = {}
        for k, part in self.parts.items():
            W = self.weights[k]
            for w, c in part.terms.items():
                vals[w] = vals.get(w, 0.0) + float(c) * float(W.value)
                var[w] = var.get(w, 0.0) + (float(c) * W.error) ** 2
        return {w: (v, math.sqrt(var.get(w, 0.0))) for w, v in vals.items()}

    def max_abs(self) -> tuple[float, float]:
        """Largest |value| over words and the error attached to it."""
        best = (0.0, 0.0)
        for v, e in self.evaluate().values():
            if abs(v) > best[0]:
                best = (abs(v), e)
        return best

    def max_error(self) -> float:
        return max((e for _, e in self.evaluate().values()), default=0.0)


# Taylor coefficients and star products

def taylor_U(gammas: Sequence[GradedElement], budget: WeightBudget | None = None,
             coords: Sequence[str] | None = None) -> WeightedElement:
    """U_n(gamma_1, .., gamma_n) = sum_m sum_Gamma W_Gamma U_Gamma(gamma).

    m is forced by 2n + m - 2 = sum |gamma_k| + n.
    """
    budget = WeightBudget() if budget is None else budget
    frame = gammas[0].frame
    n = len(gammas)
    degrees = [polyvector_degree(g) for g in gammas]
    E = sum(degrees) + n
    m = E - 2 * n + 2
    out = WeightedElement(frame)
    if m < 0:
        return out
    for graph in enumerate_graphs(n, m, E, out_degrees=[g + 1 for g in degrees]):
        if not (weights_admit(graph) and assembly_admits(graph, degrees)):
            continue
        op = assemble(graph, gammas, coords=coords)
        if not op:
            continue
        out.add_graph(graph, budget.weigh(graph), op)
    return out


def poisson_residual(pi: GradedElement) -> GradedElement:
    """[pi, pi] through the vertical Schouten bracket of the flat frame."""
    frame = pi.frame
    xi = [name for name in frame.odd if name.startswith("xi")]
    coords = list(frame.sym)
    out = GradedElement.zero(frame)
    # [P, R] = sum_k d P/d xi_k * d R/d x_k - (-1)^{(p-1)(r-1)} (R <-> P), with right xi-derivatives
    for k, (x, v) in enumerate(zip(coords, xi)):
        out = out + _right_xi(pi, v) * contract(x, pi)
    return out * 2


def _right_xi(a: GradedElement, name: str) -> GradedElement:
    """Right derivative by an odd generator: d_R a = (-1)^{|a|-1} d_L a on homogeneous a."""
    out = GradedElement.zero(a.frame, a.trunc)
    for deg in a.degrees():
        part = contract(name, a.component(deg))
        out = out + (part if (deg - 1) % 2 == 0 else -part)
    return out


def star_product(pi: GradedElement, f: GradedElement, g: GradedElement, order: int = 2,
                 budget: WeightBudget | None = None, check_poisson: bool = True) -> dict[int, WeightedElement]:
    """Coefficients of hbar^n in f * g = sum_n hbar^n / n! U_n(pi, .., pi)(f, g)."""
    if order > 2 and (budget is None or budget.max_graphs < 10_000):
        raise BudgetExhausted("orders above 2 need an explicit budget with max_graphs >= 10000")
    if check_poisson and poisson_residual(pi):
        raise NotPoisson("[pi, pi] != 0")
    budget = WeightBudget() if budget is None else budget
    coords = list(pi.frame.sym)
    out = {0: WeightedElement(pi.frame, f * g)}
    for n in range(1, order + 1):
        U = taylor_U([pi] * n, budget, coords)
        out[n] = U.map(lambda op: apply_polydiff(op, [f, g], coords)) * Fraction(1, math.factorial(n))
    return out


def bidifferential_series(pi: GradedElement, order: int = 2, budget: WeightBudget | None = None
                          ) -> dict[int, WeightedElement]:
    """B_n = U_n(pi, .., pi)/n! as weighted operators; B_0 is the product."""
    from .poly import multiplication_element

    budget = WeightBudget() if budget is None else budget
    coords = list(pi.frame.sym)
    out = {0: WeightedElement(pi.frame, multiplication_element(pi.frame, len(coords)))}
    for n in range(1, order + 1):
        out[n] = taylor_U([pi] * n, budget, coords) * Fraction(1, math.factorial(n))
    return out


def apply_series(B: Mapping[int, WeightedElement], f: Mapping[int, WeightedElement],
                 g: Mapping[int, WeightedElement],
                 coords: Sequence[str], order: int) -> dict[int, WeightedElement]:
    """Star product of hbar-series of weighted functions, truncated at ``order``.

    Products of two sampled weights are rejected: they only arise beyond the
    orders where one factor is exact.
    """
    out: dict[int, WeightedElement] = {}
    for n, Bn in B.items():
        for a, fa in f.items():
            for b, gb in g.items():
                k = n + a + b
                if k > order:
                    continue
                piece = _apply_weighted(Bn, fa, gb, coords)
                out[k] = out[k] + piece if k in out else piece
    return out


def _apply_weighted(op: WeightedElement, f: WeightedElement, g: WeightedElement,
                    coords: Sequence[str]) -> WeightedElement:
    sampled = [x for x in (op, f, g) if not x.is_exact()]
    if len(sampled) > 1:
        raise BudgetExhausted("product of two sampled weights; restrict the order")
    frame = op.frame
    res = WeightedElement(frame, apply_polydiff(op.exact, [f.exact, g.exact], coords))
    weights = {**op.weights, **f.weights, **g.weights}
    parts: dict = {}
    for k, v in op.parts.items():
        parts[k] = apply_polydiff(v, [f.exact, g.exact], coords)
    for k, v in f.parts.items():
        parts[k] = parts.get(k, GradedElement.zero(frame)) + apply_polydiff(op.exact, [v, g.exact], coords)
    for k, v in g.parts.items():
        parts[k] = parts.get(k, GradedElement.zero(frame)) + apply_polydiff(op.exact, [f.exact, v], coords)
    return WeightedElement(frame, res.exact, parts, weights)


# fibrewise Phi_n on the Fedosov side

def fedosov_omega(data) -> GradedElement:
    """omega = Q - d_L^nabla = -delta + X as a fibre vector field sum_k omega(chi_k) xi_k."""
    from .fedosov import fedosov_context
    from .graded import relabel

    ctx = fedosov_context(data.ctx.spec, data.N, with_xi=True)
    frame = ctx.frame
    om = data.omega()
    out = GradedElement.zero(frame, data.N)
    for k in range(ctx.r):
        out = out + relabel(om.image(f"chi{k}"), frame) * GradedElement.gen(frame, f"xi{k}")
    return out


def fedosov_hkr(gamma: GradedElement) -> GradedElement:
    """c xi_{k_1}..xi_{k_s} -> c (x) (1/s!) sum_sigma sgn(sigma) d_{k_sigma(1)} (x) .. (x) d_{k_sigma(s)}."""
    frame = gamma.frame
    r = len(frame.sym)
    out = GradedElement.zero(frame, gamma.trunc)
    for I, comp in _components(gamma).items():
        s = len(I)
        slots = tuple(tuple(int(j == i) for j in range(r)) for i in I)
        scaled = comp * Fraction(1, math.factorial(s))
        out = out + GradedElement(frame, {(o, sy, b, slots): c for (o, sy, b, _), c in scaled.terms.items()},
                                  gamma.trunc)
    return out


def phi_n(data, gammas: Sequence[GradedElement], budget: WeightBudget | None = None,
          max_j: int | None = None) -> WeightedElement:
    """Phi_n(gamma) = sum_{j >= 0} (1/j!) U^f_{n+j}(omega^j, gamma) on the fibre coordinates.

    The j-range is bounded by the degree count sum |gamma_k| + 1 - (n + j) >= -1.
    """
    budget = WeightBudget() if budget is None else budget
    n = len(gammas)
    omega = fedosov_omega(data)
    coords = list(omega.frame.sym)
    top = sum(polyvector_degree(g) for g in gammas) + 2 - n
    if max_j is not None:
        top = min(top, max_j)
    out = WeightedElement(omega.frame, GradedElement.zero(omega.frame, data.N))
    for j in range(0, top + 1):
        U = taylor_U([omega] * j + list(gammas), budget, coords)
        out = out + U * Fraction(1, math.factorial(j))
    return out


# line-oriented cache

@dataclass
class GraphCache:
    """One record per line: n m edges seed samples provenance value error."""

    path: Path | None = None
    records: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.path is not None:
            self.path = Path(self.path)
            if self.path.exists():
                for line in self.path.read_text().splitlines():
                    if line.strip() and not line.startswith("#"):
                        self._parse(line)

    def _parse(self, line: str) -> None:
        n, m, edges, seed, samples, prov, value, err = line.split()
        key = (f"{n} {m} {'' if edges == '-' else edges}", None if seed == "-" else int(seed), int(samples))
        val = Fraction(value) if prov == "closed-form" else float(value)
        self.records[key] = GraphWeight(val, float(err), prov, int(samples), key[1])

    @staticmethod
    def _key(graph: AdmissibleGraph, seed, samples):
        return (graph.key(), seed, samples)

    def get(self, graph: AdmissibleGraph, seed: int | None, samples: int) -> GraphWeight | None:
        hit = self.records.get(self._key(graph, seed, samples))
        if hit is None:
            hit = self.records.get(self._key(graph, None, 0))
        return hit

    def put(self, graph: AdmissibleGraph, w: GraphWeight) -> None:
        if w.is_exact:
            key = self._key(graph, None, 0)
        else:
            key = self._key(graph, w.seed, w.samples)
        self.records[key] = w

    @staticmethod
    def format_record(key, w: GraphWeight) -> str:
        gkey, seed, samples = key
        n, m, *rest = gkey.split(" ")
        edges = rest[0] if rest and rest[0] else "-"
        value = str(w.value) if w.is_exact else repr(float(w.value))
        return f"{n} {m} {edges} {'-' if seed is None else seed} {samples} {w.provenance} {value} {w.error!r}"

    def dump(self) -> str:
        lines = ["# n m edges seed samples provenance value error"]
        for key in sorted(self.records, key=lambda k: (k[0], -1 if k[1] is None else k[1], k[2])):
            lines.append(self.format_record(key, self.records[key]))
        return "\n".join(lines) + "\n"

    def save(self) -> None:
        if self.path is None:
            raise ValueError("cache has no path")
        self.path.write_text(self.dump())
