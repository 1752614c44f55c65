"""Normal-ordered rewriting in U(g) for a finite-dimensional Lie algebra.

Monomials are nondecreasing tuples of positions in a fixed basis order.
``order[p]`` is the basis index sitting at position p, so the same Lie algebra
can be normal-ordered with different conventions (e.g. B-frame before A-frame).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from itertools import permutations
from typing import Mapping, Sequence

__all__ = ["LieAlgebra", "PBWAlgebra", "PBWElement"]

PBWElement = dict  # monomial tuple -> Fraction


@dataclass(frozen=True)
class LieAlgebra:
    """Structure constants [e_i, e_j] = sum_k c[i][j][k] e_k (dense, exact)."""

    names: tuple[str, ...]
    c: tuple

    @property
    def dim(self) -> int:
        return len(self.names)

    @classmethod
    def from_sparse(cls, names: Sequence[str], brackets: Mapping[tuple[int, int], Mapping[int, object]]) -> "LieAlgebra":
        n = len(names)
        c = [[[Fraction(0)] * n for _ in range(n)] for _ in range(n)]
        for (i, j), vals in brackets.items():
            for k, v in vals.items():
                c[i][j][k] = Fraction(v)
                c[j][i][k] = -Fraction(v)
        return cls(tuple(names), tuple(tuple(tuple(r) for r in p) for p in c))

    def bracket_vec(self, i: int, j: int) -> dict[int, Fraction]:
        return {k: v for k, v in enumerate(self.c[i][j]) if v}

    def ad_matrix(self, vec: Mapping[int, Fraction]) -> list[list[Fraction]]:
        """Matrix M with ad_v(e_j) = sum_k M[k][j] e_k."""
        n = self.dim
        M = [[Fraction(0)] * n for _ in range(n)]
        for i, vi in vec.items():
            for j in range(n):
                for k in range(n):
                    if self.c[i][j][k]:
                        M[k][j] += vi * self.c[i][j][k]
        return M

    def is_abelian(self) -> bool:
        return not any(v for p in self.c for r in p for v in r)


def _add(out: dict, key, val):
    v = out.get(key, 0) + val
    if v:
        out[key] = v
    elif key in out:
        del out[key]


class PBWAlgebra:
    """U(g) with normal form relative to ``order``."""

    def __init__(self, lie: LieAlgebra, order: Sequence[int] | None = None):
        self.lie = lie
        self.order = tuple(range(lie.dim)) if order is None else tuple(order)
        if sorted(self.order) != list(range(lie.dim)):
            raise ValueError(f"order {self.order} is not a permutation of the basis")
        self.pos = {b: p for p, b in enumerate(self.order)}
        self._memo: dict = {}

    def gen(self, basis_index: int) -> PBWElement:
        return {(self.pos[basis_index],): Fraction(1)}

    def one(self) -> PBWElement:
        return {(): Fraction(1)}

    def bracket_pos(self, p: int, q: int) -> dict[int, Fraction]:
        """[x_p, x_q] in position coordinates."""
        return {self.pos[k]: v for k, v in self.lie.bracket_vec(self.order[p], self.order[q]).items()}

    def mono_times_gen(self, mono: tuple, p: int) -> PBWElement:
        """Normal form of mono * x_p."""
        key = (mono, p)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        if not mono or mono[-1] <= p:
            out = {mono + (p,): Fraction(1)}
        else:
            head, y = mono[:-1], mono[-1]
            # head * y * x_p = head * x_p * y + head * [y, x_p]
            out: dict = {}
            for m, c in self.mono_times_gen(head, p).items():
                for m2, c2 in self.mono_times_gen(m, y).items():
                    _add(out, m2, c * c2)
            for k, v in self.bracket_pos(y, p).items():
                for m, c in self.mono_times_gen(head, k).items():
                    _add(out, m, v * c)
        self._memo[key] = out
        return out

    def mono_times_mono(self, a: tuple, b: tuple) -> PBWElement:
        cur = {a: Fraction(1)}
        for p in b:
            nxt: dict = {}
            for m, c in cur.items():
                for m2, c2 in self.mono_times_gen(m, p).items():
                    _add(nxt, m2, c * c2)
            cur = nxt
        return cur

    def product(self, x: PBWElement, y: PBWElement) -> PBWElement:
        out: dict = {}
        for a, ca in x.items():
            for b, cb in y.items():
                for m, c in self.mono_times_mono(a, b).items():
                    _add(out, m, ca * cb * c)
        return out

    def add(self, *xs: PBWElement, coeffs: Sequence | None = None) -> PBWElement:
        out: dict = {}
        for idx, x in enumerate(xs):
            s = 1 if coeffs is None else coeffs[idx]
            for m, c in x.items():
                _add(out, m, s * c)
        return out

    def scale(self, x: PBWElement, s) -> PBWElement:
        return {m: c * s for m, c in x.items() if c * s}

    def word(self, basis_indices: Sequence[int]) -> PBWElement:
        """Normal form of the (possibly unordered) product of basis vectors."""
        cur = self.one()
        for b in basis_indices:
            cur = self.product(cur, self.gen(b))
        return cur

    def symmetrize(self, exps: Sequence[int]) -> PBWElement:
        """pbw of the symmetric monomial prod e_i^{exps[i]}: average over orderings."""
        letters = [i for i, e in enumerate(exps) for _ in range(e)]
        n = len(letters)
        if n == 0:
            return self.one()
        out: dict = {}
        seen = 0
        for perm in set(permutations(letters)):
            mult = _perm_multiplicity(letters)
            for m, c in self.word(perm).items():
                _add(out, m, c * mult)
            seen += mult
        scale = Fraction(1, factorial(n))
        assert seen == factorial(n)
        return {m: c * scale for m, c in out.items()}

    def degree(self, x: PBWElement) -> int:
        return max((len(m) for m in x), default=-1)

    def mono_exps(self, mono: tuple) -> tuple[int, ...]:
        """Exponent vector over basis indices for a normal monomial."""
        e = [0] * self.lie.dim
        for p in mono:
            e[self.order[p]] += 1
        return tuple(e)


def _perm_multiplicity(letters: Sequence[int]) -> int:
    """Number of index permutations producing one fixed arrangement of a multiset."""
    out = 1
    for v in set(letters):
        out *= factorial(letters.count(v))
    return out
