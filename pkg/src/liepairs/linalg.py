"""Exact rational linear algebra on sparse column data.

Vectors are dicts ``key -> Fraction``.  Matrices are built from column lists so
callers never have to fix a global index order themselves.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Hashable, Mapping, Sequence

from sympy import QQ
from sympy.polys.matrices import DomainMatrix

SparseVector = Mapping[Hashable, Fraction]


def _row_index(columns: Sequence[SparseVector], extra: Sequence[SparseVector] = ()) -> dict:
    keys = set()
    for col in list(columns) + list(extra):
        keys.update(k for k, v in col.items() if v)
    return {k: i for i, k in enumerate(sorted(keys, key=repr))}


def to_domain_matrix(columns: Sequence[SparseVector], index: dict | None = None) -> tuple[DomainMatrix, dict]:
    index = _row_index(columns) if index is None else index
    rows = [[QQ(0)] * len(columns) for _ in range(len(index))]
    for j, col in enumerate(columns):
        for k, v in col.items():
            if v:
                rows[index[k]][j] = QQ(v.numerator, v.denominator)
    return DomainMatrix(rows, (len(index), len(columns)), QQ), index


def rank(columns: Sequence[SparseVector]) -> int:
    if not columns:
        return 0
    M, index = to_domain_matrix(columns)
    if not index:
        return 0
    return M.rank()


def _to_fraction(x) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


def nullspace(columns: Sequence[SparseVector]) -> list[list[Fraction]]:
    """Basis of coefficient vectors c with sum_j c_j columns[j] = 0."""
    n = len(columns)
    if n == 0:
        return []
    M, index = to_domain_matrix(columns)
    if not index:
        return [[Fraction(int(i == j)) for i in range(n)] for j in range(n)]
    ns = M.nullspace().to_Matrix()
    return [[_to_fraction(QQ.convert(ns[r, c])) for c in range(n)] for r in range(ns.rows)]


def solve(columns: Sequence[SparseVector], target: SparseVector) -> list[Fraction] | None:
    """One solution c of sum_j c_j columns[j] = target, or None if inconsistent."""
    n = len(columns)
    index = _row_index(columns, [target])
    if not index:
        return [Fraction(0)] * n
    aug = list(columns) + [target]
    M, _ = to_domain_matrix(aug, index)
    rref, pivots = M.rref()
    if n in pivots:
        return None
    sol = [Fraction(0)] * n
    dense = rref.to_Matrix()
    for row, p in enumerate(pivots):
        sol[p] = _to_fraction(QQ.convert(dense[row, n]))
    return sol
