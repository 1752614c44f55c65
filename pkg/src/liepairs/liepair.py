"""Finite presentations of Lie pairs over a point or a polynomial chart.

A pair is given in a global frame eta_0..eta_{l-1} of L whose first ``rA``
vectors span A.  The quotient B = L/A gets the frame d_k = q(eta_{rA+k}).
Structure functions and anchors are polynomials in the chart coordinates,
stored as ``GradedElement`` values over a frame with only base generators.

Connections are arrays ``gamma[i][j][k]`` with nabla_{eta_i} d_j = sum_k gamma[i][j][k] d_k.
Curvature arrays follow the operator convention
R(eta_i, eta_j) d_b = sum_k R[i][j][b][k] d_k.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Hashable, Mapping, Sequence

from . import linalg
from .graded import Derivation, Frame, GradedElement, contract, relabel

__all__ = [
    "LiePairSpec",
    "ConnectionSpec",
    "CurvatureData",
    "TorsionData",
    "ValidationReport",
    "ModuleAction",
    "PreconditionError",
    "ModuleNotFlat",
    "validate",
    "bott_connection",
    "canonical_connection",
    "extends_bott",
    "torsion",
    "make_torsion_free",
    "curvature",
    "cochain_frame",
    "ce_differential",
    "bott_module",
    "dual_module",
    "tensor_module",
    "trivial_module",
    "solve_coboundary",
]


class PreconditionError(ValueError):
    pass


class ModuleNotFlat(ValueError):
    pass


Poly = GradedElement


def poly_frame(coords: Sequence[str]) -> Frame:
    return Frame(base=tuple(coords))


@dataclass(frozen=True)
class LiePairSpec:
    """Lie pair data in an adapted frame.

    ``c[i][j][k]`` are the structure functions of [eta_i, eta_j] = sum_k c_ij^k eta_k
    and ``anchor[i][a]`` is the a-th component of rho(eta_i).
    """

    names: tuple[str, ...]
    rA: int
    c: tuple
    anchor: tuple
    coords: tuple[str, ...] = ()
    label: str = "pair"
    pframe: Frame = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.pframe is None:
            object.__setattr__(self, "pframe", poly_frame(self.coords))
        if not 0 <= self.rA <= self.l:
            raise ValueError(f"rank of A must lie in [0, {self.l}], got {self.rA}")

    @property
    def l(self) -> int:
        return len(self.names)

    @property
    def r(self) -> int:
        return self.l - self.rA

    @property
    def m(self) -> int:
        return len(self.coords)

    @property
    def is_point(self) -> bool:
        return not self.coords

    def zero(self) -> Poly:
        return GradedElement.zero(self.pframe)

    def const(self, v) -> Poly:
        return GradedElement.scalar(self.pframe, Fraction(v))

    def coord(self, a: int) -> Poly:
        return GradedElement.gen(self.pframe, self.coords[a])

    @classmethod
    def from_constants(
        cls,
        names: Sequence[str],
        rA: int,
        brackets: Mapping[tuple[int, int], Mapping[int, Fraction]],
        label: str = "pair",
    ) -> "LiePairSpec":
        """Lie algebra pair from sparse brackets {(i, j): {k: c}} with i < j."""
        return cls.from_polynomials(names, rA, {
            key: {k: v for k, v in vals.items()} for key, vals in brackets.items()
        }, coords=(), anchor=None, label=label)

    @classmethod
    def from_polynomials(
        cls,
        names: Sequence[str],
        rA: int,
        brackets: Mapping[tuple[int, int], Mapping[int, object]],
        coords: Sequence[str] = (),
        anchor: Mapping[tuple[int, int], object] | None = None,
        label: str = "pair",
    ) -> "LiePairSpec":
        """Build from sparse data; values are rationals or polynomials on the chart.

        Only one of (i, j) and (j, i) needs to be given; the other is filled by skew symmetry.
        Giving both with inconsistent values keeps them as given so ``validate`` can report it.
        """
        pf = poly_frame(coords)
        l = len(names)

        def as_poly(v):
            if isinstance(v, GradedElement):
                return v
            return GradedElement.scalar(pf, Fraction(v))

        zero = GradedElement.zero(pf)
        c = [[[zero] * l for _ in range(l)] for _ in range(l)]
        given = set()
        for (i, j), vals in brackets.items():
            given.add((i, j))
            for k, v in vals.items():
                c[i][j][k] = as_poly(v)
        for (i, j) in list(given):
            if (j, i) not in given:
                for k in range(l):
                    c[j][i][k] = -c[i][j][k]
        rho = [[zero] * len(coords) for _ in range(l)]
        for (i, a), v in (anchor or {}).items():
            rho[i][a] = as_poly(v)
        return cls(
            names=tuple(names),
            rA=rA,
            c=tuple(tuple(tuple(row) for row in plane) for plane in c),
            anchor=tuple(tuple(row) for row in rho),
            coords=tuple(coords),
            label=label,
            pframe=pf,
        )

    def with_constant(self, i: int, j: int, k: int, value, skew: bool = True) -> "LiePairSpec":
        """Copy with c_ij^k replaced; c_ji^k follows by skew symmetry unless ``skew`` is False."""
        c = [[list(row) for row in plane] for plane in self.c]
        v = self.const(value) if not isinstance(value, GradedElement) else value
        c[i][j][k] = v
        if skew:
            c[j][i][k] = -v
        return LiePairSpec(self.names, self.rA, tuple(tuple(tuple(r) for r in p) for p in c),
                           self.anchor, self.coords, self.label, self.pframe)

    # calculus on the chart
    def anchor_apply(self, i: int, f: Poly) -> Poly:
        """rho(eta_i) acting on a polynomial."""
        out = self.zero()
        for a, coeff in enumerate(self.anchor[i]):
            if coeff:
                out = out + coeff * contract(self.coords[a], f)
        return out

    def bracket(self, s: Sequence[Poly], t: Sequence[Poly]) -> tuple[Poly, ...]:
        """Bracket of sections s = sum s_i eta_i and t = sum t_j eta_j."""
        out = [self.zero() for _ in range(self.l)]
        for i, si in enumerate(s):
            if not si:
                continue
            for j, tj in enumerate(t):
                if not tj:
                    continue
                st = si * tj
                for k in range(self.l):
                    if self.c[i][j][k]:
                        out[k] = out[k] + st * self.c[i][j][k]
        for i, si in enumerate(s):
            if si:
                for j, tj in enumerate(t):
                    d = self.anchor_apply(i, tj)
                    if d:
                        out[j] = out[j] + si * d
        for j, tj in enumerate(t):
            if tj:
                for i, si in enumerate(s):
                    d = self.anchor_apply(j, si)
                    if d:
                        out[i] = out[i] - tj * d
        return tuple(out)

    def basis_section(self, i: int) -> tuple[Poly, ...]:
        return tuple(self.const(int(k == i)) for k in range(self.l))


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    identity: str | None = None
    witness: tuple | None = None
    detail: str = ""

    def __bool__(self):
        return self.ok


def validate(spec: LiePairSpec) -> ValidationReport:
    """Check skew symmetry, Jacobi, anchor morphism and closure of A exactly.

    The Leibniz rule holds by construction, since brackets of general sections
    are defined from frame data through it.
    """
    l, rA = spec.l, spec.rA
    for i in range(l):
        for j in range(l):
            for k in range(l):
                if spec.c[i][j][k] + spec.c[j][i][k]:
                    return ValidationReport(False, "skew", (i, j, k),
                                            f"c[{i}][{j}][{k}] + c[{j}][{i}][{k}] != 0")
    for i, j, k in combinations(range(l), 3):
        total = [spec.zero() for _ in range(l)]
        for a, b, cc in ((i, j, k), (j, k, i), (k, i, j)):
            inner = spec.bracket(spec.basis_section(b), spec.basis_section(cc))
            outer = spec.bracket(spec.basis_section(a), inner)
            total = [x + y for x, y in zip(total, outer)]
        for n, v in enumerate(total):
            if v:
                return ValidationReport(False, "jacobi", (i, j, k),
                                        f"component {n} of the Jacobiator is {v!r}")
    for i, j in combinations(range(l), 2):
        for a in range(spec.m):
            lhs = spec.zero()
            for mm in range(l):
                if spec.c[i][j][mm]:
                    lhs = lhs + spec.c[i][j][mm] * spec.anchor[mm][a]
            rhs = spec.anchor_apply(i, spec.anchor[j][a]) - spec.anchor_apply(j, spec.anchor[i][a])
            if lhs != rhs:
                return ValidationReport(False, "anchor", (i, j, a),
                                        f"rho([eta_{i}, eta_{j}]) differs from [rho eta_{i}, rho eta_{j}] in coordinate {a}")
    for i, j in combinations(range(rA), 2):
        for k in range(rA, l):
            if spec.c[i][j][k]:
                return ValidationReport(False, "closure", (i, j, k),
                                        f"[eta_{i}, eta_{j}] has a component along eta_{k} outside A")
    return ValidationReport(True, detail="all identities hold")


@dataclass(frozen=True)
class ConnectionSpec:
    """Coefficients gamma[i][j][k]; rows i >= ``rows`` are undefined (partial connection)."""

    gamma: tuple
    rows: int

    @property
    def is_full(self) -> bool:
        return self.rows == len(self.gamma)

    def coeff(self, i: int, j: int, k: int) -> Poly:
        if i >= self.rows:
            raise PreconditionError(f"connection is only defined along the first {self.rows} frame vectors")
        return self.gamma[i][j][k]


def _freeze(arr):
    if isinstance(arr, list):
        return tuple(_freeze(x) for x in arr)
    return arr


def connection_from_sparse(spec: LiePairSpec, entries: Mapping[tuple[int, int, int], object]) -> ConnectionSpec:
    """Full connection from sparse {(i, j, k): value} with i over L and j, k over B."""
    g = [[[spec.zero()] * spec.r for _ in range(spec.r)] for _ in range(spec.l)]
    for (i, j, k), v in entries.items():
        g[i][j][k] = v if isinstance(v, GradedElement) else spec.const(v)
    return ConnectionSpec(_freeze(g), spec.l)


def bott_connection(spec: LiePairSpec) -> ConnectionSpec:
    """A-directions only: nabla_{eta_alpha} d_j = q([eta_alpha, eta_{rA+j}])."""
    rA, r = spec.rA, spec.r
    g = [[[spec.c[a][rA + j][rA + k] for k in range(r)] for j in range(r)] for a in range(rA)]
    zero_rows = [[[spec.zero()] * r for _ in range(r)] for _ in range(r)]
    return ConnectionSpec(_freeze(g + zero_rows), rA)


def canonical_connection(spec: LiePairSpec) -> ConnectionSpec:
    """Bott along A, half the B-bracket along B; torsion free by construction."""
    rA, r = spec.rA, spec.r
    half = Fraction(1, 2)
    g = [list(row) for row in bott_connection(spec).gamma]
    for a in range(r):
        g[rA + a] = [[spec.c[rA + a][rA + b][rA + k] * half for k in range(r)] for b in range(r)]
    return ConnectionSpec(_freeze(g), spec.l)


def extends_bott(spec: LiePairSpec, conn: ConnectionSpec) -> bool:
    bott = bott_connection(spec)
    return all(conn.gamma[a] == bott.gamma[a] for a in range(min(spec.rA, conn.rows))) and conn.rows >= spec.rA


@dataclass(frozen=True)
class TorsionData:
    T: tuple  # T[i][j][k]: d_k component of T(eta_i, eta_j)
    beta: tuple | None  # beta[a][b][k]: d_k component of beta(d_a, d_b)

    def is_zero(self) -> bool:
        return not any(v for plane in self.T for row in plane for v in row)


def torsion(spec: LiePairSpec, conn: ConnectionSpec) -> TorsionData:
    """T(x, y) = nabla_x q(y) - nabla_y q(x) - q([x, y]) on frame pairs, plus beta when defined."""
    if not conn.is_full:
        raise PreconditionError("torsion needs a connection defined along all of L")
    l, rA, r = spec.l, spec.rA, spec.r
    T = [[[spec.zero()] * r for _ in range(l)] for _ in range(l)]
    for i in range(l):
        for j in range(l):
            for k in range(r):
                v = -spec.c[i][j][rA + k]
                if j >= rA:
                    v = v + conn.gamma[i][j - rA][k]
                if i >= rA:
                    v = v - conn.gamma[j][i - rA][k]
                T[i][j][k] = v
    beta = None
    if extends_bott(spec, conn):
        for a in range(rA):
            for j in range(l):
                if any(T[a][j]):
                    raise PreconditionError(f"torsion does not factor through B x B: T(eta_{a}, eta_{j}) != 0")
        beta = _freeze([[T[rA + a][rA + b] for b in range(r)] for a in range(r)])
    return TorsionData(_freeze(T), beta)


def make_torsion_free(spec: LiePairSpec, conn: ConnectionSpec) -> ConnectionSpec:
    """Subtract half of beta along B-directions; the result is verified torsion free."""
    if not conn.is_full or not extends_bott(spec, conn):
        raise PreconditionError("make_torsion_free needs a full connection extending the Bott action")
    beta = torsion(spec, conn).beta
    rA, r = spec.rA, spec.r
    half = Fraction(1, 2)
    g = [list(row) for row in conn.gamma]
    for a in range(r):
        g[rA + a] = [[conn.gamma[rA + a][b][k] - beta[a][b][k] * half for k in range(r)] for b in range(r)]
    out = ConnectionSpec(_freeze(g), spec.l)
    if not torsion(spec, out).is_zero():
        raise ArithmeticError("torsion correction did not produce a torsion-free connection")
    return out


@dataclass(frozen=True)
class CurvatureData:
    R: tuple  # R[i][j][b][k]
    R11: tuple  # R11[alpha][a][b][k] = R[alpha][rA+a][b][k]
    R02: tuple  # R02[a][c][b][k] = R[rA+a][rA+c][b][k]
    T: TorsionData | None

    def is_zero(self) -> bool:
        return not any(v for x in self.R for y in x for z in y for v in z)


def _nabla_vec(spec: LiePairSpec, conn: ConnectionSpec, i: int, vec: Sequence[Poly]) -> list[Poly]:
    """nabla_{eta_i} of the B-section sum_k vec[k] d_k."""
    out = [spec.anchor_apply(i, g) for g in vec]
    for k, g in enumerate(vec):
        if not g:
            continue
        for n in range(spec.r):
            cf = conn.coeff(i, k, n)
            if cf:
                out[n] = out[n] + g * cf
    return out


def curvature(spec: LiePairSpec, conn: ConnectionSpec) -> CurvatureData:
    """R(x, y) = nabla_x nabla_y - nabla_y nabla_x - nabla_[x,y] on frame vectors."""
    l, rA, r = spec.l, spec.rA, spec.r
    unit = [[spec.const(int(k == b)) for k in range(r)] for b in range(r)]
    R = [[[[spec.zero()] * r for _ in range(r)] for _ in range(l)] for _ in range(l)]
    for i in range(l):
        for j in range(i + 1, l):
            for b in range(r):
                v1 = _nabla_vec(spec, conn, i, _nabla_vec(spec, conn, j, unit[b]))
                v2 = _nabla_vec(spec, conn, j, _nabla_vec(spec, conn, i, unit[b]))
                res = [x - y for x, y in zip(v1, v2)]
                for mm in range(l):
                    cf = spec.c[i][j][mm]
                    if cf:
                        w = _nabla_vec(spec, conn, mm, unit[b])
                        res = [x - cf * y for x, y in zip(res, w)]
                R[i][j][b] = res
                R[j][i][b] = [-x for x in res]
    R11 = [[R[a][rA + c] for c in range(r)] for a in range(rA)]
    R02 = [[R[rA + a][rA + c] for c in range(r)] for a in range(r)]
    T = torsion(spec, conn) if conn.is_full else None
    return CurvatureData(_freeze(R), _freeze(R11), _freeze(R02), T)


# Chevalley-Eilenberg complexes with coefficients in a module

@dataclass(frozen=True)
class ModuleAction:
    """Action of the first ``view`` frame vectors on a free module.

    ``action[i][b]`` maps basis element b to {basis element: polynomial}, giving
    nabla_{eta_i} e_b.  Module basis labels become tensor slots of cochains.
    """

    basis: tuple[Hashable, ...]
    view: int
    action: tuple


def trivial_module(spec: LiePairSpec, view: int | None = None) -> ModuleAction:
    view = spec.rA if view is None else view
    return ModuleAction((0,), view, tuple({0: {}} for _ in range(view)))


def bott_module(spec: LiePairSpec, conn: ConnectionSpec | None = None, view: int | None = None) -> ModuleAction:
    """B with the Bott action (or the given connection along the first ``view`` vectors)."""
    view = spec.rA if view is None else view
    conn = bott_connection(spec) if conn is None else conn
    act = []
    for i in range(view):
        act.append({b: {k: conn.coeff(i, b, k) for k in range(spec.r) if conn.coeff(i, b, k)} for b in range(spec.r)})
    return ModuleAction(tuple(range(spec.r)), view, tuple(act))


def dual_module(mod: ModuleAction) -> ModuleAction:
    act = []
    for i in range(mod.view):
        d = {b: {} for b in mod.basis}
        for b, row in mod.action[i].items():
            for k, v in row.items():
                d[k][b] = d[k][b] - v if b in d[k] else -v
        act.append({b: {k: v for k, v in row.items() if v} for b, row in d.items()})
    return ModuleAction(mod.basis, mod.view, tuple(act))


def tensor_module(*mods: ModuleAction) -> ModuleAction:
    """Tensor product; basis labels are tuples of factor labels."""
    view = mods[0].view
    if any(m.view != view for m in mods):
        raise ValueError("modules act through different views")
    basis = [()]
    for m in mods:
        basis = [b + (x,) for b in basis for x in m.basis]
    act = []
    for i in range(view):
        row = {}
        for b in basis:
            out = {}
            for pos, m in enumerate(mods):
                for k, v in m.action[i][b[pos]].items():
                    key = b[:pos] + (k,) + b[pos + 1:]
                    out[key] = out[key] + v if key in out else v
            row[b] = {k: v for k, v in out.items() if v}
        act.append(row)
    return ModuleAction(tuple(basis), view, tuple(act))


def cochain_frame(spec: LiePairSpec, view: int | None = None, prefix: str = "lam") -> Frame:
    view = spec.l if view is None else view
    return Frame(odd=tuple(f"{prefix}{i}" for i in range(view)), base=spec.coords)


def lift_poly(p: Poly, frame: Frame) -> GradedElement:
    return relabel(p, frame)


def ce_derivation(spec: LiePairSpec, frame: Frame, view: int, odd_offset: int = 0) -> Derivation:
    """Chevalley-Eilenberg differential on forms of the first ``view`` frame vectors.

    lambda_k -> -1/2 sum c_ij^k lambda_i lambda_j and x_a -> sum_i rho_ia lambda_i.
    ``odd_offset`` is the position of lambda_0 among the odd generators of ``frame``.
    """
    lam = [GradedElement.gen(frame, frame.odd[odd_offset + i]) for i in range(view)]
    images = {}
    half = Fraction(-1, 2)
    for k in range(view):
        img = GradedElement.zero(frame)
        for i in range(view):
            for j in range(view):
                cf = spec.c[i][j][k]
                if cf:
                    img = img + lift_poly(cf, frame) * lam[i] * lam[j] * half
        images[frame.odd[odd_offset + k]] = img
    for a, name in enumerate(spec.coords):
        img = GradedElement.zero(frame)
        for i in range(view):
            if spec.anchor[i][a]:
                img = img + lift_poly(spec.anchor[i][a], frame) * lam[i]
        images[name] = img
    return Derivation.from_images(frame, 1, images)


def split_slots(a: GradedElement) -> dict:
    """Group terms by slot tuple; each value has an empty slot part."""
    out: dict = {}
    for (o, s, b, t), c in a.terms.items():
        out.setdefault(t, {})[(o, s, b, ())] = c
    return {t: GradedElement(a.frame, terms, a.trunc) for t, terms in out.items()}


def with_slots(a: GradedElement, slots: tuple) -> GradedElement:
    return GradedElement(a.frame, {(o, s, b, slots): c for (o, s, b, _), c in a.terms.items()}, a.trunc)


def ce_differential(spec: LiePairSpec, module: ModuleAction, cochain: GradedElement,
                    check_flat: bool = True) -> GradedElement:
    """d(omega (x) e_b) = d omega (x) e_b + (-1)^|omega| omega wedge sum_i lambda_i (x) nabla_i e_b.

    Cochains live on ``cochain_frame(spec, module.view)`` with slot (b,) for e_b.
    """
    frame = cochain.frame
    if check_flat:
        assert_flat(spec, module, frame)
    return _ce_apply(spec, module, cochain)


def _ce_apply(spec: LiePairSpec, module: ModuleAction, cochain: GradedElement) -> GradedElement:
    frame = cochain.frame
    D = ce_derivation(spec, frame, module.view)
    lam = [GradedElement.gen(frame, frame.odd[i]) for i in range(module.view)]
    out = GradedElement.zero(frame, cochain.trunc)
    for slot, omega in split_slots(cochain).items():
        if len(slot) != 1:
            raise ValueError(f"cochain slot must hold one module basis label, got {slot}")
        (b,) = slot
        out = out + with_slots(D(omega), slot)
        for deg in omega.degrees():
            part = omega.component(deg)
            sign = -1 if deg % 2 else 1
            for i in range(module.view):
                for k, v in module.action[i][b].items():
                    out = out + with_slots(part * lam[i] * lift_poly(v, frame) * sign, (k,))
    return out


def assert_flat(spec: LiePairSpec, module: ModuleAction, frame: Frame | None = None) -> None:
    frame = cochain_frame(spec, module.view) if frame is None else frame
    for b in module.basis:
        e = GradedElement.scalar(frame, 1, slots=(b,))
        dd = _ce_apply(spec, module, _ce_apply(spec, module, e))
        if dd:
            raise ModuleNotFlat(f"action is not flat: d^2 e_{b} = {dd!r}")


def solve_coboundary(spec: LiePairSpec, module: ModuleAction, target: GradedElement,
                     degree_bound: int = 0) -> GradedElement | None:
    """A 0-cochain phi with d phi = target, searched among polynomials of degree <= degree_bound."""
    from itertools import product as iproduct

    frame = target.frame
    monos = [e for e in iproduct(range(degree_bound + 1), repeat=spec.m) if sum(e) <= degree_bound]
    unknowns = []
    columns = []
    for b in module.basis:
        for e in monos:
            phi = GradedElement(frame, {((), (), tuple(e), (b,)): Fraction(1)})
            unknowns.append(phi)
            columns.append(dict(_ce_apply(spec, module, phi).terms))
    sol = linalg.solve(columns, dict(target.terms))
    if sol is None:
        return None
    out = GradedElement.zero(frame)
    for c, phi in zip(sol, unknowns):
        if c:
            out = out + phi * c
    return out
