"""Batch front end: load a Lie pair from YAML, run one stage, write a line report.

Report lines are ``key = value``.  Exact values print as ``p/q``, sampled
values as ``mean ± error``.  The config that produced a report is embedded in
it and the last line is always a ``STATUS`` record.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import sympy
import yaml

from .atiyah import (
    SERIES_KINDS,
    atiyah_cocycle_fedosov,
    atiyah_cocycle_pair,
    atiyah_fedosov_residual,
    atiyah_frame,
    atiyah_pair_residual,
    contract_by,
    d_F,
    det_direct,
    divergence,
    low_part,
    pair_form_differential,
    sigma_tilde,
    todd_cocycle,
    todd_series,
    trace,
)
from .duflo import duflo_check
from .fedosov import (
    fedosov_X,
    fedosov_context,
    h_tilde,
    q_square_residual,
    residual_below,
)
from .graded import Derivation, GradedElement, format_element, format_scalar, format_word, relabel
from .graphs import (
    AdmissibleGraph,
    BudgetExhausted,
    GraphWeight,
    NotPoisson,
    WeightBudget,
    WeightedElement,
    apply_series,
    bidifferential_series,
    enumerate_graphs,
    fedosov_hkr,
    flat_frame,
    phi_n,
    weight,
)
from .liepair import (
    ConnectionSpec,
    LiePairSpec,
    PreconditionError,
    bott_connection,
    canonical_connection,
    connection_from_sparse,
    make_torsion_free,
    poly_frame,
    validate,
)
from .poly import _t_basis, ce_d_T, cohomology, hkr, lie_algebra_of, pair_complexes, total_d_D

__all__ = ["RunConfig", "ConfigError", "Report", "load_config", "spec_from_config", "run", "main", "EXIT_CODES"]

COMMANDS = (
    "validate", "fedosov", "atiyah", "todd", "cohomology", "hkr-check",
    "graph-weights", "star-product", "duflo-check", "phi1-check",
)
WEIGHT_MODES = ("exact-if-known", "monte-carlo")
EXIT_CODES = {"ok": 0, "parse": 2, "validation": 3, "precondition": 4, "internal": 5}
BUNDLED = {"sl2": "sl2_borel.yaml", "solvable": "solvable.yaml"}


class ConfigError(ValueError):
    """The config file or flags cannot be turned into a run."""


class ValidationFailure(ValueError):
    pass


class CheckFailed(AssertionError):
    """An identity that must hold exactly (or within sampling error) did not."""


@dataclass
class RunConfig:
    input: str
    command: str
    trunc: int | None = None
    order: int | None = None
    filtration: int | None = None
    mode: str = "exact-if-known"
    samples: int = 100_000
    seed: int | None = None
    out: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        if self.mode not in WEIGHT_MODES:
            raise ConfigError(f"unknown weight mode {self.mode!r}")
        if self.mode == "monte-carlo" and self.seed is None:
            raise ConfigError("monte-carlo weights need --seed")
        if self.samples <= 0:
            raise ConfigError("--samples must be positive")
        for name in ("trunc", "order", "filtration"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigError(f"--{name} must be nonnegative")

    def as_record(self) -> dict:
        return {"command": self.command, "trunc": self.trunc, "order": self.order,
                "filtration": self.filtration, "mode": self.mode, "samples": self.samples, "seed": self.seed}


# config loading

def _read_text(path: str) -> str:
    if path.startswith("bundled:"):
        name = path.split(":", 1)[1]
        if name not in BUNDLED:
            raise ConfigError(f"no bundled config {name!r}; available: {', '.join(sorted(BUNDLED))}")
        return resources.files("liepairs").joinpath("data", BUNDLED[name]).read_text(encoding="utf-8")
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def load_config(path: str) -> dict:
    try:
        data = yaml.safe_load(_read_text(path))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping at top level")
    return data


def _parse_value(v: Any, coords: tuple[str, ...]) -> Fraction | GradedElement:
    """Rational (int, "p/q") or, on a chart, a polynomial string in the coordinates."""
    if isinstance(v, bool):
        raise ConfigError(f"boolean {v!r} is not a coefficient")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        raise ConfigError(f"float {v!r} is not exact; write it as p/q")
    if not isinstance(v, str):
        raise ConfigError(f"cannot read coefficient {v!r}")
    try:
        return Fraction(v.strip())
    except ValueError:
        pass
    if not coords:
        raise ConfigError(f"coefficient {v!r} is not a rational and the base is a point")
    syms = sympy.symbols(coords)
    try:
        expr = sympy.sympify(v, locals=dict(zip(coords, syms)), rational=True)
        P = sympy.Poly(expr, *syms, domain="QQ")
    except (sympy.SympifyError, sympy.PolynomialError, TypeError) as exc:
        raise ConfigError(f"coefficient {v!r} is not a polynomial in {', '.join(coords)}") from exc
    pf = poly_frame(coords)
    terms = {((), (), tuple(int(e) for e in mono), ()): Fraction(int(c.p), int(c.q)) for mono, c in P.terms()}
    return GradedElement(pf, terms)


def _triples(raw: Any, what: str, bounds: tuple[int, int, int], coords) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, list):
        raise ConfigError(f"{what} must be a list of [i, j, k, value] entries")
    out = {}
    for entry in raw:
        if not (isinstance(entry, list) and len(entry) == 4):
            raise ConfigError(f"{what} entry {entry!r} must be [i, j, k, value]")
        i, j, k, v = entry
        for idx, top in zip((i, j, k), bounds):
            if not isinstance(idx, int) or not 0 <= idx < top:
                raise ConfigError(f"{what} entry {entry!r} has an index outside [0, {top})")
        if (i, j, k) in out:
            raise ConfigError(f"{what} entry {(i, j, k)} given twice")
        out[(i, j, k)] = _parse_value(v, coords)
    return out


def spec_from_config(cfg: dict) -> LiePairSpec:
    for key in ("basis_names", "ranks", "structure_constants"):
        if key not in cfg:
            raise ConfigError(f"config is missing {key!r}")
    names = cfg["basis_names"]
    if not (isinstance(names, list) and names and all(isinstance(n, str) for n in names)):
        raise ConfigError("basis_names must be a nonempty list of strings")
    if len(set(names)) != len(names):
        raise ConfigError("basis_names must be distinct")
    ranks = cfg["ranks"]
    if not (isinstance(ranks, dict) and isinstance(ranks.get("L"), int) and isinstance(ranks.get("A"), int)):
        raise ConfigError("ranks must be a mapping {L: int, A: int}")
    l, rA = ranks["L"], ranks["A"]
    if l != len(names):
        raise ConfigError(f"ranks.L = {l} but {len(names)} basis names are given")
    if not 0 <= rA <= l:
        raise ConfigError(f"ranks.A = {rA} must lie in [0, {l}]")
    base = cfg.get("base", "point")
    anchor = {}
    if base == "point":
        coords: tuple[str, ...] = ()
    elif isinstance(base, dict) and isinstance(base.get("coordinates"), list):
        coords = tuple(str(c) for c in base["coordinates"])
        for entry in base.get("anchor") or []:
            if not (isinstance(entry, list) and len(entry) == 3):
                raise ConfigError(f"anchor entry {entry!r} must be [i, a, value]")
            i, a, v = entry
            if not (isinstance(i, int) and 0 <= i < l and isinstance(a, int) and 0 <= a < len(coords)):
                raise ConfigError(f"anchor entry {entry!r} has an index out of range")
            anchor[(i, a)] = _parse_value(v, coords)
    else:
        raise ConfigError("base must be 'point' or {coordinates: [...], anchor: [[i, a, value], ...]}")
    sc = _triples(cfg["structure_constants"], "structure_constants", (l, l, l), coords)
    brackets: dict = {}
    for (i, j, k), v in sc.items():
        brackets.setdefault((i, j), {})[k] = v
    pf = poly_frame(coords)
    brackets = {key: {k: v if isinstance(v, GradedElement) else GradedElement.scalar(pf, v) for k, v in vals.items()}
                for key, vals in brackets.items()}
    return LiePairSpec.from_polynomials(names, rA, brackets, coords=coords,
                                        anchor={k: v if isinstance(v, GradedElement) else GradedElement.scalar(pf, v)
                                                for k, v in anchor.items()},
                                        label=str(cfg.get("label", "pair")))


def connection_from_config(spec: LiePairSpec, cfg: dict) -> ConnectionSpec:
    raw = cfg.get("connection", "canonical")
    if raw == "canonical":
        conn = canonical_connection(spec)
    elif isinstance(raw, list):
        entries = _triples(raw, "connection", (spec.l, spec.r, spec.r), spec.coords)
        bott = bott_connection(spec)
        for a in range(spec.rA):
            for j in range(spec.r):
                for k in range(spec.r):
                    entries.setdefault((a, j, k), bott.gamma[a][j][k])
        conn = connection_from_sparse(spec, entries)
    else:
        raise ConfigError("connection must be 'canonical' or a list of [i, j, k, value] entries")
    return make_torsion_free(spec, conn) if cfg.get("torsion_free", True) else conn


# report

def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return format_scalar(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, GradedElement):
        return format_element(v)
    if isinstance(v, GraphWeight):
        if v.is_exact:
            return f"{format_scalar(Fraction(v.value))} (closed-form)"
        return f"{_fmt_float(v.value, v.error)} (monte-carlo samples={v.samples} seed={v.seed})"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _fmt_float(value: float, error: float) -> str:
    return f"{float(value):.8g} ± {float(error):.3g}"


@dataclass
class Report:
    lines: list[str] = field(default_factory=list)
    status: str = "ok"
    failures: list[str] = field(default_factory=list)

    def add(self, key: str, value: Any) -> None:
        text = _fmt(value).replace("\n", " ")
        self.lines.append(f"{key} = {text}")

    def measured(self, key: str, value: float, error: float) -> None:
        self.lines.append(f"{key} = {_fmt_float(value, error)}")

    def check(self, key: str, ok: bool) -> None:
        self.add(key, bool(ok))
        if not ok:
            self.failures.append(key)

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _derivation_records(rep: Report, prefix: str, D: Derivation) -> None:
    for name in sorted(D.images):
        img = D.images[name]
        if img:
            rep.add(f"{prefix}.{name}", img)


def _count_terms(D: Derivation) -> int:
    return sum(len(img.terms) for img in D.images.values())


# commands

def cmd_validate(spec, cfg, rc: RunConfig, rep: Report) -> None:
    rep.add("pair.ranks", f"L={spec.l} A={spec.rA} B={spec.r}")
    rep.add("pair.base", "point" if spec.is_point else ",".join(spec.coords))


def cmd_fedosov(spec, cfg, rc, rep) -> None:
    N = 6 if rc.trunc is None else rc.trunc
    conn = connection_from_config(spec, cfg)
    data = fedosov_X(spec, conn, N=N)
    rep.add("fedosov.N", N)
    for k in sorted(data.X):
        _derivation_records(rep, f"X_{k}", data.X[k])
    X2, hR = data.X.get(2), h_tilde(data.ctx, data.R)
    rep.check("X_2_equals_h_tilde_R", hR.is_zero() if X2 is None else (X2 - hR).is_zero())
    rep.check("h_tilde_X_zero", h_tilde(data.ctx, data.X_total()).is_zero())
    residual = residual_below(q_square_residual(data), N)
    rep.add("q_square_residual", _count_terms(residual))
    if not residual.is_zero():
        rep.failures.append("q_square_residual")


def cmd_atiyah(spec, cfg, rc, rep) -> None:
    if spec.r == 0:
        raise PreconditionError("the Atiyah cocycle needs a nonzero quotient B")
    N = 5 if rc.trunc is None else rc.trunc
    conn = connection_from_config(spec, cfg)
    M = atiyah_cocycle_pair(spec, conn)
    for j in range(spec.r):
        for k in range(spec.r):
            rep.add(f"At_pair[{j}][{k}]", M[j][k])
    rep.check("At_pair_closed", not atiyah_pair_residual(spec, conn))
    data = fedosov_X(spec, conn, N=N)
    Mf = atiyah_cocycle_fedosov(data)
    target = atiyah_frame(spec)
    rep.add("fedosov.N", N)
    rep.check("sigma_tilde_At_fedosov_equals_R11",
              all(sigma_tilde(Mf[j][k], spec, target) == M[j][k] for j in range(spec.r) for k in range(spec.r)))
    fr = atiyah_frame(spec, fedosov=True)
    gap = low_part(trace(Mf) - d_F(divergence(data, fr), spec.r), N - 1)
    rep.check("trace_At_equals_dF_div", not gap)
    rep.check("At_fedosov_closed_below_N-2", all(not v for v in atiyah_fedosov_residual(data)))


def cmd_todd(spec, cfg, rc, rep) -> None:
    K = 8 if rc.order is None else rc.order
    for kind in SERIES_KINDS:
        rep.add(f"series.{kind}", list(todd_series(kind, K).coefficients))
    if spec.r == 0:
        rep.add("todd_cocycle", "rank of B is zero; the cocycle is 1")
        return
    conn = connection_from_config(spec, cfg)
    M = atiyah_cocycle_pair(spec, conn)
    D = pair_form_differential(spec)
    for kind in SERIES_KINDS:
        T = todd_cocycle(M, kind)
        for k, comp in enumerate(T.components):
            rep.add(f"todd.{kind}.{k}", comp)
        rep.check(f"todd.{kind}.closed", all(not D(c) for c in T.components))
        if spec.r <= 2:
            rep.check(f"todd.{kind}.matches_determinant", T.total() == det_direct(M, kind))


def cmd_cohomology(spec, cfg, rc, rep) -> None:
    F = 2 if rc.filtration is None else rc.filtration
    rep.add("filtration", F)
    for side in ("T", "D"):
        res = cohomology(spec, side, F, with_hkr=False)
        for k in sorted(res.dims):
            rep.add(f"H_{side}[{k}].dim", res.dims[k])
            rep.add(f"C_{side}[{k}].dim", res.chain_dims[k])
            if side == "T":
                for i, z in enumerate(res.representatives[k]):
                    rep.add(f"H_T[{k}].rep[{i}]", z)


def cmd_hkr_check(spec, cfg, rc, rep) -> None:
    F = 2 if rc.filtration is None else rc.filtration
    pc = pair_complexes(spec)
    basis = [v for k in sorted(_t_basis(pc, F)) for v in _t_basis(pc, F)[k]]
    bad = sum(1 for v in basis if hkr(pc, ce_d_T(pc, v)) != total_d_D(pc, hkr(pc, v)))
    rep.add("filtration", F)
    rep.add("hkr.basis_size", len(basis))
    rep.check("hkr.chain_map", bad == 0)
    res = cohomology(spec, "T", F)
    for k in sorted(res.dims):
        rep.add(f"H_T[{k}].dim", res.dims[k])
        rep.add(f"H_D[{k}].dim", res.target_dims[k])
        rep.add(f"hkr[{k}].rank", res.hkr_rank[k])
        rep.check(f"hkr[{k}].rank_equal", res.hkr_rank[k] == res.dims[k] == res.target_dims[k])


def _graphs_from_config(cfg: dict) -> list[AdmissibleGraph]:
    raw = cfg.get("graphs")
    if raw is None:
        return list(enumerate_graphs(1, 2, 2))
    if not isinstance(raw, list):
        raise ConfigError("graphs must be a list of {n, m, edges}")
    out = []
    for g in raw:
        try:
            out.append(AdmissibleGraph(int(g["n"]), int(g["m"]), tuple(tuple(e) for e in g["edges"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad graph entry {g!r}: {exc}") from exc
    return out


def cmd_graph_weights(spec, cfg, rc, rep) -> None:
    for graph in _graphs_from_config(cfg):
        if rc.mode == "exact-if-known":
            w = weight(graph, "exact-if-known", rc.samples, rc.seed) if rc.seed is not None \
                else _exact_or_fail(graph)
        else:
            w = weight(graph, "monte-carlo", rc.samples, rc.seed)
        rep.add(f"weight[{graph.key()}]", w)


def _exact_or_fail(graph: AdmissibleGraph) -> GraphWeight:
    try:
        return weight(graph, "exact-if-known")
    except ValueError as exc:
        raise PreconditionError(f"graph {graph.key()} has no closed form; pass --seed to sample it") from exc


def _flat_function(frame, raw: Any, what: str) -> GradedElement:
    text = str(raw)
    coords = tuple(frame.sym)
    syms = sympy.symbols(coords)
    try:
        P = sympy.Poly(sympy.sympify(text, locals=dict(zip(coords, syms)), rational=True), *syms, domain="QQ")
    except (sympy.SympifyError, sympy.PolynomialError, TypeError) as exc:
        raise ConfigError(f"{what} = {raw!r} is not a polynomial in {', '.join(coords)}") from exc
    terms = {((), tuple(int(e) for e in mono), (), ()): Fraction(int(c.p), int(c.q)) for mono, c in P.terms()}
    return GradedElement(frame, terms)


def _weighted_records(rep: Report, key: str, W: WeightedElement) -> None:
    frame = W.frame
    for w, (v, e) in sorted(W.evaluate().items(), key=lambda t: format_word(frame, t[0])):
        exact = W.exact.terms.get(w)
        if W.is_exact() or (e == 0.0 and all(w not in p.terms for p in W.parts.values())):
            rep.add(f"{key}[{format_word(frame, w)}]", Fraction(exact) if exact is not None else Fraction(0))
        else:
            rep.measured(f"{key}[{format_word(frame, w)}]", v, e)


def associativity_bounded(diff: WeightedElement, z: float = 3.0, max_weight_err: float = 1e-2) -> bool:
    """Every coefficient within z propagated errors of zero; every sampled weight error at most max_weight_err."""
    if any(w.error > max_weight_err for w in diff.weights.values()):
        return False
    return all(abs(v) <= z * e + 1e-12 for v, e in diff.evaluate().values())


def cmd_star_product(spec, cfg, rc, rep) -> None:
    order = 2 if rc.order is None else rc.order
    if order > 2:
        raise PreconditionError("star-product is limited to order 2 in a batch run")
    star = cfg.get("star", {}) or {}
    frame = flat_frame(2)
    pi = GradedElement.gen(frame, "xi0") * GradedElement.gen(frame, "xi1")
    fs = [_flat_function(frame, star.get(name, default), name) for name, default in (("f", "x0"), ("g", "x1"), ("h", "x0*x1"))]
    budget = WeightBudget(samples=rc.samples, seed=0 if rc.seed is None else rc.seed, mode=rc.mode)
    if rc.seed is None and order >= 2:
        raise PreconditionError("order-2 star products sample weights; pass --seed")
    B = bidifferential_series(pi, order, budget)
    coords = list(frame.sym)

    def series(x: GradedElement):
        return {0: WeightedElement(frame, x)}

    f, g, h = fs
    fg = apply_series(B, series(f), series(g), coords, order)
    for n in sorted(fg):
        _weighted_records(rep, f"f*g.hbar{n}", fg[n])
    rep.check("f*g.hbar0_exact", fg[0].is_exact() and fg[0].exact == f * g)
    if order >= 2:
        left = apply_series(B, fg, series(h), coords, order)
        right = apply_series(B, series(f), apply_series(B, series(g), series(h), coords, order), coords, order)
        for n in range(order + 1):
            diff = left[n] - right[n]
            worst, err = diff.max_abs()
            rep.measured(f"associativity.hbar{n}", worst, err)
            rep.check(f"associativity.hbar{n}.bounded", associativity_bounded(diff))


def cmd_duflo_check(spec, cfg, rc, rep) -> None:
    lie = lie_algebra_of(spec)
    degree = 4 if rc.order is None else rc.order
    res = duflo_check(lie, degree)
    rep.add("duflo.degree", degree)
    for k in sorted(res.invariant_dims):
        rep.add(f"invariants[{k}].dim", res.invariant_dims[k])
    rep.add("duflo.pairs_checked", res.pairs_checked)
    rep.add("duflo.failures", len(res.duflo_failures))
    rep.add("plain_pbw.discrepancies", len(res.plain_discrepancies))
    for label, _ in res.plain_discrepancies:
        rep.add("plain_pbw.discrepancy", label)
    rep.check("duflo.multiplicative", res.ok)


def cmd_phi1_check(spec, cfg, rc, rep) -> None:
    if rc.seed is None:
        raise PreconditionError("phi1-check samples graph weights; pass --seed")
    if spec.r < 1:
        raise PreconditionError("phi1-check needs a nonzero quotient B")
    N = 4 if rc.trunc is None else rc.trunc
    conn = connection_from_config(spec, cfg)
    data = fedosov_X(spec, conn, N=N)
    fx = fedosov_context(spec, N, with_xi=True).frame
    gamma = GradedElement.gen(fx, "xi0")
    for k in range(1, min(spec.r, 2)):
        gamma = gamma * GradedElement.gen(fx, f"xi{k}")
    budget = WeightBudget(samples=rc.samples, seed=rc.seed, mode=rc.mode)
    lhs = phi_n(data, [gamma], budget)
    fa = atiyah_frame(spec, fedosov=True, with_xi=True)
    T = todd_cocycle(atiyah_cocycle_fedosov(data, fa), "sqrt_ttodd")
    rhs = fedosov_hkr(relabel(contract_by(T.total(), relabel(gamma, fa)), fx))
    rep.add("gamma", gamma)
    vals = lhs.evaluate()
    worst = 0.0
    for w in sorted(set(vals) | set(rhs.terms), key=lambda t: format_word(fx, t)):
        v, e = vals.get(w, (0.0, 0.0))
        exact = rhs.terms.get(w, Fraction(0))
        key = format_word(fx, w)
        rep.measured(f"phi1[{key}]", v, e)
        rep.add(f"todd_side[{key}]", Fraction(exact))
        gap = abs(v - float(exact))
        if gap > 1e-12:
            worst = max(worst, gap / e if e > 0 else math.inf)
    rep.add("max_z", f"{worst:.3f}")
    rep.check("phi1.within_5_se", worst <= 5)


HANDLERS: dict[str, Callable] = {
    "validate": cmd_validate,
    "fedosov": cmd_fedosov,
    "atiyah": cmd_atiyah,
    "todd": cmd_todd,
    "cohomology": cmd_cohomology,
    "hkr-check": cmd_hkr_check,
    "graph-weights": cmd_graph_weights,
    "star-product": cmd_star_product,
    "duflo-check": cmd_duflo_check,
    "phi1-check": cmd_phi1_check,
}


def run(rc: RunConfig) -> tuple[int, Report]:
    """Run one command; the report always ends with a STATUS record."""
    rep = Report()
    rep.add("report", "liepairs")
    rep.add("run", json.dumps(rc.as_record(), sort_keys=True))
    kind, message = "ok", ""
    try:
        cfg = load_config(rc.input)
        rep.add("config", json.dumps(cfg, sort_keys=True, default=str))
        spec = spec_from_config(cfg)
        verdict = validate(spec)
        rep.add("validate.ok", verdict.ok)
        if not verdict.ok:
            rep.add("validate.identity", verdict.identity)
            rep.add("validate.witness", list(verdict.witness or ()))
            raise ValidationFailure(verdict.detail)
        HANDLERS[rc.command](spec, cfg, rc, rep)
        if rep.failures:
            raise CheckFailed("failed: " + ", ".join(rep.failures))
    except ConfigError as exc:
        kind, message = "parse", str(exc)
    except ValidationFailure as exc:
        kind, message = "validation", str(exc)
    except (PreconditionError, BudgetExhausted, NotPoisson) as exc:
        kind, message = "precondition", str(exc)
    except CheckFailed as exc:
        kind, message = "internal", str(exc)
    except Exception as exc:  # anything else is a bug surfaced as an internal failure
        kind, message = "internal", f"{type(exc).__name__}: {exc}"
    status = "ok" if kind == "ok" else f"error kind={kind} message={json.dumps(message)}"
    rep.status = kind
    rep.lines.append(f"STATUS {status}")
    return EXIT_CODES[kind], rep


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="liepairs", description="Exact computations for Lie pairs.")
    p.add_argument("config", nargs="?", default="bundled:sl2",
                   help="YAML pair description, or bundled:sl2 / bundled:solvable (default bundled:sl2)")
    p.add_argument("--command", required=True, choices=COMMANDS)
    p.add_argument("--trunc", type=int, help="symmetric-degree truncation N")
    p.add_argument("--order", type=int, help="series order, star-product order or Duflo degree")
    p.add_argument("--filtration", type=int, help="filtration degree for cohomology and hkr-check")
    p.add_argument("--mode", default="exact-if-known", choices=WEIGHT_MODES)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="write the report here instead of stdout")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = RunConfig(args.config, args.command, args.trunc, args.order, args.filtration,
                       args.mode, args.samples, args.seed, args.out)
    except ConfigError as exc:
        print(f"STATUS error kind=parse message={json.dumps(str(exc))}", file=sys.stderr)
        return EXIT_CODES["parse"]
    code, rep = run(rc)
    if rc.out:
        Path(rc.out).write_text(rep.text(), encoding="utf-8")
        print(f"{len(rep.lines)} records written to {rc.out}; {rep.lines[-1]}")
    else:
        sys.stdout.write(rep.text())
    return code


if __name__ == "__main__":
    sys.exit(main())
