"""One PASS/FAIL line per acceptance criterion; each test also asserts its verdict."""

import hashlib
import itertools
import random
import subprocess
import sys
import time
from fractions import Fraction

from conftest import SL2_BRACKETS, record_acceptance
from test_atiyah import td_oracle
from test_fedosov import _transfer, as_frame
from test_poly import FLAT as OP_FRAME, NAMES as OP_NAMES, random_D, random_op, random_T, sgn

from liepairs.atiyah import (
    atiyah_cocycle_fedosov,
    atiyah_cocycle_pair,
    atiyah_frame,
    d_F,
    divergence,
    low_part,
    series_mul,
    sigma_tilde,
    todd_series,
    trace,
)
from liepairs.duflo import duflo_check
from liepairs.fedosov import (
    contraction_residuals,
    decalage,
    fedosov_X,
    fedosov_context,
    fedosov_contraction,
    h_tilde,
    linfty_jacobi_residuals,
    q_square_residual,
    residual_below,
    schouten_vertical,
    transfer_brackets,
)
from liepairs.graded import GradedElement, random_element
from liepairs.graphs import (
    AdmissibleGraph,
    WeightBudget,
    WeightedElement,
    apply_series,
    bidifferential_series,
    flat_frame,
    hkr_graph,
    weight,
)
from liepairs.liepair import canonical_connection, make_torsion_free
from liepairs.pbw import LieAlgebra
from liepairs.poly import (
    bott_derivation_T,
    ce_d_D,
    ce_d_T,
    cohomology,
    cup,
    gerstenhaber,
    hkr,
    hochschild_d,
    multiplication_element,
    pair_complexes,
    schouten,
    total_d_D,
    total_degree_D,
)


def signed_dH(pc, x):
    out = GradedElement.zero(pc.frame_D)
    for p in x.degrees():
        out = out + hochschild_d(pc, x.component(p)) * sgn(p)
    return out


def report(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    record_acceptance(line)
    assert ok, line


def test_criterion_1_contraction_suite(sl2):
    start = time.perf_counter()
    ctx = fedosov_context(sl2, None)
    rng = random.Random(2024)
    src = [random_element(ctx.frame, rng, max_sym=6) for _ in range(100)]
    tgt = [random_element(ctx.target, rng) for _ in range(100)]
    res = contraction_residuals(fedosov_contraction(ctx), src, tgt)
    elapsed = time.perf_counter() - start
    failed = sorted(k for k, v in res.items() if not v)
    report(1, not failed and elapsed < 60,
           f"contraction identities exact on 100+100 random elements, S-degree <= 6, (l, rA) = (3, 1); "
           f"failed={failed or 'none'}; {elapsed:.1f}s < 60s")


def test_criterion_2_fedosov(sl2):
    start = time.perf_counter()
    data = fedosov_X(sl2, make_torsion_free(sl2, canonical_connection(sl2)), N=6)
    x2 = data.X[2] == h_tilde(data.ctx, data.R)
    hx = h_tilde(data.ctx, data.X_total()).is_zero()
    qq = residual_below(q_square_residual(data), 6).is_zero()
    elapsed = time.perf_counter() - start
    report(2, x2 and hx and qq and elapsed < 60,
           f"sl2/span(e): X_2 = h~R {x2}, h~X = 0 {hx}, Q^2 = 0 below S-degree 6 {qq}; {elapsed:.1f}s < 60s")


def test_criterion_3_atiyah_transport(sl2):
    conn = make_torsion_free(sl2, canonical_connection(sl2))
    data = fedosov_X(sl2, conn, N=5)
    curvature = atiyah_cocycle_pair(sl2, conn)
    Mf = atiyah_cocycle_fedosov(data)
    target = atiyah_frame(sl2)
    transport = all(sigma_tilde(Mf[j][k], sl2, target) == curvature[j][k]
                    for j in range(sl2.r) for k in range(sl2.r))
    fr = atiyah_frame(sl2, fedosov=True)
    gap = trace(Mf) - d_F(divergence(data, fr), sl2.r)
    trace_ok = not low_part(gap, data.N - 1)
    report(3, transport and trace_ok,
           f"sigma~(At_F) = R_(1,1) exact {transport}; tr At_F = d_F div X exact below S-degree N-1 = "
           f"{data.N - 1} {trace_ok}")


def test_criterion_4_todd_series():
    K = 8
    td = list(todd_series("td", K).coefficients)
    td_ok = td == td_oracle(K)
    tt = todd_series("ttodd", K).coefficients
    odd_ok = all(tt[n] == 0 for n in range(1, K + 1, 2))
    roots = all(series_mul(r, r, K) == list(todd_series(b, K).coefficients)
                for b in ("td", "ttodd") for r in [todd_series("sqrt_" + b, K).coefficients])
    report(4, td_ok and odd_ok and roots,
           f"td to order 8 = long-division oracle {td_ok}; ttodd odd coefficients zero {odd_ok}; "
           f"sqrt^2 = original {roots}")


def test_criterion_5_complex_identities(sl2, solvable):
    rng = random.Random(55)
    checks = 0
    ok = True
    for spec in (sl2, solvable):
        pc = pair_complexes(spec)
        for _ in range(15):
            x = random_D(pc, rng)
            ok &= not hochschild_d(pc, hochschild_d(pc, x))
            ok &= not ce_d_D(pc, ce_d_D(pc, x))
            ok &= not (ce_d_D(pc, signed_dH(pc, x)) + signed_dH(pc, ce_d_D(pc, x)))
            t = random_T(pc, rng)
            ok &= not ce_d_T(pc, ce_d_T(pc, t))
            a, b, c = (random_T(pc, rng, 2).component(rng.randint(0, pc.rA + pc.r)) for _ in range(3))
            da, db = a.degree() - 1, b.degree() - 1
            br = lambda u, v: schouten(pc, u, v)
            ok &= br(a, b) == -br(b, a) * sgn(da * db)
            ok &= br(a, br(b, c)) == br(br(a, b), c) + br(b, br(a, c)) * sgn(da * db)
            ok &= br(a, b * c) == br(a, b) * c + b * br(a, c) * sgn(da * b.degree())
            checks += 8
    m = multiplication_element(OP_FRAME, 2)
    mm = not gerstenhaber(m, m, OP_NAMES)
    for _ in range(15):
        nb = rng.randint(0, 2)
        a, b, c = random_op(rng, rng.randint(0, 2)), random_op(rng, nb), random_op(rng, rng.randint(0, 2))
        u, v = total_degree_D(a), total_degree_D(b)
        br = lambda x, y: gerstenhaber(x, y, OP_NAMES)
        dH = lambda x: gerstenhaber(m, x, OP_NAMES)
        ok &= br(a, b) == -br(b, a) * sgn(u * v)
        ok &= br(a, br(b, c)) == br(br(a, b), c) + br(b, br(a, c)) * sgn(u * v)
        ok &= dH(br(a, b)) == br(dH(a), b) + br(a, dH(b)) * sgn(u)
        ok &= dH(cup(a, b)) == cup(dH(a), b) * sgn(nb) + cup(a, dH(b))
        ok &= not dH(dH(a))
        checks += 5
    report(5, bool(ok) and mm,
           f"{checks} randomized exact identities (d^2 = 0, anticommutation, Jacobi, Leibniz) all hold {bool(ok)}; "
           f"[m, m] = 0 {mm}")


def test_criterion_6_hkr(sl2, solvable):
    ok = True
    for spec in (sl2, solvable):
        pc = pair_complexes(spec)
        rng = random.Random(6)
        for _ in range(20):
            t = random_T(pc, rng)
            h = hkr(pc, t)
            ok &= all(not hochschild_d(pc, h.component(p)) for p in h.degrees())
            ok &= ce_d_D(pc, h) == hkr(pc, ce_d_T(pc, t))
            ok &= total_d_D(pc, h) == hkr(pc, ce_d_T(pc, t))
    res = cohomology(solvable, "T", 4)
    ranks = res.hkr_rank == res.dims == res.target_dims
    report(6, bool(ok) and ranks,
           f"hkr chain map for Hochschild and CE differentials {bool(ok)}; solvable ranks through filtration 4 "
           f"H_T={res.dims} H_D={res.target_dims} rank={res.hkr_rank}")


def test_criterion_7_kontsevich_weights():
    start = time.perf_counter()
    exact = weight(hkr_graph(1)).value == 1 and weight(hkr_graph(2)).value == Fraction(1, 4)
    mc = weight(hkr_graph(2), "monte-carlo", 10**6, seed=7)
    mc_ok = abs(mc.value - 0.25) <= 3 * mc.error + 1e-12 and mc.error <= 1e-2
    moyal = weight(AdmissibleGraph(2, 2, ((0, 2), (0, 3), (1, 2), (1, 3))), "monte-carlo", 10**6, seed=11)
    moyal_ok = abs(moyal.value - 1 / 16) <= 3 * moyal.error and moyal.error <= 1e-2
    elapsed = time.perf_counter() - start
    report(7, exact and mc_ok and moyal_ok and elapsed < 300,
           f"closed form 1, 1/4 for m = 1, 2 {exact}; MC m = 2 graph {mc.value:.6f} +- {mc.error:.2e} "
           f"vs 1/4 {mc_ok}; MC two-vertex product graph {moyal.value:.6f} +- {moyal.error:.2e} vs 1/16 "
           f"{moyal_ok}; 10^6 samples each, {elapsed:.1f}s < 300s")


def test_criterion_8_star_product():
    fr = flat_frame(2)
    pi = GradedElement.gen(fr, "xi0") * GradedElement.gen(fr, "xi1")
    B = bidifferential_series(pi, 2, WeightBudget(samples=10**6, seed=1))
    coords = list(fr.sym)
    monos = [GradedElement(fr, {((), (a, d - a), (), ()): Fraction(1)}) for d in range(4) for a in range(d + 1)]
    ser = lambda x: {0: WeightedElement(fr, x)}
    hbar0 = True
    worst_z, worst_abs, worst_prop = 0.0, 0.0, 0.0
    for f, g, h in itertools.product(monos, repeat=3):
        fg = apply_series(B, ser(f), ser(g), coords, 2)
        hbar0 &= fg[0].is_exact() and fg[0].exact == f * g
        left = apply_series(B, fg, ser(h), coords, 2)
        right = apply_series(B, ser(f), apply_series(B, ser(g), ser(h), coords, 2), coords, 2)
        for n in (0, 1):
            hbar0 &= (left[n] - right[n]).is_exact() and not (left[n] - right[n]).exact
        for v, e in (left[2] - right[2]).evaluate().values():
            worst_abs = max(worst_abs, abs(v))
            worst_prop = max(worst_prop, e)
            if abs(v) > 1e-12:
                worst_z = max(worst_z, abs(v) / e if e else float("inf"))
    weight_err = max(w.error for w in B[2].weights.values())
    ok = hbar0 and worst_z <= 3 and weight_err <= 1e-2
    report(8, ok,
           f"hbar^0 = fg exact and hbar^0, hbar^1 associative exactly {hbar0}; hbar^2 residual on monomials of "
           f"degree <= 3: max |r|/sigma = {worst_z:.2f} <= 3, weight errors <= {weight_err:.1e} <= 1e-2 "
           f"(max |r| = {worst_abs:.3g}, max propagated sigma = {worst_prop:.3g})")


def test_criterion_9_duflo():
    start = time.perf_counter()
    res = duflo_check(LieAlgebra.from_sparse(["e", "h", "f"], SL2_BRACKETS), 4)
    elapsed = time.perf_counter() - start
    report(9, res.ok and bool(res.plain_discrepancies) and elapsed < 60,
           f"sl2 invariants {res.invariant_dims}: pbw o J^(1/2) multiplicative on {res.pairs_checked} pairs "
           f"{res.ok}; plain pbw fails on {len(res.plain_discrepancies)} pairs; {elapsed:.1f}s < 60s")


def test_criterion_10_transferred_linfty(solvable, sl2):
    ctx, _, pert = _transfer(solvable, 5)
    pc = pair_complexes(solvable)
    dB = bott_derivation_T(pc)
    rng = random.Random(10)
    unary = all(as_frame(pc.frame_T, pert.d_target(y)) == dB(as_frame(pc.frame_T, y))
                for y in (random_element(ctx.target, rng, n_terms=3) for _ in range(10)))
    T = transfer_brackets(pert, decalage(lambda a, b: schouten_vertical(ctx, a, b)))
    jac = all(not v for v in linfty_jacobi_residuals(
        T, [random_element(ctx.target, rng, n_terms=2) for _ in range(3)]).values())
    ctx2, _, pert2 = _transfer(sl2, 4)
    T2 = transfer_brackets(pert2, decalage(lambda a, b: schouten_vertical(ctx2, a, b)))
    pc2 = pair_complexes(sl2)
    words = [(), (0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2)]
    els = [GradedElement(ctx2.target, {(o, (), (), ()): 1}) for o in words]
    binary = all(as_frame(pc2.frame_T, T2.q2(a, b) * sgn(a.degree() - 1))
                 == schouten(pc2, as_frame(pc2.frame_T, a), as_frame(pc2.frame_T, b))
                 for a in els for b in els)
    report(10, unary and jac and binary,
           f"solvable: transferred q1 = d_A^Bott {unary}, Jacobi through arity 3 {jac}; sl2 matched pair: "
           f"transferred q2 = matched-pair bracket on all basis pairs {binary}")


def test_criterion_11_determinism(tmp_path):
    digests = {}
    for command in ("star-product", "phi1-check", "graph-weights"):
        seen = []
        for i in range(2):
            out = tmp_path / f"{command}-{i}.txt"
            subprocess.run([sys.executable, "-m", "liepairs.cli", "bundled:sl2", "--command", command,
                            "--seed", "3", "--samples", "20000", "--mode", "monte-carlo", "--out", str(out)],
                           check=False, capture_output=True)
            seen.append(hashlib.sha256(out.read_bytes()).hexdigest())
        digests[command] = seen
    ok = all(a == b for a, b in digests.values())
    report(11, ok, "identical config and seed give byte-identical reports for "
                   + ", ".join(f"{k} ({v[0][:12]})" for k, v in digests.items()))

