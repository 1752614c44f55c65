from fractions import Fraction

import pytest

from liepairs.graded import GradedElement
from liepairs.liepair import (
    ConnectionSpec,
    LiePairSpec,
    PreconditionError,
    assert_flat,
    bott_connection,
    bott_module,
    canonical_connection,
    curvature,
    extends_bott,
    make_torsion_free,
    poly_frame,
    torsion,
    validate,
)

from conftest import SL2_BRACKETS


def action_algebroid(h_anchor_sign=-2):
    """sl2 acting on the line by d/dx, -2x d/dx, -x^2 d/dx."""
    pf = poly_frame(("x",))
    x = GradedElement.gen(pf, "x")
    anchor = {(0, 0): 1, (1, 0): x * h_anchor_sign, (2, 0): -x * x}
    return LiePairSpec.from_polynomials(["e", "h", "f"], 1, SL2_BRACKETS, coords=("x",), anchor=anchor)


def test_sl2_validates(sl2):
    assert validate(sl2).ok


def test_jacobi_failure_is_located(sl2):
    rep = validate(sl2.with_constant(1, 2, 2, -3))
    assert not rep.ok and rep.identity == "jacobi" and rep.witness == (0, 1, 2)


def test_skew_failure(sl2):
    rep = validate(sl2.with_constant(2, 0, 1, 1, skew=False))
    assert not rep.ok and rep.identity == "skew"


def test_closure_failure():
    spec = LiePairSpec.from_constants(["e", "f", "h"], 2, {(0, 1): {2: 1}, (2, 0): {0: 2}, (2, 1): {1: -2}})
    rep = validate(spec)
    assert not rep.ok and rep.identity == "closure"


def test_action_algebroid_on_a_chart():
    assert validate(action_algebroid()).ok
    rep = validate(action_algebroid(h_anchor_sign=2))
    assert not rep.ok and rep.identity == "anchor"


def test_rank_of_a_is_bounded():
    with pytest.raises(ValueError):
        LiePairSpec.from_constants(["a"], 2, {})


def test_canonical_connection_extends_bott_and_is_torsion_free(sl2, solvable):
    for spec in (sl2, solvable, action_algebroid()):
        conn = canonical_connection(spec)
        assert extends_bott(spec, conn)
        assert torsion(spec, conn).is_zero()


def test_bott_module_is_flat(sl2, solvable):
    for spec in (sl2, solvable, action_algebroid()):
        assert_flat(spec, bott_module(spec))


def test_make_torsion_free_repairs_a_perturbation(sl2):
    conn = canonical_connection(sl2)
    g = [[list(r) for r in p] for p in conn.gamma]
    g[1][1][0] = g[1][1][0] + sl2.const(1)
    bent = ConnectionSpec(tuple(tuple(tuple(r) for r in p) for p in g), 3)
    assert not torsion(sl2, bent).is_zero()
    fixed = make_torsion_free(sl2, bent)
    assert torsion(sl2, fixed).is_zero()
    assert extends_bott(sl2, fixed)


def test_bott_connection_is_partial(sl2):
    conn = bott_connection(sl2)
    assert not conn.is_full
    with pytest.raises(PreconditionError):
        conn.coeff(2, 0, 0)


def test_sl2_curvature_hand_value(sl2):
    # canonical connection: nabla_e d_f = d_h, nabla_h d_f = -d_f, nabla_f d_h = d_f, the rest zero
    # R(e, h) d_f = nabla_e(-d_f) - nabla_h d_h + 2 nabla_e d_f = d_h
    # R(e, f) d_h = nabla_e d_f - 0 - nabla_h d_h = d_h
    # R(e, f) d_f = 0 - nabla_f d_h - nabla_h d_f = 0
    R11 = curvature(sl2, canonical_connection(sl2)).R11
    nonzero = {(a, i, j, k): v.scalar_part() for a, p in enumerate(R11) for i, q in enumerate(p)
               for j, r in enumerate(q) for k, v in enumerate(r) if v}
    assert nonzero == {(0, 0, 1, 0): Fraction(1), (0, 1, 0, 0): Fraction(1)}
