import random
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from liepairs.fedosov import (
    FiltrationError,
    TorsionfulConnection,
    check_filtration,
    contraction_residuals,
    decalage,
    fedosov_X,
    fedosov_context,
    fedosov_contraction,
    h_tilde,
    lie_derivative,
    linfty_jacobi_residuals,
    perturb_contraction,
    q_square_residual,
    residual_below,
    schouten_vertical,
    transfer_brackets,
)
from liepairs.graded import Derivation, GradedElement, commutator, random_element
from liepairs.liepair import (
    ConnectionSpec,
    PreconditionError,
    bott_connection,
    canonical_connection,
    make_torsion_free,
)
from liepairs.poly import bott_derivation_T, pair_complexes, schouten

seeds = st.integers(min_value=0, max_value=10**6)


@pytest.fixture(scope="module")
def sl2_data(sl2):
    return fedosov_X(sl2, make_torsion_free(sl2, canonical_connection(sl2)), N=6)


def as_frame(frame, y):
    return GradedElement(frame, y.terms)


@given(seeds)
def test_contraction_identities_on_random_elements(sl2, seed):
    ctx = fedosov_context(sl2, None)
    rng = random.Random(seed)
    src = [random_element(ctx.frame, rng, max_sym=6) for _ in range(4)]
    tgt = [random_element(ctx.target, rng) for _ in range(4)]
    res = contraction_residuals(fedosov_contraction(ctx), src, tgt)
    assert all(res.values()), res


def test_contraction_sign_is_a_joint_choice(sl2):
    ctx = fedosov_context(sl2, None)
    rng = random.Random(0)
    src = [random_element(ctx.frame, rng, max_sym=4) for _ in range(10)]
    assert all(contraction_residuals(fedosov_contraction(ctx, sign=1), src, []).values())
    mismatched = replace(fedosov_contraction(ctx), h=fedosov_contraction(ctx, sign=1).h)
    assert not contraction_residuals(mismatched, src, [])["homotopy"]


def test_fedosov_vector_field(sl2_data):
    ctx = sl2_data.ctx
    assert sl2_data.X[2] == h_tilde(ctx, sl2_data.R)
    assert h_tilde(ctx, sl2_data.X_total()).is_zero()
    assert residual_below(q_square_residual(sl2_data), 6).is_zero()


def test_dropping_a_correction_breaks_flatness(sl2_data):
    for k in sorted(sl2_data.X):
        if k > 2:
            broken = sl2_data.without(k)
            assert not residual_below(q_square_residual(broken), 6).is_zero()


def test_solvable_pair_is_flat(solvable):
    data = fedosov_X(solvable, canonical_connection(solvable), N=6)
    assert residual_below(q_square_residual(data), 6).is_zero()


def test_preconditions(sl2):
    with pytest.raises(PreconditionError):
        fedosov_X(sl2, bott_connection(sl2))
    with pytest.raises(PreconditionError):
        fedosov_X(sl2, canonical_connection(sl2), N=1)
    conn = canonical_connection(sl2)
    g = [[list(r) for r in p] for p in conn.gamma]
    g[1][1][0] = g[1][1][0] + sl2.const(1)
    torsionful = ConnectionSpec(tuple(tuple(tuple(r) for r in p) for p in g), 3)
    with pytest.raises(TorsionfulConnection):
        fedosov_X(sl2, torsionful)
    g = [[list(r) for r in p] for p in conn.gamma]
    g[0][0][0] = g[0][0][0] + sl2.const(1)
    not_bott = ConnectionSpec(tuple(tuple(tuple(r) for r in p) for p in g), 3)
    with pytest.raises(PreconditionError):
        fedosov_X(sl2, not_bott)


def test_filtration_check_rejects_degree_zero(sl2):
    ctx = fedosov_context(sl2, 4)
    bad = Derivation.from_images(ctx.frame, 1, {"chi0": GradedElement.gen(ctx.frame, "lam0")})
    with pytest.raises(FiltrationError):
        check_filtration(bad)


def _transfer(spec, N):
    data = fedosov_X(spec, canonical_connection(spec), N, with_xi=True)
    ctx = data.ctx
    LQ = lie_derivative(ctx, data.Q)
    pert = perturb_contraction(fedosov_contraction(ctx), LQ + data.delta, N)
    return ctx, LQ, pert


@pytest.mark.parametrize("name", ["solvable", "sl2"])
def test_perturbed_contraction(name, request):
    spec = request.getfixturevalue(name)
    N = 5
    ctx, LQ, pert = _transfer(spec, N)
    sq = commutator(LQ, LQ)
    # xi images carry one chi-derivative of Q, so they are exact one degree lower
    assert all(not residual_below(sq, N - 1 if gen.startswith("xi") else N).image(gen) for gen in sq.images)
    rng = random.Random(3)
    src = [random_element(ctx.frame, rng, max_sym=4, trunc=N) for _ in range(6)]
    tgt = [random_element(ctx.target, rng, n_terms=3) for _ in range(6)]
    res = contraction_residuals(pert, src, tgt, below=N)
    assert all(res.values()), res


@pytest.mark.parametrize("name", ["solvable", "sl2"])
def test_transferred_unary_bracket_is_bott(name, request):
    spec = request.getfixturevalue(name)
    ctx, _, pert = _transfer(spec, 5)
    pc = pair_complexes(spec)
    dB = bott_derivation_T(pc)
    rng = random.Random(4)
    for _ in range(8):
        y = random_element(ctx.target, rng, n_terms=3)
        assert as_frame(pc.frame_T, pert.d_target(y)) == dB(as_frame(pc.frame_T, y))


def test_transferred_jacobi_through_arity_three(solvable):
    ctx, _, pert = _transfer(solvable, 5)
    T = transfer_brackets(pert, decalage(lambda a, b: schouten_vertical(ctx, a, b)))
    rng = random.Random(5)
    els = [random_element(ctx.target, rng, n_terms=2) for _ in range(3)]
    res = linfty_jacobi_residuals(T, els)
    assert all(not v for v in res.values())


def test_transferred_binary_bracket_is_the_matched_pair_bracket(sl2):
    ctx, _, pert = _transfer(sl2, 4)
    T = transfer_brackets(pert, decalage(lambda a, b: schouten_vertical(ctx, a, b)))
    pc = pair_complexes(sl2)
    words = [(), (0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2)]
    els = [GradedElement(ctx.target, {(o, (), (), ()): 1}) for o in words]
    for a in els:
        for b in els:
            sign = 1 if (a.degree() - 1) % 2 == 0 else -1
            assert as_frame(pc.frame_T, T.q2(a, b) * sign) == schouten(pc, as_frame(pc.frame_T, a),
                                                                       as_frame(pc.frame_T, b))
