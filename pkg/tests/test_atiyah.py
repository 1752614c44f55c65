import random
from fractions import Fraction
from math import factorial

import pytest
from hypothesis import given, strategies as st

from liepairs.atiyah import (
    SERIES_KINDS,
    atiyah_class_difference,
    atiyah_cocycle_fedosov,
    atiyah_cocycle_pair,
    atiyah_fedosov_residual,
    atiyah_frame,
    atiyah_pair_residual,
    contract_by,
    d_F,
    det_direct,
    divergence,
    exp_form,
    fedosov_form_differential,
    low_part,
    pair_form_differential,
    series_mul,
    sigma_tilde,
    todd_cocycle,
    todd_series,
    trace,
)
from liepairs.fedosov import fedosov_X
from liepairs.graded import Frame, GradedElement, random_element
from liepairs.liepair import (
    ConnectionSpec,
    PreconditionError,
    canonical_connection,
    make_torsion_free,
)

seeds = st.integers(min_value=0, max_value=10**6)


def long_division_inverse(g, K):
    """1/g for a power series with g[0] != 0, coefficient by coefficient."""
    q = [Fraction(0)] * (K + 1)
    q[0] = 1 / g[0]
    for n in range(1, K + 1):
        q[n] = -sum(g[k] * q[n - k] for k in range(1, n + 1)) / g[0]
    return q


def td_oracle(K):
    # x/(1 - e^{-x}) = 1 / sum_n (-1)^n x^n/(n+1)!
    return long_division_inverse([Fraction((-1) ** n, factorial(n + 1)) for n in range(K + 1)], K)


def ttodd_oracle(K):
    # x/(e^{x/2} - e^{-x/2}) = 1 / sum_k x^{2k}/(4^k (2k+1)!)
    g = [Fraction(0)] * (K + 1)
    for k in range(K // 2 + 1):
        g[2 * k] = Fraction(1, 4 ** k * factorial(2 * k + 1))
    return long_division_inverse(g, K)


TD_8 = [1, Fraction(1, 2), Fraction(1, 12), 0, Fraction(-1, 720), 0, Fraction(1, 30240), 0, Fraction(-1, 1209600)]


def test_td_matches_long_division_to_order_12():
    assert list(todd_series("td", 12).coefficients) == td_oracle(12)
    assert list(todd_series("td", 8).coefficients) == TD_8


def test_ttodd_matches_long_division_and_is_even():
    tt = todd_series("ttodd", 12).coefficients
    assert list(tt) == ttodd_oracle(12)
    assert all(tt[n] == 0 for n in range(1, 13, 2))
    assert tt[2] == Fraction(-1, 24) and tt[4] == Fraction(7, 5760)


@pytest.mark.parametrize("base", ["td", "ttodd"])
def test_square_roots_square_back(base):
    K = 10
    root = todd_series("sqrt_" + base, K).coefficients
    assert series_mul(root, root, K) == list(todd_series(base, K).coefficients)


def test_unknown_series_kind():
    with pytest.raises(ValueError):
        todd_series("ahat", 4)


@pytest.fixture(scope="module")
def sl2_setup(sl2):
    conn = make_torsion_free(sl2, canonical_connection(sl2))
    return conn, fedosov_X(sl2, conn, N=5)


def test_pair_atiyah_cocycle_is_closed(sl2, solvable):
    for spec in (sl2, solvable):
        assert not atiyah_pair_residual(spec, canonical_connection(spec))


def test_pair_atiyah_needs_bott_extension(sl2):
    conn = canonical_connection(sl2)
    g = [[list(r) for r in p] for p in conn.gamma]
    g[0][0][0] = g[0][0][0] + sl2.const(1)
    with pytest.raises(PreconditionError):
        atiyah_cocycle_pair(sl2, ConnectionSpec(tuple(tuple(tuple(r) for r in p) for p in g), 3))


def test_atiyah_class_does_not_depend_on_the_connection(sl2):
    c1 = canonical_connection(sl2)
    g = [[list(r) for r in p] for p in c1.gamma]
    g[1][1][0] = g[1][1][0] + sl2.const(1)
    c2 = make_torsion_free(sl2, ConnectionSpec(tuple(tuple(tuple(r) for r in p) for p in g), 3))
    assert atiyah_class_difference(sl2, c1, c2) is not None


def test_sigma_tilde_of_fedosov_atiyah_is_the_curvature(sl2, sl2_setup):
    conn, data = sl2_setup
    M = atiyah_cocycle_pair(sl2, conn)
    Mf = atiyah_cocycle_fedosov(data)
    target = atiyah_frame(sl2)
    for j in range(sl2.r):
        for k in range(sl2.r):
            assert sigma_tilde(Mf[j][k], sl2, target) == M[j][k]


def test_trace_of_atiyah_is_d_of_divergence(sl2, sl2_setup):
    _, data = sl2_setup
    fr = atiyah_frame(sl2, fedosov=True)
    gap = trace(atiyah_cocycle_fedosov(data)) - d_F(divergence(data, fr), sl2.r)
    assert not low_part(gap, data.N - 1)


def test_fedosov_atiyah_is_closed_below_two_derivatives(sl2_setup):
    _, data = sl2_setup
    assert all(not v for v in atiyah_fedosov_residual(data))


def test_fedosov_form_differential_squares_to_zero(sl2, sl2_setup):
    _, data = sl2_setup
    fr = atiyah_frame(sl2, fedosov=True)
    D = fedosov_form_differential(data, fr)
    for name in ("th0", "th1"):
        assert not low_part(D(D(GradedElement.gen(fr, name))), data.N - 2)


@pytest.mark.parametrize("kind", SERIES_KINDS)
def test_todd_cocycles_closed_and_transported(kind, sl2, sl2_setup):
    conn, data = sl2_setup
    M = atiyah_cocycle_pair(sl2, conn)
    T = todd_cocycle(M, kind)
    D = pair_form_differential(sl2)
    assert all(not D(c) for c in T.components)
    assert T.total() == det_direct(M, kind)
    Tf = todd_cocycle(atiyah_cocycle_fedosov(data), kind)
    target = atiyah_frame(sl2)
    for a, b in zip(Tf.components, T.components):
        assert sigma_tilde(a, sl2, target) == b


def test_pair_form_differential_squares_to_zero(sl2):
    D = pair_form_differential(sl2)
    fr = atiyah_frame(sl2)
    for name in fr.odd:
        assert not D(D(GradedElement.gen(fr, name)))


FORMS = Frame(odd=("a0", "a1", "a2", "a3", "a4"))


def random_even_form(rng):
    out = GradedElement.zero(FORMS)
    for _ in range(rng.randint(0, 3)):
        i, j = rng.sample(range(5), 2)
        out = out + GradedElement.gen(FORMS, f"a{i}") * GradedElement.gen(FORMS, f"a{j}") * rng.randint(-3, 3)
    return out


@given(seeds, st.sampled_from(SERIES_KINDS), st.sampled_from([1, 2]))
def test_exp_trace_log_equals_direct_determinant(seed, kind, r):
    rng = random.Random(seed)
    M = [[random_even_form(rng) for _ in range(r)] for _ in range(r)]
    assert todd_cocycle(M, kind).total() == det_direct(M, kind)


def test_contraction_by_exp_of_half_trace_inverts(sl2, sl2_setup):
    conn, _ = sl2_setup
    data = fedosov_X(sl2, conn, N=4)
    fa = atiyah_frame(sl2, fedosov=True, with_xi=True)
    t = trace(atiyah_cocycle_fedosov(data, fa))
    up, down = exp_form(t * Fraction(1, 2)), exp_form(t * Fraction(-1, 2))
    rng = random.Random(9)
    xi_pool = [fa.odd.index(n) for n in fa.odd if n.startswith("xi")]
    for _ in range(5):
        gamma = random_element(fa, rng, max_sym=2, odd_pool=xi_pool, trunc=4)
        assert contract_by(down, contract_by(up, gamma)) == gamma


def test_contraction_by_trace_commutes_with_the_differential(sl2, sl2_setup):
    conn, _ = sl2_setup
    data = fedosov_X(sl2, conn, N=5, with_xi=True)
    fa = atiyah_frame(sl2, fedosov=True, with_xi=True)
    t = trace(atiyah_cocycle_fedosov(data, fa))
    D = fedosov_form_differential(data, fa)
    rng = random.Random(2)
    xi_pool = [fa.odd.index(n) for n in fa.odd if n.startswith("xi")]
    for _ in range(5):
        gamma = random_element(fa, rng, max_sym=1, odd_pool=xi_pool, trunc=5)
        gap = contract_by(t, D(gamma)) - D(contract_by(t, gamma))
        assert not low_part(gap, data.N - 2)
