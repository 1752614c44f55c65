import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from liepairs.atiyah import atiyah_cocycle_fedosov, atiyah_frame, contract_by, todd_cocycle
from liepairs.fedosov import fedosov_X, fedosov_context
from liepairs.graded import GradedElement, contract, relabel
from liepairs.graphs import (
    AdmissibleGraph,
    BudgetExhausted,
    GraphCache,
    NotPoisson,
    WeightBudget,
    assemble,
    enumerate_graphs,
    fedosov_hkr,
    flat_frame,
    hkr_graph,
    phi_n,
    poisson_residual,
    star_product,
    weight,
    weights_admit,
)
from liepairs.liepair import canonical_connection, make_torsion_free

MOYAL = AdmissibleGraph(2, 2, ((0, 2), (0, 3), (1, 2), (1, 3)))
FLAT = flat_frame(2)
X0, X1 = GradedElement.gen(FLAT, "x0"), GradedElement.gen(FLAT, "x1")
PI = GradedElement.gen(FLAT, "xi0") * GradedElement.gen(FLAT, "xi1")


def falling(a, k):
    return math.factorial(a) // math.factorial(a - k) if k <= a else 0


@pytest.mark.parametrize("n,m,E", [(1, 2, 2), (2, 2, 4), (2, 0, 2), (2, 1, 3), (3, 0, 4)])
def test_enumeration_counts(n, m, E):
    graphs = enumerate_graphs(n, m, E)
    expected = 0
    for prof in itertools.product(range(n + m), repeat=n):
        if sum(prof) == E:
            expected += math.prod(falling(n + m - 1, d) for d in prof)
    assert len(graphs) == expected
    assert len({g.key() for g in graphs}) == len(graphs)


def test_graph_validation():
    with pytest.raises(ValueError):
        AdmissibleGraph(1, 1, ((0, 0),))
    with pytest.raises(ValueError):
        AdmissibleGraph(1, 2, ((0, 1), (0, 1)))
    with pytest.raises(ValueError):
        AdmissibleGraph(2, 1, ((1, 2), (0, 2)))


def test_closed_form_weights():
    assert weight(hkr_graph(1)).value == 1
    assert weight(hkr_graph(2)).value == Fraction(1, 4)
    assert weight(hkr_graph(2, [1, 0])).value == Fraction(-1, 4)
    assert weight(hkr_graph(3)).value == Fraction(1, 36)
    # dimension count forces zero
    g = AdmissibleGraph(1, 2, ((0, 1),))
    assert not weights_admit(g) and weight(g).value == 0


def test_monte_carlo_needs_a_seed_and_is_deterministic():
    with pytest.raises(ValueError):
        weight(MOYAL, "monte-carlo", 1000)
    with pytest.raises(ValueError):
        weight(MOYAL, "sometimes")
    a = weight(MOYAL, "monte-carlo", 20_000, seed=7)
    b = weight(MOYAL, "monte-carlo", 20_000, seed=7)
    c = weight(MOYAL, "monte-carlo", 20_000, seed=8)
    assert a == b and a.value != c.value


def test_standard_error_shrinks_like_root_n():
    small = weight(MOYAL, "monte-carlo", 50_000, seed=2)
    large = weight(MOYAL, "monte-carlo", 200_000, seed=2)
    assert 0.35 < large.error / small.error < 0.65


def test_moyal_graph_weight_and_its_mirror():
    w = weight(MOYAL, "monte-carlo", 400_000, seed=11)
    assert abs(w.value - 1 / 16) <= 3 * w.error
    mirror = AdmissibleGraph(2, 2, ((0, 2), (0, 3), (1, 3), (1, 2)))
    v = weight(mirror, "monte-carlo", 400_000, seed=11)
    assert abs(v.value + 1 / 16) <= 3 * v.error


def test_hkr_graph_by_monte_carlo_has_zero_variance():
    w = weight(hkr_graph(2), "monte-carlo", 10_000, seed=1)
    assert w.value == pytest.approx(0.25, abs=1e-12)
    assert w.error == pytest.approx(0.0, abs=1e-12)


def test_assembly_of_the_hkr_graph_is_skew_symmetrization():
    out = assemble(hkr_graph(2), [PI]) * Fraction(1, 4) + assemble(hkr_graph(2, [1, 0]), [PI]) * Fraction(-1, 4)
    assert out == fedosov_hkr(PI)


def test_star_product_low_orders():
    f, g = X0 * X0 + X1, X1 * X1 * X0
    S = star_product(PI, f, g, order=1)
    assert S[0].exact == f * g and S[0].is_exact()
    # hbar^1 is half the Poisson bracket {f, g} = d0 f d1 g - d1 f d0 g
    pb = contract("x0", f) * contract("x1", g) - contract("x1", f) * contract("x0", g)
    assert S[1].is_exact() and S[1].exact == pb * Fraction(1, 2)


def test_star_product_second_order_matches_moyal():
    budget = WeightBudget(samples=200_000, seed=1)
    S = star_product(PI, X0 * X0, X1 * X1, order=2, budget=budget)
    (value, err), = S[2].evaluate().values()
    # (1/8) pi^{ij} pi^{kl} d_i d_k f d_j d_l g = (1/8) * 2 * 2
    assert abs(value - 0.5) <= 3 * err


def test_star_product_guards():
    fr = flat_frame(3)
    x = [GradedElement.gen(fr, f"x{i}") for i in range(3)]
    xi = [GradedElement.gen(fr, f"xi{i}") for i in range(3)]
    bad = x[1] * xi[1] * xi[2] + xi[0] * xi[1]
    assert poisson_residual(bad)
    with pytest.raises(NotPoisson):
        star_product(bad, x[0], x[1], order=1)
    linear = x[2] * xi[0] * xi[1] + x[0] * xi[1] * xi[2]
    assert not poisson_residual(linear)
    with pytest.raises(BudgetExhausted):
        star_product(PI, X0, X1, order=3)
    with pytest.raises(BudgetExhausted):
        star_product(PI, X0, X1, order=2, budget=WeightBudget(samples=1000, seed=0, max_graphs=0))


def test_weight_cache_roundtrip(tmp_path):
    path = tmp_path / "weights.txt"
    cache = GraphCache(path)
    budget = WeightBudget(samples=5000, seed=3, cache=cache)
    w = budget.weigh(MOYAL)
    exact = budget.weigh(hkr_graph(2))
    cache.save()
    again = GraphCache(path)
    assert again.get(MOYAL, 3, 5000) == w
    assert again.get(hkr_graph(2), 3, 5000) == exact
    assert again.dump() == cache.dump()


@pytest.fixture(scope="module")
def sl2_phi1(sl2):
    N = 4
    data = fedosov_X(sl2, make_torsion_free(sl2, canonical_connection(sl2)), N=N)
    fx = fedosov_context(sl2, N, with_xi=True).frame
    gamma = GradedElement.gen(fx, "xi0") * GradedElement.gen(fx, "xi1")
    phi = phi_n(data, [gamma], WeightBudget(samples=400_000, seed=5))
    fa = atiyah_frame(sl2, fedosov=True, with_xi=True)
    todd = todd_cocycle(atiyah_cocycle_fedosov(data, fa), "sqrt_ttodd")
    return gamma, fx, fa, phi, todd


def _max_z(phi, target):
    vals = phi.evaluate()
    words = set(vals) | set(target.terms)
    worst = 0.0
    for w in words:
        v, e = vals.get(w, (0.0, 0.0))
        gap = abs(v - float(target.terms.get(w, 0)))
        if gap:
            worst = max(worst, gap / e if e else math.inf)
    return worst


def test_phi1_is_hkr_after_todd_contraction(sl2_phi1):
    gamma, fx, fa, phi, todd = sl2_phi1
    target = fedosov_hkr(relabel(contract_by(todd.total(), relabel(gamma, fa)), fx))
    assert _max_z(phi, target) <= 5


def test_phi1_is_not_plain_hkr(sl2_phi1):
    gamma, _, _, phi, _ = sl2_phi1
    assert _max_z(phi, fedosov_hkr(gamma)) > 20


@given(st.integers(min_value=1, max_value=3))
def test_hkr_graph_weights_are_signed_inverse_factorial_squares(m):
    for order in itertools.permutations(range(m)):
        w = weight(hkr_graph(m, order)).value
        assert abs(w) == Fraction(1, math.factorial(m) ** 2)
