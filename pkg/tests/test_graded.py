import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from liepairs.graded import (
    Derivation,
    Frame,
    FrameMismatch,
    GradedElement,
    commutator,
    contract,
    format_element,
    koszul_sign,
    random_element,
    relabel,
    truncate,
)

FRAME = Frame(odd=("l0", "l1", "l2"), sym=("c0", "c1"), base=("x",))
seeds = st.integers(min_value=0, max_value=10**6)


def rnd(seed, **kw):
    return random_element(FRAME, random.Random(seed), **kw)


def homogeneous_parts(a):
    return [a.component(d) for d in sorted(a.degrees())]


def gen(name):
    return GradedElement.gen(FRAME, name)


def test_odd_generators_anticommute():
    l0, l1 = gen("l0"), gen("l1")
    assert l0 * l1 == -(l1 * l0)
    assert not l0 * l0


def test_koszul_sign_hand_values():
    assert koszul_sign([1, 0], [1, 1]) == -1
    assert koszul_sign([1, 0], [1, 2]) == 1
    assert koszul_sign([2, 0, 1], [1, 1, 1]) == 1
    assert koszul_sign([0, 2, 1], [1, 1, 1]) == -1


def test_contract_is_partial_derivative():
    c0 = gen("c0")
    assert contract("c0", c0 * c0 * c0) == c0 * c0 * 3
    assert contract("l1", gen("l0") * gen("l1")) == -gen("l0")
    assert contract("x", gen("x") * c0) == c0


def test_truncation_drops_high_symmetric_degree():
    c0 = GradedElement.gen(FRAME, "c0", trunc=2)
    assert not c0 * c0 * c0
    assert truncate(gen("c0") * gen("c1") + gen("c0"), 1) == gen("c0")


def test_frames_must_match():
    other = Frame(odd=("l0",))
    with pytest.raises(FrameMismatch):
        gen("l0") + GradedElement.gen(other, "l0")


def test_format_is_deterministic():
    a = gen("l0") * gen("c1") * 2 - gen("c0") * gen("c0") * Fraction(1, 2)
    assert format_element(a) == "-1/2*c0^2 + 2*l0*c1"


@given(seeds)
def test_product_associative(seed):
    a, b, c = rnd(seed), rnd(seed + 1), rnd(seed + 2)
    assert (a * b) * c == a * (b * c)


@given(seeds)
def test_graded_commutative(seed):
    for a in homogeneous_parts(rnd(seed)):
        for b in homogeneous_parts(rnd(seed + 7)):
            sign = -1 if (a.degree() * b.degree()) % 2 else 1
            assert a * b == b * a * sign


@given(seeds)
def test_derivation_leibniz(seed):
    rng = random.Random(seed)
    images = {name: random_element(FRAME, rng, n_terms=2, max_odd=2 if FRAME.kind(name)[0] == "odd" else 1)
              for name in ("c0", "c1", "x")}
    # odd derivation: images of even generators must be odd
    images = {k: v.filter(lambda w: len(w[0]) % 2 == 1) for k, v in images.items()}
    D = Derivation.from_images(FRAME, 1, images)
    for a in homogeneous_parts(rnd(seed + 3)):
        b = rnd(seed + 4)
        sign = -1 if a.degree() % 2 else 1
        assert D(a * b) == D(a) * b + a * D(b) * sign


@given(seeds)
def test_commutator_of_derivations_is_a_derivation(seed):
    rng = random.Random(seed)

    def odd_der():
        imgs = {n: random_element(FRAME, rng, n_terms=2).filter(lambda w: len(w[0]) % 2 == 1)
                for n in ("c0", "c1")}
        return Derivation.from_images(FRAME, 1, imgs)

    D1, D2 = odd_der(), odd_der()
    C = commutator(D1, D2)
    for a in homogeneous_parts(rnd(seed + 1)):
        b = rnd(seed + 2)
        assert C(a) == D1(D2(a)) + D2(D1(a))
        assert C(a * b) == C(a) * b + a * C(b)


def test_relabel_roundtrip():
    big = Frame(odd=("l0", "l1", "l2", "t"), sym=("c0", "c1"), base=("x",))
    a = rnd(5)
    assert relabel(relabel(a, big), FRAME) == a
