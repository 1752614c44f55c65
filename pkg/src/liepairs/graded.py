"""Exact graded-commutative algebra with exterior, symmetric and tensor slots.

An element is a finite sum of basis words with ``Fraction`` coefficients.
A word has four parts:

* odd generators (degree 1), stored as a strictly increasing index tuple;
* symmetric generators (degree 0), stored as an exponent tuple and counted
  by the truncation order;
* base coordinates (degree 0), stored as an exponent tuple and never truncated;
* tensor slots, an ordered tuple of hashable symbols that concatenates under
  multiplication and carries no sign.

Odd generators are globally ordered by their position in the frame, so the
canonical form of a word is unique and the sign of a reordering is absorbed
into the coefficient.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

Scalar = Fraction | int

__all__ = [
    "Frame",
    "GradedElement",
    "Derivation",
    "FrameMismatch",
    "MissingImage",
    "koszul_sign",
    "contract",
    "apply_derivation",
    "truncate",
    "product",
    "multi_index_factorial",
    "commutator",
    "partial",
    "relabel",
    "substitute",
    "format_element",
    "format_scalar",
    "random_element",
    "parity_sign",
]


class FrameMismatch(ValueError):
    pass


class MissingImage(KeyError):
    pass


@dataclass(frozen=True)
class Frame:
    """Generator names of a free graded-commutative algebra.

    ``odd`` generators have degree 1, ``sym`` generators are even and
    truncated, ``base`` generators are even polynomial coordinates.
    """

    odd: tuple[str, ...] = ()
    sym: tuple[str, ...] = ()
    base: tuple[str, ...] = ()
    _index: dict = field(default=None, compare=False, hash=False, repr=False)

    def __post_init__(self):
        names = self.odd + self.sym + self.base
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate generator names in {names}")
        index = {}
        for i, n in enumerate(self.odd):
            index[n] = ("odd", i)
        for i, n in enumerate(self.sym):
            index[n] = ("sym", i)
        for i, n in enumerate(self.base):
            index[n] = ("base", i)
        object.__setattr__(self, "_index", index)

    @property
    def generators(self) -> tuple[str, ...]:
        return self.odd + self.sym + self.base

    def kind(self, name: str) -> tuple[str, int]:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown generator {name!r}") from None

    def degree_of(self, name: str) -> int:
        return 1 if self.kind(name)[0] == "odd" else 0

    def unit_word(self, slots: tuple = ()) -> tuple:
        return ((), (0,) * len(self.sym), (0,) * len(self.base), slots)


def _merge_odd(o1: tuple, o2: tuple):
    """Sign and merged tuple for the product of two sorted odd words."""
    if not o2:
        return 1, o1
    if not o1:
        return 1, o2
    inv = 0
    seen = set(o1)
    for b in o2:
        if b in seen:
            return 0, None
        inv += len(o1) - bisect_right(o1, b)
    merged = tuple(sorted(o1 + o2))
    return (-1 if inv & 1 else 1), merged


def _add_exps(a: tuple, b: tuple) -> tuple:
    if not any(b):
        return a
    if not any(a):
        return b
    return tuple(x + y for x, y in zip(a, b))


def word_mul(w1: tuple, w2: tuple):
    """Product of two words: (sign, word), sign 0 when odd parts overlap."""
    sign, odd = _merge_odd(w1[0], w2[0])
    if sign == 0:
        return 0, None
    return sign, (odd, _add_exps(w1[1], w2[1]), _add_exps(w1[2], w2[2]), w1[3] + w2[3])


def _min_trunc(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


class GradedElement:
    """Sparse element of Lambda(odd) x S(sym) x K[base] x slots, exact coefficients.

    Instances are treated as immutable: every operation returns a new element.
    ``trunc`` is the symmetric-degree cutoff N (``None`` means no cutoff).
    """

    __slots__ = ("frame", "terms", "trunc")

    def __init__(self, frame: Frame, terms: Mapping | None = None, trunc: int | None = None):
        self.frame = frame
        self.trunc = trunc
        clean = {}
        if terms:
            for w, c in terms.items():
                if c == 0:
                    continue
                if trunc is not None and sum(w[1]) > trunc:
                    continue
                clean[w] = c if isinstance(c, Fraction) else Fraction(c)
        self.terms = clean

    # construction helpers
    @classmethod
    def zero(cls, frame: Frame, trunc: int | None = None) -> "GradedElement":
        return cls(frame, None, trunc)

    @classmethod
    def scalar(cls, frame: Frame, c: Scalar, trunc: int | None = None, slots: tuple = ()) -> "GradedElement":
        return cls(frame, {frame.unit_word(slots): Fraction(c)}, trunc)

    @classmethod
    def one(cls, frame: Frame, trunc: int | None = None) -> "GradedElement":
        return cls.scalar(frame, 1, trunc)

    @classmethod
    def gen(cls, frame: Frame, name: str, trunc: int | None = None, power: int = 1) -> "GradedElement":
        kind, i = frame.kind(name)
        o, s, b, t = frame.unit_word()
        if kind == "odd":
            if power > 1:
                return cls.zero(frame, trunc)
            o = (i,) if power == 1 else ()
        elif kind == "sym":
            s = tuple(power if j == i else 0 for j in range(len(s)))
        else:
            b = tuple(power if j == i else 0 for j in range(len(b)))
        return cls(frame, {(o, s, b, t): Fraction(1)}, trunc)

    @classmethod
    def monomial(
        cls,
        frame: Frame,
        odd: Sequence[int] = (),
        sym: Sequence[int] | None = None,
        base: Sequence[int] | None = None,
        slots: tuple = (),
        coeff: Scalar = 1,
        trunc: int | None = None,
    ) -> "GradedElement":
        """Monomial from an (unsorted) odd index list; the reordering sign is applied."""
        odd = list(odd)
        if len(set(odd)) != len(odd):
            return cls.zero(frame, trunc)
        sign = koszul_sign(sorted(range(len(odd)), key=lambda k: odd[k]), [1] * len(odd))
        s = tuple(sym) if sym is not None else (0,) * len(frame.sym)
        b = tuple(base) if base is not None else (0,) * len(frame.base)
        return cls(frame, {(tuple(sorted(odd)), s, b, tuple(slots)): Fraction(coeff) * sign}, trunc)

    # arithmetic
    def _check(self, other: "GradedElement"):
        if other.frame != self.frame:
            raise FrameMismatch(f"{self.frame} vs {other.frame}")

    def _coerce(self, other) -> "GradedElement":
        if isinstance(other, GradedElement):
            self._check(other)
            return other
        if isinstance(other, (int, Fraction)):
            return GradedElement.scalar(self.frame, other, self.trunc)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        for w, c in other.terms.items():
            out[w] = out.get(w, 0) + c
        return GradedElement(self.frame, out, _min_trunc(self.trunc, other.trunc))

    __radd__ = __add__

    def __neg__(self):
        return GradedElement(self.frame, {w: -c for w, c in self.terms.items()}, self.trunc)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                return GradedElement.zero(self.frame, self.trunc)
            return GradedElement(self.frame, {w: c * other for w, c in self.terms.items()}, self.trunc)
        if not isinstance(other, GradedElement):
            return NotImplemented
        return product(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * other
        return NotImplemented

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = GradedElement.scalar(self.frame, other)
        if not isinstance(other, GradedElement):
            return NotImplemented
        return self.frame == other.frame and self.terms == other.terms

    def __hash__(self):
        return hash((self.frame, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        return f"GradedElement({format_element(self)})"

    # gradings
    def degrees(self) -> set[int]:
        return {len(w[0]) for w in self.terms}

    def is_homogeneous(self) -> bool:
        return len(self.degrees()) <= 1

    def degree(self) -> int:
        degs = self.degrees()
        if len(degs) > 1:
            raise ValueError(f"element is not homogeneous: degrees {sorted(degs)}")
        return degs.pop() if degs else 0

    def component(self, degree: int) -> "GradedElement":
        return self.filter(lambda w: len(w[0]) == degree)

    def sym_component(self, k: int) -> "GradedElement":
        return self.filter(lambda w: sum(w[1]) == k)

    def max_sym_degree(self) -> int:
        return max((sum(w[1]) for w in self.terms), default=-1)

    def filter(self, pred: Callable[[tuple], bool]) -> "GradedElement":
        return GradedElement(self.frame, {w: c for w, c in self.terms.items() if pred(w)}, self.trunc)

    def with_trunc(self, trunc: int | None) -> "GradedElement":
        return GradedElement(self.frame, self.terms, trunc)

    def coefficient(self, word: tuple) -> Fraction:
        return self.terms.get(word, Fraction(0))

    def scalar_part(self) -> Fraction:
        return self.terms.get(self.frame.unit_word(), Fraction(0))


def product(a: GradedElement, b: GradedElement) -> GradedElement:
    """Graded-commutative product, truncated at min(a.trunc, b.trunc)."""
    if a.frame != b.frame:
        raise FrameMismatch(f"{a.frame} vs {b.frame}")
    trunc = _min_trunc(a.trunc, b.trunc)
    out: dict = {}
    for w1, c1 in a.terms.items():
        d1 = sum(w1[1])
        for w2, c2 in b.terms.items():
            if trunc is not None and d1 + sum(w2[1]) > trunc:
                continue
            sign, w = word_mul(w1, w2)
            if sign:
                out[w] = out.get(w, 0) + sign * c1 * c2
    return GradedElement(a.frame, out, trunc)


def truncate(a: GradedElement, N: int | None) -> GradedElement:
    """Drop every term of symmetric degree above N (None keeps everything)."""
    return GradedElement(a.frame, a.terms, _min_trunc(a.trunc, N))


def parity_sign(n: int) -> int:
    """(-1)^n as an int, valid for negative n."""
    return -1 if n % 2 else 1


def koszul_sign(permutation: Sequence[int], degrees: Sequence[int]) -> int:
    """Sign with v_{p(0)} ... v_{p(n-1)} = sign * v_0 ... v_{n-1}.

    ``permutation`` is a 0-based rearrangement and ``degrees[i]`` is |v_i|.
    """
    if len(permutation) != len(degrees):
        raise ValueError("permutation and degrees differ in length")
    if sorted(permutation) != list(range(len(permutation))):
        raise ValueError(f"not a permutation: {permutation}")
    sign = 1
    n = len(permutation)
    for i in range(n):
        di = degrees[permutation[i]] & 1
        if not di:
            continue
        for j in range(i + 1, n):
            if permutation[i] > permutation[j] and degrees[permutation[j]] & 1:
                sign = -sign
    return sign


class Derivation:
    """Graded derivation determined by its values on generators.

    ``images`` maps generator names to slot-free elements.  Applying the
    derivation to an element whose words use a generator without an image
    raises ``MissingImage``.  Use ``Derivation.from_images`` to default the
    unspecified generators to zero.
    """

    __slots__ = ("frame", "degree", "images", "trunc")

    def __init__(self, frame: Frame, degree: int, images: Mapping[str, GradedElement], trunc: int | None = None):
        self.frame = frame
        self.degree = degree
        self.trunc = trunc
        imgs = {}
        for name, img in images.items():
            frame.kind(name)
            if img.frame != frame:
                raise FrameMismatch(f"image of {name} lives on another frame")
            imgs[name] = truncate(img, trunc)
        self.images = imgs

    @classmethod
    def from_images(cls, frame: Frame, degree: int, images: Mapping[str, GradedElement] | None = None,
                    trunc: int | None = None) -> "Derivation":
        full = {g: GradedElement.zero(frame, trunc) for g in frame.generators}
        full.update(images or {})
        return cls(frame, degree, full, trunc)

    @classmethod
    def zero(cls, frame: Frame, degree: int = 1, trunc: int | None = None) -> "Derivation":
        return cls.from_images(frame, degree, None, trunc)

    def __call__(self, a: GradedElement) -> GradedElement:
        return apply_derivation(self, a)

    def image(self, name: str) -> GradedElement:
        try:
            return self.images[name]
        except KeyError:
            raise MissingImage(name) from None

    def __add__(self, other: "Derivation") -> "Derivation":
        if other.frame != self.frame or other.degree != self.degree:
            raise FrameMismatch("derivations of different frame or degree")
        trunc = _min_trunc(self.trunc, other.trunc)
        names = set(self.images) | set(other.images)
        zero = GradedElement.zero(self.frame, trunc)
        return Derivation(self.frame, self.degree,
                          {n: self.images.get(n, zero) + other.images.get(n, zero) for n in names}, trunc)

    def __neg__(self):
        return Derivation(self.frame, self.degree, {n: -v for n, v in self.images.items()}, self.trunc)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c: Scalar) -> "Derivation":
        return Derivation(self.frame, self.degree, {n: v * c for n, v in self.images.items()}, self.trunc)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Derivation):
            return NotImplemented
        if self.frame != other.frame:
            return False
        names = set(self.images) | set(other.images)
        zero = GradedElement.zero(self.frame)
        return all(self.images.get(n, zero) == other.images.get(n, zero) for n in names)

    def is_zero(self) -> bool:
        return not any(self.images.values())

    def with_trunc(self, trunc: int | None) -> "Derivation":
        return Derivation(self.frame, self.degree, self.images, trunc)

    def map_images(self, fn: Callable[[GradedElement], GradedElement], degree: int | None = None) -> "Derivation":
        return Derivation(self.frame, self.degree if degree is None else degree,
                          {n: fn(v) for n, v in self.images.items()}, self.trunc)

    def __repr__(self):
        body = ", ".join(f"{n} -> {format_element(v)}" for n, v in self.images.items() if v)
        return f"Derivation(deg={self.degree}; {body or '0'})"


def commutator(d1: Derivation, d2: Derivation) -> Derivation:
    """Graded commutator [d1, d2] = d1 d2 - (-1)^{|d1||d2|} d2 d1, as a derivation."""
    if d1.frame != d2.frame:
        raise FrameMismatch("derivations on different frames")
    sign = -1 if (d1.degree * d2.degree) % 2 else 1
    trunc = _min_trunc(d1.trunc, d2.trunc)
    images = {}
    for g in d1.frame.generators:
        if g not in d1.images or g not in d2.images:
            continue
        images[g] = truncate(d1(d2.images[g]) - d2(d1.images[g]) * sign, trunc)
    return Derivation(d1.frame, d1.degree + d2.degree, images, trunc)


def _mono(frame: Frame, word: tuple) -> GradedElement:
    return GradedElement(frame, {word: Fraction(1)})


def apply_derivation(D: Derivation, a: GradedElement) -> GradedElement:
    """Graded Leibniz extension of D from generators to ``a``.

    The slot part of each word is carried along untouched.
    """
    if a.frame != D.frame:
        raise FrameMismatch("derivation and element on different frames")
    frame = a.frame
    trunc = _min_trunc(a.trunc, D.trunc)
    out: dict = {}
    odd_parity = D.degree & 1

    def accumulate(coeff, left: tuple, img: GradedElement, right: tuple):
        # left * img * right with left/right words and img an element
        for wi, ci in img.terms.items():
            s1, w = word_mul(left, wi)
            if not s1:
                continue
            s2, w = word_mul(w, right)
            if not s2:
                continue
            if trunc is not None and sum(w[1]) > trunc:
                continue
            out[w] = out.get(w, 0) + s1 * s2 * coeff * ci

    nsym = len(frame.sym)
    nbase = len(frame.base)
    for w, c in a.terms.items():
        odd, sym, base, slots = w
        zs, zb = (0,) * nsym, (0,) * nbase
        # odd factors, left to right
        for pos, gi in enumerate(odd):
            img = D.image(frame.odd[gi])
            if not img:
                continue
            sign = -1 if (odd_parity and pos % 2) else 1
            left = (odd[:pos], zs, zb, ())
            right = (odd[pos + 1:], sym, base, slots)
            accumulate(sign * c, left, img, right)
        # even factors sit to the right of all odd ones
        sign = -1 if (odd_parity and len(odd) % 2) else 1
        left_odd = (odd, zs, zb, ())
        for k, e in enumerate(sym):
            if not e:
                continue
            img = D.image(frame.sym[k])
            if not img:
                continue
            rest = tuple(x - 1 if j == k else x for j, x in enumerate(sym))
            accumulate(sign * c * e, left_odd, img, ((), rest, base, slots))
        for k, e in enumerate(base):
            if not e:
                continue
            img = D.image(frame.base[k])
            if not img:
                continue
            rest = tuple(x - 1 if j == k else x for j, x in enumerate(base))
            accumulate(sign * c * e, left_odd, img, ((), sym, rest, slots))
    return GradedElement(frame, out, trunc)


def contract(name: str, a: GradedElement) -> GradedElement:
    """Interior product with the frame vector dual to generator ``name``.

    Degree -1 graded derivation on odd generators, plain partial derivative on
    even ones.
    """
    frame = a.frame
    kind, _ = frame.kind(name)
    deg = -1 if kind == "odd" else 0
    D = Derivation.from_images(frame, deg, {name: GradedElement.one(frame)})
    return apply_derivation(D, a)


def partial(name: str, a: GradedElement) -> GradedElement:
    """Left partial derivative; identical to ``contract`` but named for calculus use."""
    return contract(name, a)


def multi_index_factorial(exps: Iterable[int]) -> int:
    out = 1
    for e in exps:
        for k in range(2, e + 1):
            out *= k
    return out


def relabel(a: GradedElement, target: Frame, rename: Mapping[str, str] | None = None,
            trunc: int | None = None) -> GradedElement:
    """Move ``a`` onto ``target`` by generator name (optionally renamed).

    Generators missing from the target frame raise ``FrameMismatch`` if used.
    """
    rename = dict(rename or {})
    src = a.frame
    odd_map = []
    for n in src.odd:
        t = rename.get(n, n)
        odd_map.append(target.kind(t) if t in target._index else None)
    even_src = [("sym", i, n) for i, n in enumerate(src.sym)] + [("base", i, n) for i, n in enumerate(src.base)]
    even_map = {}
    for kind, i, n in even_src:
        t = rename.get(n, n)
        even_map[(kind, i)] = target.kind(t) if t in target._index else None
    out = {}
    for (odd, sym, base, slots), c in a.terms.items():
        new_odd = []
        for gi in odd:
            m = odd_map[gi]
            if m is None or m[0] != "odd":
                raise FrameMismatch(f"odd generator {src.odd[gi]} has no odd target")
            new_odd.append(m[1])
        s = [0] * len(target.sym)
        b = [0] * len(target.base)
        for kind, exps in (("sym", sym), ("base", base)):
            for i, e in enumerate(exps):
                if not e:
                    continue
                m = even_map[(kind, i)]
                if m is None or m[0] == "odd":
                    raise FrameMismatch("even generator has no even target")
                (s if m[0] == "sym" else b)[m[1]] += e
        sign = koszul_sign(sorted(range(len(new_odd)), key=lambda k: new_odd[k]), [1] * len(new_odd))
        w = (tuple(sorted(new_odd)), tuple(s), tuple(b), slots)
        out[w] = out.get(w, 0) + sign * c
    return GradedElement(target, out, a.trunc if trunc is None else trunc)


def substitute(a: GradedElement, images: Mapping[str, GradedElement], target: Frame,
               trunc: int | None = None) -> GradedElement:
    """Algebra morphism sending each generator to the given image on ``target``.

    Generators without an image are mapped by name onto ``target``.
    """
    src = a.frame
    gens = {}
    for n in src.generators:
        if n in images:
            gens[n] = images[n]
        else:
            gens[n] = GradedElement.gen(target, n, trunc)
    out = GradedElement.zero(target, trunc)
    for (odd, sym, base, slots), c in a.terms.items():
        term = GradedElement.scalar(target, c, trunc, slots)
        for gi in odd:
            term = term * gens[src.odd[gi]]
        for i, e in enumerate(sym):
            for _ in range(e):
                term = term * gens[src.sym[i]]
        for i, e in enumerate(base):
            for _ in range(e):
                term = term * gens[src.base[i]]
        out = out + term
    return truncate(out, trunc)


def format_scalar(c: Fraction) -> str:
    return f"{c.numerator}" if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_word(frame: Frame, word: tuple) -> str:
    odd, sym, base, slots = word
    parts = [frame.odd[i] for i in odd]
    for names, exps in ((frame.sym, sym), (frame.base, base)):
        for n, e in zip(names, exps):
            if e == 1:
                parts.append(n)
            elif e > 1:
                parts.append(f"{n}^{e}")
    if slots:
        parts.append("[" + ",".join(str(s) for s in slots) + "]")
    return "*".join(parts) if parts else "1"


def word_key(word: tuple):
    odd, sym, base, slots = word
    return (len(odd), sum(sym), odd, sym, base, repr(slots))


def format_element(a: GradedElement) -> str:
    """Deterministic text form, e.g. ``2*l1*c1 - 1/2*c2^2``."""
    if not a.terms:
        return "0"
    pieces = []
    for w in sorted(a.terms, key=word_key):
        c = a.terms[w]
        mono = format_word(a.frame, w)
        mag = format_scalar(abs(c))
        body = mono if mag == "1" and mono != "1" else (mag if mono == "1" else f"{mag}*{mono}")
        pieces.append(("-" if c < 0 else "+", body))
    text = ("-" if pieces[0][0] == "-" else "") + pieces[0][1]
    for sign, body in pieces[1:]:
        text += f" {sign} {body}"
    return text


def random_element(frame: Frame, rng, n_terms: int = 4, max_sym: int = 3, max_base: int = 1,
                   trunc: int | None = None, odd_pool: Sequence[int] | None = None,
                   max_odd: int | None = None, coeff_range: int = 5) -> GradedElement:
    """Random sparse element; ``rng`` is a ``random.Random`` instance."""
    pool = list(range(len(frame.odd))) if odd_pool is None else list(odd_pool)
    max_odd = len(pool) if max_odd is None else min(max_odd, len(pool))
    terms = {}
    for _ in range(n_terms):
        k = rng.randint(0, max_odd)
        odd = tuple(sorted(rng.sample(pool, k)))
        s = [0] * len(frame.sym)
        for _ in range(rng.randint(0, max_sym) if frame.sym else 0):
            s[rng.randrange(len(s))] += 1
        b = [0] * len(frame.base)
        for _ in range(rng.randint(0, max_base) if frame.base else 0):
            b[rng.randrange(len(b))] += 1
        c = Fraction(rng.randint(-coeff_range, coeff_range), rng.randint(1, 3))
        w = (odd, tuple(s), tuple(b), ())
        terms[w] = terms.get(w, 0) + c
    return GradedElement(frame, terms, trunc)
