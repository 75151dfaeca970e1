"""Finite abelian p-groups with coprime automorphism groups, by explicit enumeration.

An automorphism is an n x n integer matrix A acting on column vectors: the
image of the j-th standard generator is column j, with entry (i, j) taken
mod p^e_i.  Groups of automorphisms are stored as permutation tables on the
lexicographically ordered element list.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from math import gcd
from typing import Iterator, Sequence

import numpy as np

from .blocks import is_prime
from .linalg import IntegerMatrix, _unimodular_inverse, smith_normal_form

MAX_GROUP_ORDER = 2**14
MAX_AUT_ORDER = 10**4

Element = tuple[int, ...]
Matrix = tuple[tuple[int, ...], ...]


class InvalidAction(ValueError):
    pass


class AbelianPGroup:
    """Z/p^e1 x ... x Z/p^en with e1 >= ... >= en >= 1; n = 0 gives the trivial group."""

    def __init__(self, p: int, exponents: Sequence[int] = ()):
        if not is_prime(p):
            raise ValueError(f"{p} is not prime")
        exps = tuple(int(e) for e in exponents)
        if any(e < 1 for e in exps) or list(exps) != sorted(exps, reverse=True):
            raise ValueError("exponents must be positive and non-increasing")
        self.p = p
        self.exponents = exps
        self.moduli = tuple(p**e for e in exps)
        self.order = p ** sum(exps)
        if self.order > MAX_GROUP_ORDER:
            raise ValueError(f"group order {self.order} exceeds the cap {MAX_GROUP_ORDER}")
        strides = []
        s = 1
        for m in reversed(self.moduli):
            strides.append(s)
            s *= m
        self._strides = np.array(strides[::-1], dtype=np.int64)
        self._mod = np.array(self.moduli, dtype=np.int64)

    def __repr__(self):
        return f"AbelianPGroup(p={self.p}, exponents={self.exponents})"

    def __eq__(self, other):
        return isinstance(other, AbelianPGroup) and (self.p, self.exponents) == (other.p, other.exponents)

    def __hash__(self):
        return hash((self.p, self.exponents))

    @property
    def rank(self) -> int:
        return len(self.exponents)

    @property
    def zero(self) -> Element:
        return (0,) * self.rank

    @cached_property
    def table(self) -> np.ndarray:
        """All elements, one per row, in lexicographic order."""
        if not self.rank:
            return np.zeros((1, 0), dtype=np.int64)
        return np.array(list(product(*(range(m) for m in self.moduli))), dtype=np.int64)

    def elements(self) -> Iterator[Element]:
        return product(*(range(m) for m in self.moduli))

    def normalize(self, x: Sequence[int]) -> Element:
        if len(x) != self.rank:
            raise ValueError(f"element {tuple(x)} has the wrong length")
        return tuple(int(a) % m for a, m in zip(x, self.moduli))

    def index(self, x: Sequence[int]) -> int:
        x = self.normalize(x)
        return int(sum(a * int(s) for a, s in zip(x, self._strides)))

    def element(self, i: int) -> Element:
        return tuple(int(a) for a in self.table[i])

    def add(self, x: Sequence[int], y: Sequence[int]) -> Element:
        return self.normalize([a + b for a, b in zip(x, y)])

    def multiple(self, x: Sequence[int], c: int) -> Element:
        return self.normalize([c * a for a in x])

    def element_order(self, x: Sequence[int]) -> int:
        x = self.normalize(x)
        o = 1
        for a, m in zip(x, self.moduli):
            if a:
                o = max(o, m // gcd(a, m))
        return o

    @property
    def exponent(self) -> int:
        return self.moduli[0] if self.rank else 1

    def cyclic_subgroup(self, u: Sequence[int]) -> list[int]:
        """Indices of the elements of <u>."""
        u = self.normalize(u)
        return sorted({self.index(self.multiple(u, c)) for c in range(self.element_order(u))})

    def indices_of(self, rows: np.ndarray) -> np.ndarray:
        if not self.rank:
            return np.zeros(len(rows), dtype=np.int64)
        return (np.mod(rows, self._mod) * self._strides).sum(axis=1)

    def to_dict(self) -> dict:
        return {"p": self.p, "exponents": list(self.exponents)}


def _reduce_matrix(group: AbelianPGroup, a) -> Matrix:
    rows = [list(r) for r in (a.rows if isinstance(a, IntegerMatrix) else a)]
    n = group.rank
    if len(rows) != n or any(len(r) != n for r in rows):
        raise InvalidAction(f"automorphism must be a {n}x{n} matrix")
    return tuple(tuple(int(x) % group.moduli[i] for x in r) for i, r in enumerate(rows))


def _check_well_defined(group: AbelianPGroup, a: Matrix):
    for i in range(group.rank):
        for j in range(group.rank):
            if a[i][j] * group.moduli[j] % group.moduli[i]:
                raise InvalidAction(
                    f"entry ({i},{j}) = {a[i][j]} does not give a homomorphism: "
                    f"p^{group.exponents[j]} times it must vanish mod p^{group.exponents[i]}"
                )


def _permutation(group: AbelianPGroup, a: Matrix) -> np.ndarray:
    if not group.rank:
        return np.zeros(1, dtype=np.int64)
    images = group.table @ np.array(a, dtype=np.int64).T
    return group.indices_of(images)


def _compose(group: AbelianPGroup, a: Matrix, b: Matrix) -> Matrix:
    """The automorphism x -> a(b(x))."""
    n = group.rank
    return tuple(
        tuple(sum(a[i][t] * b[t][j] for t in range(n)) % group.moduli[i] for j in range(n)) for i in range(n)
    )


class AutAction:
    """A finite group T of automorphisms of D, listed explicitly.

    ``elements[0]`` is the identity; the rest follow breadth-first closure
    order from the generators, which is deterministic.
    """

    def __init__(self, group: AbelianPGroup, elements: Sequence[Matrix], perms: np.ndarray, generators: Sequence[Matrix]):
        self.group = group
        self.elements = list(elements)
        self.perms = perms
        self.generators = list(generators)
        self._pos = {m: i for i, m in enumerate(self.elements)}

    @property
    def order(self) -> int:
        return len(self.elements)

    def __len__(self):
        return self.order

    def __contains__(self, a) -> bool:
        return _reduce_matrix(self.group, a) in self._pos

    def position(self, a) -> int:
        return self._pos[_reduce_matrix(self.group, a)]

    def apply(self, t: int, x: Sequence[int]) -> Element:
        return self.group.element(int(self.perms[t][self.group.index(x)]))

    def inverse(self, t: int) -> int:
        inv = np.argsort(self.perms[t])
        hits = np.nonzero((self.perms == inv).all(axis=1))[0]
        return int(hits[0])

    def product_index(self, s: int, t: int) -> int:
        """Position of s o t."""
        return self._pos[_compose(self.group, self.elements[s], self.elements[t])]

    def subgroup(self, positions: Sequence[int]) -> "AutAction":
        positions = sorted(positions)
        return AutAction(self.group, [self.elements[i] for i in positions], self.perms[positions], [])

    def to_dict(self) -> dict:
        return {**self.group.to_dict(), "generators": [[list(r) for r in g] for g in self.generators]}


def close_generators(group: AbelianPGroup, generators: Sequence, cap: int = MAX_AUT_ORDER, require_coprime: bool = True) -> AutAction:
    gens = []
    for g in generators:
        a = _reduce_matrix(group, g)
        _check_well_defined(group, a)
        perm = _permutation(group, a)
        if len(np.unique(perm)) != group.order:
            raise InvalidAction(f"generator {[list(r) for r in a]} is not invertible on D")
        gens.append(a)
    ident = tuple(tuple(int(i == j) for j in range(group.rank)) for i in range(group.rank))
    elements = [ident]
    seen = {ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = _compose(group, g, x)
                if y not in seen:
                    seen.add(y)
                    elements.append(y)
                    nxt.append(y)
                    if len(elements) > cap:
                        raise InvalidAction(f"generated group exceeds the cap {cap}")
        frontier = nxt
    if require_coprime and len(elements) % group.p == 0:
        raise InvalidAction(f"|T| = {len(elements)} is divisible by p = {group.p}; the action is not coprime")
    perms = np.array([_permutation(group, a) for a in elements], dtype=np.int64).reshape(len(elements), group.order)
    return AutAction(group, elements, perms, gens)


def load_action(data: dict) -> AutAction:
    """Group descriptor: {"p": ..., "exponents": [...], "generators": [[[...], ...], ...]}."""
    try:
        group = AbelianPGroup(int(data["p"]), data.get("exponents", []))
        gens = data.get("generators", [])
    except (KeyError, TypeError) as exc:
        raise InvalidAction(f"malformed group descriptor: {exc}") from None
    except ValueError as exc:
        raise InvalidAction(str(exc)) from None
    return close_generators(group, gens)


def read_action_file(path) -> AutAction:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidAction(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return load_action(data)


def centralizer(t: AutAction, u: Sequence[int]) -> AutAction:
    """{s in T : s(u) = u}."""
    i = t.group.index(u)
    return t.subgroup(np.nonzero(t.perms[:, i] == i)[0].tolist())


def _identity_rows(perms: np.ndarray) -> np.ndarray:
    return (perms == np.arange(perms.shape[1])).all(axis=1)


def acts_freely(s: AutAction, h: AbelianPGroup | None = None) -> bool:
    """Every nonidentity element of S fixes only the zero element of H."""
    if h is not None and h != s.group:
        raise ValueError("S does not act on this group")
    perms = s.perms
    ident = _identity_rows(perms)
    others = perms[~ident]
    if not len(others):
        return True
    fixed = others == np.arange(perms.shape[1])
    return not fixed[:, 1:].any()


@dataclass
class QuotientAction:
    group: AbelianPGroup  # D / <u>
    image: AutAction  # faithful image of S
    kernel_order: int
    projection: IntegerMatrix  # x -> x V, then coordinates mod the quotient moduli
    coordinates: tuple[int, ...]  # which columns of x V survive, in quotient order

    def project(self, x: Sequence[int]) -> Element:
        y = IntegerMatrix([list(x)], len(x)) @ self.projection
        return self.group.normalize([y.rows[0][c] for c in self.coordinates])

    @property
    def free(self) -> bool:
        return acts_freely(self.image)


def quotient_action(d: AbelianPGroup, u: Sequence[int], s: AutAction) -> QuotientAction:
    """D/<u> with the action induced by S, which must centralize u."""
    u = d.normalize(u)
    iu = d.index(u)
    if not (s.perms[:, iu] == iu).all():
        raise ValueError("S does not centralize u")
    n = d.rank
    rel = [[d.moduli[i] if i == j else 0 for j in range(n)] for i in range(n)] + [list(u)]
    if n == 0:
        q = AbelianPGroup(d.p, ())
        img = AutAction(q, [()], np.zeros((1, 1), dtype=np.int64), [])
        return QuotientAction(q, img, s.order, IntegerMatrix([], 0), ())
    snf = smith_normal_form(IntegerMatrix(rel, n))
    v = snf.right_transform
    vinv = _unimodular_inverse(v)
    divs = snf.invariant_factors
    keep = sorted((i for i in range(n) if divs[i] > 1), key=lambda i: -divs[i])
    q = AbelianPGroup(d.p, [_log(divs[i], d.p) for i in keep])
    mats = []
    for a in s.elements:
        cols = []
        for j in keep:
            lift = vinv.rows[j]
            img = [sum(a[r][c] * lift[c] for c in range(n)) for r in range(n)]
            y = IntegerMatrix([img], n) @ v
            cols.append([y.rows[0][i] for i in keep])
        mats.append(tuple(tuple(cols[j][i] for j in range(len(keep))) for i in range(len(keep))))
    reduced = [_reduce_matrix(q, m) for m in mats]
    distinct = list(dict.fromkeys(reduced))
    ident = tuple(tuple(int(i == j) for j in range(q.rank)) for i in range(q.rank))
    kernel = sum(1 for m in reduced if m == ident)
    for m in distinct:
        _check_well_defined(q, m)
    perms = np.array([_permutation(q, m) for m in distinct], dtype=np.int64).reshape(len(distinct), q.order)
    return QuotientAction(q, AutAction(q, distinct, perms, []), kernel, v, tuple(keep))


def _log(n: int, p: int) -> int:
    e = 0
    while n > 1:
        n //= p
        e += 1
    return e


def pairwise_criterion(t: AutAction, u: Sequence[int]) -> bool:
    """C_T(u) and C_T(v) meet trivially for every v outside <u>."""
    cu = centralizer(t, u)
    others = cu.perms[~_identity_rows(cu.perms)]
    if not len(others):
        return True
    fixed = others == np.arange(others.shape[1])
    outside = np.ones(t.group.order, dtype=bool)
    outside[t.group.cyclic_subgroup(u)] = False
    return not fixed[:, outside].any()


@dataclass(frozen=True)
class CorVerdict:
    u: Element
    free_on_quotient: bool
    pairwise: bool
    centralizer_order: int

    @property
    def holds(self) -> bool:
        return self.free_on_quotient and self.pairwise


class FormulationMismatch(AssertionError):
    pass


def cor_check(t: AutAction, u: Sequence[int]) -> CorVerdict:
    """Both formulations of the free-quotient criterion for one u; they must agree."""
    u = t.group.normalize(u)
    cu = centralizer(t, u)
    qa = quotient_action(t.group, u, cu)
    free = qa.free and qa.kernel_order == 1
    pw = pairwise_criterion(t, u)
    if free != pw:
        raise FormulationMismatch(f"formulations disagree at u = {u}")
    return CorVerdict(u, free, pw, cu.order)


def cor_criterion(t: AutAction) -> CorVerdict | None:
    """First u (lexicographic) such that C_T(u) acts freely on D/<u>."""
    for u in t.group.elements():
        v = cor_check(t, u)
        if v.holds:
            return v
    return None


def centralizer_orders(t: AutAction) -> np.ndarray:
    """|C_T(x)| for every x, indexed like the element table."""
    return (t.perms == np.arange(t.group.order)).sum(axis=0)


def min_centralizer(t: AutAction) -> tuple[Element, int]:
    orders = centralizer_orders(t)
    i = int(np.argmin(orders))  # first minimum, i.e. lexicographically first
    return t.group.element(i), int(orders[i])


def base_two_exists(t: AutAction) -> tuple[Element, Element] | None:
    """(u, v) with C_T(u) and C_T(v) meeting trivially, or None."""
    orders = centralizer_orders(t)
    n = t.group.order
    fixed = t.perms == np.arange(n)  # fixed[s, x]: s fixes x
    nonid = ~_identity_rows(t.perms)
    for i in sorted(range(n), key=lambda i: (int(orders[i]), i)):
        stab = fixed[:, i] & nonid
        if not stab.any():
            return t.group.element(i), t.group.zero
        joint = fixed[stab].any(axis=0)
        hits = np.nonzero(~joint)[0]
        if len(hits):
            return t.group.element(i), t.group.element(int(hits[0]))
    return None


def conjugate_element(t: AutAction, s: int, x: Sequence[int]) -> Element:
    return t.apply(s, x)


# ---------------------------------------------------------------------------
# fixtures


def _poly_mod(coeffs: list[int], poly: Sequence[int], n: int) -> list[int]:
    """Reduce a GF(2) polynomial (coefficient list, low degree first) modulo poly of degree n."""
    c = list(coeffs)
    for deg in range(len(c) - 1, n - 1, -1):
        if c[deg] & 1:
            for k, pk in enumerate(poly):
                c[deg - n + k] ^= pk & 1
    return [x & 1 for x in (c + [0] * n)[:n]]


def binary_field_model(poly: Sequence[int]) -> tuple[AbelianPGroup, Matrix, Matrix]:
    """F_2^n in the basis 1, x, ..., x^(n-1) for an irreducible poly (low degree first).

    Returns the group, multiplication by x and the squaring map.
    """
    n = len(poly) - 1
    group = AbelianPGroup(2, [1] * n)
    mult = [_poly_mod([0] * (j + 1) + [1], poly, n) for j in range(n)]
    square = [_poly_mod([0] * (2 * j) + [1], poly, n) for j in range(n)]
    to_rows = lambda cols: tuple(tuple(cols[j][i] for j in range(n)) for i in range(n))
    return group, to_rows(mult), to_rows(square)


F8_POLY = (1, 1, 0, 1)  # x^3 + x + 1
F128_POLY = (1, 1, 0, 0, 0, 0, 0, 1)  # x^7 + x + 1


def random_automorphism(group: AbelianPGroup, rng: random.Random, tries: int = 200) -> Matrix:
    n = group.rank
    for _ in range(tries):
        a = []
        for i in range(n):
            row = []
            for j in range(n):
                step = group.p ** max(0, group.exponents[i] - group.exponents[j])
                row.append(step * rng.randrange(group.moduli[i] // step))
            a.append(row)
        a = _reduce_matrix(group, a)
        if len(np.unique(_permutation(group, a))) == group.order:
            return a
    raise RuntimeError("no automorphism found")


def _power(group: AbelianPGroup, a: Matrix, k: int) -> Matrix:
    n = group.rank
    out = tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
    base = a
    while k:
        if k & 1:
            out = _compose(group, out, base)
        base = _compose(group, base, base)
        k >>= 1
    return out


def coprime_part(group: AbelianPGroup, a: Matrix) -> Matrix:
    """The p'-part of an automorphism (a power of it of order coprime to p)."""
    n = group.rank
    ident = tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
    o, x = 1, a
    while x != ident:
        x = _compose(group, a, x)
        o += 1
    pp = 1
    while o % group.p == 0:
        o //= group.p
        pp *= group.p
    return _power(group, a, pp)


def sample_coprime_actions(group: AbelianPGroup, rng: random.Random, count: int, max_gens: int = 2) -> list[AutAction]:
    """Seeded sample of coprime automorphism groups (generated by p'-parts of random automorphisms)."""
    out = []
    attempts = 0
    while len(out) < count and attempts < 20 * count:
        attempts += 1
        gens = [coprime_part(group, random_automorphism(group, rng)) for _ in range(rng.randint(1, max_gens))]
        try:
            out.append(close_generators(group, gens))
        except InvalidAction:
            continue
    return out


def rank_at_most_two_groups(max_order: int = 256, primes: Sequence[int] = (2, 3, 5, 7, 11, 13)) -> list[AbelianPGroup]:
    out = []
    for p in primes:
        e = 1
        while p**e <= max_order:
            out.append(AbelianPGroup(p, [e]))
            for f in range(1, e + 1):
                if p ** (e + f) <= max_order:
                    out.append(AbelianPGroup(p, [e, f]))
            e += 1
    return out


def maximal_order_elements(group: AbelianPGroup) -> list[Element]:
    return [x for x in group.elements() if group.element_order(x) == group.exponent]
