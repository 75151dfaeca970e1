"""Positive definite integral quadratic forms.

Short vectors are found by Fincke-Pohst enumeration over an exact rational
decomposition of the Gram matrix.  Reduction and the ternary enumeration are
restricted to dimension <= 3, where Minkowski-reduced bases realise the
successive minima.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import floor, sqrt
from typing import Sequence

from .linalg import (
    IntegerMatrix,
    as_matrix,
    det_exact,
    det_times_inverse,
    invariant_factors,
    leading_minors,
    scaled_inverse,
)


class NotPositiveDefinite(ValueError):
    pass


@dataclass(frozen=True)
class QuadraticForm:
    gram: IntegerMatrix
    minors: tuple[int, ...] = field(init=False, compare=False)

    def __post_init__(self):
        g = as_matrix(self.gram)
        object.__setattr__(self, "gram", g)
        if not g.is_symmetric():
            raise NotPositiveDefinite("Gram matrix is not symmetric")
        minors = tuple(leading_minors(g))
        if not all(x > 0 for x in minors):
            raise NotPositiveDefinite(f"leading principal minors {minors} are not all positive")
        object.__setattr__(self, "minors", minors)

    @property
    def dim(self) -> int:
        return self.gram.nrows

    @property
    def det(self) -> int:
        return self.minors[-1]

    def value(self, x: Sequence[int]) -> int:
        g = self.gram.rows
        n = len(x)
        return sum(x[i] * g[i][j] * x[j] for i in range(n) for j in range(n))

    def transform(self, s: IntegerMatrix) -> "QuadraticForm":
        """The form S^T G S (columns of S are the new basis)."""
        return QuadraticForm(s.T @ self.gram @ s)


def as_form(f) -> QuadraticForm:
    return f if isinstance(f, QuadraticForm) else QuadraticForm(as_matrix(f))


# ---------------------------------------------------------------------------
# enumeration


def _decompose(g: Sequence[Sequence[int]]) -> list[list[Fraction]]:
    # q(x) = sum_i q[i][i] * (x_i + sum_{j>i} q[i][j] x_j)^2
    n = len(g)
    q = [[Fraction(x) for x in r] for r in g]
    for i in range(n):
        for j in range(i + 1, n):
            q[j][i] = q[i][j]
            q[i][j] = q[i][j] / q[i][i]
        for k in range(i + 1, n):
            for l in range(k, n):
                q[k][l] -= q[k][i] * q[i][l]
    return q


def _int_range(center: Fraction, radius_sq: Fraction) -> tuple[int, int]:
    """Integers x with (x - center)^2 <= radius_sq, as an inclusive range."""
    if radius_sq < 0:
        return 1, 0
    ok = lambda x: (x - center) ** 2 <= radius_sq  # noqa: E731
    r = sqrt(float(radius_sq))
    c = float(center)
    hi = floor(c + r)
    while ok(hi + 1):
        hi += 1
    while hi >= center and not ok(hi):
        hi -= 1
    lo = -floor(-(c - r))
    while ok(lo - 1):
        lo -= 1
    while lo <= center and not ok(lo):
        lo += 1
    if not ok(lo) or not ok(hi):
        return 1, 0
    return lo, hi


def short_vectors(f, bound: int) -> list[tuple[int, tuple[int, ...]]]:
    """All nonzero x (both signs) with f(x) <= bound, sorted by value then vector."""
    f = as_form(f)
    n = f.dim
    q = _decompose(f.gram.rows)
    out: list[tuple[int, tuple[int, ...]]] = []
    x = [0] * n
    bound_f = Fraction(bound)

    def rec(i: int, remaining: Fraction):
        center = -sum(q[i][j] * x[j] for j in range(i + 1, n))
        lo, hi = _int_range(center, remaining / q[i][i])
        for xi in range(lo, hi + 1):
            x[i] = xi
            rest = remaining - q[i][i] * (xi - center) ** 2
            if i == 0:
                if any(x):
                    out.append((f.value(x), tuple(x)))
            else:
                rec(i - 1, rest)
        x[i] = 0

    rec(n - 1, bound_f)
    out.sort()
    return out


def _normalize_sign(v: Sequence[int]) -> tuple[int, ...]:
    for a in v:
        if a:
            return tuple(v) if a > 0 else tuple(-b for b in v)
    return tuple(v)


def _witness_key(v: Sequence[int]):
    return (sum(abs(a) for a in v), [-abs(a) for a in v], [-a for a in v])


def minimum_nonzero(f) -> tuple[int, tuple[int, ...]]:
    """Minimum of f over nonzero integer vectors, with a witness.

    The witness has its first nonzero coordinate positive; among several
    minimal vectors the one with the smallest 1-norm, then the heaviest
    leading coordinates, is reported.
    """
    f = as_form(f)
    g = f.gram.rows
    bound = min(g[i][i] for i in range(f.dim))
    vecs = short_vectors(f, bound)
    m = vecs[0][0]
    cands = {_normalize_sign(v) for val, v in vecs if val == m}
    return m, min(cands, key=_witness_key)


def represents(f, value: int) -> bool:
    return any(val == value for val, _ in short_vectors(f, value))


def adjugate_min(c, scale: int | None = None) -> tuple[int, tuple[int, ...]]:
    """Minimum of the form scale * C^-1 (scale defaults to det C).

    Passing a ``CartanData`` uses its elementary divisor p^d as the scale,
    i.e. the form p^d C^-1.
    """
    if scale is None and hasattr(c, "pd"):
        scale = c.pd
    cm = as_matrix(c)
    QuadraticForm(cm)  # validates positivity
    if scale is None:
        return minimum_nonzero(det_times_inverse(cm))
    return minimum_nonzero(scaled_inverse(cm, scale))


# ---------------------------------------------------------------------------
# isometry


def find_isometry(a, b) -> IntegerMatrix | None:
    """S in GL(n, Z) with S^T A S = B, or None.  Backtracking over short vectors."""
    a = as_form(a)
    b = as_form(b)
    if a.dim != b.dim or a.det != b.det:
        return None
    n = a.dim
    bg = b.gram.rows
    ag = a.gram.rows
    if sorted(invariant_factors(a.gram)) != sorted(invariant_factors(b.gram)):
        return None
    bound = max(bg[i][i] for i in range(n))
    by_norm: dict[int, list[tuple[int, ...]]] = {}
    for val, v in short_vectors(a, bound):
        by_norm.setdefault(val, []).append(v)
    cands = [by_norm.get(bg[j][j], []) for j in range(n)]
    if any(not c for c in cands):
        return None
    # precompute A v for inner products
    av_cache: dict[tuple[int, ...], tuple[int, ...]] = {}

    def av(v):
        r = av_cache.get(v)
        if r is None:
            r = tuple(sum(ag[i][k] * v[k] for k in range(n)) for i in range(n))
            av_cache[v] = r
        return r

    cols: list[tuple[int, ...]] = []

    def rec(j: int) -> bool:
        if j == n:
            return True
        for v in cands[j]:
            w = av(v)
            if all(sum(c[i] * w[i] for i in range(n)) == bg[i2][j] for i2, c in enumerate(cols)):
                cols.append(v)
                if rec(j + 1):
                    return True
                cols.pop()
        return False

    if not rec(0):
        return None
    s = IntegerMatrix([[cols[j][i] for j in range(n)] for i in range(n)], n)
    assert abs(det_exact(s)) == 1
    return s


def is_isometric(a, b) -> bool:
    return find_isometry(a, b) is not None


# ---------------------------------------------------------------------------
# reduction in dimension <= 3


def is_minkowski_reduced(f, absolute_ternary: bool = False) -> bool:
    """Minkowski reduction test for dimension <= 3.

    Checks the diagonal ordering, 2|a_ij| <= a_ii (i < j), and for ternary
    forms f(e_k + s e_i + t e_j) >= a_kk for all signs s, t.  With
    ``absolute_ternary`` the last family is replaced by the stronger
    2|a_ij +- a_ik +- a_jk| <= a_ii + a_jj over every sign choice.
    """
    g = as_matrix(f.gram if isinstance(f, QuadraticForm) else f).rows
    n = len(g)
    if n > 3:
        raise ValueError("reduction conditions are only implemented for dimension <= 3")
    if any(g[i][i] > g[i + 1][i + 1] for i in range(n - 1)):
        return False
    for i in range(n):
        for j in range(i + 1, n):
            if 2 * abs(g[i][j]) > g[i][i]:
                return False
    if n == 3:
        a11, a22 = g[0][0], g[1][1]
        a12, a13, a23 = g[0][1], g[0][2], g[1][2]
        if absolute_ternary:
            if 2 * (abs(a12) + abs(a13) + abs(a23)) > a11 + a22:
                return False
        else:
            for s, t in product((1, -1), repeat=2):
                if a11 + a22 + 2 * (s * t * a12 + s * a13 + t * a23) < 0:
                    return False
    return True


def _gram_of(gm, vecs) -> list[list[int]]:
    n = len(vecs)
    return [[sum(vecs[i][a] * gm[a][b] * vecs[j][b] for a in range(n) for b in range(n)) for j in range(n)] for i in range(n)]


def _sign_normalized(g: list[list[int]]) -> bool:
    # first nonzero upper off-diagonal entry of every row is non-negative
    n = len(g)
    for i in range(n - 1):
        j = next((j for j in range(i + 1, n) if g[i][j]), None)
        if j is not None and g[i][j] < 0:
            return False
    return True


def _pre_reduce(f: QuadraticForm) -> IntegerMatrix:
    """Pairwise size reduction until no basis vector can be shortened by another."""
    n = f.dim
    s = [[int(i == j) for j in range(n)] for i in range(n)]
    g = [list(r) for r in f.gram.rows]
    changed = True
    while changed:
        changed = False
        for i in range(n):
            for j in range(n):
                if i == j or g[j][j] > g[i][i] or 2 * abs(g[i][j]) <= g[j][j]:
                    continue
                # nearest integer to g_ij / g_jj, ties toward zero
                q = (2 * abs(g[i][j]) + g[j][j] - 1) // (2 * g[j][j])
                q = q if g[i][j] > 0 else -q
                for r in s:
                    r[i] -= q * r[j]
                g = _gram_of(f.gram.rows, [[s[a][c] for a in range(n)] for c in range(n)])
                changed = True
    return IntegerMatrix(s, n)


def _canon_key(g: list[list[int]]):
    n = len(g)
    off = [g[i][j] for i in range(n) for j in range(i + 1, n)]
    return (
        [g[i][i] for i in range(n)],
        not is_minkowski_reduced(g, absolute_ternary=True),
        [abs(x) for x in off],
        [-x for x in off],
    )


def reduce(f) -> tuple[QuadraticForm, IntegerMatrix]:
    """Canonical Minkowski-reduced representative of the class of f (dim <= 3).

    Returns ``(g, S)`` with ``g.gram == S^T f.gram S``.  All bases realising
    the successive minima are examined; the representative prefers forms
    satisfying the absolute-value ternary condition, then small off-diagonal
    magnitudes, then non-negative off-diagonal entries.  The result is a class
    invariant, so equal outputs mean equivalent inputs.
    """
    f = as_form(f)
    n = f.dim
    if n > 3:
        raise ValueError("reduction is only implemented for dimension <= 3")
    pre = _pre_reduce(f)
    h = f.transform(pre)
    bound = max(h.gram.rows[i][i] for i in range(n))
    vecs = [(val, v) for val, v in short_vectors(h, bound)]
    # successive minima
    minima: list[int] = []
    chosen: list[tuple[int, ...]] = []
    from .linalg import _rank_rows

    for val, v in vecs:
        if _rank_rows(chosen + [v]) > len(chosen):
            chosen.append(v)
            minima.append(val)
            if len(chosen) == n:
                break
    by_norm: dict[int, list[tuple[int, ...]]] = {}
    for val, v in vecs:
        if v == _normalize_sign(v):
            by_norm.setdefault(val, []).append(v)
    hg = h.gram.rows
    best = None
    for combo in product(*(by_norm[m] for m in minima)):
        if len(set(combo)) < n:
            continue
        if abs(det_exact(IntegerMatrix(combo, n))) != 1:
            continue
        g0 = _gram_of(hg, combo)
        if not is_minkowski_reduced(g0):
            continue
        for signs in product((1, -1), repeat=n - 1):
            eps = (1,) + signs
            g = [[eps[i] * eps[j] * g0[i][j] for j in range(n)] for i in range(n)]
            if not _sign_normalized(g):
                continue
            key = _canon_key(g)
            if best is None or key < best[0]:
                s = [[eps[j] * combo[j][i] for j in range(n)] for i in range(n)]
                best = (key, g, s)
    assert best is not None, "successive minima failed to give a reduced basis"
    _, g, s = best
    total = pre @ IntegerMatrix(s, n)
    out = QuadraticForm(IntegerMatrix(g, n))
    assert total.T @ f.gram @ total == out.gram
    return out, total


def enumerate_reduced_ternary(
    det: int,
    invariant_factors_filter: Sequence[int] | None = None,
    min_at_least: int | None = None,
) -> list[QuadraticForm]:
    """One canonical reduced representative per class of ternary PD forms of determinant ``det``.

    Uses the bound a11 * a22 * a33 <= 2 det for Minkowski-reduced ternary forms.
    """
    if det < 1:
        raise ValueError("determinant must be positive")
    want = tuple(sorted(invariant_factors_filter)) if invariant_factors_filter is not None else None
    found: dict[IntegerMatrix, QuadraticForm] = {}
    a = 1
    while a ** 3 <= 2 * det:
        b = a
        while a * b * b <= 2 * det:
            c = b
            while a * b * c <= 2 * det:
                for x in range(-(a // 2), a // 2 + 1):
                    for y in range(-(a // 2), a // 2 + 1):
                        for z in range(-(b // 2), b // 2 + 1):
                            g = [[a, x, y], [x, b, z], [y, z, c]]
                            if a * b - x * x <= 0:
                                continue
                            if det_exact(IntegerMatrix(g, 3)) != det:
                                continue
                            if not is_minkowski_reduced(g):
                                continue
                            rep, _ = reduce(IntegerMatrix(g, 3))
                            found.setdefault(rep.gram, rep)
                c += 1
            b += 1
        a += 1
    out = []
    for rep in found.values():
        if want is not None and tuple(sorted(invariant_factors(rep.gram))) != want:
            continue
        if min_at_least is not None and minimum_nonzero(rep)[0] < min_at_least:
            continue
        out.append(rep)
    out.sort(key=lambda q: q.gram.rows)
    for i in range(len(out)):
        for j in range(i + 1, len(out)):
            assert not is_isometric(out[i], out[j]), "duplicate class in enumeration"
    return out
