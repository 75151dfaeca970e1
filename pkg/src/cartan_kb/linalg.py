"""Exact integer matrix kernel.

Everything here works on Python ints (arbitrary precision) and
``fractions.Fraction``; no floating point is involved anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import gcd
from typing import Iterable, Sequence


class ParseError(ValueError):
    """Malformed matrix text; carries a 1-based line and column."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class IntegerMatrix:
    """Dense immutable matrix of Python ints, stored row-major."""

    __slots__ = ("rows", "ncols")

    def __init__(self, rows: Iterable[Sequence[int]], ncols: int | None = None):
        data = tuple(tuple(int(x) for x in r) for r in rows)
        if ncols is None:
            if not data:
                raise ValueError("cannot infer column count of an empty matrix")
            ncols = len(data[0])
        for r in data:
            if len(r) != ncols:
                raise ValueError("ragged rows")
        object.__setattr__(self, "rows", data)
        object.__setattr__(self, "ncols", ncols)

    def __setattr__(self, name, value):
        raise AttributeError("IntegerMatrix is immutable")

    @classmethod
    def identity(cls, n: int) -> "IntegerMatrix":
        return cls([[int(i == j) for j in range(n)] for i in range(n)], n)

    @classmethod
    def zeros(cls, m: int, n: int) -> "IntegerMatrix":
        return cls([[0] * n for _ in range(m)], n)

    @classmethod
    def diagonal(cls, entries: Sequence[int]) -> "IntegerMatrix":
        n = len(entries)
        return cls([[entries[i] if i == j else 0 for j in range(n)] for i in range(n)], n)

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), self.ncols)

    @property
    def is_square(self) -> bool:
        return len(self.rows) == self.ncols

    def __getitem__(self, idx):
        i, j = idx
        return self.rows[i][j]

    def __eq__(self, other):
        if not isinstance(other, IntegerMatrix):
            return NotImplemented
        return self.ncols == other.ncols and self.rows == other.rows

    def __hash__(self):
        return hash((self.ncols, self.rows))

    def __repr__(self):
        return f"IntegerMatrix({[list(r) for r in self.rows]!r})"

    def tolist(self) -> list[list[int]]:
        return [list(r) for r in self.rows]

    def transpose(self) -> "IntegerMatrix":
        return IntegerMatrix(zip(*self.rows), len(self.rows)) if self.rows else IntegerMatrix.zeros(self.ncols, 0)

    T = property(transpose)

    def __matmul__(self, other: "IntegerMatrix") -> "IntegerMatrix":
        if self.ncols != other.nrows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        cols = list(zip(*other.rows)) if other.rows else [()] * other.ncols
        return IntegerMatrix(
            [[sum(a * b for a, b in zip(r, c)) for c in cols] for r in self.rows], other.ncols
        )

    def __add__(self, other: "IntegerMatrix") -> "IntegerMatrix":
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        return IntegerMatrix(
            [[a + b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)], self.ncols
        )

    def __sub__(self, other: "IntegerMatrix") -> "IntegerMatrix":
        return self + other.scale(-1)

    def scale(self, c: int) -> "IntegerMatrix":
        return IntegerMatrix([[c * a for a in r] for r in self.rows], self.ncols)

    def submatrix(self, rows: Sequence[int], cols: Sequence[int] | None = None) -> "IntegerMatrix":
        if cols is None:
            cols = range(self.ncols)
        cols = list(cols)
        return IntegerMatrix([[self.rows[i][j] for j in cols] for i in rows], len(cols))

    def is_symmetric(self) -> bool:
        return self.is_square and all(
            self.rows[i][j] == self.rows[j][i] for i in range(self.ncols) for j in range(i)
        )

    def trace(self) -> int:
        return sum(self.rows[i][i] for i in range(min(self.shape)))

    def zero_rows(self) -> list[int]:
        return [i for i, r in enumerate(self.rows) if not any(r)]


def as_matrix(m) -> IntegerMatrix:
    if isinstance(m, IntegerMatrix):
        return m
    if hasattr(m, "Q"):
        return m.Q
    if hasattr(m, "gram"):
        return m.gram
    if hasattr(m, "C"):
        return m.C
    return IntegerMatrix(m)


# ---------------------------------------------------------------------------
# determinants, rank, inverse


def _det_rows(rows: Sequence[Sequence[int]]) -> int:
    """Bareiss fraction-free elimination on a list of rows."""
    n = len(rows)
    if n == 0:
        return 1
    a = [list(r) for r in rows]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        akk = a[k][k]
        rk = a[k]
        for i in range(k + 1, n):
            ri = a[i]
            aik = ri[k]
            for j in range(k + 1, n):
                ri[j] = (ri[j] * akk - aik * rk[j]) // prev
        prev = akk
    return sign * a[n - 1][n - 1]


def det_exact(m) -> int:
    """Exact determinant of a square integer matrix."""
    m = as_matrix(m)
    if not m.is_square:
        raise ValueError("determinant of a non-square matrix")
    return _det_rows(m.rows)


def _rank_rows(rows: Sequence[Sequence[int]]) -> int:
    a = [list(r) for r in rows if any(r)]
    if not a:
        return 0
    ncols = len(a[0])
    rank = 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(a)) if a[i][c]), None)
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        p = a[rank]
        pc = p[c]
        for i in range(rank + 1, len(a)):
            f = a[i][c]
            if f:
                ri = a[i]
                for j in range(c, ncols):
                    ri[j] = ri[j] * pc - f * p[j]
                g = 0
                for x in ri:
                    g = gcd(g, x)
                if g > 1:
                    a[i] = [x // g for x in ri]
        rank += 1
        if rank == len(a):
            break
    return rank


def rank(m) -> int:
    return _rank_rows(as_matrix(m).rows)


def inverse_rational(m) -> list[list[Fraction]]:
    """Exact inverse over Q via Gauss-Jordan; raises on singular input."""
    m = as_matrix(m)
    n = m.nrows
    if not m.is_square:
        raise ValueError("inverse of a non-square matrix")
    a = [[Fraction(x) for x in r] + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(m.rows)]
    for c in range(n):
        piv = next((i for i in range(c, n) if a[i][c] != 0), None)
        if piv is None:
            raise ValueError("singular matrix")
        a[c], a[piv] = a[piv], a[c]
        inv = 1 / a[c][c]
        a[c] = [x * inv for x in a[c]]
        for i in range(n):
            if i != c and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[c])]
    return [r[n:] for r in a]


def det_times_inverse(m) -> IntegerMatrix:
    """det(C) * C^-1, i.e. the adjugate of C."""
    m = as_matrix(m)
    d = det_exact(m)
    if d == 0:
        raise ValueError("singular matrix has no inverse")
    inv = inverse_rational(m)
    out = []
    for r in inv:
        row = []
        for x in r:
            y = x * d
            assert y.denominator == 1
            row.append(int(y))
        out.append(row)
    return IntegerMatrix(out, m.ncols)


def scaled_inverse(m, scale: int) -> IntegerMatrix:
    """``scale * C^-1``; raises ValueError if the result is not integral."""
    inv = inverse_rational(m)
    out = []
    for r in inv:
        row = []
        for x in r:
            y = x * scale
            if y.denominator != 1:
                raise ValueError(f"{scale} * C^-1 is not integral")
            row.append(int(y))
        out.append(row)
    return IntegerMatrix(out, len(out))


def gram(q) -> IntegerMatrix:
    """Q^T Q."""
    q = as_matrix(q)
    cols = list(zip(*q.rows))
    n = q.ncols
    out = [[0] * n for _ in range(n)]
    for i in range(n):
        ci = cols[i]
        for j in range(i, n):
            s = sum(a * b for a, b in zip(ci, cols[j]))
            out[i][j] = out[j][i] = s
    return IntegerMatrix(out, n)


def cauchy_binet_expansion(q) -> list[tuple[tuple[int, ...], int]]:
    """All maximal minors of a tall matrix, keyed by row subset."""
    q = as_matrix(q)
    k, l = q.shape
    if k < l:
        raise ValueError("need at least as many rows as columns")
    return [(v, _det_rows([q.rows[i] for i in v])) for v in combinations(range(k), l)]


def charpoly(m) -> list[int]:
    """Coefficients [c_0, ..., c_n] of det(tI - M), via Faddeev-LeVerrier."""
    m = as_matrix(m)
    n = m.nrows
    a = m.rows
    coeffs = [0] * (n + 1)
    coeffs[n] = 1
    mk = [[0] * n for _ in range(n)]  # M_0 = 0
    for k in range(1, n + 1):
        # M_k = A M_{k-1} + c_{n-k+1} I
        prev = mk
        c_prev = coeffs[n - k + 1]
        mk = [[sum(a[i][t] * prev[t][j] for t in range(n)) + (c_prev if i == j else 0) for j in range(n)] for i in range(n)]
        tr = sum(sum(a[i][t] * mk[t][i] for t in range(n)) for i in range(n))
        assert tr % k == 0
        coeffs[n - k] = -tr // k
    return coeffs


def is_psd(m) -> bool:
    """Exact positive-semidefiniteness test for a symmetric integer matrix."""
    m = as_matrix(m)
    if not m.is_symmetric():
        raise ValueError("PSD test needs a symmetric matrix")
    n = m.nrows
    c = charpoly(m)
    return all((-1) ** (n - i) * c[i] >= 0 for i in range(n + 1))


def leading_minors(m) -> list[int]:
    m = as_matrix(m)
    return [_det_rows([r[:i] for r in m.rows[:i]]) for i in range(1, m.nrows + 1)]


def is_positive_definite(m) -> bool:
    m = as_matrix(m)
    return m.is_symmetric() and all(x > 0 for x in leading_minors(m))


# ---------------------------------------------------------------------------
# Smith normal form


@dataclass(frozen=True)
class SmithForm:
    invariant_factors: tuple[int, ...]
    left_transform: IntegerMatrix
    right_transform: IntegerMatrix
    shape: tuple[int, int]

    @property
    def rank(self) -> int:
        return len(self.invariant_factors)

    def diagonal_matrix(self) -> IntegerMatrix:
        m, n = self.shape
        d = self.invariant_factors
        return IntegerMatrix([[d[i] if i == j and i < len(d) else 0 for j in range(n)] for i in range(m)], n)


def _snf(rows: Sequence[Sequence[int]], ncols: int, want_transforms: bool = True):
    m = len(rows)
    n = ncols
    a = [list(r) for r in rows]
    u = [[int(i == j) for j in range(m)] for i in range(m)] if want_transforms else None
    v = [[int(i == j) for j in range(n)] for i in range(n)] if want_transforms else None

    def swap_rows(i, j):
        a[i], a[j] = a[j], a[i]
        if u is not None:
            u[i], u[j] = u[j], u[i]

    def swap_cols(i, j):
        for r in a:
            r[i], r[j] = r[j], r[i]
        if v is not None:
            for r in v:
                r[i], r[j] = r[j], r[i]

    def add_row(dst, src, f):  # row_dst += f * row_src
        rd, rs = a[dst], a[src]
        for j in range(n):
            rd[j] += f * rs[j]
        if u is not None:
            ud, us = u[dst], u[src]
            for j in range(m):
                ud[j] += f * us[j]

    def add_col(dst, src, f):  # col_dst += f * col_src
        for r in a:
            r[dst] += f * r[src]
        if v is not None:
            for r in v:
                r[dst] += f * r[src]

    factors = []
    t = 0
    while t < min(m, n):
        # pivot: smallest nonzero |entry| in the trailing block, first in row-major order
        best = None
        for i in range(t, m):
            ri = a[i]
            for j in range(t, n):
                x = ri[j]
                if x and (best is None or abs(x) < best[0]):
                    best = (abs(x), i, j)
        if best is None:
            break
        _, pi, pj = best
        if pi != t:
            swap_rows(t, pi)
        if pj != t:
            swap_cols(t, pj)
        while True:
            piv = a[t][t]
            dirty = False
            for i in range(t + 1, m):
                x = a[i][t]
                if x:
                    q = x // piv
                    add_row(i, t, -q)
                    if a[i][t]:
                        dirty = True
            for j in range(t + 1, n):
                x = a[t][j]
                if x:
                    q = x // piv
                    add_col(j, t, -q)
                    if a[t][j]:
                        dirty = True
            if dirty:
                best = None
                for i in range(t, m):
                    x = a[i][t]
                    if x and (best is None or abs(x) < best[0]):
                        best = (abs(x), i, t)
                for j in range(t + 1, n):
                    x = a[t][j]
                    if x and abs(x) < best[0]:
                        best = (abs(x), t, j)
                _, pi, pj = best
                if pi != t:
                    swap_rows(t, pi)
                if pj != t:
                    swap_cols(t, pj)
                continue
            # pivot isolated; enforce divisibility of the trailing block
            bad = None
            for i in range(t + 1, m):
                for j in range(t + 1, n):
                    if a[i][j] % piv:
                        bad = i
                        break
                if bad is not None:
                    break
            if bad is None:
                break
            add_row(t, bad, 1)
        if a[t][t] < 0:
            a[t] = [-x for x in a[t]]
            if u is not None:
                u[t] = [-x for x in u[t]]
        factors.append(a[t][t])
        t += 1
    return factors, u, v


def smith_normal_form(m) -> SmithForm:
    """Invariant factors d_1 | d_2 | ... with witnesses: left @ M @ right = diag."""
    m = as_matrix(m)
    factors, u, v = _snf(m.rows, m.ncols)
    return SmithForm(
        tuple(factors), IntegerMatrix(u, m.nrows), IntegerMatrix(v, m.ncols), m.shape
    )


def invariant_factors(m) -> tuple[int, ...]:
    m = as_matrix(m)
    return tuple(_snf(m.rows, m.ncols, want_transforms=False)[0])


def _unimodular_inverse(v: IntegerMatrix) -> IntegerMatrix:
    d = det_exact(v)
    if abs(d) != 1:
        raise ValueError("matrix is not unimodular")
    return det_times_inverse(v).scale(d)


def saturation(rows) -> IntegerMatrix:
    """Basis (as rows) of the smallest pure sublattice containing the row span."""
    rows = as_matrix(rows)
    snf = smith_normal_form(rows)
    r = snf.rank
    vinv = _unimodular_inverse(snf.right_transform)
    return IntegerMatrix(vinv.rows[:r], rows.ncols)


def is_pure(sublattice_basis, ambient_dim: int | None = None) -> bool:
    """True iff the rows span a direct summand of Z^n."""
    b = as_matrix(sublattice_basis)
    if ambient_dim is not None and b.ncols != ambient_dim:
        raise ValueError("basis does not live in the stated ambient lattice")
    f = invariant_factors(b)
    if len(f) != b.nrows:
        raise ValueError("not a basis: rows are linearly dependent")
    return all(x == 1 for x in f)


def extend_to_basis(pure_rows: IntegerMatrix) -> IntegerMatrix:
    """Extend a basis of a pure sublattice to a unimodular square matrix (rows)."""
    snf = smith_normal_form(pure_rows)
    if any(x != 1 for x in snf.invariant_factors) or snf.rank != pure_rows.nrows:
        raise ValueError("rows do not form a basis of a pure sublattice")
    vinv = _unimodular_inverse(snf.right_transform)
    return IntegerMatrix(list(pure_rows.rows) + list(vinv.rows[snf.rank:]), pure_rows.ncols)


# ---------------------------------------------------------------------------
# shared text format


def parse_matrix(text: str) -> IntegerMatrix:
    """Parse the shared matrix text format ('k l' header, k rows, '#' comments)."""
    header = None
    rows: list[list[int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        values = []
        col = raw.find(tokens[0]) + 1
        pos = 0
        for tok in tokens:
            pos = raw.index(tok, pos)
            try:
                values.append(int(tok))
            except ValueError:
                raise ParseError(f"not an integer: {tok!r}", lineno, pos + 1) from None
            pos += len(tok)
        if header is None:
            if len(values) != 2 or values[0] < 1 or values[1] < 1:
                raise ParseError("header must be 'k l' with k, l >= 1", lineno, col)
            header = (values[0], values[1])
            continue
        if len(values) != header[1]:
            raise ParseError(f"expected {header[1]} entries, found {len(values)}", lineno, col)
        if len(rows) == header[0]:
            raise ParseError("more rows than announced in header", lineno, col)
        rows.append(values)
    if header is None:
        raise ParseError("missing header", 1)
    if len(rows) != header[0]:
        raise ParseError(f"expected {header[0]} rows, found {len(rows)}", len(text.splitlines()) or 1)
    return IntegerMatrix(rows, header[1])


def format_matrix(m, comments: Sequence[str] = ()) -> str:
    m = as_matrix(m)
    lines = [f"# {c}" for c in comments]
    lines.append(f"{m.nrows} {m.ncols}")
    lines.extend(" ".join(str(x) for x in r) for r in m.rows)
    return "\n".join(lines) + "\n"


def read_matrix_file(path) -> IntegerMatrix:
    with open(path, encoding="utf-8") as fh:
        return parse_matrix(fh.read())
