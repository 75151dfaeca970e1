"""Decomposability of integral matrices under GL(l, Z) column changes.

A bipartition R1 | R2 of the rows splits Q exactly when the saturated row
lattices of R1 and R2 meet trivially and their sum is pure in Z^l.  The
rational spans must already be independent, so only unions of connected
components of the row matroid over Q need to be tried.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

from .linalg import (
    IntegerMatrix,
    _det_rows,
    _rank_rows,
    as_matrix,
    det_exact,
    det_times_inverse,
    extend_to_basis,
    invariant_factors,
    is_pure,
    saturation,
)

MAX_COMPONENTS = 24


class UndecidedError(RuntimeError):
    """The bipartition search would exceed the configured cap."""


@dataclass(frozen=True)
class DecompositionCandidate:
    Q: IntegerMatrix

    @classmethod
    def of(cls, q) -> "DecompositionCandidate":
        return q if isinstance(q, cls) else cls(as_matrix(q))

    @cached_property
    def rank(self) -> int:
        return _rank_rows(self.Q.rows)

    @cached_property
    def invariant_factors(self) -> tuple[int, ...]:
        return invariant_factors(self.Q)

    @cached_property
    def zero_rows(self) -> tuple[int, ...]:
        return tuple(self.Q.zero_rows())


@dataclass(frozen=True)
class Cell:
    rows: tuple[int, ...]
    basis: IntegerMatrix  # rows: basis of the saturated span of the cell


@dataclass(frozen=True)
class BlockDecomposition:
    cells: tuple[Cell, ...]
    column_transform: IntegerMatrix | None
    source: IntegerMatrix

    def transformed(self) -> IntegerMatrix:
        """Q S, block diagonal after grouping rows by cell."""
        s = self.column_transform
        return self.source if s is None else self.source @ s

    def cell_matrices(self) -> list[IntegerMatrix]:
        """Each cell's rows written in the coordinates of its own basis (k_i x l_i)."""
        out = []
        qs = self.transformed()
        offset = 0
        for cell in self.cells:
            r = cell.basis.nrows
            out.append(IntegerMatrix([qs.rows[i][offset:offset + r] for i in cell.rows], r))
            offset += r
        return out


def _pivot_columns(rows: Sequence[Sequence[int]]) -> list[int]:
    a = [list(r) for r in rows]
    ncols = len(a[0])
    piv = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(a)) if a[i][c]), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        for i in range(r + 1, len(a)):
            f = a[i][c]
            if f:
                a[i] = [x * a[r][c] - f * y for x, y in zip(a[i], a[r])]
        piv.append(c)
        r += 1
        if r == len(a):
            break
    return piv


def rational_components(q) -> list[tuple[int, ...]]:
    """Connected components of the row matroid over Q (zero rows excluded)."""
    q = as_matrix(q)
    rows = q.rows
    basis: list[int] = []
    dependent: list[int] = []
    for i, r in enumerate(rows):
        if not any(r):
            continue
        if _rank_rows([rows[j] for j in basis] + [r]) > len(basis):
            basis.append(i)
        else:
            dependent.append(i)
    parent = {i: i for i in basis + dependent}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    if dependent:
        brows = [rows[j] for j in basis]
        piv = _pivot_columns(brows)
        bp = IntegerMatrix([[r[c] for c in piv] for r in brows], len(piv))
        adj = det_times_inverse(bp).rows
        r_ = len(piv)
        for i in dependent:
            xp = [rows[i][c] for c in piv]
            # coefficients of row i in the basis, up to the factor det(bp)
            coeff = [sum(xp[t] * adj[t][s] for t in range(r_)) for s in range(r_)]
            for s, c in enumerate(coeff):
                if c:
                    a, b = find(i), find(basis[s])
                    if a != b:
                        parent[max(a, b)] = min(a, b)
    comps: dict[int, list[int]] = {}
    for i in sorted(parent):
        comps.setdefault(find(i), []).append(i)
    return sorted((tuple(v) for v in comps.values()), key=lambda c: c[0])


def _check_no_zero_rows(q: IntegerMatrix):
    z = q.zero_rows()
    if z:
        raise ValueError(f"matrix has vanishing rows {z}")


def _stack(*mats: IntegerMatrix) -> IntegerMatrix:
    ncols = mats[0].ncols
    return IntegerMatrix([r for m in mats for r in m.rows], ncols)


def _split_test(q: IntegerMatrix, r1: Sequence[int], r2: Sequence[int]):
    s1 = saturation(q.submatrix(r1))
    s2 = saturation(q.submatrix(r2))
    stacked = _stack(s1, s2)
    if _rank_rows(stacked.rows) != stacked.nrows:
        return None
    if not is_pure(stacked):
        return None
    return s1, s2


def _witness(q: IntegerMatrix, cells: list[Cell]) -> BlockDecomposition:
    cells = sorted(cells, key=lambda c: c.rows[0])
    stacked = _stack(*(c.basis for c in cells))
    t = extend_to_basis(stacked)  # rows: new basis of Z^l
    d = det_exact(t)
    s = det_times_inverse(t).scale(d)  # T^-1, integral since |det T| = 1
    out = BlockDecomposition(tuple(cells), s, q)
    _assert_block_shape(out)
    return out


def _assert_block_shape(bd: BlockDecomposition):
    qs = bd.transformed()
    offset = 0
    for cell in bd.cells:
        r = cell.basis.nrows
        for i in cell.rows:
            row = qs.rows[i]
            assert not any(row[:offset]) and not any(row[offset + r:]), "witness is not block diagonal"
        offset += r


def _bipartition(q: IntegerMatrix):
    comps = rational_components(q)
    c = len(comps)
    if c < 2:
        return None
    if c > MAX_COMPONENTS:
        raise UndecidedError(f"{c} rational components exceed the bipartition cap {MAX_COMPONENTS}")
    for mask in range(0, 2 ** (c - 1) - 1):
        r1 = list(comps[0])
        r2 = []
        for b in range(1, c):
            (r1 if mask >> (b - 1) & 1 else r2).extend(comps[b])
        r1.sort()
        r2.sort()
        res = _split_test(q, r1, r2)
        if res is not None:
            return (tuple(r1), res[0]), (tuple(r2), res[1])
    return None


def is_decomposable(q) -> BlockDecomposition | None:
    """A two-or-more-cell block decomposition witness, or None if indecomposable.

    Row permutations are allowed: cells are arbitrary row subsets.
    """
    cand = DecompositionCandidate.of(q)
    qm = cand.Q
    _check_no_zero_rows(qm)
    split = _bipartition(qm)
    if split is None:
        return None
    (r1, b1), (r2, b2) = split
    return _witness(qm, [Cell(r1, b1), Cell(r2, b2)])


def _coordinates(rows: Sequence[Sequence[int]], basis: IntegerMatrix) -> IntegerMatrix:
    """Rows written in a basis of a pure lattice containing them."""
    t = extend_to_basis(basis)
    d = det_exact(t)
    tinv = det_times_inverse(t).scale(d)
    r = basis.nrows
    coords = IntegerMatrix(rows, basis.ncols) @ tinv
    for row in coords.rows:
        assert not any(row[r:])
    return IntegerMatrix([row[:r] for row in coords.rows], r)


def finest_decomposition(q) -> BlockDecomposition:
    """Split Q into the maximal number of indecomposable cells."""
    cand = DecompositionCandidate.of(q)
    qm = cand.Q
    _check_no_zero_rows(qm)
    rows_all = tuple(range(qm.nrows))
    todo = [Cell(rows_all, saturation(qm))]
    done: list[Cell] = []
    while todo:
        cell = todo.pop()
        local = _coordinates([qm.rows[i] for i in cell.rows], cell.basis)
        split = _bipartition(local)
        if split is None:
            done.append(cell)
            continue
        for sub_rows, sub_basis in split:
            glob_rows = tuple(cell.rows[i] for i in sub_rows)
            todo.append(Cell(glob_rows, sub_basis @ cell.basis))
    if len(done) == 1:
        return BlockDecomposition((Cell(rows_all, done[0].basis),), None, qm)
    return _witness(qm, done)


def is_indecomposable(q) -> bool:
    return is_decomposable(q) is None


def basic_set_transform(q, s) -> IntegerMatrix:
    """Q S for unimodular S."""
    q = as_matrix(q)
    s = as_matrix(s)
    if not s.is_square or abs(det_exact(s)) != 1:
        raise ValueError("basic set change needs a unimodular matrix")
    return q @ s


def min_column_support_ok(q) -> bool:
    """True iff no unimodular S gives Q S a column with a single nonzero entry."""
    q = as_matrix(q)
    k, l = q.shape
    if _rank_rows(q.rows) != l:
        raise ValueError("matrix must have full column rank")
    for i in range(k):
        if _rank_rows(q.rows[:i] + q.rows[i + 1:]) < l:
            return False
    return True


def exceptional_matrix() -> IntegerMatrix:
    """The 6x3 matrix with rows e1, e1, e2, e2, e3, e3."""
    return IntegerMatrix([[1, 0, 0], [1, 0, 0], [0, 1, 0], [0, 1, 0], [0, 0, 1], [0, 0, 1]], 3)


def is_exceptional(q) -> bool:
    """Whether Q equals the exceptional 6x3 matrix up to row order and GL(3, Z)."""
    q = as_matrix(q)
    if q.shape != (6, 3):
        return False
    counts: dict[tuple[int, ...], int] = {}
    for r in q.rows:
        counts[r] = counts.get(r, 0) + 1
    if sorted(counts.values()) != [2, 2, 2]:
        return False
    return abs(_det_rows(list(counts))) == 1
