"""Cartan data, contribution matrices and the k(B) bounds built on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

from .linalg import (
    IntegerMatrix,
    _rank_rows,
    as_matrix,
    det_exact,
    gram,
    invariant_factors,
    is_positive_definite,
    is_psd,
    scaled_inverse,
)
from .qforms import find_isometry, minimum_nonzero

ISOMETRY_MAX_DIM = 6


class NotBlockLike(ValueError):
    """The matrix data cannot come from a p-block (wrong shape of elementary divisors)."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def prime_power(n: int) -> tuple[int, int] | None:
    """(p, d) with n = p^d, d >= 1, or None."""
    if n < 2:
        return None
    p = 2
    while p * p <= n and n % p:
        p += 1
    if n % p:
        p = n
    d = 0
    while n % p == 0:
        n //= p
        d += 1
    return (p, d) if n == 1 else None


def valuation(n: int, p: int) -> int | None:
    """p-adic valuation; None for n = 0."""
    if n == 0:
        return None
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def _is_power_of(n: int, p: int) -> bool:
    while n % p == 0:
        n //= p
    return n == 1


@dataclass(frozen=True)
class CartanData:
    C: IntegerMatrix
    p: int
    d: int
    invariant_factors: tuple[int, ...]
    unique_top: bool

    @classmethod
    def from_matrix(cls, c, p: int) -> "CartanData":
        c = as_matrix(c)
        if not is_prime(p):
            raise ValueError(f"{p} is not prime")
        if not is_positive_definite(c):
            raise NotBlockLike("Cartan matrix must be symmetric positive definite")
        f = invariant_factors(c)
        top = f[-1]
        if not _is_power_of(top, p):
            raise NotBlockLike(f"largest elementary divisor {top} is not a power of {p}: not block-like for p")
        d = valuation(top, p)
        unique = len(f) == 1 or f[-2] < top
        return cls(c, p, d, f, unique)

    @property
    def l(self) -> int:
        return self.C.nrows

    @property
    def pd(self) -> int:
        return self.p ** self.d

    @property
    def det(self) -> int:
        return det_exact(self.C)

    @property
    def smaller_divisors(self) -> tuple[int, ...]:
        """The elementary divisors p^e <= p^f <= ... below the top one."""
        return self.invariant_factors[:-1]

    @property
    def ctilde_integral(self) -> bool:
        return all(self.pd % x == 0 for x in self.invariant_factors)

    def ctilde(self) -> IntegerMatrix:
        """p^d C^-1."""
        return scaled_inverse(self.C, self.pd)


def cartan_from_decomposition(q, p: int) -> CartanData:
    q = as_matrix(q)
    if _rank_rows(q.rows) != q.ncols:
        raise NotBlockLike("decomposition matrix must have full column rank")
    return CartanData.from_matrix(gram(q), p)


@dataclass(frozen=True)
class ContributionMatrix:
    """p^d Q C^-1 Q^T together with p, d and l."""

    M: IntegerMatrix
    p: int
    d: int
    l: int

    @property
    def pd(self) -> int:
        return self.p ** self.d

    def identities(self) -> dict[str, bool]:
        m = self.M
        return {
            "symmetric": m.is_symmetric(),
            "idempotent": m @ m == m.scale(self.pd),
            "trace": m.trace() == self.pd * self.l,
            "rank": _rank_rows(m.rows) == self.l,
        }


def contribution_matrix(q, cartan: CartanData) -> ContributionMatrix:
    q = as_matrix(q)
    if gram(q) != cartan.C:
        raise ValueError("Q^T Q does not match the Cartan matrix")
    try:
        ct = cartan.ctilde()
    except ValueError as exc:
        raise ValueError(f"inconsistent (p, d): {exc}") from None
    m = q @ ct @ q.T
    return ContributionMatrix(m, cartan.p, cartan.d, cartan.l)


def diagonal_valuations(m: ContributionMatrix) -> tuple[int | None, ...]:
    return tuple(valuation(m.M.rows[i][i], m.p) for i in range(m.M.nrows))


def height_zero_flags(m: ContributionMatrix) -> tuple[bool, ...]:
    return tuple(m.M.rows[i][i] % m.p != 0 for i in range(m.M.nrows))


# ---------------------------------------------------------------------------
# bounds


@dataclass(frozen=True)
class MainBound:
    value: int  # floor((det C - 1) / l) + l
    exact: Fraction
    det: int
    l: int

    @property
    def chain_holds(self) -> bool:
        return self.value <= self.det


def bound_main(c, l: int | None = None) -> MainBound:
    c = as_matrix(c)
    if l is None:
        l = c.nrows
    if l != c.nrows:
        raise ValueError("l must be the size of C")
    dc = det_exact(c)
    out = MainBound((dc - 1) // l + l, Fraction(dc - 1, l) + l, dc, l)
    if l < dc:
        assert out.chain_holds
    return out


def bound_brandt_partition(c, partition: Sequence[Iterable[int]]) -> int:
    """1 - r + sum_i min(det C_Si, floor((det C_Si + 1) / |Si|) + |Si|); indices are 0-based."""
    c = as_matrix(c)
    cells = [sorted(set(s)) for s in partition]
    seen = sorted(i for s in cells for i in s)
    if any(not s for s in cells) or seen != list(range(c.nrows)):
        raise ValueError("not a partition of the index set")
    total = 1 - len(cells)
    for s in cells:
        ds = det_exact(c.submatrix(s, s))
        total += min(ds, (ds + 1) // len(s) + len(s))
    return total


def trace_bound(c) -> int:
    c = as_matrix(c)
    return c.trace() - c.nrows + 1


def block_diagonal(blocks: Sequence[IntegerMatrix]) -> IntegerMatrix:
    n = sum(as_matrix(b).nrows for b in blocks)
    out = [[0] * n for _ in range(n)]
    off = 0
    for b in blocks:
        b = as_matrix(b)
        for i, r in enumerate(b.rows):
            out[off + i][off:off + b.ncols] = list(r)
        off += b.nrows
    return IntegerMatrix(out, n)


def k0_bound(blocks: Sequence, designated: int, p: int) -> int:
    """Height-zero bound floor((det C1 - 1) / l1) + l1 for C = diag(blocks)."""
    blocks = [as_matrix(b) for b in blocks]
    top = invariant_factors(block_diagonal(blocks))[-1]
    if not _is_power_of(top, p):
        raise NotBlockLike(f"largest elementary divisor {top} is not a power of {p}")
    c1 = blocks[designated]
    if invariant_factors(c1)[-1] != top:
        raise ValueError("designated block does not carry the largest elementary divisor")
    for i, b in enumerate(blocks):
        if i != designated and invariant_factors(b)[-1] >= top:
            raise ValueError(f"block {i} has an elementary divisor >= {top}")
    return bound_main(c1).value


def ones_plus_identity(l: int, m: int) -> IntegerMatrix:
    """m J + I."""
    return IntegerMatrix([[m + (i == j) for j in range(l)] for i in range(l)], l)


@dataclass
class EqualityVerdict:
    k: int
    bound: int
    equality: bool
    m: int | None = None
    congruent_to_mJ_plus_I: bool | None = None
    divisors_ok: bool | None = None
    heights_zero: bool | None = None
    witness: IntegerMatrix | None = field(default=None, repr=False)

    @property
    def all_hold(self) -> bool:
        return bool(self.congruent_to_mJ_plus_I and self.divisors_ok and self.heights_zero)


def equality_shape_check(q, cartan: CartanData | None = None) -> EqualityVerdict:
    """When k equals (det C - 1)/l + l exactly, test C ~ mJ + I, divisors (1,...,1,det C) and heights.

    The equality case uses the rational bound, so (det C - 1) must be
    divisible by l; a k matching only the floored bound is not an equality case.

    Without ``cartan`` the contribution matrix is scaled by det C and a row
    has height zero when its diagonal entry is coprime to det C.
    """
    q = as_matrix(q)
    c = gram(q)
    k, l = q.shape
    mb = bound_main(c)
    v = EqualityVerdict(k, mb.value, k == mb.exact)
    if not v.equality:
        return v
    dc = mb.det
    v.m = (dc - 1) // l
    if l <= ISOMETRY_MAX_DIM:
        v.witness = find_isometry(c, ones_plus_identity(l, v.m))
        v.congruent_to_mJ_plus_I = v.witness is not None
    v.divisors_ok = invariant_factors(c) == (1,) * (l - 1) + (dc,)
    if cartan is not None:
        v.heights_zero = all(height_zero_flags(contribution_matrix(q, cartan)))
    else:
        m = q @ scaled_inverse(c, dc) @ q.T
        v.heights_zero = all(gcd(m.rows[i][i], dc) == 1 for i in range(k))
    return v


@dataclass(frozen=True)
class MajorSubsectionVerdict:
    holds: bool
    reduced_det: int
    adjugate_min: int | None
    l: int

    def __bool__(self):
        return self.holds


def majorsub_criterion(c, p: int, r: int, d: int) -> MajorSubsectionVerdict:
    """det(p^-r C) == p^(d-r); when it holds also report min det(C') x C'^-1 x^T for C' = p^-r C."""
    c = as_matrix(c)
    pr = p ** r
    if any(x % pr for row in c.rows for x in row):
        raise ValueError(f"entries of C are not divisible by {p}^{r}")
    cbar = IntegerMatrix([[x // pr for x in row] for row in c.rows], c.ncols)
    dbar = det_exact(cbar)
    holds = dbar == p ** (d - r)
    amin = None
    if holds:
        amin = minimum_nonzero(scaled_inverse(cbar, dbar))[0]
    return MajorSubsectionVerdict(holds, dbar, amin, c.nrows)


def pure_row_count(q, subset: Iterable[int]) -> int:
    """Number of rows supported inside the (0-based) coordinate subset."""
    q = as_matrix(q)
    s = set(subset)
    if not s or not s < set(range(q.ncols)):
        raise ValueError("subset must be nonempty and proper")
    return sum(1 for r in q.rows if all(x == 0 for j, x in enumerate(r) if j not in s))


def plesken_psd_test(q, ctilde, p: int, d: int) -> bool:
    """Whether p^d I - Q Ctilde Q^T is positive semidefinite (exact)."""
    q = as_matrix(q)
    ct = as_matrix(ctilde)
    m = q @ ct @ q.T
    pd = p ** d
    k = q.nrows
    return is_psd(IntegerMatrix([[(pd if i == j else 0) - m.rows[i][j] for j in range(k)] for i in range(k)], k))
