from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from cartan_kb.linalg import (
    IntegerMatrix,
    ParseError,
    as_matrix,
    cauchy_binet_expansion,
    charpoly,
    det_exact,
    det_times_inverse,
    extend_to_basis,
    format_matrix,
    gram,
    inverse_rational,
    invariant_factors,
    is_positive_definite,
    is_psd,
    is_pure,
    parse_matrix,
    rank,
    saturation,
    scaled_inverse,
    smith_normal_form,
)
from tests.oracles import determinantal_divisors, fraction_rank, leibniz_det
from tests.strategies import int_matrices, unimodular


def test_matrix_basics():
    m = IntegerMatrix([[1, 2], [3, 4]])
    assert m.shape == (2, 2)
    assert m[1, 0] == 3
    assert m.T.tolist() == [[1, 3], [2, 4]]
    assert (m @ IntegerMatrix.identity(2)) == m
    assert (m + m) == m.scale(2)
    assert m.trace() == 5
    assert IntegerMatrix([[0, 0], [1, 0]]).zero_rows() == [0]
    with pytest.raises(Exception):
        m.rows = ()


def test_ragged_rows_rejected():
    with pytest.raises(ValueError):
        IntegerMatrix([[1, 2], [3]])


def test_det_examples():
    assert det_exact([[2, 1], [1, 2]]) == 3
    assert det_exact([[1, 2], [2, 4]]) == 0
    assert det_exact(IntegerMatrix.identity(4)) == 1
    with pytest.raises(ValueError):
        det_exact([[1, 2, 3]])


def test_det_large_entries_exact():
    big = 10**30
    m = [[big, 1], [1, big]]
    assert det_exact(m) == big * big - 1


@given(int_matrices(square=True))
def test_det_matches_leibniz(m):
    assert det_exact(m) == leibniz_det(m.rows)


@given(int_matrices(square=True, max_rows=3), st.data())
def test_det_multiplicative(a, data):
    b = data.draw(int_matrices(min_rows=a.nrows, max_rows=a.nrows, square=True))
    assert det_exact(a @ b) == det_exact(a) * det_exact(b)


@given(int_matrices(max_rows=5, max_cols=4))
def test_rank_matches_fractions(m):
    assert rank(m) == fraction_rank(m.rows)


def test_inverse_and_adjugate():
    c = IntegerMatrix([[2, 1], [1, 2]])
    assert inverse_rational(c) == [[Fraction(2, 3), Fraction(-1, 3)], [Fraction(-1, 3), Fraction(2, 3)]]
    assert det_times_inverse(c).tolist() == [[2, -1], [-1, 2]]
    assert scaled_inverse(c, 3) == det_times_inverse(c)
    with pytest.raises(ValueError):
        scaled_inverse(IntegerMatrix([[2, 0], [0, 2]]), 1)
    with pytest.raises(ValueError):
        det_times_inverse([[1, 2], [2, 4]])


@given(int_matrices(square=True, max_rows=4))
def test_adjugate_identity(m):
    adj = det_times_inverse(m) if det_exact(m) else None
    if adj is not None:
        assert m @ adj == IntegerMatrix.identity(m.nrows).scale(det_exact(m))


def test_gram_and_cauchy_binet():
    q = IntegerMatrix([[1, 0], [0, 1], [1, 1]])
    assert gram(q).tolist() == [[2, 1], [1, 2]]
    exp = cauchy_binet_expansion(q)
    assert sum(m * m for _, m in exp) == 3


@given(int_matrices(min_cols=1, max_cols=3, max_rows=5))
def test_cauchy_binet(q):
    if q.nrows < q.ncols:
        return
    assert det_exact(gram(q)) == sum(m * m for _, m in cauchy_binet_expansion(q))


def test_snf_examples():
    assert invariant_factors([[15, -5, 0], [-5, 10, 0], [0, 0, 5]]) == (5, 5, 25)
    assert invariant_factors([[2, 1], [1, 2]]) == (1, 3)
    assert invariant_factors([[0, 0], [0, 0]]) == ()
    assert invariant_factors([[1, 0], [0, 1], [1, 1]]) == (1, 1)


@given(int_matrices(max_rows=4, max_cols=4))
def test_snf_reconstruction(m):
    s = smith_normal_form(m)
    assert abs(det_exact(s.left_transform)) == 1
    assert abs(det_exact(s.right_transform)) == 1
    assert s.left_transform @ m @ s.right_transform == s.diagonal_matrix()
    f = s.invariant_factors
    assert all(x > 0 for x in f)
    assert all(f[i + 1] % f[i] == 0 for i in range(len(f) - 1))


@given(int_matrices(max_rows=3, max_cols=3, lo=-4, hi=4))
def test_snf_matches_determinantal_divisors(m):
    assert invariant_factors(m) == determinantal_divisors(m.rows)


@given(int_matrices(square=True, max_rows=3), st.data())
def test_snf_invariant_under_unimodular(m, data):
    u = data.draw(unimodular(m.nrows))
    v = data.draw(unimodular(m.ncols))
    assert invariant_factors(u @ m @ v) == invariant_factors(m)


def test_saturation_examples():
    assert is_pure(saturation([[2, 0], [0, 2]]))
    assert saturation([[2, 4]]).tolist() in ([[1, 2]], [[-1, -2]])
    assert not is_pure(IntegerMatrix([[2, 0]]))
    assert is_pure(IntegerMatrix([[1, 1, 0]]))
    with pytest.raises(ValueError):
        is_pure(IntegerMatrix([[1, 0], [2, 0]]))


@given(int_matrices(max_rows=4, max_cols=4))
def test_saturation_is_pure_and_contains_rows(m):
    if rank(m) == 0:
        return
    s = saturation(m)
    assert s.nrows == rank(m)
    assert is_pure(s)
    # every row of m lies in the rational span, hence in the saturation
    for r in m.rows:
        assert rank(IntegerMatrix(list(s.rows) + [r], m.ncols)) == s.nrows


@given(int_matrices(max_rows=3, max_cols=4))
def test_extend_to_basis(m):
    if rank(m) == 0:
        return
    s = saturation(m)
    t = extend_to_basis(s)
    assert t.shape == (m.ncols, m.ncols)
    assert abs(det_exact(t)) == 1
    assert t.rows[: s.nrows] == s.rows


def test_charpoly_and_psd():
    assert charpoly([[2, 1], [1, 2]]) == [3, -4, 1]
    assert is_psd([[1, 1], [1, 1]])
    assert not is_psd([[1, 2], [2, 1]])
    assert is_positive_definite([[2, 1], [1, 2]])
    assert not is_positive_definite([[1, 1], [1, 1]])


@given(int_matrices(max_rows=4, max_cols=3))
def test_gram_is_psd(q):
    assert is_psd(gram(q))


def test_parse_roundtrip():
    text = "# comment\n3 2\n1 0\n\n0 1  # trailing\n1 1\n"
    with pytest.raises(ParseError):
        parse_matrix(text)
    text = "# comment\n3 2\n1 0\n\n0 1\n1 1\n"
    m = parse_matrix(text)
    assert m.tolist() == [[1, 0], [0, 1], [1, 1]]
    assert parse_matrix(format_matrix(m, ["x"])) == m


@pytest.mark.parametrize(
    "text,line,column",
    [
        ("2 2\n1 x\n0 1\n", 2, 3),
        ("2 2\n1 0\n", 2, 1),
        ("2 2\n1 0 0\n0 1\n", 2, 1),
        ("", 1, 1),
        ("2\n", 1, 1),
    ],
)
def test_parse_errors(text, line, column):
    with pytest.raises(ParseError) as info:
        parse_matrix(text)
    assert (info.value.line, info.value.column) == (line, column)


def test_as_matrix_accepts_objects():
    class Holder:
        C = IntegerMatrix([[1]])

    assert as_matrix(Holder()) == IntegerMatrix([[1]])
