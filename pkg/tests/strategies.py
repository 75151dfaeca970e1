from hypothesis import strategies as st

from cartan_kb.linalg import IntegerMatrix


def int_matrices(min_rows=1, max_rows=4, min_cols=1, max_cols=4, lo=-6, hi=6, square=False):
    @st.composite
    def build(draw):
        m = draw(st.integers(min_rows, max_rows))
        n = m if square else draw(st.integers(min_cols, max_cols))
        rows = draw(st.lists(st.lists(st.integers(lo, hi), min_size=n, max_size=n), min_size=m, max_size=m))
        return IntegerMatrix(rows, n)

    return build()


@st.composite
def unimodular(draw, n, steps=6):
    """Product of random elementary operations and sign changes."""
    rows = [[int(i == j) for j in range(n)] for i in range(n)]
    for _ in range(draw(st.integers(0, steps))):
        kind = draw(st.integers(0, 2))
        i = draw(st.integers(0, n - 1))
        j = draw(st.integers(0, n - 1))
        if kind == 0 and i != j:
            f = draw(st.integers(-3, 3))
            rows[i] = [a + f * b for a, b in zip(rows[i], rows[j])]
        elif kind == 1:
            rows[i], rows[j] = rows[j], rows[i]
        else:
            rows[i] = [-a for a in rows[i]]
    return IntegerMatrix(rows, n)


@st.composite
def pd_forms(draw, n, lo=-3, hi=3):
    """Q^T Q + I for random Q: positive definite."""
    k = draw(st.integers(n, n + 2))
    rows = draw(st.lists(st.lists(st.integers(lo, hi), min_size=n, max_size=n), min_size=k, max_size=k))
    q = IntegerMatrix(rows, n)
    return q.T @ q + IntegerMatrix.identity(n)


@st.composite
def nonneg_matrices(draw, max_k=6, max_l=3, hi=2):
    l = draw(st.integers(1, max_l))
    k = draw(st.integers(1, max_k))
    rows = draw(
        st.lists(
            st.lists(st.integers(0, hi), min_size=l, max_size=l).filter(any),
            min_size=k,
            max_size=k,
        )
    )
    return IntegerMatrix(rows, l)
