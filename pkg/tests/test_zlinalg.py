import itertools
from math import gcd

import numpy as np
import pytest
from hypothesis import given, strategies as st

from h3torus import zlinalg as zl
from h3torus.zlinalg import FgAbGroup


def det_bareiss(M):
    """Fraction-free determinant, independent of the library under test."""
    A = [list(map(int, r)) for r in M]
    n = len(A)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            for i in range(k + 1, n):
                if A[i][k]:
                    A[k], A[i] = A[i], A[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[-1][-1]


def minors_oracle(M):
    """Invariant factors from gcds of k x k minors: d_1...d_k = D_k."""
    M = np.asarray(M)
    r, c = M.shape
    D = [1]
    for k in range(1, min(r, c) + 1):
        g = 0
        for rows in itertools.combinations(range(r), k):
            for cols in itertools.combinations(range(c), k):
                g = gcd(g, det_bareiss(M[np.ix_(rows, cols)]))
        if g == 0:
            break
        D.append(g)
    return [D[k] // D[k - 1] for k in range(1, len(D))]


small_mats = st.integers(1, 4).flatmap(
    lambda r: st.integers(1, 4).flatmap(
        lambda c: st.lists(st.lists(st.integers(-9, 9), min_size=c, max_size=c), min_size=r, max_size=r)))


def test_snf_examples():
    assert list(zl.smith_normal_form([[1, 0], [0, 1]]).d) == [1, 1]
    assert list(zl.smith_normal_form([[2, 4], [6, 8]]).d) == [2, 4]
    assert list(zl.smith_normal_form([[0, 0], [0, 0]]).d) == [0, 0]


@given(small_mats)
def test_snf_transforms(M):
    M = np.array(M, dtype=np.int64)
    S = zl.smith_normal_form(M)
    D = zl.checked_matmul(zl.checked_matmul(S.left, M), S.right)
    diag = np.zeros_like(M)
    for k, d in enumerate(S.d):
        diag[k, k] = d
    assert np.array_equal(D, diag)
    assert abs(det_bareiss(S.left)) == 1 and abs(det_bareiss(S.right)) == 1
    assert np.array_equal(zl.checked_matmul(S.right, S.right_inverse), np.eye(M.shape[1], dtype=np.int64))
    nz = [d for d in S.d if d]
    assert all(nz[i + 1] % nz[i] == 0 for i in range(len(nz) - 1))
    assert nz == minors_oracle(M)


@given(small_mats)
def test_snf_reconstructs(M):
    M = np.array(M, dtype=np.int64)
    S = zl.smith_normal_form(M)
    diag = np.zeros_like(M)
    for k, d in enumerate(S.d):
        diag[k, k] = d
    Linv = np.array(zl.to_fmpz(S.left).inv().tolist(), dtype=object).astype(np.int64)
    back = zl.checked_matmul(zl.checked_matmul(Linv, diag), S.right_inverse)
    assert np.array_equal(back, M)


def test_big_entries_exact():
    M = [[2**70, 3], [5, 2**65 + 1]]
    S = zl.smith_normal_form(M)
    assert S.d[0] * S.d[1] == abs(2**70 * (2**65 + 1) - 15)


def test_kernel_examples():
    assert zl.kernel_basis([[2], [3]]).tolist() in ([[3, -2]], [[-3, 2]])
    assert zl.kernel_basis(np.eye(2, dtype=np.int64)).shape[0] == 0
    assert zl.kernel_basis(np.zeros((2, 2), dtype=np.int64)).shape[0] == 2


@given(small_mats)
def test_kernel_spans_and_saturated(M):
    M = np.array(M, dtype=np.int64)
    K = zl.kernel_basis(M)
    assert K.shape[0] == M.shape[0] - zl.rank(M)
    if K.shape[0]:
        assert not np.any(zl.checked_matmul(K, M))
        # saturated: Z^r / span K is torsion free
        assert zl.cokernel(K, M.shape[0]).torsion == ()


def test_cokernel_examples():
    assert zl.cokernel([[5]]) == FgAbGroup(0, (5,))
    assert zl.cokernel([[2, 0], [0, 3]]) == FgAbGroup(0, (6,))
    assert zl.cokernel(np.zeros((0, 3), dtype=np.int64), 3) == FgAbGroup(3)


@given(small_mats, st.integers(0, 10**6))
def test_cokernel_unimodular_invariance(M, seed):
    M = np.array(M, dtype=np.int64)
    rng = np.random.default_rng(seed)

    def unimodular(n):
        U = np.eye(n, dtype=np.int64)
        for _ in range(3):
            i, j = rng.choice(n, 2, replace=True)
            if i != j:
                U[i] += int(rng.integers(-2, 3)) * U[j]
        return U

    A = zl.cokernel(M, M.shape[1])
    U, V = unimodular(M.shape[0]), unimodular(M.shape[1])
    assert zl.cokernel(U @ M @ V, M.shape[1]) == A


def test_subquotient_examples():
    assert zl.subquotient([[1, 0], [0, 1]], [[2, 0], [0, 2]]) == FgAbGroup(0, (2, 2))
    assert zl.subquotient([[1, 2], [0, 3]], [[1, 2], [0, 3]]).is_trivial
    assert zl.subquotient([[1, 0]], np.zeros((0, 2), dtype=np.int64)) == FgAbGroup(1)
    with pytest.raises(ValueError):
        zl.subquotient([[2, 0]], [[1, 0]])


@given(st.lists(st.lists(st.integers(-6, 6), min_size=3, max_size=3), min_size=1, max_size=3),
       st.integers(0, 10**6))
def test_subquotient_oracle(num, seed):
    B = zl.hnf(np.array(num, dtype=np.int64))
    if B.shape[0] == 0:
        return
    rng = np.random.default_rng(seed)
    coeffs = rng.integers(-4, 5, size=(int(rng.integers(0, 4)), B.shape[0]))
    den = coeffs @ B
    got = zl.subquotient(B, den)
    # the same group from the coefficient relations directly
    assert got == zl.cokernel(coeffs, B.shape[0])


def test_p_primary_examples():
    assert zl.p_primary(FgAbGroup(0, (6,)), 3) == FgAbGroup(0, (3,))
    assert zl.p_primary(FgAbGroup(0, (4, 8)), 3).is_trivial
    assert zl.p_primary(FgAbGroup(0, (45,)), 3) == FgAbGroup(0, (9,))
    with pytest.raises(ValueError):
        zl.p_primary(FgAbGroup(0, (6,)), 9)


@given(st.lists(st.integers(1, 200), max_size=5), st.sampled_from([2, 3, 5, 7]))
def test_p_primary_reconstitutes(orders, p):
    A = FgAbGroup.from_cyclics(orders)
    assert zl.p_primary(A, p) + zl.prime_to_p(A, p) == FgAbGroup(0, A.torsion)


@given(small_mats, st.sampled_from([4, 6, 9, 12, 27]))
def test_torsion_and_mod_paths(M, n):
    M = np.array(M, dtype=np.int64)
    full = zl.cokernel(M, M.shape[1])
    # modulo n: Z^c / (rowspan M + n Z^c)
    expect = zl.cokernel(np.vstack([M, n * np.eye(M.shape[1], dtype=np.int64)]), M.shape[1])
    assert zl.cokernel_mod(M, n, M.shape[1]) == expect
    bound = full.torsion[-1] if full.torsion else 1
    assert zl.torsion_of_cokernel(zl.SparseMatrix.from_dense(M), bound * n) == FgAbGroup(0, full.torsion)


@given(small_mats)
def test_row_solver(M):
    M = np.array(M, dtype=np.int64)
    B = zl.hnf(M)
    if B.shape[0] == 0:
        return
    S = zl.RowBasisSolver(B)
    C = np.arange(B.shape[0] * 2).reshape(2, B.shape[0]) - 3
    assert np.array_equal(S.coords(C @ B), C)


def test_fgab_canonical():
    assert FgAbGroup.from_cyclics([2, 3]) == FgAbGroup.from_cyclics([6])
    assert FgAbGroup.from_cyclics([4, 2, 1, 0]) == FgAbGroup(1, (2, 4))
    assert str(FgAbGroup()) == "0"


sparse_mats = st.integers(1, 9).flatmap(lambda c: st.lists(
    st.lists(st.sampled_from([0, 0, 0, 0, 1, -1, 2, 3]), min_size=c, max_size=c), min_size=0, max_size=10))


@given(sparse_mats)
def test_sparse_kernel_matches_dense(M):
    M = np.array(M, dtype=np.int64).reshape(len(M), -1) if M else np.zeros((0, 3), dtype=np.int64)
    B, free = zl.sparse_right_kernel(zl.SparseMatrix.from_dense(M) if M.shape[0] else zl.SparseMatrix([], M.shape[1]))
    K = zl.right_kernel_basis(M) if M.shape[0] else np.eye(M.shape[1], dtype=np.int64)
    assert B.shape == K.shape
    if B.shape[0]:
        assert not np.any(M @ B.T)
        # same saturated lattice
        zl.RowBasisSolver(K).coords(B)
        zl.RowBasisSolver(B).coords(K)
        # unimodular on the free columns, hence of full rank modulo every prime
        assert zl.invariant_factors(B[:, free]) == (1,) * B.shape[0]


@given(st.sampled_from([(2, 1), (2, 3), (3, 2), (5, 1), (3, 4)]), st.integers(0, 10**6))
def test_local_howell_membership(pe, seed):
    p, e = pe
    q = p**e
    rng = np.random.default_rng(seed)
    X = (rng.integers(0, q, (rng.integers(0, 7), 5)) * rng.choice([1, p, p * p], (1, 5))) % q
    H, pivs = zl.local_howell(X, p, e)
    ref = zl.hnf_mod(X, q) if X.shape[0] else np.zeros((0, 5), dtype=np.int64)
    V = rng.integers(0, q, (20, 5))
    if X.shape[0]:
        V[:10] = (rng.integers(-4, 5, (10, X.shape[0])) @ X) % q
    got = zl.howell_contains(H, pivs, V, p, e)
    want = [zl.in_hnf_mod_span(ref, v, q) if ref.shape[0] else not np.any(v % q) for v in V]
    assert got.tolist() == want
    assert zl.cokernel_mod(X, q, 5) == zl.cokernel_mod(H, q, 5)


def test_local_span_tall():
    rng = np.random.default_rng(3)
    for p, e in [(2, 3), (3, 2)]:
        q = p**e
        X = (rng.integers(0, q, (400, 12)) * p) % q
        X[:, 0] = 0
        H, pivs = zl.local_span(X, p, e)
        assert zl.cokernel_mod(H, q, 12) == zl.cokernel_mod(X, q, 12)
        assert zl.howell_contains(H, pivs, X, p, e).all()


@given(st.sampled_from([(2, 3), (3, 2), (5, 1)]), st.integers(0, 10**6))
def test_inverse_mod_prime_power(pe, seed):
    p, e = pe
    q = p**e
    rng = np.random.default_rng(seed)
    A = rng.integers(-5, 6, (4, 4))
    if round(np.linalg.det(A)) % p == 0:
        with pytest.raises(ValueError):
            zl.inverse_mod_prime_power(A, p, e)
        return
    X = zl.inverse_mod_prime_power(A, p, e)
    assert np.array_equal((A @ X) % q, np.eye(4, dtype=np.int64))
