import numpy as np
import pytest
import scipy.io
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from wcgmres.matgen import (MatrixFormatError, ParameterError, TohParams, block_diag_double,
                            format_matrix, gen_alternating_bidiagonal, gen_block_coupled,
                            gen_jordan, gen_toh, read_matrix, read_vector, toh_flip_matrix,
                            write_matrix, write_vector)


def test_toh_entries():
    A = gen_toh(omega=1.0, epsilon=0.1)
    expected = np.array([[1, 0.1, 0, 0],
                         [0, -1, 10, 0],
                         [0, 0, 1, 0.1],
                         [0, 0, 0, -1]])
    assert_allclose(A, expected, rtol=0, atol=0)
    assert_array_equal(gen_toh(TohParams(1.0, 0.1)), A)


@pytest.mark.parametrize("omega,eps", [(2.0, 0.1), (0.0, 0.1), (-1.0, 0.1), (1.0, 0.0), (1.0, -0.5)])
def test_toh_rejects_boundary(omega, eps):
    with pytest.raises(ParameterError):
        gen_toh(omega=omega, epsilon=eps)


@pytest.mark.parametrize("omega", [0.3, 1.0, 1.9])
@pytest.mark.parametrize("eps", [0.05, 0.1, 2.0])
def test_toh_structure(omega, eps):
    A = gen_toh(omega=omega, epsilon=eps)
    Q = toh_flip_matrix()
    assert_allclose(-Q @ A.T @ Q.T, A, rtol=0, atol=1e-15)
    # A^2 = I + omega (e_1 e_3^T + e_2 e_4^T)
    B = np.eye(4)
    B[0, 2] = B[1, 3] = omega
    assert_allclose(A @ A, B, atol=1e-14)
    assert abs(abs(np.linalg.det(A)) - 1) < 1e-12


def test_alt_bidiag_n4_is_toh():
    for eps in (0.1, 0.7):
        assert_array_equal(gen_alternating_bidiagonal(4, eps), gen_toh(omega=1.0, epsilon=eps))


def test_alt_bidiag_pattern():
    A = gen_alternating_bidiagonal(6, 0.2)
    assert_allclose(np.diag(A), [1, -1, 1, -1, 1, -1])
    assert_allclose(np.diag(A, 1), [0.2, 5, 0.2, 5, 0.2])
    assert np.count_nonzero(np.triu(A, 2)) == 0 and np.count_nonzero(np.tril(A, -1)) == 0


def test_jordan():
    J = gen_jordan(5, 2.0)
    assert_allclose(J, 2 * np.eye(5) + np.eye(5, k=1))
    assert_allclose(gen_jordan(3, 1.0, 0.5), np.eye(3) + 0.5 * np.eye(3, k=1))
    with pytest.raises(ParameterError):
        gen_jordan(0, 1.0)


def test_block_coupled():
    A = gen_block_coupled(4, 4.0, 0.1)
    assert A.shape == (8, 8)
    assert A[3, 4] == pytest.approx(40.0)
    assert_allclose(A[:4, :4], gen_jordan(4, 1.0, 0.1))
    assert_allclose(A[4:, 4:], gen_jordan(4, -1.0, 0.1))
    assert np.count_nonzero(A[:4, 4:]) == 1
    assert np.linalg.svd(A, compute_uv=False)[-1] > 0
    with pytest.raises(ParameterError):
        gen_block_coupled(1, 1.0, 0.1)


def test_block_diag_double():
    A = np.arange(4.0).reshape(2, 2)
    B = block_diag_double(A)
    assert_array_equal(B[:2, :2], A)
    assert_array_equal(B[2:, 2:], A)
    assert not B[:2, 2:].any() and not B[2:, :2].any()


@pytest.mark.parametrize("fmt", ["array", "coordinate"])
def test_roundtrip_exact(tmp_path, fmt):
    rng = np.random.default_rng(3)
    A = rng.standard_normal((5, 5)) * 10.0 ** rng.integers(-8, 8, (5, 5))
    A[1, 2] = 0.0
    p = tmp_path / "a.mtx"
    write_matrix(A, p, fmt=fmt)
    assert_array_equal(read_matrix(p), A)


def test_roundtrip_complex(tmp_path):
    rng = np.random.default_rng(4)
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    write_matrix(A, tmp_path / "c.mtx")
    assert_array_equal(read_matrix(tmp_path / "c.mtx"), A)


@pytest.mark.parametrize("fmt", ["array", "coordinate"])
def test_scipy_interop(tmp_path, fmt):
    A = gen_toh(omega=1.3, epsilon=0.2)
    write_matrix(A, tmp_path / "ours.mtx", fmt=fmt)
    theirs = scipy.io.mmread(str(tmp_path / "ours.mtx"))
    theirs = theirs.toarray() if hasattr(theirs, "toarray") else theirs
    assert_array_equal(theirs, A)
    scipy.io.mmwrite(str(tmp_path / "theirs.mtx"), A)
    assert_array_equal(read_matrix(tmp_path / "theirs.mtx"), A)


def test_vector_roundtrip(tmp_path):
    v = np.array([0.1, -2.5, 3e-17])
    write_vector(v, tmp_path / "v.mtx")
    assert_array_equal(read_vector(tmp_path / "v.mtx"), v)


def _write(tmp_path, text):
    p = tmp_path / "bad.mtx"
    p.write_text(text)
    return p


def test_parse_error_has_line_number(tmp_path):
    p = _write(tmp_path, "%%MatrixMarket matrix array real general\n2 2\n1\n2\nx\n4\n")
    with pytest.raises(MatrixFormatError) as exc:
        read_matrix(p)
    assert exc.value.lineno == 5


def test_coordinate_entry_count(tmp_path):
    p = _write(tmp_path, "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.0\n2 2 1.0\n")
    with pytest.raises(MatrixFormatError, match="declares 3"):
        read_matrix(p)


@pytest.mark.parametrize("text", [
    "",
    "not a header\n",
    "%%MatrixMarket matrix array real general\n2 3\n" + "1\n" * 6,
    "%%MatrixMarket matrix array real symmetric\n1 1\n1\n",
    "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n",
])
def test_rejects_bad_files(tmp_path, text):
    with pytest.raises(MatrixFormatError):
        read_matrix(_write(tmp_path, text))


def test_format_matches_file(tmp_path):
    A = gen_jordan(3, 1.0)
    write_matrix(A, tmp_path / "j.mtx")
    assert (tmp_path / "j.mtx").read_text() == format_matrix(A)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.sampled_from(["array", "coordinate"]))
def test_roundtrip_property(tmp_path_factory, n, seed, fmt):
    A = np.random.default_rng(seed).standard_normal((n, n))
    p = tmp_path_factory.mktemp("rt") / "m.mtx"
    write_matrix(A, p, fmt=fmt)
    assert_array_equal(read_matrix(p), A)
