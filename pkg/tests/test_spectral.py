import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectemp.errors import ConfigError, DataError, DegenerateInputError, ShapeError
from spectemp.matio import EmbeddingMatrix
from spectemp.spectral import (
    canonicalize_signs,
    center,
    covariance,
    eigendecompose,
    fit_spectrum,
    subsample,
)
from spectemp.evalhar.synthetic import random_rotation


def random_psd(rng, d, rank=None):
    a = rng.standard_normal((d, rank or d))
    return a @ a.T


def check_decomposition(c, lam, u):
    d = c.shape[0]
    assert np.max(np.abs(u.T @ u - np.eye(d))) <= 1e-6
    assert np.max(np.abs((u * lam) @ u.T - c)) <= 1e-6 * max(1.0, lam[0])
    assert np.all(np.diff(lam) <= 0) and lam[-1] >= 0
    assert abs(lam.sum() - np.trace(c)) <= 1e-6 * max(abs(np.trace(c)), 1e-300)


class TestSubsample:
    def test_small_corpus_unchanged(self, rng):
        m = EmbeddingMatrix(rng.standard_normal((5, 3)))
        assert subsample(m, 10, 7) is m

    def test_distinct_rows(self, rng):
        x = rng.standard_normal((5, 3)).astype(np.float32)
        out = subsample(EmbeddingMatrix(x), 3, 7).data
        assert out.shape == (3, 3)
        idx = [int(np.flatnonzero((x == r).all(axis=1))[0]) for r in out]
        assert len(set(idx)) == 3

    def test_deterministic(self, rng):
        x = rng.standard_normal((50, 3))
        np.testing.assert_array_equal(subsample(x, 10, 7), subsample(x, 10, 7))

    def test_cap_zero(self):
        with pytest.raises(ConfigError):
            subsample(np.ones((3, 2)), 0, 1)


class TestCenter:
    def test_one_dim(self):
        xc, mu = center(np.array([[1.0], [3.0]]))
        np.testing.assert_array_equal(mu, [2.0])
        np.testing.assert_array_equal(xc, [[-1.0], [1.0]])

    def test_single_row(self):
        xc, mu = center(np.array([[4.0, -2.0]]))
        np.testing.assert_array_equal(mu, [4.0, -2.0])
        np.testing.assert_array_equal(xc, [[0.0, 0.0]])

    def test_two_dim(self):
        xc, mu = center(np.array([[1.0, 0.0], [0.0, 1.0]]))
        np.testing.assert_array_equal(mu, [0.5, 0.5])
        np.testing.assert_array_equal(xc, [[0.5, -0.5], [-0.5, 0.5]])

    def test_column_sums(self, rng):
        x = rng.standard_normal((1000, 8)) * 100 + 5
        xc, _ = center(x)
        assert np.all(np.abs(xc.sum(axis=0)) <= 1e-4 * 1000)


class TestCovariance:
    def test_examples(self):
        np.testing.assert_array_equal(covariance(np.array([[-1.0], [1.0]])), [[2.0]])
        c = covariance(np.array([[0.5, -0.5], [-0.5, 0.5]]))
        np.testing.assert_array_equal(c, [[0.5, -0.5], [-0.5, 0.5]])

    def test_single_row(self):
        with pytest.raises(DegenerateInputError):
            covariance(np.zeros((1, 3)))

    def test_symmetric_float64(self, rng):
        c = covariance(center(rng.standard_normal((100, 6)).astype(np.float32))[0])
        assert c.dtype == np.float64
        np.testing.assert_array_equal(c, c.T)


def charpoly_2x2(c):
    # roots of t^2 - tr t + det, computed without any eigen routine
    tr, det = c[0, 0] + c[1, 1], c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0]
    disc = np.sqrt(tr * tr - 4 * det)
    return np.array([(tr + disc) / 2, (tr - disc) / 2])


@pytest.mark.parametrize("solver", ["lapack", "jacobi"])
class TestEigendecompose:
    def test_diagonal(self, solver):
        lam, u = eigendecompose(np.diag([1.0, 3.0]), solver=solver)
        np.testing.assert_allclose(lam, [3.0, 1.0])
        np.testing.assert_allclose(np.abs(u), [[0, 1], [1, 0]], atol=1e-12)

    def test_two_by_two(self, solver):
        c = np.array([[2.0, 1.0], [1.0, 2.0]])
        lam, u = eigendecompose(c, solver=solver)
        np.testing.assert_allclose(lam, charpoly_2x2(c), rtol=1e-12)
        np.testing.assert_allclose(lam, [3.0, 1.0], rtol=1e-12)
        s = 1 / np.sqrt(2)
        np.testing.assert_allclose(np.abs(u[:, 0]), [s, s], atol=1e-12)
        np.testing.assert_allclose(np.abs(u[:, 1]), [s, s], atol=1e-12)
        assert u[0, 1] * u[1, 1] < 0

    def test_zero_matrix(self, solver):
        lam, u = eigendecompose(np.zeros((3, 3)), solver=solver)
        np.testing.assert_array_equal(lam, 0.0)
        np.testing.assert_allclose(u.T @ u, np.eye(3), atol=1e-12)

    def test_random_psd(self, solver, rng):
        for d in (1, 2, 5, 17, 40):
            c = random_psd(rng, d)
            check_decomposition(c, *eigendecompose(c, solver=solver))

    def test_rank_deficient(self, solver, rng):
        c = random_psd(rng, 12, rank=3)
        lam, u = eigendecompose(c, solver=solver)
        check_decomposition(c, lam, u)
        assert np.all(lam[3:] <= 1e-9 * lam[0])

    def test_sign_convention(self, solver, rng):
        _, u = eigendecompose(random_psd(rng, 6), solver=solver)
        for j in range(6):
            first = u[np.flatnonzero(np.abs(u[:, j]) > 1e-12)[0], j]
            assert first > 0


def test_solvers_agree(rng):
    for d in (3, 10, 30):
        c = random_psd(rng, d)
        lam_l, u_l = eigendecompose(c, "lapack")
        lam_j, u_j = eigendecompose(c, "jacobi")
        np.testing.assert_allclose(lam_j, lam_l, rtol=1e-9, atol=1e-9 * lam_l[0])
        np.testing.assert_allclose(u_j, u_l, atol=1e-6)


def test_negative_eigenvalue_rejected():
    from spectemp.errors import NumericalError

    with pytest.raises(NumericalError):
        eigendecompose(np.diag([1.0, -0.5]))


def test_tiny_negative_clamped():
    lam, _ = eigendecompose(np.diag([1.0, -1e-9]))
    assert lam[1] == 0.0


@pytest.mark.parametrize(
    "c, err",
    [(np.ones((2, 3)), ShapeError), (np.array([[1.0, 0.5], [0.0, 1.0]]), DataError),
     (np.array([[np.nan, 0], [0, 1.0]]), DataError)],
)
def test_bad_input(c, err):
    with pytest.raises(err):
        eigendecompose(c)


def test_unknown_solver():
    with pytest.raises(ConfigError):
        eigendecompose(np.eye(2), solver="qr")


def test_canonicalize_skips_tiny_entries():
    u = np.array([[1e-14, 0.0], [-1.0, 1.0]])
    out = canonicalize_signs(u.copy())
    assert out[1, 0] == 1.0


class TestFitSpectrum:
    def test_rank_one(self):
        x = np.array([[1.0, 2.0], [3.0, -1.0]] * 4)
        s = fit_spectrum(x)
        assert s.eigenvalues[0] > 0 and s.eigenvalues[1] <= 1e-12 * s.eigenvalues[0]

    def test_monte_carlo_diag(self):
        for seed in (1, 2, 3):
            x = np.random.default_rng(seed).standard_normal((50_000, 2)) * [2.0, 1.0]
            lam = fit_spectrum(x).eigenvalues
            np.testing.assert_allclose(lam, [4.0, 1.0], rtol=0.05)

    def test_cap(self, rng):
        s = fit_spectrum(rng.standard_normal((100, 3)), cap=2, seed=3)
        assert s.n_samples == 2 and s.sample_cap == 2 and s.seed == 3

    def test_invariants(self, rng):
        x = rng.standard_normal((300, 10)) * np.linspace(5, 0.1, 10)
        s = fit_spectrum(x)
        check_decomposition(covariance(center(x)[0]), s.eigenvalues, s.eigenvectors)

    def test_rotation_equivariance(self, rng):
        x = rng.standard_normal((400, 12)) * np.linspace(3, 0.5, 12)
        q = random_rotation(rng, 12)
        a, b = fit_spectrum(x), fit_spectrum(x @ q)
        np.testing.assert_allclose(b.eigenvalues, a.eigenvalues, rtol=1e-6)
        # eigenvectors rotate by Q^T, up to sign
        dots = np.abs(np.sum((q.T @ a.eigenvectors) * b.eigenvectors, axis=0))
        np.testing.assert_allclose(dots, 1.0, atol=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 20), st.integers(0, 2**32 - 1))
def test_trace_preserved(d, seed):
    c = random_psd(np.random.default_rng(seed), d)
    lam, _ = eigendecompose(c)
    assert abs(lam.sum() - np.trace(c)) <= 1e-6 * np.trace(c)
