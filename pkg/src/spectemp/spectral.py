"""Centering, covariance and symmetric eigendecomposition of corpus embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from spectemp.errors import (
    ConfigError,
    DataError,
    DegenerateInputError,
    NumericalError,
    ShapeError,
)
from spectemp.matio import EmbeddingMatrix

# Relative size of a negative eigenvalue still accepted as rounding noise.
NEGATIVE_EIG_TOL = 1e-6
SYMMETRY_TOL = 1e-7
SOLVERS = ("lapack", "jacobi")


def as_array(x) -> np.ndarray:
    """Return the row matrix behind ``x`` (an EmbeddingMatrix or array-like)."""
    arr = np.asarray(x.data if isinstance(x, EmbeddingMatrix) else x)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class CovarianceSpectrum:
    mean: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    n_samples: int
    seed: int
    sample_cap: int

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def subsample(m, cap: int, seed: int):
    """Draw at most ``cap`` rows uniformly without replacement.

    Returns ``m`` itself when it already has ``cap`` rows or fewer; otherwise
    the selected rows keep their original relative order.
    """
    if cap < 1:
        raise ConfigError(f"sample cap must be >= 1, got {cap}")
    x = as_array(m)
    n = x.shape[0]
    if n <= cap:
        return m
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=cap, replace=False))
    picked = x[idx]
    if isinstance(m, EmbeddingMatrix):
        return EmbeddingMatrix(picked, label=m.label)
    return picked


def center(m) -> tuple[np.ndarray, np.ndarray]:
    x = as_array(m).astype(np.float64)
    if x.shape[0] < 1:
        raise DegenerateInputError("cannot center an empty matrix")
    mu = x.mean(axis=0)
    return x - mu, mu


def covariance(centered) -> np.ndarray:
    xc = as_array(centered).astype(np.float64, copy=False)
    n = xc.shape[0]
    if n < 2:
        raise DegenerateInputError(f"covariance needs at least 2 rows, got {n}")
    c = (xc.T @ xc) / (n - 1)
    return 0.5 * (c + c.T)


def _jacobi_eigh(c: np.ndarray, max_sweeps: int) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi rotations; returns unsorted (eigenvalues, eigenvectors)."""
    a = c.copy()
    d = a.shape[0]
    v = np.eye(d)
    scale = np.linalg.norm(a)
    if d == 1 or scale == 0.0:
        return np.diag(a).copy(), v
    target = 1e-15 * scale

    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2))
        if off <= target:
            return np.diag(a).copy(), v
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / abs(theta)
                else:
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0:
                    t = -t
                cs = 1.0 / np.sqrt(t * t + 1.0)
                sn = t * cs

                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = cs * col_p - sn * col_q
                a[:, q] = sn * col_p + cs * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = cs * row_p - sn * row_q
                a[q, :] = sn * row_p + cs * row_q
                a[p, q] = a[q, p] = 0.0

                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = cs * vp - sn * vq
                v[:, q] = sn * vp + cs * vq
    raise NumericalError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")


def canonicalize_signs(u: np.ndarray) -> np.ndarray:
    """Flip columns so each one's first non-negligible entry is positive."""
    u = u.copy()
    for j in range(u.shape[1]):
        col = u[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            u[:, j] = -col
    return u


def eigendecompose(
    c, solver: str = "lapack", max_sweeps: int = 100
) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending, clamped at 0) and sign-canonical eigenvectors.

    ``solver="lapack"`` calls ``numpy.linalg.eigh``; ``solver="jacobi"`` runs
    the cyclic Jacobi method in pure numpy and raises ``NumericalError`` if it
    has not converged after ``max_sweeps`` sweeps.
    """
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise DataError("matrix contains non-finite values")
    mag = max(1.0, float(np.max(np.abs(c)))) if c.size else 1.0
    if np.max(np.abs(c - c.T)) > SYMMETRY_TOL * mag:
        raise DataError("matrix is not symmetric")
    c = 0.5 * (c + c.T)

    if solver == "lapack":
        w, u = np.linalg.eigh(c)
    elif solver == "jacobi":
        w, u = _jacobi_eigh(c, max_sweeps)
    else:
        raise ConfigError(f"unknown solver {solver!r}; expected one of {SOLVERS}")

    order = np.argsort(-w, kind="stable")
    w = w[order]
    u = u[:, order]

    lam_max = max(float(w[0]), 0.0)
    if w[-1] < -NEGATIVE_EIG_TOL * lam_max:
        raise NumericalError(
            f"eigenvalue {w[-1]:.3g} is too negative for a covariance (max {lam_max:.3g})"
        )
    w = np.where(w < 0.0, 0.0, w)
    return w, canonicalize_signs(u)


def fit_spectrum(corpus, cap: int = 1_000_000, seed: int = 1999, solver: str = "lapack"):
    sample = as_array(subsample(corpus, cap, seed))
    if sample.shape[0] < 2:
        raise DegenerateInputError(f"need at least 2 rows to fit, got {sample.shape[0]}")
    centered, mu = center(sample)
    lam, u = eigendecompose(covariance(centered), solver=solver)
    return CovarianceSpectrum(
        mean=mu,
        eigenvalues=lam,
        eigenvectors=u,
        n_samples=sample.shape[0],
        seed=seed,
        sample_cap=cap,
    )
