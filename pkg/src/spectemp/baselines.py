"""Comparison compressors: truncation, random projection and fixed-gamma spectral maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from spectemp.errors import ConfigError
from spectemp.spectral import as_array
from spectemp.tempering import build_plan, l2_normalize_rows, transform

KINDS = (
    "prefix_truncate",
    "random_truncate",
    "random_project",
    "pca",
    "whitening",
    "fixed_gamma",
)
SPECTRAL_KINDS = ("pca", "whitening", "fixed_gamma")


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    k: int
    seed: int = 1999
    gamma: float = 0.5
    l2_normalize: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown baseline {self.kind!r}; expected one of {KINDS}")
        if self.k < 1:
            raise ConfigError(f"target dimension must be >= 1, got {self.k}")
        if not (0.0 <= self.gamma <= 1.0):
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")


def _check_k(k: int, d: int) -> None:
    if not (1 <= k <= d):
        raise ConfigError(f"target dimension {k} outside [1, {d}]")


def _finish(y: np.ndarray, l2_normalize: bool) -> np.ndarray:
    return l2_normalize_rows(y) if l2_normalize else y


def prefix_truncate(x, k: int, l2_normalize: bool = True) -> np.ndarray:
    x = as_array(x)
    _check_k(k, x.shape[1])
    return _finish(x[:, :k].astype(np.float64), l2_normalize)


def random_columns(d: int, k: int, seed: int) -> np.ndarray:
    """Sorted column subset that depends on (d, k, seed) only."""
    _check_k(k, d)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(d, size=k, replace=False))


def random_truncate(x, k: int, seed: int, l2_normalize: bool = True) -> np.ndarray:
    x = as_array(x)
    cols = random_columns(x.shape[1], k, seed)
    return _finish(x[:, cols].astype(np.float64), l2_normalize)


def gaussian_matrix(d: int, k: int, seed: int) -> np.ndarray:
    """d x k matrix of i.i.d. N(0, 1/k) entries."""
    _check_k(k, d)
    rng = np.random.default_rng(seed)
    return rng.standard_normal((d, k)) / np.sqrt(k)


def random_project(x, k: int, seed: int, l2_normalize: bool = True) -> np.ndarray:
    x = as_array(x)
    r = gaussian_matrix(x.shape[1], k, seed)
    return _finish(x.astype(np.float64) @ r, l2_normalize)


def pca_project(model, x, k: int, l2_normalize: bool = True) -> np.ndarray:
    return transform(build_plan(model, k, gamma=0.0, l2_normalize=l2_normalize), x)


def whiten(model, x, k: int, l2_normalize: bool = True) -> np.ndarray:
    return transform(build_plan(model, k, gamma=1.0, l2_normalize=l2_normalize), x)


def fixed_gamma(model, x, k: int, gamma: float = 0.5, l2_normalize: bool = True) -> np.ndarray:
    return transform(build_plan(model, k, gamma=gamma, l2_normalize=l2_normalize), x)


def apply_baseline(spec: BaselineSpec, x, model=None) -> np.ndarray:
    if spec.kind == "prefix_truncate":
        return prefix_truncate(x, spec.k, spec.l2_normalize)
    if spec.kind == "random_truncate":
        return random_truncate(x, spec.k, spec.seed, spec.l2_normalize)
    if spec.kind == "random_project":
        return random_project(x, spec.k, spec.seed, spec.l2_normalize)
    if model is None:
        raise ConfigError(f"baseline {spec.kind!r} needs a fitted model")
    if spec.kind == "pca":
        return pca_project(model, x, spec.k, spec.l2_normalize)
    if spec.kind == "whitening":
        return whiten(model, x, spec.k, spec.l2_normalize)
    return fixed_gamma(model, x, spec.k, spec.gamma, spec.l2_normalize)
