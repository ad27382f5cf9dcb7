"""SNR-guided spectral tempering.

A fitted :class:`SpectralModel` holds the corpus mean, the covariance
eigenpairs and the SNR statistics derived from them. For a target
dimensionality ``k`` the model yields an exponent ``gamma(k)`` in [0, 1],
and :func:`build_plan` turns that into a d x k projection whose column j is
``u_j * lambda_j ** (-gamma / 2)``. ``gamma = 0`` is plain PCA and
``gamma = 1`` is full whitening.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from spectemp.errors import ConfigError, DegenerateInputError, ShapeError
from spectemp.spectral import CovarianceSpectrum, as_array, fit_spectrum

DEFAULT_TAIL_FRACTION = 0.10
KNEE_SENSITIVITY = 1.0
REF_SNR_EPS = 1e-12
EIG_FLOOR_REL = 1e-12
EIG_FLOOR_ABS = 1e-30


def tail_size(d: int, tail_fraction: float) -> int:
    # round() first so that e.g. 0.1 * 30 = 3.0000000000000004 does not ceil to 4
    return max(1, min(d, math.ceil(round(tail_fraction * d, 9))))


def check_tail_fraction(tail_fraction: float) -> None:
    if not (0.0 < tail_fraction < 1.0) or math.isnan(tail_fraction):
        raise ConfigError(f"tail fraction must lie in (0, 1), got {tail_fraction}")


def noise_floor(eigenvalues, tail_fraction: float = DEFAULT_TAIL_FRACTION) -> float:
    """Mean of the trailing ``ceil(tail_fraction * d)`` eigenvalues."""
    check_tail_fraction(tail_fraction)
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if lam.ndim != 1 or lam.size < 2:
        raise ConfigError(f"noise floor needs at least 2 eigenvalues, got {lam.size}")
    return float(lam[-tail_size(lam.size, tail_fraction) :].mean())


def snr_profile(eigenvalues, floor: float) -> np.ndarray:
    """Excess of each eigenvalue over the noise floor, relative to the floor.

    A zero floor (exactly rank-deficient tail) has no finite SNR; positive
    eigenvalues then get ``lambda_i / smallest_positive_lambda`` instead, which
    keeps the ratios gamma is computed from.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if floor < 0:
        raise ConfigError(f"noise floor must be non-negative, got {floor}")
    big = np.finfo(np.float64).max
    if floor > 0:
        with np.errstate(over="ignore"):
            return np.clip((lam - floor) / floor, 0.0, big)
    positive = lam > 0
    if not positive.any():
        return np.zeros_like(lam)
    smallest = lam[positive].min()
    with np.errstate(over="ignore"):
        ratio = np.minimum(lam / smallest, big)
    return np.where(positive, ratio, 0.0)


def detect_knee(snr, sensitivity: float = KNEE_SENSITIVITY) -> int:
    """Kneedle on a decreasing convex SNR curve; returns a 1-based rank.

    Only the leading run of positive SNR values is considered. If no local
    maximum of the difference curve is confirmed by a later drop below its
    threshold, the global maximum of the difference curve is returned.
    """
    s = np.asarray(snr, dtype=np.float64)
    nonpos = np.flatnonzero(~(s > 0))
    m = int(nonpos[0]) if nonpos.size else s.size
    if m < 3:
        raise DegenerateInputError(f"knee detection needs 3 positive SNR values, got {m}")
    s = s[:m]
    span = s.max() - s.min()
    if span <= 0:
        return m

    x = np.linspace(0.0, 1.0, m)
    y = 1.0 - (s - s.min()) / span
    diff = y - x

    maxima = [
        i for i in range(1, m - 1) if diff[i] > diff[i - 1] and diff[i] >= diff[i + 1]
    ]
    step = sensitivity * float(np.mean(np.diff(x)))
    for pos, i in enumerate(maxima):
        threshold = diff[i] - step
        stop = maxima[pos + 1] if pos + 1 < len(maxima) else m
        if np.any(diff[i + 1 : stop] < threshold):
            return i + 1
    return int(np.argmax(diff)) + 1


def derive_gamma(snr, knee_index: int, k: int) -> float:
    s = np.asarray(snr, dtype=np.float64)
    if not (1 <= k <= s.size):
        raise ConfigError(f"target dimension {k} outside [1, {s.size}]")
    ref = float(s[knee_index - 1])
    if ref <= REF_SNR_EPS:
        return 0.0
    return float(min(1.0, s[k - 1] / ref))


@dataclass(frozen=True, eq=False)
class SpectralModel:
    mean: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    n_samples: int
    sample_cap: int
    seed: int
    tail_fraction: float
    noise_floor: float
    snr: np.ndarray
    knee_index: int
    ref_snr: float

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def gamma(self, k: int) -> float:
        return derive_gamma(self.snr, self.knee_index, k)

    @classmethod
    def from_spectrum(cls, spectrum: CovarianceSpectrum, tail_fraction=DEFAULT_TAIL_FRACTION):
        lam = spectrum.eigenvalues
        floor = noise_floor(lam, tail_fraction)
        snr = snr_profile(lam, floor)
        try:
            knee = detect_knee(snr)
        except DegenerateInputError:
            # Anchor at the last rank. Its SNR is 0 whenever the floor is
            # positive, which makes gamma == 0 (plain PCA) at every k.
            knee = lam.size
        return cls(
            mean=spectrum.mean,
            eigenvalues=lam,
            eigenvectors=spectrum.eigenvectors,
            n_samples=spectrum.n_samples,
            sample_cap=spectrum.sample_cap,
            seed=spectrum.seed,
            tail_fraction=float(tail_fraction),
            noise_floor=floor,
            snr=snr,
            knee_index=int(knee),
            ref_snr=float(snr[knee - 1]),
        )

    def with_tail_fraction(self, tail_fraction: float) -> "SpectralModel":
        spectrum = CovarianceSpectrum(
            self.mean, self.eigenvalues, self.eigenvectors, self.n_samples, self.seed, self.sample_cap
        )
        return SpectralModel.from_spectrum(spectrum, tail_fraction)

    def fields_equal(self, other: "SpectralModel") -> bool:
        """Bit-for-bit equality of every stored field."""
        for name in self.__dataclass_fields__:
            a, b = getattr(self, name), getattr(other, name)
            if isinstance(a, np.ndarray):
                if a.shape != b.shape or a.tobytes() != np.asarray(b).tobytes():
                    return False
            elif np.asarray(a).tobytes() != np.asarray(b).tobytes() or a != b:
                return False
        return True


def fit_model(
    corpus,
    cap: int = 1_000_000,
    seed: int = 1999,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    solver: str = "lapack",
) -> SpectralModel:
    check_tail_fraction(tail_fraction)
    return SpectralModel.from_spectrum(fit_spectrum(corpus, cap, seed, solver), tail_fraction)


@dataclass(frozen=True, eq=False)
class TemperingPlan:
    k: int
    gamma: float
    W: np.ndarray
    mean: np.ndarray
    l2_normalize: bool = True


def eigenvalue_floor(eigenvalues) -> float:
    top = float(eigenvalues[0])
    return EIG_FLOOR_REL * top if top > 0 else EIG_FLOOR_ABS


def build_plan(model, k: int, gamma: float | None = None, l2_normalize: bool = True) -> TemperingPlan:
    d = model.dim
    if not (1 <= k <= d):
        raise ConfigError(f"target dimension {k} outside [1, {d}]")
    if gamma is None:
        gamma = model.gamma(k)
    elif not (0.0 <= gamma <= 1.0):
        raise ConfigError(f"gamma must lie in [0, 1], got {gamma}")
    lam = np.maximum(model.eigenvalues[:k], eigenvalue_floor(model.eigenvalues))
    scales = lam ** (-gamma / 2.0)
    W = model.eigenvectors[:, :k] * scales
    return TemperingPlan(k=k, gamma=float(gamma), W=W, mean=model.mean, l2_normalize=l2_normalize)


def l2_normalize_rows(y: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(y, axis=1, keepdims=True)
    return np.divide(y, norms, out=np.zeros_like(y), where=norms > 0)


def transform(plan: TemperingPlan, x) -> np.ndarray:
    """Project rows as ``(x - mean) @ W``, L2-normalizing if the plan says so."""
    x = as_array(x)
    if x.shape[1] != plan.mean.shape[0]:
        raise ShapeError(f"input has dim {x.shape[1]}, model expects {plan.mean.shape[0]}")
    y = (x.astype(np.float64) - plan.mean) @ plan.W
    return l2_normalize_rows(y) if plan.l2_normalize else y
