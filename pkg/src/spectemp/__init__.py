"""Learning-free embedding compression by SNR-guided spectral tempering."""

from spectemp.matio import EmbeddingMatrix, QrelsTable, load_embeddings, load_model, save_embeddings, save_model
from spectemp.spectral import CovarianceSpectrum, fit_spectrum
from spectemp.tempering import SpectralModel, TemperingPlan, build_plan, fit_model, transform

__version__ = "0.1.0"

__all__ = [
    "CovarianceSpectrum",
    "EmbeddingMatrix",
    "QrelsTable",
    "SpectralModel",
    "TemperingPlan",
    "build_plan",
    "fit_model",
    "fit_spectrum",
    "load_embeddings",
    "load_model",
    "save_embeddings",
    "save_model",
    "transform",
]
