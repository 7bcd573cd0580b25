"""SSIM and Frechet distance computed directly from their definitions."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from uwtranslate.core.types import ImageTensor
from uwtranslate.errors import MetricError

logger = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
# ITU-R BT.601 luma weights
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

FRECHET_EPS = 1e-6
IMAGINARY_TOLERANCE = 1e-3
SINGULAR_TOLERANCE = 1e-10


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 2-D Gaussian weights, shape (size, size)."""
    coords = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def luminance(image: ImageTensor) -> np.ndarray:
    """Luma plane in [0, 1] (depth planes are ignored)."""
    data = (image.data.double().numpy() + 1.0) / 2.0
    if image.channels == 1:
        return data[0]
    return np.tensordot(LUMA_WEIGHTS, data[:3], axes=1)


def ssim(
    a: ImageTensor,
    b: ImageTensor,
    window_size: int = SSIM_WINDOW,
    sigma: float = SSIM_SIGMA,
    data_range: float = 1.0,
) -> float:
    """Mean structural similarity of two images over all valid window positions.

    Args:
        a: First image.
        b: Second image, same shape as ``a``.
        window_size: Side of the Gaussian window.
        sigma: Standard deviation of the window.
        data_range: Dynamic range L of the luminance plane.

    Returns:
        SSIM in [-1, 1]; 1 for identical images.

    Raises:
        ValueError: On a shape mismatch or images smaller than the window.
    """
    if a.data.shape != b.data.shape:
        raise ValueError(f"SSIM needs equal shapes, got {tuple(a.data.shape)} and {tuple(b.data.shape)}")
    if min(a.height, a.width) < window_size:
        raise ValueError(f"image {a.height}x{a.width} is smaller than the {window_size}x{window_size} SSIM window")
    x, y = luminance(a), luminance(b)
    w = gaussian_window(window_size, sigma)

    def filt(plane: np.ndarray) -> np.ndarray:
        return convolve2d(plane, w, mode="valid")

    mu_x, mu_y = filt(x), filt(y)
    var_x = filt(x * x) - mu_x * mu_x
    var_y = filt(y * y) - mu_y * mu_y
    cov_xy = filt(x * y) - mu_x * mu_y
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    numerator = (2.0 * mu_x * mu_y + c1) * (2.0 * cov_xy + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(numerator / denominator))


@dataclass
class GaussianStats:
    """Mean and covariance of a feature population."""

    mean: np.ndarray
    covariance: np.ndarray
    sample_count: int
    warnings: list[str] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])


def fit_gaussian(features: np.ndarray | Sequence[np.ndarray]) -> GaussianStats:
    """Sample mean and unbiased, symmetrized sample covariance.

    Raises:
        ValueError: With fewer than two samples ("covariance undefined").
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError(f"features must be a list of vectors, got shape {x.shape}")
    n, dim = x.shape
    if n < 2:
        raise ValueError(f"covariance undefined: need at least 2 samples, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    cov = (cov + cov.T) / 2.0
    warnings = []
    if dim >= n:
        message = f"singular covariance: {dim}-D features from only {n} samples"
        logger.warning(message)
        warnings.append(message)
    return GaussianStats(mean=mean, covariance=cov, sample_count=n, warnings=warnings)


def _sqrt_psd(matrix: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(matrix)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def _is_singular(cov: np.ndarray) -> bool:
    vals = np.linalg.eigvalsh(cov)
    return bool(vals.min() <= SINGULAR_TOLERANCE * max(1.0, float(vals.max())))


def frechet_distance(g1: GaussianStats, g2: GaussianStats) -> float:
    """``|mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2))``.

    The trace of the root is taken from the eigenvalues of ``S1^(1/2) S2 S1^(1/2)``,
    which share their spectrum with ``S1 S2``. When either covariance is singular both
    are regularized with ``eps * I`` throughout, so identical inputs still score 0.

    Raises:
        ValueError: On a dimension mismatch.
        MetricError: "ill-conditioned covariance product" when the product has a
            significantly negative eigenvalue.
    """
    if g1.dim != g2.dim:
        raise ValueError(f"dimension mismatch: {g1.dim} vs {g2.dim}")
    s1, s2 = g1.covariance, g2.covariance
    if _is_singular(s1) or _is_singular(s2):
        offset = np.eye(g1.dim) * FRECHET_EPS
        s1, s2 = s1 + offset, s2 + offset

    root1 = _sqrt_psd(s1)
    product = root1 @ s2 @ root1
    eigvals = np.linalg.eigvalsh((product + product.T) / 2.0)
    if eigvals.min() < -IMAGINARY_TOLERANCE:
        raise MetricError(f"ill-conditioned covariance product (eigenvalue {eigvals.min():.3g})")
    tr_covmean = float(np.sqrt(np.clip(eigvals, 0.0, None)).sum())

    diff = g1.mean - g2.mean
    value = float(diff @ diff + np.trace(s1) + np.trace(s2) - 2.0 * tr_covmean)
    return max(value, 0.0)


def fid_report(set_a: Sequence[ImageTensor], set_b: Sequence[ImageTensor], extractor) -> tuple[float, list[str]]:
    """FID between two image sets plus the singularity warnings of both fits."""
    g1 = fit_gaussian(extractor(set_a))
    g2 = fit_gaussian(extractor(set_b))
    warnings = list(dict.fromkeys(g1.warnings + g2.warnings))
    return frechet_distance(g1, g2), warnings


def fid(set_a: Sequence[ImageTensor], set_b: Sequence[ImageTensor], extractor) -> float:
    """Frechet distance between Gaussian fits of extractor features of two image sets."""
    return fid_report(set_a, set_b, extractor)[0]
