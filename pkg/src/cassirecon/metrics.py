"""Reconstruction quality metrics: PSNR, SSIM, and spectral-curve correlation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .core import SpectralCube
from .exceptions import DimensionMismatchError, MetricError

PSNR_CAP_DB = 200.0

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE), ceiling-capped at 200 dB (the zero-MSE sentinel)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ValueError(f"peak must be > 0, got {peak}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(peak**2 / mse))


def mean_band_psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Arithmetic mean (in dB) of per-band PSNR over (B, H, W) arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 3:
        raise DimensionMismatchError(f"expected equal (B, H, W) arrays, got {a.shape} vs {b.shape}")
    return float(np.mean([psnr(a[i], b[i], peak) for i in range(a.shape[0])]))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5) and the
    standard constants C1 = (0.01 peak)^2, C2 = (0.03 peak)^2. Statistics are
    window-weighted; the map is evaluated on fully interior windows."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 2 or min(a.shape) < _SSIM_WINDOW:
        raise DimensionMismatchError(
            f"ssim needs 2-D planes of at least {_SSIM_WINDOW}x{_SSIM_WINDOW}, got {a.shape}"
        )
    if peak <= 0:
        raise ValueError(f"peak must be > 0, got {peak}")
    w = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2

    mu_a = convolve2d(a, w, mode="valid")
    mu_b = convolve2d(b, w, mode="valid")
    var_a = convolve2d(a * a, w, mode="valid") - mu_a**2
    var_b = convolve2d(b * b, w, mode="valid") - mu_b**2
    cov = convolve2d(a * b, w, mode="valid") - mu_a * mu_b

    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def mean_band_ssim(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 3:
        raise DimensionMismatchError(f"expected equal (B, H, W) arrays, got {a.shape} vs {b.shape}")
    return float(np.mean([ssim(a[i], b[i], peak) for i in range(a.shape[0])]))


@dataclass(frozen=True)
class Region:
    """Rectangle (top, left, height, width) in pixel coordinates."""

    top: int
    left: int
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or self.top < 0 or self.left < 0:
            raise ValueError(f"invalid region {self}")

    def slices(self) -> tuple[slice, slice]:
        return slice(self.top, self.top + self.height), slice(self.left, self.left + self.width)


def band_curve(cube: SpectralCube, region: Region) -> np.ndarray:
    """Mean intensity of the region per band: a length-B spectral curve."""
    hs, ws = region.slices()
    if region.top + region.height > cube.height or region.left + region.width > cube.width:
        raise DimensionMismatchError(
            f"region {region} exceeds cube extent {cube.height}x{cube.width}"
        )
    return cube.data[:, hs, ws].mean(axis=(1, 2))


def spectral_curve_correlation(recon: SpectralCube, ref: SpectralCube, region: Region) -> float:
    """Pearson correlation of the region-mean spectral curves of two cubes."""
    if recon.data.shape != ref.data.shape:
        raise DimensionMismatchError(
            f"cube shapes differ: {recon.data.shape} vs {ref.data.shape}"
        )
    a = band_curve(recon, region)
    b = band_curve(ref, region)
    sa, sb = float(np.std(a)), float(np.std(b))
    if sa == 0.0 or sb == 0.0:
        raise MetricError("spectral correlation undefined: zero-variance curve")
    return float(np.corrcoef(a, b)[0, 1])


@dataclass
class EvalReport:
    """Scene-level evaluation: mean PSNR is the arithmetic dB mean of the
    per-band values."""

    per_band_psnr: list[float]
    mean_psnr: float
    mean_ssim: float
    spectral_correlation: float | None = None
    peak: float = 1.0
    region: tuple[int, int, int, int] | None = None

    def to_dict(self) -> dict:
        out = {
            "peak": self.peak,
            "per_band_psnr": self.per_band_psnr,
            "mean_psnr": self.mean_psnr,
            "mean_ssim": self.mean_ssim,
        }
        if self.spectral_correlation is not None:
            out["spectral_correlation"] = self.spectral_correlation
            out["region"] = list(self.region)
        return out


def evaluate_cubes(
    recon: SpectralCube, ref: SpectralCube, peak: float = 1.0, region: Region | None = None
) -> EvalReport:
    if recon.data.shape != ref.data.shape:
        raise DimensionMismatchError(
            f"cube shapes differ: {recon.data.shape} vs {ref.data.shape}"
        )
    per_band = [psnr(recon.data[b], ref.data[b], peak) for b in range(recon.bands)]
    report = EvalReport(
        per_band_psnr=[float(v) for v in per_band],
        mean_psnr=float(np.mean(per_band)),
        mean_ssim=mean_band_ssim(recon.data, ref.data, peak),
        peak=peak,
    )
    if region is not None:
        report.spectral_correlation = spectral_curve_correlation(recon, ref, region)
        report.region = (region.top, region.left, region.height, region.width)
    return report
