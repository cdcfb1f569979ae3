"""Dense array types for spectral cubes, coded masks, and snapshot measurements.

Layout convention: cube voxel (h, w, b) lives at flat index b*H*W + h*W + w,
i.e. the in-memory array is C-ordered with shape (B, H, W). Band slicing is
therefore contiguous, which is the hot path of per-band denoising. Values are
held as float64 in memory; on-disk formats store float32 (see fileio).

All types are plain values: safe to copy between threads, no interior
mutation after construction except explicit writes to ``.data``, which
require exclusive access.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError


def default_wavelengths(bands: int, start: float = 450.0, end: float = 720.0) -> np.ndarray:
    """Evenly spaced band centers in nanometers, used when none are recorded."""
    if bands < 1:
        raise DimensionMismatchError(f"bands must be >= 1, got {bands}")
    if bands == 1:
        return np.array([start], dtype=np.float64)
    return np.linspace(start, end, bands, dtype=np.float64)


def _check_finite(arr: np.ndarray, name: str) -> None:
    if not np.isfinite(arr).all():
        idx = int(np.flatnonzero(~np.isfinite(arr.ravel()))[0])
        raise ValueError(f"{name} contains a non-finite value at flat index {idx}")


def _check_wavelengths(wavelengths: np.ndarray, bands: int) -> None:
    if wavelengths.shape != (bands,):
        raise DimensionMismatchError(
            f"expected {bands} wavelengths, got shape {wavelengths.shape}"
        )
    _check_finite(wavelengths, "wavelengths")
    diffs = np.diff(wavelengths)
    if (diffs <= 0).any():
        idx = int(np.flatnonzero(diffs <= 0)[0]) + 1
        raise ValueError(
            f"wavelengths must be strictly increasing; violation at index {idx} "
            f"({wavelengths[idx - 1]} -> {wavelengths[idx]})"
        )


@dataclass
class SpectralCube:
    """A multispectral image x of shape (bands, height, width) with band centers in nm."""

    data: np.ndarray
    wavelengths: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        self.wavelengths = np.asarray(self.wavelengths, dtype=np.float64)
        if self.data.ndim != 3:
            raise DimensionMismatchError(
                f"cube data must be (bands, height, width), got shape {self.data.shape}"
            )
        b, h, w = self.data.shape
        if b < 1 or h < 1 or w < 1:
            raise DimensionMismatchError(f"cube dimensions must be >= 1, got {self.data.shape}")
        _check_wavelengths(self.wavelengths, b)
        _check_finite(self.data, "cube data")

    @classmethod
    def filled(
        cls, height: int, width: int, bands: int, wavelengths: np.ndarray, fill: float = 0.0
    ) -> "SpectralCube":
        if height < 1 or width < 1 or bands < 1:
            raise DimensionMismatchError(
                f"dimensions must be >= 1, got ({height}, {width}, {bands})"
            )
        data = np.full((bands, height, width), float(fill), dtype=np.float64)
        return cls(data, wavelengths)

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    def slice_band(self, band: int) -> np.ndarray:
        """Copy of band ``band`` as an (H, W) plane; the cube is unchanged."""
        if not 0 <= band < self.bands:
            raise DimensionMismatchError(
                f"band index {band} out of range for cube with {self.bands} bands"
            )
        return self.data[band].copy()

    def copy(self) -> "SpectralCube":
        return SpectralCube(self.data.copy(), self.wavelengths.copy())


@dataclass
class CodedMask:
    """2-D transmission mask with values in [0, 1], applied identically to every band."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise DimensionMismatchError(
                f"mask data must be 2-D, got shape {self.data.shape}"
            )
        _check_finite(self.data, "mask data")
        if (self.data < 0).any() or (self.data > 1).any():
            bad = int(np.flatnonzero((self.data.ravel() < 0) | (self.data.ravel() > 1))[0])
            raise ValueError(f"mask values must lie in [0, 1]; violation at flat index {bad}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass
class Measurement:
    """Single 2-D snapshot of shape (H, W + d*(B-1)) plus the noise level it carries."""

    data: np.ndarray
    shift_step: int
    noise_sigma: float = 0.0

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise DimensionMismatchError(
                f"measurement data must be 2-D, got shape {self.data.shape}"
            )
        if int(self.shift_step) != self.shift_step or self.shift_step < 0:
            raise ValueError(f"shift_step must be a non-negative integer, got {self.shift_step}")
        self.shift_step = int(self.shift_step)
        self.noise_sigma = float(self.noise_sigma)
        if not np.isfinite(self.noise_sigma) or self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be finite and >= 0, got {self.noise_sigma}")
        _check_finite(self.data, "measurement data")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass
class TriImage:
    """Three-channel image of shape (3, H, W); the unit the denoiser prior consumes."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[0] != 3:
            raise DimensionMismatchError(
                f"tri-image data must be (3, H, W), got shape {self.data.shape}"
            )
        _check_finite(self.data, "tri-image data")

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def channel(self, k: int) -> np.ndarray:
        if not 0 <= k < 3:
            raise DimensionMismatchError(f"channel index {k} out of range")
        return self.data[k].copy()


def assemble_tri_image(p1: np.ndarray, p2: np.ndarray, p3: np.ndarray) -> TriImage:
    """Stack three equal-size planes into a TriImage with channel order (p1, p2, p3)."""
    planes = [np.asarray(p, dtype=np.float64) for p in (p1, p2, p3)]
    shapes = {p.shape for p in planes}
    if len(shapes) != 1 or planes[0].ndim != 2:
        raise DimensionMismatchError(
            f"planes must be 2-D with equal shapes, got {[p.shape for p in planes]}"
        )
    return TriImage(np.stack(planes, axis=0))
