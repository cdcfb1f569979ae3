"""Shift-and-sum sensing operator for coded-aperture snapshot spectral imaging.

The same 2-D mask modulates every band; band b (0-based) is then shifted by
b*d pixels along the width axis and all bands are summed into one snapshot of
width W + d*(B-1). Shifted pixels always land inside the extended width, so
the operator is well defined at the edges; snapshot columns not covered by a
band simply receive zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CodedMask, Measurement, SpectralCube, default_wavelengths
from .exceptions import DimensionMismatchError


def random_mask(height: int, width: int, seed: int, density: float = 0.5) -> CodedMask:
    """I.i.d. Bernoulli(density) mask in {0, 1} from a seeded generator."""
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density must lie in [0, 1], got {density}")
    rng = np.random.default_rng(seed)
    values = (rng.random((height, width)) < density).astype(np.float64)
    return CodedMask(values)


@dataclass(frozen=True)
class CassiOperator:
    """The linear map y = Phi x for a fixed mask, shift step d, and band count B.

    apply/adjoint form an exact adjoint pair; Phi Phi^T is diagonal because a
    cube voxel contributes to exactly one snapshot pixel.
    """

    mask: CodedMask
    shift_step: int
    bands: int

    def __post_init__(self):
        if int(self.shift_step) != self.shift_step or self.shift_step < 0:
            raise ValueError(f"shift_step must be a non-negative integer, got {self.shift_step}")
        if self.bands < 1:
            raise ValueError(f"bands must be >= 1, got {self.bands}")

    @property
    def height(self) -> int:
        return self.mask.height

    @property
    def width(self) -> int:
        return self.mask.width

    @property
    def width_ext(self) -> int:
        """Snapshot width W + d*(B-1)."""
        return self.mask.width + self.shift_step * (self.bands - 1)

    def _check_cube(self, x: np.ndarray) -> None:
        expect = (self.bands, self.height, self.width)
        if x.shape != expect:
            raise DimensionMismatchError(f"cube shape {x.shape} does not match operator {expect}")

    def _check_meas(self, y: np.ndarray) -> None:
        expect = (self.height, self.width_ext)
        if y.shape != expect:
            raise DimensionMismatchError(
                f"measurement shape {y.shape} does not match operator {expect}"
            )

    def apply_array(self, x: np.ndarray) -> np.ndarray:
        """(B, H, W) -> (H, W') masked shift-and-sum."""
        self._check_cube(x)
        d = self.shift_step
        w = self.width
        y = np.zeros((self.height, self.width_ext), dtype=np.float64)
        for b in range(self.bands):
            y[:, b * d : b * d + w] += self.mask.data * x[b]
        return y

    def adjoint_array(self, y: np.ndarray) -> np.ndarray:
        """(H, W') -> (B, H, W), the exact transpose of apply_array."""
        self._check_meas(y)
        d = self.shift_step
        w = self.width
        x = np.empty((self.bands, self.height, self.width), dtype=np.float64)
        for b in range(self.bands):
            x[b] = self.mask.data * y[:, b * d : b * d + w]
        return x

    def diag_gram(self) -> np.ndarray:
        """Diagonal of Phi Phi^T as an (H, W') plane: sum of mask^2 over covering bands."""
        d = self.shift_step
        w = self.width
        plane = np.zeros((self.height, self.width_ext), dtype=np.float64)
        sq = self.mask.data**2
        for b in range(self.bands):
            plane[:, b * d : b * d + w] += sq
        return plane

    def apply(self, cube: SpectralCube) -> Measurement:
        return Measurement(self.apply_array(cube.data), self.shift_step, 0.0)

    def adjoint(self, meas: Measurement, wavelengths: np.ndarray | None = None) -> SpectralCube:
        if meas.shift_step != self.shift_step:
            raise DimensionMismatchError(
                f"measurement shift_step {meas.shift_step} does not match operator {self.shift_step}"
            )
        if wavelengths is None:
            wavelengths = default_wavelengths(self.bands)
        return SpectralCube(self.adjoint_array(meas.data), wavelengths)

    def simulate(self, cube: SpectralCube, noise_sigma: float, seed) -> Measurement:
        """y = Phi x + g with g i.i.d. N(0, noise_sigma^2) from the seeded generator."""
        if noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
        y = self.apply_array(cube.data)
        if noise_sigma > 0:
            rng = np.random.default_rng(seed)
            y = y + rng.normal(0.0, noise_sigma, size=y.shape)
        return Measurement(y, self.shift_step, noise_sigma)
