"""Synthetic test scenes: spatially and spectrally smooth cubes in [0, 1].

Used by the test corpus and the `synth` CLI command so the pipeline can be
exercised without any captured data.
"""

from __future__ import annotations

import numpy as np

from .core import SpectralCube, default_wavelengths


def smooth_cube(
    height: int,
    width: int,
    bands: int,
    seed: int = 0,
    wavelengths: np.ndarray | None = None,
    bumps: int = 4,
) -> SpectralCube:
    """Sum of Gaussian spatial bumps with smooth per-bump spectral envelopes,
    over a gentle illumination gradient, rescaled into [0.05, 0.95]."""
    rng = np.random.default_rng(seed)
    if wavelengths is None:
        wavelengths = default_wavelengths(bands)
    hh, ww = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    bb = np.arange(bands)

    data = 0.15 * (hh / max(height - 1, 1) + ww / max(width - 1, 1))[None, :, :]
    data = np.repeat(data, bands, axis=0)
    for _ in range(bumps):
        ch = rng.uniform(0, height - 1)
        cw = rng.uniform(0, width - 1)
        rad = rng.uniform(0.15, 0.4) * min(height, width)
        spatial = np.exp(-((hh - ch) ** 2 + (ww - cw) ** 2) / (2.0 * rad**2))
        center = rng.uniform(0, bands - 1) if bands > 1 else 0.0
        sigma_b = rng.uniform(0.3, 0.8) * max(bands, 2)
        envelope = np.exp(-((bb - center) ** 2) / (2.0 * sigma_b**2))
        data = data + rng.uniform(0.4, 1.0) * envelope[:, None, None] * spatial[None, :, :]

    lo, hi = data.min(), data.max()
    span = hi - lo if hi > lo else 1.0
    data = 0.05 + 0.9 * (data - lo) / span
    return SpectralCube(data, wavelengths)


def monotone_spectrum_cube(
    height: int, width: int, bands: int, wavelengths: np.ndarray | None = None
) -> SpectralCube:
    """Cube whose intensity rises linearly with band index everywhere."""
    if wavelengths is None:
        wavelengths = default_wavelengths(bands)
    ramp = np.linspace(0.1, 0.9, bands)
    data = np.broadcast_to(ramp[:, None, None], (bands, height, width)).copy()
    return SpectralCube(data, wavelengths)
