"""Mapping between B-band cubes and per-band three-channel denoiser inputs.

Every plan assigns each band i a channel triple (three band indices, 0-based)
plus the designated output channel whose source is band i itself, so
recombination selects exactly that channel and extract/recombine round-trip to
the identity. Three plan kinds:

  sliding            (i-1, i, i+1) clamped at the edges, designated middle
  wavelengthMatched  bands below the cutoff lead anchor bands whose
                     wavelengths the prior has seen; others fall back to sliding
  partitioned        consecutive non-overlapping triples (ablation baseline)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import SpectralCube, TriImage, assemble_tri_image
from .exceptions import DimensionMismatchError

PLAN_KINDS = ("sliding", "wavelengthMatched", "partitioned")


@dataclass(frozen=True)
class BandPlan:
    kind: str
    triples: tuple[tuple[int, int, int], ...]
    designated: tuple[int, ...]

    def __post_init__(self):
        b = len(self.triples)
        if len(self.designated) != b:
            raise DimensionMismatchError("one designated channel per band required")
        for i, (triple, k) in enumerate(zip(self.triples, self.designated)):
            if not 0 <= k < 3:
                raise ValueError(f"band {i}: designated channel {k} out of range")
            for j in triple:
                if not 0 <= j < b:
                    raise ValueError(f"band {i}: channel source {j} out of range 0..{b - 1}")
            if triple[k] != i:
                raise ValueError(
                    f"band {i}: designated channel {k} sources band {triple[k]}, not {i}"
                )

    @property
    def bands(self) -> int:
        return len(self.triples)


def _clamp(j: int, bands: int) -> int:
    return min(max(j, 0), bands - 1)


def sliding_plan(bands: int) -> BandPlan:
    """Band i maps to (i-1, i, i+1) with edge clamping; designated channel is
    the middle one."""
    if bands < 1:
        raise ValueError(f"bands must be >= 1, got {bands}")
    triples = tuple(
        (_clamp(i - 1, bands), i, _clamp(i + 1, bands)) for i in range(bands)
    )
    return BandPlan("sliding", triples, (1,) * bands)


def wavelength_matched_plan(
    bands: int,
    anchor_a: int,
    anchor_b: int,
    cutoff_nm: float,
    wavelengths: np.ndarray,
) -> BandPlan:
    """Bands with wavelength below ``cutoff_nm`` map to (i, anchor_a, anchor_b)
    with the target band leading; all others use the sliding rule."""
    if bands < 1:
        raise ValueError(f"bands must be >= 1, got {bands}")
    for name, a in (("anchor_a", anchor_a), ("anchor_b", anchor_b)):
        if not 0 <= a < bands:
            raise ValueError(f"{name}={a} out of range 0..{bands - 1}")
    wavelengths = np.asarray(wavelengths, dtype=np.float64)
    if wavelengths.shape != (bands,):
        raise DimensionMismatchError(
            f"expected {bands} wavelengths, got shape {wavelengths.shape}"
        )
    base = sliding_plan(bands)
    triples = list(base.triples)
    designated = list(base.designated)
    for i in range(bands):
        if wavelengths[i] < cutoff_nm:
            triples[i] = (i, anchor_a, anchor_b)
            designated[i] = 0
    return BandPlan("wavelengthMatched", tuple(triples), tuple(designated))


def partitioned_plan(bands: int) -> BandPlan:
    """Consecutive non-overlapping triples (0,1,2), (3,4,5), ...; a short tail
    group clamps to the last band. Used only as the ablation baseline."""
    if bands < 1:
        raise ValueError(f"bands must be >= 1, got {bands}")
    triples = []
    designated = []
    for i in range(bands):
        g = 3 * (i // 3)
        triples.append(tuple(_clamp(g + k, bands) for k in range(3)))
        designated.append(i - g)
    return BandPlan("partitioned", tuple(triples), tuple(designated))


def make_plan(
    kind: str,
    bands: int,
    wavelengths: np.ndarray | None = None,
    anchors: tuple[int, int] = (20, 27),
    cutoff_nm: float = 500.0,
) -> BandPlan:
    if kind == "sliding":
        return sliding_plan(bands)
    if kind == "partitioned":
        return partitioned_plan(bands)
    if kind == "wavelengthMatched":
        if wavelengths is None:
            raise ValueError("wavelengthMatched plan requires wavelengths")
        return wavelength_matched_plan(bands, anchors[0], anchors[1], cutoff_nm, wavelengths)
    raise ValueError(f"unknown plan kind {kind!r} (expected one of {PLAN_KINDS})")


def extract(plan: BandPlan, cube: SpectralCube, band: int) -> TriImage:
    """Tri-image for ``band``: channels are the planned triple's band slices, in order."""
    if cube.bands != plan.bands:
        raise DimensionMismatchError(
            f"plan is for {plan.bands} bands but cube has {cube.bands}"
        )
    if not 0 <= band < plan.bands:
        raise DimensionMismatchError(f"band index {band} out of range 0..{plan.bands - 1}")
    j1, j2, j3 = plan.triples[band]
    return assemble_tri_image(cube.data[j1], cube.data[j2], cube.data[j3])


def recombine(
    plan: BandPlan, outputs: Sequence[TriImage], wavelengths: np.ndarray
) -> SpectralCube:
    """Cube whose band i is the designated channel of outputs[i]; overlapping
    triples are never averaged."""
    if len(outputs) != plan.bands:
        raise DimensionMismatchError(
            f"expected {plan.bands} tri-images, got {len(outputs)}"
        )
    shapes = {tri.data.shape for tri in outputs}
    if len(shapes) != 1:
        raise DimensionMismatchError(f"inconsistent tri-image shapes: {sorted(shapes)}")
    data = np.stack(
        [outputs[i].data[plan.designated[i]] for i in range(plan.bands)], axis=0
    )
    return SpectralCube(data, wavelengths)
