"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes; everything else raises them
directly.
"""

from __future__ import annotations


class CassiReconError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(CassiReconError, ValueError):
    """Array shapes or index bounds are inconsistent."""


class ConfigError(CassiReconError, ValueError):
    """Run configuration is invalid (bad value, unknown key, missing path)."""


class FormatError(CassiReconError, ValueError):
    """A binary artifact file is malformed (magic, version, truncation)."""


class DegeneratePixelError(CassiReconError, ArithmeticError):
    """Data-step denominator vanished at one or more measurement pixels."""

    def __init__(self, coords: list[tuple[int, int]], message: str | None = None):
        self.coords = coords
        shown = ", ".join(f"({h},{w})" for h, w in coords[:8])
        more = "" if len(coords) <= 8 else f" (+{len(coords) - 8} more)"
        super().__init__(
            message
            or f"data-step denominator <= 1e-12 at measurement pixels {shown}{more}"
        )


class ExternalPriorError(CassiReconError, RuntimeError):
    """The external score-server connection failed or returned an error frame."""


class NumericalAbortError(CassiReconError, FloatingPointError):
    """Non-finite values appeared during a solver run."""


class MetricError(CassiReconError, ValueError):
    """A metric is undefined for the given inputs (e.g. zero-variance curve)."""
