"""Snapshot spectral imaging: coded-aperture measurement simulation and
plug-and-play reconstruction with diffusion-style denoiser priors."""

from .bands import (
    BandPlan,
    extract,
    make_plan,
    partitioned_plan,
    recombine,
    sliding_plan,
    wavelength_matched_plan,
)
from .core import (
    CodedMask,
    Measurement,
    SpectralCube,
    TriImage,
    assemble_tri_image,
    default_wavelengths,
)
from .metrics import EvalReport, Region, evaluate_cubes, psnr, spectral_curve_correlation, ssim
from .operator import CassiOperator, random_mask
from .priors import (
    ExternalPrior,
    GaussianShrinkPrior,
    IdentityPrior,
    OraclePrior,
    PriorRequest,
    denoise,
)
from .schedule import (
    DiffusionSchedule,
    SamplerParams,
    ddpm_step,
    forward_sample,
    implied_noise,
    linear_schedule,
    predict_clean,
    reverse_step,
    timestep_ladder,
)
from .solver import (
    SolverConfig,
    SolverState,
    Trace,
    TraceRecord,
    adjoint_init,
    data_step_accelerated,
    data_step_closed_form,
    rho,
    run_pnp_baseline,
    run_sampler,
)
from .synthetic import monotone_spectrum_cube, smooth_cube

__version__ = "0.1.0"

__all__ = [
    "BandPlan",
    "CassiOperator",
    "CodedMask",
    "DiffusionSchedule",
    "EvalReport",
    "ExternalPrior",
    "GaussianShrinkPrior",
    "IdentityPrior",
    "Measurement",
    "OraclePrior",
    "PriorRequest",
    "Region",
    "SamplerParams",
    "SolverConfig",
    "SolverState",
    "SpectralCube",
    "Trace",
    "TraceRecord",
    "TriImage",
    "adjoint_init",
    "assemble_tri_image",
    "data_step_accelerated",
    "data_step_closed_form",
    "ddpm_step",
    "default_wavelengths",
    "denoise",
    "evaluate_cubes",
    "extract",
    "forward_sample",
    "implied_noise",
    "linear_schedule",
    "make_plan",
    "monotone_spectrum_cube",
    "partitioned_plan",
    "predict_clean",
    "psnr",
    "random_mask",
    "recombine",
    "reverse_step",
    "rho",
    "run_pnp_baseline",
    "run_sampler",
    "sliding_plan",
    "smooth_cube",
    "spectral_curve_correlation",
    "ssim",
    "timestep_ladder",
    "wavelength_matched_plan",
]
