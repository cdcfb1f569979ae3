"""HQS data subproblem (closed form and accelerated) and the full sampling loop.

The sampler alternates, per retained timestep t: per-band denoising through
the band plan, a closed-form data-consistency step with penalty
rho_t = lambda * sigma_n^2 / sigma_bar_t^2, and a reverse-diffusion update.
The accelerated data step replaces the measurement with a running accumulation
of residuals, which keeps pushing the data term even when rho_t damps the
per-step correction.

Accumulator convention: the accumulator starts at the measurement y and the
correction uses its value from before the current step's residual is added,
so the first iteration coincides exactly with the plain closed form and a
data-consistent iterate is a fixed point. This convention is recorded in the
trace header.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bands import BandPlan, make_plan, sliding_plan
from .core import Measurement, SpectralCube, TriImage, default_wavelengths
from .exceptions import (
    DegeneratePixelError,
    ExternalPriorError,
    NumericalAbortError,
)
from .metrics import mean_band_psnr
from .operator import CassiOperator
from .priors import PriorRequest
from .schedule import (
    DiffusionSchedule,
    SamplerParams,
    forward_sample,
    implied_noise,
    linear_schedule,
    predict_clean,
    reverse_step,
    timestep_ladder,
)

_DENOM_FLOOR = 1e-12

ACCUMULATOR_NOTE = (
    "residual accumulator initialized to the measurement; "
    "each correction uses the value accumulated before the current step"
)


@dataclass
class SolverConfig:
    """Knobs of one reconstruction run. Band indices are 0-based."""

    lam: float = 15.0
    zeta: float = 1.0
    guidance_scale: float = 1.0
    t_start: int = 600
    step_count: int = 100
    seed: int = 0
    sigma_n: float = 0.0
    mu: float = 0.1
    plan_kind: str = "wavelengthMatched"
    anchors: tuple[int, int] = (20, 27)
    cutoff_nm: float = 500.0
    accelerate: bool = True
    warm_start: bool = False
    normalize: bool = True

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if self.guidance_scale < 0:
            raise ValueError(f"guidance_scale must be >= 0, got {self.guidance_scale}")
        if self.sigma_n < 0:
            raise ValueError(f"sigma_n must be >= 0, got {self.sigma_n}")
        if self.mu <= 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError(f"zeta must lie in [0, 1], got {self.zeta}")
        self.anchors = (int(self.anchors[0]), int(self.anchors[1]))

    def sampler_params(self) -> SamplerParams:
        return SamplerParams(
            zeta=self.zeta, t_start=self.t_start, step_count=self.step_count, seed=self.seed
        )


@dataclass
class SolverState:
    """Mutable loop state: current iterate, residual accumulator, timestep."""

    x_t: np.ndarray
    y1: np.ndarray
    t: int


@dataclass
class TraceRecord:
    step: int
    t: int
    rho: float
    residual: float
    psnr: float | None = None

    def to_dict(self) -> dict:
        out = {"step": self.step, "t": self.t, "rho": self.rho, "residual": self.residual}
        if self.psnr is not None:
            out["psnr"] = self.psnr
        return out


@dataclass
class Trace:
    header: dict
    records: list[TraceRecord] = field(default_factory=list)

    def write_jsonl(self, path) -> None:
        lines = [json.dumps({"header": self.header}, sort_keys=True)]
        lines += [json.dumps(r.to_dict(), sort_keys=True) for r in self.records]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def read_jsonl(cls, path) -> "Trace":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines:
            raise ValueError(f"empty trace file {path}")
        header = json.loads(lines[0]).get("header", {})
        records = []
        for line in lines[1:]:
            if not line.strip():
                continue
            d = json.loads(line)
            records.append(
                TraceRecord(d["step"], d["t"], d["rho"], d["residual"], d.get("psnr"))
            )
        return cls(header, records)


def rho(cfg: SolverConfig, sched: DiffusionSchedule, t: int) -> float:
    """Timestep-dependent data penalty lambda * sigma_n^2 / sigma_bar_t^2."""
    return cfg.lam * cfg.sigma_n**2 / sched.sigma_bar(t) ** 2


def _guarded_denominator(op: CassiOperator, mu: float) -> np.ndarray:
    denom = op.diag_gram() + mu
    if (denom <= _DENOM_FLOOR).any():
        coords = [tuple(int(v) for v in hw) for hw in np.argwhere(denom <= _DENOM_FLOOR)]
        raise DegeneratePixelError(coords)
    return denom


def data_step_closed_form(
    op: CassiOperator, y: np.ndarray, z: np.ndarray, mu: float
) -> np.ndarray:
    """argmin_x ||y - Phi x||^2 + mu ||x - z||^2 via the diagonal-Gram identity:
    x = z + Phi^T [(y - Phi z) / (diag(Phi Phi^T) + mu)].
    """
    if mu < 0:
        raise ValueError(f"mu must be >= 0, got {mu}")
    denom = _guarded_denominator(op, mu)
    return z + op.adjoint_array((y - op.apply_array(z)) / denom)


def data_step_accelerated(
    op: CassiOperator,
    y: np.ndarray,
    state: SolverState,
    x_tilde: np.ndarray,
    rho_t: float,
    sc: float,
) -> np.ndarray:
    """One accelerated data step; updates state.y1 in place (see module docstring)."""
    denom = _guarded_denominator(op, rho_t)
    phi_xt = op.apply_array(x_tilde)
    x0_hat = x_tilde + sc * op.adjoint_array((state.y1 - phi_xt) / denom)
    state.y1 = state.y1 + (y - phi_xt)
    return x0_hat


def adjoint_init(op: CassiOperator, y: np.ndarray) -> np.ndarray:
    """Phi^T [y / diag(Phi Phi^T)], with uncovered pixels mapped to zero."""
    diag = op.diag_gram()
    ratio = np.divide(y, diag, out=np.zeros_like(y), where=diag > _DENOM_FLOOR)
    return op.adjoint_array(ratio)


def _normalization_scale(op: CassiOperator, y: np.ndarray) -> float:
    peak = float(np.max(np.abs(adjoint_init(op, y))))
    return peak if peak > 0 else 1.0


def _check_finite(arr: np.ndarray, what: str, step: int, t: int) -> None:
    if not np.isfinite(arr).all():
        raise NumericalAbortError(f"non-finite {what} at step {step} (t={t})")


def _denoise_bands(
    plan: BandPlan,
    sched: DiffusionSchedule,
    prior,
    x_t: np.ndarray,
    t: int,
) -> np.ndarray:
    """Per-band score -> predict-clean through the plan, keeping only each
    band's designated channel. Works on raw arrays in the hot path so numeric
    blowups surface as the solver's abort, not as type validation."""
    sigma = sched.sigma_bar(t)

    def one_band(b: int) -> np.ndarray:
        j1, j2, j3 = plan.triples[b]
        tri = TriImage(np.stack((x_t[j1], x_t[j2], x_t[j3])))
        req = PriorRequest(tri, t, sigma, band=b)
        try:
            score = prior.score(req)
        except ExternalPriorError as exc:
            raise ExternalPriorError(f"{exc} (band {b})") from exc
        cleaned = predict_clean(sched, tri.data, score.data, t)
        return cleaned[plan.designated[b]]

    workers = getattr(prior, "max_concurrent", 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cleaned = list(pool.map(one_band, range(plan.bands)))
    else:
        cleaned = [one_band(b) for b in range(plan.bands)]
    return np.stack(cleaned, axis=0)


def run_sampler(
    cfg: SolverConfig,
    sched: DiffusionSchedule,
    op: CassiOperator,
    y: Measurement,
    prior,
    reference: SpectralCube | None = None,
    wavelengths: np.ndarray | None = None,
) -> tuple[SpectralCube, Trace]:
    """Full reverse-sampling reconstruction from one snapshot.

    Deterministic function of (y, mask, config) when zeta = 0; with zeta > 0
    all randomness comes from the config seed.
    """
    params = cfg.sampler_params()
    params.validate_against(sched)
    if wavelengths is None:
        wavelengths = default_wavelengths(op.bands)
    plan = make_plan(cfg.plan_kind, op.bands, wavelengths, cfg.anchors, cfg.cutoff_nm)

    scale = _normalization_scale(op, y.data) if cfg.normalize else 1.0
    y_arr = y.data / scale

    rng = np.random.default_rng(cfg.seed)
    shape = (op.bands, op.height, op.width)
    if cfg.warm_start:
        state_x = forward_sample(sched, adjoint_init(op, y_arr), cfg.t_start, rng)
    else:
        state_x = rng.standard_normal(shape)
    state = SolverState(x_t=state_x, y1=y_arr.copy(), t=cfg.t_start)

    trace = Trace(
        header={
            "kind": "sampler",
            "acceleration": ACCUMULATOR_NOTE if cfg.accelerate else "off",
            "scale": scale,
            "plan": plan.kind,
            "zeta": cfg.zeta,
            "lambda": cfg.lam,
            "guidance_scale": cfg.guidance_scale,
            "sigma_n": cfg.sigma_n,
            "t_start": cfg.t_start,
            "step_count": cfg.step_count,
            "seed": cfg.seed,
        }
    )

    ladder = timestep_ladder(cfg.t_start, cfg.step_count)
    for step, (t, t_next) in enumerate(zip(ladder[:-1], ladder[1:])):
        state.t = t
        x_tilde = _denoise_bands(plan, sched, prior, state.x_t, t)
        _check_finite(x_tilde, "denoised iterate", step, t)

        rho_t = rho(cfg, sched, t)
        if cfg.accelerate:
            x0_hat = data_step_accelerated(
                op, y_arr, state, x_tilde, rho_t, cfg.guidance_scale
            )
        else:
            x0_hat = data_step_closed_form(op, y_arr, x_tilde, rho_t)
        _check_finite(x0_hat, "data-step output", step, t)

        residual = scale * float(np.linalg.norm(y_arr - op.apply_array(x0_hat)))
        psnr_val = None
        if reference is not None:
            psnr_val = mean_band_psnr(scale * x0_hat, reference.data)
        trace.records.append(TraceRecord(step, t, rho_t, residual, psnr_val))

        eps_hat = implied_noise(sched, state.x_t, x0_hat, t)
        state.x_t = reverse_step(sched, params, x0_hat, eps_hat, t, t_next, rng)

    return SpectralCube(scale * state.x_t, wavelengths), trace


def run_pnp_baseline(
    cfg: SolverConfig,
    op: CassiOperator,
    y: Measurement,
    prior,
    iterations: int,
    mu=None,
    sched: DiffusionSchedule | None = None,
    reference: SpectralCube | None = None,
    wavelengths: np.ndarray | None = None,
) -> tuple[SpectralCube, Trace]:
    """Plain alternation of the closed-form data step and per-band denoising
    (sliding plan), without diffusion wrapping. ``mu`` is a scalar or one value
    per iteration; 0 iterations returns the adjoint initialization. Runs in the
    measurement's native scale.
    """
    if iterations < 0:
        raise ValueError(f"iterations must be >= 0, got {iterations}")
    if sched is None:
        sched = linear_schedule()
    if wavelengths is None:
        wavelengths = default_wavelengths(op.bands)
    if mu is None:
        mu = cfg.mu
    mus = [float(m) for m in (mu if np.iterable(mu) else [mu] * iterations)]
    if iterations and len(mus) != iterations:
        raise ValueError(f"expected {iterations} mu values, got {len(mus)}")
    if any(m <= 0 for m in mus):
        raise ValueError("baseline mu values must be > 0")

    plan = sliding_plan(op.bands)
    trace = Trace(
        header={
            "kind": "baseline",
            "iterations": iterations,
            "mu": mus,
            "lambda": cfg.lam,
        }
    )

    z = adjoint_init(op, y.data)
    for k in range(iterations):
        x = data_step_closed_form(op, y.data, z, mus[k])
        _check_finite(x, "data-step output", k, 0)
        t = sched.nearest_timestep(np.sqrt(cfg.lam / mus[k]))
        z = _denoise_bands(plan, sched, prior, x, t)
        _check_finite(z, "denoised iterate", k, t)
        residual = float(np.linalg.norm(y.data - op.apply_array(x)))
        psnr_val = mean_band_psnr(z, reference.data) if reference is not None else None
        trace.records.append(TraceRecord(k, t, mus[k], residual, psnr_val))

    return SpectralCube(z, wavelengths), trace
