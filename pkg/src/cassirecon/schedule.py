"""Discrete noise schedule and the algebra of forward noising and reverse updates.

Tables are indexed by timestep t in 1..T; t = 0 is the clean image by the
convention alpha_bar(0) = 1, so the final reverse step collapses to the clean
estimate. All sampling functions accept either an integer seed or a
numpy Generator, and operate on arrays of any shape (tri-images and whole
cubes alike).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError

DEFAULT_STEPS = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


@dataclass(frozen=True)
class DiffusionSchedule:
    """beta/alpha tables: alphas = 1 - betas, alpha_bars their running product,
    sigma_bars = sqrt((1 - alpha_bar) / alpha_bar)."""

    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    sigma_bars: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.betas)

    def alpha_bar(self, t: int) -> float:
        """alpha_bar at timestep t, with alpha_bar(0) = 1."""
        if t == 0:
            return 1.0
        self._check_t(t)
        return float(self.alpha_bars[t - 1])

    def sigma_bar(self, t: int) -> float:
        self._check_t(t)
        return float(self.sigma_bars[t - 1])

    def beta(self, t: int) -> float:
        self._check_t(t)
        return float(self.betas[t - 1])

    def alpha(self, t: int) -> float:
        self._check_t(t)
        return float(self.alphas[t - 1])

    def nearest_timestep(self, sigma_bar: float) -> int:
        """Timestep whose noise level is closest to ``sigma_bar``."""
        return int(np.argmin(np.abs(self.sigma_bars - sigma_bar))) + 1

    def _check_t(self, t: int) -> None:
        if not 1 <= t <= self.steps:
            raise ValueError(f"timestep {t} out of range 1..{self.steps}")


def linear_schedule(
    steps: int = DEFAULT_STEPS,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> DiffusionSchedule:
    """Arithmetic beta ramp from beta_start to beta_end over ``steps`` timesteps."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if not (0.0 < beta_start < beta_end < 1.0):
        raise ValueError(
            f"need 0 < beta_start < beta_end < 1, got ({beta_start}, {beta_end})"
        )
    if steps == 1:
        betas = np.array([beta_start], dtype=np.float64)
    else:
        betas = np.linspace(beta_start, beta_end, steps, dtype=np.float64)
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    sigma_bars = np.sqrt((1.0 - alpha_bars) / alpha_bars)
    return DiffusionSchedule(betas, alphas, alpha_bars, sigma_bars)


@dataclass(frozen=True)
class SamplerParams:
    """Reverse-sampling knobs: zeta mixes implied noise with fresh noise."""

    zeta: float = 1.0
    t_start: int = 600
    step_count: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError(f"zeta must lie in [0, 1], got {self.zeta}")
        if not 1 <= self.step_count <= self.t_start:
            raise ValueError(
                f"need 1 <= step_count <= t_start, got ({self.step_count}, {self.t_start})"
            )

    def validate_against(self, sched: DiffusionSchedule) -> None:
        if self.t_start > sched.steps:
            raise ValueError(f"t_start {self.t_start} exceeds schedule length {sched.steps}")


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")


def forward_sample(sched: DiffusionSchedule, x0: np.ndarray, t: int, seed) -> np.ndarray:
    """x_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) eps with seeded standard normal eps."""
    ab = sched.alpha_bar(t)
    if t == 0:
        return np.array(x0, dtype=np.float64, copy=True)
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(x0.shape)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def predict_clean(sched: DiffusionSchedule, x_t: np.ndarray, score: np.ndarray, t: int) -> np.ndarray:
    """Clean-image estimate (1/sqrt(ab_t)) * (x_t + (1 - ab_t) * score)."""
    _check_same_shape(x_t, score)
    ab = sched.alpha_bar(t)
    return (x_t + (1.0 - ab) * score) / np.sqrt(ab)


def implied_noise(sched: DiffusionSchedule, x_t: np.ndarray, x0_hat: np.ndarray, t: int) -> np.ndarray:
    """The eps that would map x0_hat to x_t: (x_t - sqrt(ab_t) x0_hat) / sqrt(1 - ab_t)."""
    _check_same_shape(x_t, x0_hat)
    if t < 1:
        raise ValueError(f"implied noise requires t >= 1, got {t}")
    ab = sched.alpha_bar(t)
    return (x_t - np.sqrt(ab) * x0_hat) / np.sqrt(1.0 - ab)


def reverse_step(
    sched: DiffusionSchedule,
    params: SamplerParams,
    x0_hat: np.ndarray,
    eps_hat: np.ndarray,
    t_from: int,
    t_to: int,
    seed,
) -> np.ndarray:
    """One reverse update toward t_to < t_from:

    x_{t_to} = sqrt(ab') x0_hat + sqrt(1 - ab') (sqrt(1-zeta) eps_hat + sqrt(zeta) eps_new)

    zeta = 0 is fully deterministic; t_to = 0 returns x0_hat exactly.
    """
    _check_same_shape(x0_hat, eps_hat)
    if not 0 <= t_to < t_from:
        raise ValueError(f"need 0 <= t_to < t_from, got ({t_to}, {t_from})")
    ab = sched.alpha_bar(t_to)
    if t_to == 0:
        return np.array(x0_hat, dtype=np.float64, copy=True)
    zeta = params.zeta
    mixed = np.sqrt(1.0 - zeta) * eps_hat
    if zeta > 0.0:
        rng = np.random.default_rng(seed)
        mixed = mixed + np.sqrt(zeta) * rng.standard_normal(x0_hat.shape)
    return np.sqrt(ab) * x0_hat + np.sqrt(1.0 - ab) * mixed


def ddpm_step(sched: DiffusionSchedule, x_t: np.ndarray, eps_pred: np.ndarray, t: int, seed) -> np.ndarray:
    """Reference ancestral update:
    (1/sqrt(a_t)) (x_t - beta_t/sqrt(1-ab_t) eps_pred) + sqrt(beta_t) eps_new.

    Provided for comparison only; the sampler uses reverse_step.
    """
    _check_same_shape(x_t, eps_pred)
    a = sched.alpha(t)
    b = sched.beta(t)
    ab = sched.alpha_bar(t)
    mean = (x_t - b / np.sqrt(1.0 - ab) * eps_pred) / np.sqrt(a)
    if t == 1:
        return mean
    rng = np.random.default_rng(seed)
    return mean + np.sqrt(b) * rng.standard_normal(x_t.shape)


def timestep_ladder(t_start: int, step_count: int) -> list[int]:
    """Strictly decreasing timesteps from t_start to 1, evenly spaced with
    endpoints pinned, plus a terminal 0 for the final reverse target."""
    if t_start < 1 or not 1 <= step_count <= t_start:
        raise ValueError(
            f"need 1 <= step_count <= t_start, got ({step_count}, {t_start})"
        )
    if step_count == 1:
        return [t_start, 0]
    vals = np.round(np.linspace(t_start, 1, step_count)).astype(int)
    vals[0], vals[-1] = t_start, 1
    # Rounding can only tie adjacent entries; restore strict decrease.
    for k in range(1, step_count):
        if vals[k] >= vals[k - 1]:
            vals[k] = vals[k - 1] - 1
    if vals[-1] != 1:
        raise AssertionError("ladder endpoints lost during adjustment")
    return [int(v) for v in vals] + [0]
