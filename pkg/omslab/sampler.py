# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

"""Reverse-process samplers and the OMS pipeline.

:func:`sample_pipeline` draws pure noise ``x_T^S``, optionally runs one OMS
step that turns it into the data-adulterated latent the base model saw during
training, then walks the DDIM (or ancestral DDPM) chain down to ``x0``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Final, List, Protocol, Sequence, Tuple

import numpy as np

from .batch import Batch
from .error import ConfigValidationError, InvalidArgumentError, SingularParameterizationError
from .kinds import PredType, SamplerMethod, normalize_sampler_method
from .param import Prediction, split_prediction, v_from_prediction
from .schedule import Schedule
from .threads import block_ranges, block_rng, parallel_map


log = logging.getLogger(__name__)

CHAIN_BLOCK: Final[int] = 256
SAME_CONDITION: Final[str] = "same"
_ROUNDING_SLACK: Final[float] = 1e-12


class Denoiser(Protocol):
    schedule: Schedule
    pred_type: PredType

    @property
    def data_dim(self) -> int: ...

    def predict(self, x: np.ndarray, t: int, class_id: np.ndarray | int) -> Prediction: ...

    def digest(self) -> str: ...


class OmsPredictor(Protocol):
    @property
    def data_dim(self) -> int: ...

    def predict_v(self, x: np.ndarray, class_id: np.ndarray | int) -> np.ndarray: ...

    def digest(self) -> str: ...


def make_step_grid(T: int, steps: int) -> Tuple[int, ...]:
    """Strictly decreasing uniform grid from T down to 1 with at most *steps* entries."""

    if T < 1:
        raise InvalidArgumentError(f"T must be >= 1, got {T}")
    if T == 1:
        return (1,)
    if steps < 2:
        raise ConfigValidationError(f"steps must be >= 2 to span T..1, got {steps}")
    grid = np.unique(np.rint(np.linspace(T, 1, min(steps, T))).astype(np.int64))[::-1]
    return tuple(int(t) for t in grid)


@dataclass
class SamplerConfig:
    """Sampling settings; ``oms_condition`` is a class id or ``"same"`` (follow ``base_condition``)."""

    steps: int = 50
    step_grid: Tuple[int, ...] | None = None
    eta: float = 0.0
    omega_theta: float = 1.0
    omega_psi: float = 1.0
    oms_sigma: float = 0.0
    base_condition: int = 1
    oms_condition: int | str = SAME_CONDITION
    negative_condition: int = 0
    seed: int = 0
    method: SamplerMethod = SamplerMethod.DDIM

    def __post_init__(self) -> None:
        self.method = normalize_sampler_method(self.method)
        if isinstance(self.oms_condition, str) and self.oms_condition != SAME_CONDITION:
            try:
                self.oms_condition = int(self.oms_condition)
            except ValueError as exc:
                raise InvalidArgumentError(
                    f"oms_condition must be a class id or '{SAME_CONDITION}', got {self.oms_condition!r}"
                ) from exc
        if self.step_grid is not None:
            self.step_grid = tuple(int(t) for t in self.step_grid)

    @property
    def resolved_oms_condition(self) -> int:
        return self.base_condition if self.oms_condition == SAME_CONDITION else int(self.oms_condition)

    def resolve_grid(self, T: int) -> Tuple[int, ...]:
        if self.method is SamplerMethod.DDPM:
            return tuple(range(T, 0, -1))
        grid = self.step_grid if self.step_grid is not None else make_step_grid(T, self.steps)
        if not grid:
            raise ConfigValidationError("step grid is empty")
        if any(b >= a for a, b in zip(grid, grid[1:])):
            raise ConfigValidationError(f"step grid must be strictly decreasing, got {list(grid)}")
        if grid[0] > T or grid[-1] != 1:
            raise ConfigValidationError(f"step grid must lie within 1..{T} and end at 1")
        return grid

    def validate(self, schedule: Schedule, class_count: int | None = None) -> "SamplerConfig":
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigValidationError(f"eta must lie in [0, 1], got {self.eta}")
        if self.omega_theta < 0.0 or self.omega_psi < 0.0:
            raise ConfigValidationError("guidance weights must be >= 0")
        if self.oms_sigma < 0.0:
            raise ConfigValidationError(f"oms_sigma must be >= 0, got {self.oms_sigma}")
        if self.oms_sigma**2 > 1.0 - float(schedule.alpha_bars[-1]):
            raise ConfigValidationError("oms_sigma**2 must not exceed 1 - alpha_bar_T")
        conditions = (self.base_condition, self.resolved_oms_condition, self.negative_condition)
        if any(c < 0 for c in conditions):
            raise ConfigValidationError(f"conditions must be >= 0, got {conditions}")
        if class_count is not None and any(c >= class_count for c in conditions):
            raise ConfigValidationError(f"conditions {conditions} exceed the model's {class_count} classes")
        self.resolve_grid(schedule.T)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "steps": self.steps,
            "step_grid": None if self.step_grid is None else list(self.step_grid),
            "eta": self.eta,
            "omega_theta": self.omega_theta,
            "omega_psi": self.omega_psi,
            "oms_sigma": self.oms_sigma,
            "base_condition": self.base_condition,
            "oms_condition": self.oms_condition,
            "negative_condition": self.negative_condition,
            "seed": self.seed,
            "method": self.method.value,
        }


def cfg_combine(uncond: np.ndarray, cond: np.ndarray, omega: float) -> np.ndarray:
    """``uncond + ω·(cond − uncond)``; ω = 1 and ω = 0 return an input unchanged."""

    uncond = np.asarray(uncond, dtype=np.float64)
    cond = np.asarray(cond, dtype=np.float64)
    if uncond.shape != cond.shape:
        raise InvalidArgumentError(f"cfg_combine: dimension mismatch {uncond.shape} vs {cond.shape}")
    if omega == 1.0:
        return cond.copy()
    if omega == 0.0:
        return uncond.copy()
    return uncond + omega * (cond - uncond)


def posterior_mean(x0: np.ndarray, xt: np.ndarray, t: int, sched: Schedule) -> np.ndarray:
    """Mean of q(x_{t−1} | x_t, x0)."""

    ab_t = sched.alpha_bar(t)
    ab_prev = sched.alpha_bar(t - 1)
    beta = float(sched.betas[t - 1])
    alpha = float(sched.alphas[t - 1])
    return (math.sqrt(ab_prev) * beta / (1.0 - ab_t)) * np.asarray(x0) + (
        math.sqrt(alpha) * (1.0 - ab_prev) / (1.0 - ab_t)
    ) * np.asarray(xt)


def posterior_variance(t: int, sched: Schedule) -> float:
    """``(1 − ᾱ_{t−1})/(1 − ᾱ_t)·β_t`` with ᾱ_0 = 1."""

    return (1.0 - sched.alpha_bar(t - 1)) / (1.0 - sched.alpha_bar(t)) * float(sched.betas[t - 1])


def _add_noise(mean: np.ndarray, sigma: float, noise: np.ndarray | None) -> np.ndarray:
    if sigma == 0.0 or noise is None:
        return mean
    return mean + sigma * np.asarray(noise, dtype=np.float64)


def ddpm_step(xt: np.ndarray, eps_hat: np.ndarray, t: int, sched: Schedule, noise: np.ndarray | None) -> np.ndarray:
    """Ancestral step from an ε-prediction; the noise term vanishes at t = 1."""

    ab_t = sched.alpha_bar(t)
    if ab_t == 0.0:
        raise SingularParameterizationError(
            f"ancestral epsilon step is singular at t={t} where alpha_bar = 0; use a v-prediction"
        )
    alpha = float(sched.alphas[t - 1])
    mean = (np.asarray(xt) - (1.0 - alpha) / math.sqrt(1.0 - ab_t) * np.asarray(eps_hat)) / math.sqrt(alpha)
    if t == 1:
        return mean
    return _add_noise(mean, math.sqrt(posterior_variance(t, sched)), noise)


def ddpm_v_step(xt: np.ndarray, v_hat: np.ndarray, t: int, sched: Schedule, noise: np.ndarray | None) -> np.ndarray:
    """Ancestral step written in v-form, valid at ᾱ_t = 0."""

    ab_t = sched.alpha_bar(t)
    ab_prev = sched.alpha_bar(t - 1)
    alpha = float(sched.alphas[t - 1])
    beta = float(sched.betas[t - 1])
    mean = math.sqrt(alpha) * np.asarray(xt) - (math.sqrt(ab_prev) * beta / math.sqrt(1.0 - ab_t)) * np.asarray(v_hat)
    if t == 1:
        return mean
    return _add_noise(mean, math.sqrt(posterior_variance(t, sched)), noise)


def ddim_sigma(ab_t: float, ab_prev: float, eta: float) -> float:
    if eta == 0.0:
        return 0.0
    return eta * math.sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * math.sqrt(1.0 - ab_t / ab_prev)


def ddim_step(
    xt: np.ndarray,
    pred: Prediction,
    t: int,
    t_prev: int,
    sched: Schedule,
    eta: float = 0.0,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """``√ᾱ_prev·x̃0 + √(1 − ᾱ_prev − σ²)·ε̂ + σ·noise``; ``t_prev = 0`` returns the clean estimate."""

    if not t > t_prev >= 0:
        raise InvalidArgumentError(f"ddim_step needs t > t_prev >= 0, got t={t}, t_prev={t_prev}")
    ab_t = sched.alpha_bar(t)
    ab_prev = sched.alpha_bar(t_prev)
    x0, eps = split_prediction(xt, pred, ab_t)
    sigma = ddim_sigma(ab_t, ab_prev, eta)
    remaining = 1.0 - ab_prev - sigma * sigma
    if remaining < -_ROUNDING_SLACK:
        raise InvalidArgumentError(f"sigma**2 ({sigma * sigma}) exceeds 1 - alpha_bar_prev ({1.0 - ab_prev})")
    out = math.sqrt(ab_prev) * x0 + math.sqrt(max(remaining, 0.0)) * eps
    return _add_noise(out, sigma, noise)


def v_terminal_step(
    xT: np.ndarray,
    v_hat: np.ndarray,
    sched: Schedule,
    sigma_T: float = 0.0,
    noise: np.ndarray | None = None,
    *,
    assume_zero_snr: bool = False,
) -> np.ndarray:
    """First reverse step at SNR 0: ``−√ᾱ_{T−1}·v̂ + σ_T·noise``.

    *xT* carries no information at SNR 0 and only fixes the output shape.
    """

    if sched.alpha_bars[-1] != 0.0 and not assume_zero_snr:
        raise InvalidArgumentError("v_terminal_step needs a zero-terminal-SNR schedule (or assume_zero_snr=True)")
    v_hat = np.asarray(v_hat, dtype=np.float64)
    if np.shape(xT) != v_hat.shape:
        raise InvalidArgumentError(f"v_terminal_step: dimension mismatch {np.shape(xT)} vs {v_hat.shape}")
    return _add_noise(-math.sqrt(sched.alpha_bar(sched.T - 1)) * v_hat, sigma_T, noise)


def oms_step(
    xTS: np.ndarray,
    v_hat: np.ndarray,
    sched: Schedule,
    sigma: float = 0.0,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Map pure noise to the training-time terminal latent: ``√ᾱ_T·x̃0 + √(1 − ᾱ_T − σ²)·x_T^S + σ·noise``."""

    xTS = np.asarray(xTS, dtype=np.float64)
    v_hat = np.asarray(v_hat, dtype=np.float64)
    if xTS.shape != v_hat.shape:
        raise InvalidArgumentError(f"oms_step: dimension mismatch {xTS.shape} vs {v_hat.shape}")
    ab_T = float(sched.alpha_bars[-1])
    remaining = 1.0 - ab_T - sigma * sigma
    if sigma < 0.0 or remaining < 0.0:
        raise InvalidArgumentError(f"oms sigma**2 ({sigma * sigma}) exceeds 1 - alpha_bar_T ({1.0 - ab_T})")
    out = math.sqrt(ab_T) * -v_hat + math.sqrt(remaining) * xTS
    return _add_noise(out, sigma, noise)


def oms_stage(
    oms: OmsPredictor,
    x_ts: np.ndarray,
    config: SamplerConfig,
    sched: Schedule,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """ψ under OMS guidance (ω_ψ over ``oms_condition`` vs ``negative_condition``) followed by :func:`oms_step`."""

    v_hat = oms.predict_v(x_ts, config.resolved_oms_condition)
    if config.omega_psi != 1.0:
        v_uncond = oms.predict_v(x_ts, config.negative_condition)
        v_hat = cfg_combine(v_uncond, v_hat, config.omega_psi)
    return oms_step(x_ts, v_hat, sched, config.oms_sigma, noise)


def guided_prediction(denoiser: Denoiser, x: np.ndarray, t: int, config: SamplerConfig) -> Prediction:
    cond = denoiser.predict(x, t, config.base_condition)
    if config.omega_theta == 1.0:
        return cond
    uncond = denoiser.predict(x, t, config.negative_condition)
    return Prediction(cond.kind, cfg_combine(uncond.values, cond.values, config.omega_theta))


def _run_chain(
    denoiser: Denoiser,
    oms: OmsPredictor | None,
    config: SamplerConfig,
    grid: Sequence[int],
    count: int,
    index: int,
) -> np.ndarray:
    sched = denoiser.schedule
    rng = block_rng(config.seed, "sample", (config.base_condition, index))
    dim = denoiser.data_dim
    x = rng.standard_normal((count, dim))
    oms_noise = rng.standard_normal((count, dim))
    if oms is not None:
        x = oms_stage(oms, x, config, sched, oms_noise)

    if config.method is SamplerMethod.DDPM:
        for t in grid:
            noise = rng.standard_normal((count, dim))
            pred = guided_prediction(denoiser, x, t, config)
            if pred.kind is PredType.EPSILON:
                x = ddpm_step(x, pred.values, t, sched, noise)
            else:
                x = ddpm_v_step(x, v_from_prediction(x, pred, sched.alpha_bar(t)), t, sched, noise)
        return x

    for position, t in enumerate(grid):
        t_prev = grid[position + 1] if position + 1 < len(grid) else 0
        noise = rng.standard_normal((count, dim))
        pred = guided_prediction(denoiser, x, t, config)
        x = ddim_step(x, pred, t, t_prev, sched, config.eta, noise)
    return x


def sample_pipeline(
    denoiser: Denoiser,
    oms: OmsPredictor | None,
    n: int,
    config: SamplerConfig,
    *,
    workers: int | None = None,
) -> Batch:
    """Generate *n* samples for ``config.base_condition``.

    Chains run in fixed blocks of :data:`CHAIN_BLOCK` seeded by
    ``(seed, base_condition, block)``; every block draws its OMS noise even when *oms* is
    absent, so runs with and without OMS share all other randomness.
    """

    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if oms is not None and oms.data_dim != denoiser.data_dim:
        raise InvalidArgumentError(f"OMS dimension {oms.data_dim} != denoiser dimension {denoiser.data_dim}")
    counts = [c for c in (getattr(denoiser, "class_count", None), getattr(oms, "class_count", None)) if c is not None]
    config.validate(denoiser.schedule, min(counts) if counts else None)
    grid = config.resolve_grid(denoiser.schedule.T)
    log.info(
        "sampling %d chains for class %d over %d steps (%s, oms=%s)",
        n, config.base_condition, len(grid), config.method.value, oms is not None,
    )

    tasks = list(enumerate(block_ranges(n, CHAIN_BLOCK)))
    blocks = parallel_map(
        lambda task: _run_chain(denoiser, oms, config, grid, task[1][1] - task[1][0], task[0]),
        tasks,
        workers=workers,
    )
    return Batch.uniform(np.concatenate(blocks, axis=0), config.base_condition)


def oms_latents(oms: OmsPredictor, n: int, dim: int, config: SamplerConfig, sched: Schedule) -> Tuple[np.ndarray, np.ndarray]:
    """The ``(x_T^S, x̃_T^T)`` pairs the pipeline would use, for inspecting the OMS stage alone."""

    starts: List[np.ndarray] = []
    outs: List[np.ndarray] = []
    for index, (start, stop) in enumerate(block_ranges(n, CHAIN_BLOCK)):
        rng = block_rng(config.seed, "sample", (config.base_condition, index))
        x = rng.standard_normal((stop - start, dim))
        noise = rng.standard_normal((stop - start, dim))
        starts.append(x)
        outs.append(oms_stage(oms, x, config, sched, noise))
    return np.concatenate(starts), np.concatenate(outs)


def sampler_manifest(config: SamplerConfig, denoiser: Denoiser, oms: OmsPredictor | None, n: int) -> Dict[str, Any]:
    return {
        "sampler": config.to_dict(),
        "step_grid": list(config.resolve_grid(denoiser.schedule.T)),
        "n": n,
        "denoiser_sha256": denoiser.digest(),
        "oms_sha256": None if oms is None else oms.digest(),
    }


__all__ = [
    "CHAIN_BLOCK",
    "SAME_CONDITION",
    "SamplerConfig",
    "make_step_grid",
    "cfg_combine",
    "posterior_mean",
    "posterior_variance",
    "ddpm_step",
    "ddpm_v_step",
    "ddim_sigma",
    "ddim_step",
    "v_terminal_step",
    "oms_step",
    "oms_stage",
    "guided_prediction",
    "sample_pipeline",
    "oms_latents",
    "sampler_manifest",
]
