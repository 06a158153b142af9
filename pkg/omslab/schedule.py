# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

"""Discrete variance-preserving noise schedules.

Timesteps are 1-based, ``t in 1..T``. ``alpha_bar(0)`` is the virtual
boundary value 1 used by reverse steps that land on clean data.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Final, Mapping

import numpy as np

from .cache import cached_schedule
from .error import InvalidArgumentError
from .kinds import ScheduleKind, normalize_schedule_kind


log = logging.getLogger(__name__)

LDM_BETA_START: Final[float] = 0.00085
LDM_BETA_END: Final[float] = 0.012
LINEAR_BETA_START: Final[float] = 1e-4
LINEAR_BETA_END: Final[float] = 0.02
COSINE_OFFSET: Final[float] = 0.008
COSINE_BETA_CLIP: Final[float] = 0.999

_RESCALED_PREFIX: Final[str] = "rescaled("


def _readonly(values: np.ndarray) -> np.ndarray:
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class Schedule:
    """Immutable VP schedule. ``alphas`` and ``alpha_bars`` derive from ``betas``."""

    kind: ScheduleKind
    betas: np.ndarray
    params: Dict[str, float] = field(default_factory=dict)
    rescaled: bool = False
    alphas: np.ndarray = field(init=False, repr=False)
    alpha_bars: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", normalize_schedule_kind(self.kind))
        betas = np.array(self.betas, dtype=np.float64, copy=True).reshape(-1)
        alphas = 1.0 - betas
        object.__setattr__(self, "betas", _readonly(betas))
        object.__setattr__(self, "alphas", _readonly(alphas))
        object.__setattr__(self, "alpha_bars", _readonly(np.cumprod(alphas)))
        object.__setattr__(self, "params", {str(k): float(v) for k, v in dict(self.params).items()})
        _verify(self)

    @property
    def T(self) -> int:
        return int(self.betas.shape[0])

    @property
    def tag(self) -> str:
        name = self.kind.value
        return f"{_RESCALED_PREFIX}{name})" if self.rescaled else name

    def alpha_bar(self, t: int) -> float:
        """ᾱ_t with the boundary convention ᾱ_0 = 1."""

        t = int(t)
        if t == 0:
            return 1.0
        if not 1 <= t <= self.T:
            raise InvalidArgumentError(f"timestep must be in [0, {self.T}], got {t}")
        return float(self.alpha_bars[t - 1])

    def snr_values(self) -> np.ndarray:
        ab = self.alpha_bars
        out = np.zeros_like(ab)
        np.divide(ab, 1.0 - ab, out=out, where=ab > 0)
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.tag,
            "T": self.T,
            "params": dict(self.params),
            "betas": [float(b) for b in self.betas],
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "Schedule":
        try:
            tag = str(payload["kind"])
            steps = int(payload["T"])
            betas = np.asarray(payload["betas"], dtype=np.float64)
            params = dict(payload.get("params") or {})
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"malformed schedule payload: {exc}") from exc
        rescaled = tag.startswith(_RESCALED_PREFIX) and tag.endswith(")")
        inner = tag[len(_RESCALED_PREFIX):-1] if rescaled else tag
        if betas.shape != (steps,):
            raise InvalidArgumentError(f"schedule declares T={steps} but carries {betas.size} betas")
        return cls(kind=inner, betas=betas, params=params, rescaled=rescaled)

    def key(self) -> tuple:
        return (self.tag, self.T, tuple(sorted(self.params.items())))


def _verify(sched: Schedule) -> None:
    betas = sched.betas
    ab = sched.alpha_bars
    if betas.size < 1:
        raise InvalidArgumentError("schedule needs at least one step")
    if not np.all(np.isfinite(betas)) or np.any(betas <= 0.0) or np.any(betas > 1.0):
        raise InvalidArgumentError("betas must lie in (0, 1]")
    if np.any(np.diff(ab) >= 0.0):
        raise InvalidArgumentError("alpha_bars must be strictly decreasing")
    if ab[0] >= 1.0:
        raise InvalidArgumentError("alpha_bars must lie in [0, 1)")
    if sched.rescaled:
        if ab[-1] != 0.0 or betas[-1] != 1.0:
            raise InvalidArgumentError("rescaled schedule must end with alpha_bar = 0 and beta = 1")
    else:
        if np.any(betas[:-1] >= 1.0) or ab[-1] <= 0.0:
            raise InvalidArgumentError("only a rescaled schedule may reach alpha_bar = 0")


def _require_steps(T: int, minimum: int = 2) -> int:
    try:
        steps = int(T)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"T must be an integer, got {T!r}") from exc
    if steps < minimum:
        raise InvalidArgumentError(f"T must be >= {minimum}, got {steps}")
    return steps


def build_ldm_schedule(T: int) -> Schedule:
    """Scaled-linear schedule: linear in √β between 0.00085 and 0.012."""

    steps = _require_steps(T)
    t = np.arange(1, steps + 1, dtype=np.float64)
    root = (
        math.sqrt(LDM_BETA_START) * (steps - t) / (steps - 1)
        + math.sqrt(LDM_BETA_END) * (t - 1) / (steps - 1)
    )
    return Schedule(ScheduleKind.LDM, root**2)


def build_linear_schedule(
    T: int,
    beta_start: float = LINEAR_BETA_START,
    beta_end: float = LINEAR_BETA_END,
) -> Schedule:
    steps = _require_steps(T)
    beta_start = float(beta_start)
    beta_end = float(beta_end)
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise InvalidArgumentError(
            f"linear schedule needs 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )
    return Schedule(
        ScheduleKind.LINEAR,
        np.linspace(beta_start, beta_end, steps, dtype=np.float64),
        params={"beta_start": beta_start, "beta_end": beta_end},
    )


def build_cosine_schedule(
    T: int,
    s: float = COSINE_OFFSET,
    beta_clip: float = COSINE_BETA_CLIP,
) -> Schedule:
    steps = _require_steps(T, minimum=1)
    s = float(s)
    beta_clip = float(beta_clip)
    if s <= 0.0:
        raise InvalidArgumentError(f"cosine offset s must be > 0, got {s}")
    if not 0.0 < beta_clip < 1.0:
        raise InvalidArgumentError(f"beta_clip must lie in (0, 1), got {beta_clip}")
    u = np.arange(0, steps + 1, dtype=np.float64)
    f = np.cos(((u / steps + s) / (1.0 + s)) * (math.pi / 2.0)) ** 2
    ab = f / f[0]
    betas = np.minimum(1.0 - ab[1:] / ab[:-1], beta_clip)
    return Schedule(ScheduleKind.COSINE, betas, params={"s": s, "beta_clip": beta_clip})


def snr(sched: Schedule, t: int) -> float:
    """ᾱ_t / (1 − ᾱ_t), exactly 0 when ᾱ_t = 0."""

    t = int(t)
    if not 1 <= t <= sched.T:
        raise InvalidArgumentError(f"timestep must be in [1, {sched.T}], got {t}")
    ab = sched.alpha_bar(t)
    if ab == 0.0:
        return 0.0
    return ab / (1.0 - ab)


def rescale_zero_terminal(sched: Schedule) -> Schedule:
    """Shift and scale √ᾱ so the last step reaches ᾱ_T = 0 while ᾱ_1 is kept."""

    if sched.alpha_bars[-1] <= 0.0:
        raise InvalidArgumentError("schedule already has zero terminal SNR; refusing to rescale again")
    if sched.T < 2:
        raise InvalidArgumentError("rescaling needs T >= 2")

    u = np.sqrt(sched.alpha_bars)
    u_first, u_last = u[0], u[-1]
    u = (u - u_last) * (u_first / (u_first - u_last))
    ab = u**2
    ab[-1] = 0.0
    betas = np.empty_like(ab)
    betas[0] = sched.betas[0]
    betas[1:] = 1.0 - ab[1:] / ab[:-1]
    betas[-1] = 1.0
    log.debug("rescaled %s schedule to zero terminal SNR", sched.tag)
    return Schedule(sched.kind, betas, params=sched.params, rescaled=True)


def terminal_kl(sched: Schedule, x0: np.ndarray) -> float | np.ndarray:
    """KL(q(x_T | x0) ‖ N(0, I)) in nats; one value per row for a 2-D input."""

    ab = float(sched.alpha_bars[-1])
    if ab >= 1.0:
        raise InvalidArgumentError("terminal_kl is undefined for alpha_bar_T = 1")
    x = np.asarray(x0, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] < 1:
        raise InvalidArgumentError("x0 must have dimension >= 1")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("x0 must be finite")
    dim = x.shape[-1]
    variance_term = dim * (-ab - math.log1p(-ab))
    kl = 0.5 * (variance_term + ab * np.sum(x * x, axis=-1))
    return float(kl) if np.ndim(kl) == 0 else kl


_BUILDERS = {
    ScheduleKind.LINEAR: build_linear_schedule,
    ScheduleKind.COSINE: build_cosine_schedule,
    ScheduleKind.LDM: build_ldm_schedule,
}


def build_schedule(kind: ScheduleKind | str, T: int, *, rescale: bool = False, **params: float) -> Schedule:
    """Build (or fetch from the schedule cache) a schedule by kind name."""

    resolved = normalize_schedule_kind(kind)
    key = (resolved.value, int(T), tuple(sorted((k, float(v)) for k, v in params.items())), bool(rescale))

    def factory() -> Schedule:
        sched = _BUILDERS[resolved](T, **params)
        return rescale_zero_terminal(sched) if rescale else sched

    return cached_schedule(key, factory)


def schedule_summary(sched: Schedule) -> Dict[str, float]:
    """Terminal diagnostics printed by the ``schedule`` command."""

    ab = float(sched.alpha_bars[-1])
    return {
        "T": sched.T,
        "snr_T": snr(sched, sched.T),
        "sqrt_alpha_bar_T": math.sqrt(ab),
        "sqrt_one_minus_alpha_bar_T": math.sqrt(1.0 - ab),
        "terminal_kl_unit": float(terminal_kl(sched, np.ones(1))),
    }


__all__ = [
    "Schedule",
    "build_ldm_schedule",
    "build_linear_schedule",
    "build_cosine_schedule",
    "build_schedule",
    "snr",
    "rescale_zero_terminal",
    "terminal_kl",
    "schedule_summary",
]
