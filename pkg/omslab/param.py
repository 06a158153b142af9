# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

"""Conversions between ε-, v- and x0-predictions and the angular view of DDIM.

With ``cos φ = √ᾱ`` and ``sin φ = √(1 − ᾱ)`` a noisy point, its noise and its
data form a rotation: ``x_t = cos φ·x0 + sin φ·ε`` and ``v = cos φ·ε − sin φ·x0``.
All functions broadcast over leading batch axes; ``abar`` may be a scalar or
an array broadcastable against the rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .error import InvalidArgumentError, SingularParameterizationError
from .kinds import PredType, normalize_pred_type


ArrayLike = np.ndarray | float


@dataclass(frozen=True, eq=False)
class Prediction:
    """A network output together with what it predicts."""

    kind: PredType
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", normalize_pred_type(self.kind))
        values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError(f"{self.kind.value} prediction must be finite")
        object.__setattr__(self, "values", values)


def _require_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise InvalidArgumentError(f"{what}: dimension mismatch {a.shape} vs {b.shape}")


def _abar(abar: ArrayLike) -> np.ndarray:
    value = np.asarray(abar, dtype=np.float64)
    if np.any(value < 0.0) or np.any(value > 1.0):
        raise InvalidArgumentError("abar must lie in [0, 1]")
    # a column vector lines up one ᾱ per batch row
    return value[:, None] if value.ndim == 1 else value


def _coefficients(abar: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    value = _abar(abar)
    return np.sqrt(value), np.sqrt(1.0 - value)


def v_from_x0_eps(x0: np.ndarray, eps: np.ndarray, abar: ArrayLike) -> np.ndarray:
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _require_same_shape(x0, eps, "v_from_x0_eps")
    cos_phi, sin_phi = _coefficients(abar)
    return cos_phi * eps - sin_phi * x0


def x0_from_v(xt: np.ndarray, v: np.ndarray, abar: ArrayLike) -> np.ndarray:
    xt = np.asarray(xt, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _require_same_shape(xt, v, "x0_from_v")
    cos_phi, sin_phi = _coefficients(abar)
    return cos_phi * xt - sin_phi * v


def x0_from_eps(xt: np.ndarray, eps: np.ndarray, abar: ArrayLike) -> np.ndarray:
    """Invert the forward mix for x0; undefined at ᾱ = 0."""

    xt = np.asarray(xt, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _require_same_shape(xt, eps, "x0_from_eps")
    cos_phi, sin_phi = _coefficients(abar)
    if np.any(cos_phi == 0.0):
        raise SingularParameterizationError(
            "x0 cannot be recovered from an epsilon prediction at alpha_bar = 0 "
            "(zero terminal SNR); use v or x0 prediction"
        )
    return (xt - sin_phi * eps) / cos_phi


def eps_from_v(zt: np.ndarray, v: np.ndarray, abar: ArrayLike) -> np.ndarray:
    zt = np.asarray(zt, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _require_same_shape(zt, v, "eps_from_v")
    cos_phi, sin_phi = _coefficients(abar)
    return sin_phi * zt + cos_phi * v


def eps_from_x0(xt: np.ndarray, x0: np.ndarray, abar: ArrayLike) -> np.ndarray:
    """ε consistent with ``(x_t, x0)``; undefined at ᾱ = 1."""

    xt = np.asarray(xt, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    _require_same_shape(xt, x0, "eps_from_x0")
    cos_phi, sin_phi = _coefficients(abar)
    if np.any(sin_phi == 0.0):
        raise SingularParameterizationError("epsilon is undefined at alpha_bar = 1")
    return (xt - cos_phi * x0) / sin_phi


def noisy_from_x0_eps(x0: np.ndarray, eps: np.ndarray, abar: ArrayLike) -> np.ndarray:
    """The forward mix ``√ᾱ·x0 + √(1 − ᾱ)·ε``."""

    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _require_same_shape(x0, eps, "noisy_from_x0_eps")
    cos_phi, sin_phi = _coefficients(abar)
    return cos_phi * x0 + sin_phi * eps


def phi_of(abar: float) -> float:
    """Angle φ in [0, π/2] with ``tan φ = √(1 − ᾱ)/√ᾱ``."""

    abar = float(abar)
    if not 0.0 <= abar <= 1.0:
        raise InvalidArgumentError(f"abar must lie in [0, 1], got {abar}")
    if abar == 0.0:
        return math.pi / 2.0
    return math.atan2(math.sqrt(1.0 - abar), math.sqrt(abar))


def ddim_rotate(z_phi: np.ndarray, v_hat: np.ndarray, delta: float) -> np.ndarray:
    """Move ``z_phi`` by ``delta`` radians toward the data axis along the circle spanned with ``v_hat``."""

    z_phi = np.asarray(z_phi, dtype=np.float64)
    v_hat = np.asarray(v_hat, dtype=np.float64)
    _require_same_shape(z_phi, v_hat, "ddim_rotate")
    return math.cos(delta) * z_phi - math.sin(delta) * v_hat


def split_prediction(xt: np.ndarray, pred: Prediction, abar: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Return the ``(x̃0, ε̂)`` pair consistent with ``x_t`` and *pred*.

    An ε-prediction at ᾱ = 0 raises :class:`SingularParameterizationError`.
    An x0-prediction at ᾱ = 1 returns ε̂ = 0 (the noise term has no weight).
    """

    xt = np.asarray(xt, dtype=np.float64)
    values = pred.values
    _require_same_shape(xt, values, "split_prediction")
    if pred.kind is PredType.EPSILON:
        return x0_from_eps(xt, values, abar), values
    if pred.kind is PredType.V:
        return x0_from_v(xt, values, abar), eps_from_v(xt, values, abar)
    cos_phi, sin_phi = _coefficients(abar)
    eps = np.zeros_like(xt)
    np.divide(xt - cos_phi * values, sin_phi, out=eps, where=np.broadcast_to(sin_phi > 0.0, xt.shape))
    return values, eps


def v_from_prediction(xt: np.ndarray, pred: Prediction, abar: ArrayLike) -> np.ndarray:
    if pred.kind is PredType.V:
        return pred.values
    x0, eps = split_prediction(xt, pred, abar)
    return v_from_x0_eps(x0, eps, abar)


__all__ = [
    "Prediction",
    "v_from_x0_eps",
    "x0_from_v",
    "x0_from_eps",
    "eps_from_v",
    "eps_from_x0",
    "noisy_from_x0_eps",
    "phi_of",
    "ddim_rotate",
    "split_prediction",
    "v_from_prediction",
]
