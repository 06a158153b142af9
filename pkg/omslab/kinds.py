# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

"""String enums naming schedule kinds, prediction targets and model options."""

from __future__ import annotations

from enum import Enum
from typing import Type, TypeVar

from .error import InvalidArgumentError


E = TypeVar("E", bound=Enum)


class ScheduleKind(str, Enum):
    """Discrete VP noise schedule families."""

    LINEAR = "linear"
    COSINE = "cosine"
    LDM = "ldm"


class PredType(str, Enum):
    """What a network output represents."""

    EPSILON = "epsilon"
    V = "v"
    X0 = "x0"


class Activation(str, Enum):
    SILU = "silu"
    RELU = "relu"


class OmsTarget(str, Enum):
    """Training target of the OMS module.

    ``V`` regresses ``v = -x0`` directly; ``X0`` regresses ``x0`` and the
    module negates its output when asked for a v-prediction.
    """

    V = "v"
    X0 = "x0"


class ModelKind(str, Enum):
    DENOISER = "denoiser"
    OMS = "oms"


class SamplerMethod(str, Enum):
    DDIM = "ddim"
    DDPM = "ddpm"


def _normalize(enum_type: Type[E], value: E | str, what: str) -> E:
    if isinstance(value, enum_type):
        return value
    try:
        return enum_type(str(value).lower())
    except ValueError as exc:
        allowed = ", ".join(repr(member.value) for member in enum_type)
        raise InvalidArgumentError(f"{what} must be one of {allowed}, got {value!r}") from exc


def normalize_schedule_kind(value: ScheduleKind | str) -> ScheduleKind:
    return _normalize(ScheduleKind, value, "schedule kind")


def normalize_pred_type(value: PredType | str) -> PredType:
    return _normalize(PredType, value, "pred_type")


def normalize_activation(value: Activation | str) -> Activation:
    return _normalize(Activation, value, "activation")


def normalize_oms_target(value: OmsTarget | str) -> OmsTarget:
    return _normalize(OmsTarget, value, "oms target")


def normalize_model_kind(value: ModelKind | str) -> ModelKind:
    return _normalize(ModelKind, value, "model kind")


def normalize_sampler_method(value: SamplerMethod | str) -> SamplerMethod:
    return _normalize(SamplerMethod, value, "sampler method")


__all__ = [
    "ScheduleKind",
    "PredType",
    "Activation",
    "OmsTarget",
    "ModelKind",
    "SamplerMethod",
    "normalize_schedule_kind",
    "normalize_pred_type",
    "normalize_activation",
    "normalize_oms_target",
    "normalize_model_kind",
    "normalize_sampler_method",
]
