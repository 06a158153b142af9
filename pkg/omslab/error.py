# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

"""Exception hierarchy for OmsLab.

Every failure raised by the package derives from :class:`OmsError` and also
from the builtin exception that best describes it, so callers may catch either
``omslab.InvalidArgumentError`` or plain :class:`ValueError`.
"""

from __future__ import annotations

from enum import IntEnum
from typing import Dict, List, Type


__all__: List[str] = ["OmsError", "OmsErrorCode", "ERRORS_BY_CODE", "ERRORS_BY_MACRO"]
ERRORS_BY_CODE: Dict[int, Type["OmsError"]] = {}
ERRORS_BY_MACRO: Dict[str, Type["OmsError"]] = {}


class OmsErrorCode(IntEnum):
    """IntEnum exposing OmsLab error identifiers."""
    INVALID_ARGUMENT: int = 1
    SINGULAR_PARAMETERIZATION: int = 2
    CONFIG_VALIDATION: int = 3
    ARTIFACT_IO: int = 4
    USAGE: int = 5


class OmsError(Exception):
    """Base class for all OmsLab errors."""

    code: int = 0
    macro: str = "OMS_ERROR"

    @property
    def error_code(self) -> OmsErrorCode | None:
        try:
            return OmsErrorCode(self.code)
        except ValueError:
            return None


class InvalidArgumentError(OmsError, ValueError):
    """An argument is outside the operation's domain."""


class SingularParameterizationError(OmsError, ArithmeticError):
    """The requested conversion divides by √ᾱ = 0 (ε-prediction at zero SNR)."""


class ConfigValidationError(OmsError, ValueError):
    """A training, sampling or run configuration is internally inconsistent."""


class ArtifactIOError(OmsError, OSError):
    """Reading or writing an artifact failed; the message carries the path."""

    def __init__(self, path: object, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = str(path)


class UsageError(OmsError, ValueError):
    """Command-line usage error (exit code 2)."""


def _register(exc_type: Type[OmsError], member: OmsErrorCode) -> None:
    exc_type.code = int(member)
    exc_type.macro = f"OMS_ERROR_{member.name}"
    __all__.append(exc_type.__name__)
    ERRORS_BY_MACRO.setdefault(exc_type.macro, exc_type)
    ERRORS_BY_CODE.setdefault(exc_type.code, exc_type)


for _exc_type, _member in [
    (InvalidArgumentError, OmsErrorCode.INVALID_ARGUMENT),
    (SingularParameterizationError, OmsErrorCode.SINGULAR_PARAMETERIZATION),
    (ConfigValidationError, OmsErrorCode.CONFIG_VALIDATION),
    (ArtifactIOError, OmsErrorCode.ARTIFACT_IO),
    (UsageError, OmsErrorCode.USAGE),
]:
    _register(_exc_type, _member)

del _exc_type, _member
