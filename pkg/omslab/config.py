# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

"""Process-wide defaults, seed resolution and JSON config files.

Precedence for every tunable is: explicit argument / command-line flag, then
the ``--config`` file, then the built-in default. Seeds additionally fall
back to ``OMS_LAB_SEED`` before the default.
"""

from __future__ import annotations

import os
from typing import Any, Dict, Final, Mapping

from .error import ConfigValidationError
from .threads import configure_thread_pool, get_thread_pool_size


SEED_ENV: Final[str] = "OMS_LAB_SEED"
_SEED_MAX: Final[int] = 2**64 - 1

_DEFAULT_SEED: int = 0


def _coerce_seed(value: Any, source: str) -> int:
    try:
        seed = int(str(value).strip(), 0) if isinstance(value, str) else int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigValidationError(f"{source}: seed must be an integer, got {value!r}") from exc
    if isinstance(value, bool) or seed < 0 or seed > _SEED_MAX:
        raise ConfigValidationError(f"{source}: seed must be in [0, 2**64), got {value!r}")
    return seed


def resolve_seed(seed: int | str | None = None) -> int:
    """Return *seed* if given, else ``$OMS_LAB_SEED``, else the configured default."""

    if seed is not None:
        return _coerce_seed(seed, "seed")
    env_value = os.getenv(SEED_ENV)
    if env_value is not None and env_value.strip() != "":
        return _coerce_seed(env_value, SEED_ENV)
    return _DEFAULT_SEED


def configure(*, workers: int | None = None, seed: int | None = None) -> Dict[str, int]:
    """Adjust global defaults.

    Returns the effective settings after applying any updates.
    """

    global _DEFAULT_SEED

    if seed is not None:
        _DEFAULT_SEED = _coerce_seed(seed, "seed")
    if workers is not None:
        try:
            configure_thread_pool(max_workers=workers)
        except ValueError as exc:
            raise ConfigValidationError(str(exc)) from exc

    return {"workers": get_thread_pool_size(), "seed": _DEFAULT_SEED}


def load_config_file(path: str | os.PathLike[str]) -> Dict[str, Any]:
    """Read a JSON object of option values keyed by their long flag names."""

    from .io import read_json

    payload = read_json(path)
    if not isinstance(payload, dict):
        raise ConfigValidationError(f"{path}: config file must hold a JSON object")
    return {str(key).replace("-", "_"): value for key, value in payload.items()}


def merge_settings(
    defaults: Mapping[str, Any],
    file_values: Mapping[str, Any] | None = None,
    flag_values: Mapping[str, Any] | None = None,
) -> Dict[str, Any]:
    """Layer config-file values over defaults and explicit flags over both.

    ``None`` in *flag_values* means "not given on the command line".
    """

    merged = dict(defaults)
    for key, value in (file_values or {}).items():
        merged[key] = value
    for key, value in (flag_values or {}).items():
        if value is not None:
            merged[key] = value
    return merged


__all__ = [
    "SEED_ENV",
    "resolve_seed",
    "configure",
    "load_config_file",
    "merge_settings",
]
