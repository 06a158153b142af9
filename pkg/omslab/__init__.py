# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

"""Noise-schedule diagnostics and the One-More-Step correction on toy data.

The package is a desk-scale laboratory: every schedule, parameterization,
sampler and metric is plain NumPy/SciPy, small enough to run on a laptop.
The ``omslab`` console script (see :mod:`omslab.cli`) wires the pieces into
artifact-producing commands.
"""

from __future__ import annotations

__version__ = "0.1.0"

from . import error as _error_module
from .batch import Batch
from .cache import clear_cache, get_cache_limit, set_cache_limit
from .config import configure, resolve_seed
from .diffusion import (
    DenoiserModel,
    GaussianOracleDenoiser,
    OmsModule,
    OracleOms,
    ToyDatasetSpec,
    TrainConfig,
    default_toy_spec,
    forward_sample,
    generate_dataset,
    load_model,
    oracle_oms,
    save_model,
    train_denoiser,
    train_oms,
)
from .error import ERRORS_BY_CODE, ERRORS_BY_MACRO, OmsError, OmsErrorCode
from .geometry import (
    RadiusReport,
    annulus_mass_check,
    empirical_radius,
    gaussian_radius,
    hemisphere_slab_check,
    radius_table,
    unit_sphere_measures,
)
from .kinds import ModelKind, OmsTarget, PredType, SamplerMethod, ScheduleKind
from .metrics import BiasReport, bias_report, mean_histogram, sample_means, wasserstein1
from .nn import DenseNet, adamw_update, net_backward, net_forward
from .param import (
    Prediction,
    ddim_rotate,
    eps_from_v,
    phi_of,
    v_from_x0_eps,
    x0_from_eps,
    x0_from_v,
)
from .sampler import SamplerConfig, cfg_combine, ddim_step, ddpm_step, oms_step, sample_pipeline
from .schedule import (
    Schedule,
    build_cosine_schedule,
    build_ldm_schedule,
    build_linear_schedule,
    build_schedule,
    rescale_zero_terminal,
    snr,
    terminal_kl,
)
from .threads import configure_thread_pool, parallel_map, shutdown_thread_pool


# Re-export every concrete error class (InvalidArgumentError, ...).
for _name in _error_module.__all__:
    globals()[_name] = getattr(_error_module, _name)


__all__ = [
    "__version__",
    "Batch",
    "Schedule",
    "ScheduleKind",
    "PredType",
    "OmsTarget",
    "ModelKind",
    "SamplerMethod",
    "Prediction",
    "DenseNet",
    "DenoiserModel",
    "OmsModule",
    "OracleOms",
    "GaussianOracleDenoiser",
    "ToyDatasetSpec",
    "TrainConfig",
    "SamplerConfig",
    "RadiusReport",
    "BiasReport",
    "OmsErrorCode",
    "ERRORS_BY_CODE",
    "ERRORS_BY_MACRO",
    "build_schedule",
    "build_ldm_schedule",
    "build_linear_schedule",
    "build_cosine_schedule",
    "rescale_zero_terminal",
    "snr",
    "terminal_kl",
    "v_from_x0_eps",
    "x0_from_v",
    "x0_from_eps",
    "eps_from_v",
    "phi_of",
    "ddim_rotate",
    "gaussian_radius",
    "empirical_radius",
    "radius_table",
    "annulus_mass_check",
    "hemisphere_slab_check",
    "unit_sphere_measures",
    "net_forward",
    "net_backward",
    "adamw_update",
    "default_toy_spec",
    "generate_dataset",
    "forward_sample",
    "train_denoiser",
    "train_oms",
    "oracle_oms",
    "save_model",
    "load_model",
    "cfg_combine",
    "ddpm_step",
    "ddim_step",
    "oms_step",
    "sample_pipeline",
    "sample_means",
    "mean_histogram",
    "wasserstein1",
    "bias_report",
    "configure",
    "resolve_seed",
    "configure_thread_pool",
    "shutdown_thread_pool",
    "parallel_map",
    "clear_cache",
    "set_cache_limit",
    "get_cache_limit",
]

for _name in _error_module.__all__:
    if _name not in __all__:
        __all__.append(_name)

del _name
