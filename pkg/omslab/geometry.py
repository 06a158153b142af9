# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

"""High-dimensional Gaussian diagnostics.

Radius estimates compare the training-time terminal latent (which still
carries ``√ᾱ_T·x0``) with the pure noise a sampler starts from. The
concentration checks verify the annulus and hemisphere-slab tail bounds that
explain why both populations sit on thin shells.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Final, Iterable, List, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from .batch import Batch
from .error import InvalidArgumentError
from .io import format_sig, render_csv
from .schedule import Schedule, snr
from .threads import block_ranges, block_rng, parallel_map


log = logging.getLogger(__name__)

RADIUS_CSV_HEADER: Final[Tuple[str, ...]] = (
    "schedule", "snr_T", "r_train", "r_sample", "delta_r", "dim", "n", "seed",
)
_BLOCK_FLOATS: Final[int] = 1 << 21
_TAIL_BLOCK: Final[int] = 1 << 14


@dataclass(frozen=True)
class RadiusReport:
    schedule_name: str
    snr_terminal: float
    r_train: float
    r_sample: float
    delta_r: float
    dim: int
    n_samples: int
    seed: int
    data_dependent: bool = False

    def __post_init__(self) -> None:
        if self.r_train <= 0.0 or self.r_sample <= 0.0:
            raise InvalidArgumentError("radii must be positive")
        if self.delta_r != self.r_sample - self.r_train:
            raise InvalidArgumentError("delta_r must equal r_sample - r_train")

    def csv_row(self) -> List[str]:
        return [
            self.schedule_name,
            format_sig(self.snr_terminal),
            format_sig(self.r_train),
            format_sig(self.r_sample),
            format_sig(self.delta_r),
            str(self.dim),
            str(self.n_samples),
            str(self.seed),
        ]


@dataclass(frozen=True)
class AnnulusCheck:
    fraction_outside: float
    bound: float
    dim: int
    c: float
    n: int

    @property
    def holds(self) -> bool:
        return self.fraction_outside <= self.bound


@dataclass(frozen=True)
class SlabCheck:
    fraction_above: float
    bound: float
    dim: int
    c: float
    n: int

    @property
    def holds(self) -> bool:
        return self.fraction_above <= self.bound


@dataclass(frozen=True)
class SphereMeasures:
    area: float
    volume: float


def gaussian_radius(sigma: float, dim: int) -> float:
    """Concentration radius ``σ·√d`` of an isotropic Gaussian."""

    if sigma <= 0.0:
        raise InvalidArgumentError(f"sigma must be > 0, got {sigma}")
    if int(dim) < 1:
        raise InvalidArgumentError(f"dim must be >= 1, got {dim}")
    return float(sigma) * math.sqrt(int(dim))


def empirical_radius(samples: np.ndarray | Batch | Iterable[np.ndarray]) -> float:
    """√(mean ‖x‖²) over an array, a :class:`Batch` or an iterable of row chunks."""

    if isinstance(samples, Batch):
        chunks: Iterable[np.ndarray] = [samples.values]
    elif isinstance(samples, np.ndarray):
        chunks = [samples]
    else:
        chunks = samples

    total = 0.0
    count = 0
    for chunk in chunks:
        rows = np.asarray(chunk, dtype=np.float64)
        if rows.ndim == 1:
            rows = rows.reshape(1, -1)
        if rows.shape[0] == 0:
            continue
        total += float(np.einsum("ij,ij->", rows, rows))
        count += rows.shape[0]
    if count == 0:
        raise InvalidArgumentError("empirical_radius needs at least one sample")
    return math.sqrt(total / count)


def _pair_statistics(data: np.ndarray, pairs: int, seed: int, workers: int | None) -> Tuple[float, float, float]:
    """Sums of ``m·‖z‖²``, ``m·‖x0‖²`` and the unpaired ``x0·z`` over antithetic pairs.

    Pair ``k`` contributes ``(x0_k, z_k)`` and ``(x0_k, -z_k)``; the cross terms
    of a full pair cancel, so only an unpaired tail member keeps its ``x0·z``.
    """

    dim = data.shape[1]
    per_block = max(1, _BLOCK_FLOATS // dim)

    def run_block(task: Tuple[int, Tuple[int, int]]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        index, (start, stop) = task
        rng = block_rng(seed, "radius", index)
        picks = rng.integers(0, data.shape[0], size=stop - start)
        z = rng.standard_normal((stop - start, dim))
        x0 = data[picks]
        return (
            np.einsum("ij,ij->i", z, z),
            np.einsum("ij,ij->i", x0, x0),
            np.einsum("ij,ij->i", x0, z),
        )

    tasks = list(enumerate(block_ranges(pairs, per_block)))
    results = parallel_map(run_block, tasks, workers=workers)
    zz = np.concatenate([r[0] for r in results])
    xx = np.concatenate([r[1] for r in results])
    xz = np.concatenate([r[2] for r in results])
    return zz, xx, xz


def radius_table(
    schedules: Sequence[Schedule],
    data: Batch | np.ndarray,
    n: int = 20000,
    seed: int = 0,
    *,
    workers: int | None = None,
    data_dependent: bool = False,
) -> List[RadiusReport]:
    """Estimate the train-time and sample-time terminal radii for every schedule.

    Every schedule is evaluated on the same noise draws, and the sample-time
    population is those same noise vectors. The draws are antithetic: each
    ``(x0, z)`` is also used as ``(x0, -z)``, so the ``x0·z`` cross term of
    ``‖x_T‖²`` cancels over a pair. Both radii keep their expectation; only the
    Monte-Carlo spread of ``r_train`` shrinks compared with ``n`` independent
    pairs. An odd ``n`` leaves the last draw unpaired.
    """

    values = data.values if isinstance(data, Batch) else np.asarray(data, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] == 0:
        raise InvalidArgumentError("radius_table needs a non-empty data batch")
    if int(n) < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    n = int(n)
    dim = values.shape[1]
    pairs = (n + 1) // 2

    zz, xx, xz = _pair_statistics(values, pairs, seed, workers)
    weight = np.full(pairs, 2.0)
    cross = np.zeros(pairs)
    if n % 2:
        weight[-1] = 1.0
        cross[-1] = xz[-1]
    sum_zz = float(np.dot(weight, zz))
    sum_xx = float(np.dot(weight, xx))
    sum_xz = float(np.sum(cross))
    r_sample = math.sqrt(sum_zz / n)

    reports = []
    for sched in schedules:
        ab = float(sched.alpha_bars[-1])
        a, b = math.sqrt(ab), math.sqrt(1.0 - ab)
        r_train = math.sqrt(max((ab * sum_xx + (1.0 - ab) * sum_zz + 2.0 * a * b * sum_xz) / n, 0.0))
        reports.append(
            RadiusReport(
                schedule_name=sched.tag,
                snr_terminal=snr(sched, sched.T),
                r_train=r_train,
                r_sample=r_sample,
                delta_r=r_sample - r_train,
                dim=dim,
                n_samples=n,
                seed=int(seed),
                data_dependent=data_dependent,
            )
        )
        log.info("radius %s: r_train=%.6f r_sample=%.6f", sched.tag, r_train, r_sample)
    return reports


def radius_table_csv(reports: Sequence[RadiusReport]) -> str:
    return render_csv(RADIUS_CSV_HEADER, (report.csv_row() for report in reports))


def synthetic_data(dim: int, second_moment: float = 1.0, rows: int = 64, seed: int = 0) -> Batch:
    """Zero-mean random-sign rows whose per-dimension second moment is exactly *second_moment*."""

    if dim < 1 or rows < 1:
        raise InvalidArgumentError("synthetic data needs dim >= 1 and rows >= 1")
    if second_moment < 0.0:
        raise InvalidArgumentError("second_moment must be >= 0")
    rng = block_rng(seed, "synthetic")
    signs = rng.integers(0, 2, size=(rows, dim)) * 2.0 - 1.0
    return Batch.uniform(signs * math.sqrt(second_moment), 0)


def _squared_norms(dim: int, n: int, seed: int, stream: str, method: str, workers: int | None) -> np.ndarray:
    """Squared norms of *n* standard-normal *dim*-vectors, drawn in fixed blocks."""

    if method not in {"chisquare", "vectors"}:
        raise InvalidArgumentError(f"method must be 'chisquare' or 'vectors', got {method!r}")

    def run_block(task: Tuple[int, Tuple[int, int]]) -> np.ndarray:
        index, (start, stop) = task
        rng = block_rng(seed, stream, index)
        if method == "chisquare":
            return rng.chisquare(dim, size=stop - start)
        x = rng.standard_normal((stop - start, dim))
        return np.einsum("ij,ij->i", x, x)

    tasks = list(enumerate(block_ranges(n, _TAIL_BLOCK)))
    return np.concatenate(parallel_map(run_block, tasks, workers=workers))


def annulus_mass_check(
    dim: int,
    c: float,
    n: int,
    seed: int = 0,
    *,
    method: str = "chisquare",
    workers: int | None = None,
) -> AnnulusCheck:
    """Fraction of standard-normal mass outside ``√(d−1) ± c`` against ``(4/c²)·e^{−c²/4}``.

    ``method="chisquare"`` draws ‖x‖² from its exact χ²_d law; ``"vectors"``
    draws the vectors themselves.
    """

    if dim < 2:
        raise InvalidArgumentError(f"dim must be >= 2, got {dim}")
    if c <= 0.0:
        raise InvalidArgumentError(f"c must be > 0, got {c}")
    if n < 1000:
        raise InvalidArgumentError(f"n must be >= 1000, got {n}")
    norms = np.sqrt(_squared_norms(dim, n, seed, "annulus", method, workers))
    center = math.sqrt(dim - 1)
    outside = np.count_nonzero((norms < center - c) | (norms > center + c))
    bound = (4.0 / (c * c)) * math.exp(-c * c / 4.0)
    return AnnulusCheck(fraction_outside=outside / n, bound=bound, dim=dim, c=float(c), n=n)


def hemisphere_slab_check(
    dim: int,
    c: float,
    n: int,
    seed: int = 0,
    *,
    method: str = "chisquare",
    workers: int | None = None,
) -> SlabCheck:
    """Fraction of the upper unit hemisphere with ``x1 > c/√(d−1)`` against ``(2/c)·e^{−c²/2}``.

    Points are normalized Gaussians folded onto ``x1 >= 0``. In ``"chisquare"``
    mode the first coordinate is drawn directly and the remaining ``d − 1``
    coordinates only through their χ² squared norm.
    """

    if dim < 3:
        raise InvalidArgumentError(f"dim must be >= 3, got {dim}")
    if c <= 0.0:
        raise InvalidArgumentError(f"c must be > 0, got {c}")
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if method not in {"chisquare", "vectors"}:
        raise InvalidArgumentError(f"method must be 'chisquare' or 'vectors', got {method!r}")

    def run_block(task: Tuple[int, Tuple[int, int]]) -> np.ndarray:
        index, (start, stop) = task
        rng = block_rng(seed, "hemisphere", index)
        count = stop - start
        if method == "chisquare":
            first = rng.standard_normal(count)
            rest = rng.chisquare(dim - 1, size=count)
            return np.abs(first) / np.sqrt(first * first + rest)
        x = rng.standard_normal((count, dim))
        return np.abs(x[:, 0]) / np.linalg.norm(x, axis=1)

    tasks = list(enumerate(block_ranges(n, _TAIL_BLOCK)))
    heights = np.concatenate(parallel_map(run_block, tasks, workers=workers))
    above = np.count_nonzero(heights > c / math.sqrt(dim - 1))
    bound = (2.0 / c) * math.exp(-c * c / 2.0)
    return SlabCheck(fraction_above=above / n, bound=bound, dim=dim, c=float(c), n=n)


def unit_sphere_measures(dim: int) -> SphereMeasures:
    """Surface area and volume of the unit ball in *dim* dimensions."""

    if int(dim) < 1:
        raise InvalidArgumentError(f"dim must be >= 1, got {dim}")
    half = int(dim) / 2.0
    log_pi_half = half * math.log(math.pi)
    area = math.exp(math.log(2.0) + log_pi_half - float(gammaln(half)))
    volume = math.exp(log_pi_half - float(gammaln(half + 1.0)))
    return SphereMeasures(area=area, volume=volume)


__all__ = [
    "RADIUS_CSV_HEADER",
    "RadiusReport",
    "AnnulusCheck",
    "SlabCheck",
    "SphereMeasures",
    "gaussian_radius",
    "empirical_radius",
    "radius_table",
    "radius_table_csv",
    "synthetic_data",
    "annulus_mass_check",
    "hemisphere_slab_check",
    "unit_sphere_measures",
]
