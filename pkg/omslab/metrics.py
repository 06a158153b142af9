# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

"""Mean-bias diagnostics over generated and reference batches."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from .batch import Batch
from .error import InvalidArgumentError
from .io import format_float, render_csv
from .threads import block_rng


def sample_means(batch: Batch | np.ndarray) -> np.ndarray:
    """Mean over the d coordinates of every item."""

    values = batch.values if isinstance(batch, Batch) else np.asarray(batch, dtype=np.float64)
    if values.ndim == 1:
        values = values.reshape(1, -1)
    if values.shape[0] == 0 or values.shape[1] == 0:
        raise InvalidArgumentError("sample_means needs a non-empty batch")
    return values.mean(axis=1)


@dataclass(frozen=True, eq=False)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    underflow: int
    overflow: int

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow

    def to_csv(self) -> str:
        lo, hi = float(self.edges[0]), float(self.edges[-1])
        rows: List[Tuple[str, str, str]] = [("-inf", format_float(lo), str(self.underflow))]
        rows.extend(
            (format_float(a), format_float(b), str(int(c)))
            for a, b, c in zip(self.edges[:-1], self.edges[1:], self.counts)
        )
        rows.append((format_float(hi), "inf", str(self.overflow)))
        return render_csv(("bin_lo", "bin_hi", "count"), rows)


def mean_histogram(values: Sequence[float] | np.ndarray, bins: int = 60, range: Tuple[float, float] = (-1.0, 1.0)) -> Histogram:
    """Counts over ``bins`` half-open bins on ``[lo, hi]`` (last bin closed) plus out-of-range tallies."""

    lo, hi = float(range[0]), float(range[1])
    if not lo < hi:
        raise InvalidArgumentError(f"histogram range must satisfy lo < hi, got {range}")
    if int(bins) < 1:
        raise InvalidArgumentError(f"bins must be >= 1, got {bins}")
    data = np.asarray(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(data)):
        bad = int(np.count_nonzero(~np.isfinite(data)))
        raise InvalidArgumentError(f"histogram values must be finite, got {bad} non-finite")
    counts, edges = np.histogram(data, bins=int(bins), range=(lo, hi))
    return Histogram(
        edges=edges,
        counts=counts.astype(np.int64),
        underflow=int(np.count_nonzero(data < lo)),
        overflow=int(np.count_nonzero(data > hi)),
    )


def wasserstein1(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """Exact 1-D optimal transport cost between two equal-size empirical samples."""

    left = np.sort(np.asarray(a, dtype=np.float64).reshape(-1))
    right = np.sort(np.asarray(b, dtype=np.float64).reshape(-1))
    if left.size == 0 or right.size == 0:
        raise InvalidArgumentError("wasserstein1 needs non-empty inputs")
    if left.size != right.size:
        raise InvalidArgumentError(f"wasserstein1 needs equal lengths, got {left.size} and {right.size}")
    return float(np.mean(np.abs(left - right)))


def _equalize(a: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    size = min(a.size, b.size)
    if a.size > size:
        a = rng.choice(a, size=size, replace=False)
    if b.size > size:
        b = rng.choice(b, size=size, replace=False)
    return a, b


@dataclass(frozen=True)
class ClassBias:
    class_id: int
    data_mean: float
    generated_mean: float
    abs_error: float
    wasserstein_means: float
    n_generated: int
    n_data: int


@dataclass(frozen=True)
class BiasReport:
    per_class: Tuple[ClassBias, ...]
    global_wasserstein: float
    n_generated: int
    n_data: int
    config_digest: str
    subsample_seed: int = 0
    extra: Dict[str, Any] = field(default_factory=dict)

    def for_class(self, class_id: int) -> ClassBias:
        for entry in self.per_class:
            if entry.class_id == class_id:
                return entry
        raise InvalidArgumentError(f"report has no class {class_id}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "per_class": [asdict(entry) for entry in self.per_class],
            "global_wasserstein": self.global_wasserstein,
            "n_generated": self.n_generated,
            "n_data": self.n_data,
            "config_digest": self.config_digest,
            "subsample_seed": self.subsample_seed,
            **self.extra,
        }


def bias_report(generated: Batch, data: Batch, config_digest: str = "", seed: int = 0) -> BiasReport:
    """Per-class mean error and Wasserstein-1 between per-sample-mean distributions."""

    if len(generated) == 0 or len(data) == 0:
        raise InvalidArgumentError("bias_report needs non-empty batches")
    if generated.dim != data.dim:
        raise InvalidArgumentError(f"generated dimension {generated.dim} != data dimension {data.dim}")
    gen_means = sample_means(generated)
    data_means = sample_means(data)
    known = set(data.classes())
    entries: List[ClassBias] = []
    pooled_gen: List[np.ndarray] = []
    pooled_data: List[np.ndarray] = []
    for class_id in generated.classes():
        if class_id not in known:
            raise InvalidArgumentError(f"class {class_id} is generated but absent from the data")
        g = gen_means[generated.class_ids == class_id]
        d = data_means[data.class_ids == class_id]
        generated_mean = float(g.mean())
        data_mean = float(d.mean())
        a, b = _equalize(g, d, block_rng(seed, "bias", class_id))
        entries.append(
            ClassBias(
                class_id=class_id,
                data_mean=data_mean,
                generated_mean=generated_mean,
                abs_error=abs(generated_mean - data_mean),
                wasserstein_means=wasserstein1(a, b),
                n_generated=int(g.size),
                n_data=int(d.size),
            )
        )
        pooled_gen.append(g)
        pooled_data.append(d)
    a, b = _equalize(np.concatenate(pooled_gen), np.concatenate(pooled_data), block_rng(seed, "bias-global"))
    return BiasReport(
        per_class=tuple(entries),
        global_wasserstein=wasserstein1(a, b),
        n_generated=len(generated),
        n_data=int(sum(p.size for p in pooled_data)),
        config_digest=config_digest,
        subsample_seed=int(seed),
    )


__all__ = [
    "Histogram",
    "ClassBias",
    "BiasReport",
    "sample_means",
    "mean_histogram",
    "wasserstein1",
    "bias_report",
]
