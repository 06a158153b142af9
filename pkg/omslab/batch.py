# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

"""Role-agnostic container for d-dimensional vectors tagged with a class id."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np

from .error import InvalidArgumentError


@dataclass(frozen=True, eq=False)
class Batch:
    """``values`` has shape ``(n, d)``; ``class_ids`` has shape ``(n,)``.

    Class 0 is the null condition. Both arrays are stored read-only.
    """

    values: np.ndarray
    class_ids: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim == 1:
            values = values.reshape(1, -1) if values.size else values.reshape(0, 0)
        if values.ndim != 2:
            raise InvalidArgumentError(f"batch values must be 2-D, got shape {values.shape}")
        class_ids = np.array(self.class_ids, dtype=np.int64, copy=True).reshape(-1)
        if class_ids.shape[0] != values.shape[0]:
            raise InvalidArgumentError(
                f"batch has {values.shape[0]} rows but {class_ids.shape[0]} class ids"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("batch values must be finite")
        if np.any(class_ids < 0):
            raise InvalidArgumentError("class ids must be >= 0")
        values.setflags(write=False)
        class_ids.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "class_ids", class_ids)

    @classmethod
    def uniform(cls, values: np.ndarray, class_id: int) -> "Batch":
        values = np.asarray(values, dtype=np.float64)
        rows = 1 if values.ndim == 1 else values.shape[0]
        return cls(values, np.full(rows, int(class_id), dtype=np.int64))

    @classmethod
    def concat(cls, batches: Sequence["Batch"]) -> "Batch":
        if not batches:
            raise InvalidArgumentError("cannot concatenate zero batches")
        dims = {batch.dim for batch in batches}
        if len(dims) != 1:
            raise InvalidArgumentError(f"cannot concatenate batches of dimensions {sorted(dims)}")
        return cls(
            np.concatenate([batch.values for batch in batches], axis=0),
            np.concatenate([batch.class_ids for batch in batches], axis=0),
        )

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    def classes(self) -> List[int]:
        return [int(c) for c in np.unique(self.class_ids)]

    def for_class(self, class_id: int) -> "Batch":
        return self.take(np.flatnonzero(self.class_ids == int(class_id)))

    def take(self, indices: Iterable[int] | np.ndarray) -> "Batch":
        index = np.asarray(indices, dtype=np.int64).reshape(-1)
        return Batch(self.values[index], self.class_ids[index])

    def equals(self, other: "Batch") -> bool:
        """Bit-exact comparison of both arrays."""

        return (
            self.values.shape == other.values.shape
            and np.array_equal(self.class_ids, other.class_ids)
            and self.values.tobytes() == other.values.tobytes()
        )


__all__ = ["Batch"]
