# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

"""Artifact persistence: atomic writes, canonical JSON, batch CSV and digests.

Every artifact is first written next to its destination with a ``.partial``
suffix and renamed into place once complete, so a failed run never leaves a
file that looks finished.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
from pathlib import Path
from typing import Any, Final, Iterable, List, Sequence

import numpy as np

from .batch import Batch
from .error import ArtifactIOError


log = logging.getLogger(__name__)

PARTIAL_SUFFIX: Final[str] = ".partial"


def format_float(value: float) -> str:
    """Shortest decimal that round-trips the float64 bit pattern."""

    return repr(float(value))


def format_sig(value: float, digits: int = 9) -> str:
    return f"{float(value):.{digits}g}"


def partial_path(path: str | os.PathLike[str]) -> Path:
    target = Path(path)
    return target.with_name(target.name + PARTIAL_SUFFIX)


def atomic_write_text(path: str | os.PathLike[str], text: str) -> Path:
    target = Path(path)
    staging = partial_path(target)
    try:
        if target.parent and not target.parent.exists():
            target.parent.mkdir(parents=True, exist_ok=True)
        with open(staging, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(staging, target)
    except OSError as exc:
        raise ArtifactIOError(target, f"write failed: {exc.strerror or exc}") from exc
    log.debug("wrote %s (%d bytes)", target, len(text))
    return target


def read_text(path: str | os.PathLike[str]) -> str:
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            return handle.read()
    except OSError as exc:
        raise ArtifactIOError(path, f"read failed: {exc.strerror or exc}") from exc


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: str | os.PathLike[str], payload: Any) -> Path:
    return atomic_write_text(path, canonical_json(payload))


def read_json(path: str | os.PathLike[str]) -> Any:
    text = read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArtifactIOError(path, f"invalid JSON: {exc.msg} at line {exc.lineno}") from exc


def sha256_digest(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def json_digest(payload: Any) -> str:
    return sha256_digest(json.dumps(payload, sort_keys=True, separators=(",", ":")))


def file_digest(path: str | os.PathLike[str]) -> str:
    try:
        with open(path, "rb") as handle:
            return hashlib.sha256(handle.read()).hexdigest()
    except OSError as exc:
        raise ArtifactIOError(path, f"read failed: {exc.strerror or exc}") from exc


def render_csv(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def batch_to_csv(batch: Batch) -> str:
    header = ["class_id"] + [f"v{i + 1}" for i in range(batch.dim)]
    rows = (
        [str(int(cid))] + [format_float(v) for v in row]
        for cid, row in zip(batch.class_ids, batch.values)
    )
    return render_csv(header, rows)


def write_batch_csv(path: str | os.PathLike[str], batch: Batch) -> Path:
    return atomic_write_text(path, batch_to_csv(batch))


def read_batch_csv(path: str | os.PathLike[str]) -> Batch:
    text = read_text(path)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration as exc:
        raise ArtifactIOError(path, "empty batch file") from exc
    if not header or header[0] != "class_id":
        raise ArtifactIOError(path, "batch CSV must start with a class_id column")
    dim = len(header) - 1
    class_ids: List[int] = []
    values: List[List[float]] = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != dim + 1:
            raise ArtifactIOError(path, f"line {line_no}: expected {dim + 1} fields, got {len(row)}")
        try:
            class_ids.append(int(row[0]))
            values.append([float(field) for field in row[1:]])
        except ValueError as exc:
            raise ArtifactIOError(path, f"line {line_no}: {exc}") from exc
    if not values:
        raise ArtifactIOError(path, "batch file has no rows")
    return Batch(np.asarray(values, dtype=np.float64), np.asarray(class_ids, dtype=np.int64))


__all__ = [
    "PARTIAL_SUFFIX",
    "format_float",
    "format_sig",
    "partial_path",
    "atomic_write_text",
    "read_text",
    "canonical_json",
    "write_json",
    "read_json",
    "sha256_digest",
    "json_digest",
    "file_digest",
    "render_csv",
    "batch_to_csv",
    "write_batch_csv",
    "read_batch_csv",
]
