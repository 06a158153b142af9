# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

import json

import numpy as np
import pytest
from omslab.batch import Batch
from omslab.config import load_config_file, merge_settings
from omslab.error import ArtifactIOError, ConfigValidationError, InvalidArgumentError
from omslab.io import (
    PARTIAL_SUFFIX,
    atomic_write_text,
    canonical_json,
    file_digest,
    format_float,
    format_sig,
    json_digest,
    read_batch_csv,
    read_json,
    write_batch_csv,
    write_json,
)


def test_batch_validation():
    batch = Batch(np.ones((3, 2)), [1, 2, 1])
    assert len(batch) == 3
    assert batch.dim == 2
    assert batch.classes() == [1, 2]
    assert len(batch.for_class(1)) == 2
    with pytest.raises(InvalidArgumentError):
        Batch(np.ones((3, 2)), [1, 2])
    with pytest.raises(InvalidArgumentError):
        Batch(np.array([[np.nan, 0.0]]), [1])
    with pytest.raises(InvalidArgumentError):
        Batch(np.ones((1, 2)), [-1])


def test_batch_arrays_are_read_only():
    batch = Batch.uniform(np.zeros((2, 2)), 3)
    with pytest.raises(ValueError):
        batch.values[0, 0] = 1.0
    assert batch.classes() == [3]


def test_batch_concat_and_take():
    a = Batch.uniform(np.zeros((2, 3)), 1)
    b = Batch.uniform(np.ones((1, 3)), 2)
    joined = Batch.concat([a, b])
    assert joined.class_ids.tolist() == [1, 1, 2]
    assert joined.take([2]).equals(b)
    with pytest.raises(InvalidArgumentError):
        Batch.concat([a, Batch.uniform(np.ones((1, 4)), 1)])
    with pytest.raises(InvalidArgumentError):
        Batch.concat([])


def test_float_formats():
    assert float(format_float(0.1 + 0.2)) == 0.1 + 0.2
    assert format_sig(128.00123456789) == "128.001235"


def test_atomic_write_leaves_no_staging_file(tmp_path):
    target = atomic_write_text(tmp_path / "nested" / "out.txt", "hello\n")
    assert target.read_text() == "hello\n"
    assert not (tmp_path / "nested" / ("out.txt" + PARTIAL_SUFFIX)).exists()


def test_atomic_write_failure_raises_artifact_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ArtifactIOError):
        atomic_write_text(blocker / "child.txt", "data")


def test_batch_csv_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    batch = Batch(rng.standard_normal((4, 3)), [0, 1, 2, 3])
    path = write_batch_csv(tmp_path / "batch.csv", batch)
    assert path.read_text().splitlines()[0] == "class_id,v1,v2,v3"
    assert read_batch_csv(path).equals(batch)


def test_batch_csv_errors(tmp_path):
    bad_header = tmp_path / "bad.csv"
    bad_header.write_text("id,v1\n1,0.5\n")
    with pytest.raises(ArtifactIOError):
        read_batch_csv(bad_header)

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("class_id,v1,v2\n1,0.5\n")
    with pytest.raises(ArtifactIOError, match="line 2"):
        read_batch_csv(ragged)

    with pytest.raises(ArtifactIOError):
        read_batch_csv(tmp_path / "missing.csv")


def test_json_helpers(tmp_path):
    payload = {"b": [1.5, 2], "a": "x"}
    path = write_json(tmp_path / "p.json", payload)
    assert read_json(path) == payload
    assert canonical_json(payload).index('"a"') < canonical_json(payload).index('"b"')
    assert json_digest(payload) == json_digest({"a": "x", "b": [1.5, 2]})
    assert len(file_digest(path)) == 64

    broken = tmp_path / "broken.json"
    broken.write_text("{")
    with pytest.raises(ArtifactIOError):
        read_json(broken)


def test_merge_settings_precedence():
    defaults = {"n": 512, "steps": 50, "eta": 0.0}
    merged = merge_settings(defaults, {"steps": 20, "eta": 0.5}, {"eta": None, "n": 8})
    assert merged == {"n": 8, "steps": 20, "eta": 0.5}


def test_load_config_file_normalizes_keys(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"omega-theta": 2.0, "steps": 10}))
    assert load_config_file(path) == {"omega_theta": 2.0, "steps": 10}

    path.write_text("[1, 2]")
    with pytest.raises(ConfigValidationError):
        load_config_file(path)
