# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

from __future__ import annotations

import json
import os
import subprocess
import sys
import threading
from pathlib import Path
from typing import Any, Dict, List

import omslab
import omslab.cache as cache_mod
import pytest


PROJECT_ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(autouse=True)
def _reset_cache_state() -> None:
    original_limit = cache_mod.get_cache_limit()
    cache_mod.clear_cache()
    try:
        yield
    finally:
        cache_mod.set_cache_limit(original_limit)
        cache_mod.clear_cache()


def _run_cache_script(source: str, env_overrides: Dict[str, str] | None = None) -> Dict[str, Any]:
    env = os.environ.copy()
    pythonpath_entries = [str(PROJECT_ROOT)]
    existing_pythonpath = env.get("PYTHONPATH")
    if existing_pythonpath:
        pythonpath_entries.append(existing_pythonpath)
    env["PYTHONPATH"] = os.pathsep.join(pythonpath_entries)
    if env_overrides:
        env.update(env_overrides)

    completed = subprocess.run(
        [sys.executable, "-c", source],
        check=True,
        capture_output=True,
        text=True,
        env=env,
    )
    if completed.stderr:
        raise AssertionError(f"unexpected stderr output: {completed.stderr}")
    return json.loads(completed.stdout)


def test_build_schedule_returns_shared_instance():
    first = omslab.build_schedule("ldm", 1000)
    second = omslab.build_schedule("ldm", 1000)
    assert first is second
    assert cache_mod.cache_size() == 1

    rescaled = omslab.build_schedule("ldm", 1000, rescale=True)
    assert rescaled is not first
    assert cache_mod.cache_size() == 2


def test_builder_params_are_part_of_the_key():
    default = omslab.build_schedule("linear", 100)
    custom = omslab.build_schedule("linear", 100, beta_start=2e-4)
    assert default is not custom
    assert custom.params["beta_start"] == pytest.approx(2e-4)


def test_cache_evicts_oldest_entry_first():
    cache_mod.set_cache_limit(2)
    first = omslab.build_schedule("linear", 10)
    omslab.build_schedule("linear", 20)
    omslab.build_schedule("linear", 30)
    assert cache_mod.cache_size() == 2
    assert omslab.build_schedule("linear", 10) is not first


def test_shrinking_limit_trims_store():
    for steps in (10, 20, 30, 40):
        omslab.build_schedule("cosine", steps)
    cache_mod.set_cache_limit(1)
    assert cache_mod.cache_size() == 1


def test_zero_limit_disables_cache():
    cache_mod.set_cache_limit(0)
    first = omslab.build_schedule("ldm", 50)
    second = omslab.build_schedule("ldm", 50)
    assert first is not second
    assert cache_mod.cache_size() == 0


def test_unlimited_cache():
    cache_mod.set_cache_limit(None)
    assert cache_mod.get_cache_limit() is None
    for steps in range(2, 80):
        omslab.build_schedule("linear", steps)
    assert cache_mod.cache_size() == 78


def test_negative_limit_rejected():
    with pytest.raises(ValueError):
        cache_mod.set_cache_limit(-1)


def test_concurrent_builders_agree():
    results: List[Any] = []
    lock = threading.Lock()

    def worker() -> None:
        sched = omslab.build_schedule("ldm", 1000)
        with lock:
            results.append(sched)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()

    assert len(results) == 8
    assert all(r.alpha_bars[-1] == results[0].alpha_bars[-1] for r in results)
    assert cache_mod.cache_size() == 1


@pytest.mark.parametrize(
    "value,expected",
    [("5", 5), ("unlimited", None), ("0", 0), ("junk", 64)],
)
def test_cache_limit_environment_variable(value: str, expected: int | None):
    source = "import json, omslab.cache as c; print(json.dumps({'limit': c.get_cache_limit()}))"
    payload = _run_cache_script(source, {"OMS_LAB_SCHEDULE_CACHE_LIMIT": value})
    assert payload["limit"] == expected
