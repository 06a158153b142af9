"""Project-wide pytest configuration.

Every test starts with an empty schedule cache, a single-worker pool and no
``OMS_LAB_SEED`` in the environment, so results never depend on test order.
"""

import pytest

from omslab import cache, config, threads


@pytest.fixture(autouse=True)
def _isolated_globals(monkeypatch):
    monkeypatch.delenv(config.SEED_ENV, raising=False)
    cache.clear_cache()
    yield
    cache.clear_cache()
    threads.configure_thread_pool(max_workers=1)
    cache.set_cache_limit(64)
    config.configure(seed=0)
