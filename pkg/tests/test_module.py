import math

import numpy as np
import omslab
import pytest


@pytest.fixture(autouse=True)
def reset_omslab_state():
    omslab.clear_cache()
    yield
    omslab.clear_cache()


def test_public_names_resolve():
    for name in omslab.__all__:
        assert hasattr(omslab, name), name


def test_error_classes_reexported():
    assert omslab.InvalidArgumentError is omslab.error.InvalidArgumentError
    assert "UsageError" in omslab.__all__


def test_version_string():
    assert omslab.__version__.count(".") == 2


def test_module_schedule_shortcuts():
    sched = omslab.build_schedule("ldm", 1000)
    assert isinstance(sched, omslab.Schedule)
    assert omslab.snr(sched, 1000) == pytest.approx(0.004682, rel=1e-3)

    rescaled = omslab.rescale_zero_terminal(omslab.build_ldm_schedule(1000))
    assert omslab.snr(rescaled, 1000) == 0.0
    assert omslab.terminal_kl(rescaled, np.ones(8)) == 0.0


def test_module_param_shortcuts():
    x0 = np.array([0.5, -1.0])
    eps = np.array([0.1, 0.2])
    v = omslab.v_from_x0_eps(x0, eps, 0.3)
    xt = math.sqrt(0.3) * x0 + math.sqrt(0.7) * eps
    np.testing.assert_allclose(omslab.x0_from_v(xt, v, 0.3), x0, atol=1e-12)
    np.testing.assert_allclose(omslab.eps_from_v(xt, v, 0.3), eps, atol=1e-12)


def test_configure_returns_effective_values():
    settings = omslab.configure(workers=2, seed=9)
    assert settings == {"workers": 2, "seed": 9}
    assert omslab.resolve_seed() == 9
    assert omslab.resolve_seed(4) == 4


def test_seed_environment_fallback(monkeypatch):
    monkeypatch.setenv("OMS_LAB_SEED", "123")
    assert omslab.resolve_seed() == 123
    monkeypatch.setenv("OMS_LAB_SEED", "-1")
    with pytest.raises(omslab.ConfigValidationError):
        omslab.resolve_seed()


def test_clear_cache_resets_cached_schedules():
    first = omslab.build_schedule("cosine", 100)
    assert omslab.build_schedule("cosine", 100) is first
    omslab.clear_cache()
    assert omslab.build_schedule("cosine", 100) is not first
