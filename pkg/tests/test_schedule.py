# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

import math

import numpy as np
import pytest
from omslab.error import InvalidArgumentError
from omslab.io import read_json, write_json
from omslab.schedule import (
    Schedule,
    build_cosine_schedule,
    build_ldm_schedule,
    build_linear_schedule,
    build_schedule,
    rescale_zero_terminal,
    schedule_summary,
    snr,
    terminal_kl,
)


BUILDERS = {
    "linear": build_linear_schedule,
    "cosine": build_cosine_schedule,
    "ldm": build_ldm_schedule,
}


def test_ldm_terminal_constants():
    sched = build_ldm_schedule(1000)
    ab = sched.alpha_bars[-1]
    assert snr(sched, 1000) == pytest.approx(0.004682, rel=1e-3)
    assert math.sqrt(ab) == pytest.approx(0.068265, abs=5e-6)
    assert math.sqrt(1.0 - ab) == pytest.approx(0.997667, abs=5e-6)


def test_ldm_endpoints():
    sched = build_ldm_schedule(1000)
    assert sched.betas[0] == pytest.approx(0.00085, rel=1e-12)
    assert sched.betas[-1] == pytest.approx(0.012, rel=1e-12)
    assert sched.T == 1000
    assert sched.tag == "ldm"


def test_linear_terminal_snr():
    assert snr(build_linear_schedule(1000), 1000) == pytest.approx(4.036e-5, rel=1e-3)


def test_cosine_terminal_snr_within_factor_two():
    value = snr(build_cosine_schedule(1000), 1000)
    assert 2.428e-9 / 2 <= value <= 2.428e-9 * 2


def test_terminal_snr_ordering():
    values = {kind: snr(builder(1000), 1000) for kind, builder in BUILDERS.items()}
    assert values["cosine"] < values["linear"] < values["ldm"]


def test_cosine_betas_respect_clip():
    sched = build_cosine_schedule(1000, beta_clip=0.5)
    assert sched.betas.max() <= 0.5
    assert sched.params == {"s": 0.008, "beta_clip": 0.5}


@pytest.mark.parametrize("kind", sorted(BUILDERS))
@pytest.mark.parametrize("steps", [2, 10, 100, 1000])
def test_builder_invariants(kind, steps):
    sched = BUILDERS[kind](steps)
    assert sched.T == steps
    assert np.all(np.diff(sched.alpha_bars) < 0.0)
    snrs = sched.snr_values()
    assert np.all(np.diff(snrs) < 0.0)
    assert np.all(sched.betas > 0.0)
    if kind == "cosine":
        assert np.all(sched.betas <= sched.params["beta_clip"])
    else:
        assert np.all(sched.betas < 1.0)
    np.testing.assert_allclose(np.cumprod(1.0 - sched.betas), sched.alpha_bars, rtol=1e-15, atol=0.0)


def test_schedule_arrays_are_read_only():
    sched = build_ldm_schedule(10)
    with pytest.raises(ValueError):
        sched.betas[0] = 0.5
    with pytest.raises(ValueError):
        sched.alpha_bars[0] = 0.5


def test_alpha_bar_boundary_convention():
    sched = build_linear_schedule(10)
    assert sched.alpha_bar(0) == 1.0
    assert sched.alpha_bar(1) == pytest.approx(1.0 - 1e-4)
    with pytest.raises(InvalidArgumentError):
        sched.alpha_bar(11)


@pytest.mark.parametrize("t", [0, 1001, -3])
def test_snr_rejects_out_of_range(t):
    with pytest.raises(InvalidArgumentError):
        snr(build_ldm_schedule(1000), t)


def test_snr_symmetry_point():
    # one step with beta = 0.5 gives alpha_bar_1 = 0.5
    sched = Schedule("linear", [0.5])
    assert snr(sched, 1) == pytest.approx(1.0)


@pytest.mark.parametrize(
    "kwargs",
    [{"beta_start": 0.0}, {"beta_start": 0.03, "beta_end": 0.02}, {"beta_end": 1.0}],
)
def test_linear_rejects_bad_endpoints(kwargs):
    with pytest.raises(InvalidArgumentError):
        build_linear_schedule(100, **kwargs)


def test_builders_reject_short_horizons():
    with pytest.raises(InvalidArgumentError):
        build_ldm_schedule(1)
    with pytest.raises(InvalidArgumentError):
        build_linear_schedule(0)


def test_schedule_rejects_inconsistent_betas():
    with pytest.raises(InvalidArgumentError):
        Schedule("linear", [0.1, 0.0, 0.2])
    with pytest.raises(InvalidArgumentError):
        Schedule("linear", [0.1, 1.0])


def test_rescale_zero_terminal():
    base = build_ldm_schedule(1000)
    rescaled = rescale_zero_terminal(base)
    assert rescaled.rescaled
    assert rescaled.tag == "rescaled(ldm)"
    assert rescaled.alpha_bars[-1] == 0.0
    assert math.sqrt(rescaled.alpha_bars[-1]) == 0.0
    assert rescaled.betas[-1] == 1.0
    assert abs(rescaled.alpha_bars[0] - base.alpha_bars[0]) <= 1e-12
    assert np.all(np.diff(rescaled.alpha_bars) < 0.0)
    assert snr(rescaled, 1000) == 0.0


def test_rescale_follows_shift_and_scale_of_sqrt_alpha_bar():
    base = build_linear_schedule(1000)
    rescaled = rescale_zero_terminal(base)
    u = np.sqrt(base.alpha_bars)
    expected = ((u - u[-1]) * u[0] / (u[0] - u[-1])) ** 2
    np.testing.assert_allclose(rescaled.alpha_bars, expected, rtol=1e-9, atol=1e-15)


def test_rescale_refuses_second_application():
    rescaled = rescale_zero_terminal(build_ldm_schedule(1000))
    with pytest.raises(InvalidArgumentError):
        rescale_zero_terminal(rescaled)


def test_terminal_kl_zero_at_zero_snr():
    rescaled = rescale_zero_terminal(build_ldm_schedule(1000))
    assert terminal_kl(rescaled, np.full(16, 3.0)) == 0.0


def test_terminal_kl_zero_data_closed_form():
    sched = build_ldm_schedule(1000)
    ab = sched.alpha_bars[-1]
    assert ab == pytest.approx(0.00466, rel=2e-3)
    dim = 16384
    expected = 0.5 * dim * (-ab - math.log(1.0 - ab))
    assert terminal_kl(sched, np.zeros(dim)) == pytest.approx(expected, rel=1e-12)


def test_terminal_kl_linear_in_squared_norm():
    sched = build_ldm_schedule(1000)
    ab = sched.alpha_bars[-1]
    x0 = np.linspace(-1.0, 1.0, 32)
    base = terminal_kl(sched, x0)
    doubled = terminal_kl(sched, x0 * math.sqrt(2.0))
    assert doubled - base == pytest.approx(ab * float(x0 @ x0) / 2.0, rel=1e-9)


def test_terminal_kl_matches_monte_carlo():
    sched = build_ldm_schedule(1000)
    ab = sched.alpha_bars[-1]
    x0 = np.full(4, 2.0)
    mean = math.sqrt(ab) * x0
    var = 1.0 - ab
    rng = np.random.default_rng(0)
    x = mean + math.sqrt(var) * rng.standard_normal((100_000, 4))
    log_q = -0.5 * np.sum((x - mean) ** 2, axis=1) / var - 0.5 * 4 * math.log(var)
    log_p = -0.5 * np.sum(x * x, axis=1)
    assert float(np.mean(log_q - log_p)) == pytest.approx(terminal_kl(sched, x0), abs=5e-3)


def test_terminal_kl_batched_rows():
    sched = build_linear_schedule(1000)
    rows = np.array([[0.0, 0.0], [1.0, 1.0]])
    values = terminal_kl(sched, rows)
    assert values.shape == (2,)
    assert values[1] > values[0]


def test_terminal_kl_non_negative_over_random_cases():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        steps = int(rng.integers(2, 200))
        beta_end = float(rng.uniform(0.001, 0.05))
        sched = build_linear_schedule(steps, beta_start=min(1e-4, beta_end), beta_end=beta_end)
        dim = int(rng.integers(1, 32))
        x0 = rng.normal(scale=rng.uniform(0.0, 3.0), size=dim)
        assert terminal_kl(sched, x0) >= 0.0


def test_terminal_kl_decreases_with_terminal_alpha_bar():
    x0 = np.full(8, 0.9)
    values = [terminal_kl(build_linear_schedule(1000, beta_end=end), x0) for end in (0.005, 0.01, 0.02, 0.03)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_terminal_kl_rejects_bad_input():
    sched = build_ldm_schedule(10)
    with pytest.raises(InvalidArgumentError):
        terminal_kl(sched, np.array([np.nan]))
    with pytest.raises(InvalidArgumentError):
        terminal_kl(sched, np.zeros(0))


def test_schedule_json_round_trip(tmp_path):
    sched = rescale_zero_terminal(build_cosine_schedule(100, s=0.01))
    path = write_json(tmp_path / "sched.json", sched.to_dict())
    loaded = Schedule.from_dict(read_json(path))
    assert loaded.tag == "rescaled(cosine)"
    assert loaded.params == sched.params
    np.testing.assert_array_equal(loaded.betas, sched.betas)
    np.testing.assert_array_equal(loaded.alpha_bars, sched.alpha_bars)


def test_schedule_payload_with_wrong_length_rejected():
    payload = build_ldm_schedule(10).to_dict()
    payload["T"] = 11
    with pytest.raises(InvalidArgumentError):
        Schedule.from_dict(payload)


def test_build_schedule_by_name():
    assert build_schedule("LDM", 1000).kind.value == "ldm"
    assert build_schedule("linear", 1000, rescale=True).rescaled
    with pytest.raises(InvalidArgumentError):
        build_schedule("sigmoid", 1000)


def test_schedule_summary_fields():
    summary = schedule_summary(build_ldm_schedule(1000))
    assert summary["T"] == 1000
    assert summary["sqrt_alpha_bar_T"] == pytest.approx(0.068265, abs=5e-6)
    assert summary["terminal_kl_unit"] > 0.0
