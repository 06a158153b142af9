# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

import itertools

import numpy as np
import pytest
from omslab.batch import Batch
from omslab.error import InvalidArgumentError
from omslab.metrics import bias_report, mean_histogram, sample_means, wasserstein1
from scipy.stats import wasserstein_distance


def _brute_force_w1(a, b):
    return min(np.mean(np.abs(np.asarray(a) - np.asarray(perm))) for perm in itertools.permutations(b))


def test_wasserstein_matches_brute_force_assignment():
    rng = np.random.default_rng(0)
    for _ in range(10):
        a = rng.standard_normal(5)
        b = rng.standard_normal(5) + 0.3
        assert wasserstein1(a, b) == pytest.approx(_brute_force_w1(a, b), abs=1e-12)


def test_wasserstein_agrees_with_scipy():
    rng = np.random.default_rng(1)
    a = rng.standard_normal(300)
    b = rng.uniform(-1, 1, 300)
    assert wasserstein1(a, b) == pytest.approx(wasserstein_distance(a, b), rel=1e-12)


def test_wasserstein_basics():
    assert wasserstein1([1.0, 2.0], [2.0, 1.0]) == 0.0
    assert wasserstein1([0.0, 0.0], [1.0, 1.0]) == 1.0
    with pytest.raises(InvalidArgumentError):
        wasserstein1([1.0], [1.0, 2.0])
    with pytest.raises(InvalidArgumentError):
        wasserstein1([], [])


def test_sample_means():
    batch = Batch(np.array([[1.0, 3.0], [-1.0, -2.0]]), np.array([1, 2]))
    np.testing.assert_array_equal(sample_means(batch), [2.0, -1.5])
    np.testing.assert_array_equal(sample_means(np.array([4.0, 0.0])), [2.0])


def test_histogram_counts_and_tails():
    hist = mean_histogram([-2.0, -1.0, -0.5, 0.0, 0.99, 1.0, 3.0], bins=4, range=(-1.0, 1.0))
    np.testing.assert_array_equal(hist.counts, [1, 1, 1, 2])
    assert hist.underflow == 1
    assert hist.overflow == 1
    assert hist.total == 7


def test_histogram_csv():
    hist = mean_histogram([0.1, 0.6], bins=2, range=(0.0, 1.0))
    assert hist.to_csv() == "bin_lo,bin_hi,count\n-inf,0.0,0\n0.0,0.5,1\n0.5,1.0,1\n1.0,inf,0\n"


def test_histogram_rejects_bad_range():
    with pytest.raises(InvalidArgumentError):
        mean_histogram([0.0], bins=3, range=(1.0, 1.0))
    with pytest.raises(InvalidArgumentError):
        mean_histogram([0.0], bins=0)


def test_bias_report():
    data = Batch(
        np.array([[-1.0, -1.0], [-0.5, -0.5], [1.0, 1.0], [0.5, 0.5]]),
        np.array([1, 1, 3, 3]),
    )
    generated = Batch(np.array([[-0.25, -0.25], [-0.75, -0.75], [1.5, 1.5]]), np.array([1, 1, 3]))
    report = bias_report(generated, data, config_digest="abc", seed=2)
    dark = report.for_class(1)
    assert dark.data_mean == -0.75
    assert dark.generated_mean == -0.5
    assert dark.abs_error == 0.25
    assert dark.wasserstein_means == pytest.approx(0.25)
    assert (dark.n_generated, dark.n_data) == (2, 2)
    light = report.for_class(3)
    assert light.abs_error == pytest.approx(0.75)
    assert light.n_generated == 1
    assert report.n_generated == 3 and report.n_data == 4
    payload = report.to_dict()
    assert payload["config_digest"] == "abc"
    assert payload["subsample_seed"] == 2
    assert [entry["class_id"] for entry in payload["per_class"]] == [1, 3]
    with pytest.raises(InvalidArgumentError):
        report.for_class(2)


def test_bias_report_is_deterministic_under_subsampling():
    rng = np.random.default_rng(3)
    data = Batch.uniform(rng.standard_normal((50, 4)), 1)
    generated = Batch.uniform(rng.standard_normal((20, 4)) + 0.1, 1)
    first = bias_report(generated, data, seed=9)
    second = bias_report(generated, data, seed=9)
    assert first.global_wasserstein == second.global_wasserstein
    assert first.for_class(1).wasserstein_means == second.for_class(1).wasserstein_means


def test_bias_report_rejects_unknown_classes():
    data = Batch.uniform(np.zeros((2, 3)), 1)
    with pytest.raises(InvalidArgumentError):
        bias_report(Batch.uniform(np.zeros((2, 3)), 2), data)
    with pytest.raises(InvalidArgumentError):
        bias_report(Batch.uniform(np.zeros((2, 4)), 1), data)


def test_histogram_rejects_non_finite_values():
    with pytest.raises(InvalidArgumentError):
        mean_histogram([0.0, np.nan, 0.5])
    with pytest.raises(InvalidArgumentError):
        mean_histogram([np.inf])


def test_histogram_of_uniform_values_is_flat():
    values = np.random.default_rng(4).uniform(-1.0, 1.0, 10000)
    hist = mean_histogram(values, bins=10)
    assert hist.total == values.size
    assert hist.underflow == hist.overflow == 0
    # binomial spread around 1000 per bin
    spread = 5.0 * np.sqrt(10000 * 0.1 * 0.9)
    assert np.all(np.abs(hist.counts - 1000) < spread)


def test_wasserstein_is_a_scale_equivariant_metric():
    rng = np.random.default_rng(5)
    a, b, c = rng.standard_normal(200), rng.uniform(-2, 2, 200), rng.laplace(size=200)
    assert wasserstein1(a, b) == pytest.approx(wasserstein1(b, a), abs=1e-15)
    assert wasserstein1(a, c) <= wasserstein1(a, b) + wasserstein1(b, c) + 1e-12
    for k in (3.0, -0.5):
        assert wasserstein1(k * a, k * b) == pytest.approx(abs(k) * wasserstein1(a, b), rel=1e-12)
    assert wasserstein1(a, a + 0.4) == pytest.approx(0.4, rel=1e-12)


def test_bias_report_measures_a_constant_shift():
    data = Batch.uniform(np.random.default_rng(6).standard_normal((400, 5)), 2)
    shifted = Batch.uniform(data.values + 0.3, 2)
    entry = bias_report(shifted, data).for_class(2)
    assert entry.abs_error == pytest.approx(0.3, rel=1e-9)
    assert entry.wasserstein_means == pytest.approx(0.3, rel=1e-9)
