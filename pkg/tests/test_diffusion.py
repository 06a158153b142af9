# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

import math

import numpy as np
import pytest
from omslab.batch import Batch
from omslab.diffusion import (
    NULL_CLASS,
    DenoiserModel,
    GaussianClass,
    GaussianOracleDenoiser,
    OmsModule,
    OracleOms,
    ToyClass,
    ToyComponent,
    ToyDatasetSpec,
    TrainConfig,
    default_toy_spec,
    forward_sample,
    generate_dataset,
    load_model,
    offset_noise_sample,
    oracle_oms,
    save_model,
    train_denoiser,
    train_oms,
)
from omslab.error import ArtifactIOError, ConfigValidationError, InvalidArgumentError
from omslab.metrics import sample_means
from omslab.nn import DenseNet
from omslab.schedule import build_schedule


def _net(dim: int, classes: int = 4, hidden=(32, 32), seed: int = 0) -> DenseNet:
    return DenseNet.initialize(dim, hidden=hidden, time_embed_dim=8, class_count=classes, class_embed_dim=4, seed=seed)


def _bimodal_spec(dim: int = 4, n: int = 2048) -> ToyDatasetSpec:
    return ToyDatasetSpec(
        dim=dim,
        classes=(
            ToyClass(
                class_id=1,
                name="split",
                components=(
                    ToyComponent(mean=(1.0,) * dim, scale=0.1, weight=0.5),
                    ToyComponent(mean=(-1.0,) * dim, scale=0.1, weight=0.5),
                ),
            ),
        ),
        n_per_class=n,
        seed=0,
    ).validate()


def test_default_spec_layout():
    spec = default_toy_spec()
    assert spec.dim == 64
    assert spec.n_per_class == 4096
    assert spec.class_names() == {"dark": 1, "mid": 2, "light": 3}
    assert [c.components[0].mean[0] for c in spec.classes] == [-0.7, 0.0, 0.7]
    assert ToyDatasetSpec.from_dict(spec.to_dict()) == spec


def test_spec_validation():
    with pytest.raises(InvalidArgumentError):
        default_toy_spec(0)
    with pytest.raises(InvalidArgumentError):
        ToyDatasetSpec(
            dim=2,
            classes=(ToyClass(class_id=0, components=(ToyComponent(mean=(0.0, 0.0), scale=1.0),)),),
            n_per_class=4,
        ).validate()
    with pytest.raises(InvalidArgumentError):
        ToyDatasetSpec.from_dict({"dim": 2})


def test_generate_dataset_statistics():
    spec = default_toy_spec(16, n_per_class=4096, seed=1)
    data = generate_dataset(spec)
    assert len(data) == 3 * 4096
    assert data.classes() == [1, 2, 3]
    means = sample_means(data)
    for class_id, center in ((1, -0.7), (2, 0.0), (3, 0.7)):
        assert means[data.class_ids == class_id].mean() == pytest.approx(center, abs=0.05)
    # per-sample means spread with the shared offset
    assert means[data.class_ids == 2].std() == pytest.approx(math.sqrt(0.8**2 + 0.2**2 / 16), rel=0.05)
    assert generate_dataset(spec).equals(data)


def test_forward_sample_scalar_and_per_row_timesteps():
    sched = build_schedule("ldm", 1000)
    x0 = np.ones((3, 2))
    noise = np.zeros((3, 2))
    out = forward_sample(x0, 1000, sched, noise)
    np.testing.assert_allclose(out, math.sqrt(sched.alpha_bars[-1]))
    rows = forward_sample(x0, np.array([1, 500, 1000]), sched, noise)
    np.testing.assert_allclose(rows[:, 0], np.sqrt(sched.alpha_bars[[0, 499, 999]]))
    with pytest.raises(InvalidArgumentError):
        forward_sample(x0, 0, sched, noise)


def test_offset_noise_covariance():
    samples = offset_noise_sample(4, strength=0.1, seed=0, n=100_000)
    cov = np.cov(samples, rowvar=False)
    np.testing.assert_allclose(np.diag(cov), 1.1, atol=0.02)
    off = cov[~np.eye(4, dtype=bool)]
    np.testing.assert_allclose(off, 0.1, atol=0.02)


def test_offset_noise_groups_are_independent():
    samples = offset_noise_sample(4, groups=2, strength=0.1, seed=1, n=100_000)
    cov = np.cov(samples, rowvar=False)
    assert cov[0, 1] == pytest.approx(0.1, abs=0.02)
    assert cov[0, 2] == pytest.approx(0.0, abs=0.02)
    assert offset_noise_sample(4, seed=2).shape == (4,)
    with pytest.raises(InvalidArgumentError):
        offset_noise_sample(5, groups=2)


def test_train_config_rejects_epsilon_on_zero_terminal_snr():
    rescaled = build_schedule("ldm", 1000, rescale=True)
    with pytest.raises(ConfigValidationError, match="singular"):
        TrainConfig(schedule=rescaled, pred_type="epsilon").validate("denoiser")
    TrainConfig(schedule=rescaled, pred_type="v").validate("denoiser")
    TrainConfig(schedule=rescaled, pred_type="epsilon").validate("oms")


@pytest.mark.parametrize(
    "overrides",
    [{"iterations": 0}, {"batch_size": 0}, {"cond_dropout_p": 1.0}, {"learning_rate": 0.0}, {"final_lr_fraction": 0.0}],
)
def test_train_config_validation(overrides):
    with pytest.raises(ConfigValidationError):
        TrainConfig(schedule=build_schedule("ldm", 100), **overrides).validate()


def test_learning_rate_schedule_endpoints():
    config = TrainConfig(schedule=build_schedule("ldm", 100), learning_rate=1e-3, iterations=101)
    assert config.learning_rate_at(0) == pytest.approx(1e-3)
    assert config.learning_rate_at(50) == pytest.approx(0.55e-3)
    assert config.learning_rate_at(100) == pytest.approx(1e-4)


def test_train_denoiser_reduces_loss():
    data = generate_dataset(default_toy_spec(4, n_per_class=256))
    config = TrainConfig(schedule=build_schedule("ldm", 1000), iterations=400, batch_size=128, learning_rate=3e-3)
    model = train_denoiser(data, _net(4), config)
    history = model.loss_history
    assert len(history) == 400
    assert np.mean(history[-50:]) < np.mean(history[:50])
    pred = model.predict(np.zeros((2, 4)), 1000, 1)
    assert pred.kind.value == "v"
    assert pred.values.shape == (2, 4)


def test_train_denoiser_is_deterministic():
    data = generate_dataset(default_toy_spec(4, n_per_class=64))
    config = TrainConfig(schedule=build_schedule("ldm", 100), iterations=20, batch_size=16, offset_noise=0.1)
    first = train_denoiser(data, _net(4), config)
    second = train_denoiser(data, _net(4), config)
    assert first.digest() == second.digest()
    assert first.loss_history == second.loss_history


def test_train_denoiser_rejects_mismatched_network():
    data = generate_dataset(default_toy_spec(4, n_per_class=16))
    config = TrainConfig(schedule=build_schedule("ldm", 100), iterations=1)
    with pytest.raises(InvalidArgumentError):
        train_denoiser(data, _net(5), config)
    with pytest.raises(InvalidArgumentError):
        train_denoiser(data, _net(4, classes=3), config)


def test_oms_loss_approaches_conditional_variance():
    data = generate_dataset(default_toy_spec(8, n_per_class=1024))
    config = TrainConfig(
        schedule=build_schedule("ldm", 1000),
        iterations=1500,
        batch_size=256,
        cond_dropout_p=0.0,
        learning_rate=2e-3,
    )
    model = train_oms(data, _net(8, hidden=(64, 64)), config)
    # the irreducible error is the per-dimension conditional variance 0.2² + 0.8²
    assert np.mean(model.loss_history[-100:]) == pytest.approx(0.68, rel=0.1)
    x = np.random.default_rng(1).standard_normal((256, 8))
    light = model.predict_v(x, 3)
    dark = model.predict_v(x, 1)
    # the answer hardly moves with x_T^S; the class does move it
    spread = max(float(light.std(axis=0).mean()), float(dark.std(axis=0).mean()))
    assert spread < 0.5 * float(np.mean(dark - light))


def test_oms_x0_target_is_negated_into_v():
    data = Batch.uniform(np.full((64, 2), 0.5), 1)
    config = TrainConfig(
        schedule=build_schedule("ldm", 100),
        iterations=300,
        batch_size=32,
        cond_dropout_p=0.0,
        learning_rate=5e-3,
        oms_target="x0",
    )
    model = train_oms(data, _net(2, classes=2, hidden=(16,)), config)
    x = np.random.default_rng(0).standard_normal((16, 2))
    raw = model.raw(x, 1)
    np.testing.assert_array_equal(model.predict_v(x, 1), -raw)
    assert np.mean(raw) == pytest.approx(0.5, abs=0.1)


def test_oracle_oms_table():
    data = Batch(np.array([[1.0, 3.0], [3.0, 5.0], [-2.0, 0.0]]), [1, 1, 2])
    table = oracle_oms(data)
    np.testing.assert_allclose(table[1], [-2.0, -4.0])
    np.testing.assert_allclose(table[2], [2.0, 0.0])
    np.testing.assert_allclose(table[NULL_CLASS], -data.values.mean(axis=0))

    oms = OracleOms(table)
    assert oms.data_dim == 2
    out = oms.predict_v(np.zeros((3, 2)), np.array([1, 2, 0]))
    np.testing.assert_allclose(out[0], table[1])
    assert oms.predict_v(np.zeros(2), 2).shape == (2,)
    with pytest.raises(InvalidArgumentError):
        oms.predict_v(np.zeros(2), 7)
    with pytest.raises(InvalidArgumentError):
        oracle_oms(data, classes=[5])


def test_gaussian_oracle_matches_one_dimensional_posterior():
    sched = build_schedule("ldm", 1000)
    oracle = GaussianOracleDenoiser({1: GaussianClass(np.array([2.0]), 0.5)}, sched)
    x = np.array([[0.3], [-1.0], [2.5]])
    t = 400
    ab = sched.alpha_bar(t)
    a, b = math.sqrt(ab), math.sqrt(1.0 - ab)
    expected = b * (x - a * 2.0) / (a * a * 0.25 + b * b)
    np.testing.assert_allclose(oracle.predict(x, t, 1).values, expected, rtol=1e-12)
    # the null class of a single-class mixture is that class
    np.testing.assert_allclose(oracle.predict(x, t, NULL_CLASS).values, expected, rtol=1e-12)


def test_gaussian_oracle_offset_direction():
    sched = build_schedule("ldm", 1000)
    spec = default_toy_spec(8)
    oracle = GaussianOracleDenoiser.from_spec(spec, sched, pred_type="x0")
    x = np.zeros((1, 8))
    x0 = oracle.predict(x, 1, 3).values
    # at t = 1 the posterior mean sits close to the observed point
    assert np.all(np.abs(x0) < 0.05)
    far = oracle.predict(np.zeros((1, 8)), 1000, 3).values
    assert far.mean() == pytest.approx(0.7, abs=0.2)


def test_gaussian_oracle_null_class_mixes_components():
    sched = build_schedule("ldm", 1000)
    oracle = GaussianOracleDenoiser.from_spec(default_toy_spec(8), sched, pred_type="x0")
    dark = np.full((1, 8), -0.7 * math.sqrt(sched.alpha_bar(10)))
    x0 = oracle.predict(dark, 10, NULL_CLASS).values
    assert x0.mean() == pytest.approx(-0.7, abs=0.1)


def test_checkpoint_round_trip(tmp_path):
    sched = build_schedule("ldm", 100, rescale=True)
    model = DenoiserModel(net=_net(3), pred_type="x0", schedule=sched)
    path = tmp_path / "denoiser.json"
    save_model(str(path), model)
    loaded = load_model(str(path), "denoiser")
    assert isinstance(loaded, DenoiserModel)
    assert loaded.digest() == model.digest()
    assert loaded.schedule.rescaled
    with pytest.raises(InvalidArgumentError):
        load_model(str(path), "oms")


def test_oms_checkpoint_keeps_target(tmp_path):
    module = OmsModule(net=_net(3), target="x0", schedule=build_schedule("ldm", 100))
    path = tmp_path / "oms.json"
    save_model(str(path), module)
    loaded = load_model(str(path), "oms")
    assert loaded.target.value == "x0"


def test_load_model_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format_version": 99}')
    with pytest.raises(InvalidArgumentError):
        load_model(str(bad))
    with pytest.raises(ArtifactIOError):
        load_model(str(tmp_path / "absent.json"))


@pytest.mark.slow
def test_trained_oms_matches_class_means():
    spec = default_toy_spec()
    data = generate_dataset(spec)
    config = TrainConfig(schedule=build_schedule("ldm", 1000), iterations=2000)
    net = DenseNet.initialize(spec.dim, class_count=4, seed=0)
    model = train_oms(data, net, config)
    oracle = oracle_oms(data)
    x = np.random.default_rng(5).standard_normal((512, spec.dim))
    for class_id in (1, 2, 3):
        err = model.predict_v(x, class_id) - oracle[class_id]
        assert math.sqrt(float(np.mean(err * err))) < 0.05
        assert float(model.predict_v(x, class_id).std(axis=0).mean()) < 0.05


@pytest.mark.slow
def test_trained_oms_forecasts_mean_of_bimodal_class():
    data = generate_dataset(_bimodal_spec())
    config = TrainConfig(schedule=build_schedule("ldm", 1000), iterations=2000, cond_dropout_p=0.0)
    model = train_oms(data, _net(4, classes=2, hidden=(64, 64)), config)
    out = model.predict_v(np.random.default_rng(6).standard_normal((512, 4)), 1)
    # the L2-optimal answer is the mean 0, not either mode
    assert abs(float(out.mean())) < 0.1
    assert float(np.abs(out).max()) < 0.5
