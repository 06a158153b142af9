# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

"""Toy conditional datasets, forward noising and the two training loops.

The base denoiser θ learns to predict ε, v or x0 from ``x_t``. The OMS
module ψ sees only pure noise standing in for the sampling-time terminal
latent and learns ``v = −x0`` at SNR 0, which makes its optimum the class
conditional mean of the data.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Final, List, Mapping, Sequence, Tuple

import numpy as np
from scipy.special import softmax

from .batch import Batch
from .error import ConfigValidationError, InvalidArgumentError
from .io import json_digest, read_json, write_json
from .kinds import (
    ModelKind,
    OmsTarget,
    PredType,
    normalize_model_kind,
    normalize_oms_target,
    normalize_pred_type,
)
from .nn import CHECKPOINT_FORMAT_VERSION, AdamState, DenseNet, adamw_update
from .param import Prediction, noisy_from_x0_eps, v_from_x0_eps
from .schedule import Schedule
from .threads import block_rng


log = logging.getLogger(__name__)

NULL_CLASS: Final[int] = 0
DEFAULT_OFFSET_STRENGTH: Final[float] = 0.1


@dataclass(frozen=True)
class ToyComponent:
    """One Gaussian mode: ``mean + scale·z + offset_scale·g·𝟙`` with z ~ N(0, I), g ~ N(0, 1)."""

    mean: Tuple[float, ...]
    scale: float
    weight: float = 1.0
    offset_scale: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean": list(self.mean),
            "scale": self.scale,
            "weight": self.weight,
            "offset_scale": self.offset_scale,
        }


@dataclass(frozen=True)
class ToyClass:
    class_id: int
    components: Tuple[ToyComponent, ...]
    name: str = ""

    def mean(self) -> np.ndarray:
        return sum(c.weight * np.asarray(c.mean) for c in self.components)


@dataclass(frozen=True)
class ToyDatasetSpec:
    dim: int
    classes: Tuple[ToyClass, ...]
    n_per_class: int
    seed: int = 0

    def validate(self) -> "ToyDatasetSpec":
        if self.dim < 1:
            raise InvalidArgumentError(f"dim must be >= 1, got {self.dim}")
        if self.n_per_class < 1:
            raise InvalidArgumentError(f"n_per_class must be >= 1, got {self.n_per_class}")
        if not self.classes:
            raise InvalidArgumentError("dataset needs at least one class")
        ids = [cls.class_id for cls in self.classes]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError(f"class ids must be unique, got {ids}")
        if min(ids) < 1:
            raise InvalidArgumentError("class ids must be >= 1; 0 is the null condition")
        for cls in self.classes:
            if not cls.components:
                raise InvalidArgumentError(f"class {cls.class_id} has no components")
            total = math.fsum(c.weight for c in cls.components)
            if abs(total - 1.0) > 1e-12:
                raise InvalidArgumentError(f"class {cls.class_id} component weights sum to {total}, not 1")
            for comp in cls.components:
                if len(comp.mean) != self.dim:
                    raise InvalidArgumentError(
                        f"class {cls.class_id} component mean has dimension {len(comp.mean)}, expected {self.dim}"
                    )
                if comp.weight <= 0.0 or comp.scale < 0.0 or comp.offset_scale < 0.0:
                    raise InvalidArgumentError(f"class {cls.class_id} component has a negative scale or weight")
        return self

    def class_names(self) -> Dict[str, int]:
        return {cls.name: cls.class_id for cls in self.classes if cls.name}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dim": self.dim,
            "n_per_class": self.n_per_class,
            "seed": self.seed,
            "classes": [
                {"class_id": cls.class_id, "name": cls.name, "components": [c.to_dict() for c in cls.components]}
                for cls in self.classes
            ],
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "ToyDatasetSpec":
        try:
            classes = tuple(
                ToyClass(
                    class_id=int(entry["class_id"]),
                    name=str(entry.get("name", "")),
                    components=tuple(
                        ToyComponent(
                            mean=tuple(float(v) for v in comp["mean"]),
                            scale=float(comp["scale"]),
                            weight=float(comp.get("weight", 1.0)),
                            offset_scale=float(comp.get("offset_scale", 0.0)),
                        )
                        for comp in entry["components"]
                    ),
                )
                for entry in payload["classes"]
            )
            spec = cls(
                dim=int(payload["dim"]),
                classes=classes,
                n_per_class=int(payload["n_per_class"]),
                seed=int(payload.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"malformed dataset spec: {exc}") from exc
        return spec.validate()


def default_toy_spec(
    dim: int = 64,
    *,
    n_per_class: int = 4096,
    seed: int = 0,
    level: float = 0.7,
    scale: float = 0.2,
    offset_scale: float = 0.8,
) -> ToyDatasetSpec:
    """Three brightness classes: dark (−level·𝟙), mid (0) and light (+level·𝟙)."""

    classes = tuple(
        ToyClass(
            class_id=class_id,
            name=name,
            components=(ToyComponent(mean=(center,) * dim, scale=scale, offset_scale=offset_scale),),
        )
        for class_id, name, center in ((1, "dark", -level), (2, "mid", 0.0), (3, "light", level))
    )
    return ToyDatasetSpec(dim=dim, classes=classes, n_per_class=n_per_class, seed=seed).validate()


def generate_dataset(spec: ToyDatasetSpec) -> Batch:
    spec.validate()
    values: List[np.ndarray] = []
    ids: List[np.ndarray] = []
    for cls in spec.classes:
        rng = block_rng(spec.seed, "dataset", cls.class_id)
        means = np.asarray([c.mean for c in cls.components], dtype=np.float64)
        scales = np.asarray([c.scale for c in cls.components])
        offsets = np.asarray([c.offset_scale for c in cls.components])
        weights = np.asarray([c.weight for c in cls.components])
        picks = rng.choice(len(cls.components), size=spec.n_per_class, p=weights / weights.sum())
        z = rng.standard_normal((spec.n_per_class, spec.dim))
        g = rng.standard_normal(spec.n_per_class)
        values.append(means[picks] + scales[picks, None] * z + (offsets[picks] * g)[:, None])
        ids.append(np.full(spec.n_per_class, cls.class_id, dtype=np.int64))
    return Batch(np.concatenate(values), np.concatenate(ids))


def _timesteps(t: np.ndarray | int, sched: Schedule) -> np.ndarray:
    steps = np.asarray(t, dtype=np.int64)
    if np.any(steps < 1) or np.any(steps > sched.T):
        raise InvalidArgumentError(f"timestep must be in [1, {sched.T}]")
    return steps


def forward_sample(x0: np.ndarray, t: np.ndarray | int, sched: Schedule, noise: np.ndarray) -> np.ndarray:
    """``√ᾱ_t·x0 + √(1 − ᾱ_t)·noise``; *t* may be one step or one per row."""

    steps = _timesteps(t, sched)
    return noisy_from_x0_eps(x0, noise, sched.alpha_bars[steps - 1])


def _grouped_noise(rng: np.random.Generator, shape: Tuple[int, ...], groups: int, strength: float) -> np.ndarray:
    dim = shape[-1]
    z = rng.standard_normal(shape)
    if strength == 0.0:
        return z
    w = rng.standard_normal(shape[:-1] + (groups,))
    return z + math.sqrt(strength) * np.repeat(w, dim // groups, axis=-1)


def _check_groups(dim: int, groups: int, strength: float) -> None:
    if groups < 1 or dim % groups:
        raise InvalidArgumentError(f"groups ({groups}) must divide dim ({dim})")
    if strength < 0.0:
        raise InvalidArgumentError(f"offset noise strength must be >= 0, got {strength}")


def offset_noise_sample(
    dim: int,
    groups: int = 1,
    strength: float = DEFAULT_OFFSET_STRENGTH,
    seed: int = 0,
    n: int | None = None,
) -> np.ndarray:
    """Noise with covariance ``I + strength·𝟙𝟙ᵀ`` inside each of *groups* equal blocks.

    Returns one ``dim`` vector, or ``(n, dim)`` rows when *n* is given.
    """

    _check_groups(dim, groups, strength)
    shape = (dim,) if n is None else (int(n), dim)
    return _grouped_noise(block_rng(seed, "offset-noise"), shape, groups, strength)


@dataclass
class TrainConfig:
    """Hyper-parameters shared by both training loops.

    ``offset_noise`` is ``None`` (off) or the per-sample offset strength, 0.1 by default
    when enabled. ``final_lr_fraction`` sets the end point of a cosine decay.
    """

    schedule: Schedule
    pred_type: PredType = PredType.V
    batch_size: int = 256
    learning_rate: float = 1e-3
    iterations: int = 4000
    cond_dropout_p: float = 0.1
    offset_noise: float | None = None
    offset_groups: int = 1
    weight_decay: float = 0.01
    final_lr_fraction: float = 0.1
    oms_target: OmsTarget = OmsTarget.V
    seed: int = 0
    log_every: int = 500

    def __post_init__(self) -> None:
        self.pred_type = normalize_pred_type(self.pred_type)
        self.oms_target = normalize_oms_target(self.oms_target)

    def validate(self, kind: ModelKind | str = ModelKind.DENOISER) -> "TrainConfig":
        kind = normalize_model_kind(kind)
        if self.iterations < 1:
            raise ConfigValidationError(f"iterations must be >= 1, got {self.iterations}")
        if self.batch_size < 1:
            raise ConfigValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.cond_dropout_p < 1.0:
            raise ConfigValidationError(f"cond_dropout_p must lie in [0, 1), got {self.cond_dropout_p}")
        if self.learning_rate <= 0.0:
            raise ConfigValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 < self.final_lr_fraction <= 1.0:
            raise ConfigValidationError(f"final_lr_fraction must lie in (0, 1], got {self.final_lr_fraction}")
        if self.offset_noise is not None and self.offset_noise < 0.0:
            raise ConfigValidationError(f"offset_noise strength must be >= 0, got {self.offset_noise}")
        if kind is ModelKind.DENOISER and self.pred_type is PredType.EPSILON and self.schedule.alpha_bars[-1] == 0.0:
            raise ConfigValidationError(
                "epsilon prediction cannot be trained on a zero-terminal-SNR schedule: "
                "x0 = (x_t - sqrt(1 - abar) * eps) / sqrt(abar) is singular at abar_T = 0; "
                "use pred_type 'v' or 'x0'"
            )
        return self

    def learning_rate_at(self, iteration: int) -> float:
        if self.iterations == 1 or self.final_lr_fraction == 1.0:
            return self.learning_rate
        progress = iteration / (self.iterations - 1)
        floor = self.learning_rate * self.final_lr_fraction
        return floor + 0.5 * (self.learning_rate - floor) * (1.0 + math.cos(math.pi * progress))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schedule": self.schedule.to_dict(),
            "pred_type": self.pred_type.value,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "iterations": self.iterations,
            "cond_dropout_p": self.cond_dropout_p,
            "offset_noise": self.offset_noise,
            "offset_groups": self.offset_groups,
            "weight_decay": self.weight_decay,
            "final_lr_fraction": self.final_lr_fraction,
            "oms_target": self.oms_target.value,
            "seed": self.seed,
        }


def _checkpoint(kind: ModelKind, pred_type: str, net: DenseNet, schedule: Schedule) -> Dict[str, Any]:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": kind.value,
        "pred_type": pred_type,
        "schedule": schedule.to_dict(),
    }
    payload.update(net.to_dict())
    return payload


@dataclass(eq=False)
class DenoiserModel:
    """Frozen base network θ together with its prediction type and schedule."""

    net: DenseNet
    pred_type: PredType
    schedule: Schedule
    loss_history: List[float] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        self.pred_type = normalize_pred_type(self.pred_type)

    @property
    def data_dim(self) -> int:
        return self.net.data_dim

    @property
    def class_count(self) -> int:
        return self.net.class_count

    def predict(self, x: np.ndarray, t: int, class_id: np.ndarray | int) -> Prediction:
        _timesteps(t, self.schedule)
        return Prediction(self.pred_type, self.net.forward(x, t / self.schedule.T, class_id))

    def to_checkpoint(self) -> Dict[str, Any]:
        return _checkpoint(ModelKind.DENOISER, self.pred_type.value, self.net, self.schedule)

    def digest(self) -> str:
        return json_digest(self.to_checkpoint())


@dataclass(eq=False)
class OmsModule:
    """Network ψ(x_T^S, c) evaluated at SNR 0 (normalized time 1)."""

    net: DenseNet
    target: OmsTarget
    schedule: Schedule
    loss_history: List[float] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        self.target = normalize_oms_target(self.target)

    @property
    def data_dim(self) -> int:
        return self.net.data_dim

    @property
    def class_count(self) -> int:
        return self.net.class_count

    def raw(self, x: np.ndarray, class_id: np.ndarray | int) -> np.ndarray:
        return self.net.forward(x, 1.0, class_id)

    def predict_v(self, x: np.ndarray, class_id: np.ndarray | int) -> np.ndarray:
        """v-prediction at SNR 0; an x0-target module is negated."""

        out = self.raw(x, class_id)
        return out if self.target is OmsTarget.V else -out

    def to_checkpoint(self) -> Dict[str, Any]:
        return _checkpoint(ModelKind.OMS, self.target.value, self.net, self.schedule)

    def digest(self) -> str:
        return json_digest(self.to_checkpoint())


def model_from_checkpoint(payload: Mapping[str, Any]) -> DenoiserModel | OmsModule:
    try:
        version = int(payload["format_version"])
        kind = normalize_model_kind(payload["kind"])
        pred_type = str(payload["pred_type"])
        schedule = Schedule.from_dict(payload["schedule"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"malformed checkpoint: {exc}") from exc
    if version != CHECKPOINT_FORMAT_VERSION:
        raise InvalidArgumentError(f"unsupported checkpoint format_version {version}")
    net = DenseNet.from_dict(payload)
    if kind is ModelKind.DENOISER:
        return DenoiserModel(net=net, pred_type=pred_type, schedule=schedule)
    return OmsModule(net=net, target=pred_type, schedule=schedule)


def save_model(path: str, model: DenoiserModel | OmsModule) -> None:
    write_json(path, model.to_checkpoint())


def load_model(path: str, expect: ModelKind | str | None = None) -> DenoiserModel | OmsModule:
    model = model_from_checkpoint(read_json(path))
    if expect is not None:
        wanted = normalize_model_kind(expect)
        actual = ModelKind.DENOISER if isinstance(model, DenoiserModel) else ModelKind.OMS
        if wanted is not actual:
            raise InvalidArgumentError(f"{path}: expected a {wanted.value} checkpoint, found {actual.value}")
    return model


def _check_training_inputs(data: Batch, net: DenseNet) -> None:
    if len(data) == 0:
        raise InvalidArgumentError("training data is empty")
    if net.data_dim != data.dim:
        raise InvalidArgumentError(f"network output dimension {net.data_dim} != data dimension {data.dim}")
    if int(data.class_ids.max()) >= net.class_count:
        raise InvalidArgumentError(
            f"class id {int(data.class_ids.max())} exceeds the network's class_count {net.class_count}"
        )


Sampler = Callable[[np.random.Generator, np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray | float, np.ndarray]]


def _fit(net: DenseNet, data: Batch, config: TrainConfig, stream: str, draw: Sampler) -> List[float]:
    """Shared AdamW loop. *draw* maps ``(rng, x0, class_ids)`` to ``(inputs, t_norm, target)``."""

    rng = block_rng(config.seed, stream)
    params = net.parameters()
    state = AdamState.zeros_like(params, config.learning_rate, weight_decay=config.weight_decay)
    history: List[float] = []
    n = len(data)
    for iteration in range(config.iterations):
        picks = rng.integers(0, n, size=config.batch_size)
        x0 = data.values[picks]
        ids = data.class_ids[picks]
        if config.cond_dropout_p > 0.0:
            ids = np.where(rng.random(config.batch_size) < config.cond_dropout_p, NULL_CLASS, ids)
        inputs, t_norm, target = draw(rng, x0, ids)
        out, cache = net.forward(inputs, t_norm, ids, keep_cache=True)
        residual = out - target
        loss = float(np.mean(residual * residual))
        history.append(loss)
        grads = net.backward(cache, residual * (2.0 / residual.size))
        adamw_update(params, grads.as_list(), state, learning_rate=config.learning_rate_at(iteration))
        if config.log_every and (iteration + 1) % config.log_every == 0:
            window = history[-config.log_every:]
            log.info("%s iteration %d/%d loss %.6f", stream, iteration + 1, config.iterations, sum(window) / len(window))
    return history


def train_denoiser(data: Batch, net: DenseNet, config: TrainConfig) -> DenoiserModel:
    """Train θ on ``(x_t, t, c)`` with an ε, v or x0 regression target; *net* is updated in place."""

    config.validate(ModelKind.DENOISER)
    _check_training_inputs(data, net)
    sched = config.schedule
    if config.offset_noise is not None:
        _check_groups(data.dim, config.offset_groups, config.offset_noise)

    def draw(rng: np.random.Generator, x0: np.ndarray, ids: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        t = rng.integers(1, sched.T + 1, size=x0.shape[0])
        if config.offset_noise is None:
            noise = rng.standard_normal(x0.shape)
        else:
            noise = _grouped_noise(rng, x0.shape, config.offset_groups, config.offset_noise)
        abar = sched.alpha_bars[t - 1]
        xt = noisy_from_x0_eps(x0, noise, abar)
        if config.pred_type is PredType.EPSILON:
            target = noise
        elif config.pred_type is PredType.V:
            target = v_from_x0_eps(x0, noise, abar)
        else:
            target = x0
        return xt, t / sched.T, target

    history = _fit(net, data, config, "train-denoiser", draw)
    return DenoiserModel(net=net, pred_type=config.pred_type, schedule=sched, loss_history=history)


def train_oms(data: Batch, net: DenseNet, config: TrainConfig) -> OmsModule:
    """Train ψ on fresh standard-normal inputs independent of x0.

    ``oms_target`` ``v`` regresses ``−x0``; ``x0`` regresses ``x0`` itself.
    """

    config.validate(ModelKind.OMS)
    _check_training_inputs(data, net)
    sign = -1.0 if config.oms_target is OmsTarget.V else 1.0

    def draw(rng: np.random.Generator, x0: np.ndarray, ids: np.ndarray) -> Tuple[np.ndarray, float, np.ndarray]:
        return rng.standard_normal(x0.shape), 1.0, sign * x0

    history = _fit(net, data, config, "train-oms", draw)
    return OmsModule(net=net, target=config.oms_target, schedule=config.schedule, loss_history=history)


def oracle_oms(data: Batch, classes: Sequence[int] | None = None) -> Dict[int, np.ndarray]:
    """Bayes-optimal ψ: ``−mean(x0 | c)`` per class, and ``−mean(x0)`` for the null class."""

    if len(data) == 0:
        raise InvalidArgumentError("oracle_oms needs a non-empty batch")
    wanted = data.classes() if classes is None else [int(c) for c in classes]
    table: Dict[int, np.ndarray] = {}
    for class_id in wanted:
        rows = data.values[data.class_ids == class_id]
        if rows.shape[0] == 0:
            if class_id == NULL_CLASS:
                continue
            raise InvalidArgumentError(f"class {class_id} has no samples")
        table[class_id] = -rows.mean(axis=0)
    if NULL_CLASS not in table:
        table[NULL_CLASS] = -data.values.mean(axis=0)
    return table


@dataclass(eq=False)
class OracleOms:
    """OMS module answering from an :func:`oracle_oms` table."""

    table: Mapping[int, np.ndarray]

    @property
    def data_dim(self) -> int:
        return int(next(iter(self.table.values())).shape[0])

    def predict_v(self, x: np.ndarray, class_id: np.ndarray | int) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        rows = x if x.ndim == 2 else x.reshape(1, -1)
        ids = np.broadcast_to(np.asarray(class_id, dtype=np.int64), (rows.shape[0],))
        try:
            out = np.stack([self.table[int(c)] for c in ids])
        except KeyError as exc:
            raise InvalidArgumentError(f"oracle has no entry for class {exc.args[0]}") from exc
        return out[0] if x.ndim == 1 else out

    def digest(self) -> str:
        return json_digest({str(k): np.asarray(v).tolist() for k, v in sorted(self.table.items())})


@dataclass(frozen=True)
class GaussianClass:
    """``x0 ~ N(mean, scale²·I + offset_scale²·𝟙𝟙ᵀ)``."""

    mean: np.ndarray
    scale: float
    offset_scale: float = 0.0
    weight: float = 1.0


class GaussianOracleDenoiser:
    """Exact posterior denoiser for class-conditional Gaussian data.

    With ``x_t = a·x0 + b·ε`` the conditional law of ``x_t`` is Gaussian with
    covariance ``(a²s² + b²)·I + a²τ²·𝟙𝟙ᵀ``, whose inverse is applied in the
    eigenbasis {𝟙, 𝟙⊥}. The null class 0 is the posterior of the class mixture.
    """

    def __init__(
        self,
        classes: Mapping[int, GaussianClass],
        schedule: Schedule,
        pred_type: PredType | str = PredType.EPSILON,
    ) -> None:
        if not classes:
            raise InvalidArgumentError("oracle needs at least one class")
        self.classes = {int(k): v for k, v in classes.items()}
        self.schedule = schedule
        self.pred_type = normalize_pred_type(pred_type)
        dims = {np.asarray(c.mean).shape[0] for c in self.classes.values()}
        if len(dims) != 1:
            raise InvalidArgumentError("oracle classes must share one dimension")
        self._dim = dims.pop()

    @classmethod
    def from_spec(
        cls,
        spec: ToyDatasetSpec,
        schedule: Schedule,
        pred_type: PredType | str = PredType.EPSILON,
    ) -> "GaussianOracleDenoiser":
        classes = {}
        for toy in spec.classes:
            if len(toy.components) != 1:
                raise InvalidArgumentError(f"class {toy.class_id} is a mixture; the Gaussian oracle needs one component")
            comp = toy.components[0]
            classes[toy.class_id] = GaussianClass(np.asarray(comp.mean), comp.scale, comp.offset_scale)
        return cls(classes, schedule, pred_type)

    @property
    def data_dim(self) -> int:
        return self._dim

    def _posterior(self, x: np.ndarray, gc: GaussianClass, a: float, b: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(E[ε|x], E[x0|x], log N(x; a·m, C))`` for one Gaussian class."""

        dim = self._dim
        s2 = gc.scale**2
        along = s2 + dim * gc.offset_scale**2
        var_perp = a * a * s2 + b * b
        var_along = a * a * along + b * b
        r = x - a * np.asarray(gc.mean)
        r_along = r.mean(axis=1, keepdims=True) * np.ones((1, dim))
        r_perp = r - r_along
        cinv_r = r_perp / var_perp + r_along / var_along
        eps = b * cinv_r
        x0 = np.asarray(gc.mean) + a * (s2 * r_perp / var_perp + along * r_along / var_along)
        quad = np.einsum("ij,ij->i", r, cinv_r)
        logdet = (dim - 1) * math.log(var_perp) + math.log(var_along)
        return eps, x0, -0.5 * (quad + logdet)

    def posterior(self, x: np.ndarray, t: int, class_id: int) -> Tuple[np.ndarray, np.ndarray]:
        abar = self.schedule.alpha_bar(t)
        a, b = math.sqrt(abar), math.sqrt(1.0 - abar)
        if class_id != NULL_CLASS:
            try:
                gc = self.classes[class_id]
            except KeyError as exc:
                raise InvalidArgumentError(f"oracle has no class {class_id}") from exc
            eps, x0, _ = self._posterior(x, gc, a, b)
            return eps, x0
        parts = [self._posterior(x, gc, a, b) for gc in self.classes.values()]
        log_prior = np.log([gc.weight for gc in self.classes.values()])
        weights = softmax(np.stack([p[2] for p in parts], axis=1) + log_prior, axis=1)
        eps = sum(weights[:, [k]] * p[0] for k, p in enumerate(parts))
        x0 = sum(weights[:, [k]] * p[1] for k, p in enumerate(parts))
        return eps, x0

    def predict(self, x: np.ndarray, t: int, class_id: np.ndarray | int) -> Prediction:
        x = np.asarray(x, dtype=np.float64)
        rows = x if x.ndim == 2 else x.reshape(1, -1)
        ids = np.broadcast_to(np.asarray(class_id, dtype=np.int64), (rows.shape[0],))
        eps = np.empty_like(rows)
        x0 = np.empty_like(rows)
        for cid in np.unique(ids):
            mask = ids == cid
            eps[mask], x0[mask] = self.posterior(rows[mask], t, int(cid))
        abar = self.schedule.alpha_bar(t)
        if self.pred_type is PredType.EPSILON:
            out = eps
        elif self.pred_type is PredType.V:
            out = math.sqrt(abar) * eps - math.sqrt(1.0 - abar) * x0
        else:
            out = x0
        return Prediction(self.pred_type, out[0] if x.ndim == 1 else out)

    def digest(self) -> str:
        return json_digest(
            {
                "schedule": self.schedule.to_dict(),
                "pred_type": self.pred_type.value,
                "classes": {
                    str(k): [np.asarray(v.mean).tolist(), v.scale, v.offset_scale, v.weight]
                    for k, v in sorted(self.classes.items())
                },
            }
        )


__all__ = [
    "NULL_CLASS",
    "ToyComponent",
    "ToyClass",
    "ToyDatasetSpec",
    "TrainConfig",
    "DenoiserModel",
    "OmsModule",
    "OracleOms",
    "GaussianClass",
    "GaussianOracleDenoiser",
    "default_toy_spec",
    "generate_dataset",
    "forward_sample",
    "offset_noise_sample",
    "train_denoiser",
    "train_oms",
    "oracle_oms",
    "model_from_checkpoint",
    "save_model",
    "load_model",
]
