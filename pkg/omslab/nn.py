# SPDX-FileCopyrightText: 2025 ModelCloud.ai
# SPDX-FileCopyrightText: 2025 qubitium@modelcloud.ai
# SPDX-License-Identifier: Apache-2.0
# Contact: qubitium@modelcloud.ai, x.com/qubitium

"""Dense conditional network with explicit forward/backward passes and AdamW.

The network input is the concatenation of the data vector, a sinusoidal
embedding of the normalized timestep and a learned class-embedding row. Class
0 is the null condition used for classifier-free guidance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Final, List, Mapping, Sequence, Tuple

import numpy as np
from scipy.special import expit

from .error import InvalidArgumentError
from .kinds import Activation, normalize_activation
from .threads import block_rng


CHECKPOINT_FORMAT_VERSION: Final[int] = 1
_MAX_FREQUENCY: Final[float] = 1e4


def time_embedding(t_norm: np.ndarray | float, dim: int) -> np.ndarray:
    """Sinusoidal features: ``dim/2`` geometric frequencies from 1 to 1e4, sines then cosines."""

    t = np.atleast_1d(np.asarray(t_norm, dtype=np.float64)).reshape(-1, 1)
    freqs = np.geomspace(1.0, _MAX_FREQUENCY, dim // 2)
    angles = t * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


def _activate(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind is Activation.SILU:
        return z * expit(z)
    return np.maximum(z, 0.0)


def _activate_grad(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind is Activation.SILU:
        s = expit(z)
        return s * (1.0 + z * (1.0 - s))
    return (z > 0.0).astype(np.float64)


@dataclass
class ForwardCache:
    inputs: np.ndarray
    class_ids: np.ndarray
    pre_activations: List[np.ndarray]
    activations: List[np.ndarray]


@dataclass
class NetGradients:
    """Gradients in the same layout as :meth:`DenseNet.parameters`."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]
    class_embedding: np.ndarray

    def as_list(self) -> List[np.ndarray]:
        out: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        out.append(self.class_embedding)
        return out


@dataclass(eq=False)
class DenseNet:
    """Weights are stored ``(fan_in, fan_out)`` so a layer is ``h @ W + b``."""

    data_dim: int
    hidden: Tuple[int, ...]
    activation: Activation
    time_embed_dim: int
    class_count: int
    class_embed_dim: int
    weights: List[np.ndarray] = field(repr=False)
    biases: List[np.ndarray] = field(repr=False)
    class_embedding: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.activation = normalize_activation(self.activation)
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.data_dim < 1:
            raise InvalidArgumentError("data_dim must be >= 1")
        if self.time_embed_dim < 2 or self.time_embed_dim % 2:
            raise InvalidArgumentError(f"time_embed_dim must be a positive even integer, got {self.time_embed_dim}")
        if self.class_count < 1 or self.class_embed_dim < 1:
            raise InvalidArgumentError("class_count and class_embed_dim must be >= 1")
        if any(h < 1 for h in self.hidden):
            raise InvalidArgumentError("hidden widths must be >= 1")
        widths = self.layer_widths
        if len(self.weights) != len(widths) - 1 or len(self.biases) != len(widths) - 1:
            raise InvalidArgumentError(f"expected {len(widths) - 1} layers, got {len(self.weights)}")
        for index, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (widths[index], widths[index + 1])
            if w.shape != expected or b.shape != (expected[1],):
                raise InvalidArgumentError(f"layer {index} has shapes {w.shape}/{b.shape}, expected {expected}")
        if self.class_embedding.shape != (self.class_count, self.class_embed_dim):
            raise InvalidArgumentError(
                f"class embedding must be {(self.class_count, self.class_embed_dim)}, got {self.class_embedding.shape}"
            )

    @classmethod
    def initialize(
        cls,
        data_dim: int,
        *,
        hidden: Sequence[int] = (256, 256),
        activation: Activation | str = Activation.SILU,
        time_embed_dim: int = 32,
        class_count: int = 4,
        class_embed_dim: int = 16,
        seed: int = 0,
    ) -> "DenseNet":
        """Glorot-uniform weights, zero biases, class embeddings ``0.02·N(0, 1)``."""

        rng = block_rng(seed, "init")
        widths = [data_dim + time_embed_dim + class_embed_dim, *hidden, data_dim]
        weights = []
        biases = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        class_embedding = 0.02 * rng.standard_normal((class_count, class_embed_dim))
        return cls(
            data_dim=data_dim,
            hidden=tuple(hidden),
            activation=normalize_activation(activation),
            time_embed_dim=time_embed_dim,
            class_count=class_count,
            class_embed_dim=class_embed_dim,
            weights=weights,
            biases=biases,
            class_embedding=class_embedding,
        )

    @property
    def layer_widths(self) -> List[int]:
        return [self.data_dim + self.time_embed_dim + self.class_embed_dim, *self.hidden, self.data_dim]

    def parameters(self) -> List[np.ndarray]:
        out: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        out.append(self.class_embedding)
        return out

    def copy(self) -> "DenseNet":
        return DenseNet(
            data_dim=self.data_dim,
            hidden=self.hidden,
            activation=self.activation,
            time_embed_dim=self.time_embed_dim,
            class_count=self.class_count,
            class_embed_dim=self.class_embed_dim,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            class_embedding=self.class_embedding.copy(),
        )

    def _inputs(self, x: np.ndarray, t_norm: np.ndarray | float, class_id: np.ndarray | int) -> Tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        rows = x if x.ndim == 2 else x.reshape(1, -1)
        if rows.shape[1] != self.data_dim:
            raise InvalidArgumentError(f"input has dimension {rows.shape[1]}, network expects {self.data_dim}")
        n = rows.shape[0]
        ids = np.broadcast_to(np.asarray(class_id, dtype=np.int64), (n,))
        if np.any(ids < 0) or np.any(ids >= self.class_count):
            raise InvalidArgumentError(f"class_id must be in [0, {self.class_count}), got {np.unique(ids).tolist()}")
        t = np.broadcast_to(np.asarray(t_norm, dtype=np.float64), (n,))
        features = np.concatenate(
            [rows, time_embedding(t, self.time_embed_dim), self.class_embedding[ids]],
            axis=1,
        )
        return features, np.array(ids)

    def forward(
        self,
        x: np.ndarray,
        t_norm: np.ndarray | float,
        class_id: np.ndarray | int,
        *,
        keep_cache: bool = False,
    ) -> np.ndarray | Tuple[np.ndarray, ForwardCache]:
        """Evaluate the network; a 1-D *x* yields a 1-D output."""

        single = np.asarray(x).ndim == 1
        h, ids = self._inputs(x, t_norm, class_id)
        inputs = h
        pre: List[np.ndarray] = []
        acts: List[np.ndarray] = []
        last = len(self.weights) - 1
        for index, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            if index == last:
                h = z
                break
            pre.append(z)
            h = _activate(self.activation, z)
            acts.append(h)
        out = h[0] if single else h
        if keep_cache:
            return out, ForwardCache(inputs=inputs, class_ids=ids, pre_activations=pre, activations=acts)
        return out

    def backward(self, cache: ForwardCache, upstream: np.ndarray) -> NetGradients:
        """Gradients of ``Σ output·upstream`` summed over the batch."""

        grad = np.asarray(upstream, dtype=np.float64)
        if grad.ndim == 1:
            grad = grad.reshape(1, -1)
        if grad.shape != (cache.inputs.shape[0], self.data_dim):
            raise InvalidArgumentError(f"upstream gradient has shape {grad.shape}")
        layer_inputs = [cache.inputs, *cache.activations]
        grad_w: List[np.ndarray] = [np.empty(0)] * len(self.weights)
        grad_b: List[np.ndarray] = [np.empty(0)] * len(self.weights)
        for index in range(len(self.weights) - 1, -1, -1):
            grad_w[index] = layer_inputs[index].T @ grad
            grad_b[index] = grad.sum(axis=0)
            grad = grad @ self.weights[index].T
            if index > 0:
                grad = grad * _activate_grad(self.activation, cache.pre_activations[index - 1])
        offset = self.data_dim + self.time_embed_dim
        grad_embed = np.zeros_like(self.class_embedding)
        np.add.at(grad_embed, cache.class_ids, grad[:, offset:])
        return NetGradients(weights=grad_w, biases=grad_b, class_embedding=grad_embed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "arch": {
                "widths": self.layer_widths,
                "embeds": {"time": self.time_embed_dim, "class": self.class_embed_dim},
                "activation": self.activation.value,
                "class_count": self.class_count,
            },
            "weights": {
                "layers": [{"W": w.tolist(), "b": b.tolist()} for w, b in zip(self.weights, self.biases)],
                "class_embedding": self.class_embedding.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "DenseNet":
        try:
            arch = payload["arch"]
            widths = [int(w) for w in arch["widths"]]
            time_dim = int(arch["embeds"]["time"])
            class_dim = int(arch["embeds"]["class"])
            layers = payload["weights"]["layers"]
            weights = [np.asarray(layer["W"], dtype=np.float64) for layer in layers]
            biases = [np.asarray(layer["b"], dtype=np.float64) for layer in layers]
            class_embedding = np.asarray(payload["weights"]["class_embedding"], dtype=np.float64)
            data_dim = widths[-1]
            activation = arch["activation"]
            class_count = int(arch["class_count"])
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise InvalidArgumentError(f"malformed network payload: {exc}") from exc
        if widths[0] != data_dim + time_dim + class_dim:
            raise InvalidArgumentError("input width must equal data_dim + time and class embedding widths")
        return cls(
            data_dim=data_dim,
            hidden=tuple(widths[1:-1]),
            activation=activation,
            time_embed_dim=time_dim,
            class_count=class_count,
            class_embed_dim=class_dim,
            weights=weights,
            biases=biases,
            class_embedding=class_embedding,
        )


def net_forward(net: DenseNet, x: np.ndarray, t_norm: np.ndarray | float, class_id: np.ndarray | int) -> np.ndarray:
    return net.forward(x, t_norm, class_id)


def net_backward(
    net: DenseNet,
    x: np.ndarray,
    t_norm: np.ndarray | float,
    class_id: np.ndarray | int,
    upstream_grad: np.ndarray,
) -> NetGradients:
    _, cache = net.forward(x, t_norm, class_id, keep_cache=True)
    return net.backward(cache, upstream_grad)


@dataclass
class AdamState:
    learning_rate: float
    first_moment: List[np.ndarray]
    second_moment: List[np.ndarray]
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    eps: float = 1e-8

    @classmethod
    def zeros_like(
        cls,
        params: Sequence[np.ndarray],
        learning_rate: float,
        *,
        weight_decay: float = 0.01,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> "AdamState":
        if learning_rate <= 0.0:
            raise InvalidArgumentError(f"learning_rate must be > 0, got {learning_rate}")
        return cls(
            learning_rate=float(learning_rate),
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
            beta1=beta1,
            beta2=beta2,
            weight_decay=weight_decay,
            eps=eps,
        )


def adamw_update(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    *,
    learning_rate: float | None = None,
) -> Tuple[Sequence[np.ndarray], AdamState]:
    """One AdamW step applied in place: decoupled decay first, then the bias-corrected Adam move."""

    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise InvalidArgumentError("params, grads and optimizer state must have the same length")
    for p, g, m in zip(params, grads, state.first_moment):
        if p.shape != g.shape or p.shape != m.shape:
            raise InvalidArgumentError(f"shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")

    lr = state.learning_rate if learning_rate is None else float(learning_rate)
    step = state.step_count + 1
    correction1 = 1.0 - state.beta1**step
    correction2 = 1.0 - state.beta2**step
    decay = 1.0 - lr * state.weight_decay
    staged = []
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m_new = state.beta1 * m + (1.0 - state.beta1) * g
        v_new = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        p_new = p * decay if state.weight_decay else p.copy()
        p_new -= lr * (m_new / correction1) / (np.sqrt(v_new / correction2) + state.eps)
        if not (np.all(np.isfinite(p_new)) and np.all(np.isfinite(m_new)) and np.all(np.isfinite(v_new))):
            raise InvalidArgumentError("non-finite parameter after AdamW update; lower the learning rate")
        staged.append((p_new, m_new, v_new))

    # nothing is written until every tensor checked out
    for (p, m, v), (p_new, m_new, v_new) in zip(zip(params, state.first_moment, state.second_moment), staged):
        p[...] = p_new
        m[...] = m_new
        v[...] = v_new
    state.step_count = step
    return params, state


__all__ = [
    "CHECKPOINT_FORMAT_VERSION",
    "DenseNet",
    "ForwardCache",
    "NetGradients",
    "AdamState",
    "time_embedding",
    "net_forward",
    "net_backward",
    "adamw_update",
]
