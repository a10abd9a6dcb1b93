"""Minimal dense/1-D convolutional network engine with explicit backprop.

Everything runs in double precision on numpy. Layers cache what they need
during forward and expose parameter/gradient lists in a fixed order, so a
network is just a list of layers plus softmax cross-entropy on top. Adam
with bias correction is the only optimizer; a central finite-difference
gradient checker backs the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ADAM_LEARNING_RATE = 0.01
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

DEFAULT_BATCH_SIZE = 256


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def he_uniform(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class DenseLayer:
    """Fully connected layer: y = activation(x @ W.T + b)."""

    def __init__(self, n_in: int, n_out: int, activation: str = "relu",
                 rng: np.random.Generator | None = None):
        if activation not in ("relu", "identity"):
            raise ValueError(f"unknown activation {activation!r}")
        rng = rng or np.random.default_rng(0)
        self.weights = he_uniform(rng, n_in, (n_out, n_in))
        self.biases = np.zeros(n_out)
        self.activation = activation
        self._x: np.ndarray | None = None
        self._pre: np.ndarray | None = None
        self.grad_weights = np.zeros_like(self.weights)
        self.grad_biases = np.zeros_like(self.biases)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.weights.shape[1]:
            raise ValueError(
                f"dense layer expects (batch, {self.weights.shape[1]}) input, got {x.shape}"
            )
        self._x = x
        self._pre = x @ self.weights.T + self.biases
        return relu(self._pre) if self.activation == "relu" else self._pre

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dpre = dy * (self._pre > 0) if self.activation == "relu" else dy
        self.grad_weights = dpre.T @ self._x
        self.grad_biases = dpre.sum(axis=0)
        return dpre @ self.weights

    @property
    def params(self) -> list[np.ndarray]:
        return [self.weights, self.biases]

    @property
    def grads(self) -> list[np.ndarray]:
        return [self.grad_weights, self.grad_biases]

    def spec(self) -> dict:
        return {
            "type": "dense",
            "n_in": self.weights.shape[1],
            "n_out": self.weights.shape[0],
            "activation": self.activation,
        }


class Conv1DLayer:
    """Valid (no-padding) cross-correlation over the time axis, then ReLU.

    Input (batch, in_ch, w) -> output (batch, out_ch, w - kernel_width + 1).
    """

    def __init__(self, in_ch: int, out_ch: int, kernel_width: int = 3,
                 rng: np.random.Generator | None = None):
        if kernel_width % 2 == 0:
            raise ValueError(f"kernel_width must be odd, got {kernel_width}")
        rng = rng or np.random.default_rng(0)
        self.kernels = he_uniform(rng, in_ch * kernel_width, (out_ch, in_ch, kernel_width))
        self.biases = np.zeros(out_ch)
        self._windows: np.ndarray | None = None
        self._pre: np.ndarray | None = None
        self.grad_kernels = np.zeros_like(self.kernels)
        self.grad_biases = np.zeros_like(self.biases)

    @property
    def kernel_width(self) -> int:
        return self.kernels.shape[2]

    def forward(self, x: np.ndarray) -> np.ndarray:
        kw = self.kernel_width
        if x.ndim != 3 or x.shape[1] != self.kernels.shape[1]:
            raise ValueError(
                f"conv layer expects (batch, {self.kernels.shape[1]}, w) input, got {x.shape}"
            )
        if x.shape[2] < kw:
            raise ValueError(f"input width {x.shape[2]} shorter than kernel {kw}")
        windows = np.lib.stride_tricks.sliding_window_view(x, kw, axis=2)
        self._windows = windows  # (batch, in_ch, w_out, kw)
        self._pre = np.einsum("bcok,dck->bdo", windows, self.kernels) + self.biases[None, :, None]
        return relu(self._pre)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        kw = self.kernel_width
        dpre = dy * (self._pre > 0)
        self.grad_kernels = np.einsum("bcok,bdo->dck", self._windows, dpre)
        self.grad_biases = dpre.sum(axis=(0, 2))
        pad = np.pad(dpre, ((0, 0), (0, 0), (kw - 1, kw - 1)))
        dy_windows = np.lib.stride_tricks.sliding_window_view(pad, kw, axis=2)
        return np.einsum("bdtk,dck->bct", dy_windows, self.kernels[:, :, ::-1])

    @property
    def params(self) -> list[np.ndarray]:
        return [self.kernels, self.biases]

    @property
    def grads(self) -> list[np.ndarray]:
        return [self.grad_kernels, self.grad_biases]

    def spec(self) -> dict:
        return {
            "type": "conv1d",
            "in_ch": self.kernels.shape[1],
            "out_ch": self.kernels.shape[0],
            "kernel_width": self.kernel_width,
        }


class Flatten:
    """(batch, ch, w) -> (batch, ch * w)."""

    def __init__(self):
        self._shape: tuple[int, ...] | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy.reshape(self._shape)

    params: list[np.ndarray] = []
    grads: list[np.ndarray] = []

    def spec(self) -> dict:
        return {"type": "flatten"}


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(
    logits: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of softmax(logits) against integer targets.

    Returns (loss, gradient wrt logits); the gradient already carries the
    1/batch factor, so summing per-sample terms downstream gives the
    mean-loss gradient.
    """
    targets = np.asarray(targets)
    batch, n_classes = logits.shape
    if len(targets) != batch:
        raise ValueError(f"{batch} logit rows but {len(targets)} targets")
    if targets.size and (targets.min() < 0 or targets.max() >= n_classes):
        raise IndexError(f"target outside [0, {n_classes})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(batch)
    loss = float(np.mean(log_norm - shifted[rows, targets]))
    grad = softmax(logits)
    grad[rows, targets] -= 1.0
    return loss, grad / batch


class Network:
    """A feed-forward stack of layers trained with softmax cross-entropy."""

    def __init__(self, layers: list):
        self.layers = layers

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.forward(x))

    def loss_and_gradients(self, x: np.ndarray, targets: np.ndarray) -> float:
        """Forward + full backward pass; gradients land on each layer."""
        loss, grad = softmax_cross_entropy(self.forward(x), targets)
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return loss

    @property
    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params]

    @property
    def grads(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads]

    def set_params(self, values: list[np.ndarray]) -> None:
        own = self.params
        if len(own) != len(values):
            raise ValueError(f"expected {len(own)} parameter arrays, got {len(values)}")
        for p, v in zip(own, values):
            if p.shape != v.shape:
                raise ValueError(f"parameter shape mismatch: {p.shape} vs {v.shape}")
            p[...] = v

    def specs(self) -> list[dict]:
        return [layer.spec() for layer in self.layers]


def network_from_specs(specs: list[dict], rng: np.random.Generator | None = None) -> Network:
    layers = []
    for s in specs:
        if s["type"] == "dense":
            layers.append(DenseLayer(s["n_in"], s["n_out"], s["activation"], rng))
        elif s["type"] == "conv1d":
            layers.append(Conv1DLayer(s["in_ch"], s["out_ch"], s["kernel_width"], rng))
        elif s["type"] == "flatten":
            layers.append(Flatten())
        else:
            raise ValueError(f"unknown layer type {s['type']!r}")
    return Network(layers)


@dataclass
class AdamState:
    """Adam optimizer state; moment arrays are shaped like the parameters."""

    learning_rate: float = ADAM_LEARNING_RATE
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON
    step_count: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[np.ndarray], learning_rate: float = ADAM_LEARNING_RATE):
        return cls(
            learning_rate=learning_rate,
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
        )


def adam_step(
    params: list[np.ndarray], grads: list[np.ndarray], state: AdamState
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update, applied to the parameters in place."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ValueError("params, grads and state must have matching lengths")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params, state


def train_network(
    net: Network,
    x: np.ndarray,
    y: np.ndarray,
    epochs: int,
    batch_size: int = DEFAULT_BATCH_SIZE,
    seed: int = 0,
    learning_rate: float = ADAM_LEARNING_RATE,
) -> list[float]:
    """Seeded mini-batch Adam training; returns per-epoch mean losses."""
    if len(x) != len(y):
        raise ValueError(f"{len(x)} inputs but {len(y)} targets")
    if len(x) == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(seed)
    state = AdamState.for_params(net.params, learning_rate)
    history = []
    n = len(x)
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            loss = net.loss_and_gradients(x[batch], y[batch])
            adam_step(net.params, net.grads, state)
            total += loss * len(batch)
        history.append(total / n)
    return history


def finite_difference_gradients(
    loss_fn, params: list[np.ndarray], step: float = 1e-5
) -> list[np.ndarray]:
    """Central finite differences of `loss_fn()` wrt each parameter entry.

    `loss_fn` must read the (mutated in place) parameter arrays on each
    call. Intended for tests; cost is two evaluations per entry.
    """
    grads = []
    for p in params:
        g = np.zeros_like(p)
        flat_p = p.ravel()
        flat_g = g.ravel()
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + step
            up = loss_fn()
            flat_p[i] = orig - step
            down = loss_fn()
            flat_p[i] = orig
            flat_g[i] = (up - down) / (2.0 * step)
        grads.append(g)
    return grads


def check_gradients(
    net: Network, x: np.ndarray, targets: np.ndarray, step: float = 1e-5,
    floor: float = 1e-6,
) -> float:
    """Worst relative error between backprop and central finite differences.

    The numeric side only ever calls `forward`; when perturbing layer L's
    parameters the activations entering L are fixed, so the prefix is
    computed once per layer instead of per evaluation (exact, just faster).
    """
    net.loss_and_gradients(x, targets)
    analytic = [g.copy() for g in net.grads]

    numeric: list[np.ndarray] = []
    prefix = x
    for li, layer in enumerate(net.layers):
        if layer.params:
            suffix = net.layers[li:]

            def loss_from_here():
                h = prefix
                for l in suffix:
                    h = l.forward(h)
                return softmax_cross_entropy(h, targets)[0]

            numeric.extend(finite_difference_gradients(loss_from_here, layer.params, step))
        prefix = layer.forward(prefix)
    return max_relative_error(analytic, numeric, floor)


def max_relative_error(
    analytic: list[np.ndarray], numeric: list[np.ndarray], floor: float = 1e-6
) -> float:
    """Worst-case |a - n| / max(|a|, |n|, floor) over all parameter entries.

    The floor keeps dead units (both gradients ~ 0) from dominating.
    """
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst
