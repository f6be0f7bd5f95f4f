"""Minimal dense feed-forward network with exposed per-layer taps.

Forward:   s(l) = W(l) a(l-1) + b(l),   a(l) = act(s(l)),   logits = s(L)
Backward:  g(L) = softmax(logits) - onehot(label)
           g(l-1) = W(l)^T g(l) * act'(s(l-1))
Grads:     dW(l) = g(l) a(l-1)^T,   db(l) = g(l)

Every intermediate activation a(l) and loss-to-pre-activation gradient g(l)
is recorded in a SampleTaps so downstream scoring can form embedding and
gradient similarities without re-running passes. All arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import serialize


class Activation(str, Enum):
    LINEAR = "linear"
    RELU = "relu"
    TANH = "tanh"


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: Activation

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"layer dims must be positive, got {self.in_dim}x{self.out_dim}")


@dataclass
class Layer:
    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)
    spec: LayerSpec


@dataclass
class MLP:
    layers: list[Layer]
    seed: int = 0

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        for i, layer in enumerate(self.layers):
            spec = layer.spec
            if layer.weights.shape != (spec.out_dim, spec.in_dim):
                raise ValueError(f"layer {i}: weight shape {layer.weights.shape} != spec")
            if layer.bias.shape != (spec.out_dim,):
                raise ValueError(f"layer {i}: bias shape {layer.bias.shape} != spec")
            if i > 0 and spec.in_dim != self.layers[i - 1].spec.out_dim:
                raise ValueError(f"layer {i}: in_dim {spec.in_dim} != previous out_dim")
            if not (np.all(np.isfinite(layer.weights)) and np.all(np.isfinite(layer.bias))):
                raise ValueError(f"layer {i}: non-finite parameters")
        if self.layers[-1].spec.activation is not Activation.LINEAR:
            raise ValueError("final layer activation must be linear (logits feed softmax)")

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].spec.in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].spec.out_dim

    @property
    def num_params(self) -> int:
        return sum(l.weights.size + l.bias.size for l in self.layers)

    def copy(self) -> "MLP":
        return MLP(
            layers=[Layer(l.weights.copy(), l.bias.copy(), l.spec) for l in self.layers],
            seed=self.seed,
        )

    @staticmethod
    def initialize(dims: list[int], activations: list[Activation | str], seed: int = 0) -> "MLP":
        """Build a seeded net; weights uniform in [-1/sqrt(in_dim), +1/sqrt(in_dim)], biases zero."""
        if len(dims) < 2:
            raise ValueError("dims must list input plus at least one layer output")
        if len(activations) != len(dims) - 1:
            raise ValueError("need one activation per layer")
        rng = np.random.default_rng(seed)
        layers = []
        for i in range(len(dims) - 1):
            act = Activation(activations[i])
            spec = LayerSpec(dims[i], dims[i + 1], act)
            bound = 1.0 / np.sqrt(spec.in_dim)
            w = rng.uniform(-bound, bound, size=(spec.out_dim, spec.in_dim))
            b = np.zeros(spec.out_dim)
            layers.append(Layer(w, b, spec))
        return MLP(layers=layers, seed=seed)


@dataclass
class SampleTaps:
    """Per-sample forward/backward record: a(0..L-1), s(1..L), loss, g(1..L)."""

    activations: list[np.ndarray]
    pre_activations: list[np.ndarray]
    loss: float | None = None
    output_grad: np.ndarray | None = None
    layer_grads: list[np.ndarray] | None = None

    @property
    def complete(self) -> bool:
        return self.layer_grads is not None and self.output_grad is not None


@dataclass
class ParamGrads:
    weight_grads: list[np.ndarray]
    bias_grads: list[np.ndarray]

    def flatten(self) -> np.ndarray:
        parts: list[np.ndarray] = []
        for w, b in zip(self.weight_grads, self.bias_grads):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)


def _apply_activation(kind: Activation, s: np.ndarray) -> np.ndarray:
    if kind is Activation.LINEAR:
        return s
    if kind is Activation.RELU:
        return np.maximum(s, 0.0)
    return np.tanh(s)


def _activation_derivative(kind: Activation, s: np.ndarray) -> np.ndarray:
    if kind is Activation.LINEAR:
        return np.ones_like(s)
    if kind is Activation.RELU:
        # derivative at exactly 0 is 0 (deterministic tie-break)
        return (s > 0.0).astype(np.float64)
    t = np.tanh(s)
    return 1.0 - t * t


def forward(net: MLP, x: np.ndarray) -> tuple[np.ndarray, SampleTaps]:
    """Run the forward pass, recording every a(l) and s(l)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.in_dim,):
        raise ValueError(f"input shape {x.shape} != ({net.in_dim},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    activations = [x]
    pre_activations = []
    a = x
    for i, layer in enumerate(net.layers):
        s = layer.weights @ a + layer.bias
        pre_activations.append(s)
        a = _apply_activation(layer.spec.activation, s)
        if i < net.depth - 1:
            activations.append(a)
    logits = pre_activations[-1]
    return logits, SampleTaps(activations=activations, pre_activations=pre_activations)


def loss_and_output_grad(logits: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """Softmax cross-entropy loss and its gradient w.r.t. the logits.

    loss = -log softmax(logits)[label],  g = softmax(logits) - onehot(label)
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    if not 0 <= label < logits.shape[0]:
        raise ValueError(f"label {label} out of range for {logits.shape[0]} logits")
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    total = exp.sum()
    probs = exp / total
    loss = float(np.log(total) - shifted[label])
    grad = probs.copy()
    grad[label] -= 1.0
    return loss, grad


def backward_taps(net: MLP, taps: SampleTaps, output_grad: np.ndarray) -> SampleTaps:
    """Complete taps with g(l) = dloss/ds(l) for every layer, top down."""
    if len(taps.pre_activations) != net.depth:
        raise ValueError("taps do not match network depth")
    g = np.asarray(output_grad, dtype=np.float64)
    if g.shape != (net.out_dim,):
        raise ValueError(f"output grad shape {g.shape} != ({net.out_dim},)")
    grads = [g]
    for l in range(net.depth - 1, 0, -1):
        upstream = net.layers[l].weights.T @ grads[0]
        s_prev = taps.pre_activations[l - 1]
        grads.insert(0, upstream * _activation_derivative(net.layers[l - 1].spec.activation, s_prev))
    taps.output_grad = g
    taps.layer_grads = grads
    return taps


def param_grads(taps: SampleTaps) -> ParamGrads:
    """Per-layer gradients dW(l) = g(l) a(l-1)^T, db(l) = g(l)."""
    if not taps.complete:
        raise ValueError("taps are incomplete: run backward_taps first")
    weight_grads = [np.outer(g, a) for g, a in zip(taps.layer_grads, taps.activations)]
    bias_grads = [g.copy() for g in taps.layer_grads]
    return ParamGrads(weight_grads=weight_grads, bias_grads=bias_grads)


def evaluate_sample(net: MLP, x: np.ndarray, label: int) -> SampleTaps:
    """Forward + loss + backward in one call; returns completed taps."""
    logits, taps = forward(net, x)
    loss, g = loss_and_output_grad(logits, label)
    taps.loss = loss
    return backward_taps(net, taps, g)


def save_checkpoint(net: MLP, path: str | Path) -> None:
    """Write the net as JSON; reals carry 17 significant digits (exact round trip)."""
    doc = {
        "format": "mlp-checkpoint-v1",
        "seed": net.seed,
        "layers": [
            {
                "in_dim": l.spec.in_dim,
                "out_dim": l.spec.out_dim,
                "activation": l.spec.activation.value,
                "weights": [list(map(float, row)) for row in l.weights],
                "bias": list(map(float, l.bias)),
            }
            for l in net.layers
        ],
    }
    serialize.dump_json(doc, path)


def load_checkpoint(path: str | Path) -> MLP:
    doc = serialize.load_json(path)
    if doc.get("format") != "mlp-checkpoint-v1":
        raise ValueError(f"unrecognized checkpoint format in {path}")
    layers = []
    for entry in doc["layers"]:
        spec = LayerSpec(entry["in_dim"], entry["out_dim"], Activation(entry["activation"]))
        w = np.array(entry["weights"], dtype=np.float64)
        b = np.array(entry["bias"], dtype=np.float64)
        layers.append(Layer(w, b, spec))
    return MLP(layers=layers, seed=int(doc["seed"]))
