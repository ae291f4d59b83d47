"""Fully connected networks with exact analytic gradients.

Rows are samples. A 1-D input is treated as a single sample and the output is
returned 1-D again, so ``forward(net, x)`` works on vectors and batches alike.
"""
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from pmc.errors import ArgumentError, InputShapeError, StateError


@dataclass
class DenseNet:
    """Rectifier hidden layers, identity output layer.

    ``weights[l]`` has shape ``(layer_sizes[l + 1], layer_sizes[l])`` and
    ``biases[l]`` has shape ``(layer_sizes[l + 1],)``.
    """
    layer_sizes: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        self.layer_sizes = tuple(int(n) for n in self.layer_sizes)
        if len(self.layer_sizes) < 2 or any(n <= 0 for n in self.layer_sizes):
            raise ArgumentError(f"layer_sizes must hold at least two positive sizes (provided {self.layer_sizes})")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise StateError(f"expected {len(self.layer_sizes) - 1} weight/bias pairs, got {len(self.weights)}/{len(self.biases)}")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            n_in, n_out = self.layer_sizes[l], self.layer_sizes[l + 1]
            if W.shape != (n_out, n_in) or b.shape != (n_out,):
                raise StateError(f"layer {l}: weight {W.shape} / bias {b.shape} do not match {n_in}->{n_out}")
            if not (np.isfinite(W).all() and np.isfinite(b).all()):
                raise StateError(f"layer {l} holds non-finite parameters")

    @classmethod
    def initialize(cls, layer_sizes: Sequence[int], rng: np.random.Generator) -> "DenseNet":
        """Uniform init in +-sqrt(6 / (n_in + n_out)), zero biases."""
        weights, biases = [], []
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            limit = np.sqrt(6.0 / (n_in + n_out))
            weights.append(rng.uniform(-limit, limit, size=(n_out, n_in)))
            biases.append(np.zeros(n_out))
        return cls(tuple(layer_sizes), weights, biases)

    @classmethod
    def zeros(cls, layer_sizes: Sequence[int]) -> "DenseNet":
        weights = [np.zeros((n_out, n_in)) for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:])]
        biases = [np.zeros(n_out) for n_out in layer_sizes[1:]]
        return cls(tuple(layer_sizes), weights, biases)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def params(self) -> List[np.ndarray]:
        """Parameter arrays in ``[W0, b0, W1, b1, ...]`` order (live references)."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend([W, b])
        return out

    @property
    def n_params(self) -> int:
        return sum(n_in * n_out + n_out for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    def copy(self) -> "DenseNet":
        return DenseNet(self.layer_sizes, [W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def freeze(self) -> "DenseNet":
        for p in self.params:
            p.setflags(write=False)
        return self


class Activations(NamedTuple):
    inputs: Tuple[np.ndarray, ...]
    preacts: Tuple[np.ndarray, ...]
    batched: bool


class Gradients(NamedTuple):
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    input: np.ndarray

    def as_list(self) -> List[np.ndarray]:
        out = []
        for dW, db in zip(self.weights, self.biases):
            out.extend([dW, db])
        return out


def forward(net: DenseNet, x) -> Tuple[Activations, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    a = np.atleast_2d(x)
    if x.ndim not in (1, 2) or a.shape[1] != net.input_dim:
        raise InputShapeError(f"input of shape {x.shape} does not fit a network expecting {net.input_dim} features")

    inputs, preacts = [], []
    last = len(net.weights) - 1
    for l, (W, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(a)
        z = a @ W.T + b
        preacts.append(z)
        a = np.maximum(z, 0.0) if l < last else z

    if not np.isfinite(a).all():
        raise StateError("forward pass produced non-finite values")
    output = a if batched else a[0]
    return Activations(tuple(inputs), tuple(preacts), batched), output


def backward(net: DenseNet, activations: Activations, output_grad) -> Gradients:
    """Backpropagate ``output_grad`` (dLoss/dOutput); parameter gradients are summed over rows."""
    g = np.atleast_2d(np.asarray(output_grad, dtype=np.float64))
    if len(activations.preacts) != len(net.weights) or g.shape != activations.preacts[-1].shape:
        raise StateError(f"output gradient {g.shape} does not match the cached forward pass")

    dWs, dbs = [None] * len(net.weights), [None] * len(net.weights)
    last = len(net.weights) - 1
    for l in range(last, -1, -1):
        a_in, z, W = activations.inputs[l], activations.preacts[l], net.weights[l]
        if a_in.shape[1] != W.shape[1] or z.shape[1] != W.shape[0]:
            raise StateError(f"cached activations of layer {l} are stale")
        delta = g * (z > 0.0) if l < last else g
        dWs[l] = delta.T @ a_in
        dbs[l] = delta.sum(axis=0)
        g = delta @ W

    dx = g if activations.batched else g[0]
    return Gradients(dWs, dbs, dx)
