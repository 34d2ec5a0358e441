"""A small fully connected network with hand-written reverse-mode gradients.

Kept deliberately minimal: dense layers, one smooth activation on the hidden
layers, linear output.  Parameters live in plain float64 arrays so training
and checkpointing stay dependency-free and bit-reproducible.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Mlp", "ACTIVATIONS"]


def _tanh(z):
    return np.tanh(z)


def _tanh_deriv(z, a):
    return 1.0 - a * a


def _softplus(z):
    return np.logaddexp(0.0, z)


def _softplus_deriv(z, a):
    # derivative is the logistic sigmoid of z
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


ACTIVATIONS = {
    "tanh": (_tanh, _tanh_deriv),
    "softplus": (_softplus, _softplus_deriv),
}


class Mlp:
    """Dense network y = W_L act(... act(x W_1 + b_1) ...) + b_L."""

    __slots__ = ("weights", "biases", "activation")

    def __init__(self, weights, biases, activation: str = "tanh"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if len(weights) != len(biases) or not weights:
            raise ValueError("need one bias vector per weight matrix")
        weights = [np.asarray(w, dtype=np.float64) for w in weights]
        biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise ValueError(f"layer {i}: weight/bias shapes inconsistent")
            if i > 0 and weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: input width does not match previous layer")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: parameters must be finite")
        self.weights = weights
        self.biases = biases
        self.activation = activation

    @classmethod
    def init(cls, sizes, rng: np.random.Generator, activation: str = "tanh") -> "Mlp":
        """Random init: W ~ N(0, 1/n_in), zero biases."""
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError("sizes must list at least input and output widths, all >= 1")
        weights, biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            weights.append(rng.standard_normal((n_in, n_out)) / np.sqrt(n_in))
            biases.append(np.zeros(n_out))
        return cls(weights, biases, activation)

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def apply(self, X: np.ndarray) -> np.ndarray:
        act, _ = ACTIVATIONS[self.activation]
        a = np.asarray(X, dtype=np.float64)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w + b
            if i != last:
                a = act(a)
        return a

    def forward_cache(self, X: np.ndarray):
        """Forward pass keeping the per-layer values backward() needs."""
        act, _ = ACTIVATIONS[self.activation]
        a = np.asarray(X, dtype=np.float64)
        inputs = [a]
        pre = []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            pre.append(z)
            a = act(z) if i != last else z
            if i != last:
                inputs.append(a)
        return a, (inputs, pre)

    def backward(self, cache, dY: np.ndarray):
        """Gradients of sum(dY * y) w.r.t. every weight and bias."""
        inputs, pre = cache
        _, deriv = ACTIVATIONS[self.activation]
        delta = np.asarray(dY, dtype=np.float64)
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            grads_w[i] = inputs[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * deriv(pre[i - 1], inputs[i])
        return grads_w, grads_b

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.activation)

    # flat-vector views, used by the finite-difference gradient checks
    def ravel(self) -> np.ndarray:
        return np.concatenate([w.ravel() for w in self.weights] + [b.ravel() for b in self.biases])

    def with_flat(self, vec: np.ndarray) -> "Mlp":
        vec = np.asarray(vec, dtype=np.float64)
        weights, biases = [], []
        k = 0
        for w in self.weights:
            weights.append(vec[k : k + w.size].reshape(w.shape).copy())
            k += w.size
        for b in self.biases:
            biases.append(vec[k : k + b.size].reshape(b.shape).copy())
            k += b.size
        if k != vec.size:
            raise ValueError("flat vector length does not match parameter count")
        return Mlp(weights, biases, self.activation)
