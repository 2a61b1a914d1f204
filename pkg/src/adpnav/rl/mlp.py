"""Plain numpy multilayer perceptrons with hand-written reverse mode.

Weights are stored as (out, in) matrices so a layer computes ``x @ W.T + b``
on a batch of row vectors. Hidden layers use ReLU; the output layer is either
tanh or identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch

ACTIVATIONS = ("relu", "tanh", "identity")


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_grad(name: str, z: np.ndarray, a: np.ndarray, g: np.ndarray) -> np.ndarray:
    if name == "relu":
        return g * (z > 0.0)
    if name == "tanh":
        return g * (1.0 - a * a)
    return g


@dataclass
class Mlp:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]

    @classmethod
    def create(
        cls,
        sizes: list[int],
        out_activation: str = "identity",
        rng: np.random.Generator | None = None,
        out_scale: float = 1.0,
    ) -> "Mlp":
        """Uniform fan-in initialisation, U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
        rng = rng if rng is not None else np.random.default_rng(0)
        weights, biases = [], []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = 1.0 / math.sqrt(n_in)
            scale = out_scale if i == len(sizes) - 2 else 1.0
            weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)) * scale)
            biases.append(rng.uniform(-bound, bound, size=n_out) * scale)
        acts = ["relu"] * (len(sizes) - 2) + [out_activation]
        return cls(weights, biases, acts)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def params(self) -> list[np.ndarray]:
        """Flat parameter list in layer order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases], list(self.activations))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return forward(self, x)


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    return forward_cache(net, x)[0]


def forward_cache(net: Mlp, x: np.ndarray):
    """Forward pass that also returns (pre-activations, activations) per layer."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    a = x[None] if single else x
    if a.shape[-1] != net.sizes[0]:
        raise ShapeMismatch(f"expected input width {net.sizes[0]}, got {a.shape[-1]}")
    zs, acts = [], [a]
    for w, b, name in zip(net.weights, net.biases, net.activations):
        z = a @ w.T + b
        a = _act(name, z)
        zs.append(z)
        acts.append(a)
    out = a[0] if single else a
    return out, (single, zs, acts)


def backward_cache(net: Mlp, cache, upstream: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Gradients of sum(upstream * output) w.r.t. params and input, given a forward cache."""
    single, zs, acts = cache
    g = np.asarray(upstream, dtype=float)
    g = g[None] if single else g
    if g.shape != acts[-1].shape:
        raise ShapeMismatch(f"upstream gradient shape {g.shape} does not match output {acts[-1].shape}")
    grads: list[np.ndarray] = [None] * (2 * len(net.weights))  # type: ignore[list-item]
    for layer in range(len(net.weights) - 1, -1, -1):
        g = _act_grad(net.activations[layer], zs[layer], acts[layer + 1], g)
        grads[2 * layer] = g.T @ acts[layer]
        grads[2 * layer + 1] = g.sum(axis=0)
        g = g @ net.weights[layer]
    return grads, (g[0] if single else g)


def backward(net: Mlp, x: np.ndarray, upstream: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Exact reverse-mode gradients of the forward map (parameter grads follow ``Mlp.params``)."""
    _, cache = forward_cache(net, x)
    return backward_cache(net, cache, upstream)


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def polyak(target: Mlp, online: Mlp, tau: float) -> None:
    """In place: target <- (1 - tau) * target + tau * online."""
    for pt, po in zip(target.params, online.params):
        pt *= 1.0 - tau
        pt += tau * po
