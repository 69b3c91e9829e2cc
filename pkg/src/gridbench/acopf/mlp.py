"""Tanh MLP mapping load vectors to grid decisions, with manual backprop.

The raw network output is squashed into the box constraints where the
decision is naturally bounded: vm through a sigmoid window over the bus
voltage band, pg likewise over the generator active range; va and qg pass
through unsquashed (the slack angle is pinned downstream). Inputs are
standardized with the training-set statistics stored on the model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .space import DecisionSpace
from ..rng import Rng


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class MlpModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input_mean: np.ndarray
    input_std: np.ndarray
    space: DecisionSpace = field(repr=False)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self) -> "MlpModel":
        return MlpModel(weights=[w.copy() for w in self.weights],
                        biases=[b.copy() for b in self.biases],
                        input_mean=self.input_mean.copy(),
                        input_std=self.input_std.copy(),
                        space=self.space)


def build_mlp(space: DecisionSpace, hidden_layers: int = 2, width: int = 200,
              seed: int = 0, train_inputs: np.ndarray | None = None) -> MlpModel:
    """Seeded He-style initialization; output layer starts near zero so the
    squashed decision begins mid-band."""
    n_in = 2 * space.n_load
    n_out = space.dim
    sizes = [n_in] + [width] * hidden_layers + [n_out]
    rng = Rng(seed)
    weights, biases = [], []
    for a, bdim in zip(sizes[:-1], sizes[1:]):
        scale = 1.0 / np.sqrt(a)
        weights.append(rng.normals(a * bdim, 0.0, scale).reshape(a, bdim))
        biases.append(np.zeros(bdim))
    weights[-1] *= 0.1
    if train_inputs is not None:
        mean = train_inputs.mean(axis=0)
        std = np.maximum(train_inputs.std(axis=0), 1e-6)
    else:
        mean = np.zeros(n_in)
        std = np.ones(n_in)
    return MlpModel(weights=weights, biases=biases, input_mean=mean,
                    input_std=std, space=space)


def mlp_forward(model: MlpModel, inputs: np.ndarray):
    """Returns (decision batch, cache for backprop)."""
    space = model.space
    x = (np.atleast_2d(inputs) - model.input_mean) / model.input_std
    activations = [x]
    h = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        h = np.tanh(h @ w + b)
        activations.append(h)
    raw = h @ model.weights[-1] + model.biases[-1]

    n, g = space.n_bus, space.n_gen
    z_vm = raw[:, :n]
    z_va = raw[:, n:2 * n]
    z_pg = raw[:, 2 * n:2 * n + g]
    z_qg = raw[:, 2 * n + g:]
    s_vm = _sigmoid(z_vm)
    s_pg = _sigmoid(z_pg)
    vm = space.v_min + (space.v_max - space.v_min) * s_vm
    pg = space.p_min + (space.p_max - space.p_min) * s_pg
    decision = np.concatenate([vm, z_va, pg, z_qg], axis=1)
    cache = {"activations": activations, "s_vm": s_vm, "s_pg": s_pg}
    return decision, cache


def mlp_backward(model: MlpModel, cache: dict, grad_decision: np.ndarray):
    """Gradients of the loss wrt weights/biases given d L / d decision."""
    space = model.space
    n, g = space.n_bus, space.n_gen
    s_vm, s_pg = cache["s_vm"], cache["s_pg"]
    g_vm = grad_decision[:, :n]
    g_va = grad_decision[:, n:2 * n]
    g_pg = grad_decision[:, 2 * n:2 * n + g]
    g_qg = grad_decision[:, 2 * n + g:]
    d_raw = np.concatenate([
        g_vm * (space.v_max - space.v_min) * s_vm * (1 - s_vm),
        g_va,
        g_pg * (space.p_max - space.p_min) * s_pg * (1 - s_pg),
        g_qg,
    ], axis=1)

    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    delta = d_raw
    for layer in range(len(model.weights) - 1, -1, -1):
        a_prev = cache["activations"][layer]
        grads_w[layer] = a_prev.T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            h = cache["activations"][layer]
            delta = (delta @ model.weights[layer].T) * (1.0 - h * h)
    return grads_w, grads_b
