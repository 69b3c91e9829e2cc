"""Mini-batch momentum training of the penalty objective."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .loss import PenaltyWeights, penalty_loss_and_grad
from .mlp import MlpModel, mlp_backward, mlp_forward
from .space import DecisionSpace
from ..rng import Rng


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 120
    batch_size: int = 64
    lr: float = 0.01
    lr_decay: float = 0.0  # effective lr = lr / (1 + lr_decay * epoch)
    momentum: float = 0.9
    grad_clip: float = 1.0  # global-norm cap; the equality term is stiff
    weights: PenaltyWeights = field(default_factory=PenaltyWeights)
    seed: int = 0


def decision_loss_and_input_grad(model: MlpModel, inputs: np.ndarray,
                                 pd_bus: np.ndarray, qd_bus: np.ndarray,
                                 weights: PenaltyWeights):
    """Single forward/backward pass: loss, parameter grads, term breakdown."""
    decision, cache = mlp_forward(model, inputs)
    loss, grad_dec, parts = penalty_loss_and_grad(
        model.space, decision, pd_bus, qd_bus, weights)
    grads_w, grads_b = mlp_backward(model, cache, grad_dec)
    return loss, grads_w, grads_b, parts


def train_penalty(model: MlpModel, pd: np.ndarray, qd: np.ndarray,
                  cfg: TrainConfig) -> tuple[MlpModel, list[dict]]:
    """Train in place on load samples (pd, qd are n_samples x n_loads).

    Returns the model and a per-epoch loss trace. Zero epochs leave the
    model untouched. Non-finite loss aborts with the epoch index.
    """
    space = model.space
    n = pd.shape[0]
    if n == 0:
        raise ValueError("no training samples")
    inputs = np.concatenate([pd, qd], axis=1)
    pd_bus, qd_bus = space.loads_to_buses(pd, qd)
    rng = Rng(cfg.seed)
    vel_w = [np.zeros_like(w) for w in model.weights]
    vel_b = [np.zeros_like(b) for b in model.biases]
    trace: list[dict] = []
    order = list(range(n))
    for epoch in range(cfg.epochs):
        rng.shuffle(order)
        lr = cfg.lr / (1.0 + cfg.lr_decay * epoch)
        epoch_loss = 0.0
        epoch_parts = {"cost": 0.0, "eq": 0.0, "ineq": 0.0}
        batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads_w, grads_b, parts = decision_loss_and_input_grad(
                model, inputs[idx], pd_bus[idx], qd_bus[idx], cfg.weights)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch)
            gnorm = np.sqrt(sum(float((g**2).sum()) for g in grads_w)
                            + sum(float((g**2).sum()) for g in grads_b))
            scale = min(1.0, cfg.grad_clip / max(gnorm, 1e-12))
            for k in range(len(model.weights)):
                vel_w[k] = cfg.momentum * vel_w[k] - lr * scale * grads_w[k]
                vel_b[k] = cfg.momentum * vel_b[k] - lr * scale * grads_b[k]
                model.weights[k] += vel_w[k]
                model.biases[k] += vel_b[k]
            epoch_loss += loss
            for key in epoch_parts:
                epoch_parts[key] += parts[key]
            batches += 1
        entry = {"epoch": epoch, "loss": epoch_loss / batches}
        entry.update({k: v / batches for k, v in epoch_parts.items()})
        trace.append(entry)
    return model, trace


def evaluate_decisions(model: MlpModel, pd: np.ndarray, qd: np.ndarray):
    """Violation report of the model's decisions on given load samples."""
    space = model.space
    inputs = np.concatenate([pd, qd], axis=1)
    decision, _ = mlp_forward(model, inputs)
    return space.violations(decision, pd=pd, qd=qd)
