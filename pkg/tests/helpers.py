"""Shared probes used by the module and acceptance test suites."""

from __future__ import annotations

import numpy as np

from orthograd.net import Batch, ParamVector, mean_loss_and_grad


def sample_loss(params: ParamVector, x: np.ndarray, y: int) -> float:
    """Cross-entropy of a single sample."""
    loss, _ = mean_loss_and_grad(params, Batch(x[None, :], np.array([y])))
    return loss


def loss_change_ratios(params: ParamVector, batch: Batch, direction: np.ndarray,
                       eps: float = 1e-3) -> np.ndarray:
    """Per-sample |loss(theta + eps v) - loss(theta)| / same at eps/2.

    A ratio near 4 means the loss change along ``direction`` is second order
    (the first-order term vanished); near 2 means first order dominates.
    """
    v = direction / np.linalg.norm(direction)
    ratios = np.empty(batch.size)
    for i in range(batch.size):
        x, y = batch.inputs[i], int(batch.labels[i])
        base = sample_loss(params, x, y)
        d_full = sample_loss(ParamVector(params.flat + eps * v, params.spec), x, y) - base
        d_half = sample_loss(ParamVector(params.flat + 0.5 * eps * v, params.spec), x, y) - base
        ratios[i] = abs(d_full) / abs(d_half)
    return ratios
