"""Losses and the gradient reversal layer.

Every loss returns ``(loss, grad)`` where ``grad`` is taken with respect to the
first argument. The ``*_batch`` variants return per-row losses and leave the
reduction to the caller.
"""
import numpy as np
from scipy.special import expit, log_softmax, softmax

from pmc.errors import ArgumentError, InputShapeError, LabelError


def softmax_xent(logits, label: int, weight: float = 1.0):
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1:
        raise InputShapeError(f"logits must be a vector (provided shape {logits.shape})")
    losses, grad = softmax_xent_batch(logits[None, :], np.array([label]), np.array([weight], dtype=np.float64))
    return float(losses[0]), grad[0]


def softmax_xent_batch(logits: np.ndarray, labels: np.ndarray, weights: np.ndarray):
    """Weighted cross-entropy per row: ``-w * log softmax(z)[y]`` and ``w * (softmax(z) - onehot(y))``."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    weights = np.asarray(weights, dtype=np.float64)
    n, n_classes = logits.shape
    if labels.shape != (n,) or weights.shape != (n,):
        raise InputShapeError(f"labels {labels.shape} / weights {weights.shape} do not match {n} logit rows")
    if n and (labels.min() < 0 or labels.max() >= n_classes):
        raise LabelError(f"labels must lie in [0, {n_classes}) (provided {labels.min()}..{labels.max()})")
    if not np.isfinite(weights).all() or (weights < 0).any():
        raise ArgumentError("sample weights must be finite and non-negative")

    rows = np.arange(n)
    log_p = log_softmax(logits, axis=1)
    losses = -weights * log_p[rows, labels]
    grad = softmax(logits, axis=1)
    grad[rows, labels] -= 1.0
    grad *= weights[:, None]
    return losses, grad


def binary_xent(logit, domain_label):
    """Sigmoid binary cross-entropy, elementwise over ``logit``."""
    z = np.asarray(logit, dtype=np.float64)
    d = np.asarray(domain_label, dtype=np.float64)
    if not np.isfinite(z).all():
        raise ArgumentError("domain logits must be finite")
    if not np.isin(d, (0.0, 1.0)).all():
        raise LabelError(f"domain labels must be 0 or 1 (provided {np.unique(d)})")
    loss = np.logaddexp(0.0, z) - d * z
    grad = expit(z) - d
    if loss.ndim == 0:
        return float(loss), float(grad)
    return loss, grad


def l1_loss(pred, target):
    """Mean absolute error over every element."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise InputShapeError(f"prediction {pred.shape} and target {target.shape} differ")
    diff = pred - target
    n = max(diff.size, 1)
    return float(np.abs(diff).sum() / n), np.sign(diff) / n


def grl_forward(x):
    return x


def grl_backward(upstream_grad, factor: float):
    if not np.isfinite(factor) or factor < 0:
        raise ArgumentError(f"reversal factor must be finite and >= 0 (provided {factor})")
    return -factor * np.asarray(upstream_grad, dtype=np.float64)
