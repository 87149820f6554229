"""Softmax cross-entropy with its logit gradient."""

import numpy as np

from noiselab.errors import ConfigError, NumericError


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def _check_logits(logits) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ConfigError(f"logits must be (batch, C), got shape {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits")
    return logits


def target_matrix(targets, n_rows: int, n_classes: int) -> np.ndarray:
    """One-hot rows for index targets; probability rows are validated and returned."""
    targets = np.asarray(targets)
    if targets.ndim == 1:
        if targets.shape[0] != n_rows:
            raise ConfigError(f"{targets.shape[0]} targets for {n_rows} rows")
        if targets.size and (targets.min() < 0 or targets.max() >= n_classes):
            raise ConfigError("target index out of range")
        onehot = np.zeros((n_rows, n_classes))
        onehot[np.arange(n_rows), targets.astype(np.int64)] = 1.0
        return onehot
    targets = targets.astype(np.float64)
    if targets.shape != (n_rows, n_classes):
        raise ConfigError(f"target matrix shape {targets.shape} != {(n_rows, n_classes)}")
    if np.any(np.abs(targets.sum(axis=1) - 1.0) > 1e-9) or np.any(targets < 0):
        raise ConfigError("probability targets must be non-negative and sum to 1 per row")
    return targets


def cross_entropy_per_example(logits, labels) -> np.ndarray:
    logits = _check_logits(logits)
    labels = np.asarray(labels, dtype=np.int64)
    return -log_softmax(logits)[np.arange(logits.shape[0]), labels]


def softmax_cross_entropy(logits, targets):
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits.

    ``targets`` is either a vector of class indices or a (batch, C) matrix of
    probability rows.
    """
    logits = _check_logits(logits)
    n, c = logits.shape
    t = target_matrix(targets, n, c)
    logp = log_softmax(logits)
    loss = float(-(t * logp).sum() / n)
    grad = (np.exp(logp) - t) / n
    return loss, grad
