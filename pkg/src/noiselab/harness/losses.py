"""Noise-robust per-example losses with their logit gradients.

Each ``*_terms`` function maps (logits ``(n, C)``, labels ``(n,)``) to
``(losses (n,), dlosses/dlogits (n, C))``; gradients are per example, not
averaged.  The ``*_loss`` wrappers return a float for a single logit row
and a loss vector for a batch.
"""

import numpy as np

from noiselab.errors import ConfigError
from noiselab.numerics.losses import log_softmax

SCE_LOG_ZERO = -4.0


def _prep(logits, labels):
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if labels.shape != (logits.shape[0],):
        raise ConfigError(f"{labels.size} labels for {logits.shape[0]} logit rows")
    logp = log_softmax(logits)
    onehot = np.zeros_like(logits)
    onehot[np.arange(logits.shape[0]), labels] = 1.0
    return single, logp, onehot, labels


def _unwrap(single, losses):
    return float(losses[0]) if single else losses


def ce_terms(logits, labels):
    _, logp, onehot, _ = _prep(logits, labels)
    losses = -(onehot * logp).sum(axis=1)
    return losses, np.exp(logp) - onehot


def sce_terms(logits, labels, a_s=0.1, b_s=1.0, log_zero=SCE_LOG_ZERO):
    """a_s * CE + b_s * RCE, with RCE = -sum_k p_k log q_k and log 0 := log_zero.

    Against a one-hot q the reverse term collapses to -log_zero * (1 - p_y).
    """
    if a_s < 0 or b_s < 0:
        raise ConfigError("SCE weights must be non-negative")
    _, logp, onehot, labels = _prep(logits, labels)
    p = np.exp(logp)
    rows = np.arange(p.shape[0])
    p_y = p[rows, labels]
    ce = -logp[rows, labels]
    rce = -log_zero * (1.0 - p_y)
    grad = a_s * (p - onehot) + b_s * log_zero * p_y[:, None] * (onehot - p)
    return a_s * ce + b_s * rce, grad


def gce_terms(logits, labels, q=0.7):
    """(1 - p_y**q) / q."""
    if not 0.0 < q <= 1.0:
        raise ConfigError(f"GCE exponent q must lie in (0, 1], got {q}")
    _, logp, onehot, labels = _prep(logits, labels)
    p = np.exp(logp)
    rows = np.arange(p.shape[0])
    p_y_q = np.exp(q * logp[rows, labels])
    losses = (1.0 - p_y_q) / q
    grad = -p_y_q[:, None] * (onehot - p)
    return losses, grad


def bootsoft_terms(logits, labels, b_b=0.95):
    """CE against b_b * onehot(y) + (1 - b_b) * p, the prediction held constant."""
    if not 0.0 <= b_b <= 1.0:
        raise ConfigError(f"bootstrap weight must lie in [0, 1], got {b_b}")
    _, logp, onehot, _ = _prep(logits, labels)
    p = np.exp(logp)
    target = b_b * onehot + (1.0 - b_b) * p
    losses = -(target * logp).sum(axis=1)
    return losses, p - target


def cross_entropy_loss(logits, target):
    single, *_ = _prep(logits, target)
    return _unwrap(single, ce_terms(logits, target)[0])


def sce_loss(logits, target, a_s=0.1, b_s=1.0, log_zero=SCE_LOG_ZERO):
    single, *_ = _prep(logits, target)
    return _unwrap(single, sce_terms(logits, target, a_s, b_s, log_zero)[0])


def gce_loss(logits, target, q=0.7):
    single, *_ = _prep(logits, target)
    return _unwrap(single, gce_terms(logits, target, q)[0])


def bootsoft_loss(logits, target, b_b=0.95):
    single, *_ = _prep(logits, target)
    return _unwrap(single, bootsoft_terms(logits, target, b_b)[0])
