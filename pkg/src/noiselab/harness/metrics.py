"""Label recall and MOTA."""

from typing import Optional, Tuple

import numpy as np

from noiselab.errors import ConfigError


def label_recall(predictions, observed_labels, clean_mask) -> Tuple[Optional[float], Optional[float]]:
    """Fraction of clean / noisy examples whose prediction equals their observed label.

    A group with no members yields ``None``.
    """
    pred = np.asarray(predictions)
    obs = np.asarray(observed_labels)
    clean = np.asarray(clean_mask, dtype=bool)
    if not (pred.shape == obs.shape == clean.shape):
        raise ConfigError(f"length mismatch: {pred.shape}, {obs.shape}, {clean.shape}")
    hit = pred == obs
    n_clean = int(clean.sum())
    n_noisy = clean.size - n_clean
    lr_clean = float(hit[clean].sum() / n_clean) if n_clean else None
    lr_noisy = float(hit[~clean].sum() / n_noisy) if n_noisy else None
    return lr_clean, lr_noisy


def mota_epoch(test_acc) -> int:
    """1-based epoch of the first maximum of the test-accuracy curve."""
    acc = np.asarray(test_acc, dtype=np.float64)
    if acc.size == 0:
        raise ConfigError("empty test-accuracy vector")
    return int(np.argmax(acc)) + 1


def mota(record) -> int:
    return mota_epoch(record.test_acc)
