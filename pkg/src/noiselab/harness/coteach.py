"""Small-loss exchange between two peer networks."""

import math

import numpy as np

from noiselab.errors import ConfigError


def keep_fraction_schedule(epoch, tau, ramp_epochs):
    """Share of each batch kept: 1 - tau * min(epoch / ramp_epochs, 1)."""
    if ramp_epochs < 1:
        raise ConfigError("co-teaching ramp length must be >= 1")
    return 1.0 - tau * min(epoch / ramp_epochs, 1.0)


def _smallest(losses, k):
    # Stable sort: equal losses keep ascending index order.
    return np.sort(np.argsort(losses, kind="stable")[:k])


def coteach_select(losses_a, losses_b, keep_fraction):
    """Indices each net trains on: A gets B's small-loss set and vice versa.

    Both sets hold ceil(keep_fraction * m) indices, returned sorted.
    """
    losses_a = np.asarray(losses_a, dtype=np.float64)
    losses_b = np.asarray(losses_b, dtype=np.float64)
    if losses_a.shape != losses_b.shape or losses_a.ndim != 1:
        raise ConfigError("loss vectors must be 1-D and equal length")
    if not 0.0 < keep_fraction <= 1.0:
        raise ConfigError(f"keep fraction must lie in (0, 1], got {keep_fraction}")
    # Guard against 0.8 * 10 = 8.000000000000002 rounding up to 9.
    k = min(losses_a.size, math.ceil(keep_fraction * losses_a.size - 1e-9))
    return _smallest(losses_b, k), _smallest(losses_a, k)
