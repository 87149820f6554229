"""Central-difference verification of backprop."""

import numpy as np

from noiselab.numerics.losses import softmax_cross_entropy
from noiselab.numerics.model import backward, forward


def analytic_gradients(spec, params, x, targets):
    logits, cache = forward(spec, params, x, return_cache=True)
    loss, dlogits = softmax_cross_entropy(logits, targets)
    return loss, backward(spec, params, cache, dlogits)


def gradient_check(spec, params, x, targets, epsilon=1e-5, n_samples=128, seed=0, floor=1e-7):
    """Largest relative error between backprop and central differences.

    Samples ``n_samples`` coordinates uniformly over all parameters (all of
    them when there are fewer).  Relative error is
    ``|a - n| / max(|a|, |n|, floor)``; the floor keeps coordinates whose true
    gradient is ~0 from dividing round-off by round-off.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    params = [p.copy() for p in params]
    _, grads = analytic_gradients(spec, params, x, targets)
    sizes = [p.size for p in params]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    if total <= n_samples:
        flat_ids = np.arange(total)
    else:
        flat_ids = np.sort(rng.choice(total, size=n_samples, replace=False))
    offsets = np.cumsum([0] + sizes)
    worst = 0.0
    for fid in flat_ids:
        k = int(np.searchsorted(offsets, fid, side="right") - 1)
        idx = np.unravel_index(fid - offsets[k], params[k].shape)
        orig = params[k][idx]
        params[k][idx] = orig + epsilon
        plus, _ = softmax_cross_entropy(forward(spec, params, x), targets)
        params[k][idx] = orig - epsilon
        minus, _ = softmax_cross_entropy(forward(spec, params, x), targets)
        params[k][idx] = orig
        numeric = (plus - minus) / (2 * epsilon)
        analytic = grads[k][idx]
        denom = max(abs(analytic), abs(numeric), floor)
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst
