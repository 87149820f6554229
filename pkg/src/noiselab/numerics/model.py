"""Fixed-architecture classifiers: a ReLU MLP and a small two-block CNN.

Parameters live in a flat list of float64 arrays so the optimizer and the
gradient checker can treat every architecture the same way.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from noiselab.errors import ConfigError

Params = List[np.ndarray]


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description.

    ``input_shape`` is ``(d,)`` for ``mlp`` and ``(height, width, channels)``
    for ``cnn-s``.  For ``cnn-s`` the ``hidden`` tuple holds the single dense
    hidden width and ``conv_channels`` the output channels of the two
    conv blocks.
    """

    kind: str
    input_shape: Tuple[int, ...]
    n_classes: int
    hidden: Tuple[int, ...] = (64, 64)
    conv_channels: Tuple[int, int] = (8, 16)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "conv_channels", tuple(int(c) for c in self.conv_channels))
        if self.n_classes < 2:
            raise ConfigError(f"n_classes must be >= 2, got {self.n_classes}")
        if any(w < 1 for w in self.hidden + self.conv_channels):
            raise ConfigError("all layer widths must be >= 1")
        if self.kind == "mlp":
            if len(self.input_shape) != 1 or self.input_shape[0] < 1:
                raise ConfigError(f"mlp expects input_shape (d,), got {self.input_shape}")
        elif self.kind == "cnn-s":
            if len(self.input_shape) != 3:
                raise ConfigError(f"cnn-s expects input_shape (h, w, c), got {self.input_shape}")
            h, w, _ = self.input_shape
            if h < 4 or w < 4:
                raise ConfigError("cnn-s needs spatial size >= 4 for two 2x2 pools")
            if len(self.hidden) != 1:
                raise ConfigError("cnn-s has exactly one dense hidden layer")
            if len(self.conv_channels) != 2:
                raise ConfigError("cnn-s has exactly two conv blocks")
        else:
            raise ConfigError(f"unknown model kind {self.kind!r}")

    @property
    def flat_dim(self) -> int:
        return int(np.prod(self.input_shape))


def _layer_shapes(spec: ModelSpec):
    if spec.kind == "mlp":
        widths = [spec.input_shape[0], *spec.hidden, spec.n_classes]
        shapes = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            shapes += [(fan_in, fan_out), (fan_out,)]
        return shapes
    h, w, c = spec.input_shape
    c1, c2 = spec.conv_channels
    flat = (h // 2 // 2) * (w // 2 // 2) * c2
    return [
        (3, 3, c, c1), (c1,),
        (3, 3, c1, c2), (c2,),
        (flat, spec.hidden[0]), (spec.hidden[0],),
        (spec.hidden[0], spec.n_classes), (spec.n_classes,),
    ]


def init_params(spec: ModelSpec) -> Params:
    """He-scaled uniform weights, zero biases, drawn from ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    params = []
    for shape in _layer_shapes(spec):
        if len(shape) == 1:
            params.append(np.zeros(shape))
            continue
        fan_in = int(np.prod(shape[:-1]))
        limit = np.sqrt(6.0 / fan_in)
        params.append(rng.uniform(-limit, limit, size=shape))
    return params


def zero_params(spec: ModelSpec) -> Params:
    return [np.zeros(shape) for shape in _layer_shapes(spec)]


def check_params(spec: ModelSpec, params: Params) -> None:
    shapes = _layer_shapes(spec)
    if len(params) != len(shapes):
        raise ConfigError(f"expected {len(shapes)} parameter arrays, got {len(params)}")
    for i, (p, s) in enumerate(zip(params, shapes)):
        if p.shape != s:
            raise ConfigError(f"parameter {i} has shape {p.shape}, expected {s}")


# -- conv / pool primitives (NHWC, 3x3 'same' convolution, stride 1) --------


def _im2col(x: np.ndarray) -> np.ndarray:
    n, h, w, c = x.shape
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    cols = np.empty((n, h, w, 3, 3, c))
    for di in range(3):
        for dj in range(3):
            cols[:, :, :, di, dj, :] = padded[:, di:di + h, dj:dj + w, :]
    return cols.reshape(n * h * w, 9 * c)


def _col2im(dcols: np.ndarray, shape) -> np.ndarray:
    n, h, w, c = shape
    dcols = dcols.reshape(n, h, w, 3, 3, c)
    dpadded = np.zeros((n, h + 2, w + 2, c))
    for di in range(3):
        for dj in range(3):
            dpadded[:, di:di + h, dj:dj + w, :] += dcols[:, :, :, di, dj, :]
    return dpadded[:, 1:-1, 1:-1, :]


def _conv_forward(x, kernel, bias):
    n, h, w, _ = x.shape
    cols = _im2col(x)
    out = cols @ kernel.reshape(-1, kernel.shape[-1]) + bias
    return out.reshape(n, h, w, -1), cols


def _conv_backward(dout, x_shape, cols, kernel):
    cout = kernel.shape[-1]
    dflat = dout.reshape(-1, cout)
    dkernel = (cols.T @ dflat).reshape(kernel.shape)
    dbias = dflat.sum(axis=0)
    dx = _col2im(dflat @ kernel.reshape(-1, cout).T, x_shape)
    return dx, dkernel, dbias


def _pool_forward(x):
    n, h, w, c = x.shape
    h2, w2 = h // 2, w // 2
    trimmed = x[:, :h2 * 2, :w2 * 2, :]
    windows = trimmed.reshape(n, h2, 2, w2, 2, c).transpose(0, 1, 3, 5, 2, 4).reshape(n, h2, w2, c, 4)
    arg = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]
    return out, arg


def _pool_backward(dout, x_shape, arg):
    n, h, w, c = x_shape
    h2, w2 = h // 2, w // 2
    dwin = np.zeros((n, h2, w2, c, 4))
    np.put_along_axis(dwin, arg[..., None], dout[..., None], axis=-1)
    dtrim = dwin.reshape(n, h2, w2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(n, h2 * 2, w2 * 2, c)
    dx = np.zeros(x_shape)
    dx[:, :h2 * 2, :w2 * 2, :] = dtrim
    return dx


# -- forward / backward ------------------------------------------------------


def _as_batch(spec: ModelSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if spec.kind == "mlp":
        if x.ndim != 2 or x.shape[1] != spec.input_shape[0]:
            raise ConfigError(f"mlp expects batch (n, {spec.input_shape[0]}), got {x.shape}")
        return x
    if x.ndim == 2 and x.shape[1] == spec.flat_dim:
        x = x.reshape((x.shape[0],) + spec.input_shape)
    if x.shape[1:] != spec.input_shape:
        raise ConfigError(f"cnn-s expects batch (n, {spec.input_shape}), got {x.shape}")
    return x


def forward(spec: ModelSpec, params: Params, x, return_cache: bool = False):
    """Logits for a batch; optionally the activations needed by :func:`backward`."""
    check_params(spec, params)
    x = _as_batch(spec, x)
    cache = []
    if spec.kind == "mlp":
        h = x
        n_layers = len(params) // 2
        for k in range(n_layers):
            W, b = params[2 * k], params[2 * k + 1]
            cache.append(h)
            h = h @ W + b
            if k < n_layers - 1:
                h = np.maximum(h, 0.0)
        logits = h
    else:
        h = x
        for k in range(2):
            z, cols = _conv_forward(h, params[2 * k], params[2 * k + 1])
            a = np.maximum(z, 0.0)
            pooled, arg = _pool_forward(a)
            cache.append((h.shape, cols, a, arg))
            h = pooled
        cache.append(h.shape)
        flat = h.reshape(h.shape[0], -1)
        cache.append(flat)
        hid = np.maximum(flat @ params[4] + params[5], 0.0)
        cache.append(hid)
        logits = hid @ params[6] + params[7]
    if return_cache:
        return logits, cache
    return logits


def backward(spec: ModelSpec, params: Params, cache, dlogits: np.ndarray) -> Params:
    """Gradients of a scalar loss w.r.t. every parameter, given dloss/dlogits."""
    grads: List[Optional[np.ndarray]] = [None] * len(params)
    if spec.kind == "mlp":
        n_layers = len(params) // 2
        g = dlogits
        for k in reversed(range(n_layers)):
            inp = cache[k]
            grads[2 * k] = inp.T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            if k > 0:
                g = (g @ params[2 * k].T) * (inp > 0)
        return grads
    conv_caches, pooled_shape, flat, hid = cache[:2], cache[2], cache[3], cache[4]
    grads[6] = hid.T @ dlogits
    grads[7] = dlogits.sum(axis=0)
    g = (dlogits @ params[6].T) * (hid > 0)
    grads[4] = flat.T @ g
    grads[5] = g.sum(axis=0)
    g = (g @ params[4].T).reshape(pooled_shape)
    for k in reversed(range(2)):
        in_shape, cols, a, arg = conv_caches[k]
        g = _pool_backward(g, a.shape, arg) * (a > 0)
        g, grads[2 * k], grads[2 * k + 1] = _conv_backward(g, in_shape, cols, params[2 * k])
    return grads


def predict(spec: ModelSpec, params: Params, x, batch_size: int = 1024) -> np.ndarray:
    """Argmax class per row, evaluated in fixed-size chunks."""
    x = _as_batch(spec, x)
    out = np.empty(x.shape[0], dtype=np.int64)
    for start in range(0, x.shape[0], batch_size):
        out[start:start + batch_size] = forward(spec, params, x[start:start + batch_size]).argmax(axis=1)
    return out
