"""Small numpy neural-network toolkit for 1-D convolutional autoencoders.

Activations travel as ``(batch, channels, length)`` arrays; a single
``(channels, length)`` tensor is promoted to a batch of one. Parameters may be
stored as float32 (the persisted precision) or float64 (used by gradient
checks); all arithmetic runs in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .exceptions import DomainError, ShapeError, StateError

ACTIVATIONS = ("relu", "sigmoid", None)


def _as_batch(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[np.newaxis], True
    if x.ndim != 3:
        raise ShapeError(f"expected (channels, length) or (batch, channels, length), got shape {x.shape}")
    return x, False


def _activate(z, activation):
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "sigmoid":
        return expit(z)
    if activation is None:
        return z
    raise DomainError(f"unknown activation {activation!r}")


def _activation_grad(grad, out, activation):
    # derivative expressed through the activation output
    if activation == "relu":
        return grad * (out > 0)
    if activation == "sigmoid":
        return grad * out * (1.0 - out)
    return grad


def glorot_uniform(rng, shape, fan_in, fan_out, dtype=np.float32):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def same_padding(kernel_len):
    """Zero padding (left, right) that keeps the length at stride 1."""
    left = (kernel_len - 1) // 2
    return left, kernel_len - 1 - left


# -- layers -----------------------------------------------------------------


class Conv1D:
    """Stride-1 cross-correlation with "same" zero padding.

    ``weight`` has shape (filters, in_channels, kernel_len).
    """

    def __init__(self, in_channels, filters, kernel_len, activation="relu", rng=None,
                 dtype=np.float32):
        if min(in_channels, filters, kernel_len) < 1:
            raise DomainError("in_channels, filters and kernel_len must all be >= 1")
        if activation not in ACTIVATIONS:
            raise DomainError(f"unknown activation {activation!r}")
        rng = np.random.default_rng(rng)
        self.in_channels = in_channels
        self.filters = filters
        self.kernel_len = kernel_len
        self.activation = activation
        self.weight = glorot_uniform(
            rng, (filters, in_channels, kernel_len),
            in_channels * kernel_len, filters * kernel_len, dtype,
        )
        self.bias = np.zeros(filters, dtype=dtype)
        self._cache = None

    @property
    def params(self):
        return [self.weight, self.bias]

    def forward(self, x):
        x, _ = _as_batch(x)
        if x.shape[1] != self.in_channels:
            raise ShapeError(f"conv expects {self.in_channels} channels, got {x.shape[1]}")
        z, cols = _correlate(x, self.weight, same_padding(self.kernel_len))
        out = _activate(z + self.bias.astype(np.float64)[:, np.newaxis], self.activation)
        self._cache = (cols, out)
        return out

    def backward(self, grad, input_grad=True):
        if self._cache is None:
            raise StateError("Conv1D.backward called before forward")
        cols, out = self._cache
        gz = _activation_grad(grad, out, self.activation)
        self.grads = [
            np.matmul(gz, cols.transpose(0, 2, 1)).sum(axis=0).reshape(self.weight.shape),
            gz.sum(axis=(0, 2)),
        ]
        if not input_grad:
            return None
        # input gradient: correlate with the channel-swapped, flipped kernel
        left, right = same_padding(self.kernel_len)
        flipped = self.weight.transpose(1, 0, 2)[:, :, ::-1]
        gx, _ = _correlate(gz, flipped, (right, left))
        return gx


def _correlate(x, weight, padding):
    """Batched multi-channel cross-correlation via one matrix product.

    Returns the (B, F, L_out) result and the (B, C*K, L_out) column tensor
    it was built from.
    """
    B, C, _ = x.shape
    F, _, K = weight.shape
    xp = np.pad(x, ((0, 0), (0, 0), padding))
    L = xp.shape[2] - K + 1
    cols = sliding_window_view(xp, K, axis=2).transpose(0, 1, 3, 2).reshape(B, C * K, L)
    z = np.asarray(weight, dtype=np.float64).reshape(F, C * K) @ cols
    return z, cols


class MaxPool1D:
    """Non-overlapping max pooling; a trailing remainder shorter than the window is dropped."""

    def __init__(self, factor):
        if factor < 1:
            raise DomainError(f"pool factor must be >= 1, got {factor}")
        self.factor = factor
        self.params = []
        self._cache = None

    def forward(self, x):
        x, _ = _as_batch(x)
        out, argmax = maxpool1d(x, self.factor)
        self._cache = (argmax, x.shape)
        return out

    def backward(self, grad, input_grad=True):
        if self._cache is None:
            raise StateError("MaxPool1D.backward called before forward")
        argmax, shape = self._cache
        gx = np.zeros(shape)
        b, c, n = np.indices(argmax.shape)
        gx[b, c, n * self.factor + argmax] = grad
        self.grads = []
        return gx


class UpSample1D:
    """Nearest-neighbour upsampling to an explicit target length."""

    def __init__(self, factor, target_len):
        if factor < 1:
            raise DomainError(f"upsample factor must be >= 1, got {factor}")
        self.factor = factor
        self.target_len = target_len
        self.params = []
        self._cache = None

    def forward(self, x):
        x, _ = _as_batch(x)
        idx = upsample_index(x.shape[2], self.factor, self.target_len)
        self._cache = (idx, x.shape)
        return x[:, :, idx]

    def backward(self, grad, input_grad=True):
        if self._cache is None:
            raise StateError("UpSample1D.backward called before forward")
        idx, shape = self._cache
        # idx is non-decreasing and covers every source position
        starts = np.flatnonzero(np.diff(idx, prepend=-1))
        self.grads = []
        return np.add.reduceat(grad, starts, axis=2)


class Flatten:
    params = []

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad, input_grad=True):
        self.grads = []
        return grad.reshape(self._shape)


class Dense:
    """Fully connected layer; ``weight`` has shape (out_features, in_features)."""

    def __init__(self, in_features, out_features, activation=None, rng=None, dtype=np.float32):
        if activation not in ACTIVATIONS:
            raise DomainError(f"unknown activation {activation!r}")
        rng = np.random.default_rng(rng)
        self.in_features = in_features
        self.out_features = out_features
        self.activation = activation
        self.weight = glorot_uniform(rng, (out_features, in_features), in_features, out_features, dtype)
        self.bias = np.zeros(out_features, dtype=dtype)
        self._cache = None

    @property
    def params(self):
        return [self.weight, self.bias]

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[np.newaxis]
        out = dense_forward(x, self.weight, self.bias, self.activation)
        self._cache = (x, out)
        return out

    def backward(self, grad, input_grad=True):
        if self._cache is None:
            raise StateError("Dense.backward called before forward")
        x, out = self._cache
        gz = _activation_grad(grad, out, self.activation)
        self.grads = [gz.T @ x, gz.sum(axis=0)]
        return gz @ self.weight.astype(np.float64)


# -- functional kernels -----------------------------------------------------


def conv1d_forward(x, layer: Conv1D):
    """Forward a (C, L) or (B, C, L) input through ``layer``; the output keeps the input rank."""
    xb, single = _as_batch(x)
    out = layer.forward(xb)
    return out[0] if single else out


def maxpool1d(x, m):
    """Return (pooled, argmax) where argmax indexes within each window."""
    if m < 1:
        raise DomainError(f"pool factor must be >= 1, got {m}")
    xb, single = _as_batch(x)
    B, C, L = xb.shape
    n = L // m
    windows = xb[:, :, :n * m].reshape(B, C, n, m)
    argmax = windows.argmax(axis=3)
    pooled = np.take_along_axis(windows, argmax[..., np.newaxis], axis=3)[..., 0]
    if single:
        return pooled[0], argmax[0]
    return pooled, argmax


def upsample_index(length, m, target_len):
    """Source index for every output position of a nearest-neighbour upsample.

    Targets shorter than ``length * m`` truncate the last repeats; longer
    targets (up to ``m - 1`` extra) repeat the final position, which restores
    lengths lost to a flooring pool.
    """
    if m < 1:
        raise DomainError(f"upsample factor must be >= 1, got {m}")
    if not (length * m - (m - 1) <= target_len <= length * m + (m - 1)) or target_len < 1:
        raise ShapeError(f"cannot upsample length {length} by {m} to {target_len}")
    return np.minimum(np.arange(target_len) // m, length - 1)


def upsample1d(x, m, target_len):
    xb, single = _as_batch(x)
    out = xb[:, :, upsample_index(xb.shape[2], m, target_len)]
    return out[0] if single else out


def dense_forward(x, weight, bias, activation=None):
    x = np.asarray(x, dtype=np.float64)
    weight = np.asarray(weight)
    bias = np.asarray(bias)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1] or bias.shape != (weight.shape[0],):
        raise ShapeError(
            f"dense shapes disagree: input {x.shape}, weight {weight.shape}, bias {bias.shape}"
        )
    return _activate(x @ weight.T.astype(np.float64) + bias.astype(np.float64), activation)


def mse(output, target):
    """Mean over frames of the per-frame mean squared error."""
    diff = np.asarray(output, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return float(np.mean(diff * diff))


# -- network ----------------------------------------------------------------


class Sequential:
    def __init__(self, layers):
        self.layers = list(layers)
        self._forward_done = False
        self._output = None

    @property
    def params(self):
        return [p for layer in self.layers for p in layer.params]

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        self._output = x
        self._forward_done = True
        return x

    __call__ = forward

    def predict(self, x, batch_size=1000):
        """Forward pass in chunks; leaves no usable backward cache."""
        x = np.asarray(x, dtype=np.float64)
        outs = [self.forward(x[i:i + batch_size]) for i in range(0, x.shape[0], batch_size)]
        self._forward_done = False
        return np.concatenate(outs, axis=0) if outs else np.zeros((0,))

    def backward(self, target):
        """Gradients of the MSE between the cached output and ``target``.

        Returns one array per entry of :attr:`params`, in the same order.
        """
        if not self._forward_done:
            raise StateError("backward called without a preceding forward pass")
        out = self._output
        target = np.asarray(target, dtype=np.float64).reshape(out.shape)
        grad = 2.0 * (out - target) / out.size
        for i in reversed(range(len(self.layers))):
            grad = self.layers[i].backward(grad, input_grad=i > 0)
        self._forward_done = False
        return [g for layer in self.layers for g in layer.grads]


def backward(network: Sequential, x, target):
    """Run forward then backward; return (loss, gradients)."""
    out = network.forward(x)
    loss = mse(out, np.asarray(target).reshape(out.shape))
    return loss, network.backward(target)


# -- optimizer --------------------------------------------------------------


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_update(params, grads, state: AdamState):
    """One bias-corrected Adam step, applied in place to ``params``."""
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    for p, g in zip(params, grads):
        if np.shape(p) != np.shape(g):
            raise ShapeError(f"parameter shape {np.shape(p)} vs gradient shape {np.shape(g)}")
    if not state.m:
        state.m = [np.zeros(np.shape(p)) for p in params]
        state.v = [np.zeros(np.shape(p)) for p in params]
    elif [m.shape for m in state.m] != [np.shape(p) for p in params]:
        raise ShapeError("Adam moment buffers do not match the parameter set")
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = np.asarray(g, dtype=np.float64)
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        step = state.lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
        p[...] = p.astype(np.float64) - step
    return params, state
