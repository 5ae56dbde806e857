"""Layer forward/backward implementations over row-major numpy arrays.

Sequence tensors are time-major ``(batch, length, channels)``.  Every layer
caches what its backward pass needs during forward; ``backward`` consumes the
upstream gradient and returns the input gradient while filling the parameter
gradient dict.  Analytic gradients are validated against central finite
differences in the test suite.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Layer",
    "Conv1D",
    "MaxPool1D",
    "BatchNorm1D",
    "ReLU",
    "Dense",
    "Dropout",
    "GlobalAveragePool",
    "Flatten",
    "LSTM",
    "Network",
]


class Layer:
    """Base class; stateless layers only override :meth:`forward`/:meth:`backward`."""

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def grads(self) -> dict[str, np.ndarray]:
        return {}

    def state(self) -> dict[str, np.ndarray]:
        """Non-trainable arrays that must survive checkpointing."""
        return {}

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _kaiming_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv1D(Layer):
    """Same-padded, stride-1 cross-correlation along the time axis.

    ``kernels`` has shape (kernel_size, in_channels, out_channels); the output
    at time t sums input positions ``t + k - kernel_size//2`` with zero padding
    outside the signal.
    """

    def __init__(self, kernel_size: int, in_channels: int, out_channels: int,
                 rng: np.random.Generator, dtype=np.float32):
        if kernel_size % 2 != 1:
            raise ValueError("kernel_size must be odd for same padding")
        self.kernel_size = kernel_size
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.dtype = dtype
        fan_in = kernel_size * in_channels
        self.kernels = _kaiming_uniform(
            rng, (kernel_size, in_channels, out_channels), fan_in, dtype)
        self.bias = np.zeros(out_channels, dtype=dtype)
        self._g = {}
        self._cache = None

    def params(self):
        return {"kernels": self.kernels, "bias": self.bias}

    def grads(self):
        return self._g

    def forward(self, x, training=False, rng=None):
        n, length, cin = x.shape
        if cin != self.in_channels:
            raise ValueError(f"expected {self.in_channels} channels, got {cin}")
        k = self.kernel_size
        pad = k // 2
        xp = np.zeros((n, length + 2 * pad, cin), dtype=x.dtype)
        xp[:, pad:pad + length] = x
        # (n, length, cin, k) view -> (n*length, k*cin) patch matrix
        win = sliding_window_view(xp, k, axis=1)
        patches = np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(
            n * length, k * cin)
        y = patches @ self.kernels.reshape(k * cin, -1) + self.bias
        self._cache = (patches, (n, length, cin))
        return y.reshape(n, length, self.out_channels)

    def backward(self, grad_out):
        patches, (n, length, cin) = self._cache
        k = self.kernel_size
        pad = k // 2
        gy = grad_out.reshape(n * length, self.out_channels)
        self._g = {
            "kernels": (patches.T @ gy).reshape(k, cin, self.out_channels),
            "bias": gy.sum(axis=0),
        }
        dpatches = (gy @ self.kernels.reshape(k * cin, -1).T).reshape(
            n, length, k, cin)
        dxp = np.zeros((n, length + 2 * pad, cin), dtype=grad_out.dtype)
        for j in range(k):
            dxp[:, j:j + length] += dpatches[:, :, j]
        return dxp[:, pad:pad + length]


class MaxPool1D(Layer):
    """Window-2/stride-2 max pooling; ties route the gradient to the first index.

    Odd input lengths are rejected unless ``allow_odd`` is set, in which case
    the trailing sample is dropped (floor division of the length).
    """

    def __init__(self, window: int = 2, stride: int = 2, allow_odd: bool = False):
        if window != stride:
            raise ValueError("only window == stride pooling is supported")
        self.window = window
        self.allow_odd = allow_odd
        self._cache = None

    def forward(self, x, training=False, rng=None):
        n, length, c = x.shape
        if length % self.window != 0 and not self.allow_odd:
            raise ValueError(
                f"length {length} not divisible by pooling stride {self.window}")
        lout = length // self.window
        xr = x[:, :lout * self.window].reshape(n, lout, self.window, c)
        amax = xr.argmax(axis=2)
        self._cache = (amax, x.shape)
        return np.take_along_axis(xr, amax[:, :, None, :], axis=2)[:, :, 0, :]

    def backward(self, grad_out):
        amax, shape = self._cache
        n, length, c = shape
        lout = length // self.window
        dxr = np.zeros((n, lout, self.window, c), dtype=grad_out.dtype)
        np.put_along_axis(dxr, amax[:, :, None, :], grad_out[:, :, None, :], axis=2)
        dx = np.zeros(shape, dtype=grad_out.dtype)
        dx[:, :lout * self.window] = dxr.reshape(n, lout * self.window, c)
        return dx


class BatchNorm1D(Layer):
    """Per-channel normalization over all leading axes.

    Training mode normalizes with batch statistics (eps 1e-5) and updates the
    running estimates with momentum 0.9; inference mode uses the running
    estimates.  Accepts (batch, channels) or (batch, length, channels).
    """

    def __init__(self, channels: int, dtype=np.float32,
                 eps: float = 1e-5, momentum: float = 0.9):
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self._g = {}
        self._cache = None

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return self._g

    def state(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x, training=False, rng=None):
        axes = tuple(range(x.ndim - 1))
        if training:
            m = int(np.prod(x.shape[:-1]))
            if m < 2:
                raise ValueError("batch norm needs at least 2 values per channel")
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mean) * inv_std
            self.running_mean[...] = (
                self.momentum * self.running_mean + (1 - self.momentum) * mean)
            self.running_var[...] = (
                self.momentum * self.running_var + (1 - self.momentum) * var)
            self._cache = (xhat, inv_std, m)
            return self.gamma * xhat + self.beta
        inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
        return self.gamma * (x - self.running_mean) * inv_std + self.beta

    def backward(self, grad_out):
        xhat, inv_std, m = self._cache
        axes = tuple(range(grad_out.ndim - 1))
        self._g = {
            "gamma": (grad_out * xhat).sum(axis=axes),
            "beta": grad_out.sum(axis=axes),
        }
        dxhat = grad_out * self.gamma
        return (inv_std / m) * (
            m * dxhat
            - dxhat.sum(axis=axes)
            - xhat * (dxhat * xhat).sum(axis=axes)
        )


class ReLU(Layer):
    def forward(self, x, training=False, rng=None):
        self._mask = x > 0
        return np.where(self._mask, x, 0)

    def backward(self, grad_out):
        return np.where(self._mask, grad_out, 0)


class Dense(Layer):
    """Affine map y = xW + b on (batch, features)."""

    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator, dtype=np.float32):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = _kaiming_uniform(
            rng, (in_features, out_features), in_features, dtype)
        self.bias = np.zeros(out_features, dtype=dtype)
        self._g = {}
        self._x = None

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def grads(self):
        return self._g

    def forward(self, x, training=False, rng=None):
        self._x = x
        return x @ self.weight + self.bias

    def backward(self, grad_out):
        self._g = {"weight": self._x.T @ grad_out, "bias": grad_out.sum(axis=0)}
        return grad_out @ self.weight.T


class Dropout(Layer):
    """Inverted dropout: survivors scaled by 1/(1-rate); inference is identity."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        self.rate = rate
        self._mask = None

    def forward(self, x, training=False, rng=None):
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ValueError("dropout in training mode needs a generator")
        keep = 1.0 - self.rate
        self._mask = (rng.random(x.shape) < keep).astype(x.dtype) / keep
        return x * self._mask

    def backward(self, grad_out):
        if self._mask is None:
            return grad_out
        return grad_out * self._mask


class GlobalAveragePool(Layer):
    """Mean over the time axis: (batch, length, channels) -> (batch, channels)."""

    def forward(self, x, training=False, rng=None):
        self._shape = x.shape
        return x.mean(axis=1)

    def backward(self, grad_out):
        n, length, c = self._shape
        return np.broadcast_to(
            grad_out[:, None, :] / length, self._shape).astype(grad_out.dtype).copy()


class Flatten(Layer):
    def forward(self, x, training=False, rng=None):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape(self._shape)


class LSTM(Layer):
    """Single-direction LSTM with zero initial state and full BPTT.

    Gate order in the fused weight matrices is (input, forget, cell, output).
    With ``return_sequences`` the output is (batch, time, hidden); otherwise
    the last hidden state (batch, hidden).
    """

    def __init__(self, in_features: int, hidden: int, rng: np.random.Generator,
                 return_sequences: bool = False, dtype=np.float32):
        self.in_features = in_features
        self.hidden = hidden
        self.return_sequences = return_sequences
        bound = 1.0 / np.sqrt(hidden)
        self.w_x = rng.uniform(-bound, bound, (in_features, 4 * hidden)).astype(dtype)
        self.w_h = rng.uniform(-bound, bound, (hidden, 4 * hidden)).astype(dtype)
        self.bias = rng.uniform(-bound, bound, 4 * hidden).astype(dtype)
        # open forget gates at the start so long-range signal survives early
        self.bias[hidden:2 * hidden] += 1.0
        self._g = {}
        self._cache = None

    def params(self):
        return {"w_x": self.w_x, "w_h": self.w_h, "bias": self.bias}

    def grads(self):
        return self._g

    def forward(self, x, training=False, rng=None):
        n, t_steps, din = x.shape
        if din != self.in_features:
            raise ValueError(f"expected {self.in_features} input features, got {din}")
        h = self.hidden
        dt = x.dtype
        # time-major internal layout keeps every per-step slab contiguous
        x_tm = np.ascontiguousarray(np.swapaxes(x, 0, 1))
        hs = np.zeros((t_steps + 1, n, h), dtype=dt)
        cs = np.zeros((t_steps + 1, n, h), dtype=dt)
        gates = np.empty((t_steps, n, 4 * h), dtype=dt)
        tanh_c = np.empty((t_steps, n, h), dtype=dt)
        zx = (x_tm.reshape(t_steps * n, din) @ self.w_x).reshape(t_steps, n, 4 * h)
        zx += self.bias
        for t in range(t_steps):
            z = zx[t] + hs[t] @ self.w_h
            i = _sigmoid(z[:, :h])
            f = _sigmoid(z[:, h:2 * h])
            g = np.tanh(z[:, 2 * h:3 * h])
            o = _sigmoid(z[:, 3 * h:])
            c = f * cs[t] + i * g
            tc = np.tanh(c)
            hs[t + 1] = o * tc
            cs[t + 1] = c
            gates[t, :, :h] = i
            gates[t, :, h:2 * h] = f
            gates[t, :, 2 * h:3 * h] = g
            gates[t, :, 3 * h:] = o
            tanh_c[t] = tc
        self._cache = (x_tm, hs, cs, gates, tanh_c)
        if self.return_sequences:
            return np.ascontiguousarray(np.swapaxes(hs[1:], 0, 1))
        return hs[-1].copy()

    def backward(self, grad_out):
        x_tm, hs, cs, gates, tanh_c = self._cache
        t_steps, n, din = x_tm.shape
        h = self.hidden
        dt = grad_out.dtype
        if self.return_sequences:
            gy = np.ascontiguousarray(np.swapaxes(grad_out, 0, 1))
        dz_all = np.empty((t_steps, n, 4 * h), dtype=dt)
        dh_next = np.zeros((n, h), dtype=dt)
        dc_next = np.zeros((n, h), dtype=dt)
        # gradients decay geometrically through the gates; values below the
        # smallest normal float are flushed to zero, otherwise long sequences
        # spend most of the pass in (extremely slow) subnormal arithmetic
        tiny = np.finfo(dt).tiny
        for t in range(t_steps - 1, -1, -1):
            dh = dh_next.copy()
            if self.return_sequences:
                dh += gy[t]
            elif t == t_steps - 1:
                dh += grad_out
            i = gates[t, :, :h]
            f = gates[t, :, h:2 * h]
            g = gates[t, :, 2 * h:3 * h]
            o = gates[t, :, 3 * h:]
            tc = tanh_c[t]
            dc = dc_next + dh * o * (1.0 - tc * tc)
            dz = dz_all[t]
            dz[:, :h] = dc * g * i * (1.0 - i)
            dz[:, h:2 * h] = dc * cs[t] * f * (1.0 - f)
            dz[:, 2 * h:3 * h] = dc * i * (1.0 - g * g)
            dz[:, 3 * h:] = dh * tc * o * (1.0 - o)
            dz[np.abs(dz) < tiny] = 0.0
            dh_next = dz @ self.w_h.T
            dc_next = dc * f
            dc_next[np.abs(dc_next) < tiny] = 0.0
        # weight gradients batched over all (step, sample) pairs at once
        dz_flat = dz_all.reshape(t_steps * n, 4 * h)
        self._g = {
            "w_x": x_tm.reshape(t_steps * n, din).T @ dz_flat,
            "w_h": hs[:-1].reshape(t_steps * n, h).T @ dz_flat,
            "bias": dz_flat.sum(axis=0),
        }
        dx_tm = (dz_flat @ self.w_x.T).reshape(t_steps, n, din)
        return np.ascontiguousarray(np.swapaxes(dx_tm, 0, 1))


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class Network:
    """Ordered layer stack with flat, name-addressed parameters."""

    def __init__(self, layers: list[Layer], dtype=np.float32):
        self.layers = layers
        self.dtype = dtype

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        out = np.asarray(x, dtype=self.dtype)
        for layer in self.layers:
            out = layer.forward(out, training=training, rng=rng)
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        grad = grad_out
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def params(self) -> dict[str, np.ndarray]:
        return self._collect("params")

    def grads(self) -> dict[str, np.ndarray]:
        return self._collect("grads")

    def state(self) -> dict[str, np.ndarray]:
        return self._collect("state")

    def _collect(self, kind: str) -> dict[str, np.ndarray]:
        out = {}
        for idx, layer in enumerate(self.layers):
            for name, arr in getattr(layer, kind)().items():
                out[f"layer{idx}.{name}"] = arr
        return out

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        """Write saved parameter/state values into the live arrays."""
        live = {**self.params(), **self.state()}
        for name, target in live.items():
            if name not in arrays:
                raise KeyError(f"missing tensor {name!r} in checkpoint data")
            src = arrays[name]
            if src.shape != target.shape:
                raise ValueError(
                    f"tensor {name!r} shape {src.shape} != expected {target.shape}")
            target[...] = src.astype(target.dtype)
