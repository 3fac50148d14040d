"""Minimal self-contained neural numerics: 2-D convolution, dense layers,
pointwise nonlinearities, average pooling, MSE loss, and plain SGD.

Everything is float64 and deterministic given a seed.  Gradients are
exact (validated against central finite differences in the test suite).
Sequential chains only; no general autograd.
"""
from __future__ import annotations

import numpy as np

from .errors import NonFiniteValue, ShapeMismatch


def _check_finite(x: np.ndarray, what: str) -> np.ndarray:
    if not np.isfinite(x).all():
        raise NonFiniteValue(f"non-finite values in {what}")
    return x


class Conv2d:
    """Size-preserving 2-D convolution, 1x1 or 3x3 kernel.

    `padding` is 'toroidal' (indices wrap, translation-equivariant) or
    'zero'.  Weights init uniform(-a, a) with a = sqrt(1/fan_in).
    """

    def __init__(self, in_ch, out_ch, kernel=3, padding="toroidal", rng=None):
        if kernel not in (1, 3):
            raise ValueError("kernel must be 1 or 3")
        if padding not in ("toroidal", "zero"):
            raise ValueError("padding must be 'toroidal' or 'zero'")
        self.in_ch, self.out_ch, self.kernel, self.padding = in_ch, out_ch, kernel, padding
        a = np.sqrt(1.0 / (in_ch * kernel * kernel))
        rng = rng or np.random.default_rng(0)
        self.w = rng.uniform(-a, a, (out_ch, in_ch, kernel, kernel))
        self.b = np.zeros(out_ch)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def spec(self):
        return (f"conv2d in={self.in_ch} out={self.out_ch} "
                f"kernel={self.kernel} padding={self.padding}")

    @property
    def params(self):
        return [self.w, self.b]

    @property
    def grads(self):
        return [self.dw, self.db]

    def _shifted_stack(self, x):
        # (n, in, h, w) -> (n, in*k*k, h, w); entry (u,v) holds the input
        # value the kernel tap (u,v) reads for each output position.
        n, c, h, w = x.shape
        k = self.kernel
        if k == 1:
            return x
        ctr = k // 2
        planes = []
        if self.padding == "toroidal":
            for u in range(k):
                for v in range(k):
                    planes.append(np.roll(x, (ctr - u, ctr - v), axis=(2, 3)))
        else:
            xp = np.zeros((n, c, h + 2 * ctr, w + 2 * ctr))
            xp[:, :, ctr:ctr + h, ctr:ctr + w] = x
            for u in range(k):
                for v in range(k):
                    planes.append(xp[:, :, u:u + h, v:v + w])
        return np.stack(planes, axis=2).reshape(n, c * k * k, h, w)

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.in_ch:
            raise ShapeMismatch(f"conv2d expected (n,{self.in_ch},h,w), got {x.shape}")
        xs = self._shifted_stack(x)
        wrs = self.w.reshape(self.out_ch, -1)
        out = np.tensordot(wrs, xs, axes=([1], [1]))   # (o, n, h, w)
        out += self.b[:, None, None, None]
        self._cache = (x.shape, xs)
        return np.ascontiguousarray(out.transpose(1, 0, 2, 3))

    def backward(self, dy):
        shape, xs = self._cache
        n, c, h, w = shape
        k = self.kernel
        wrs = self.w.reshape(self.out_ch, -1)
        self.db[:] = dy.sum(axis=(0, 2, 3))
        self.dw[:] = np.tensordot(dy, xs, axes=([0, 2, 3], [0, 2, 3])) \
            .reshape(self.w.shape)
        dxs = np.tensordot(wrs, dy, axes=([0], [1])) \
            .transpose(1, 0, 2, 3).reshape(n, c, k * k, h, w)
        if k == 1:
            return dxs[:, :, 0]
        ctr = k // 2
        dx = np.zeros(shape)
        if self.padding == "toroidal":
            for u in range(k):
                for v in range(k):
                    dx += np.roll(dxs[:, :, u * k + v], (u - ctr, v - ctr), axis=(2, 3))
        else:
            dxp = np.zeros((n, c, h + 2 * ctr, w + 2 * ctr))
            for u in range(k):
                for v in range(k):
                    dxp[:, :, u:u + h, v:v + w] += dxs[:, :, u * k + v]
            dx = dxp[:, :, ctr:ctr + h, ctr:ctr + w]
        return dx


class Dense:
    def __init__(self, in_dim, out_dim, rng=None):
        self.in_dim, self.out_dim = in_dim, out_dim
        a = np.sqrt(1.0 / in_dim)
        rng = rng or np.random.default_rng(0)
        self.w = rng.uniform(-a, a, (out_dim, in_dim))
        self.b = np.zeros(out_dim)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def spec(self):
        return f"dense in={self.in_dim} out={self.out_dim}"

    @property
    def params(self):
        return [self.w, self.b]

    @property
    def grads(self):
        return [self.dw, self.db]

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeMismatch(f"dense expected (n,{self.in_dim}), got {x.shape}")
        self._x = x
        return x @ self.w.T + self.b

    def backward(self, dy):
        self.dw[:] = dy.T @ self._x
        self.db[:] = dy.sum(axis=0)
        return dy @ self.w


class _Stateless:
    params: list = []
    grads: list = []


class Relu(_Stateless):
    def spec(self):
        return "relu"

    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dy):
        return np.where(self._mask, dy, 0.0)


class Sigmoid(_Stateless):
    def spec(self):
        return "sigmoid"

    def forward(self, x):
        # split by sign so exp never overflows
        y = np.empty_like(x)
        pos = x >= 0
        y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        y[~pos] = ex / (1.0 + ex)
        self._y = y
        return y

    def backward(self, dy):
        return dy * self._y * (1.0 - self._y)


class Tanh(_Stateless):
    def spec(self):
        return "tanh"

    def forward(self, x):
        self._y = np.tanh(x)
        return self._y

    def backward(self, dy):
        return dy * (1.0 - self._y ** 2)


class Flatten(_Stateless):
    def spec(self):
        return "flatten"

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)


class AvgPool2d(_Stateless):
    """Non-overlapping f x f block average; h and w must divide by f."""

    def __init__(self, factor):
        self.factor = factor

    def spec(self):
        return f"avgpool factor={self.factor}"

    def forward(self, x):
        n, c, h, w = x.shape
        f = self.factor
        if h % f or w % f:
            raise ShapeMismatch(f"avgpool factor {f} does not divide {(h, w)}")
        self._shape = x.shape
        return x.reshape(n, c, h // f, f, w // f, f).mean(axis=(3, 5))

    def backward(self, dy):
        f = self.factor
        scale = 1.0 / (f * f)
        return np.repeat(np.repeat(dy, f, axis=2), f, axis=3) * scale


class Network:
    """A sequential chain of layers with MSE/SGD training."""

    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x):
        x = _check_finite(np.asarray(x, np.float64), "network input")
        for layer in self.layers:
            x = layer.forward(x)
        return _check_finite(x, "network output")

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def param_arrays(self):
        return [p for layer in self.layers for p in layer.params]

    def grad_arrays(self):
        return [g for layer in self.layers for g in layer.grads]

    def num_params(self):
        return sum(p.size for p in self.param_arrays())

    def get_flat(self) -> np.ndarray:
        arrays = self.param_arrays()
        if not arrays:
            return np.zeros(0)
        return np.concatenate([p.ravel() for p in arrays])

    def set_flat(self, vec: np.ndarray):
        vec = np.asarray(vec, np.float64)
        if vec.size != self.num_params():
            raise ShapeMismatch(
                f"flat vector length {vec.size} != {self.num_params()} params")
        i = 0
        for p in self.param_arrays():
            p[:] = vec[i:i + p.size].reshape(p.shape)
            i += p.size

    def specs(self):
        return [layer.spec() for layer in self.layers]


def forward(net: Network, x: np.ndarray) -> np.ndarray:
    """Deterministic forward pass with finite-value checking."""
    return net.forward(x)


def mse(y: np.ndarray, target: np.ndarray) -> float:
    if y.shape != target.shape:
        raise ShapeMismatch(f"loss shapes differ: {y.shape} vs {target.shape}")
    diff = y - target
    return float(np.mean(diff * diff))


def sgd_step(net: Network, x: np.ndarray, target: np.ndarray, lr: float) -> float:
    """One gradient step on MSE(forward(net, x), target); returns the
    pre-step loss."""
    if lr <= 0:
        raise ValueError("lr must be > 0")
    y = net.forward(x)
    target = np.asarray(target, np.float64)
    if y.shape != target.shape:
        raise ShapeMismatch(f"target shape {target.shape} != output {y.shape}")
    diff = y - target
    loss = float(np.mean(diff * diff))
    if not np.isfinite(loss):
        raise NonFiniteValue("non-finite loss")
    net.backward(2.0 * diff / diff.size)
    for p, g in zip(net.param_arrays(), net.grad_arrays()):
        p -= lr * g
    return loss


def build(spec_lines, seed: int = 0) -> Network:
    """Construct a Network from manifest lines (see Layer.spec formats)."""
    rng = np.random.default_rng(seed)
    layers = []
    for line in spec_lines:
        parts = line.split()
        kind, kv = parts[0], dict(p.split("=") for p in parts[1:])
        if kind == "conv2d":
            layers.append(Conv2d(int(kv["in"]), int(kv["out"]),
                                 int(kv["kernel"]), kv["padding"], rng))
        elif kind == "dense":
            layers.append(Dense(int(kv["in"]), int(kv["out"]), rng))
        elif kind == "relu":
            layers.append(Relu())
        elif kind == "sigmoid":
            layers.append(Sigmoid())
        elif kind == "tanh":
            layers.append(Tanh())
        elif kind == "flatten":
            layers.append(Flatten())
        elif kind == "avgpool":
            layers.append(AvgPool2d(int(kv["factor"])))
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
    return Network(layers)


def save_weights(path: str, net: Network) -> None:
    """Raw little-endian float64 at `path`, layer manifest at
    `path + '.manifest'`; round-trips bit-exactly."""
    net.get_flat().astype("<f8").tofile(path)
    with open(path + ".manifest", "w", encoding="utf-8") as fh:
        fh.write("\n".join(net.specs()) + "\n")


def load_weights(path: str) -> Network:
    with open(path + ".manifest", "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    net = build(lines)
    net.set_flat(np.fromfile(path, dtype="<f8"))
    return net
