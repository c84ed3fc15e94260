"""Layers with hand-written backward passes, float64 throughout.

Every layer exposes ``params`` and ``grads`` dicts with matching keys,
``forward(x)`` which caches what the backward pass needs, and
``backward(dy)`` which fills ``grads`` and returns the gradient w.r.t. the
layer input. Gradients are overwritten, not accumulated, on each backward.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    params: dict
    grads: dict

    def __init__(self):
        self.params = {}
        self.grads = {}

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError


class Dense(Layer):
    """``y = x @ W.T + b`` with ``W`` of shape ``(out, in)``."""

    def __init__(self, n_in, n_out, rng=None):
        super().__init__()
        if rng is None:
            w = np.zeros((n_out, n_in))
        else:
            w = glorot(rng, (n_out, n_in), n_in, n_out)
        self.params = {"W": w, "b": np.zeros(n_out)}
        self._x = None

    def forward(self, x):
        self._x = x
        return x @ self.params["W"].T + self.params["b"]

    def backward(self, dy):
        self.grads["W"] = dy.T @ self._x
        self.grads["b"] = dy.sum(axis=0)
        return dy @ self.params["W"]


class Tanh(Layer):
    def forward(self, x):
        self._y = np.tanh(x)
        return self._y

    def backward(self, dy):
        return dy * (1.0 - self._y**2)


class Identity(Layer):
    def forward(self, x):
        return x

    def backward(self, dy):
        return dy


class Conv2D(Layer):
    """3x3 (by default) convolution, stride 1, zero 'same' padding, NCHW."""

    def __init__(self, c_in, c_out, kernel=3, rng=None, input_grad=True):
        super().__init__()
        self.input_grad = input_grad
        shape = (c_out, c_in, kernel, kernel)
        if rng is None:
            w = np.zeros(shape)
        else:
            w = glorot(rng, shape, c_in * kernel * kernel, c_out * kernel * kernel)
        self.params = {"W": w, "b": np.zeros(c_out)}
        self.kernel = kernel
        self.pad = kernel // 2

    def forward(self, x):
        n, c, h, w = x.shape
        k, p = self.kernel, self.pad
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        # (n, c, h, w, k, k) -> (n*h*w, c*k*k)
        cols = sliding_window_view(xp, (k, k), axis=(2, 3))
        cols = cols.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, c * k * k)
        self._cols = cols
        self._in_shape = x.shape
        wmat = self.params["W"].reshape(self.params["W"].shape[0], -1)
        out = cols @ wmat.T + self.params["b"]
        return out.reshape(n, h, w, -1).transpose(0, 3, 1, 2)

    def backward(self, dy):
        n, c, h, w = self._in_shape
        k, p = self.kernel, self.pad
        c_out = dy.shape[1]
        dmat = dy.transpose(0, 2, 3, 1).reshape(n * h * w, c_out)
        self.grads["W"] = (dmat.T @ self._cols).reshape(self.params["W"].shape)
        self.grads["b"] = dmat.sum(axis=0)
        if not self.input_grad:
            return None
        # input gradient = 'same' correlation of dy with the flipped kernel
        dyp = np.pad(dy, ((0, 0), (0, 0), (p, p), (p, p)))
        win = sliding_window_view(dyp, (k, k), axis=(2, 3))
        flipped = self.params["W"][:, :, ::-1, ::-1]
        dx = np.tensordot(win, flipped, axes=([1, 4, 5], [0, 2, 3]))
        return dx.transpose(0, 3, 1, 2)


class AvgPool2(Layer):
    """2x2 average pooling with stride 2; spatial dims must be even."""

    def forward(self, x):
        n, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ValueError(f"AvgPool2 needs even spatial dims, got {h}x{w}")
        return x.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def backward(self, dy):
        return np.repeat(np.repeat(dy, 2, axis=2), 2, axis=3) * 0.25


class Flatten(Layer):
    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)


class Sequential(Layer):
    def __init__(self, layers):
        super().__init__()
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def named_params(self, prefix):
        for i, layer in enumerate(self.layers):
            for key in layer.params:
                yield f"{prefix}.{i}.{key}", layer, key


class LSTM(Layer):
    """Single-layer LSTM returning the final hidden state.

    Gate pre-activations are ``z = [x, h] @ W.T + b`` with ``W`` of shape
    ``(4H, I + H)``; rows are stacked in the order input, forget, cell
    candidate, output.
    """

    def __init__(self, n_in, hidden, rng=None, forget_bias=1.0):
        super().__init__()
        shape = (4 * hidden, n_in + hidden)
        w = np.zeros(shape) if rng is None else glorot(rng, shape, n_in + hidden, hidden)
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = forget_bias if rng is not None else 0.0
        self.params = {"W": w, "b": b}
        self.n_in = n_in
        self.hidden = hidden
        self._work = {}

    def _buffers(self, n, steps):
        # reuse work arrays per batch shape; fresh large allocations are slow
        key = (n, steps)
        buf = self._work.get(key)
        if buf is None:
            if len(self._work) >= 4:
                self._work.pop(next(iter(self._work)))
            hd = self.hidden
            buf = {
                "gates": np.empty((steps, n, 4 * hd)),
                "cells": np.zeros((steps + 1, n, hd)),
                "hids": np.zeros((steps + 1, n, hd)),
                "tcs": np.empty((steps, n, hd)),
                "dz": np.empty((steps, n, 4 * hd)),
            }
            self._work[key] = buf
        return buf

    def forward(self, x, return_cells=False):
        """``x`` has shape ``(batch, steps, n_in)``."""
        n, steps, n_in = x.shape
        hd = self.hidden
        w, b = self.params["W"], self.params["b"]
        wx = np.ascontiguousarray(w[:, :n_in])
        wh_t = np.ascontiguousarray(w[:, n_in:].T)
        buf = self._buffers(n, steps)
        gates, cells, hids, tcs = buf["gates"], buf["cells"], buf["hids"], buf["tcs"]
        # input contribution for all steps at once, (n, steps, 4H)
        # einsum, not BLAS: OpenBLAS is erratically slow for these thin products
        xz = (np.einsum("ni,gi->ng", x.reshape(n * steps, n_in), wx) + b).reshape(n, steps, 4 * hd)
        for s in range(steps):
            z = gates[s]
            np.matmul(hids[s], wh_t, out=z)
            z += xz[:, s, :]
            g = z[:, 2 * hd : 3 * hd]
            np.tanh(g, out=g)
            for sl in (slice(0, 2 * hd), slice(3 * hd, 4 * hd)):
                # logistic via tanh keeps large inputs finite
                zz = z[:, sl]
                zz *= 0.5
                np.tanh(zz, out=zz)
                zz += 1.0
                zz *= 0.5
            i, f, o = z[:, :hd], z[:, hd : 2 * hd], z[:, 3 * hd :]
            c = cells[s + 1]
            np.multiply(f, cells[s], out=c)
            c += i * g
            tc = tcs[s]
            np.tanh(c, out=tc)
            np.multiply(o, tc, out=hids[s + 1])
        self._cache = (x, gates, cells, hids, tcs, buf["dz"])
        if return_cells:
            return hids[-1].copy(), cells[1:].transpose(1, 0, 2).copy()
        return hids[-1].copy()

    def backward(self, dh):
        x, gates, cells, hids, tcs, dz_all = self._cache
        hd = self.hidden
        n_in = self.n_in
        steps, n, _ = gates.shape
        w = self.params["W"]
        wh = np.ascontiguousarray(w[:, n_in:])
        dc = np.zeros_like(dh)
        for s in reversed(range(steps)):
            gt = gates[s]
            i, f, g, o = gt[:, :hd], gt[:, hd : 2 * hd], gt[:, 2 * hd : 3 * hd], gt[:, 3 * hd :]
            tc = tcs[s]
            dz = dz_all[s]
            dct = dc + dh * o * (1.0 - tc * tc)
            dz[:, :hd] = dct * g * i * (1.0 - i)
            dz[:, hd : 2 * hd] = dct * cells[s] * f * (1.0 - f)
            dz[:, 2 * hd : 3 * hd] = dct * i * (1.0 - g * g)
            dz[:, 3 * hd :] = dh * tc * o * (1.0 - o)
            dh = dz @ wh
            dc = dct * f
        flat = dz_all.reshape(steps * n, 4 * hd)
        xs = x.transpose(1, 0, 2).reshape(steps * n, n_in)
        hs = hids[:-1].reshape(steps * n, hd)
        self.grads["W"] = np.concatenate([np.einsum("ng,ni->gi", flat, xs), flat.T @ hs], axis=1)
        self.grads["b"] = flat.sum(axis=0)
        dx = np.einsum("ng,gi->ni", flat, w[:, :n_in])
        return dx.reshape(steps, n, n_in).transpose(1, 0, 2)
