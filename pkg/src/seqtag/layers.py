"""Trainable layers: embedding lookup, recurrent cells, sequence unrolling,
a bidirectional wrapper, 1-d convolution, relu, and a dense projection.

Shared protocol: ``forward`` caches whatever backward needs on the layer
instance, ``backward`` consumes the upstream gradient, accumulates
parameter gradients (read via ``gradients()``, clear via ``zero_grad()``)
and returns the gradient w.r.t. the layer input. Because of the caches a
layer instance must not be shared between concurrent training steps.

Recurrent weights use the concatenated-input convention: each gate holds
one (input_dim + hidden_dim) x hidden_dim matrix applied to [x; h] plus a
bias vector of length hidden_dim.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, DimensionError
from .tensor import sigmoid

CELL_KINDS = ("simple_rnn", "gru", "lstm")

_GATES = {
    "simple_rnn": ("w",),
    "gru": ("z", "r", "h"),
    "lstm": ("i", "f", "o", "g"),
}


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    """Uniform init on [-s, s] with s = sqrt(6 / (fan_in + fan_out))."""
    s = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


class Layer:
    """Base for parameter-holding layers; see the module docstring."""

    def __init__(self):
        self._params: dict[str, np.ndarray] = {}
        self._grads: dict[str, np.ndarray] = {}

    def _add_param(self, name: str, value: np.ndarray) -> np.ndarray:
        value = np.ascontiguousarray(value, dtype=np.float64)
        self._params[name] = value
        self._grads[name] = np.zeros_like(value)
        return value

    def parameters(self) -> dict[str, np.ndarray]:
        return self._params

    def gradients(self) -> dict[str, np.ndarray]:
        return self._grads

    def zero_grad(self) -> None:
        for g in self._grads.values():
            g.fill(0.0)


class Embedding(Layer):
    """Token-id to row-vector lookup. Row 0 is the padding row: its
    gradient is discarded, so it never trains."""

    PAD_ROW = 0

    def __init__(self, vocab_size: int, dim: int, rng: np.random.Generator):
        if vocab_size < 2 or dim < 1:
            raise ConfigError(f"bad embedding size ({vocab_size}, {dim})")
        super().__init__()
        self.vocab_size = vocab_size
        self.dim = dim
        self.table = self._add_param(
            "table", glorot_uniform(rng, vocab_size, dim, (vocab_size, dim))
        )
        self._ids: np.ndarray | None = None

    def forward(self, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.intp)
        if ids.ndim != 1 or ids.size == 0:
            raise ValueError("ids must be a non-empty 1-d sequence")
        bad = (ids < 0) | (ids >= self.vocab_size)
        if bad.any():
            raise IndexError(
                f"token id {int(ids[bad][0])} outside [0, {self.vocab_size})"
            )
        self._ids = ids
        return self.table[ids]

    def backward(self, d_out: np.ndarray) -> None:
        if self._ids is None:
            raise RuntimeError("backward before forward")
        d_out = np.asarray(d_out, dtype=np.float64)
        if d_out.shape != (self._ids.size, self.dim):
            raise DimensionError(
                f"gradient shape {d_out.shape} != {(self._ids.size, self.dim)}"
            )
        np.add.at(self._grads["table"], self._ids, d_out)
        self._grads["table"][self.PAD_ROW] = 0.0
        return None


class RecurrentCell(Layer):
    """One step of a simple_rnn, gru, or lstm over vectors.

    simple_rnn: h' = tanh(W [x;h] + b)
    gru:        z = sig(Wz [x;h] + bz), r = sig(Wr [x;h] + br),
                hc = tanh(Wh [x; r*h] + bh), h' = (1-z)*h + z*hc
    lstm:       i,f,o = sig(W? [x;h] + b?), g = tanh(Wg [x;h] + bg),
                c' = f*c + i*g, h' = o * tanh(c')
    """

    def __init__(self, kind: str, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        if kind not in CELL_KINDS:
            raise ConfigError(f"unknown cell kind {kind!r}, expected one of {CELL_KINDS}")
        if input_dim < 1 or hidden_dim < 1:
            raise ConfigError(f"bad cell dims ({input_dim}, {hidden_dim})")
        super().__init__()
        self.kind = kind
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        fan = input_dim + hidden_dim
        for gate in _GATES[kind]:
            self._add_param(
                f"w_{gate}", glorot_uniform(rng, fan, hidden_dim, (fan, hidden_dim))
            )
            bias = np.zeros(hidden_dim)
            if kind == "lstm" and gate == "f":
                bias += 1.0  # open forget gate at init
            self._add_param(f"b_{gate}", bias)

    def initial_state(self):
        h = np.zeros(self.hidden_dim)
        c = np.zeros(self.hidden_dim) if self.kind == "lstm" else None
        return h, c

    def _check_step_args(self, x, h):
        x = np.asarray(x, dtype=np.float64)
        h = np.asarray(h, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise DimensionError(f"input shape {x.shape} != ({self.input_dim},)")
        if h.shape != (self.hidden_dim,):
            raise DimensionError(f"state shape {h.shape} != ({self.hidden_dim},)")
        return x, h

    def step(self, x, state):
        """Advance one time step. Returns ((h', c'), cache)."""
        h, c = state
        x, h = self._check_step_args(x, h)
        p = self._params
        xh = np.concatenate((x, h))
        if self.kind == "simple_rnn":
            h_new = np.tanh(xh @ p["w_w"] + p["b_w"])
            return (h_new, None), (xh, h_new)
        if self.kind == "gru":
            z = sigmoid(xh @ p["w_z"] + p["b_z"])
            r = sigmoid(xh @ p["w_r"] + p["b_r"])
            xrh = np.concatenate((x, r * h))
            hc = np.tanh(xrh @ p["w_h"] + p["b_h"])
            h_new = (1.0 - z) * h + z * hc
            return (h_new, None), (h, xh, z, r, xrh, hc)
        # lstm
        i = sigmoid(xh @ p["w_i"] + p["b_i"])
        f = sigmoid(xh @ p["w_f"] + p["b_f"])
        o = sigmoid(xh @ p["w_o"] + p["b_o"])
        g = np.tanh(xh @ p["w_g"] + p["b_g"])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        return (h_new, c_new), (c, xh, i, f, o, g, tc)

    def step_backward(self, cache, d_h, d_c=None):
        """Backprop one step. Takes the total gradient reaching (h', c'),
        accumulates parameter gradients, returns (d_x, d_h_prev, d_c_prev)."""
        p, g = self._params, self._grads
        d = self.input_dim
        if self.kind == "simple_rnn":
            xh, h_new = cache
            da = d_h * (1.0 - h_new * h_new)
            g["w_w"] += np.outer(xh, da)
            g["b_w"] += da
            dxh = p["w_w"] @ da
            return dxh[:d], dxh[d:], None
        if self.kind == "gru":
            h, xh, z, r, xrh, hc = cache
            dz = d_h * (hc - h)
            dhc = d_h * z
            d_h_prev = d_h * (1.0 - z)
            da_h = dhc * (1.0 - hc * hc)
            g["w_h"] += np.outer(xrh, da_h)
            g["b_h"] += da_h
            dxrh = p["w_h"] @ da_h
            d_x = dxrh[:d].copy()
            d_rh = dxrh[d:]
            d_h_prev = d_h_prev + d_rh * r
            dr = d_rh * h
            da_z = dz * z * (1.0 - z)
            da_r = dr * r * (1.0 - r)
            g["w_z"] += np.outer(xh, da_z)
            g["b_z"] += da_z
            g["w_r"] += np.outer(xh, da_r)
            g["b_r"] += da_r
            dxh = p["w_z"] @ da_z + p["w_r"] @ da_r
            d_x += dxh[:d]
            d_h_prev = d_h_prev + dxh[d:]
            return d_x, d_h_prev, None
        # lstm
        c_prev, xh, i, f, o, g_, tc = cache
        do = d_h * tc
        d_c_total = d_h * o * (1.0 - tc * tc)
        if d_c is not None:
            d_c_total = d_c_total + d_c
        di = d_c_total * g_
        df = d_c_total * c_prev
        dg = d_c_total * i
        d_c_prev = d_c_total * f
        pre = {
            "i": di * i * (1.0 - i),
            "f": df * f * (1.0 - f),
            "o": do * o * (1.0 - o),
            "g": dg * (1.0 - g_ * g_),
        }
        dxh = np.zeros_like(xh)
        for gate, da in pre.items():
            g[f"w_{gate}"] += np.outer(xh, da)
            g[f"b_{gate}"] += da
            dxh += p[f"w_{gate}"] @ da
        return dxh[:d], dxh[d:], d_c_prev


class Recurrent:
    """Unrolls a cell over a (T, input_dim) sequence from a zero initial
    state. With ``reverse=True`` the sequence is processed right to left
    but the output stays aligned with the input positions."""

    def __init__(self, cell: RecurrentCell, reverse: bool = False):
        self.cell = cell
        self.reverse = reverse
        self._caches: list | None = None

    def forward(self, inputs) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim != 2 or inputs.shape[1] != self.cell.input_dim:
            raise DimensionError(
                f"inputs shape {inputs.shape} incompatible with input_dim {self.cell.input_dim}"
            )
        t_len = inputs.shape[0]
        if t_len == 0:
            raise ValueError("empty sequence")
        xs = inputs[::-1] if self.reverse else inputs
        state = self.cell.initial_state()
        outs = np.empty((t_len, self.cell.hidden_dim))
        caches = []
        for t in range(t_len):
            state, cache = self.cell.step(xs[t], state)
            outs[t] = state[0]
            caches.append(cache)
        self._caches = caches
        return outs[::-1] if self.reverse else outs

    def backward(self, d_out) -> np.ndarray:
        if self._caches is None:
            raise RuntimeError("backward before forward")
        d_out = np.asarray(d_out, dtype=np.float64)
        t_len = len(self._caches)
        if d_out.shape != (t_len, self.cell.hidden_dim):
            raise DimensionError(f"gradient shape {d_out.shape} does not match output")
        d_seq = d_out[::-1] if self.reverse else d_out
        d_xs = np.empty((t_len, self.cell.input_dim))
        d_h = np.zeros(self.cell.hidden_dim)
        d_c = None
        for t in range(t_len - 1, -1, -1):
            d_xs[t], d_h, d_c = self.cell.step_backward(
                self._caches[t], d_h + d_seq[t], d_c
            )
        return d_xs[::-1] if self.reverse else d_xs

    def parameters(self):
        return self.cell.parameters()

    def gradients(self):
        return self.cell.gradients()

    def zero_grad(self):
        self.cell.zero_grad()


class Bidirectional:
    """Runs a forward-time and a backward-time recurrent layer over the
    same input and concatenates their outputs per position, forward
    columns first."""

    def __init__(self, fwd_cell: RecurrentCell, bwd_cell: RecurrentCell):
        if fwd_cell.hidden_dim != bwd_cell.hidden_dim:
            raise DimensionError(
                f"direction hidden dims differ: {fwd_cell.hidden_dim} vs {bwd_cell.hidden_dim}"
            )
        if fwd_cell.input_dim != bwd_cell.input_dim:
            raise DimensionError(
                f"direction input dims differ: {fwd_cell.input_dim} vs {bwd_cell.input_dim}"
            )
        self.fwd = Recurrent(fwd_cell)
        self.bwd = Recurrent(bwd_cell, reverse=True)
        self.hidden_dim = fwd_cell.hidden_dim

    def forward(self, inputs) -> np.ndarray:
        return np.concatenate(
            (self.fwd.forward(inputs), self.bwd.forward(inputs)), axis=1
        )

    def backward(self, d_out) -> np.ndarray:
        d_out = np.asarray(d_out, dtype=np.float64)
        h = self.hidden_dim
        if d_out.ndim != 2 or d_out.shape[1] != 2 * h:
            raise DimensionError(f"gradient shape {d_out.shape} != (T, {2 * h})")
        return self.fwd.backward(d_out[:, :h]) + self.bwd.backward(d_out[:, h:])

    def parameters(self):
        out = {f"fwd.{k}": v for k, v in self.fwd.parameters().items()}
        out.update({f"bwd.{k}": v for k, v in self.bwd.parameters().items()})
        return out

    def gradients(self):
        out = {f"fwd.{k}": v for k, v in self.fwd.gradients().items()}
        out.update({f"bwd.{k}": v for k, v in self.bwd.gradients().items()})
        return out

    def zero_grad(self):
        self.fwd.zero_grad()
        self.bwd.zero_grad()


class Conv1d(Layer):
    """1-d convolution over a (T, in_channels) sequence with zero padding
    chosen so the output keeps length T. Kernel width must be odd, or no
    such padding exists."""

    def __init__(self, kernel_width: int, in_channels: int, out_channels: int,
                 rng: np.random.Generator):
        if kernel_width < 1 or kernel_width % 2 == 0:
            raise ConfigError(f"kernel_width must be odd and positive, got {kernel_width}")
        if in_channels < 1 or out_channels < 1:
            raise ConfigError(f"bad channel counts ({in_channels}, {out_channels})")
        super().__init__()
        self.kernel_width = kernel_width
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = self._add_param(
            "kernel",
            glorot_uniform(
                rng,
                kernel_width * in_channels,
                kernel_width * out_channels,
                (kernel_width, in_channels, out_channels),
            ),
        )
        self.bias = self._add_param("bias", np.zeros(out_channels))
        self._padded: np.ndarray | None = None

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_channels:
            raise DimensionError(
                f"input shape {x.shape} incompatible with in_channels {self.in_channels}"
            )
        t_len = x.shape[0]
        if t_len == 0:
            raise ValueError("empty sequence")
        pad = (self.kernel_width - 1) // 2
        xp = np.zeros((t_len + 2 * pad, self.in_channels))
        xp[pad:pad + t_len] = x
        out = np.tile(self.bias, (t_len, 1))
        for d in range(self.kernel_width):
            out += xp[d:d + t_len] @ self.kernel[d]
        self._padded = xp
        return out

    def backward(self, d_out) -> np.ndarray:
        if self._padded is None:
            raise RuntimeError("backward before forward")
        d_out = np.asarray(d_out, dtype=np.float64)
        pad = (self.kernel_width - 1) // 2
        t_len = self._padded.shape[0] - 2 * pad
        if d_out.shape != (t_len, self.out_channels):
            raise DimensionError(f"gradient shape {d_out.shape} does not match output")
        d_xp = np.zeros_like(self._padded)
        gk = self._grads["kernel"]
        for d in range(self.kernel_width):
            gk[d] += self._padded[d:d + t_len].T @ d_out
            d_xp[d:d + t_len] += d_out @ self.kernel[d].T
        self._grads["bias"] += d_out.sum(axis=0)
        return d_xp[pad:pad + t_len]


class Relu:
    """Elementwise max(x, 0); gradient passes only where the input was
    positive."""

    def __init__(self):
        self._mask: np.ndarray | None = None

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        self._mask = x > 0.0
        return np.where(self._mask, x, 0.0)

    def backward(self, d_out) -> np.ndarray:
        if self._mask is None:
            raise RuntimeError("backward before forward")
        return np.where(self._mask, np.asarray(d_out, dtype=np.float64), 0.0)

    def parameters(self):
        return {}

    def gradients(self):
        return {}

    def zero_grad(self):
        pass


class Dense(Layer):
    """Affine projection applied row-wise: (T, in_dim) -> (T, out_dim)."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        if in_dim < 1 or out_dim < 1:
            raise ConfigError(f"bad dense dims ({in_dim}, {out_dim})")
        super().__init__()
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.w = self._add_param("w", glorot_uniform(rng, in_dim, out_dim, (in_dim, out_dim)))
        self.b = self._add_param("b", np.zeros(out_dim))
        self._x: np.ndarray | None = None

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise DimensionError(f"input shape {x.shape} incompatible with in_dim {self.in_dim}")
        self._x = x
        return x @ self.w + self.b

    def backward(self, d_out) -> np.ndarray:
        if self._x is None:
            raise RuntimeError("backward before forward")
        d_out = np.asarray(d_out, dtype=np.float64)
        if d_out.shape != (self._x.shape[0], self.out_dim):
            raise DimensionError(f"gradient shape {d_out.shape} does not match output")
        self._grads["w"] += self._x.T @ d_out
        self._grads["b"] += d_out.sum(axis=0)
        return d_out @ self.w.T
