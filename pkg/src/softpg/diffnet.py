"""Dense feed-forward networks with hand-written reverse mode, plus Adam.

All parameters of an :class:`Mlp` live in one contiguous float64 vector
(``net.params``); per-layer weights and biases are views into it. Gradients
are returned in the same flat layout, so optimizers and gradient checks only
ever deal with 1-D arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InputShapeError, PoisonedUpdateError

# Flat gradient vector, congruent with the ``params`` vector it belongs to.
GradBuffer = np.ndarray

_ACTIVATIONS = ("tanh", "relu")


def orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float) -> np.ndarray:
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


class Mlp:
    """Fully connected network ``x -> h1 -> ... -> y`` with identity output.

    Args:
        layer_sizes: ``[in, hidden..., out]``.
        activation: ``"tanh"`` or ``"relu"`` for every hidden layer.
        rng: generator used for the orthogonal initialisation. ``None`` leaves
            every parameter at zero.
        hidden_gain, output_gain: orthogonal-init gains.
    """

    def __init__(
        self,
        layer_sizes: Sequence[int],
        activation: str = "tanh",
        rng: np.random.Generator | None = None,
        hidden_gain: float = np.sqrt(2.0),
        output_gain: float = 1.0,
    ):
        sizes = tuple(int(n) for n in layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError(f"layer_sizes must hold >= 2 positive ints, got {layer_sizes!r}")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.layer_sizes = sizes
        self.activation = activation
        self._bind(np.zeros(self.num_params))
        if rng is not None:
            n_layers = len(sizes) - 1
            for i, w in enumerate(self.weights):
                gain = output_gain if i == n_layers - 1 else hidden_gain
                w[...] = orthogonal(rng, w.shape, gain)

    @property
    def num_params(self) -> int:
        s = self.layer_sizes
        return sum(s[i] * s[i + 1] + s[i + 1] for i in range(len(s) - 1))

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    def _bind(self, buf: np.ndarray) -> None:
        """Point parameter views at ``buf`` (which must already hold the values)."""
        if buf.shape != (self.num_params,):
            raise InputShapeError(f"expected {self.num_params} params, got {buf.shape}")
        self.params = buf
        self.weights, self.biases = _views(self.layer_sizes, buf)

    def flatten(self) -> np.ndarray:
        return self.params.copy()

    def unflatten(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != self.params.shape:
            raise InputShapeError(f"expected {self.params.shape}, got {flat.shape}")
        self.params[...] = flat

    def copy(self) -> "Mlp":
        twin = Mlp(self.layer_sizes, self.activation)
        twin.params[...] = self.params
        return twin

    def _act(self, z: np.ndarray) -> np.ndarray:
        return np.tanh(z) if self.activation == "tanh" else np.maximum(z, 0.0)

    def _check(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise InputShapeError(f"expected input (..., {self.in_dim}), got {x.shape}")
        return x, single

    def forward(self, x) -> np.ndarray:
        """Network output for a single input vector or a ``(batch, in)`` array."""
        x, single = self._check(x)
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = self._act(h)
        return h[0] if single else h

    __call__ = forward

    def forward_cached(self, x) -> tuple[np.ndarray, list[np.ndarray]]:
        """Batched forward that also returns the per-layer inputs for backprop."""
        x, _ = self._check(x)
        inputs = []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            h = h @ w + b
            if i < last:
                h = self._act(h)
        return h, inputs

    def backward_cached(
        self, inputs: list[np.ndarray], upstream: np.ndarray, input_grad: bool = False
    ) -> tuple[GradBuffer, np.ndarray | None]:
        """Vector-Jacobian product from a :meth:`forward_cached` record.

        ``upstream`` has shape ``(batch, out)``; the returned gradient is that of
        ``sum(upstream * forward(x))`` with respect to ``params`` and, when
        ``input_grad`` is set, with respect to ``x``.
        """
        grad = np.zeros_like(self.params)
        g_w, g_b = _views(self.layer_sizes, grad)
        delta = np.asarray(upstream, dtype=np.float64)
        if delta.ndim == 1:
            delta = delta[None, :]
        if delta.shape != (inputs[0].shape[0], self.out_dim):
            raise InputShapeError(f"upstream shape {delta.shape} does not match output")
        for i in range(len(self.weights) - 1, -1, -1):
            h_in = inputs[i]
            g_w[i][...] = h_in.T @ delta
            g_b[i][...] = delta.sum(axis=0)
            if i == 0 and not input_grad:
                break
            delta = delta @ self.weights[i].T
            if i > 0:
                # h_in is the activation output of layer i-1
                if self.activation == "tanh":
                    delta = delta * (1.0 - h_in * h_in)
                else:
                    delta = delta * (h_in > 0.0)
        return grad, (delta if input_grad else None)

    def backward(self, x, upstream) -> GradBuffer:
        """Exact gradient of ``upstream . forward(x)`` with respect to the parameters."""
        _, inputs = self.forward_cached(x)
        up = np.asarray(upstream, dtype=np.float64)
        if up.ndim == 1 and np.asarray(x).ndim == 1:
            up = up[None, :]
        return self.backward_cached(inputs, up)[0]

    def vjp(self, x, upstream) -> tuple[GradBuffer, np.ndarray]:
        """Like :meth:`backward` but also returns the gradient with respect to ``x``."""
        _, inputs = self.forward_cached(x)
        return self.backward_cached(inputs, upstream, input_grad=True)


def _views(sizes: tuple[int, ...], buf: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    ws, bs, off = [], [], 0
    for i in range(len(sizes) - 1):
        n_w = sizes[i] * sizes[i + 1]
        ws.append(buf[off:off + n_w].reshape(sizes[i], sizes[i + 1]))
        off += n_w
        bs.append(buf[off:off + sizes[i + 1]])
        off += sizes[i + 1]
    return ws, bs


@dataclass
class AdamState:
    size: int
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros(self.size)
        if self.v is None:
            self.v = np.zeros(self.size)


def adam_step(target, grads: GradBuffer, state: AdamState) -> None:
    """Apply one Adam descent step to ``target.params`` in place.

    Raises :class:`PoisonedUpdateError` (leaving everything untouched) when
    ``grads`` contains NaN or Inf.
    """
    params = target.params
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.shape:
        raise InputShapeError(f"gradient shape {grads.shape} != params {params.shape}")
    if not np.all(np.isfinite(grads)):
        raise PoisonedUpdateError("non-finite gradient passed to adam_step")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    params -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def clip_grad_norm(grads: GradBuffer, max_norm: float | None) -> GradBuffer:
    if max_norm is None:
        return grads
    norm = float(np.linalg.norm(grads))
    if norm > max_norm:
        return grads * (max_norm / norm)
    return grads


def grad_check(
    target,
    loss_and_grad: Callable[[], tuple[float, GradBuffer]],
    h: float = 1e-6,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_and_grad`` is evaluated at whatever ``target.params`` currently
    holds. Each component's error is ``|a - fd| / max(1, |a|, |fd|)``.
    """
    params = target.params
    theta0 = params.copy()
    _, analytic = loss_and_grad()
    analytic = np.asarray(analytic, dtype=np.float64).copy()
    fd = np.empty_like(theta0)
    try:
        for i in range(theta0.size):
            params[i] = theta0[i] + h
            f_plus = loss_and_grad()[0]
            params[i] = theta0[i] - h
            f_minus = loss_and_grad()[0]
            params[i] = theta0[i]
            fd[i] = (f_plus - f_minus) / (2.0 * h)
    finally:
        params[...] = theta0
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(fd)))
    return float(np.max(np.abs(analytic - fd) / denom)) if fd.size else 0.0
