"""Stochastic policy heads: diagonal Gaussian (four sigma schemes) and categorical.

Both heads keep every trainable number in a single flat ``params`` vector so
that :func:`softpg.diffnet.adam_step` and :func:`softpg.diffnet.grad_check`
apply to them directly.
"""
from __future__ import annotations

import copy
import enum
import math
from typing import Sequence

import numpy as np

from .diffnet import Mlp
from .errors import InputShapeError, PolicyDegenerateError

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
INIT_LOG_STD = math.log(0.6)
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
HALF_LOG_2PIE = 0.5 * math.log(2.0 * math.pi * math.e)


class SigmaScheme(enum.IntEnum):
    """How the action standard deviation is produced (rows of the scheme table)."""

    GLOBAL = 1
    LOCAL = 2
    GLOBAL_TIMES_LOCAL = 3
    GLOBAL_TIMES_CLIPPED_LOCAL = 4


def _as_batch(x, dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise InputShapeError(f"expected (..., {dim}), got {x.shape}")
    return x, single


def _log1m_tanh2(u: np.ndarray) -> np.ndarray:
    # log(1 - tanh(u)^2), stable for large |u|
    return 2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


class GaussianHead:
    """Diagonal Gaussian policy ``a = mu(s) + sigma(s) * eps``.

    The mean network outputs ``act_dim`` means and, for schemes 2-4, another
    ``act_dim`` local log-scale values. The global log-sigma vector is stored
    after the network parameters in ``params``.

    With ``squash=True`` the sample is pushed through
    ``center + scale * tanh(u)`` and :meth:`log_prob` includes the
    change-of-variables term; :meth:`entropy` is always the pre-squash value.
    """

    has_analytic_entropy = True

    def __init__(
        self,
        obs_dim: int,
        act_dim: int,
        hidden: Sequence[int] = (64, 64),
        activation: str = "tanh",
        scheme: SigmaScheme | int = SigmaScheme.GLOBAL,
        rng: np.random.Generator | None = None,
        squash: bool = False,
        low=None,
        high=None,
        init_log_std: float = INIT_LOG_STD,
    ):
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.scheme = SigmaScheme(scheme)
        self.squash = bool(squash)
        self.has_analytic_entropy = not self.squash
        low = -np.ones(act_dim) if low is None else np.broadcast_to(np.asarray(low, float), (act_dim,))
        high = np.ones(act_dim) if high is None else np.broadcast_to(np.asarray(high, float), (act_dim,))
        self.low, self.high = np.array(low), np.array(high)
        self.center = 0.5 * (self.high + self.low)
        self.scale = 0.5 * (self.high - self.low)

        mean_net = Mlp([obs_dim, *hidden, act_dim], activation, rng, output_gain=0.01)
        if self.scheme is SigmaScheme.GLOBAL:
            net = mean_net
        else:
            net = Mlp([obs_dim, *hidden, 2 * act_dim], activation)
            for w_new, w_old in zip(net.weights[:-1], mean_net.weights[:-1]):
                w_new[...] = w_old
            for b_new, b_old in zip(net.biases[:-1], mean_net.biases[:-1]):
                b_new[...] = b_old
            net.weights[-1][:, :act_dim] = mean_net.weights[-1]
            net.biases[-1][:act_dim] = mean_net.biases[-1]
            # local head starts at exactly zero output (delta sigma = 1)
            if self.scheme is SigmaScheme.LOCAL:
                net.biases[-1][act_dim:] = init_log_std
        self.net = net
        buf = np.concatenate([net.params, np.full(act_dim, init_log_std)])
        self._attach(buf)

    def _attach(self, buf: np.ndarray) -> None:
        self.params = buf
        n = self.net.num_params
        self.net._bind(buf[:n])
        self.log_std_global = buf[n:]

    def copy(self) -> "GaussianHead":
        twin = copy.copy(self)
        twin.net = copy.copy(self.net)
        twin._attach(self.params.copy())
        return twin

    @property
    def num_params(self) -> int:
        return self.params.size

    # -- distribution parameters -------------------------------------------------

    def _dist(self, obs):
        obs, single = _as_batch(obs, self.obs_dim)
        out, inputs = self.net.forward_cached(obs)
        d = self.act_dim
        mean = out[:, :d]
        local = out[:, d:] if self.scheme is not SigmaScheme.GLOBAL else None
        g = self.log_std_global
        if self.scheme is SigmaScheme.GLOBAL:
            raw = np.broadcast_to(g, mean.shape)
        elif self.scheme is SigmaScheme.LOCAL:
            raw = local
        elif self.scheme is SigmaScheme.GLOBAL_TIMES_LOCAL:
            raw = g + local
        else:
            raw = g + np.minimum(local, 0.0)
        log_std = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(log_std))):
            raise PolicyDegenerateError("non-finite mean or log-std from policy network")
        cache = (inputs, raw, local)
        return mean, log_std, cache, single

    def mean_log_std(self, obs) -> tuple[np.ndarray, np.ndarray]:
        mean, log_std, _, single = self._dist(obs)
        return (mean[0], log_std[0]) if single else (mean, log_std)

    def sigma(self, obs) -> np.ndarray:
        return np.exp(self.mean_log_std(obs)[1])

    def _dist_backward(self, cache, dmean: np.ndarray, dlog_std: np.ndarray) -> np.ndarray:
        inputs, raw, local = cache
        draw = dlog_std * ((raw > LOG_STD_MIN) & (raw < LOG_STD_MAX))
        d_global = np.zeros(self.act_dim)
        if self.scheme is SigmaScheme.GLOBAL:
            upstream = dmean
            d_global = draw.sum(axis=0)
        elif self.scheme is SigmaScheme.LOCAL:
            upstream = np.concatenate([dmean, draw], axis=1)
        elif self.scheme is SigmaScheme.GLOBAL_TIMES_LOCAL:
            upstream = np.concatenate([dmean, draw], axis=1)
            d_global = draw.sum(axis=0)
        else:
            upstream = np.concatenate([dmean, draw * (local < 0.0)], axis=1)
            d_global = draw.sum(axis=0)
        g_net, _ = self.net.backward_cached(inputs, upstream)
        return np.concatenate([g_net, d_global])

    # -- densities ----------------------------------------------------------------

    def log_prob(self, obs, act) -> np.ndarray:
        mean, log_std, _, single = self._dist(obs)
        act, _ = _as_batch(act, self.act_dim)
        if self.squash:
            y = np.clip((act - self.center) / self.scale, -1.0 + 1e-12, 1.0 - 1e-12)
            u = np.arctanh(y)
            z = (u - mean) / np.exp(log_std)
            lp = np.sum(-0.5 * z * z - log_std - HALF_LOG_2PI
                        - np.log(self.scale) - _log1m_tanh2(u), axis=1)
        else:
            z = (act - mean) / np.exp(log_std)
            lp = np.sum(-0.5 * z * z - log_std - HALF_LOG_2PI, axis=1)
        return lp[0] if single else lp

    def entropy(self, obs) -> np.ndarray:
        """Pre-squash Gaussian entropy, ``sum_d 0.5 ln(2 pi e sigma_d^2)``."""
        _, log_std, _, single = self._dist(obs)
        h = np.sum(log_std + HALF_LOG_2PIE, axis=1)
        return h[0] if single else h

    def grad_logp_entropy(self, obs, act, dlogp, dent) -> np.ndarray:
        """Gradient of ``sum_i dlogp_i log pi(a_i|s_i) + dent_i H(s_i)`` (unsquashed)."""
        if self.squash:
            raise NotImplementedError("use rsample_backward for squashed heads")
        mean, log_std, cache, _ = self._dist(obs)
        act, _ = _as_batch(act, self.act_dim)
        dlogp = np.asarray(dlogp, dtype=np.float64).reshape(-1, 1)
        dent = np.asarray(dent, dtype=np.float64).reshape(-1, 1)
        z = (act - mean) / np.exp(log_std)
        dmean = dlogp * z / np.exp(log_std)
        dlog_std = dlogp * (z * z - 1.0) + dent
        return self._dist_backward(cache, dmean, dlog_std)

    # -- sampling ----------------------------------------------------------------

    def rsample_full(self, obs, eps):
        """Reparametrised sample with its log-density and a backprop record.

        Returns ``(action, log_prob, record)`` for a batch; pass ``record`` to
        :meth:`rsample_backward`.
        """
        mean, log_std, cache, _ = self._dist(obs)
        eps = np.asarray(eps, dtype=np.float64).reshape(mean.shape)
        std = np.exp(log_std)
        u = mean + std * eps
        lp = -0.5 * eps * eps - log_std - HALF_LOG_2PI
        if self.squash:
            t = np.tanh(u)
            act = self.center + self.scale * t
            lp = lp - np.log(self.scale) - _log1m_tanh2(u)
        else:
            t = None
            act = u
        record = (cache, std, eps, t)
        return act, lp.sum(axis=1), record

    def rsample_backward(self, record, daction, dlogp) -> np.ndarray:
        """Gradient of ``sum(daction * action) + sum(dlogp * log_prob)`` through the
        reparametrised path, with the noise held fixed."""
        cache, std, eps, t = record
        dlogp = np.asarray(dlogp, dtype=np.float64).reshape(-1, 1)
        if self.squash:
            du = daction * (self.scale * (1.0 - t * t)) + dlogp * (2.0 * t)
        else:
            du = daction
        dmean = du
        dlog_std = du * (std * eps) - dlogp
        return self._dist_backward(cache, dmean, dlog_std)

    def rsample(self, obs, eps) -> np.ndarray:
        single = np.asarray(obs).ndim == 1
        act, _, _ = self.rsample_full(obs, eps)
        return act[0] if single else act

    def sample(self, obs, rng: np.random.Generator):
        """Draw ``a ~ pi(.|s)``; returns ``(action, log_prob)``."""
        single = np.asarray(obs).ndim == 1
        n = 1 if single else np.asarray(obs).shape[0]
        eps = rng.standard_normal((n, self.act_dim))
        act, lp, _ = self.rsample_full(obs, eps)
        return (act[0], float(lp[0])) if single else (act, lp)

    def mode(self, obs) -> np.ndarray:
        mean, _ = self.mean_log_std(obs)
        if self.squash:
            return self.center + self.scale * np.tanh(mean)
        return mean


class CategoricalHead:
    """Softmax policy over ``n_actions`` discrete actions."""

    has_analytic_entropy = True
    squash = False

    def __init__(
        self,
        obs_dim: int,
        n_actions: int,
        hidden: Sequence[int] = (64, 64),
        activation: str = "tanh",
        rng: np.random.Generator | None = None,
    ):
        self.obs_dim = int(obs_dim)
        self.n_actions = int(n_actions)
        self.net = Mlp([obs_dim, *hidden, n_actions], activation, rng, output_gain=0.01)
        self.params = self.net.params

    def copy(self) -> "CategoricalHead":
        twin = copy.copy(self)
        twin.net = self.net.copy()
        twin.params = twin.net.params
        return twin

    @property
    def num_params(self) -> int:
        return self.params.size

    def _log_probs(self, obs):
        obs, single = _as_batch(obs, self.obs_dim)
        z, inputs = self.net.forward_cached(obs)
        if not np.all(np.isfinite(z)):
            raise PolicyDegenerateError("non-finite logits")
        logp = z - np.logaddexp.reduce(z, axis=1, keepdims=True)
        return logp, inputs, single

    def probs(self, obs) -> np.ndarray:
        logp, _, single = self._log_probs(obs)
        p = np.exp(logp)
        return p[0] if single else p

    def log_prob(self, obs, act):
        logp, _, single = self._log_probs(obs)
        act = np.atleast_1d(np.asarray(act, dtype=np.int64))
        lp = logp[np.arange(logp.shape[0]), act]
        return lp[0] if single else lp

    def entropy(self, obs):
        logp, _, single = self._log_probs(obs)
        h = -np.sum(np.exp(logp) * logp, axis=1)
        return h[0] if single else h

    def grad_logp_entropy(self, obs, act, dlogp, dent) -> np.ndarray:
        logp, inputs, _ = self._log_probs(obs)
        p = np.exp(logp)
        act = np.atleast_1d(np.asarray(act, dtype=np.int64))
        dlogp = np.asarray(dlogp, dtype=np.float64).reshape(-1, 1)
        dent = np.asarray(dent, dtype=np.float64).reshape(-1, 1)
        onehot = np.zeros_like(p)
        onehot[np.arange(p.shape[0]), act] = 1.0
        h = -np.sum(p * logp, axis=1, keepdims=True)
        dz = dlogp * (onehot - p) - dent * p * (logp + h)
        g, _ = self.net.backward_cached(inputs, dz)
        return g

    def sample(self, obs, rng: np.random.Generator):
        logp, _, single = self._log_probs(obs)
        cdf = np.cumsum(np.exp(logp), axis=1)
        u = rng.random((logp.shape[0], 1)) * cdf[:, -1:]
        act = np.minimum((u >= cdf).sum(axis=1), self.n_actions - 1)
        lp = logp[np.arange(logp.shape[0]), act]
        return (int(act[0]), float(lp[0])) if single else (act, lp)

    def mode(self, obs):
        logp, _, single = self._log_probs(obs)
        a = np.argmax(logp, axis=1)
        return int(a[0]) if single else a


def gaussian_kl(mean_p, log_std_p, mean_q, log_std_q) -> np.ndarray:
    """KL(p || q) between diagonal Gaussians, summed over the last axis."""
    var_p = np.exp(2.0 * log_std_p)
    var_q = np.exp(2.0 * log_std_q)
    kl = log_std_q - log_std_p + (var_p + (mean_p - mean_q) ** 2) / (2.0 * var_q) - 0.5
    return np.sum(kl, axis=-1)
