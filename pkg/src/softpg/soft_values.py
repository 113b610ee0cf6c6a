"""Exact entropy-regularised values and policy gradients for tabular MDPs.

The entropy bonus ``alpha * H(pi(.|s))`` is attached to the state the action
is taken in, so

    q(s, a) = sum_s' P(s'|s,a) [R(s,a,s') + alpha H(s) + gamma v(s')]
    v(s)    = sum_a pi(a|s) q(s, a)

Gradients are taken with respect to a logit table ``theta[s, a]`` with
``pi(.|s) = softmax(theta[s])`` and use discounted state occupancy
``d(s) = sum_k gamma^k Pr(s0 -> s in k steps)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import TabularMdp
from .errors import IterationLimitError


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    return logits - np.logaddexp.reduce(logits, axis=-1, keepdims=True)


def entropy(pi: np.ndarray) -> np.ndarray:
    """Row-wise entropy with ``0 log 0 = 0``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(pi > 0, pi * np.log(np.where(pi > 0, pi, 1.0)), 0.0)
    return -t.sum(axis=-1)


@dataclass
class TabularPolicy:
    """``pi(a|s)`` table, optionally backed by logits."""

    probs: np.ndarray
    logits: np.ndarray | None = None

    @classmethod
    def from_logits(cls, logits) -> "TabularPolicy":
        logits = np.asarray(logits, dtype=np.float64)
        return cls(softmax(logits), logits)

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "TabularPolicy":
        return cls.from_logits(np.zeros((n_states, n_actions)))

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if np.max(np.abs(self.probs.sum(axis=1) - 1.0)) > 1e-12 or np.any(self.probs < 0):
            raise ValueError("policy rows must be probability vectors")

    @property
    def log_probs(self) -> np.ndarray:
        if self.logits is not None:
            return log_softmax(self.logits)
        with np.errstate(divide="ignore"):
            return np.log(self.probs)


@dataclass
class SoftValues:
    v: np.ndarray
    q: np.ndarray
    alpha: float
    sweeps: int = 0


def _as_policy(pi) -> TabularPolicy:
    return pi if isinstance(pi, TabularPolicy) else TabularPolicy(np.asarray(pi, dtype=np.float64))


def soft_policy_evaluation(mdp: TabularMdp, pi, alpha: float, tol: float = 1e-12,
                           max_sweeps: int = 100_000) -> SoftValues:
    """Fixed point of the soft Bellman backups by synchronous iteration."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    pi = _as_policy(pi)
    r_sa = mdp.expected_reward + alpha * entropy(pi.probs)[:, None]
    v = np.zeros(mdp.n_states)
    for sweep in range(1, max_sweeps + 1):
        q = r_sa + mdp.gamma * (mdp.P @ v)
        v_new = np.sum(pi.probs * q, axis=1)
        delta = np.max(np.abs(v_new - v))
        v = v_new
        if delta < tol:
            q = r_sa + mdp.gamma * (mdp.P @ v)
            return SoftValues(v, q, alpha, sweep)
    raise IterationLimitError(f"soft policy evaluation did not converge in {max_sweeps} sweeps")


def standard_policy_evaluation(mdp: TabularMdp, pi) -> tuple[np.ndarray, np.ndarray]:
    """Unregularised ``(v, q)`` by a direct linear solve."""
    pi = _as_policy(pi)
    P_pi = np.einsum("sa,sat->st", pi.probs, mdp.P)
    r_pi = np.sum(pi.probs * mdp.expected_reward, axis=1)
    v = np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * P_pi, r_pi)
    q = mdp.expected_reward + mdp.gamma * (mdp.P @ v)
    return v, q


def soft_objective(mdp: TabularMdp, pi, alpha: float) -> float:
    """``J = sum_s p0(s) v(s)``."""
    return float(mdp.p0 @ soft_policy_evaluation(mdp, pi, alpha).v)


def discounted_occupancy(mdp: TabularMdp, pi) -> np.ndarray:
    """``d(s) = sum_k gamma^k Pr(s0 -> s, k)``, unnormalised (sums to 1/(1-gamma))."""
    pi = _as_policy(pi)
    P_pi = np.einsum("sa,sat->st", pi.probs, mdp.P)
    return np.linalg.solve((np.eye(mdp.n_states) - mdp.gamma * P_pi).T, mdp.p0)


def _softmax_jacobian_contract(probs: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``out[s, b] = sum_a w[s, a] d pi(a|s) / d theta[s, b]``."""
    return probs * (w - np.sum(probs * w, axis=1, keepdims=True))


def spgt_gradient(mdp: TabularMdp, logits, alpha: float, form: str = "logpi") -> np.ndarray:
    """Exact soft policy gradient w.r.t. the logit table.

    ``form="logpi"`` folds the entropy into the weight,
    ``sum_s d(s) sum_a [q - alpha log pi] grad pi``;
    ``form="entropy"`` keeps it separate,
    ``sum_s d(s) [sum_a q grad pi + alpha grad H]``.
    """
    pi = TabularPolicy.from_logits(logits)
    sv = soft_policy_evaluation(mdp, pi, alpha)
    d = discounted_occupancy(mdp, pi)
    logp = pi.log_probs
    if form == "logpi":
        per_state = _softmax_jacobian_contract(pi.probs, sv.q - alpha * logp)
    elif form == "entropy":
        # grad H(s) = -sum_a (log pi + 1) grad pi
        grad_h = _softmax_jacobian_contract(pi.probs, -(logp + 1.0))
        per_state = _softmax_jacobian_contract(pi.probs, sv.q) + alpha * grad_h
    else:
        raise ValueError(f"unknown form {form!r}")
    return d[:, None] * per_state


def fd_soft_gradient(mdp: TabularMdp, logits, alpha: float, h: float = 1e-3) -> np.ndarray:
    """Five-point central differences of :func:`soft_objective` over the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    grad = np.zeros_like(logits)
    for idx in np.ndindex(logits.shape):
        vals = []
        for k in (2, 1, -1, -2):
            th = logits.copy()
            th[idx] += k * h
            vals.append(soft_objective(mdp, TabularPolicy.from_logits(th), alpha))
        grad[idx] = (-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * h)
    return grad


def exact_soft_gradient(mdp: TabularMdp, logits, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """``(finite_difference_gradient, spgt_gradient)`` for the same logits."""
    return fd_soft_gradient(mdp, logits, alpha), spgt_gradient(mdp, logits, alpha)


@dataclass
class EquivalenceReport:
    exact: np.ndarray
    mean_logpi: np.ndarray
    se_logpi: np.ndarray
    mean_entropy: np.ndarray
    se_entropy: np.ndarray
    n_samples: int

    def _within(self, a, b, se, k):
        return bool(np.all(np.abs(a - b) <= k * se + 1e-12))

    def forms_agree(self, k: float = 3.0) -> bool:
        se = np.sqrt(self.se_logpi ** 2 + self.se_entropy ** 2)
        return self._within(self.mean_logpi, self.mean_entropy, se, k)

    def matches_exact(self, k: float = 3.0) -> bool:
        return (self._within(self.mean_logpi, self.exact, self.se_logpi, k)
                and self._within(self.mean_entropy, self.exact, self.se_entropy, k))


def sample_occupancy_states(mdp: TabularMdp, pi, n: int, rng: np.random.Generator) -> np.ndarray:
    """States drawn from the normalised discounted occupancy by simulation.

    Each sample starts at ``s0 ~ p0`` and keeps stepping under ``pi`` with
    probability ``gamma`` per step.
    """
    pi = _as_policy(pi)
    P_pi = np.einsum("sa,sat->st", pi.probs, mdp.P)
    cdf = np.cumsum(P_pi, axis=1)
    s = np.searchsorted(np.cumsum(mdp.p0), rng.random(n), side="right")
    s = np.minimum(s, mdp.n_states - 1)
    alive = np.ones(n, dtype=bool)
    while alive.any():
        alive &= rng.random(n) < mdp.gamma
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        u = rng.random(idx.size)
        nxt = (u[:, None] >= cdf[s[idx]]).sum(axis=1)
        s[idx] = np.minimum(nxt, mdp.n_states - 1)
    return s


def scheme_equivalence_check(mdp: TabularMdp, logits, alpha: float, n_samples: int,
                             rng: np.random.Generator, n_batches: int = 100) -> EquivalenceReport:
    """Monte-Carlo versions of both gradient forms versus the exact gradient.

    States come from simulated discounted trajectories, actions from ``pi``.
    Per-sample estimators (scaled by ``1/(1-gamma)``):

    * log-pi form: ``(q(s,a) - alpha log pi(a|s)) grad log pi(a|s)``
    * entropy form: ``q(s,a) grad log pi(a|s) + alpha grad H(s)``

    Standard errors come from ``n_batches`` batch means.
    """
    logits = np.asarray(logits, dtype=np.float64)
    pi = TabularPolicy.from_logits(logits)
    sv = soft_policy_evaluation(mdp, pi, alpha)
    logp = pi.log_probs
    scale = 1.0 / (1.0 - mdp.gamma)
    grad_h = _softmax_jacobian_contract(pi.probs, -(logp + 1.0))

    states = sample_occupancy_states(mdp, pi, n_samples, rng)
    cdf = np.cumsum(pi.probs, axis=1)
    acts = np.minimum((rng.random(n_samples)[:, None] >= cdf[states]).sum(axis=1), mdp.n_actions - 1)

    # grad_theta[s] log pi(a|s) = e_a - pi(.|s)
    score = -pi.probs[states]
    score[np.arange(n_samples), acts] += 1.0
    w1 = sv.q[states, acts] - alpha * logp[states, acts]
    w2 = sv.q[states, acts]
    est1 = scale * w1[:, None] * score
    est2 = scale * (w2[:, None] * score + alpha * grad_h[states])

    n_s, n_a = logits.shape

    def batch_stats(est):
        full = np.zeros((n_samples, n_s * n_a))
        cols = states[:, None] * n_a + np.arange(n_a)[None, :]
        np.put_along_axis(full, cols, est, axis=1)
        usable = (n_samples // n_batches) * n_batches
        means = full[:usable].reshape(n_batches, -1, n_s * n_a).mean(axis=1)
        m = full.mean(axis=0)
        se = means.std(axis=0, ddof=1) / np.sqrt(n_batches)
        return m.reshape(n_s, n_a), se.reshape(n_s, n_a)

    m1, se1 = batch_stats(est1)
    m2, se2 = batch_stats(est2)
    exact = spgt_gradient(mdp, logits, alpha)
    return EquivalenceReport(exact, m1, se1, m2, se2, n_samples)


def soft_objective_batch(mdp: TabularMdp, probs: np.ndarray, alpha: float,
                         tol: float = 1e-12, max_sweeps: int = 100_000) -> np.ndarray:
    """:func:`soft_objective` for a stack of policies ``probs[k, s, a]``."""
    r_sa = mdp.expected_reward[None] + alpha * entropy(probs)[..., None]
    v = np.zeros(probs.shape[:2])
    for _ in range(max_sweeps):
        q = r_sa + mdp.gamma * np.einsum("sat,kt->ksa", mdp.P, v)
        v_new = np.sum(probs * q, axis=2)
        delta = np.max(np.abs(v_new - v))
        v = v_new
        if delta < tol:
            return v @ mdp.p0
    raise IterationLimitError("batched soft evaluation did not converge")


def exhaustive_soft_optimum(mdp: TabularMdp, alpha: float,
                            grid=np.linspace(-16.0, 16.0, 65)) -> tuple[float, np.ndarray]:
    """Best soft objective over a product grid of per-state logits.

    Only two-action MDPs are supported (one free logit per state). The
    default grid (step 0.5) is wide enough for temperatures down to about 0.1
    on unit-scale rewards; smaller temperatures push the optimum outward.
    Returns ``(J_best, logits_best)``.
    """
    if mdp.n_actions != 2:
        raise ValueError("exhaustive search is implemented for 2-action MDPs")
    grid = np.asarray(grid, dtype=np.float64)
    mesh = np.stack(np.meshgrid(*([grid] * mdp.n_states), indexing="ij"), axis=-1)
    diffs = mesh.reshape(-1, mdp.n_states)
    logits = np.stack([np.zeros_like(diffs), diffs], axis=-1)
    J = soft_objective_batch(mdp, softmax(logits), alpha)
    k = int(np.argmax(J))
    return float(J[k]), logits[k]
