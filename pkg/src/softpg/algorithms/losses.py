"""Policy and value objectives with their analytic gradients.

Policy objectives are written as quantities to *maximise* and return the
ascent gradient; callers negate before handing them to the descent-only
optimizer. Value losses are minimised directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..estimators import normalize


@dataclass
class PolicyBatch:
    obs: np.ndarray
    actions: np.ndarray
    logp_old: np.ndarray
    adv: np.ndarray  # entropy-augmented advantage estimate
    returns: np.ndarray

    def __len__(self) -> int:
        return len(self.adv)

    def subset(self, idx) -> "PolicyBatch":
        return PolicyBatch(self.obs[idx], self.actions[idx], self.logp_old[idx],
                           self.adv[idx], self.returns[idx])


@dataclass
class PolicyLossResult:
    objective: float
    grad: np.ndarray  # ascent direction
    clip_fraction: float
    n_skipped: int = 0


def clip_bound(clip: float, adv: np.ndarray) -> np.ndarray:
    """``(1 + clip) A`` where ``A > 0``, else ``(1 - clip) A``."""
    return np.where(adv > 0, (1.0 + clip) * adv, (1.0 - clip) * adv)


def clipped_policy_objective(head, batch: PolicyBatch, alpha: float, clip: float,
                             scheme: int, normalize_adv: bool = False) -> PolicyLossResult:
    """Mean clipped surrogate for either loss scheme.

    scheme 1: ``min(ratio A', g(clip, A'))`` with ``A' = A - alpha log pi_old(a|s)``
    scheme 2: ``min(ratio A, g(clip, A)) + alpha H(pi(.|s))`` with the entropy
    evaluated under the current parameters and left outside the clip.

    Samples whose ratio is non-finite are dropped and counted in ``n_skipped``.
    """
    logp = np.asarray(head.log_prob(batch.obs, batch.actions), dtype=np.float64)
    ratio = np.exp(logp - batch.logp_old)
    ok = np.isfinite(ratio)
    n_skipped = int(np.size(ok) - np.count_nonzero(ok))
    if n_skipped:
        batch = batch.subset(ok)
        ratio, logp = ratio[ok], logp[ok]
    n = len(batch)
    if n == 0:
        return PolicyLossResult(0.0, np.zeros(head.num_params), 0.0, n_skipped)
    if scheme == 1:
        adv = batch.adv - alpha * batch.logp_old
    elif scheme == 2:
        adv = batch.adv
    else:
        raise ValueError(f"unknown loss scheme {scheme!r}")
    if normalize_adv:
        adv = normalize(adv)
    unclipped = ratio * adv
    bound = clip_bound(clip, adv)
    surr = np.minimum(unclipped, bound)
    flows = unclipped <= bound
    dlogp = np.where(flows, unclipped, 0.0) / n
    if scheme == 2:
        ent = np.asarray(head.entropy(batch.obs), dtype=np.float64)
        per_sample = surr + alpha * ent
        dent = np.full(n, alpha / n)
    else:
        per_sample = surr
        dent = np.zeros(n)
    grad = head.grad_logp_entropy(batch.obs, batch.actions, dlogp, dent)
    clip_frac = float(np.mean(np.abs(ratio - 1.0) > clip))
    return PolicyLossResult(float(np.mean(per_sample)), grad, clip_frac, n_skipped)


def sppo_policy_loss_scheme1(head, batch, alpha, clip, normalize_adv=False) -> PolicyLossResult:
    return clipped_policy_objective(head, batch, alpha, clip, 1, normalize_adv)


def sppo_policy_loss_scheme2(head, batch, alpha, clip, normalize_adv=False) -> PolicyLossResult:
    return clipped_policy_objective(head, batch, alpha, clip, 2, normalize_adv)


def ppo_policy_loss(head, batch, clip, normalize_adv=False) -> PolicyLossResult:
    """Standard clipped surrogate; the zero-temperature case of both schemes."""
    return clipped_policy_objective(head, batch, 0.0, clip, 2, normalize_adv)


def value_loss(vnet, obs, returns) -> tuple[float, np.ndarray]:
    """Mean of ``(V(s_t) - R_t)^2`` and its gradient."""
    out, inputs = vnet.forward_cached(obs)
    err = out[:, 0] - np.asarray(returns, dtype=np.float64)
    n = err.size
    upstream = (2.0 / n) * err[:, None]
    grad, _ = vnet.backward_cached(inputs, upstream)
    return float(np.mean(err * err)), grad


def spg_update(head, batch: PolicyBatch, alpha: float, normalize_adv: bool = False):
    """Soft REINFORCE surrogate ``mean[log pi(a|s) * (A - alpha log pi_old(a|s))]``.

    The weight is held fixed, so at ``pi = pi_old`` the returned ascent
    gradient is the sample form ``grad log pi (A - alpha log pi)``.
    Returns ``(surrogate_value, gradient)``.
    """
    weight = batch.adv - alpha * batch.logp_old
    if normalize_adv:
        weight = normalize(weight)
    n = len(batch)
    logp = np.asarray(head.log_prob(batch.obs, batch.actions), dtype=np.float64)
    grad = head.grad_logp_entropy(batch.obs, batch.actions, weight / n, np.zeros(n))
    return float(np.mean(logp * weight)), grad


@dataclass
class AlphaState:
    log_alpha: float
    lr: float = 1e-3

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)


def tune_alpha(state: AlphaState, entropy_estimate: float, target_entropy: float) -> AlphaState:
    """One gradient step on ``log alpha`` for ``-log alpha (log pi + target)``.

    The gradient reduces to ``entropy_estimate - target_entropy``: too much
    entropy lowers the temperature, too little raises it.
    """
    state.log_alpha -= state.lr * (float(entropy_estimate) - float(target_entropy))
    return state
