"""Entropy-augmented rewards, rewards-to-go, n-step advantages and GAE."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import Trajectory


@dataclass
class AugmentedTrajectory:
    traj: Trajectory
    r_int: np.ndarray
    values: np.ndarray

    @property
    def r_ext(self) -> np.ndarray:
        return self.traj.rewards

    @property
    def r_total(self) -> np.ndarray:
        return self.traj.rewards + self.r_int

    @property
    def bootstrap(self) -> float:
        return 0.0 if self.traj.terminated else float(self.traj.bootstrap_value)


def intrinsic_rewards(traj: Trajectory, policy, alpha: float) -> np.ndarray:
    """``alpha * H(pi(.|s_t))`` per visited state.

    Falls back to the single-sample estimate ``-alpha * log pi(a_t|s_t)`` for
    heads without a closed-form entropy (tanh-squashed Gaussians).
    """
    if alpha == 0.0 or len(traj) == 0:
        return np.zeros(len(traj))
    if policy.has_analytic_entropy:
        return alpha * np.asarray(policy.entropy(traj.states), dtype=np.float64)
    return -alpha * traj.log_probs


def augment_rewards(traj: Trajectory, policy, alpha: float, values=None) -> AugmentedTrajectory:
    values = np.zeros(len(traj)) if values is None else np.asarray(values, dtype=np.float64)
    return AugmentedTrajectory(traj, intrinsic_rewards(traj, policy, alpha), values)


def discounted_returns(rewards: np.ndarray, bootstrap: float, gamma: float) -> np.ndarray:
    out = np.empty(len(rewards))
    acc = bootstrap
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def rewards_to_go(aug: AugmentedTrajectory, gamma: float) -> np.ndarray:
    """``R_t = sum_{k>=t} gamma^(k-t) r_k + gamma^(T-t) V(s_T) (1 - done)``."""
    return discounted_returns(aug.r_total, aug.bootstrap, gamma)


def n_step_advantage(aug: AugmentedTrajectory, gamma: float) -> np.ndarray:
    return rewards_to_go(aug, gamma) - aug.values


def gae_from_arrays(rewards, values, bootstrap: float, gamma: float, lam: float) -> np.ndarray:
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    next_values = np.append(values[1:], bootstrap)
    deltas = rewards + gamma * next_values - values
    adv = np.empty(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = deltas[t] + gamma * lam * acc
        adv[t] = acc
    return adv


def gae(aug: AugmentedTrajectory, gamma: float, lam: float) -> np.ndarray:
    """Generalised advantage estimate over the truncated window."""
    return gae_from_arrays(aug.r_total, aug.values, aug.bootstrap, gamma, lam)


def normalize(adv: np.ndarray) -> np.ndarray:
    if adv.size < 2:
        return adv - adv.mean() if adv.size else adv
    return (adv - adv.mean()) / (adv.std() + 1e-8)
