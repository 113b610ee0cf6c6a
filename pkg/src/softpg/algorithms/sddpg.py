"""Reparametrised soft policy update (SDDPG, identical to SAC1's policy step).

Twin Q networks regress to the soft target

    y = r + gamma (1 - done) [min(Q1', Q2')(s', a') - alpha log pi(a'|s')]

and the policy ascends ``min(Q1, Q2)(s, a~) - alpha log pi(a~|s)`` with
``a~ = tanh-squash(mu(s) + sigma(s) eps)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..diffnet import AdamState, Mlp, adam_step
from ..policies import GaussianHead
from ..seeding import substream
from .config import RunConfig
from .losses import AlphaState, tune_alpha
from .onpolicy import build_env, build_policy, default_target_entropy


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform sampling."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_dim))
        self.act = np.zeros((capacity, act_dim))
        self.rew = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity)
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, act, rew, next_obs, done) -> None:
        i = self.cursor
        self.obs[i], self.act[i], self.rew[i] = obs, act, rew
        self.next_obs[i], self.done[i] = next_obs, float(done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator) -> dict:
        idx = rng.integers(0, self.size, size=n)
        return {"obs": self.obs[idx], "act": self.act[idx], "rew": self.rew[idx],
                "next_obs": self.next_obs[idx], "done": self.done[idx]}


def min_q_with_action_grad(q1: Mlp, q2: Mlp, obs, act, upstream: float):
    """``min(Q1, Q2)(s, a)`` and the gradient of ``upstream * sum(min Q)`` w.r.t. ``a``.

    Ties go to ``Q1``.
    """
    x = np.concatenate([obs, act], axis=1)
    v1, in1 = q1.forward_cached(x)
    v2, in2 = q2.forward_cached(x)
    pick1 = v1 <= v2
    qmin = np.where(pick1, v1, v2)[:, 0]
    _, dx1 = q1.backward_cached(in1, np.where(pick1, upstream, 0.0), input_grad=True)
    _, dx2 = q2.backward_cached(in2, np.where(pick1, 0.0, upstream), input_grad=True)
    obs_dim = obs.shape[1]
    return qmin, dx1[:, obs_dim:] + dx2[:, obs_dim:]


def sddpg_policy_gradient(head: GaussianHead, q1: Mlp, q2: Mlp, obs, eps, alpha: float):
    """Ascent gradient of ``mean[min Q(s, a~) - alpha log pi(a~|s)]`` through ``a~(eps)``.

    Returns ``(objective, gradient)``.
    """
    n = obs.shape[0]
    act, logp, record = head.rsample_full(obs, eps)
    qmin, dq_da = min_q_with_action_grad(q1, q2, obs, act, 1.0 / n)
    objective = float(np.mean(qmin - alpha * logp))
    grad = head.rsample_backward(record, dq_da, np.full(n, -alpha / n))
    return objective, grad


def sac1_policy_loss_gradient(head: GaussianHead, q1: Mlp, q2: Mlp, obs, eps, alpha: float):
    """SAC1 actor loss ``mean[alpha log pi(a~|s) - min Q(s, a~)]`` and its descent gradient."""
    n = obs.shape[0]
    act, logp, record = head.rsample_full(obs, eps)
    qmin, dloss_da = min_q_with_action_grad(q1, q2, obs, act, -1.0 / n)
    loss = float(np.mean(alpha * logp - qmin))
    grad = head.rsample_backward(record, dloss_da, np.full(n, alpha / n))
    return loss, grad


def soft_q_targets(head, q1_targ, q2_targ, batch, alpha, gamma, eps_next) -> np.ndarray:
    a2, logp2, _ = head.rsample_full(batch["next_obs"], eps_next)
    x2 = np.concatenate([batch["next_obs"], a2], axis=1)
    qt = np.minimum(q1_targ.forward(x2), q2_targ.forward(x2))[:, 0]
    return batch["rew"] + gamma * (1.0 - batch["done"]) * (qt - alpha * logp2)


def q_loss(q: Mlp, obs, act, targets) -> tuple[float, np.ndarray]:
    out, inputs = q.forward_cached(np.concatenate([obs, act], axis=1))
    err = out[:, 0] - targets
    grad, _ = q.backward_cached(inputs, (2.0 / err.size) * err[:, None])
    return float(np.mean(err * err)), grad


def polyak(target: Mlp, online: Mlp, tau: float) -> None:
    target.params[...] = (1.0 - tau) * target.params + tau * online.params


@dataclass
class SddpgAgent:
    config: RunConfig
    policy: GaussianHead
    q1: Mlp
    q2: Mlp
    q1_targ: Mlp
    q2_targ: Mlp
    opt_policy: AdamState
    opt_q1: AdamState
    opt_q2: AdamState
    alpha: AlphaState
    target_entropy: float
    buffer: ReplayBuffer

    @classmethod
    def create(cls, config: RunConfig) -> "SddpgAgent":
        env = build_env(config)
        if env.discrete:
            raise ValueError("sddpg needs a continuous-action environment")
        rng = substream(config.seed, "init")
        policy = build_policy(env, config, rng, squash=True)
        in_dim = env.obs_dim + env.act_dim
        q1 = Mlp([in_dim, *config.hidden, 1], config.activation, rng, output_gain=1.0)
        q2 = Mlp([in_dim, *config.hidden, 1], config.activation, rng, output_gain=1.0)
        target = (config.target_entropy if config.target_entropy is not None
                  else default_target_entropy(env))
        return cls(
            config=config, policy=policy, q1=q1, q2=q2, q1_targ=q1.copy(), q2_targ=q2.copy(),
            opt_policy=AdamState(policy.num_params, lr=config.lr_policy),
            opt_q1=AdamState(q1.num_params, lr=config.lr_value),
            opt_q2=AdamState(q2.num_params, lr=config.lr_value),
            alpha=AlphaState(float(np.log(max(config.alpha, 1e-8))), config.alpha_lr),
            target_entropy=target,
            buffer=ReplayBuffer(config.buffer_size, env.obs_dim, env.act_dim),
        )

    @property
    def current_alpha(self) -> float:
        return self.alpha.alpha if self.config.auto_alpha else self.config.alpha


def sddpg_update(agent: SddpgAgent, rng: np.random.Generator) -> dict | None:
    """One gradient step on both critics, the actor and (optionally) alpha.

    Returns ``None`` without touching anything while the buffer holds fewer
    than ``batch_size`` transitions.
    """
    cfg = agent.config
    if len(agent.buffer) < cfg.batch_size:
        return None
    batch = agent.buffer.sample(cfg.batch_size, rng)
    act_dim = agent.policy.act_dim
    alpha = agent.current_alpha

    y = soft_q_targets(agent.policy, agent.q1_targ, agent.q2_targ, batch, alpha, cfg.gamma,
                       rng.standard_normal((cfg.batch_size, act_dim)))
    l1, g1 = q_loss(agent.q1, batch["obs"], batch["act"], y)
    l2, g2 = q_loss(agent.q2, batch["obs"], batch["act"], y)
    adam_step(agent.q1, g1, agent.opt_q1)
    adam_step(agent.q2, g2, agent.opt_q2)

    eps = rng.standard_normal((cfg.batch_size, act_dim))
    objective, grad = sddpg_policy_gradient(agent.policy, agent.q1, agent.q2, batch["obs"],
                                            eps, alpha)
    adam_step(agent.policy, -grad, agent.opt_policy)

    if cfg.auto_alpha:
        _, logp, _ = agent.policy.rsample_full(batch["obs"], eps)
        tune_alpha(agent.alpha, float(-np.mean(logp)), agent.target_entropy)

    polyak(agent.q1_targ, agent.q1, cfg.tau)
    polyak(agent.q2_targ, agent.q2, cfg.tau)
    return {"policy_loss": -objective, "value_loss": 0.5 * (l1 + l2), "alpha": agent.current_alpha}
