"""On-policy training: SPPO (both loss schemes), the PPO baseline and SPG."""
from __future__ import annotations

import copy
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..diffnet import AdamState, Mlp, adam_step, clip_grad_norm
from ..envs import Trajectory, make_env, rollout
from ..errors import NumericalFailure
from ..estimators import augment_rewards, gae
from ..policies import CategoricalHead, GaussianHead
from ..seeding import substream
from .config import RunConfig
from .losses import (AlphaState, PolicyBatch, clipped_policy_objective, spg_update,
                     tune_alpha, value_loss)


def worker_count(n_envs: int) -> int:
    try:
        threads = int(os.environ.get("SOFTPG_THREADS", "1"))
    except ValueError:
        threads = 1
    return max(1, min(threads, n_envs))


def build_env(config: RunConfig):
    kwargs = {} if config.env_max_steps is None else {"max_steps": config.env_max_steps}
    return make_env(config.env, **kwargs)


def build_policy(env, config: RunConfig, rng: np.random.Generator, squash: bool = False):
    if env.discrete:
        return CategoricalHead(env.obs_dim, env.n_actions, config.hidden, config.activation, rng)
    return GaussianHead(env.obs_dim, env.act_dim, config.hidden, config.activation,
                        config.sigma_scheme, rng, squash=squash, low=env.low, high=env.high)


def default_target_entropy(env) -> float:
    if env.discrete:
        return 0.5 * float(np.log(env.n_actions))
    return -float(env.act_dim)


class RolloutCollector:
    """Steps ``num_envs`` private environments, each with its own rng streams.

    Work fans out over ``SOFTPG_THREADS`` threads; results are always merged
    in environment-index order so the batch does not depend on scheduling.
    """

    def __init__(self, config: RunConfig):
        self.envs = [build_env(config) for _ in range(config.num_envs)]
        self.env_rngs = [substream(config.seed, "env", i) for i in range(config.num_envs)]
        self.pol_rngs = [substream(config.seed, "policy", i) for i in range(config.num_envs)]
        self.obs = [None] * config.num_envs
        self.running = [0.0] * config.num_envs

    def _collect_one(self, i: int, policy, steps: int) -> tuple[list[Trajectory], list[float]]:
        env = self.envs[i]
        trajs, finished, left = [], [], steps
        while left > 0:
            tr = rollout(env, policy, left, self.env_rngs[i], obs=self.obs[i],
                         policy_rng=self.pol_rngs[i])
            left -= len(tr)
            self.running[i] += float(tr.rewards.sum())
            if tr.episode_complete:
                finished.append(self.running[i])
                tr.episode_returns.append(self.running[i])
                self.running[i] = 0.0
                self.obs[i] = None
            else:
                self.obs[i] = tr.last_obs
            trajs.append(tr)
        return trajs, finished

    def collect(self, policy, steps_per_env: int) -> tuple[list[Trajectory], list[float]]:
        n = len(self.envs)
        workers = worker_count(n)
        if workers == 1:
            results = [self._collect_one(i, policy, steps_per_env) for i in range(n)]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(lambda i: self._collect_one(i, policy, steps_per_env),
                                        range(n)))
        trajs = [t for r in results for t in r[0]]
        finished = [x for r in results for x in r[1]]
        return trajs, finished


@dataclass
class OnPolicyAgent:
    config: RunConfig
    policy: object
    value: Mlp
    opt_policy: AdamState
    opt_value: AdamState
    alpha: AlphaState
    target_entropy: float
    env_steps: int = 0
    episodes_done: int = 0
    last_return: float = float("nan")

    @classmethod
    def create(cls, config: RunConfig) -> "OnPolicyAgent":
        env = build_env(config)
        rng = substream(config.seed, "init")
        policy = build_policy(env, config, rng)
        value = Mlp([env.obs_dim, *config.hidden, 1], config.activation, rng, output_gain=1.0)
        target = (config.target_entropy if config.target_entropy is not None
                  else default_target_entropy(env))
        alpha0 = max(config.effective_alpha, 1e-8) if config.tunes_alpha else config.effective_alpha
        return cls(
            config=config,
            policy=policy,
            value=value,
            opt_policy=AdamState(policy.num_params, lr=config.lr_policy),
            opt_value=AdamState(value.num_params, lr=config.lr_value),
            alpha=AlphaState(float(np.log(alpha0)) if alpha0 > 0 else -np.inf, config.alpha_lr),
            target_entropy=target,
        )

    @property
    def current_alpha(self) -> float:
        if not self.config.tunes_alpha:
            return self.config.effective_alpha
        return self.alpha.alpha

    def snapshot(self):
        return (self.policy.params.copy(), self.value.params.copy(),
                copy.deepcopy(self.opt_policy), copy.deepcopy(self.opt_value),
                copy.deepcopy(self.alpha))

    def restore(self, snap) -> None:
        self.policy.params[...] = snap[0]
        self.value.params[...] = snap[1]
        self.opt_policy, self.opt_value, self.alpha = snap[2], snap[3], snap[4]


def build_batch(agent: OnPolicyAgent, trajs: list[Trajectory], alpha: float) -> PolicyBatch:
    """Entropy-augmented GAE advantages and value targets for every trajectory."""
    cfg = agent.config
    obs, acts, logps, advs, rets = [], [], [], [], []
    for tr in trajs:
        values = agent.value.forward(tr.states)[:, 0]
        tr.bootstrap_value = 0.0 if tr.terminated else float(agent.value.forward(tr.last_obs)[0])
        aug = augment_rewards(tr, agent.policy, alpha, values)
        adv = gae(aug, cfg.gamma, cfg.lam)
        obs.append(tr.states)
        acts.append(tr.actions)
        logps.append(tr.log_probs)
        advs.append(adv)
        rets.append(adv + values)
    return PolicyBatch(np.concatenate(obs), np.concatenate(acts), np.concatenate(logps),
                       np.concatenate(advs), np.concatenate(rets))


def _entropy_estimate(policy, obs, actions) -> float:
    if policy.has_analytic_entropy:
        return float(np.mean(policy.entropy(obs)))
    return float(-np.mean(policy.log_prob(obs, actions)))


def _finite(*xs) -> bool:
    return all(np.all(np.isfinite(x)) for x in xs)


def update_on_batch(agent: OnPolicyAgent, batch: PolicyBatch, rng: np.random.Generator) -> dict:
    """Run the configured policy/value updates on one collected batch."""
    cfg = agent.config
    n = len(batch)
    pol_losses, val_losses, clip_fracs = [], [], []

    if cfg.algo == "spg":
        surrogate, grad = spg_update(agent.policy, batch, agent.current_alpha, cfg.normalize_adv)
        if not _finite(surrogate, grad):
            raise NumericalFailure("non-finite SPG surrogate")
        adam_step(agent.policy, clip_grad_norm(-grad, cfg.max_grad_norm), agent.opt_policy)
        pol_losses.append(-surrogate)
        clip_fracs.append(0.0)

    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.minibatch):
            mb = batch.subset(perm[start:start + cfg.minibatch])
            if cfg.algo != "spg":
                alpha = agent.current_alpha
                res = clipped_policy_objective(agent.policy, mb, alpha, cfg.clip,
                                               cfg.loss_scheme, cfg.normalize_adv)
                if not _finite(res.objective, res.grad):
                    raise NumericalFailure("non-finite policy objective")
                adam_step(agent.policy, clip_grad_norm(-res.grad, cfg.max_grad_norm),
                          agent.opt_policy)
                pol_losses.append(-res.objective)
                clip_fracs.append(res.clip_fraction)
            vl, vgrad = value_loss(agent.value, mb.obs, mb.returns)
            if not _finite(vl, vgrad):
                raise NumericalFailure("non-finite value loss")
            adam_step(agent.value, clip_grad_norm(vgrad, cfg.max_grad_norm), agent.opt_value)
            val_losses.append(vl)

    # one temperature step per collected batch; per-minibatch steps drift log alpha
    # by hundreds of steps per iteration whenever the target entropy is out of reach
    if cfg.tunes_alpha:
        tune_alpha(agent.alpha, _entropy_estimate(agent.policy, batch.obs, batch.actions),
                   agent.target_entropy)
    return {
        "policy_loss": float(np.mean(pol_losses)) if pol_losses else 0.0,
        "value_loss": float(np.mean(val_losses)) if val_losses else 0.0,
        "clip_fraction": float(np.mean(clip_fracs)) if clip_fracs else 0.0,
    }


def sppo_train_iteration(agent: OnPolicyAgent, collector: RolloutCollector,
                         rng: np.random.Generator) -> dict:
    """Collect one batch and update; rolls all state back on numeric failure."""
    cfg = agent.config
    alpha = agent.current_alpha
    trajs, finished = collector.collect(agent.policy, cfg.horizon)
    batch = build_batch(agent, trajs, alpha)
    snap = agent.snapshot()
    try:
        stats = update_on_batch(agent, batch, rng)
    except (NumericalFailure, FloatingPointError):
        agent.restore(snap)
        raise
    agent.env_steps += len(batch)
    agent.episodes_done += len(finished)
    if finished:
        agent.last_return = float(np.mean(finished))
    elif agent.episodes_done == 0:
        # nothing finished yet: report the partial return so the log stays finite
        agent.last_return = float(np.mean(collector.running))
    stats.update(
        env_steps=agent.env_steps,
        mean_episode_return=agent.last_return,
        mean_entropy=_entropy_estimate(agent.policy, batch.obs, batch.actions),
        alpha=agent.current_alpha,
        batch_obs=batch.obs,
    )
    return stats
