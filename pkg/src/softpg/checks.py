"""Finite-difference verification of every differentiable loss in the package."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .algorithms.losses import PolicyBatch, clipped_policy_objective, spg_update, value_loss
from .algorithms.sddpg import q_loss, sac1_policy_loss_gradient, sddpg_policy_gradient
from .diffnet import Mlp, grad_check
from .policies import CategoricalHead, GaussianHead

TOLERANCE = 1e-5
OBS_DIM, ACT_DIM, HIDDEN, BATCH = 3, 2, (6, 5), 12


@dataclass
class CheckResult:
    name: str
    max_error: float
    points: int

    @property
    def passed(self) -> bool:
        return self.max_error < TOLERANCE


def _gaussian(rng, scheme, squash=False):
    head = GaussianHead(OBS_DIM, ACT_DIM, HIDDEN, "tanh", scheme, rng, squash=squash,
                        low=-2.0, high=2.0)
    # move every parameter (including the zero-initialised local head) off its init
    head.params[...] += 0.3 * rng.standard_normal(head.num_params)
    return head


def _policy_batch(rng, head, n=BATCH):
    obs = rng.standard_normal((n, OBS_DIM))
    if isinstance(head, CategoricalHead):
        acts = rng.integers(0, head.n_actions, n)
    else:
        acts = rng.standard_normal((n, ACT_DIM))
    logp = head.log_prob(obs, acts) + 0.3 * rng.standard_normal(n)
    return PolicyBatch(obs, acts, logp, rng.standard_normal(n), rng.standard_normal(n))


def _clipped(scheme: int, categorical: bool):
    def make(rng, i):
        head = (CategoricalHead(OBS_DIM, 4, HIDDEN, "tanh", rng) if categorical
                else _gaussian(rng, 1 + i % 4))
        batch = _policy_batch(rng, head)
        alpha = float(rng.uniform(0.0, 1.0))

        def f():
            r = clipped_policy_objective(head, batch, alpha, 0.2, scheme)
            return r.objective, r.grad
        return head, f
    return make


def _spg(rng, i):
    head = _gaussian(rng, 1 + i % 4)
    batch = _policy_batch(rng, head)
    return head, lambda: spg_update(head, batch, 0.5)


def _value(rng, i):
    net = Mlp([OBS_DIM, *HIDDEN, 1], "tanh", rng)
    obs, ret = rng.standard_normal((BATCH, OBS_DIM)), rng.standard_normal(BATCH)
    return net, lambda: value_loss(net, obs, ret)


def _q_nets(rng):
    q1 = Mlp([OBS_DIM + ACT_DIM, *HIDDEN, 1], "tanh", rng)
    q2 = Mlp([OBS_DIM + ACT_DIM, *HIDDEN, 1], "tanh", rng)
    return q1, q2


def _sddpg(rng, i):
    head = _gaussian(rng, 1 + i % 4, squash=True)
    q1, q2 = _q_nets(rng)
    obs, eps = rng.standard_normal((BATCH, OBS_DIM)), rng.standard_normal((BATCH, ACT_DIM))
    return head, lambda: sddpg_policy_gradient(head, q1, q2, obs, eps, 0.3)


def _sac1(rng, i):
    head = _gaussian(rng, 1 + i % 4, squash=True)
    q1, q2 = _q_nets(rng)
    obs, eps = rng.standard_normal((BATCH, OBS_DIM)), rng.standard_normal((BATCH, ACT_DIM))
    return head, lambda: sac1_policy_loss_gradient(head, q1, q2, obs, eps, 0.3)


def _q_regression(rng, i):
    q1, _ = _q_nets(rng)
    obs, act = rng.standard_normal((BATCH, OBS_DIM)), rng.standard_normal((BATCH, ACT_DIM))
    y = rng.standard_normal(BATCH)
    return q1, lambda: q_loss(q1, obs, act, y)


def _log_prob_entropy(rng, i):
    head = _gaussian(rng, 1 + i % 4)
    batch = _policy_batch(rng, head)
    w, c = rng.standard_normal(BATCH), rng.standard_normal(BATCH)

    def f():
        val = float(np.sum(w * head.log_prob(batch.obs, batch.actions))
                    + np.sum(c * head.entropy(batch.obs)))
        return val, head.grad_logp_entropy(batch.obs, batch.actions, w, c)
    return head, f


CHECKS: dict[str, Callable] = {
    "value_loss": _value,
    "sppo_scheme1_gaussian": _clipped(1, False),
    "sppo_scheme2_gaussian": _clipped(2, False),
    "sppo_scheme1_categorical": _clipped(1, True),
    "sppo_scheme2_categorical": _clipped(2, True),
    "spg_surrogate": _spg,
    "sddpg_policy_objective": _sddpg,
    "sac1_policy_loss": _sac1,
    "soft_q_regression": _q_regression,
    "log_prob_and_entropy": _log_prob_entropy,
}


def run_gradcheck(n_points: int = 100, seed: int = 0, verbose: bool = False) -> list[CheckResult]:
    """Max FD error of each loss over ``n_points`` random parameter points."""
    results = []
    for name, make in CHECKS.items():
        rng = np.random.default_rng([seed, len(name)])
        worst = 0.0
        t0 = time.perf_counter()
        for i in range(n_points):
            target, f = make(rng, i)
            worst = max(worst, grad_check(target, f))
        res = CheckResult(name, worst, n_points)
        results.append(res)
        if verbose:
            status = "PASS" if res.passed else "FAIL"
            print(f"{status} {name:28s} max rel err {worst:.2e} "
                  f"({time.perf_counter() - t0:.1f}s)")
    return results
