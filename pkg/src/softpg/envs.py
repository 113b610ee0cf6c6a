"""Environments: pendulum swing-up, cart-pole, and explicit tabular MDPs.

Every environment exposes ``reset(rng) -> obs`` and
``step(action, rng) -> (obs, reward, done)``. ``done`` marks a true terminal
state; hitting ``max_steps`` is a truncation and is reported through
``env.truncated`` so that callers can bootstrap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import UsageError


def angle_normalize(x: float) -> float:
    """Wrap an angle to ``(-pi, pi]``."""
    y = ((x + math.pi) % (2.0 * math.pi)) - math.pi
    return math.pi if y == -math.pi else y


class _Episodic:
    max_steps: int

    def _begin(self) -> None:
        self.elapsed = 0
        self.terminated = False

    def _advance(self, done: bool) -> None:
        self.elapsed += 1
        self.terminated = bool(done)

    @property
    def truncated(self) -> bool:
        return not self.terminated and self.elapsed >= self.max_steps

    @property
    def needs_reset(self) -> bool:
        return getattr(self, "elapsed", None) is None or self.terminated or self.truncated

    def _guard(self) -> None:
        if self.needs_reset:
            raise UsageError("step() called on an episode that has ended; call reset()")


class Pendulum(_Episodic):
    """Torque-limited pendulum swing-up, observation ``(cos th, sin th, thdot)``.

    ``th = 0`` is upright. Reward is
    ``-(angle_normalize(th)^2 + 0.1 thdot^2 + 0.001 u^2)`` evaluated before the
    state update.
    """

    discrete = False
    obs_dim = 3
    act_dim = 1
    max_speed = 8.0
    max_torque = 2.0
    dt = 0.05
    g = 10.0
    m = 1.0
    l = 1.0

    def __init__(self, max_steps: int = 200):
        self.max_steps = max_steps
        self.low = np.array([-self.max_torque])
        self.high = np.array([self.max_torque])
        self.state = np.zeros(2)
        self.elapsed = None

    def _obs(self) -> np.ndarray:
        th, thdot = self.state
        return np.array([math.cos(th), math.sin(th), thdot])

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.state = np.array([rng.uniform(-math.pi, math.pi), rng.uniform(-1.0, 1.0)])
        self._begin()
        return self._obs()

    def set_state(self, th: float, thdot: float) -> np.ndarray:
        self.state = np.array([th, thdot], dtype=np.float64)
        self._begin()
        return self._obs()

    def step(self, action, rng: np.random.Generator | None = None):
        self._guard()
        th, thdot = self.state
        u = float(np.clip(np.asarray(action, dtype=np.float64).reshape(-1)[0],
                          -self.max_torque, self.max_torque))
        cost = angle_normalize(th) ** 2 + 0.1 * thdot ** 2 + 0.001 * u ** 2
        new_thdot = thdot + (-3.0 * self.g / (2.0 * self.l) * math.sin(th + math.pi)
                             + 3.0 / (self.m * self.l ** 2) * u) * self.dt
        new_th = th + new_thdot * self.dt
        new_thdot = min(max(new_thdot, -self.max_speed), self.max_speed)
        self.state = np.array([new_th, new_thdot])
        self._advance(False)
        return self._obs(), -cost, False


class CartPole(_Episodic):
    """Pole balancing on a cart; two actions (push left / right), +1 per step."""

    discrete = True
    obs_dim = 4
    n_actions = 2
    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    length = 0.5
    force_mag = 10.0
    tau = 0.02
    theta_threshold = 12 * 2 * math.pi / 360
    x_threshold = 2.4

    def __init__(self, max_steps: int = 500):
        self.max_steps = max_steps
        self.state = np.zeros(4)
        self.elapsed = None

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.state = rng.uniform(-0.05, 0.05, size=4)
        self._begin()
        return self.state.copy()

    def step(self, action, rng: np.random.Generator | None = None):
        self._guard()
        x, x_dot, theta, theta_dot = self.state
        force = self.force_mag if int(action) == 1 else -self.force_mag
        total_mass = self.masspole + self.masscart
        polemass_length = self.masspole * self.length
        costh, sinth = math.cos(theta), math.sin(theta)
        temp = (force + polemass_length * theta_dot ** 2 * sinth) / total_mass
        thetaacc = (self.gravity * sinth - costh * temp) / (
            self.length * (4.0 / 3.0 - self.masspole * costh ** 2 / total_mass))
        xacc = temp - polemass_length * thetaacc * costh / total_mass
        x = x + self.tau * x_dot
        x_dot = x_dot + self.tau * xacc
        theta = theta + self.tau * theta_dot
        theta_dot = theta_dot + self.tau * thetaacc
        self.state = np.array([x, x_dot, theta, theta_dot])
        done = abs(x) > self.x_threshold or abs(theta) > self.theta_threshold
        self._advance(done)
        return self.state.copy(), 1.0, bool(done)


@dataclass
class TabularMdp:
    """Finite MDP with ``P[s, a, s']``, ``R[s, a, s']``, discount and start distribution."""

    P: np.ndarray
    R: np.ndarray
    gamma: float
    p0: np.ndarray

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64)
        self.R = np.asarray(self.R, dtype=np.float64)
        self.p0 = np.asarray(self.p0, dtype=np.float64)
        n_s, n_a, n_s2 = self.P.shape
        if n_s2 != n_s or self.R.shape != self.P.shape or self.p0.shape != (n_s,):
            raise ValueError("inconsistent tabular MDP shapes")
        if np.any(self.P < 0) or np.max(np.abs(self.P.sum(axis=2) - 1.0)) > 1e-12:
            raise ValueError("each P(.|s,a) must be a probability vector")
        if not np.all(np.isfinite(self.R)):
            raise ValueError("rewards must be finite")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if abs(self.p0.sum() - 1.0) > 1e-12 or np.any(self.p0 < 0):
            raise ValueError("p0 must be a probability vector")

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @property
    def n_actions(self) -> int:
        return self.P.shape[1]

    @property
    def expected_reward(self) -> np.ndarray:
        """``r(s, a) = sum_s' P(s'|s,a) R(s,a,s')``."""
        return np.einsum("ijk,ijk->ij", self.P, self.R)


def make_chain(n_states: int, slip_prob: float, reward_spec, gamma: float) -> TabularMdp:
    """Left/right chain. Action 0 moves left, 1 moves right; with ``slip_prob``
    the opposite move happens. Moves off either end stay put.

    ``reward_spec`` gives the reward for arriving in each state, either as a
    length-``n_states`` sequence or a ``{state: reward}`` mapping.
    """
    if n_states < 2:
        raise ValueError("a chain needs at least 2 states")
    if not 0.0 <= slip_prob < 1.0:
        raise ValueError("slip_prob must lie in [0, 1)")
    arrive = np.zeros(n_states)
    if isinstance(reward_spec, dict):
        for s, r in reward_spec.items():
            arrive[int(s)] = float(r)
    else:
        arrive[...] = np.asarray(reward_spec, dtype=np.float64)
    P = np.zeros((n_states, 2, n_states))
    for s in range(n_states):
        left, right = max(s - 1, 0), min(s + 1, n_states - 1)
        P[s, 0, left] += 1.0 - slip_prob
        P[s, 0, right] += slip_prob
        P[s, 1, right] += 1.0 - slip_prob
        P[s, 1, left] += slip_prob
    R = np.broadcast_to(arrive, P.shape).copy()
    p0 = np.zeros(n_states)
    p0[0] = 1.0
    return TabularMdp(P, R, gamma, p0)


def load_mdp(path: str | Path) -> TabularMdp:
    """Parse the plain-text MDP format.

    First line ``n_states n_actions gamma``; then one ``s a s' prob reward``
    line per transition. ``#`` starts a comment. The start distribution is a
    point mass on state 0.
    """
    return parse_mdp(Path(path).read_text())


def parse_mdp(text: str) -> TabularMdp:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty MDP spec")
    head = lines[0].split()
    if len(head) != 3:
        raise ValueError("header must be '|S| |A| gamma'")
    n_s, n_a, gamma = int(head[0]), int(head[1]), float(head[2])
    P = np.zeros((n_s, n_a, n_s))
    R = np.zeros((n_s, n_a, n_s))
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 5:
            raise ValueError(f"bad transition line: {ln!r}")
        s, a, s2 = (int(p) for p in parts[:3])
        P[s, a, s2] += float(parts[3])
        R[s, a, s2] = float(parts[4])
    mass = P.sum(axis=2)
    bad = np.argwhere(np.abs(mass - 1.0) > 1e-12)
    if bad.size:
        s, a = bad[0]
        raise ValueError(f"P(.|s={s}, a={a}) sums to {mass[s, a]!r}, not 1")
    p0 = np.zeros(n_s)
    p0[0] = 1.0
    return TabularMdp(P, R, gamma, p0)


def format_mdp(mdp: TabularMdp) -> str:
    out = [f"{mdp.n_states} {mdp.n_actions} {float(mdp.gamma)!r}"]
    for s, a, s2 in np.argwhere(mdp.P > 0):
        out.append(f"{s} {a} {s2} {float(mdp.P[s, a, s2])!r} {float(mdp.R[s, a, s2])!r}")
    return "\n".join(out) + "\n"


class TabularEnv(_Episodic):
    """Sampling wrapper around a :class:`TabularMdp`; observations are one-hot.

    The MDP is continuing, so episodes only end by truncation at ``max_steps``.
    """

    discrete = True

    def __init__(self, mdp: TabularMdp, max_steps: int = 100):
        self.mdp = mdp
        self.max_steps = max_steps
        self.obs_dim = mdp.n_states
        self.n_actions = mdp.n_actions
        self.s = 0
        self.elapsed = None

    def _obs(self) -> np.ndarray:
        o = np.zeros(self.mdp.n_states)
        o[self.s] = 1.0
        return o

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.s = int(rng.choice(self.mdp.n_states, p=self.mdp.p0))
        self._begin()
        return self._obs()

    def step(self, action, rng: np.random.Generator):
        self._guard()
        a = int(action)
        s2 = int(rng.choice(self.mdp.n_states, p=self.mdp.P[self.s, a]))
        r = float(self.mdp.R[self.s, a, s2])
        self.s = s2
        self._advance(False)
        return self._obs(), r, False


def chain3(slip_prob: float = 0.1, gamma: float = 0.9) -> TabularMdp:
    """The 3-state chain used by the tabular control experiments."""
    return make_chain(3, slip_prob, {2: 1.0}, gamma)


def make_env(name: str, **kwargs):
    if name == "pendulum":
        return Pendulum(**kwargs)
    if name == "cartpole":
        return CartPole(**kwargs)
    if name == "chain":
        return TabularEnv(chain3(), **kwargs)
    if name.startswith("mdp:"):
        return TabularEnv(load_mdp(name[4:]), **kwargs)
    raise ValueError(f"unknown environment {name!r}")


# -- trajectories -------------------------------------------------------------


@dataclass
class Transition:
    state: np.ndarray
    action: object
    r_ext: float
    next_state: np.ndarray
    done: bool
    log_prob_behavior: float


@dataclass
class Trajectory:
    """Contiguous segment of one episode collected by a single policy.

    ``terminated`` means the last transition reached a terminal state;
    otherwise ``bootstrap_value`` (set by the caller) stands in for the value
    of ``last_obs``.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    log_probs: np.ndarray
    last_obs: np.ndarray
    terminated: bool
    truncated: bool
    bootstrap_value: float = 0.0
    episode_returns: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def dones(self) -> np.ndarray:
        d = np.zeros(len(self), dtype=bool)
        if self.terminated and len(self):
            d[-1] = True
        return d

    @property
    def next_states(self) -> np.ndarray:
        return np.concatenate([self.states[1:], self.last_obs[None, :]], axis=0)

    @property
    def episode_complete(self) -> bool:
        return self.terminated or self.truncated

    def transitions(self) -> Iterator[Transition]:
        nxt, dones = self.next_states, self.dones
        for i in range(len(self)):
            yield Transition(self.states[i], self.actions[i], float(self.rewards[i]),
                             nxt[i], bool(dones[i]), float(self.log_probs[i]))


def rollout(env, policy, horizon: int, rng: np.random.Generator, obs=None,
            deterministic: bool = False,
            policy_rng: np.random.Generator | None = None) -> Trajectory:
    """Run ``policy`` for at most ``horizon`` steps.

    Continues from ``obs`` (the env's current state) when given, otherwise
    resets. Stops early when the episode ends. The bootstrap value is left at
    zero for the caller to fill. Action noise comes from ``policy_rng`` when
    given, else from ``rng``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    policy_rng = rng if policy_rng is None else policy_rng
    if obs is None or env.needs_reset:
        obs = env.reset(rng)
    states, actions, rewards, logps = [], [], [], []
    for _ in range(horizon):
        if deterministic:
            a, lp = policy.mode(obs), 0.0
        else:
            a, lp = policy.sample(obs, policy_rng)
        nxt, r, done = env.step(a, rng)
        states.append(obs)
        actions.append(a)
        rewards.append(r)
        logps.append(lp)
        obs = nxt
        if done or env.truncated:
            break
    return Trajectory(
        states=np.asarray(states, dtype=np.float64),
        actions=np.asarray(actions),
        rewards=np.asarray(rewards, dtype=np.float64),
        log_probs=np.asarray(logps, dtype=np.float64),
        last_obs=np.asarray(obs, dtype=np.float64),
        terminated=bool(env.terminated),
        truncated=bool(env.truncated),
    )
