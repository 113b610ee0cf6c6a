"""The reparametrised soft policy step and the SAC1 actor step coincide.

Build a squashed Gaussian policy and two critics, compute the ascent gradient
of the soft objective and the descent gradient of the SAC1 actor loss on the
same noise, and compare them bit for bit. Then train briefly on the pendulum.
"""
import numpy as np

from softpg.algorithms import RunConfig, sac1_policy_loss_gradient, sddpg_policy_gradient
from softpg.diffnet import Mlp
from softpg.harness import run_training
from softpg.policies import GaussianHead

rng = np.random.default_rng(0)
head = GaussianHead(3, 1, (32, 32), rng=rng, squash=True, low=-2.0, high=2.0)
q1, q2 = Mlp([4, 32, 32, 1], "relu", rng), Mlp([4, 32, 32, 1], "relu", rng)
obs, eps = rng.normal(size=(256, 3)), rng.normal(size=(256, 1))

objective, ascent = sddpg_policy_gradient(head, q1, q2, obs, eps, alpha=0.2)
loss, descent = sac1_policy_loss_gradient(head, q1, q2, obs, eps, alpha=0.2)
print("objective", objective, " loss", loss)
print("gradients bit-identical up to sign:", (-ascent + 0.0).tobytes() == (descent + 0.0).tobytes())

config = RunConfig(algo="sddpg", env="pendulum", hidden=(64, 64), auto_alpha=True,
                   lr_policy=1e-3, lr_value=1e-3, gamma=0.99, horizon=1000,
                   total_steps=15_000, eval_episodes=10, eval_every=5)
result = run_training(config)
for ev in result.evals:
    print(f"steps {ev['env_steps']:6d}  greedy return {ev['eval_mean']:8.1f}")
print("final temperature", result.rows[-1].alpha)
