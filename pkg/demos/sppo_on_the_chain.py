"""Soft PPO with a tabular policy on the 3-state chain.

The policy is a linear softmax on one-hot states, so after training we can
read it off as a probability table and score it with the exact evaluator.
"""
from pathlib import Path

import numpy as np

from softpg.envs import chain3
from softpg.harness import load_config, run_training
from softpg.soft_values import TabularPolicy, exhaustive_soft_optimum, soft_objective

config = load_config(Path(__file__).resolve().parent.parent / "configs" / "chain_sppo.txt")
mdp = chain3()
j_star, _ = exhaustive_soft_optimum(mdp, config.alpha)
print(f"soft-optimal J (grid search) = {j_star:.4f}")

eye = np.eye(3)


def report(agent, stats, it):
    if it in (1, 5, 10, 25, 50, 100, 200):
        probs = agent.policy.probs(eye)
        j = soft_objective(mdp, TabularPolicy(probs), config.alpha)
        print(f"iter {it:3d}  J={j:.4f}  gap={100 * (j_star - j) / j_star:6.2f}%  "
              f"pi(right|s)={np.round(probs[:, 1], 3)}")


result = run_training(config, callback=report)
print("greedy evaluation return:", result.final_eval)
