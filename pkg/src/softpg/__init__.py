"""Entropy-regularised policy optimisation on small numpy networks.

Soft policy gradient (SPG), soft PPO with either policy-loss scheme, the
PPO baseline, the reparametrised soft actor update (SDDPG / SAC1), and an
exact tabular oracle for soft values and soft policy gradients.
"""
from .algorithms import RunConfig
from .diffnet import AdamState, Mlp, adam_step, grad_check
from .envs import CartPole, Pendulum, TabularEnv, TabularMdp, make_chain, rollout
from .policies import CategoricalHead, GaussianHead, SigmaScheme
from .soft_values import (SoftValues, TabularPolicy, exact_soft_gradient,
                          scheme_equivalence_check, soft_objective, soft_policy_evaluation)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "CartPole", "CategoricalHead", "GaussianHead", "Mlp", "Pendulum",
    "RunConfig", "SigmaScheme", "SoftValues", "TabularEnv", "TabularMdp", "TabularPolicy",
    "adam_step", "exact_soft_gradient", "grad_check", "make_chain", "rollout",
    "scheme_equivalence_check", "soft_objective", "soft_policy_evaluation",
]
