from .config import ALGORITHMS, RunConfig, parse_config_text
from .losses import (AlphaState, PolicyBatch, PolicyLossResult, clipped_policy_objective,
                     ppo_policy_loss, spg_update, sppo_policy_loss_scheme1,
                     sppo_policy_loss_scheme2, tune_alpha, value_loss)
from .onpolicy import OnPolicyAgent, RolloutCollector, build_batch, sppo_train_iteration
from .sddpg import (ReplayBuffer, SddpgAgent, polyak, sac1_policy_loss_gradient,
                    sddpg_policy_gradient, sddpg_update)

__all__ = [
    "ALGORITHMS", "AlphaState", "OnPolicyAgent", "PolicyBatch", "PolicyLossResult",
    "ReplayBuffer", "RolloutCollector", "RunConfig", "SddpgAgent", "build_batch",
    "clipped_policy_objective", "parse_config_text", "polyak", "ppo_policy_loss",
    "sac1_policy_loss_gradient", "sddpg_policy_gradient", "sddpg_update", "spg_update",
    "sppo_policy_loss_scheme1", "sppo_policy_loss_scheme2", "sppo_train_iteration",
    "tune_alpha", "value_loss",
]
