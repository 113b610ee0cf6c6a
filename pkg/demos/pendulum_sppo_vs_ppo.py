"""Paired-seed comparison of soft PPO and PPO on the pendulum.

Both configs share every hyperparameter; PPO simply drops the entropy term.
Five seeds at 150k steps take a few minutes per algorithm on one core. Pass a
smaller step budget as the first argument for a quick look.
"""
import sys
from pathlib import Path

from softpg.harness import compare, load_config

configs = Path(__file__).resolve().parent.parent / "configs"
overrides = {"total_steps": sys.argv[1]} if len(sys.argv) > 1 else None
ppo = load_config(configs / "pendulum_ppo.txt", overrides)
sppo = load_config(configs / "pendulum_sppo.txt", overrides)

report = compare(ppo, sppo, n_seeds=5, out_dir="pendulum_comparison")
print("columns: a = PPO, b = SPPO")
print(report.summary())
print("per-seed CSVs and report.json are under pendulum_comparison/")
