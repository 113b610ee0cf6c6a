"""Command line entry point: ``softpg {train,eval,compare,oracle,gradcheck}``."""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import harness
from .algorithms.onpolicy import build_env
from .algorithms.config import RunConfig
from .envs import load_mdp
from .errors import ConfigError
from .seeding import substream
from .soft_values import (TabularPolicy, exact_soft_gradient, scheme_equivalence_check,
                          soft_policy_evaluation)


def _train_overrides(args) -> dict:
    return {
        "algo": args.algo, "env": args.env, "alpha": args.alpha,
        "auto_alpha": "true" if args.auto_alpha else None,
        "clip": args.clip, "gamma": args.gamma, "lam": args.lam,
        "sigma_scheme": args.sigma_scheme, "loss_scheme": args.loss_scheme,
        "total_steps": args.steps, "seed": args.seed,
    }


def cmd_train(args) -> int:
    config = harness.load_config(args.config, {k: (str(v) if v is not None else None)
                                               for k, v in _train_overrides(args).items()})
    result = harness.run_training(config, args.out)
    for ev in result.evals:
        print(f"iter {ev['iteration']:5d}  steps {ev['env_steps']:8d}  "
              f"eval {ev['eval_mean']:10.3f} +- {ev['eval_std']:.3f}")
    if result.error:
        print(f"run aborted: {result.error}", file=sys.stderr)
        return 1
    return 0


def cmd_eval(args) -> int:
    policy = harness.load_policy(args.policy)
    env = build_env(RunConfig(env=args.env))
    mean, std = harness.evaluate(policy, env, args.episodes, substream(args.seed, "eval"))
    print(f"mean {mean:.4f}  std {std:.4f}  episodes {args.episodes}")
    return 0


def cmd_compare(args) -> int:
    a = harness.load_config(args.config_a)
    b = harness.load_config(args.config_b)
    report = harness.compare(a, b, args.seeds, args.out)
    print(report.summary())
    return 0


def cmd_oracle(args) -> int:
    mdp = load_mdp(args.mdp)
    logits = np.zeros((mdp.n_states, mdp.n_actions))
    pi = TabularPolicy.from_logits(logits)
    sv = soft_policy_evaluation(mdp, pi, args.alpha)
    fd, spgt = exact_soft_gradient(mdp, logits, args.alpha)
    rep = scheme_equivalence_check(mdp, logits, args.alpha, args.samples,
                                   np.random.default_rng(args.seed))
    np.set_printoptions(precision=6, suppress=True)
    print(f"policy: uniform  alpha={args.alpha}  gamma={mdp.gamma}")
    print("v =", sv.v)
    print("q =\n", sv.q)
    print("J =", float(mdp.p0 @ sv.v))
    print("exact gradient (soft policy gradient sum) =\n", spgt)
    print("finite-difference gradient =\n", fd)
    print(f"log-pi form MC mean (n={rep.n_samples}) =\n", rep.mean_logpi)
    print("entropy form MC mean =\n", rep.mean_entropy)
    print(f"forms agree within 3 SE: {rep.forms_agree()}  "
          f"both match exact within 3 SE: {rep.matches_exact()}")
    return 0


def cmd_gradcheck(args) -> int:
    from .checks import run_gradcheck

    t0 = time.perf_counter()
    results = run_gradcheck(args.points, args.seed, verbose=True)
    ok = all(r.passed for r in results)
    print(f"{'all passed' if ok else 'FAILURES'} in {time.perf_counter() - t0:.1f}s")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="softpg", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run one training job")
    t.add_argument("--config")
    t.add_argument("--algo")
    t.add_argument("--env")
    t.add_argument("--alpha", type=float)
    t.add_argument("--auto-alpha", action="store_true")
    t.add_argument("--clip", type=float)
    t.add_argument("--gamma", type=float)
    t.add_argument("--lam", type=float)
    t.add_argument("--sigma-scheme", type=int, choices=[1, 2, 3, 4])
    t.add_argument("--loss-scheme", type=int, choices=[1, 2])
    t.add_argument("--steps", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a saved policy")
    e.add_argument("--policy", required=True)
    e.add_argument("--env", default="pendulum")
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("compare", help="paired multi-seed comparison of two configs")
    c.add_argument("--config-a", required=True)
    c.add_argument("--config-b", required=True)
    c.add_argument("--seeds", type=int, default=5)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_compare)

    o = sub.add_parser("oracle", help="exact soft values and gradients for a text MDP")
    o.add_argument("--mdp", required=True)
    o.add_argument("--alpha", type=float, default=0.5)
    o.add_argument("--samples", type=int, default=100_000)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_oracle)

    g = sub.add_parser("gradcheck", help="finite-difference check of every loss")
    g.add_argument("--points", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
