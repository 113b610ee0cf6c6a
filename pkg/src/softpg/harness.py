"""Training runs, evaluation, metric logging, policy files and paired comparisons."""
from __future__ import annotations

import csv
import dataclasses
import json
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats

from .algorithms.config import RunConfig, parse_config_text
from .algorithms.onpolicy import (OnPolicyAgent, RolloutCollector, build_env,
                                  sppo_train_iteration)
from .algorithms.sddpg import SddpgAgent, sddpg_update
from .envs import rollout
from .errors import ConfigError
from .policies import CategoricalHead, GaussianHead, SigmaScheme
from .seeding import substream


@dataclass
class MetricRow:
    """One training iteration. Returns count external reward only."""

    iteration: int
    env_steps: int
    mean_episode_return: float
    mean_entropy: float
    policy_loss: float
    value_loss: float
    clip_fraction: float
    alpha: float

    @classmethod
    def fieldnames(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    def to_csv(self) -> list[str]:
        return [repr(v) if isinstance(v, float) else str(v) for v in dataclasses.astuple(self)]

    @classmethod
    def from_csv(cls, row: dict[str, str]) -> "MetricRow":
        kw = {}
        for f in dataclasses.fields(cls):
            kw[f.name] = int(row[f.name]) if f.type in ("int", int) else float(row[f.name])
        return cls(**kw)


EVAL_FIELDS = ["iteration", "env_steps", "eval_mean", "eval_std"]


def read_metrics(path: str | Path) -> list[MetricRow]:
    with open(path, newline="") as fh:
        return [MetricRow.from_csv(r) for r in csv.DictReader(fh)]


def read_evals(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{"iteration": int(r["iteration"]), "env_steps": int(r["env_steps"]),
                 "eval_mean": float(r["eval_mean"]), "eval_std": float(r["eval_std"])}
                for r in csv.DictReader(fh)]


# -- evaluation ---------------------------------------------------------------


def evaluate(policy, env, n_episodes: int, rng: np.random.Generator,
             deterministic: bool = True) -> tuple[float, float]:
    """Mean and standard deviation of the undiscounted external return.

    Actions are the deterministic mode (Gaussian mean or categorical argmax)
    unless ``deterministic=False``, in which case they are sampled from ``rng``.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    returns = []
    for _ in range(n_episodes):
        obs, total = None, 0.0
        while True:
            tr = rollout(env, policy, env.max_steps, rng, obs=obs, deterministic=deterministic)
            total += float(tr.rewards.sum())
            if tr.episode_complete:
                break
            obs = tr.last_obs
        returns.append(total)
    returns = np.asarray(returns)
    return float(returns.mean()), float(returns.std())


# -- policy files -------------------------------------------------------------

MAGIC = b"SOFTPGP\x00"
FORMAT_VERSION = 1
_ACT = {"tanh": 0, "relu": 1}


def save_policy(path: str | Path, policy) -> None:
    """Binary policy file: magic, version, head description, layer sizes, then
    every parameter in flatten order as little-endian float64."""
    gaussian = isinstance(policy, GaussianHead)
    sizes = policy.net.layer_sizes
    head = struct.pack("<8sIIIIII", MAGIC, FORMAT_VERSION, 0 if gaussian else 1,
                       int(policy.scheme) if gaussian else 0,
                       int(policy.squash), _ACT[policy.net.activation], len(sizes))
    body = struct.pack(f"<{len(sizes)}I", *sizes)
    if gaussian:
        body += struct.pack("<I", policy.act_dim)
        body += policy.low.astype("<f8").tobytes() + policy.high.astype("<f8").tobytes()
    body += struct.pack("<Q", policy.params.size) + policy.params.astype("<f8").tobytes()
    Path(path).write_bytes(head + body)


def load_policy(path: str | Path):
    data = Path(path).read_bytes()
    off = struct.calcsize("<8sIIIIII")
    magic, version, kind, scheme, squash, act, n_sizes = struct.unpack_from("<8sIIIIII", data)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a policy file")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported policy format version {version}")
    sizes = struct.unpack_from(f"<{n_sizes}I", data, off)
    off += 4 * n_sizes
    activation = {v: k for k, v in _ACT.items()}[act]
    if kind == 0:
        (act_dim,) = struct.unpack_from("<I", data, off)
        off += 4
        low = np.frombuffer(data, "<f8", act_dim, off)
        high = np.frombuffer(data, "<f8", act_dim, off + 8 * act_dim)
        off += 16 * act_dim
        policy = GaussianHead(sizes[0], act_dim, sizes[1:-1], activation, SigmaScheme(scheme),
                              squash=bool(squash), low=low, high=high)
    else:
        policy = CategoricalHead(sizes[0], sizes[-1], sizes[1:-1], activation)
    (n,) = struct.unpack_from("<Q", data, off)
    off += 8
    if n != policy.params.size:
        raise ValueError(f"{path}: parameter count {n} does not match layout")
    policy.params[...] = np.frombuffer(data, "<f8", n, off)
    return policy


# -- configuration -------------------------------------------------------------


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Config file values, then ``overrides`` on top; unknown keys are errors."""
    values: dict = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_mapping(values)


def write_config(path: str | Path, config: RunConfig) -> None:
    lines = [f"{k} = {v}" for k, v in config.to_mapping().items()]
    Path(path).write_text("\n".join(lines) + "\n")


# -- training -----------------------------------------------------------------


@dataclass
class RunResult:
    config: RunConfig
    rows: list[MetricRow] = field(default_factory=list)
    evals: list[dict] = field(default_factory=list)
    policy: object = None
    error: str | None = None
    out_dir: Path | None = None

    @property
    def final_eval(self) -> float:
        return self.evals[-1]["eval_mean"] if self.evals else float("nan")


class _Writers:
    def __init__(self, out_dir: Path | None):
        self.out_dir = out_dir
        self.files = []
        if out_dir is None:
            self.metrics = self.evals = self.timing = None
            return
        out_dir.mkdir(parents=True, exist_ok=True)
        self.metrics = self._open("metrics.csv", MetricRow.fieldnames())
        self.evals = self._open("eval.csv", EVAL_FIELDS)
        self.timing = self._open("timing.csv", ["iteration", "wall_time_seconds"])

    def _open(self, name, header):
        fh = open(self.out_dir / name, "w", newline="")
        self.files.append(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        fh.flush()
        return (fh, w)

    @staticmethod
    def write(target, row) -> None:
        if target is None:
            return
        fh, w = target
        w.writerow(row)
        fh.flush()

    def close(self) -> None:
        for fh in self.files:
            fh.close()


def _iterations(config: RunConfig) -> int:
    per_iter = config.horizon * (config.num_envs if config.algo != "sddpg" else 1)
    return config.total_steps // per_iter


def run_training(config: RunConfig, out_dir: str | Path | None = None,
                 callback: Callable | None = None) -> RunResult:
    """Train according to ``config``.

    With ``out_dir`` set, writes ``metrics.csv`` (one :class:`MetricRow` per
    iteration), ``eval.csv`` (initial, every ``eval_every`` iterations and
    final), ``timing.csv`` (wall clock, kept apart so the other files are
    reproducible), ``config.txt`` and ``policy.bin``. ``callback(agent, stats,
    iteration)`` runs after every iteration.

    A numeric failure stops the run, leaves the partial CSVs and writes
    ``error.txt``; the message is also returned in ``RunResult.error``.
    """
    config.validate()
    out = Path(out_dir) if out_dir is not None else None
    writers = _Writers(out)
    if out is not None:
        write_config(out / "config.txt", config)
    result = RunResult(config, out_dir=out)
    eval_env = build_env(config)
    t0 = time.perf_counter()

    if config.algo == "sddpg":
        agent = SddpgAgent.create(config)
        step_fn = _sddpg_stepper(agent, config)
    else:
        agent = OnPolicyAgent.create(config)
        collector = RolloutCollector(config)
        mb_rng = substream(config.seed, "minibatch")
        step_fn = lambda: sppo_train_iteration(agent, collector, mb_rng)  # noqa: E731
    result.policy = agent.policy

    def do_eval(iteration: int, env_steps: int) -> None:
        mean, std = evaluate(agent.policy, eval_env, config.eval_episodes,
                             substream(config.seed, "eval", iteration))
        rec = {"iteration": iteration, "env_steps": env_steps, "eval_mean": mean, "eval_std": std}
        result.evals.append(rec)
        writers.write(writers.evals, [iteration, env_steps, repr(mean), repr(std)])

    n_iter = _iterations(config)
    try:
        do_eval(0, 0)
        for it in range(1, n_iter + 1):
            stats_ = step_fn()
            row = MetricRow(
                iteration=it,
                env_steps=int(stats_["env_steps"]),
                mean_episode_return=float(stats_["mean_episode_return"]),
                mean_entropy=float(stats_["mean_entropy"]),
                policy_loss=float(stats_["policy_loss"]),
                value_loss=float(stats_["value_loss"]),
                clip_fraction=float(stats_["clip_fraction"]),
                alpha=float(stats_["alpha"]),
            )
            result.rows.append(row)
            writers.write(writers.metrics, row.to_csv())
            writers.write(writers.timing, [it, repr(time.perf_counter() - t0)])
            if callback is not None:
                callback(agent, stats_, it)
            if it % config.eval_every == 0 or it == n_iter:
                do_eval(it, row.env_steps)
    except FloatingPointError as exc:
        result.error = f"{type(exc).__name__}: {exc}"
        if out is not None:
            (out / "error.txt").write_text(result.error + "\n")
    finally:
        writers.close()
    if out is not None:
        save_policy(out / "policy.bin", agent.policy)
    return result


def _sddpg_stepper(agent: SddpgAgent, config: RunConfig):
    env = build_env(config)
    env_rng = substream(config.seed, "env")
    pol_rng = substream(config.seed, "policy")
    upd_rng = substream(config.seed, "minibatch")
    state = {"obs": env.reset(env_rng), "steps": 0, "running": 0.0, "episodes": 0,
             "last_return": float("nan")}

    def one_iteration() -> dict:
        finished, updates, ents = [], [], []
        for _ in range(config.horizon):
            obs = state["obs"]
            if state["steps"] < config.learning_starts:
                act = pol_rng.uniform(env.low, env.high)
            else:
                act, lp = agent.policy.sample(obs, pol_rng)
                ents.append(-lp)
            nxt, r, done = env.step(act, env_rng)
            agent.buffer.add(obs, act, r, nxt, done)
            state["steps"] += 1
            state["running"] += r
            if done or env.truncated:
                finished.append(state["running"])
                state["running"] = 0.0
                nxt = env.reset(env_rng)
            state["obs"] = nxt
            if state["steps"] >= config.learning_starts:
                upd = sddpg_update(agent, upd_rng)
                if upd is not None:
                    updates.append(upd)
        state["episodes"] += len(finished)
        if finished:
            state["last_return"] = float(np.mean(finished))
        elif state["episodes"] == 0:
            state["last_return"] = state["running"]
        return {
            "env_steps": state["steps"],
            "mean_episode_return": state["last_return"],
            "mean_entropy": float(np.mean(ents)) if ents else 0.0,
            "policy_loss": float(np.mean([u["policy_loss"] for u in updates])) if updates else 0.0,
            "value_loss": float(np.mean([u["value_loss"] for u in updates])) if updates else 0.0,
            "clip_fraction": 0.0,
            "alpha": agent.current_alpha,
        }

    return one_iteration


# -- comparison -----------------------------------------------------------------


@dataclass
class ComparisonReport:
    finals_a: list[float]
    finals_b: list[float]
    median_a: float
    median_b: float
    std_a: float
    std_b: float
    sign_test_p: float
    no_difference: bool

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2)

    def summary(self) -> str:
        lines = ["seed  final_a  final_b"]
        for i, (a, b) in enumerate(zip(self.finals_a, self.finals_b)):
            lines.append(f"{i:4d}  {a:9.2f}  {b:9.2f}")
        lines.append(f"median  {self.median_a:9.2f}  {self.median_b:9.2f}")
        lines.append(f"stddev  {self.std_a:9.2f}  {self.std_b:9.2f}")
        verdict = "no difference" if self.no_difference else "difference"
        lines.append(f"paired sign test p = {self.sign_test_p:.4f} ({verdict})")
        return "\n".join(lines)


def sign_test(a, b) -> float:
    diffs = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    nonzero = diffs[diffs != 0]
    if nonzero.size == 0:
        return 1.0
    return float(stats.binomtest(int((nonzero > 0).sum()), nonzero.size, 0.5).pvalue)


def compare(config_a: RunConfig, config_b: RunConfig, n_seeds: int,
            out_dir: str | Path | None = None) -> ComparisonReport:
    """Paired runs of two configs on seeds ``0 .. n_seeds-1``.

    The across-seed standard deviation of the final evaluation return is the
    stability measure.
    """
    if n_seeds < 3:
        raise ConfigError("compare needs n_seeds >= 3")
    out = Path(out_dir) if out_dir is not None else None
    finals = {"a": [], "b": []}
    for seed in range(n_seeds):
        for key, cfg in (("a", config_a), ("b", config_b)):
            run_dir = out / key / f"seed_{seed}" if out is not None else None
            res = run_training(cfg.replace(seed=seed), run_dir)
            finals[key].append(res.final_eval)
    fa, fb = finals["a"], finals["b"]
    p = sign_test(fa, fb)
    report = ComparisonReport(fa, fb, float(np.median(fa)), float(np.median(fb)),
                              float(np.std(fa)), float(np.std(fb)), p, p > 0.05)
    if out is not None:
        (out / "report.json").write_text(report.to_json())
        (out / "report.txt").write_text(report.summary() + "\n")
    return report
