import numpy as np

from softpg.envs import TabularMdp


def random_mdp(rng: np.random.Generator, n_states: int | None = None,
               n_actions: int | None = None, gamma: float | None = None) -> TabularMdp:
    n_s = n_states or int(rng.integers(1, 7))
    n_a = n_actions or int(rng.integers(1, 5))
    P = rng.dirichlet(np.full(n_s, 0.5), size=(n_s, n_a))
    R = rng.normal(size=(n_s, n_a, n_s))
    p0 = rng.dirichlet(np.ones(n_s))
    g = float(rng.uniform(0.5, 0.95)) if gamma is None else gamma
    return TabularMdp(P, R, g, p0)
