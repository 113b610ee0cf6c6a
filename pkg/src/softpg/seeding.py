"""Named random substreams derived from one master seed."""
from __future__ import annotations

import numpy as np

STREAMS = {"env": 0, "policy": 1, "init": 2, "eval": 3, "minibatch": 4}


def substream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, name, index)``.

    Changing how much one stream is consumed never shifts another, so e.g.
    evaluation frequency does not perturb training randomness.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(STREAMS[name], int(index)))
    return np.random.Generator(np.random.PCG64(ss))
