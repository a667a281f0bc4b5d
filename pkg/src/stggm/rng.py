"""Named random substreams derived from one integer seed.

Every consumer of randomness gets its own ``numpy.random.Generator`` keyed
by a tuple of small integers, so results do not depend on how work is split
across threads.
"""
import numpy as np

# stream families
CELL = 0  # beta / sigma updates of one grid cell
GAMMA = 1  # latent indicator updates
ETA = 2  # Metropolis-Hastings updates of the couplings
SIM_STRUCTURE = 10
SIM_CELL = 11
BENCH = 20


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
