"""Per-trial random streams.

Every trial draws from its own Philox stream keyed by ``(master_seed, trial)``,
so a trial's randomness does not depend on which worker ran it or in what
order. Bounded integers come from ``Generator.integers`` (Lemire's unbiased
rejection method).
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def trial_generator(seed, trial=0):
    key = np.array([int(trial) & _MASK64, int(seed) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))

