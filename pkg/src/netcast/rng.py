"""Counter-based random streams keyed by position in the computation.

Every independent piece of work (one image in one layer on one wavelength
batch of one trial, say) gets its own Philox stream derived from the run
seed and an integer key, so results do not depend on scheduling.
"""

import numpy as np

# first key element: which experiment family a stream belongs to
INFERENCE = 0
PRECISION = 1
PAIRS = 2
MATVEC = 3
HISTOGRAM = 4
SNR = 5


def stream(seed: int, *key: int) -> np.random.Generator:
    if seed < 0 or any(k < 0 for k in key):
        raise ValueError(f"seed and key parts must be non-negative, got {seed}, {key}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))
