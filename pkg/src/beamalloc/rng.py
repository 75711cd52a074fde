"""Counter-based RNG streams.

Every random draw in a campaign comes from a generator keyed by a tuple of
integers (master seed, K, frame, purpose, ...), so results never depend on
execution order or on how frames are spread over workers.
"""

from enum import IntEnum

import numpy as np


class Purpose(IntEnum):
    POSITIONS = 1
    ACTUAL = 2
    FADING = 3
    TIE_BREAK = 4


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))
