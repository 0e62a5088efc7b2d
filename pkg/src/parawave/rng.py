"""Counter-based random streams: one independent generator per (seed, index)."""

import numpy as np


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Generator for ensemble member ``index``; independent of evaluation order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))
