"""Named random sub-streams derived from a single seed."""

import numpy as np

# Stable ids: changing one changes every output produced from that stream
STREAMS = {
    "init": 1,
    "noise": 2,
    "patches": 3,
    "power": 4,
    "synth": 5,
    "sweep": 6,
}


def stream(seed: int, name: str) -> np.random.Generator:
    """Return the generator for sub-stream `name` of `seed`."""
    if name not in STREAMS:
        raise KeyError(f"Unknown random stream: {name}")
    return np.random.default_rng(np.random.SeedSequence([int(seed), STREAMS[name]]))
