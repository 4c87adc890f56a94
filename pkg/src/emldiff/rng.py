"""Deterministic substream derivation for reproducible Monte Carlo.

Every random draw in the package comes from a counter-based Philox stream
keyed by (master seed, component tag, index...).  Streams are therefore
independent of execution order and thread count, and fixing the master seed
fixes every output byte.  The component tags keep streams from different
subsystems (lattice construction, data simulation, density estimation, ...)
from colliding even when they share a master seed.
"""

import numpy as np

# component tags for spawn keys
LATTICE = 0
DATA = 1
SML = 2
ROGERS = 3
RN = 4
OU_BRIDGE = 5
CLI = 6

__all__ = ["substream", "LATTICE", "DATA", "SML", "ROGERS", "RN", "OU_BRIDGE", "CLI"]


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the (seed, *key) substream; pure function of its inputs."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
