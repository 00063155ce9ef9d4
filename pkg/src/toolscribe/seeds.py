"""Named RNG substreams derived from a single run seed.

Every source of randomness in a run (sampling, specialist fallback moves,
bootstrap permutations, ...) draws from its own named stream so that adding
a consumer never perturbs the others.
"""
from __future__ import annotations

import hashlib
import random

import numpy as np


def stream_seed(master_seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{master_seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def substream(master_seed: int, name: str) -> random.Random:
    return random.Random(stream_seed(master_seed, name))


def numpy_substream(master_seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(stream_seed(master_seed, name))
