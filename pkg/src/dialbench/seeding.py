"""Deterministic RNG streams keyed by run seed and a stream index.

Philox is counter-based: every (run_seed, index) pair opens a stream
whose draws never overlap with any other index, so evaluation episodes
can be reseeded independently of how much training randomness was
consumed before them.
"""

from __future__ import annotations

import numpy as np

TRAIN_STREAM = 0
INIT_STREAM = 1

# eval episodes get indexes well above anything training uses
_EVAL_BLOCK = 1 << 32


def seed_stream(run_seed: int, index: int) -> np.random.Generator:
    if run_seed < 0 or index < 0:
        raise ValueError("run_seed and index must be non-negative")
    return np.random.Generator(np.random.Philox(key=run_seed,
                                                counter=index << 64))


def eval_stream_index(milestone_index: int, episode: int) -> int:
    if episode >= _EVAL_BLOCK:
        raise ValueError("episode index too large for the eval block")
    return (milestone_index + 1) * _EVAL_BLOCK + episode


def eval_stream(run_seed: int, milestone_index: int,
                episode: int) -> np.random.Generator:
    return seed_stream(run_seed, eval_stream_index(milestone_index, episode))
