"""Deterministic random-stream fan-out.

Every stochastic component draws from a named substream derived from the
master seed, so adding draws to one component never perturbs another and
any call order reproduces the same numbers.
"""

import zlib

import numpy as np


def _key(token) -> int:
    if isinstance(token, (int, np.integer)):
        return int(token) & 0xFFFFFFFF
    return zlib.crc32(str(token).encode("utf-8"))


def substream(master_seed: int, *tokens) -> np.random.Generator:
    """Generator for the substream named by ``tokens`` under ``master_seed``.

    Tokens may be strings (hashed with crc32) or integers (e.g. a step
    index). The same (seed, tokens) always yields the same stream.
    """
    seq = np.random.SeedSequence(master_seed, spawn_key=tuple(_key(t) for t in tokens))
    return np.random.default_rng(seq)
