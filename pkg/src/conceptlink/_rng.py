"""Named random sub-streams derived from one root seed."""

import zlib

import numpy as np


def derive_seed(root_seed, name):
    """Return a 63-bit integer seed for the stream ``name`` under ``root_seed``.

    The derivation is stable across processes and platforms (it does not use
    Python's salted ``hash``), so each pipeline stage can be rerun in
    isolation and still draw the same numbers.
    """
    ss = np.random.SeedSequence(entropy=int(root_seed), spawn_key=(zlib.crc32(name.encode("utf-8")),))
    return int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0] >> np.uint64(1))


def make_rng(seed):
    return np.random.default_rng(int(seed))
