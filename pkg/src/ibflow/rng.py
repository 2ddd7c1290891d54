"""Deterministic, splittable random-number streams for replica runs.

Every Monte Carlo replica owns an independent substream derived from
``(master_seed, stream, replica_index)`` through a counter-based Philox
generator keyed by a spawned :class:`numpy.random.SeedSequence`.  The
derivation is purely arithmetic, so replica ``i`` sees the same noise no
matter how many workers run, in which order replicas execute, or whether
other replicas run at all.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["replica_rng", "stream_id"]


def stream_id(name: str) -> int:
    """Stable small integer identifying a named experiment stream."""
    return zlib.crc32(name.encode("utf8")) & 0x7FFFFFFF


def replica_rng(master_seed: int, replica_index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one replica of one experiment stream.

    Parameters
    ----------
    master_seed:
        Nonnegative run-level seed (from config or ``--seed``).
    replica_index:
        Index of the Monte Carlo replica, ``0 <= i``.
    stream:
        Optional experiment-level namespace so different estimators in
        one run never share noise (see :func:`stream_id`).
    """
    if master_seed < 0:
        raise ValueError("master_seed must be nonnegative")
    if replica_index < 0:
        raise ValueError("replica_index must be nonnegative")
    seq = np.random.SeedSequence(master_seed, spawn_key=(stream, replica_index))
    return np.random.Generator(np.random.Philox(seq))
