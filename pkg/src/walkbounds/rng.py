"""Counter-based random streams.

Every random draw in the package goes through :func:`substream`, which keys a
Philox generator by ``(seed, *stream_ids)``.  Streams with different ids are
statistically independent and can be consumed in any order or in parallel.
"""

import hashlib

import numpy as np


def _stream_word(part):
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream ids must be non-negative")
        return int(part)
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed, *stream_ids):
    """Return an independent ``numpy.random.Generator`` for ``(seed, *stream_ids)``.

    Stream ids may be non-negative integers or strings (hashed to 64 bits).
    """
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    ss = np.random.SeedSequence(seed, spawn_key=tuple(_stream_word(p) for p in stream_ids))
    return np.random.Generator(np.random.Philox(ss))
