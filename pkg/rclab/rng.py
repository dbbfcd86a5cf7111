"""Counter-based random streams.

Every random draw in rclab is addressed by ``(seed, stream, index)``: the
Philox-4x64 key is built from the 64-bit seed and a stream tag, and the
counter selects the position inside the stream. Any slice of a stream can
therefore be regenerated on its own, which makes sampling independent of
chunking and thread count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import List, Sequence

import numpy as np

GENERATOR_NAME = "philox4x64"

STREAM_BONDS = 0
STREAM_SITES = 1
STREAM_WALK = 2
STREAM_BOOTSTRAP = 3
STREAM_COLLECTIONS = 4
STREAM_SUBSETS = 5

# One Philox block yields four 64-bit words; each double consumes one word.
_WORDS_PER_BLOCK = 4
_MASK64 = (1 << 64) - 1
DEFAULT_CHUNK = 1 << 20


def _key(seed: int, stream: int) -> int:
    return ((stream & _MASK64) << 64) | (seed & _MASK64)


def generator(seed: int, stream: int = 0, counter: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=_key(seed, stream), counter=counter))


def uniforms(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """Uniform variates on (0, 1] at stream positions ``start .. start+count-1``."""
    aligned = start - start % _WORDS_PER_BLOCK
    skip = start - aligned
    gen = generator(seed, stream, counter=aligned // _WORDS_PER_BLOCK)
    raw = gen.random(count + skip)[skip:]
    return 1.0 - raw


def parallel_uniforms(
    seed: int,
    stream: int,
    count: int,
    *,
    threads: int = 1,
    chunk: int = DEFAULT_CHUNK,
) -> np.ndarray:
    """The first ``count`` variates of a stream, generated chunk by chunk."""
    chunk -= chunk % _WORDS_PER_BLOCK
    starts = list(range(0, count, chunk))
    if threads <= 1 or len(starts) <= 1:
        parts: List[np.ndarray] = [
            uniforms(seed, stream, s, min(chunk, count - s)) for s in starts
        ]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(
                lambda s: uniforms(seed, stream, s, min(chunk, count - s)), starts,
            ))
    if not parts:
        return np.empty(0, dtype=np.float64)
    return np.concatenate(parts)


def derive_seed(seed: int, *indices: int) -> int:
    """A 64-bit child seed for replica ``indices`` of a master seed."""
    seq = np.random.SeedSequence(entropy=seed & _MASK64, spawn_key=tuple(indices))
    return int(seq.generate_state(1, np.uint64)[0])


def replica_seeds(seed: int, count: int, *prefix: int) -> Sequence[int]:
    return [derive_seed(seed, *prefix, r) for r in range(count)]
