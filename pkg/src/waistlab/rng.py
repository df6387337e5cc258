"""Deterministic, worker-count independent random streams.

Every Monte Carlo loop is cut into fixed-size chunks. Chunk ``i`` of a stream
tagged ``key`` draws from its own counter-based Philox generator keyed by
``(seed, key, i)``, so the numbers a chunk sees never depend on which worker
ran it. Per-chunk partial results are returned in chunk order and reduced by
the caller in that order, which makes floating point sums bit-reproducible.
"""

import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 1 << 16
DEFAULT_SEED = 20170601


def _key_part(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if isinstance(part, (float, np.floating)):
        return zlib.crc32(repr(float(part)).encode("ascii"))
    return int(part)


def substream(seed, *key):
    """Return a Philox generator for the stream identified by ``(seed, *key)``.

    ``key`` items may be ints, floats or strings.
    """
    spawn_key = tuple(_key_part(p) for p in key)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(ss))


def chunk_sizes(total, chunk=CHUNK):
    total = int(total)
    full, rest = divmod(total, chunk)
    sizes = [chunk] * full
    if rest:
        sizes.append(rest)
    return sizes


def map_chunks(fn, total, seed, key, workers=1, chunk=CHUNK):
    """Evaluate ``fn(rng, size)`` on every chunk of a ``total``-sample budget.

    Returns the list of per-chunk results in chunk order.
    """
    sizes = chunk_sizes(total, chunk)
    key = tuple(key) if isinstance(key, (tuple, list)) else (key,)

    def run(i):
        return fn(substream(seed, *key, i), sizes[i])

    if workers is None or workers <= 1 or len(sizes) <= 1:
        return [run(i) for i in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=int(workers)) as pool:
        return list(pool.map(run, range(len(sizes))))


def reduce_moments(parts):
    """Combine per-chunk ``(sum, sum_sq, count)`` triples in order.

    Returns ``(mean, stderr_of_mean, count)``.
    """
    parts = np.asarray(parts, dtype=float).reshape(-1, 3)
    s = 0.0
    s2 = 0.0
    n = 0.0
    for a, b, c in parts:
        s += a
        s2 += b
        n += c
    mean = s / n
    var = max(s2 / n - mean * mean, 0.0)
    return mean, float(np.sqrt(var / n)), int(n)
