"""Seed handling.

A master seed is split into independent streams by hashing a task label, so
results do not depend on the order or parallelism in which tasks run.
"""

import hashlib
from concurrent.futures import ProcessPoolExecutor

import numpy as np


def task_seed(master, *labels):
    """Return a ``SeedSequence`` for ``(master, *labels)``.

    The labels are hashed with SHA-256 and the first 128 bits become the
    spawn key, so the mapping is stable across Python versions and runs.
    """
    digest = hashlib.sha256(repr(tuple(labels)).encode()).digest()
    key = tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))
    return np.random.SeedSequence(entropy=int(master), spawn_key=key)


def task_rng(master, *labels):
    return np.random.default_rng(task_seed(master, *labels))


def as_rng(seed):
    """Accept an int seed, a ``SeedSequence`` or an existing ``Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("a seed is required; there is no wall-clock default")
    return np.random.default_rng(seed)


def map_tasks(fn, args, jobs=1):
    """Apply ``fn`` to each element of ``args`` and return results in input order."""
    args = list(args)
    if jobs is None or jobs <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, args, chunksize=max(1, len(args) // (4 * jobs))))
