"""Worker pool over replica blocks.

Blocks are fixed slices of the replica index range and every replica owns
its random stream, so results do not depend on the number of workers.
Results come back in block order; the caller concatenates per-replica
arrays and reduces once at the end.
"""
from concurrent.futures import ThreadPoolExecutor
import os

THREADS_ENV = "ROUGHLAB_THREADS"


def thread_count():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def replica_blocks(replicas, block):
    return [range(a, min(replicas, a + block)) for a in range(0, replicas, block)]


def map_blocks(fn, blocks, threads=None):
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(blocks) <= 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, blocks))
