"""Deterministic work scheduling.

Work is split into fixed-size chunks by item index; chunk results are
reduced in chunk order.  Because every random draw is keyed by item
index (never by worker), the output is bit-identical at any worker
count: the pool only changes who computes a chunk, not what it returns
or the order it is folded in.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

__all__ = ["run_chunked"]


def run_chunked(fn, payloads: list, workers: int = 1):
    """Apply ``fn`` to each payload, in order; maybe on a process pool.

    ``fn`` must be a picklable top-level callable (or functools.partial
    of one) when workers > 1.  Returns the list of results in payload
    order regardless of scheduling.
    """
    if workers <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, payloads))
