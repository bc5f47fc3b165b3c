"""Brute-force ground truth for small grids.

Enumerates fibers (all 0-1 tables with given t1, t2) by placing the ones with
itertools.combinations rather than scanning all 2^(mn) tables, which keeps the
worst case at the 25-cell cap to a few seconds. Used to validate the sampler,
the LP bounds, and the importance estimates.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, islice
from typing import Iterator

import numpy as np

from .grid import STATISTICS, BinaryTable, SuffStats, topology

DEFAULT_CELL_CAP = 25
_CHUNK = 65536


class CapExceededError(ValueError):
    """Raised when an enumeration request is larger than the configured cap."""


@dataclass(frozen=True)
class FiberSummary:
    rows: int
    cols: int
    stats: SuffStats
    size: int
    stat_name: str
    stat_histogram: dict[int, int]


def _check_cap(rows: int, cols: int, cap: int) -> None:
    if rows * cols > cap:
        raise CapExceededError(
            f"grid has {rows * cols} cells, enumeration is capped at {cap}"
        )


def fiber_members(rows: int, cols: int, stats: SuffStats, cap: int = DEFAULT_CELL_CAP) -> Iterator[BinaryTable]:
    """Yield every table in the fiber, in lexicographic order of one-positions."""
    _check_cap(rows, cols, cap)
    stats.validate_for(rows, cols)
    topo = topology(rows, cols)
    n = topo.n_cells
    for ones in combinations(range(n), stats.t1):
        cells = [0] * n
        for k in ones:
            cells[k] = 1
        if sum(cells[a] != cells[b] for a, b in topo.edges) == stats.t2:
            yield BinaryTable(rows, cols, tuple(cells))


def enumerate_fiber(
    rows: int,
    cols: int,
    stats: SuffStats,
    stat_name: str = "u",
    cap: int = DEFAULT_CELL_CAP,
) -> FiberSummary:
    """Exhaustively count the fiber and histogram the chosen statistic over it."""
    _check_cap(rows, cols, cap)
    stats.validate_for(rows, cols)
    topo = topology(rows, cols)
    n = topo.n_cells
    stat_fn = STATISTICS[stat_name]
    ea = np.fromiter((a for a, _ in topo.edges), dtype=np.intp)
    eb = np.fromiter((b for _, b in topo.edges), dtype=np.intp)

    size = 0
    histogram: dict[int, int] = {}
    combos = combinations(range(n), stats.t1)
    while True:
        chunk = list(islice(combos, _CHUNK))
        if not chunk:
            break
        x = np.zeros((len(chunk), n), dtype=np.int8)
        rows_idx = np.repeat(np.arange(len(chunk)), stats.t1)
        if chunk and stats.t1:
            x[rows_idx, np.array(chunk, dtype=np.intp).ravel()] = 1
        t2s = (x[:, ea] != x[:, eb]).sum(axis=1)
        for row in np.nonzero(t2s == stats.t2)[0]:
            table = BinaryTable(rows, cols, tuple(int(v) for v in x[row]))
            s = stat_fn(table)
            histogram[s] = histogram.get(s, 0) + 1
            size += 1
    return FiberSummary(rows, cols, stats, size, stat_name, dict(sorted(histogram.items())))


def exact_pvalues(summary: FiberSummary, observed: int) -> tuple[float, float]:
    """Exact (p1, p2) under the uniform fiber distribution: P[stat > obs], P[stat >= obs]."""
    if summary.size < 1:
        raise ValueError("empty fiber has no p-values")
    gt = sum(c for s, c in summary.stat_histogram.items() if s > observed)
    ge = sum(c for s, c in summary.stat_histogram.items() if s >= observed)
    return gt / summary.size, ge / summary.size


def exact_cell_bounds(rows, cols, stats, prefix, cell, cap: int = DEFAULT_CELL_CAP):
    """Min/max value of `cell` over all fiber completions of a raster prefix.

    `prefix` is the sequence of already-determined leading cell values. Returns
    (lo, hi) or None when no completion exists.
    """
    _check_cap(rows, cols, cap)
    topo = topology(rows, cols)
    n = topo.n_cells
    k = len(prefix)
    remaining_ones = stats.t1 - sum(prefix)
    free = range(k, n)
    if remaining_ones < 0 or remaining_ones > n - k:
        return None
    lo, hi = None, None
    for ones in combinations(free, remaining_ones):
        cells = list(prefix) + [0] * (n - k)
        for idx in ones:
            cells[idx] = 1
        if sum(cells[a] != cells[b] for a, b in topo.edges) == stats.t2:
            v = cells[cell]
            lo = v if lo is None else min(lo, v)
            hi = v if hi is None else max(hi, v)
            if lo == 0 and hi == 1:
                break
    if lo is None:
        return None
    return lo, hi


def nonempty_fibers(rows: int, cols: int, cap: int = DEFAULT_CELL_CAP) -> dict[SuffStats, int]:
    """Map every realizable (t1, t2) on the grid to its fiber size, via one full scan."""
    _check_cap(rows, cols, cap)
    topo = topology(rows, cols)
    n = topo.n_cells
    ea = np.fromiter((a for a, _ in topo.edges), dtype=np.intp)
    eb = np.fromiter((b for _, b in topo.edges), dtype=np.intp)
    sizes: dict[SuffStats, int] = {}
    for start in range(0, 2**n, _CHUNK):
        stop = min(start + _CHUNK, 2**n)
        codes = np.arange(start, stop, dtype=np.uint64)
        x = (codes[:, None] >> np.arange(n, dtype=np.uint64)) & 1
        t1s = x.sum(axis=1)
        t2s = (x[:, ea] != x[:, eb]).sum(axis=1)
        for a, b in zip(t1s.tolist(), t2s.tolist()):
            key = SuffStats(int(a), int(b))
            sizes[key] = sizes.get(key, 0) + 1
    return sizes
