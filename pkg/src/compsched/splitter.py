"""Comparison splitting: route each job by its rank among recent arrivals.

A job is put in class ``k`` when exactly ``k`` of the preceding ``m`` job
sizes are strictly larger than it.  Class 0 therefore holds the largest jobs
and class ``m`` the smallest.  The refined ``(m, l)`` splitter keeps the last
``m * l`` sizes and uses the order statistics at ranks ``l, 2l, ..., ml`` as
thresholds; its classes are reported with the same 0-based convention.
"""

from __future__ import annotations

import bisect
from collections import deque

import numpy as np
from numba import njit

from .inputs import RngStream, sample_sizes

__all__ = [
    "ComparisonWindow",
    "class_labels",
    "classify",
    "classify_refined",
    "classify_stream",
    "concatenate_by_class",
    "error_rate",
]


class ComparisonWindow:
    """Sliding buffer of the last ``capacity`` job sizes with a sorted view.

    ``fifo_order`` is arrival ordered; ``ordered_view`` is the same multiset
    sorted in decreasing order.  Once full, every push evicts the oldest entry.
    """

    def __init__(self, capacity: int, initial=()):
        if capacity < 0:
            raise ValueError("capacity must be nonnegative")
        self.capacity = int(capacity)
        self._fifo = deque()
        self._sorted = []  # ascending
        for size in initial:
            self.push(size)

    @classmethod
    def zeros(cls, capacity: int) -> "ComparisonWindow":
        return cls(capacity, [0.0] * capacity)

    @classmethod
    def prefilled(cls, capacity: int, dist, rng: RngStream) -> "ComparisonWindow":
        return cls(capacity, sample_sizes(dist, rng, capacity).tolist())

    def push(self, size: float) -> "ComparisonWindow":
        if size < 0:
            raise ValueError(f"job sizes are nonnegative, got {size}")
        if self.capacity == 0:
            return self
        size = float(size)
        self._fifo.append(size)
        bisect.insort(self._sorted, size)
        if len(self._fifo) > self.capacity:
            old = self._fifo.popleft()
            del self._sorted[bisect.bisect_left(self._sorted, old)]
        return self

    def count_greater(self, size: float) -> int:
        return len(self._sorted) - bisect.bisect_right(self._sorted, size)

    @property
    def fifo_order(self) -> tuple:
        return tuple(self._fifo)

    @property
    def ordered_view(self) -> tuple:
        return tuple(reversed(self._sorted))

    def order_statistic(self, rank: int) -> float:
        """``rank``-th largest entry with sentinels: rank 0 is +inf, past the end is 0."""
        if rank <= 0:
            return np.inf
        if rank > len(self._sorted):
            return 0.0
        return self._sorted[-rank]

    def __len__(self):
        return len(self._fifo)

    def __repr__(self):
        return f"ComparisonWindow(capacity={self.capacity}, fifo={list(self._fifo)})"


def class_labels(m: int) -> list[str]:
    """Human names for the classes; ``m = 3`` gives XL, L, M, S."""
    if m == 3:
        return ["XL", "L", "M", "S"]
    return [f"C{k}" for k in range(m + 1)]


def classify(window: ComparisonWindow, size: float) -> int:
    """Class index of a new arrival against a window of the last ``m`` sizes.

    Equals the number of window entries strictly greater than ``size``, which
    is the half-open rule ``B~_(k+1) <= size < B~_k`` with sentinels.  Ties go
    to the smaller index.
    """
    return window.count_greater(size)


def classify_refined(window: ComparisonWindow, m: int, l: int, size: float) -> int:
    """Refined class of ``size`` against the last ``m * l`` sizes, 0-based.

    The 1-based class ``k`` in ``1..m+1`` holds sizes in
    ``[B~_(kl), B~_((k-1)l))``; this returns ``k - 1``.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    return min(window.count_greater(size) // l, m)


@njit(cache=True)
def _classify_stream(sizes, init, m, l):
    n = sizes.shape[0]
    cap = init.shape[0]
    out = np.empty(n, dtype=np.int64)
    if cap == 0:
        out[:] = 0
        return out
    ring = init.copy()
    srt = np.sort(init)
    head = 0
    for i in range(n):
        b = sizes[i]
        # number of entries strictly greater than b
        pos = np.searchsorted(srt, b, side="right")
        g = cap - pos
        k = g // l
        if k > m:
            k = m
        out[i] = k
        # evict oldest, insert b, keeping srt ascending
        old = ring[head]
        ring[head] = b
        head += 1
        if head == cap:
            head = 0
        j = np.searchsorted(srt, old, side="left")
        if b >= old:
            while j + 1 < cap and srt[j + 1] < b:
                srt[j] = srt[j + 1]
                j += 1
        else:
            while j > 0 and srt[j - 1] > b:
                srt[j] = srt[j - 1]
                j -= 1
        srt[j] = b
    return out


def classify_stream(sizes, m: int, l: int = 1, init="zeros", dist=None, rng: RngStream | None = None) -> np.ndarray:
    """Classify a whole arrival sequence in order.

    ``init`` is ``"zeros"`` (window starts as ``m * l`` zero sizes),
    ``"prefill"`` (``m * l`` independent draws of ``dist`` from ``rng``), or
    an explicit array of ``m * l`` initial sizes in arrival order.
    """
    if m < 0 or l < 1:
        raise ValueError("need m >= 0 and l >= 1")
    sizes = np.ascontiguousarray(sizes, dtype=float)
    cap = m * l
    if isinstance(init, str):
        if init == "zeros":
            start = np.zeros(cap)
        elif init == "prefill":
            if dist is None or rng is None:
                raise ValueError("prefill initialisation needs dist and rng")
            start = sample_sizes(dist, rng, cap)
        else:
            raise ValueError(f"unknown init mode {init!r}")
    else:
        start = np.ascontiguousarray(init, dtype=float)
        if start.shape != (cap,):
            raise ValueError(f"initial window must hold m*l = {cap} sizes")
    return _classify_stream(sizes, start, int(m), int(l))


def concatenate_by_class(inputs, assignments, m: int) -> np.ndarray:
    """Splitter output sequence: class 0 jobs, then class 1, ..., arrival order within."""
    inputs = np.asarray(inputs, dtype=float)
    assignments = np.asarray(assignments)
    order = np.argsort(assignments, kind="stable")
    return inputs[order]


def error_rate(inputs, assignments, m: int, l: int = 1) -> float:
    """Fraction of positions where the class-concatenated output differs from the sorted input.

    The reference is the input sorted in decreasing order, matching class 0
    (largest jobs) coming first in the output.
    """
    inputs = np.asarray(inputs, dtype=float)
    assignments = np.asarray(assignments)
    if inputs.shape != assignments.shape:
        raise ValueError(f"length mismatch: {inputs.shape} sizes vs {assignments.shape} classes")
    if inputs.size == 0:
        raise ValueError("error rate of an empty sequence is undefined")
    if assignments.min() < 0 or assignments.max() > m:
        raise ValueError(f"class indices must lie in 0..{m}")
    out = concatenate_by_class(inputs, assignments, m)
    ref = np.sort(inputs)[::-1]
    return float(np.mean(out != ref))
