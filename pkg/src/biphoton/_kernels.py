"""Coincidence-counting kernels.

Both kernels implement the same greedy earliest-match pairing of two sorted
int64 timestamp arrays: a tag pairs with the first unused tag of the other
stream within ``+-window``; tags are never reused.

``count_loop`` is the single forward two-cursor pass (compiled by numba
when enabled). ``count_numpy`` splits the merged stream into clusters
separated by gaps larger than the window, which cannot interact; clusters
of two tags from different streams are a match, larger clusters go
through the loop.
"""

import numpy as np

from ._accel import USE_NUMBA, njit


def _count_loop_py(a, b, window):
    na = a.shape[0]
    nb = b.shape[0]
    i = 0
    j = 0
    n = 0
    while i < na and j < nb:
        d = b[j] - a[i]
        if d < -window:
            j += 1
        elif d > window:
            i += 1
        else:
            n += 1
            i += 1
            j += 1
    return n


count_loop = njit(_count_loop_py)


def count_numpy(a, b, window):
    na, nb = a.shape[0], b.shape[0]
    if na == 0 or nb == 0:
        return 0
    t = np.concatenate((a, b))
    src = np.concatenate((np.zeros(na, np.int8), np.ones(nb, np.int8)))
    order = np.argsort(t, kind="stable")
    t = t[order]
    src = src[order]
    breaks = np.flatnonzero(np.diff(t) > window) + 1
    starts = np.concatenate(([0], breaks))
    ends = np.concatenate((breaks, [t.shape[0]]))
    size = ends - starts
    s2 = starts[size == 2]
    n = int(np.count_nonzero(src[s2] != src[s2 + 1]))
    for s, e in zip(starts[size > 2], ends[size > 2]):
        seg_t, seg_src = t[s:e], src[s:e]
        n += _count_loop_py(seg_t[seg_src == 0], seg_t[seg_src == 1], window)
    return n


def count_coincidences(a, b, window, use_numba=None):
    """Greedy one-to-one coincidence count; backend picked by ``BIPHOTON_DISABLE_NUMBA`` unless forced."""
    use_numba = USE_NUMBA if use_numba is None else use_numba
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    window = np.int64(window)
    if use_numba:
        return int(count_loop(a, b, window))
    return count_numpy(a, b, window)
