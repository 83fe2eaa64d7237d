"""Batch lookup kernels over a PackedFib.

The jitted path is the default; set MINET_NO_NUMBA=1 (or run without
numba installed) to select the pure-Python fallback, which executes the
same loops over the same arrays.  Both paths implement exactly the
schedules of Hpt.lookup_lpm and Hpt.lookup_oracle, so probe counts and
outcomes are comparable across all three routes.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
    numba = None

_STATE_REAL = 0
_STATE_VIRTUAL = 1


def _lpm_batch(fps, lens, table_fp, table_node, mask, state, parent):
    q = lens.shape[0]
    hit = np.zeros(q, dtype=np.uint8)
    node_out = np.full(q, -1, dtype=np.int32)
    len_out = np.zeros(q, dtype=np.int32)
    probes = np.zeros(q, dtype=np.int32)
    for i in range(q):
        lo = 1
        hi = lens[i]
        last = -1
        last_len = 0
        p = 0
        while lo <= hi:
            mid = (lo + hi) // 2
            fp = fps[i, mid - 1]
            p += 1
            slot = fp & mask
            found = -1
            while table_node[slot] != -1:
                if table_fp[slot] == fp:
                    found = table_node[slot]
                    break
                slot = (slot + np.uint64(1)) & mask
            if found != -1:
                last = found
                last_len = mid
                lo = mid + 1
            else:
                hi = mid - 1
        probes[i] = p
        if last == -1 or state[last] == _STATE_VIRTUAL:
            continue
        if state[last] == _STATE_REAL:
            hit[i] = 1
            node_out[i] = last
            len_out[i] = last_len
            continue
        cur = parent[last]
        d = last_len - 1
        while cur != -1:
            if state[cur] == _STATE_REAL:
                hit[i] = 1
                node_out[i] = cur
                len_out[i] = d
                break
            cur = parent[cur]
            d -= 1
    return hit, node_out, len_out, probes


def _linear_batch(fps, lens, table_fp, table_node, mask, state):
    q = lens.shape[0]
    hit = np.zeros(q, dtype=np.uint8)
    node_out = np.full(q, -1, dtype=np.int32)
    len_out = np.zeros(q, dtype=np.int32)
    probes = np.zeros(q, dtype=np.int32)
    for i in range(q):
        p = 0
        for length in range(lens[i], 0, -1):
            fp = fps[i, length - 1]
            p += 1
            slot = fp & mask
            found = -1
            while table_node[slot] != -1:
                if table_fp[slot] == fp:
                    found = table_node[slot]
                    break
                slot = (slot + np.uint64(1)) & mask
            if found != -1 and state[found] == _STATE_REAL:
                hit[i] = 1
                node_out[i] = found
                len_out[i] = length
                break
        probes[i] = p
    return hit, node_out, len_out, probes


lpm_batch_py = _lpm_batch
linear_batch_py = _linear_batch

_flag = os.environ.get("MINET_NO_NUMBA", "")
if numba is not None and _flag in ("", "0"):
    lpm_batch = numba.njit(cache=True)(_lpm_batch)
    linear_batch = numba.njit(cache=True)(_linear_batch)
    BACKEND = "numba"
else:
    lpm_batch = _lpm_batch
    linear_batch = _linear_batch
    BACKEND = "python"


def warmup() -> None:
    """Trigger jit compilation outside of any timed region."""
    fps = np.zeros((1, 1), dtype=np.uint64)
    lens = np.ones(1, dtype=np.int32)
    tfp = np.zeros(8, dtype=np.uint64)
    tnode = np.full(8, -1, dtype=np.int32)
    state = np.zeros(1, dtype=np.uint8)
    parent = np.full(1, -1, dtype=np.int32)
    lpm_batch(fps, lens, tfp, tnode, np.uint64(7), state, parent)
    linear_batch(fps, lens, tfp, tnode, np.uint64(7), state)
