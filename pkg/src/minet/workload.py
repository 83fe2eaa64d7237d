"""Synthetic name workloads for forwarding-table benchmarks.

Stored-name lengths follow a geometric distribution truncated to [1, 10]
with mean M.  Query lengths cycle a symmetric window so their empirical
mean is exactly the requested value:

* miss mode: lengths N-w..N+w (w = min(2, N-1)), every component drawn
  from a pool disjoint from entry components, so no query shares any
  indexed prefix with the table;
* hit mode: each query extends a stored name of length L to total length
  L + (N-M) + d with d cycling -w..w (w = min(2, N-M)); the suffix uses
  the query-only pool, so the stored name is exactly the longest real
  prefix and longest-first scans probe exactly length - L + 1 entries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from minet.names import ContentName, ForwardingInfo

MAX_NAME_LEN = 10


class InfeasibleSpec(ValueError):
    """Workload parameters cannot be satisfied."""


@dataclass(frozen=True)
class WorkloadSpec:
    entry_count: int = 100_000
    query_count: int = 50_000
    mean_entry_len: float = 4.0      # M
    query_len: int = 8               # N, mean query length
    mode: str = "miss"               # hit | miss | mixed
    alphabet: int = 100_000
    seed: int = 7

    def __post_init__(self) -> None:
        if self.mode not in ("hit", "miss", "mixed"):
            raise InfeasibleSpec(f"unknown mode {self.mode!r}")
        if self.entry_count < 1 or self.query_count < 0 or self.alphabet < 1:
            raise InfeasibleSpec("counts must be positive")
        if self.query_len < 1 or self.query_len > 2 * MAX_NAME_LEN:
            raise InfeasibleSpec("query_len out of range")
        if not 1.0 <= self.mean_entry_len < 5.5:
            # mean of a geometric truncated to [1,10] cannot exceed 5.5
            raise InfeasibleSpec("mean_entry_len must be in [1.0, 5.5)")
        if self.mode in ("hit", "mixed") and self.query_len < self.mean_entry_len:
            raise InfeasibleSpec("hit mode needs query_len >= mean_entry_len")


@dataclass
class Workload:
    spec: WorkloadSpec
    entries: list[tuple[ContentName, ForwardingInfo]]
    queries: list[ContentName]
    entry_lengths: np.ndarray


def _truncated_geometric_pmf(mean: float) -> np.ndarray:
    """pmf over lengths 1..10 of a truncated geometric with the given mean."""
    lengths = np.arange(1, MAX_NAME_LEN + 1)

    def mean_of(p: float) -> float:
        w = p * (1 - p) ** (lengths - 1)
        w /= w.sum()
        return float((w * lengths).sum())

    lo, hi = 1e-9, 1 - 1e-9
    if mean <= 1.0:
        p = hi
    else:
        for _ in range(80):
            mid = (lo + hi) / 2
            if mean_of(mid) > mean:
                lo = mid
            else:
                hi = mid
        p = (lo + hi) / 2
    w = p * (1 - p) ** (lengths - 1)
    return w / w.sum()


def _comp_formatter(prefix: str):
    """Format component ids to strings, sharing one object per id."""
    cache: dict[int, str] = {}

    def fmt(c) -> str:
        c = int(c)
        s = cache.get(c)
        if s is None:
            s = prefix + str(c)
            cache[c] = s
        return s

    return fmt


def _cycled(values: list[int], count: int, center: int,
            rng: np.random.Generator) -> np.ndarray:
    """count draws cycling `values` equally, remainder at `center`; the
    result is a permutation, so the empirical mean is exact."""
    base = count // len(values)
    out = np.concatenate([np.full(base, v, dtype=np.int64) for v in values] +
                         [np.full(count - base * len(values), center,
                                  dtype=np.int64)])
    return out[rng.permutation(count)]


def generate_workload(spec: WorkloadSpec) -> Workload:
    rng = np.random.default_rng(spec.seed)
    capacity = sum(min(spec.alphabet, 10 ** 15) ** l
                   for l in range(1, MAX_NAME_LEN + 1))
    if capacity < spec.entry_count:
        raise InfeasibleSpec("alphabet too small for unique entries")

    pmf = _truncated_geometric_pmf(spec.mean_entry_len)
    cdf = np.cumsum(pmf)
    lengths = np.searchsorted(cdf, rng.random(spec.entry_count)) + 1

    comps = rng.integers(0, spec.alphabet, size=(spec.entry_count, MAX_NAME_LEN))
    fmt = _comp_formatter("e")
    entries: list[tuple[ContentName, ForwardingInfo]] = []
    taken: set[tuple[int, ...]] = set()
    final_lengths = np.empty(spec.entry_count, dtype=np.int64)
    for i in range(spec.entry_count):
        length = int(lengths[i])
        key = tuple(comps[i, :length])
        tries = 0
        while key in taken:
            tries += 1
            if tries % 50 == 0 and length < MAX_NAME_LEN:
                length += 1
            key = tuple(rng.integers(0, spec.alphabet, size=length))
        taken.add(key)
        final_lengths[i] = length
        name = ContentName(tuple(map(fmt, key)))
        entries.append((name, ForwardingInfo(face_id=int(rng.integers(0, 4096)))))

    if spec.mode == "miss":
        queries = _miss_queries(spec, spec.query_count, rng)
    elif spec.mode == "hit":
        queries = _hit_queries(spec, entries, final_lengths, spec.query_count, rng)
    else:
        half = spec.query_count // 2
        hits = _hit_queries(spec, entries, final_lengths, half, rng)
        misses = _miss_queries(spec, spec.query_count - half, rng)
        queries = []
        hi = mi = 0
        for i in range(spec.query_count):
            take_hit = (i % 2 == 0 and hi < len(hits)) or mi >= len(misses)
            if take_hit:
                queries.append(hits[hi])
                hi += 1
            else:
                queries.append(misses[mi])
                mi += 1
    return Workload(spec, entries, queries, final_lengths)


def _miss_queries(spec: WorkloadSpec, count: int,
                  rng: np.random.Generator) -> list[ContentName]:
    if count == 0:
        return []
    w = min(2, spec.query_len - 1)
    window = list(range(spec.query_len - w, spec.query_len + w + 1))
    lens = _cycled(window, count, spec.query_len, rng)
    comps = rng.integers(0, spec.alphabet, size=(count, int(lens.max())))
    fmt = _comp_formatter("q")
    return [ContentName(tuple(map(fmt, comps[i, :lens[i]])))
            for i in range(count)]


def _hit_queries(spec: WorkloadSpec, entries, entry_lengths: np.ndarray,
                 count: int, rng: np.random.Generator) -> list[ContentName]:
    gap = spec.query_len - int(round(spec.mean_entry_len))
    w = max(0, min(2, gap))
    deltas = _cycled(list(range(-w, w + 1)), count, 0, rng)
    picks = rng.integers(0, len(entries), size=count)
    fmt = _comp_formatter("q")
    out = []
    for i in range(count):
        base = entries[picks[i]][0]
        suffix_len = gap + int(deltas[i])
        if suffix_len <= 0:
            out.append(base)
            continue
        suffix = rng.integers(0, spec.alphabet, size=suffix_len)
        out.append(ContentName(base.components + tuple(map(fmt, suffix))))
    return out
