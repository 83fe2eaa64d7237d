"""Benchmark drivers for the forwarding table.

Three drivers, all deterministic for a fixed seed:

* `run_lookup_bench` — probe-count tables and wall-clock comparison of
  the longest-first linear scan against the prefix-length binary search,
  over any of three execution routes (batch kernel as configured, the
  pure-Python kernel loops, or the per-name dict-backed table);
* `run_consistency_drill` — randomized insert/delete churn with
  structural integrity checks at fixed intervals and a final sweep
  comparing the binary-search path, the linear oracle, and an
  independent reference map;
* `measure_build` — wall time to populate a table, for size-scaling
  checks.

Results are plain dataclasses so the command-line layer can serialize
them without knowing how they were produced.
"""

from __future__ import annotations

import dataclasses
import gc
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .hpt import Hpt, kernels, pack_fib, pack_queries
from .names import ContentName, ForwardingInfo
from .workload import WorkloadSpec, generate_workload

SCALING_NOTE = ("desk-scale run: one process, synthetic names, in-memory "
                "tables; probe counts and ratios are size-determined, "
                "wall-clock figures scale with the machine")

ROUTES = ("kernel", "kernel-py", "dict")


class BenchError(ValueError):
    pass


@dataclass(frozen=True)
class LookupRow:
    mode: str
    mean_entry_len: float
    query_len: int
    linear_probes: float
    binary_probes: float
    ratio_pct: float              # linear probes per binary probe, in percent
    linear_wall_s: float
    binary_wall_s: float


@dataclass(frozen=True)
class LookupReport:
    entry_count: int
    query_count: int
    route: str                    # kernel/<backend>, kernel-py, or dict
    build_wall_s: float
    pack_wall_s: float
    rows: tuple[LookupRow, ...]
    note: str = SCALING_NOTE


def _batch_fns(route: str):
    if route == "kernel":
        return kernels.lpm_batch, kernels.linear_batch, f"kernel/{kernels.BACKEND}"
    if route == "kernel-py":
        return kernels.lpm_batch_py, kernels.linear_batch_py, "kernel-py"
    raise BenchError(f"unknown route {route!r}; expected one of {ROUTES}")


def run_lookup_bench(*, mode: str = "miss", entry_count: int = 100_000,
                     query_count: int = 50_000, mean_entry_len: float = 4.0,
                     query_lens: tuple[int, ...] = (6, 7, 8, 9, 10),
                     seed: int = 7, route: str = "kernel") -> LookupReport:
    if route not in ROUTES:
        raise BenchError(f"unknown route {route!r}; expected one of {ROUTES}")
    if not query_lens:
        raise BenchError("need at least one query length")
    spec = WorkloadSpec(entry_count=entry_count, query_count=query_count,
                        mean_entry_len=mean_entry_len,
                        query_len=query_lens[0], mode=mode, seed=seed)
    workload = generate_workload(spec)

    t0 = time.perf_counter()
    hpt = Hpt()
    for name, fwd in workload.entries:
        hpt.insert(name, fwd)
    build_wall = time.perf_counter() - t0

    packed = None
    pack_wall = 0.0
    if route != "dict":
        t0 = time.perf_counter()
        packed = pack_fib(hpt)
        pack_wall = time.perf_counter() - t0
        kernels.warmup()

    rows = []
    route_label = "dict" if route == "dict" else _batch_fns(route)[2]
    for n in query_lens:
        if n == spec.query_len:
            queries = workload.queries
        else:
            again = generate_workload(dataclasses.replace(spec, query_len=n))
            # same seed and entry parameters: the table must be unchanged
            if not np.array_equal(again.entry_lengths,
                                  workload.entry_lengths):
                raise BenchError("entry stream changed across query lengths")
            queries = again.queries
        if route == "dict":
            row = _dict_row(hpt, queries, mode, mean_entry_len, n)
        else:
            row = _kernel_row(packed, queries, route, mode, mean_entry_len, n)
        rows.append(row)
    return LookupReport(entry_count, query_count, route_label,
                        build_wall, pack_wall, tuple(rows))


def _kernel_row(packed, queries, route, mode, m, n) -> LookupRow:
    lpm, linear, _ = _batch_fns(route)
    fps, lens = pack_queries(packed, queries)
    t0 = time.perf_counter()
    *_, bin_probes = lpm(fps, lens, packed.table_fp, packed.table_node,
                         np.uint64(packed.mask), packed.state, packed.parent)
    bin_wall = time.perf_counter() - t0
    t0 = time.perf_counter()
    *_, lin_probes = linear(fps, lens, packed.table_fp, packed.table_node,
                            np.uint64(packed.mask), packed.state)
    lin_wall = time.perf_counter() - t0
    return _row(mode, m, n, float(lin_probes.mean()),
                float(bin_probes.mean()), lin_wall, bin_wall)


def _dict_row(hpt: Hpt, queries, mode, m, n) -> LookupRow:
    t0 = time.perf_counter()
    bin_total = 0
    for q in queries:
        bin_total += hpt.lookup_lpm(q).probes
    bin_wall = time.perf_counter() - t0
    t0 = time.perf_counter()
    lin_total = 0
    for q in queries:
        lin_total += hpt.lookup_oracle(q).probes
    lin_wall = time.perf_counter() - t0
    count = max(1, len(queries))
    return _row(mode, m, n, lin_total / count, bin_total / count,
                lin_wall, bin_wall)


def _row(mode, m, n, lin_probes, bin_probes, lin_wall, bin_wall) -> LookupRow:
    ratio = 100.0 * lin_probes / bin_probes if bin_probes else float("inf")
    return LookupRow(mode, m, n, lin_probes, bin_probes, ratio,
                     lin_wall, bin_wall)


# -- consistency drill ---------------------------------------------------------

@dataclass(frozen=True)
class DrillReport:
    operations: int
    lookups: int
    integrity_checks: int
    integrity_problems: int
    mismatches: int
    final_entries: int
    wall_s: float
    note: str = SCALING_NOTE

    @property
    def clean(self) -> bool:
        return self.integrity_problems == 0 and self.mismatches == 0


def _random_name(rng, alphabet: int, max_len: int,
                 prefix: str = "c") -> ContentName:
    length = int(rng.integers(1, max_len + 1))
    comps = rng.integers(0, alphabet, size=length)
    return ContentName(tuple(f"{prefix}{int(c)}" for c in comps))


def _reference_lpm(reference: dict[tuple, ForwardingInfo],
                   name: ContentName) -> Optional[tuple]:
    comps = name.components
    for k in range(len(comps), 0, -1):
        if comps[:k] in reference:
            return comps[:k]
    return None


def run_consistency_drill(*, operations: int = 10_000, lookups: int = 10_000,
                          check_every: int = 1_000, seed: int = 11,
                          alphabet: int = 32, max_len: int = 6) -> DrillReport:
    """Churn the table with random upserts/deletes, verify structure at a
    fixed cadence, then cross-check three lookup routes name by name."""
    rng = np.random.default_rng(seed)
    hpt = Hpt()
    reference: dict[tuple, ForwardingInfo] = {}
    keys: list[tuple] = []
    t0 = time.perf_counter()
    checks = problems = 0
    for i in range(1, operations + 1):
        roll = rng.random()
        if roll < 0.55 or not keys:
            name = _random_name(rng, alphabet, max_len)
            fwd = ForwardingInfo(face_id=int(rng.integers(0, 4096)))
            hpt.insert(name, fwd)
            if name.components not in reference:
                keys.append(name.components)
            reference[name.components] = fwd
        elif roll < 0.9:
            idx = int(rng.integers(0, len(keys)))
            comps = keys[idx]
            keys[idx] = keys[-1]
            keys.pop()
            del reference[comps]
            hpt.delete(ContentName(comps))
        else:
            # deleting an absent name must be a harmless no-op; the "m"
            # component namespace is never inserted, so absence is sure
            hpt.delete(_random_name(rng, alphabet, max_len, prefix="m"))
        if i % check_every == 0:
            checks += 1
            problems += len(hpt.verify_integrity())

    mismatches = 0
    for _ in range(lookups):
        name = _random_name(rng, alphabet, max_len + 2)
        got = hpt.lookup_lpm(name)
        oracle = hpt.lookup_oracle(name)
        expect = _reference_lpm(reference, name)
        ok = (got.hit == oracle.hit
              and got.matched_prefix == oracle.matched_prefix
              and got.forwarding == oracle.forwarding)
        if expect is None:
            ok = ok and not got.hit
        else:
            ok = (ok and got.hit
                  and got.matched_prefix.components == expect
                  and got.forwarding == reference[expect])
        if not ok:
            mismatches += 1
    wall = time.perf_counter() - t0
    return DrillReport(operations, lookups, checks, problems, mismatches,
                       hpt.real_count(), wall)


# -- build scaling ---------------------------------------------------------

@dataclass(frozen=True)
class BuildTiming:
    entry_count: int
    build_wall_s: float
    real_entries: int
    note: str = SCALING_NOTE


@dataclass(frozen=True)
class BuildScalingReport:
    small: BuildTiming
    big: BuildTiming
    small_walls: tuple[float, ...]
    big_walls: tuple[float, ...]
    note: str = SCALING_NOTE

    @property
    def ratio(self) -> float:
        return self.big.build_wall_s / self.small.build_wall_s


def _timed_insert(entries) -> tuple[float, int]:
    hpt = Hpt()
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        t0 = time.perf_counter()
        for name, fwd in entries:
            hpt.insert(name, fwd)
        wall = time.perf_counter() - t0
    finally:
        if gc_was_enabled:
            gc.enable()
    return wall, hpt.real_count()


def measure_build(entry_count: int, *, mean_entry_len: float = 4.0,
                  seed: int = 7) -> BuildTiming:
    """Time only the table population, not the workload synthesis."""
    spec = WorkloadSpec(entry_count=entry_count, query_count=0,
                        mean_entry_len=mean_entry_len, query_len=8,
                        mode="miss", seed=seed)
    workload = generate_workload(spec)
    wall, real = _timed_insert(workload.entries)
    return BuildTiming(entry_count, wall, real)


def measure_build_scaling(small: int = 100_000, big: int = 1_000_000, *,
                          mean_entry_len: float = 4.0, seed: int = 7,
                          repeats: int = 3) -> BuildScalingReport:
    """Build-time growth from `small` to `big` entries.

    Both tables are populated from slices of one entry stream.  A
    full-size throwaway build first faults in the allocator arenas, then
    `repeats` alternating small/big builds run back to back and the
    medians go into the report, so the ratio reflects table growth
    rather than process warm-up or scheduling noise.
    """
    if not 0 < small < big:
        raise BenchError("need 0 < small < big")
    if repeats < 1:
        raise BenchError("repeats must be positive")
    spec = WorkloadSpec(entry_count=big, query_count=0,
                        mean_entry_len=mean_entry_len, query_len=8,
                        mode="miss", seed=seed)
    workload = generate_workload(spec)
    _timed_insert(workload.entries)
    small_walls, big_walls = [], []
    small_real = big_real = 0
    for _ in range(repeats):
        wall, small_real = _timed_insert(workload.entries[:small])
        small_walls.append(wall)
        wall, big_real = _timed_insert(workload.entries)
        big_walls.append(wall)
    return BuildScalingReport(
        BuildTiming(small, float(np.median(small_walls)), small_real),
        BuildTiming(big, float(np.median(big_walls)), big_real),
        tuple(small_walls), tuple(big_walls))
