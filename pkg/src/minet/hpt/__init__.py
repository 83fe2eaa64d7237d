"""Hash-plus-prefix-tree forwarding table and its batch lookup kernels."""

from minet.hpt.fib import (
    EntryState,
    FibNode,
    Hpt,
    LookupResult,
    FibError,
    UnknownContent,
    DuplicateBinding,
    NotBound,
    LoadError,
)
from minet.hpt.packed import PackedFib, pack_fib, pack_queries

__all__ = [
    "EntryState",
    "FibNode",
    "Hpt",
    "LookupResult",
    "FibError",
    "UnknownContent",
    "DuplicateBinding",
    "NotBound",
    "LoadError",
    "PackedFib",
    "pack_fib",
    "pack_queries",
]
