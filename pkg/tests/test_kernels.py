import os
import subprocess
import sys

import numpy as np

from minet.hpt import Hpt, pack_fib, pack_queries
from minet.hpt import kernels
from minet.workload import WorkloadSpec, generate_workload


def _build(mode, seed):
    spec = WorkloadSpec(entry_count=3000, query_count=1500, mean_entry_len=3,
                        query_len=6, mode=mode, alphabet=300, seed=seed)
    wl = generate_workload(spec)
    fib = Hpt()
    for name, fwd in wl.entries:
        fib.insert(name, fwd)
    return fib, wl.queries


def _assert_matches_dict(fib, queries, lpm_fn, lin_fn):
    packed = pack_fib(fib)
    fps, lens = pack_queries(packed, queries)
    hit, node, mlen, probes = lpm_fn(fps, lens, packed.table_fp,
                                     packed.table_node, np.uint64(packed.mask),
                                     packed.state, packed.parent)
    lhit, lnode, lmlen, lprobes = lin_fn(fps, lens, packed.table_fp,
                                         packed.table_node,
                                         np.uint64(packed.mask), packed.state)
    for i, q in enumerate(queries):
        want = fib.lookup_lpm(q)
        assert bool(hit[i]) == want.hit
        assert int(probes[i]) == want.probes
        if want.hit:
            assert int(mlen[i]) == len(want.matched_prefix)
            assert int(packed.face[node[i]]) == want.forwarding.face_id
        ref = fib.lookup_oracle(q)
        assert bool(lhit[i]) == ref.hit
        assert int(lprobes[i]) == ref.probes
        if ref.hit:
            assert int(lmlen[i]) == len(ref.matched_prefix)
            assert int(packed.face[lnode[i]]) == ref.forwarding.face_id


def test_selected_backend_matches_dict_routes():
    for mode, seed in [("miss", 1), ("hit", 2), ("mixed", 3)]:
        fib, queries = _build(mode, seed)
        _assert_matches_dict(fib, queries, kernels.lpm_batch,
                             kernels.linear_batch)


def test_pure_python_path_matches_dict_routes():
    fib, queries = _build("mixed", 4)
    _assert_matches_dict(fib, queries, kernels.lpm_batch_py,
                         kernels.linear_batch_py)


def test_backtracking_visible_to_kernel():
    from minet.names import ContentName, ForwardingInfo
    fib = Hpt()
    fib.insert(ContentName.parse("/a/b/c"), ForwardingInfo(1))
    fib.insert(ContentName.parse("/a"), ForwardingInfo(7))
    packed = pack_fib(fib)
    q = [ContentName.parse("/a/b/x")]
    fps, lens = pack_queries(packed, q)
    hit, node, mlen, probes = kernels.lpm_batch(
        fps, lens, packed.table_fp, packed.table_node,
        np.uint64(packed.mask), packed.state, packed.parent)
    assert hit[0] == 1 and int(mlen[0]) == 1 and int(probes[0]) == 2
    assert int(packed.face[node[0]]) == 7


def test_warmup_runs():
    kernels.warmup()


def test_env_flag_selects_python_backend():
    env = dict(os.environ, MINET_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c",
         "from minet.hpt import kernels; print(kernels.BACKEND)"],
        capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND in ("numba", "python")
