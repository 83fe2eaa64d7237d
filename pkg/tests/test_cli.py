import csv
import json

import pytest

from minet import perfmodel
from minet.cli import run_command


def read_report(out, stem):
    with open(out / f"{stem}.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    with open(out / f"{stem}.json") as fh:
        sidecar = json.load(fh)
    return rows, sidecar


def test_usage_errors_exit_2(tmp_path, capsys):
    assert run_command([]) == 2
    assert run_command(["no-such-command"]) == 2
    assert run_command(["fib-bench", "--bogus-flag"]) == 2
    assert run_command(["consensus-sim", "--nodes", "1",
                        "--out", str(tmp_path)]) == 2
    assert run_command(["consensus-sim", "--fault", "nonsense",
                        "--out", str(tmp_path)]) == 2
    assert run_command(["model-eval", "--nodes", "2",
                        "--out", str(tmp_path)]) == 2
    capsys.readouterr()


def test_help_exits_0(capsys):
    assert run_command(["--help"]) == 0
    assert "fib-bench" in capsys.readouterr().out


def test_fib_bench_report(tmp_path, capsys):
    assert run_command([
        "fib-bench", "--out", str(tmp_path), "--entries", "2000",
        "--queries", "600", "--query-lens", "6,8", "--seed", "7"]) == 0
    rows, sidecar = read_report(tmp_path, "fib_bench")
    assert [r["query_len"] for r in rows] == ["6", "8"]
    assert float(rows[0]["linear_probes"]) == pytest.approx(6.0)
    assert float(rows[0]["binary_probes"]) < 4.0
    assert float(rows[0]["ratio_pct"]) > 150.0
    assert sidecar["entry_count"] == 2000
    assert "note" in sidecar and sidecar["csv"] == "fib_bench.csv"
    assert "N=6" in capsys.readouterr().out


def test_fib_bench_routes_agree_on_probes(tmp_path):
    args = ["fib-bench", "--entries", "1500", "--queries", "400",
            "--query-lens", "7", "--seed", "3"]
    assert run_command(args + ["--route", "kernel",
                               "--out", str(tmp_path / "k")]) == 0
    assert run_command(args + ["--route", "dict",
                               "--out", str(tmp_path / "d")]) == 0
    kernel_rows, _ = read_report(tmp_path / "k", "fib_bench")
    dict_rows, _ = read_report(tmp_path / "d", "fib_bench")
    assert kernel_rows[0]["linear_probes"] == dict_rows[0]["linear_probes"]
    assert kernel_rows[0]["binary_probes"] == dict_rows[0]["binary_probes"]


def test_fib_bench_build_scaling_option(tmp_path, capsys):
    assert run_command([
        "fib-bench", "--out", str(tmp_path), "--entries", "1000",
        "--queries", "100", "--query-lens", "6",
        "--build-scaling", "500:5000"]) == 0
    _, sidecar = read_report(tmp_path, "fib_bench")
    scaling = sidecar["build_scaling"]
    assert scaling["small_entries"] == 500
    assert scaling["big_entries"] == 5000
    assert scaling["ratio"] > 1.0
    assert "build scaling" in capsys.readouterr().out


def test_fib_check_report(tmp_path, capsys):
    assert run_command([
        "fib-check", "--out", str(tmp_path), "--ops", "2000",
        "--lookups", "1000", "--check-every", "500"]) == 0
    rows, sidecar = read_report(tmp_path, "fib_check")
    assert len(rows) == 1
    assert rows[0]["integrity_problems"] == "0"
    assert rows[0]["mismatches"] == "0"
    assert sidecar["clean"] is True
    assert "integrity checks" in capsys.readouterr().out


def test_consensus_sim_csv_contract(tmp_path, capsys):
    assert run_command([
        "consensus-sim", "--out", str(tmp_path), "--nodes", "3",
        "--rounds", "2", "--txs-per-block", "100",
        "--compute-model", "zero"]) == 0
    with open(tmp_path / "consensus_sim.csv", newline="") as fh:
        text = fh.read()
    assert text.splitlines()[0] == "round,t1,t2,t3,t4,t_cons,committed_txs"
    rows, sidecar = read_report(tmp_path, "consensus_sim")
    assert [r["round"] for r in rows] == ["1", "2"]
    for r in rows:
        parts = sum(float(r[k]) for k in ("t1", "t2", "t3", "t4"))
        assert float(r["t_cons"]) == pytest.approx(parts, rel=1e-9)
        assert r["committed_txs"] == "300"
    assert sidecar["config"]["node_count"] == 3
    assert sidecar["divergences"] == 0
    capsys.readouterr()


def test_consensus_sim_fault_stalls_cleanly(tmp_path, capsys):
    assert run_command([
        "consensus-sim", "--out", str(tmp_path), "--nodes", "4",
        "--rounds", "5", "--txs-per-block", "50",
        "--compute-model", "zero", "--fault", "1:crash_at_round:2"]) == 0
    rows, sidecar = read_report(tmp_path, "consensus_sim")
    assert sidecar["stalled_round"] == 2
    assert sidecar["rounds_completed"] == 1
    assert len(rows) == 1
    assert "stalled at round 2" in capsys.readouterr().out


def test_model_eval_reference_point(tmp_path, capsys):
    assert run_command(["model-eval", "--out", str(tmp_path)]) == 0
    rows, sidecar = read_report(tmp_path, "model_eval")
    assert len(rows) == 1
    row = rows[0]
    assert row["n"] == "3" and row["a"] == "1.0"
    assert float(row["t_cons"]) == pytest.approx(0.13263, abs=1e-5)
    assert float(row["throughput"]) == pytest.approx(
        perfmodel.throughput_limit(3, 1.0, 125e6, 10_000), rel=1e-6)
    assert sidecar["transmission_fit_consistent"] is False
    assert "t_cons" in capsys.readouterr().out


def test_model_sweep_grid(tmp_path, capsys):
    assert run_command([
        "model-sweep", "--out", str(tmp_path), "--nodes", "3:6",
        "--speedups", "1,2", "--bands", "125e6"]) == 0
    rows, sidecar = read_report(tmp_path, "model_sweep")
    assert len(rows) == 8
    assert sidecar["cells"] == 8
    assert {r["n"] for r in rows} == {"3", "4", "5", "6"}
    best = sidecar["best"]
    assert best["throughput"] == pytest.approx(
        max(float(r["throughput"]) for r in rows), rel=1e-6)
    capsys.readouterr()


def test_config_file_overrides_flags(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"entries": 1500, "query_lens": [6],
                               "queries": 300}))
    assert run_command([
        "fib-bench", "--out", str(tmp_path), "--entries", "9999",
        "--config", str(cfg)]) == 0
    rows, sidecar = read_report(tmp_path, "fib_bench")
    assert sidecar["entry_count"] == 1500
    assert len(rows) == 1 and rows[0]["query_len"] == "6"
    capsys.readouterr()


def test_config_unknown_key_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"no_such_flag": 1}))
    assert run_command(["fib-bench", "--out", str(tmp_path),
                        "--config", str(cfg)]) == 2
    assert "bad --config" in capsys.readouterr().err


def test_tunnel_demo_all_modes(tmp_path, capsys):
    assert run_command([
        "tunnel-demo", "--out", str(tmp_path),
        "--payload-bytes", "20000"]) == 0
    rows, sidecar = read_report(tmp_path, "tunnel_demo")
    assert len(rows) == 4
    assert all(r["digests_match"] == "True" for r in rows)
    assert sidecar["all_digests_match"] is True
    est = {r["mode"]: r["establish_exchanges"] for r in rows}
    assert est == {"ip-ccn-ip": "3", "ip-ccn": "3",
                   "ccn-ip": "3", "ccn-ip-ccn": "3"}
    capsys.readouterr()


def test_tunnel_demo_down_node_times_out(tmp_path, capsys):
    assert run_command([
        "tunnel-demo", "--out", str(tmp_path), "--mode", "ip-ccn-ip",
        "--payload-bytes", "100", "--down", "mir1"]) == 0
    _, sidecar = read_report(tmp_path, "tunnel_demo")
    assert sidecar["timeout"]
    assert "folded to CLOSED" in capsys.readouterr().out


def test_registry_demo(tmp_path, capsys):
    assert run_command([
        "registry-demo", "--out", str(tmp_path),
        "--identifiers", "24"]) == 0
    rows, sidecar = read_report(tmp_path, "registry_demo")
    assert len(rows) == 24 + 2
    outcomes = [r["outcome"] for r in rows]
    assert outcomes[:-2] == ["resolved"] * 24
    assert outcomes[-2] == "not-found"
    assert outcomes[-1] == "proxied-to-ip"
    assert sidecar["consistency_problems"] == []
    assert sidecar["duplicates_rejected"] == 1
    assert (tmp_path / "registry_records.jsonl").exists()
    assert "consistency problems: 0" in capsys.readouterr().out
