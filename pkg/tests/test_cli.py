import csv
import io
import json

import pytest

from varlen.cli import EXIT_FAILURE, EXIT_MISMATCH, EXIT_OK, EXIT_USAGE, main, resolve
from varlen.ulisse import envelope_count


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def dataset(tmp_path, capsys):
    path = tmp_path / "d.usds"
    code, out, _ = run(capsys, "gen", "--kind", "random_walk", "--length", 3000, "--seed", 1,
                       "--out", path, "--queries", 6, "--query-min-length", 64,
                       "--query-max-length", 96, "--queries-out", tmp_path / "q.usds")
    assert code == EXIT_OK
    return path


@pytest.fixture
def index(tmp_path, capsys, dataset):
    path = tmp_path / "i.ulse"
    code, out, _ = run(capsys, "index", "build", "--data", dataset, "--out", path,
                       "--min-length", 64, "--max-length", 96, "--gamma", 8)
    assert code == EXIT_OK
    stats = json.loads(out)["stats"]
    assert stats["envelopes"] == envelope_count(3000, 64, 8)
    return path


def test_gen_writes_metadata(tmp_path, capsys):
    path = tmp_path / "p.usds"
    code, out, _ = run(capsys, "gen", "--kind", "planted", "--length", 2000,
                       "--pattern-length", 64, "--anomaly-length", 4, "--out", path)
    assert code == EXIT_OK
    meta = json.loads((tmp_path / "p.usds.json").read_text())
    assert len(meta["motif_offsets"]) == 2 and meta["anomaly_offset"] is not None
    assert json.loads(out)["config"]["kind"] == "planted"


def test_gen_is_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        run(capsys, "gen", "--length", 500, "--seed", 7, "--out", tmp_path / name)
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_query_structure_and_determinism(tmp_path, capsys, dataset, index):
    outs = []
    for name in ("r1.json", "r2.json"):
        code, out, _ = run(capsys, "query", "--index", index, "--data", dataset,
                           "--queries", tmp_path / "q.usds", "--k", 10,
                           "--out", tmp_path / name)
        assert code == EXIT_OK
        assert "timings" in json.loads(out)
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]
    payload = json.loads(outs[0])
    assert payload["config"]["k"] == 10
    for q in payload["queries"]:
        dists = [r["distance"] for r in q["results"]]
        assert len(dists) == 10 and dists == sorted(dists)
        c = q["counters"]
        assert c["nodes_visited"] + c["nodes_pruned"] == c["nodes_total"]


def test_approximate_query(tmp_path, capsys, dataset, index):
    code, out, _ = run(capsys, "query", "--index", index, "--data", dataset,
                       "--queries", tmp_path / "q.usds", "--approximate", "--metric", "dtw")
    assert code == EXIT_OK
    q = json.loads(out)["queries"][0]
    assert q["query"]["exact"] is False and q["query"]["metric"] == "dtw"


def test_discover_json_and_csv(tmp_path, capsys, dataset):
    code, out, _ = run(capsys, "discover", "--data", dataset, "--min-length", 40,
                       "--max-length", 43, "--out", tmp_path / "r.json")
    assert code == EXIT_OK
    payload = json.loads((tmp_path / "r.json").read_text())
    assert len(payload["results"]) == 4 * (1 + 3 * 3)
    assert payload["counters"]["full_profiles"] < payload["counters"]["naive_profiles"]
    code, out, _ = run(capsys, "discover", "--data", dataset, "--min-length", 40,
                       "--max-length", 43, "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 40 and rows[0]["kind"] == "motif"


def test_verify_passes(tmp_path, capsys, dataset):
    code, out, _ = run(capsys, "verify", "--data", dataset, "--queries", tmp_path / "q.usds",
                       "--min-length", 64, "--max-length", 96, "--task", "all", "--limit", 3,
                       "--k", "1,5")
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["mismatches"] == 0
    assert {r["task"] for r in payload["reports"]} == {"knn", "discover"}


def test_verify_flags_mismatch(tmp_path, capsys, dataset, monkeypatch):
    import varlen.oracle as oracle

    real = oracle.brute_discords

    def skewed(*args, **kw):
        rep = real(*args, **kw)
        rep.result[1][0] = (rep.result[1][0][0], rep.result[1][0][1] + 1.0)
        return rep

    monkeypatch.setattr(oracle, "brute_discords", skewed)
    code, out, _ = run(capsys, "verify", "--data", dataset, "--task", "discover",
                       "--min-length", 40, "--max-length", 41)
    assert code == EXIT_MISMATCH
    assert json.loads(out)["mismatches"] == 2


def test_bench_gamma(tmp_path, capsys, dataset):
    code, out, _ = run(capsys, "bench", "--data", dataset, "--sweep", "gamma",
                       "--min-length", 64, "--max-length", 96)
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["value"]) for r in rows] == [0, 16, 32]
    for r in rows:
        assert int(r["envelopes"]) == int(r["expected_envelopes"]) == envelope_count(
            3000, 64, int(r["value"]))


def test_bench_discovery_sweep(tmp_path, capsys, dataset):
    code, out, _ = run(capsys, "bench", "--data", dataset, "--sweep", "k", "--values", "1,2",
                       "--min-length", 40, "--max-length", 44, "--out", tmp_path / "b.csv")
    assert code == EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "b.csv")))
    assert [r["value"] for r in rows] == ["1", "2"]


def test_config_precedence(tmp_path, capsys, dataset):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"min_length": 40, "max_length": 42, "a": 2}))
    code, out, _ = run(capsys, "discover", "--data", dataset, "--config", cfg, "--a", 1)
    resolved = json.loads(out)["config"]
    assert (resolved["min_length"], resolved["max_length"], resolved["a"], resolved["b"]) == (
        40, 42, 1, 3)
    from varlen.cli import build_parser

    ns = build_parser().parse_args(["discover", "--data", "x"])
    assert resolve("discover", ns)["min_length"] == 64


def test_usage_errors(tmp_path, capsys):
    for argv in ([], ["index"], ["discover", "--bogus"], ["gen"], ["discover"],
                 ["discover", "--data", tmp_path / "missing.usds"]):
        code, _, err = run(capsys, *argv)
        assert code == EXIT_USAGE
        assert json.loads(err)["error"]["exit_code"] == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    code, _, _ = run(capsys, "discover", "--data", "x", "--config", bad)
    assert code == EXIT_USAGE


def test_runtime_failure_exit_code(tmp_path, capsys):
    junk = tmp_path / "junk.usds"
    junk.write_bytes(b"not a dataset at all")
    code, _, err = run(capsys, "discover", "--data", junk)
    assert code == EXIT_FAILURE
    assert json.loads(err)["error"]["type"] == "DatasetFormatError"


def test_workers_flag_and_env(tmp_path, capsys, dataset, monkeypatch):
    code, out, _ = run(capsys, "discover", "--data", dataset, "--min-length", 40,
                       "--max-length", 40, "--workers", 1)
    assert code == EXIT_OK and json.loads(out)["config"]["workers"] == 1
    monkeypatch.setenv("VARLEN_WORKERS", "1")
    code, out, _ = run(capsys, "discover", "--data", dataset, "--min-length", 40,
                       "--max-length", 40)
    assert json.loads(out)["config"]["workers"] == 1
    monkeypatch.setenv("VARLEN_WORKERS", "many")
    code, _, _ = run(capsys, "discover", "--data", dataset)
    assert code == EXIT_USAGE
