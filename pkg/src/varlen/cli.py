"""Command-line interface.

Subcommands: ``gen``, ``index build``, ``query``, ``discover``, ``verify``,
``bench``.  Parameters resolve as flags > ``--config`` JSON file > defaults,
and every run echoes its resolved config.  Result payloads written with
``--out`` contain no timings, so identical runs produce identical bytes.

Exit codes: 0 ok, 1 usage error, 2 verification mismatch, 3 runtime failure.
Failures print a JSON object with an ``error`` key on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_MISMATCH, EXIT_FAILURE = 0, 1, 2, 3
WORKERS_ENV = "VARLEN_WORKERS"
TOL = 1e-6

DEFAULTS = {
    "gen": {"kind": "random_walk", "length": 10_000, "seed": 0, "pattern_length": 0,
            "copies": 2, "noise_std": 0.0, "anomaly_length": 0, "anomaly_amplitude": 10.0,
            "anomaly_offset": None, "period": 64, "queries": 0, "query_min_length": 128,
            "query_max_length": 256, "noise_fraction": 0.1, "query_seed": None,
            "queries_out": None},
    "index": {"min_length": 128, "max_length": 256, "segment_length": 16, "alphabet": 256,
              "gamma": None, "normalize": False, "leaf_capacity": 100, "metric": "euclidean",
              "dtw_radius": 0.05},
    "query": {"k": 1, "approximate": False, "metric": None},
    "discover": {"series": 0, "min_length": 64, "max_length": 96, "a": 3, "b": 3, "p": None,
                 "exclude_constant": False, "format": "json"},
    "verify": {"task": "all", "k": [1, 10], "metrics": ["euclidean", "dtw"],
               "modes": ["raw", "znorm"], "limit": None},
    "bench": {"sweep": "gamma", "values": None, "repeat": 1},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- argument plumbing -----------------------------------------------------

def _flag(p, name, **kw):
    p.add_argument("--" + name.replace("_", "-"), dest=name, default=argparse.SUPPRESS, **kw)


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v]


def _str_list(text):
    return [v for v in str(text).split(",") if v]


def _common(p):
    _flag(p, "config", help="JSON file with parameter defaults")
    _flag(p, "workers", type=int, help=f"thread cap (default ${WORKERS_ENV})")
    _flag(p, "out", help="write the result payload here")


def _index_flags(p):
    _flag(p, "min_length", type=int)
    _flag(p, "max_length", type=int)
    _flag(p, "segment_length", type=int)
    _flag(p, "alphabet", type=int)
    _flag(p, "gamma", type=int)
    _flag(p, "normalize", action="store_true")
    _flag(p, "leaf_capacity", type=int)
    _flag(p, "metric", choices=["euclidean", "dtw"])
    _flag(p, "dtw_radius", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="varlen", description="Variable-length subsequence search and mining.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic dataset (and optionally queries)")
    _common(g)
    _flag(g, "kind", choices=["random_walk", "sine", "planted"])
    for name in ("length", "seed", "pattern_length", "copies", "anomaly_length",
                 "anomaly_offset", "period", "queries", "query_min_length", "query_max_length",
                 "query_seed"):
        _flag(g, name, type=int)
    for name in ("noise_std", "anomaly_amplitude", "noise_fraction"):
        _flag(g, name, type=float)
    _flag(g, "queries_out")

    ix = sub.add_parser("index", help="index lifecycle")
    ixs = ix.add_subparsers(dest="action", parser_class=_Parser)
    b = ixs.add_parser("build", help="build and save an index")
    _common(b)
    _flag(b, "data")
    _index_flags(b)

    q = sub.add_parser("query", help="k-NN queries against a saved index")
    _common(q)
    _flag(q, "index")
    _flag(q, "data")
    _flag(q, "queries")
    _flag(q, "k", type=int)
    _flag(q, "approximate", action="store_true")
    _flag(q, "metric", choices=["euclidean", "dtw"])

    d = sub.add_parser("discover", help="variable-length motifs and discords")
    _common(d)
    _flag(d, "data")
    for name in ("series", "min_length", "max_length", "a", "b", "p"):
        _flag(d, name, type=int)
    _flag(d, "exclude_constant", action="store_true")
    _flag(d, "format", choices=["json", "csv"])

    v = sub.add_parser("verify", help="diff engines against brute-force oracles")
    _common(v)
    _flag(v, "data")
    _flag(v, "task", choices=["knn", "discover", "all"])
    _flag(v, "queries")
    _flag(v, "k", type=_int_list)
    _flag(v, "metrics", type=_str_list)
    _flag(v, "modes", type=_str_list)
    _flag(v, "limit", type=int)
    _index_flags(v)
    for name in ("series", "a", "b", "p"):
        _flag(v, name, type=int)
    _flag(v, "exclude_constant", action="store_true")

    be = sub.add_parser("bench", help="parameter sweeps as tidy CSV")
    _common(be)
    _flag(be, "data")
    _flag(be, "sweep", choices=["gamma", "range", "k", "m"])
    _flag(be, "values", type=_int_list)
    _flag(be, "repeat", type=int)
    _index_flags(be)
    for name in ("series", "a", "b", "p"):
        _flag(be, name, type=int)
    return ap


def resolve(command: str, ns: argparse.Namespace) -> dict:
    """Merge defaults, the config file and explicit flags (in rising precedence)."""
    given = vars(ns)
    cfg = {}
    groups = {"gen": ["gen"], "index": ["index"], "query": ["query"],
              "discover": ["discover"], "verify": ["index", "discover", "verify"],
              "bench": ["index", "discover", "bench"]}[command]
    for grp in groups:
        cfg.update(DEFAULTS[grp])
    if "config" in given:
        try:
            loaded = json.loads(Path(given["config"]).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {given['config']}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(loaded) - set(cfg) - {"data", "index", "queries", "out", "workers"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    cfg.update({k: v for k, v in given.items() if k not in ("command", "action", "config")})
    cfg["command"] = command
    return cfg


def _set_workers(cfg):
    workers = cfg.get("workers")
    if workers is None and os.environ.get(WORKERS_ENV):
        try:
            workers = int(os.environ[WORKERS_ENV])
        except ValueError:
            raise UsageError(f"{WORKERS_ENV} must be an integer") from None
    if workers is not None:
        import numba

        if workers < 1:
            raise UsageError("workers must be >= 1")
        numba.set_num_threads(min(workers, numba.config.NUMBA_NUM_THREADS))
    cfg["workers"] = workers


def _emit(cfg, payload: dict, summary: dict | None = None, text: str | None = None):
    """Write the deterministic payload to ``--out`` and echo config plus summary."""
    if text is None:
        # output location and thread count do not change results
        stable = {k: v for k, v in cfg.items() if k not in ("out", "workers")}
        body = json.dumps({"config": stable, **payload}, sort_keys=True, indent=1,
                          default=_jsonable) + "\n"
    else:
        body = text
    if cfg.get("out"):
        Path(cfg["out"]).write_text(body)
        out = {"config": cfg, **(summary or {})}
        print(json.dumps(out, sort_keys=True, default=_jsonable))
    elif text is not None:
        sys.stdout.write(text)
    else:
        print(json.dumps({"config": cfg, **payload, **(summary or {})}, sort_keys=True,
                         default=_jsonable))


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v).__name__}")


def _need(cfg, *keys):
    for key in keys:
        if not cfg.get(key):
            raise UsageError(f"{cfg['command']} needs --{key.replace('_', '-')}")


def _load(path):
    from .io import read_dataset

    if not Path(path).exists():
        raise UsageError(f"no such file: {path}")
    return read_dataset(path)


def _index_params(cfg) -> dict:
    return {"min_length": cfg["min_length"], "max_length": cfg["max_length"],
            "segment_length": cfg["segment_length"], "alphabet_size": cfg["alphabet"],
            "gamma": cfg["gamma"], "normalize": cfg["normalize"],
            "leaf_capacity": cfg["leaf_capacity"], "metric": cfg["metric"],
            "dtw_radius": cfg["dtw_radius"]}


def _series(collection, pos):
    if not 0 <= pos < len(collection):
        raise UsageError(f"series {pos} not in dataset of {len(collection)} series")
    return collection[pos]


# -- commands --------------------------------------------------------------

def cmd_gen(cfg):
    from .datagen import AnomalySpec, GenSpec, generate, make_queries, save_queries
    from .io import write_dataset

    if not cfg.get("out"):
        raise UsageError("gen needs --out")
    anomaly = None
    if cfg["anomaly_length"]:
        anomaly = AnomalySpec(cfg["anomaly_length"], cfg["anomaly_amplitude"],
                              cfg["anomaly_offset"])
    spec = GenSpec(cfg["kind"], cfg["length"], cfg["seed"], cfg["pattern_length"],
                   cfg["copies"], cfg["noise_std"], anomaly, cfg["period"])
    g = generate(spec)
    write_dataset(cfg["out"], [g.series])
    meta = {"spec": spec.to_dict(), "motif_offsets": g.motif_offsets,
            "anomaly_offset": g.anomaly_offset}
    Path(cfg["out"] + ".json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    if cfg["queries"]:
        if not cfg["queries_out"]:
            raise UsageError("--queries needs --queries-out")
        seed = cfg["seed"] if cfg["query_seed"] is None else cfg["query_seed"]
        qs = make_queries(g.series, cfg["queries"], cfg["query_min_length"],
                          cfg["query_max_length"], cfg["noise_fraction"], seed)
        save_queries(cfg["queries_out"], qs)
        meta["queries"] = qs.sidecar()
    print(json.dumps({"config": cfg, **meta}, sort_keys=True, default=_jsonable))
    return EXIT_OK


def cmd_index_build(cfg):
    from .ulisse import UlisseIndex
    from .ulisse.persist import save_index

    if not cfg.get("out"):
        raise UsageError("index build needs --out")
    _need(cfg, "data")
    data = _load(cfg["data"])
    index = UlisseIndex(**_index_params(cfg)).fit(data)
    save_index(cfg["out"], index)
    print(json.dumps({"config": cfg, "stats": index.stats()}, sort_keys=True,
                     default=_jsonable))
    return EXIT_OK


def cmd_query(cfg):
    from .datagen import load_queries
    from .ulisse.persist import load_index

    _need(cfg, "data", "index", "queries")
    data = _load(cfg["data"])
    index = load_index(cfg["index"], data)
    qs = load_queries(cfg["queries"])
    results, t0 = [], time.perf_counter()
    for q in qs.queries:
        r = index.query(q, k=cfg["k"], exact=not cfg["approximate"], metric=cfg["metric"])
        results.append(r.to_dict(counters=True))
    elapsed = time.perf_counter() - t0
    _emit(cfg, {"queries": results}, {"timings": {"total": elapsed}})
    return EXIT_OK


def cmd_discover(cfg):
    from .mad import discover_range
    from .results import discovery_rows, rows_to_csv

    _need(cfg, "data")
    d = _series(_load(cfg["data"]), cfg["series"])
    res = discover_range(d, cfg["min_length"], cfg["max_length"], cfg["a"], cfg["b"], cfg["p"],
                         cfg["exclude_constant"])
    counters = dict(res.counters)
    wall = counters.pop("wall_time")
    rows = discovery_rows(res.motifs, res.discords)
    if cfg["format"] == "csv":
        _emit(cfg, {}, {"counters": counters, "timings": {"total": wall}},
              text=rows_to_csv(rows))
    else:
        _emit(cfg, {"results": rows, "counters": counters}, {"timings": {"total": wall}})
    return EXIT_OK


def _same(a, b, tol=TOL) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol


def verify_knn(data, queries, cfg) -> dict:
    from .oracle import scan_knn
    from .ulisse import UlisseIndex

    diffs, checked = [], 0
    limit = cfg["limit"] or len(queries)
    lo, hi = cfg["min_length"], cfg["max_length"]
    usable = [q for q in queries[:limit] if lo <= len(q) <= hi]
    skipped = min(limit, len(queries)) - len(usable)
    for mode in cfg["modes"]:
        params = _index_params(cfg) | {"normalize": mode == "znorm"}
        index = UlisseIndex(**params).fit(data)
        for metric in cfg["metrics"]:
            for k in cfg["k"]:
                for qi, q in enumerate(usable):
                    got = index.query(q, k=k, metric=metric)
                    exp = scan_knn(data, q, k, metric=metric, normalize=mode == "znorm",
                                   dtw_radius=cfg["dtw_radius"]).result
                    checked += 1
                    cell = {"mode": mode, "metric": metric, "k": k, "query": qi}
                    gs = [(r.series_id, r.offset) for r in got.refs]
                    es = [(r.series_id, r.offset) for r in exp.refs]
                    bad = len(gs) != len(es) or any(
                        g != e or not _same(gd, ed)
                        for g, e, gd, ed in zip(gs, es, got.distances, exp.distances))
                    if bad:
                        diffs.append(cell | {"engine": list(zip(gs, got.distances.tolist())),
                                             "oracle": list(zip(es, exp.distances.tolist()))})
    return {"task": "knn", "checked": checked, "skipped_queries": skipped, "diffs": diffs}


def verify_discover(d, cfg) -> dict:
    from .mad import discover_range
    from .oracle import compare_discovery

    res = discover_range(d, cfg["min_length"], cfg["max_length"], cfg["a"], cfg["b"], cfg["p"],
                         cfg["exclude_constant"])
    lengths = range(cfg["min_length"], cfg["max_length"] + 1)
    diffs, ties = compare_discovery(res, d, lengths, cfg["a"], cfg["b"],
                                    cfg["exclude_constant"])
    counters = {k: v for k, v in res.counters.items() if k != "wall_time"}
    return {"task": "discover", "checked": len(lengths) * (1 + cfg["b"]),
            "diffs": diffs, "tie_cells": ties, "counters": counters}


def cmd_verify(cfg):
    _need(cfg, "data")
    data = _load(cfg["data"])
    reports = []
    t0 = time.perf_counter()
    if cfg["task"] in ("knn", "all"):
        if cfg.get("queries"):
            from .datagen import load_queries

            queries = load_queries(cfg["queries"]).queries
        elif cfg["task"] == "knn":
            raise UsageError("verify --task knn needs --queries")
        else:
            queries = None
        if queries is not None:
            reports.append(verify_knn(data, queries, cfg))
    if cfg["task"] in ("discover", "all"):
        reports.append(verify_discover(_series(data, cfg["series"]), cfg))
    total = sum(len(r["diffs"]) for r in reports)
    payload = {"reports": reports, "mismatches": total}
    _emit(cfg, payload, {"timings": {"total": time.perf_counter() - t0}})
    if total:
        return EXIT_MISMATCH
    return EXIT_OK


def cmd_bench(cfg):
    from .mad import discover_range
    from .ulisse import UlisseIndex

    _need(cfg, "data")
    data = _load(cfg["data"])
    sweep = cfg["sweep"]
    lmin, lmax = cfg["min_length"], cfg["max_length"]
    values = cfg["values"]
    rows = []
    if sweep == "gamma":
        span = lmax - lmin
        values = values if values is not None else [0, span // 2, span]
        for v in values:
            best = math.inf
            for _ in range(cfg["repeat"]):
                index = UlisseIndex(**(_index_params(cfg) | {"gamma": v})).fit(data)
                best = min(best, index.build_time_)
            st = index.stats()
            rows.append({"parameter": "gamma", "value": v, "time": best,
                         "envelopes": st["envelopes"],
                         "expected_envelopes": st["expected_envelopes"], "nodes": st["nodes"]})
    else:
        d = _series(data, cfg["series"])
        if sweep == "range":
            values = values if values is not None else [0, 8, 16, 32]
            runs = [(v, dict(min_length=lmin, max_length=lmin + v, a=cfg["a"], b=cfg["b"]))
                    for v in values]
        elif sweep == "k":
            values = values if values is not None else [1, 4, 8]
            runs = [(v, dict(min_length=lmin, max_length=lmax, a=v, b=1, motifs=False))
                    for v in values]
        else:
            values = values if values is not None else [1, 2, 3]
            runs = [(v, dict(min_length=lmin, max_length=lmax, a=cfg["a"], b=v, motifs=False))
                    for v in values]
        for v, kw in runs:
            best, res = math.inf, None
            for _ in range(cfg["repeat"]):
                res = discover_range(d, p=cfg["p"], **kw)
                best = min(best, res.counters["wall_time"])
            c = res.counters
            rows.append({"parameter": sweep, "value": v, "time": best,
                         "full_profiles": c["full_profiles"],
                         "profiles_recomputed": c["profiles_recomputed"],
                         "naive_profiles": c["naive_profiles"],
                         "true_distances": c["true_distances"],
                         "lb_evaluations": c["lb_evaluations"]})
    import csv
    import io

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if cfg.get("out"):
        Path(cfg["out"]).write_text(buf.getvalue())
        print(json.dumps({"config": cfg, "rows": rows}, sort_keys=True, default=_jsonable))
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "index": cmd_index_build, "query": cmd_query,
            "discover": cmd_discover, "verify": cmd_verify, "bench": cmd_bench}


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": {"type": kind, "message": message,
                                           "exit_code": code}}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        if ns.command is None:
            raise UsageError("missing subcommand")
        if ns.command == "index" and getattr(ns, "action", None) != "build":
            raise UsageError("expected: index build")
        cfg = resolve(ns.command, ns)
        _set_workers(cfg)
        return COMMANDS[ns.command](cfg)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except Exception as exc:  # noqa: BLE001 - every failure maps to one exit code
        return _fail(EXIT_FAILURE, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
