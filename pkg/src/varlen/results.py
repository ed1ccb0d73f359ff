"""Tabular output shared by the engine, the oracles and the CLI."""

from __future__ import annotations

import csv
import io
import json
import math

__all__ = ["COLUMNS", "discovery_rows", "oracle_rows", "rows_to_csv", "rows_to_json"]

COLUMNS = ("length", "kind", "rank", "m", "offset_a", "offset_b", "distance",
           "normalized_distance")


def _row(length, kind, rank, m, a, b, dist):
    return {"length": int(length), "kind": kind, "rank": int(rank), "m": int(m),
            "offset_a": int(a), "offset_b": None if b is None else int(b),
            "distance": float(dist), "normalized_distance": float(dist) / math.sqrt(length)}


def discovery_rows(motifs, discords) -> list[dict]:
    """Rows for a ``MotifResult`` and ``DiscordGrid`` (either may be ``None``)."""
    rows = []
    lengths = sorted(set(motifs.entries if motifs else ()) | set(discords.lengths() if discords
                                                                  else ()))
    for L in lengths:
        if motifs and L in motifs.entries:
            e = motifs[L]
            rows.append(_row(L, "motif", 1, 1, e.offsets[0], e.offsets[1], e.distance))
        if discords:
            for m, ranked in discords.at(L).items():
                for rank, (off, dist) in enumerate(ranked, start=1):
                    rows.append(_row(L, "discord", rank, m, off, None, dist))
    return rows


def oracle_rows(motifs: dict, discords: dict) -> list[dict]:
    """Rows from oracle outputs: ``{L: ((a, b), d)}`` and ``{L: {m: [(off, d), ...]}}``."""
    rows = []
    for L in sorted(set(motifs) | set(discords)):
        if L in motifs:
            (a, b), dist = motifs[L]
            rows.append(_row(L, "motif", 1, 1, a, b, dist))
        for m, ranked in sorted(discords.get(L, {}).items()):
            for rank, (off, dist) in enumerate(ranked, start=1):
                rows.append(_row(L, "discord", rank, m, off, None, dist))
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r[k] is None else repr(r[k]) if isinstance(r[k], float) else r[k])
                    for k in COLUMNS})
    return buf.getvalue()


def rows_to_json(rows: list[dict], **extra) -> str:
    return json.dumps({"results": rows, **extra}, sort_keys=True)
