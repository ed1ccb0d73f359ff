"""Seeded synthetic series and noisy queries.

All randomness comes from numpy's PCG64 bit generator seeded with the
``GenSpec`` integer seed, so a given ``GenSpec`` reproduces bit-for-bit.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .io import read_dataset, write_dataset
from .series import DataSeries, build_series

__all__ = ["AnomalySpec", "GenSpec", "Generated", "QuerySet", "generate", "make_queries",
           "save_queries", "load_queries", "rng"]

KINDS = ("random_walk", "sine", "planted")


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class AnomalySpec:
    """Additive burst of ``length`` points of height ``amplitude`` (steps have unit std)."""

    length: int = 4
    amplitude: float = 10.0
    offset: int | None = None


@dataclass(frozen=True)
class GenSpec:
    kind: str = "random_walk"
    length: int = 10_000
    seed: int = 0
    pattern_length: int = 0
    copies: int = 2
    noise_std: float = 0.0
    anomaly: AnomalySpec | None = None
    period: int = 64

    @classmethod
    def from_dict(cls, data: dict) -> "GenSpec":
        data = dict(data)
        if data.get("anomaly") is not None:
            data["anomaly"] = AnomalySpec(**data["anomaly"])
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Generated:
    series: DataSeries
    spec: GenSpec
    motif_offsets: list[int] = field(default_factory=list)
    anomaly_offset: int | None = None


def _place(g: np.random.Generator, n: int, sizes: list[int], fixed: dict[int, int]) -> list[int]:
    """Random non-overlapping starts for blocks of ``sizes`` (indices in ``fixed`` are pinned)."""
    taken: list[tuple[int, int]] = []
    for i, off in fixed.items():
        if off < 0 or off + sizes[i] > n:
            raise ValueError(f"block at {off} of size {sizes[i]} does not fit in {n}")
        taken.append((off, off + sizes[i]))
    out: list[int | None] = [fixed.get(i) for i in range(len(sizes))]
    for i, size in enumerate(sizes):
        if out[i] is not None:
            continue
        free = _free_starts(n, size, taken)
        if free.size == 0:
            raise ValueError(f"cannot fit {len(sizes)} non-overlapping plants in {n} points")
        off = int(free[g.integers(free.size)])
        out[i] = off
        taken.append((off, off + size))
    spans = sorted((o, o + s) for o, s in zip(out, sizes))
    for (a0, a1), (b0, _) in zip(spans, spans[1:]):
        if b0 < a1:
            raise ValueError(f"plants overlap at offset {b0}")
    return [int(o) for o in out]


def _free_starts(n, size, taken):
    ok = np.ones(max(n - size + 1, 0), dtype=bool)
    for a, b in taken:
        ok[max(a - size + 1, 0):b] = False
    return np.flatnonzero(ok)


def generate(spec: GenSpec) -> Generated:
    if spec.kind not in KINDS:
        raise ValueError(f"unknown kind {spec.kind!r}; expected one of {KINDS}")
    if spec.length < 1:
        raise ValueError("length must be >= 1")
    g = rng(spec.seed)
    n = spec.length
    if spec.kind == "sine":
        t = np.arange(n)
        values = np.sin(2 * np.pi * t / spec.period)
        if spec.noise_std:
            values = values + g.normal(0.0, spec.noise_std, n)
        return Generated(build_series(values, 0), spec)

    steps = g.standard_normal(n)
    motif_offsets: list[int] = []
    anomaly_offset = None
    if spec.kind == "planted":
        P = spec.pattern_length
        if P < 2 or spec.copies < 2:
            raise ValueError("planted series need pattern_length >= 2 and copies >= 2")
        sizes = [P] * spec.copies
        fixed = {}
        if spec.anomaly is not None:
            sizes.append(spec.anomaly.length)
            if spec.anomaly.offset is not None:
                fixed[len(sizes) - 1] = spec.anomaly.offset
        starts = _place(g, n, sizes, fixed)
        motif_offsets = sorted(starts[:spec.copies])
        pattern = g.standard_normal(P)
        for o in motif_offsets:
            # identical increments give identical shapes up to a level shift
            steps[o + 1:o + P] = pattern[1:]
        values = np.cumsum(steps)
        if spec.noise_std:
            for o in motif_offsets:
                values[o:o + P] += g.normal(0.0, spec.noise_std, P)
        if spec.anomaly is not None:
            anomaly_offset = starts[-1]
            A = spec.anomaly
            values[anomaly_offset:anomaly_offset + A.length] += A.amplitude
    else:
        values = np.cumsum(steps)
    return Generated(build_series(values, 0), spec, motif_offsets, anomaly_offset)


@dataclass
class QuerySet:
    queries: list[np.ndarray]
    offsets: list[int]
    lengths: list[int]
    series_id: int
    seed: int
    noise_fraction: float

    def __len__(self):
        return len(self.queries)

    def sidecar(self) -> dict:
        return {"series_id": self.series_id, "offsets": self.offsets, "lengths": self.lengths,
                "seed": self.seed, "noise_fraction": self.noise_fraction}


def make_queries(d: DataSeries, n: int = 100, min_length: int = 128, max_length: int = 256,
                 noise_fraction: float = 0.1, seed: int = 0) -> QuerySet:
    """``n`` subsequences at uniform offsets and lengths plus Gaussian noise."""
    if not 1 <= min_length <= max_length <= len(d):
        raise ValueError(f"invalid length range [{min_length}, {max_length}] for series of "
                         f"length {len(d)}")
    if noise_fraction < 0:
        raise ValueError("noise_fraction must be >= 0")
    g = rng(seed)
    scale = noise_fraction * float(np.std(d.values))
    queries, offsets, lengths = [], [], []
    for _ in range(n):
        m = int(g.integers(min_length, max_length + 1))
        o = int(g.integers(0, len(d) - m + 1))
        q = d.values[o:o + m].copy()
        if scale > 0:
            q += g.normal(0.0, scale, m)
        queries.append(q)
        offsets.append(o)
        lengths.append(m)
    return QuerySet(queries, offsets, lengths, d.id, seed, noise_fraction)


def save_queries(path, qs: QuerySet) -> Path:
    path = Path(path)
    write_dataset(path, [build_series(q, i) for i, q in enumerate(qs.queries)])
    Path(str(path) + ".json").write_text(json.dumps(qs.sidecar(), indent=2, sort_keys=True))
    return path


def load_queries(path) -> QuerySet:
    path = Path(path)
    series = read_dataset(path)
    side = json.loads(Path(str(path) + ".json").read_text())
    return QuerySet([s.values for s in series], side["offsets"], side["lengths"],
                    side["series_id"], side["seed"], side["noise_fraction"])
