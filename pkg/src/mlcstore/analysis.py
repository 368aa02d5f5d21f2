"""Experiment drivers: pattern census, bit-flip SSE sweep, energy comparison.

Each driver returns plain records; the ``write_*_csv`` helpers serialise them
with a fixed header and column order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .codec import GRANULARITIES, SYSTEMS, encode_buffer
from .halffloat import cell_array, reals_to_halves
from .memdevice import CostTable, charge, default_cost_table

__all__ = [
    "PatternCensus",
    "SseSweep",
    "EnergyRow",
    "uniform_weights",
    "system_buffers",
    "census",
    "sse_sweep",
    "energy_comparison",
    "write_census_csv",
    "write_sse_csv",
    "write_energy_csv",
]

BASELINE = "baseline"


def granularity_label(g: int) -> str:
    return f"granularity_{g}"


@dataclass(frozen=True)
class PatternCensus:
    system: str
    p00: int
    p01: int
    p10: int
    p11: int

    @property
    def total(self) -> int:
        return self.p00 + self.p01 + self.p10 + self.p11

    @property
    def stable(self) -> int:
        return self.p00 + self.p11

    @property
    def stable_fraction(self) -> float:
        return self.stable / self.total if self.total else 0.0


@dataclass(frozen=True)
class SseSweep:
    mean_sse: np.ndarray  # per bit position, 0 = sign
    overflow: np.ndarray  # flips giving inf/NaN, excluded from the mean
    n: int
    seed: int


@dataclass(frozen=True)
class EnergyRow:
    system: str
    read_nj: float
    write_nj: float
    read_cycles: float
    write_cycles: float
    delta_read_pct: float
    delta_write_pct: float


def uniform_weights(n: int, seed: int) -> np.ndarray:
    """``n`` half words drawn uniformly from (-1, 1)."""
    rng = np.random.default_rng(seed)
    return reals_to_halves(rng.uniform(-1.0, 1.0, n))


def system_buffers(weights, granularities: Iterable[int] = GRANULARITIES):
    """Yield ``(label, buffer)``: raw baseline first, then hybrid per granularity."""
    weights = np.asarray(weights, dtype=np.uint16)
    yield BASELINE, encode_buffer(weights, 1, SYSTEMS["unprotected"])
    for g in sorted(set(granularities)):
        yield granularity_label(g), encode_buffer(weights, g, SYSTEMS["hybrid"])


def census(weights, granularities: Iterable[int] = GRANULARITIES) -> list[PatternCensus]:
    out = []
    for label, buf in system_buffers(weights, granularities):
        hist = np.bincount(cell_array(buf.words).ravel(), minlength=4)
        out.append(PatternCensus(label, *(int(x) for x in hist)))
    return out


def sse_sweep(n: int, seed: int) -> SseSweep:
    """Squared error caused by flipping each bit of uniform(-1, 1) halves."""
    if n < 1:
        raise ValueError("sample count must be at least 1")
    words = uniform_weights(n, seed)
    ref = words.view(np.float16).astype(np.float64)
    mean = np.zeros(16)
    overflow = np.zeros(16, dtype=np.int64)
    for pos in range(16):
        flipped = (words ^ np.uint16(1 << (15 - pos))).view(np.float16).astype(np.float64)
        finite = np.isfinite(flipped)
        overflow[pos] = n - np.count_nonzero(finite)
        sq = (flipped[finite] - ref[finite]) ** 2
        # np.sum is pairwise, so the mean does not depend on accumulation order
        mean[pos] = np.sum(sq) / len(sq) if len(sq) else np.nan
    return SseSweep(mean, overflow, n, seed)


def energy_comparison(weights, granularities: Iterable[int] = GRANULARITIES,
                      costs: CostTable | None = None) -> list[EnergyRow]:
    """Energy per system relative to raw storage.

    Negative deltas are savings.
    """
    costs = costs or default_cost_table()
    reports = [(label, charge(buf, costs)) for label, buf in system_buffers(weights, granularities)]
    base = reports[0][1]

    def pct(v, b):
        return 100.0 * (v - b) / b if b else 0.0

    return [EnergyRow(label, r.read_energy, r.write_energy, r.read_cycles, r.write_cycles,
                      pct(r.read_energy, base.read_energy), pct(r.write_energy, base.write_energy))
            for label, r in reports]


def _fmt(x) -> str:
    # repr gives the shortest round-trip form, '.' decimal regardless of locale
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write(fp, header: Sequence[str], rows):
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])


def write_census_csv(rows: Iterable[PatternCensus], fp):
    _write(fp, ("system", "p00", "p01", "p10", "p11"),
           ((r.system, r.p00, r.p01, r.p10, r.p11) for r in rows))


def write_sse_csv(sweep: SseSweep, fp):
    _write(fp, ("position", "mean_sse", "overflow_count"),
           ((pos, float(sweep.mean_sse[pos]), int(sweep.overflow[pos])) for pos in range(16)))


def write_energy_csv(rows: Iterable[EnergyRow], fp):
    _write(fp, ("system", "read_nj", "write_nj", "read_cycles", "write_cycles",
                "delta_read_pct", "delta_write_pct"),
           ((r.system, r.read_nj, r.write_nj, r.read_cycles, r.write_cycles,
             r.delta_read_pct, r.delta_write_pct) for r in rows))
