"""Content-dependent MLC STT-RAM cost model and soft-error injection.

Cells holding ``00``/``11`` are programmed in one step and treated as immune
to soft errors. ``01``/``10`` need a second step, cost more, and are the only
cells the fault injector touches.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .codec import EncodedBuffer
from .halffloat import bit_mask, cell_array

__all__ = [
    "CostTable",
    "FaultSpec",
    "EnergyReport",
    "default_cost_table",
    "load_cost_table",
    "charge",
    "charge_words",
    "inject_faults",
    "flip_bit",
    "cell_uniforms",
]


@dataclass(frozen=True)
class CostTable:
    """Per-cell access costs; energies in nJ, latencies in cycles."""

    read_energy_stable: float
    read_energy_intermediate: float
    write_energy_stable: float
    write_energy_intermediate: float
    read_latency_stable: float
    read_latency_intermediate: float
    write_latency_stable: float
    write_latency_intermediate: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{f.name} must be a non-negative number, got {v}")
        for metric in ("read_energy", "write_energy", "read_latency", "write_latency"):
            if getattr(self, metric + "_intermediate") < getattr(self, metric + "_stable"):
                raise ValueError(f"{metric}: intermediate cost below stable cost")


def default_cost_table() -> CostTable:
    # Hybrid column of the published cost table: the smaller ("soft") value of
    # each pair is charged to stable cells, the larger ("hard") to the rest.
    return CostTable(
        read_energy_stable=0.427,
        read_energy_intermediate=0.579,
        write_energy_stable=1.084,
        write_energy_intermediate=2.653,
        read_latency_stable=14,
        read_latency_intermediate=20,
        write_latency_stable=50,
        write_latency_intermediate=95,
    )


def load_cost_table(path) -> CostTable:
    """Read a ``key=value`` cost file. Missing keys keep their defaults.

    Blank lines and ``#`` comments are skipped; unknown keys are an error.
    """
    values = asdict(default_cost_table())
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep or key not in values:
            raise ValueError(f"{path}:{lineno}: expected one of {sorted(values)}=<number>")
        try:
            values[key] = float(val)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: {val.strip()!r} is not a number") from None
    return CostTable(**values)


@dataclass(frozen=True)
class FaultSpec:
    p: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"fault probability {self.p} outside [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class EnergyReport:
    read_energy: float = 0.0
    write_energy: float = 0.0
    read_cycles: float = 0.0
    write_cycles: float = 0.0
    cell_histogram: tuple = (0, 0, 0, 0)  # counts of 00, 01, 10, 11

    @property
    def stable_cells(self) -> int:
        return self.cell_histogram[0] + self.cell_histogram[3]

    @property
    def intermediate_cells(self) -> int:
        return self.cell_histogram[1] + self.cell_histogram[2]

    def __add__(self, other):
        return EnergyReport(
            self.read_energy + other.read_energy,
            self.write_energy + other.write_energy,
            self.read_cycles + other.read_cycles,
            self.write_cycles + other.write_cycles,
            tuple(a + b for a, b in zip(self.cell_histogram, other.cell_histogram)),
        )


def charge_words(words, costs: CostTable) -> EnergyReport:
    """Cost of reading and writing every cell of ``words`` once."""
    c = cell_array(words)
    hist = np.bincount(c.ravel(), minlength=4)
    n_stable = int(hist[0] + hist[3])
    n_inter = int(hist[1] + hist[2])
    return EnergyReport(
        read_energy=n_stable * costs.read_energy_stable + n_inter * costs.read_energy_intermediate,
        write_energy=n_stable * costs.write_energy_stable + n_inter * costs.write_energy_intermediate,
        read_cycles=n_stable * costs.read_latency_stable + n_inter * costs.read_latency_intermediate,
        write_cycles=n_stable * costs.write_latency_stable + n_inter * costs.write_latency_intermediate,
        cell_histogram=tuple(int(x) for x in hist),
    )


def charge(buf: EncodedBuffer, costs: CostTable | None = None) -> EnergyReport:
    """Energy/latency of the buffer's weight cells; metadata is not charged."""
    return charge_words(buf.words, costs or default_cost_table())


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_DECIDE_STREAM = np.uint64(0xD1B54A32D192ED03)
_CHOICE_STREAM = np.uint64(0x8CB92BA72F3D8DD7)


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finaliser
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _hash_cells(seed: int, stream: np.uint64, index: np.ndarray) -> np.ndarray:
    key = _mix64(np.array([seed], dtype=np.uint64) ^ stream)
    return _mix64(key + (index.astype(np.uint64) + np.uint64(1)) * _GOLDEN)


def cell_uniforms(seed: int, index) -> np.ndarray:
    """Uniform [0, 1) draw for each global cell index, a pure function of
    ``(seed, index)``."""
    h = _hash_cells(seed, _DECIDE_STREAM, np.asarray(index))
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _inject_range(words: np.ndarray, start: int, spec: FaultSpec) -> np.ndarray:
    c = cell_array(words)
    inter = (c == 0b01) | (c == 0b10)
    word_idx, cell_idx = np.nonzero(inter)
    if len(word_idx) == 0 or spec.p == 0:
        return words.copy()
    gidx = (word_idx.astype(np.int64) + start) * 8 + cell_idx
    hit = cell_uniforms(spec.seed, gidx) < spec.p
    choice = _hash_cells(spec.seed, _CHOICE_STREAM, gidx[hit]) & np.uint64(1)
    # bit 2k is the cell's high bit, 2k+1 its low bit
    pos = 2 * cell_idx[hit] + choice.astype(np.int64)
    masks = (1 << (15 - pos)).astype(np.uint16)
    out = words.copy()
    np.bitwise_xor.at(out, word_idx[hit], masks)
    return out


def inject_faults(buf: EncodedBuffer, spec: FaultSpec, workers: int = 1,
                  chunk: int = 1 << 16) -> EncodedBuffer:
    """Return a copy of ``buf`` with soft errors applied.

    Each ``01``/``10`` cell flips exactly one of its bits, chosen uniformly,
    with probability ``spec.p``. Draws depend only on the seed and the global
    cell index (word index * 8 + cell), so any chunking or worker count gives
    the same result.
    """
    words = buf.words
    starts = range(0, len(words), chunk)
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda s: _inject_range(words[s:s + chunk], s, spec), starts))
    else:
        parts = [_inject_range(words[s:s + chunk], s, spec) for s in starts]
    out = np.concatenate(parts) if parts else words.copy()
    return buf.replace_words(out)


def flip_bit(h: int, position: int) -> int:
    """Toggle bit ``position`` (0 = sign) of half word ``h``."""
    return int(h) ^ bit_mask(position)
