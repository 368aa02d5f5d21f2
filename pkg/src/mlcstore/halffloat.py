"""Bit-level model of IEEE-754 half-precision words.

A half word is handled as a plain integer in ``[0, 0xFFFF]`` (or a numpy
``uint16`` array). Bits are numbered from the most significant end: bit 0 is
the sign, bits 1-5 the exponent and bits 6-15 the mantissa. A word is stored
in eight 2-bit MLC cells; cell ``k`` holds bits ``(2k, 2k+1)``.
"""

from __future__ import annotations

import math
from enum import IntEnum

import numpy as np

__all__ = [
    "CellPattern",
    "real_to_half",
    "reals_to_halves",
    "half_to_real",
    "halves_to_reals",
    "cells",
    "cell_array",
    "from_cells",
    "bit",
    "bit_mask",
    "to_pairs",
    "from_pairs",
    "ulp",
    "is_finite",
]

SIGN_MASK = 0x8000
EXP_MSB_MASK = 0x4000  # bit 1, unused by any value with |v| < 2
EXP_MASK = 0x7C00
MANT_MASK = 0x03FF
EXP_BIAS = 15
N_CELLS = 8


class CellPattern(IntEnum):
    """Content of one 2-bit cell; value is the 2-bit integer it stores."""

    P00 = 0b00
    P01 = 0b01
    P10 = 0b10
    P11 = 0b11

    @property
    def stable(self) -> bool:
        # one programming step: the base states
        return self in (CellPattern.P00, CellPattern.P11)

    @property
    def intermediate(self) -> bool:
        return not self.stable

    def __str__(self):
        return format(int(self), "02b")


def bit_mask(position: int) -> int:
    """Integer mask for bit ``position`` (0 = most significant)."""
    if not 0 <= position < 16:
        raise IndexError(f"bit position {position} outside 0..15")
    return 1 << (15 - position)


def bit(h, position: int):
    return (h >> (15 - position)) & 1


def real_to_half(x: float) -> int:
    """Nearest half word to ``x``, ties to even.

    Raises ``OverflowError`` when ``x`` rounds to infinity and ``ValueError``
    for non-finite input.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot convert non-finite value {x!r} to a weight")
    with np.errstate(over="ignore"):
        h = np.float16(x)
    if np.isinf(h):
        raise OverflowError(f"{x!r} is out of half-precision range")
    return int(h.view(np.uint16))


def reals_to_halves(values) -> np.ndarray:
    """Vectorised :func:`real_to_half`; returns a ``uint16`` array."""
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("cannot convert non-finite values to weights")
    with np.errstate(over="ignore"):
        h = arr.astype(np.float16)
    if np.any(np.isinf(h)):
        raise OverflowError("value out of half-precision range")
    return h.view(np.uint16)


def half_to_real(h: int) -> float:
    """Exact value of half word ``h``. NaN words give ``math.nan``."""
    h = int(h)
    if not 0 <= h <= 0xFFFF:
        raise ValueError(f"{h:#x} is not a 16-bit word")
    sign = -1.0 if h & SIGN_MASK else 1.0
    e = (h & EXP_MASK) >> 10
    m = h & MANT_MASK
    if e == 0x1F:
        return math.nan if m else sign * math.inf
    if e == 0:
        return sign * math.ldexp(m, 1 - EXP_BIAS - 10)
    return sign * math.ldexp(m | 0x400, e - EXP_BIAS - 10)


def halves_to_reals(words) -> np.ndarray:
    """Vectorised :func:`half_to_real`, returns float64."""
    return np.asarray(words, dtype=np.uint16).view(np.float16).astype(np.float64)


def is_finite(h):
    return (h & EXP_MASK) != EXP_MASK


def ulp(h: int) -> float:
    """Spacing of the binade containing finite word ``h``."""
    e = (int(h) & EXP_MASK) >> 10
    if e == 0x1F:
        raise ValueError("ulp of a non-finite word")
    return math.ldexp(1.0, max(e, 1) - EXP_BIAS - 10)


def cells(h: int) -> list[CellPattern]:
    """The eight cells of ``h``, most significant pair first."""
    h = int(h)
    return [CellPattern((h >> (14 - 2 * k)) & 0b11) for k in range(N_CELLS)]


def cell_array(words) -> np.ndarray:
    """``(n, 8)`` array of cell values (0..3) for an array of words."""
    w = np.asarray(words, dtype=np.uint16).reshape(-1, 1)
    shifts = np.arange(14, -1, -2, dtype=np.uint16)
    return ((w >> shifts) & 0b11).astype(np.uint8)


def from_cells(patterns) -> int:
    patterns = list(patterns)
    if len(patterns) != N_CELLS:
        raise ValueError(f"expected {N_CELLS} cells, got {len(patterns)}")
    h = 0
    for p in patterns:
        h = (h << 2) | int(CellPattern(p))
    return h


def to_pairs(h: int) -> str:
    """Render ``h`` as space-separated cell pairs, e.g. ``"00 01 11 ..."``."""
    return " ".join(str(c) for c in cells(h))


def from_pairs(text: str) -> int:
    bits = text.replace(" ", "")
    if len(bits) != 16 or set(bits) - {"0", "1"}:
        raise ValueError(f"not a 16-bit pair string: {text!r}")
    return int(bits, 2)
