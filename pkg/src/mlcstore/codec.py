"""Sign duplication, content reformation schemes and grouped buffers.

Every weight in ``(-2, 2)`` leaves the exponent MSB (bit 1) clear, so the sign
can be copied into it. The leading cell then always holds ``00`` or ``11``.
On top of that each group of ``granularity`` weights is stored with one of
three reformations, whichever leaves the most stable cells:

* ``NO_CHANGE`` - stored as is.
* ``ROTATE``    - bits 2..15 rotated right by one; the sign pair stays put.
* ``ROUND``     - low nibble snapped to the nearest of 0000/0011/1100/1111.

The chosen scheme is kept as one tri-level metadata symbol per group.

Word-level functions accept a Python ``int`` or a ``uint16`` array.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .halffloat import EXP_MSB_MASK, SIGN_MASK, cell_array

__all__ = [
    "DomainError",
    "FormatError",
    "Scheme",
    "SYSTEMS",
    "GRANULARITIES",
    "DecodeStats",
    "EncodedGroup",
    "EncodedBuffer",
    "duplicate_sign",
    "strip_sign_duplicate",
    "rotate_payload_right",
    "rotate_payload_left",
    "round_tail",
    "ROUND_TABLE",
    "stable_count",
    "apply_scheme",
    "unapply_scheme",
    "select_scheme",
    "encode_buffer",
    "decode_buffer",
    "metadata_overhead",
]

GRANULARITIES = (1, 2, 4, 8, 16)
UNPROTECTED = 0xFF
PAYLOAD_MASK = 0x3FFF
MAGIC = b"MLCW"
VERSION = 1
_HEADER = struct.Struct("<4sBBI")


class DomainError(ValueError):
    """A word cannot be stored: bit 1 is set (|w| >= 2, inf or NaN)."""


class FormatError(ValueError):
    """Malformed encoded-buffer file."""


class Scheme(IntEnum):
    NO_CHANGE = 0
    ROTATE = 1
    ROUND = 2


ALL_SCHEMES = frozenset(Scheme)

# Storage systems compared in the experiments. An empty set means raw words,
# no sign duplication and no metadata.
SYSTEMS: dict[str, frozenset] = {
    "unprotected": frozenset(),
    "round": frozenset({Scheme.NO_CHANGE, Scheme.ROUND}),
    "rotate": frozenset({Scheme.NO_CHANGE, Scheme.ROTATE}),
    "hybrid": ALL_SCHEMES,
}

# low nibble -> MLC-friendly nibble
ROUND_TABLE = (
    0b0000, 0b0000, 0b0000, 0b0000,
    0b0011, 0b0011, 0b0011, 0b0011,
    0b1100, 0b1100, 0b1100, 0b1100,
    0b1111, 0b1111, 0b1111, 0b1111,
)
_ROUND_LUT = np.array(ROUND_TABLE, dtype=np.uint16)


def _as_word(h, out):
    # keep scalars as int, arrays as uint16
    if isinstance(h, (int, np.integer)):
        return int(out)
    return np.asarray(out, dtype=np.uint16)


@dataclass
class DecodeStats:
    """Diagnostics gathered while decoding; merge with ``+``."""

    sign_mismatches: int = 0

    def __add__(self, other):
        return DecodeStats(self.sign_mismatches + other.sign_mismatches)

    def __iadd__(self, other):
        self.sign_mismatches += other.sign_mismatches
        return self


def _require_unused_bit(h):
    bad = np.asarray(h) & EXP_MSB_MASK
    if np.any(bad):
        if np.ndim(bad):
            idx = int(np.flatnonzero(bad)[0])
            raise DomainError(f"weight #{idx} ({int(np.ravel(h)[idx]):#06x}) "
                              "has bit 1 set; not in (-2, 2)")
        raise DomainError(f"word {int(h):#06x} has bit 1 set; not in (-2, 2)")


def duplicate_sign(h):
    """Copy the sign bit into bit 1."""
    _require_unused_bit(h)
    return _as_word(h, h | ((h & SIGN_MASK) >> 1))


def strip_sign_duplicate(h, stats: DecodeStats | None = None):
    """Split a stored word into ``(sign, word)`` with bit 1 cleared.

    If the two sign copies disagree bit 0 wins and ``stats`` is bumped.
    """
    sign = (h >> 15) & 1
    mismatch = sign != ((h >> 14) & 1)
    if stats is not None:
        stats.sign_mismatches += int(np.count_nonzero(mismatch))
    word = h & (0xFFFF ^ EXP_MSB_MASK)
    if isinstance(h, (int, np.integer)):
        return int(sign), int(word)
    return sign.astype(np.uint8), np.asarray(word, dtype=np.uint16)


def rotate_payload_right(h):
    """Rotate bits 2..15 right by one position; bit 15 wraps to bit 2."""
    p = h & PAYLOAD_MASK
    p = (p >> 1) | ((p & 1) << 13)
    return _as_word(h, (h & (0xFFFF ^ PAYLOAD_MASK)) | p)


def rotate_payload_left(h):
    p = h & PAYLOAD_MASK
    p = ((p << 1) & PAYLOAD_MASK) | (p >> 13)
    return _as_word(h, (h & (0xFFFF ^ PAYLOAD_MASK)) | p)


def round_tail(h):
    """Replace the low nibble by its entry in :data:`ROUND_TABLE`."""
    if isinstance(h, (int, np.integer)):
        return (int(h) & 0xFFF0) | ROUND_TABLE[int(h) & 0xF]
    h = np.asarray(h, dtype=np.uint16)
    return (h & np.uint16(0xFFF0)) | _ROUND_LUT[h & 0xF]


def stable_count(h):
    """Number of cells holding ``00`` or ``11``."""
    c = cell_array(h)
    n = np.count_nonzero((c == 0b00) | (c == 0b11), axis=1)
    if isinstance(h, (int, np.integer)):
        return int(n[0])
    return n.reshape(np.shape(h))


def apply_scheme(h, scheme: Scheme, protect_sign: bool = True):
    """Stored form of weight word ``h`` under ``scheme``."""
    if protect_sign:
        w = duplicate_sign(h)
    else:
        _require_unused_bit(h)
        w = h
    scheme = Scheme(scheme)
    if scheme is Scheme.ROTATE:
        return rotate_payload_right(w)
    if scheme is Scheme.ROUND:
        return round_tail(w)
    return _as_word(h, w)


def unapply_scheme(stored, scheme: Scheme, stats: DecodeStats | None = None,
                   protect_sign: bool = True):
    """Recover the weight word from its stored form.

    Lossless for ``NO_CHANGE`` and ``ROTATE``; ``ROUND`` yields the rounded
    weight.
    """
    scheme = Scheme(scheme)
    w = rotate_payload_left(stored) if scheme is Scheme.ROTATE else stored
    if protect_sign:
        _, w = strip_sign_duplicate(w, stats)
    return _as_word(stored, w)


def _check_enabled(enabled) -> frozenset:
    enabled = frozenset(Scheme(s) for s in enabled)
    if enabled and Scheme.NO_CHANGE not in enabled:
        raise ValueError("enabled schemes must include NO_CHANGE")
    return enabled


def _scores(words: np.ndarray, protect_sign: bool) -> np.ndarray:
    return np.stack([stable_count(apply_scheme(words, s, protect_sign))
                     for s in Scheme], axis=1)


def select_scheme(group: Sequence[int], enabled: Iterable = ALL_SCHEMES,
                  protect_sign: bool = True) -> Scheme:
    """Scheme maximising the group's stable cells.

    Ties go to the lowest :class:`Scheme` value, i.e. NO_CHANGE over ROTATE
    over ROUND.
    """
    enabled = _check_enabled(enabled) or frozenset({Scheme.NO_CHANGE})
    words = np.asarray(group, dtype=np.uint16).ravel()
    _require_unused_bit(words)
    totals = _scores(words, protect_sign).sum(axis=0)
    best = max(sorted(enabled), key=lambda s: (totals[s], -s))
    return Scheme(best)


@dataclass(frozen=True)
class EncodedGroup:
    scheme: Scheme | None  # None: unprotected raw words
    stored: np.ndarray

    @property
    def size(self) -> int:
        return len(self.stored)


@dataclass(eq=False)
class EncodedBuffer:
    """Stored words plus one metadata symbol per group.

    ``meta`` holds the scheme value of each group, or 0xFF for raw storage.
    ``sign_protected`` is False only for the ablation mode that applies the
    reformations without duplicating the sign; such buffers have no file form.
    """

    granularity: int
    meta: np.ndarray
    words: np.ndarray
    sign_protected: bool = True

    def __post_init__(self):
        self.meta = np.asarray(self.meta, dtype=np.uint8)
        self.words = np.asarray(self.words, dtype=np.uint16)
        if self.granularity < 1:
            raise ValueError("granularity must be positive")
        if len(self.meta) != math.ceil(len(self.words) / self.granularity):
            raise ValueError(f"{len(self.meta)} metadata symbols for "
                             f"{len(self.words)} words at granularity "
                             f"{self.granularity}")
        if np.any((self.meta > Scheme.ROUND) & (self.meta != UNPROTECTED)):
            raise ValueError("invalid metadata symbol")

    @property
    def count(self) -> int:
        return len(self.words)

    @property
    def unprotected(self) -> bool:
        return bool(len(self.meta)) and bool(np.all(self.meta == UNPROTECTED))

    @property
    def groups(self) -> list[EncodedGroup]:
        g = self.granularity
        return [EncodedGroup(None if m == UNPROTECTED else Scheme(m),
                             self.words[i * g:(i + 1) * g])
                for i, m in enumerate(self.meta)]

    def word_schemes(self) -> np.ndarray:
        """Metadata symbol of each word's group."""
        return np.repeat(self.meta, self.granularity)[:self.count]

    def replace_words(self, words) -> "EncodedBuffer":
        return EncodedBuffer(self.granularity, self.meta.copy(),
                             np.array(words, dtype=np.uint16),
                             self.sign_protected)

    def __eq__(self, other):
        if not isinstance(other, EncodedBuffer):
            return NotImplemented
        return (self.granularity == other.granularity
                and self.sign_protected == other.sign_protected
                and np.array_equal(self.meta, other.meta)
                and np.array_equal(self.words, other.words))

    def to_bytes(self) -> bytes:
        if not self.sign_protected:
            raise FormatError("buffers without sign duplication have no file form")
        return (_HEADER.pack(MAGIC, VERSION, self.granularity, self.count)
                + self.meta.tobytes()
                + self.words.astype("<u2").tobytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "EncodedBuffer":
        if len(data) < _HEADER.size:
            raise FormatError("truncated header")
        magic, version, g, count = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"invalid version {version}")
        if g not in GRANULARITIES:
            raise FormatError(f"invalid granularity {g}")
        n_groups = math.ceil(count / g)
        expected = _HEADER.size + n_groups + 2 * count
        if len(data) != expected:
            raise FormatError(f"expected {expected} bytes, got {len(data)}")
        meta = np.frombuffer(data, np.uint8, n_groups, _HEADER.size)
        words = np.frombuffer(data, "<u2", count, _HEADER.size + n_groups)
        try:
            return cls(g, meta.copy(), words.astype(np.uint16))
        except ValueError as exc:
            raise FormatError(str(exc)) from None


def encode_buffer(weights, granularity: int, enabled: Iterable = ALL_SCHEMES,
                  protect_sign: bool = True) -> EncodedBuffer:
    """Group ``weights`` and store each group under its best enabled scheme.

    An empty ``enabled`` set stores raw words (no sign copy, metadata 0xFF).
    """
    if granularity not in GRANULARITIES:
        raise ValueError(f"granularity must be one of {GRANULARITIES}")
    enabled = _check_enabled(enabled)
    words = np.asarray(weights, dtype=np.uint16).ravel()
    _require_unused_bit(words)
    n = len(words)
    n_groups = math.ceil(n / granularity)

    if not enabled:
        meta = np.full(n_groups, UNPROTECTED, dtype=np.uint8)
        return EncodedBuffer(granularity, meta, words.copy())

    scores = _scores(words, protect_sign)
    pad = n_groups * granularity - n
    scores = np.pad(scores, ((0, pad), (0, 0)))
    totals = scores.reshape(n_groups, granularity, len(Scheme)).sum(axis=1)
    disabled = [s for s in Scheme if s not in enabled]
    totals[:, disabled] = -1
    meta = totals.argmax(axis=1).astype(np.uint8)  # first max = preference order

    per_word = np.repeat(meta, granularity)[:n]
    stored = words.copy()
    for s in enabled:
        sel = per_word == s
        stored[sel] = apply_scheme(words[sel], s, protect_sign)
    return EncodedBuffer(granularity, meta, stored, protect_sign)


def decode_buffer(buf: EncodedBuffer, stats: DecodeStats | None = None) -> np.ndarray:
    """Weight words of ``buf`` in original order."""
    per_word = buf.word_schemes()
    out = buf.words.copy()
    for s in Scheme:
        sel = per_word == s
        if np.any(sel):
            out[sel] = unapply_scheme(buf.words[sel], s, stats, buf.sign_protected)
    return out


def metadata_overhead(granularity: int) -> float:
    """Metadata bits per payload bit: 2 bits per group of 16-bit weights."""
    if granularity < 1:
        raise ValueError("granularity must be positive")
    return 2 / (16 * granularity)
