"""Pinned reference values from the published worked examples.

Used by ``mlcstore verify``; each check yields ``(name, ok, detail)``.
"""

from __future__ import annotations

from .codec import (ROUND_TABLE, Scheme, apply_scheme, decode_buffer, encode_buffer,
                    metadata_overhead, select_scheme)
from .halffloat import cell_array, from_pairs, real_to_half, to_pairs

# weight, binary, {scheme: (stored pairs, counts of 00/01/10/11)}, best
EXAMPLES = [
    (0.004222, "00 01 11 00 01 01 00 11", {
        Scheme.NO_CHANGE: ("00 01 11 00 01 01 00 11", (3, 3, 0, 2)),
        Scheme.ROTATE: ("00 10 11 10 00 10 10 01", (2, 1, 4, 1)),
        Scheme.ROUND: ("00 01 11 00 01 01 00 00", (4, 3, 0, 1)),
    }, Scheme.NO_CHANGE),
    (0.020614, "00 10 01 01 01 00 01 11", {
        Scheme.NO_CHANGE: ("00 10 01 01 01 00 01 11", (2, 4, 1, 1)),
        Scheme.ROTATE: ("00 11 00 10 10 10 00 11", (3, 0, 3, 2)),
        Scheme.ROUND: ("00 10 01 01 01 00 00 11", (3, 3, 1, 1)),
    }, Scheme.ROTATE),
    (0.0004982, "00 01 00 00 00 01 01 01", {
        Scheme.NO_CHANGE: ("00 01 00 00 00 01 01 01", (4, 4, 0, 0)),
        Scheme.ROTATE: ("00 10 10 00 00 00 10 10", (4, 0, 4, 0)),
        Scheme.ROUND: ("00 01 00 00 00 01 00 11", (5, 2, 0, 1)),
    }, Scheme.ROUND),
]

ROUNDING_ROWS = {
    "0000": "0000", "0001": "0000", "0010": "0000", "0011": "0000",
    "0100": "0011", "0101": "0011", "0110": "0011", "0111": "0011",
    "1000": "1100", "1001": "1100", "1010": "1100", "1011": "1100",
    "1100": "1111", "1101": "1111", "1110": "1111", "1111": "1111",
}

OVERHEAD_ROWS = {1: 0.125, 2: 0.0625, 4: 0.03125, 8: 0.015625, 16: 0.0078125}

# payload of the three examples at granularity 1: sign copy, then the best scheme
FINAL_BITSTREAM = ["00 01 11 00 01 01 00 11", "00 11 00 10 10 10 00 11", "00 01 00 00 00 01 00 11"]


def _counts(h):
    c = cell_array(h).ravel()
    return tuple(int((c == v).sum()) for v in range(4))


def check_examples():
    for weight, binary, rows, best in EXAMPLES:
        h = real_to_half(weight)
        yield f"binary {weight}", to_pairs(h) == binary, to_pairs(h)
        for scheme, (stored, counts) in rows.items():
            out = apply_scheme(h, scheme)
            yield (f"{scheme.name} {weight}",
                   to_pairs(out) == stored and _counts(out) == counts,
                   f"{to_pairs(out)} counts {_counts(out)}")
        got = select_scheme([h])
        yield f"best {weight}", got is best, got.name


def check_rounding():
    for src, dst in ROUNDING_ROWS.items():
        got = format(ROUND_TABLE[int(src, 2)], "04b")
        yield f"round {src}", got == dst, got


def check_overhead():
    for g, ratio in OVERHEAD_ROWS.items():
        got = metadata_overhead(g)
        yield f"overhead g={g}", got == ratio, repr(got)


def check_bitstream():
    words = [real_to_half(w) for w, *_ in EXAMPLES]
    buf = encode_buffer(words, 1)
    stored = [to_pairs(w) for w in buf.words]
    yield "metadata [0, 1, 2]", list(buf.meta) == [0, 1, 2], str([int(m) for m in buf.meta])
    yield "final bitstream", stored == FINAL_BITSTREAM, "; ".join(stored)
    decoded = list(decode_buffer(buf))
    expected = words[:2] + [from_pairs(EXAMPLES[2][2][Scheme.ROUND][0])]
    yield "decoded weights", decoded == expected, str([hex(int(w)) for w in decoded])


def run_all():
    for check in (check_examples, check_rounding, check_overhead, check_bitstream):
        yield from check()
