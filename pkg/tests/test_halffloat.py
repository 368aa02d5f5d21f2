import math
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mlcstore.halffloat import (CellPattern, cell_array, cells, from_cells, from_pairs,
                                half_to_real, halves_to_reals, is_finite, real_to_half,
                                reals_to_halves, to_pairs, ulp)


def struct_half(x):
    # CPython's own binary16 packer: round-half-even, OverflowError on overflow
    return struct.unpack("<H", struct.pack("<e", x))[0]


def test_one():
    assert real_to_half(1.0) == 0b0_01111_0000000000
    assert half_to_real(0b0_01111_0000000000) == 1.0
    assert half_to_real(0b1_01111_0000000000) == -1.0


@pytest.mark.parametrize("x, pairs", [
    (0.004222, "00 01 11 00 01 01 00 11"),
    (0.020614, "00 10 01 01 01 00 01 11"),
    (0.0004982, "00 01 00 00 00 01 01 01"),
])
def test_table_binaries(x, pairs):
    assert to_pairs(real_to_half(x)) == pairs


def test_hand_evaluated_value():
    # 1.0810546875 * 2**-8
    v = half_to_real(from_pairs("00 01 11 00 01 01 00 11"))
    assert v == 1.0810546875 * 2**-8
    assert 0.004221 <= v <= 0.004223


def test_special_values():
    assert math.isnan(half_to_real(0x7E00))
    assert half_to_real(0x7C00) == math.inf
    assert half_to_real(0xFC00) == -math.inf
    assert half_to_real(0x0001) == 2.0**-24
    assert half_to_real(0x8000) == 0.0 and math.copysign(1, half_to_real(0x8000)) < 0


def test_overflow_is_range_error():
    with pytest.raises(OverflowError):
        real_to_half(70000.0)
    with pytest.raises(ValueError):
        real_to_half(math.nan)
    assert real_to_half(65504.0) == 0x7BFF


@given(st.floats(allow_nan=False, allow_infinity=False, min_value=-65519, max_value=65519))
def test_conversion_matches_struct(x):
    assert real_to_half(x) == struct_half(x)


def test_ties_to_even():
    # 1 + 2**-11 sits halfway between 1.0 and the next half; even mantissa wins
    assert real_to_half(1 + 2**-11) == 0x3C00
    assert real_to_half(1 + 3 * 2**-11) == 0x3C02


def test_exhaustive_round_trip(all_words):
    finite = all_words[is_finite(all_words)]
    for h in finite:
        assert real_to_half(half_to_real(h)) == h


def test_exhaustive_decode_matches_numpy(all_words):
    ours = np.array([half_to_real(h) for h in all_words])
    theirs = halves_to_reals(all_words)
    same = (ours == theirs) | (np.isnan(ours) & np.isnan(theirs))
    assert same.all()


def test_vector_conversion_round_trip(all_words):
    finite = all_words[is_finite(all_words)]
    assert np.array_equal(reals_to_halves(halves_to_reals(finite)), finite)


def test_unused_bit_theorem(all_words):
    values = halves_to_reals(all_words)
    small = np.abs(values) < 2  # NaN compares False
    assert not np.any(all_words[small] & 0x4000)
    # and the bound is tight: +2.0 is the first word using bit 1
    assert real_to_half(2.0) & 0x4000


def test_cells_examples():
    assert cells(0x0000) == [CellPattern.P00] * 8
    assert cells(0xFFFF) == [CellPattern.P11] * 8
    P = CellPattern
    assert cells(from_pairs("00 10 01 01 01 00 01 11")) == [P.P00, P.P10, P.P01, P.P01,
                                                           P.P01, P.P00, P.P01, P.P11]


def test_cells_bijection(all_words):
    seen = {tuple(cells(h)) for h in all_words}
    assert len(seen) == 1 << 16
    assert all(from_cells(cells(h)) == h for h in all_words[::97])
    assert np.array_equal(cell_array(all_words)[:, 3], [int(cells(h)[3]) for h in all_words])


def test_pattern_classes():
    assert {p for p in CellPattern if p.stable} == {CellPattern.P00, CellPattern.P11}
    assert {p for p in CellPattern if p.intermediate} == {CellPattern.P01, CellPattern.P10}


def test_ulp():
    assert ulp(real_to_half(1.0)) == 2.0**-10
    assert ulp(0x0001) == 2.0**-24
    assert ulp(0x0400) == 2.0**-24
