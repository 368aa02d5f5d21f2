"""Exit criteria. Each test records one PASS/FAIL line, printed at the end of
the pytest run."""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy import stats

from mlcstore.analysis import energy_comparison, sse_sweep, uniform_weights
from mlcstore.cli import main
from mlcstore.codec import (ROUND_TABLE, SYSTEMS, DecodeStats, Scheme, apply_scheme,
                            decode_buffer, encode_buffer, metadata_overhead, round_tail,
                            select_scheme, unapply_scheme)
from mlcstore.halffloat import cell_array, halves_to_reals, is_finite, real_to_half, to_pairs, ulp
from mlcstore.memdevice import FaultSpec, inject_faults
from mlcstore.tinynn import accuracy_experiment
from mlcstore.weightfile import write_weights

RESULTS = []


@contextmanager
def criterion(number, title):
    start = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        RESULTS.append(f"FAIL  {number:>2}. {title}: {type(exc).__name__}: {str(exc)[:200]}")
        raise
    RESULTS.append(f"PASS  {number:>2}. {title} ({time.perf_counter() - start:.2f}s)")


NC, ROT, RND = Scheme.NO_CHANGE, Scheme.ROTATE, Scheme.ROUND

GOLDEN = [
    (0.004222, "00 01 11 00 01 01 00 11", NC, {
        NC: ("00 01 11 00 01 01 00 11", (3, 3, 0, 2)),
        ROT: ("00 10 11 10 00 10 10 01", (2, 1, 4, 1)),
        RND: ("00 01 11 00 01 01 00 00", (4, 3, 0, 1))}),
    (0.020614, "00 10 01 01 01 00 01 11", ROT, {
        NC: ("00 10 01 01 01 00 01 11", (2, 4, 1, 1)),
        ROT: ("00 11 00 10 10 10 00 11", (3, 0, 3, 2)),
        RND: ("00 10 01 01 01 00 00 11", (3, 3, 1, 1))}),
    (0.0004982, "00 01 00 00 00 01 01 01", RND, {
        NC: ("00 01 00 00 00 01 01 01", (4, 4, 0, 0)),
        ROT: ("00 10 10 00 00 00 10 10", (4, 0, 4, 0)),
        RND: ("00 01 00 00 00 01 00 11", (5, 2, 0, 1))}),
]


def test_01_golden_examples():
    with criterion(1, "worked-example table bit-exact, best scheme selection"):
        start = time.perf_counter()
        for weight, binary, best, rows in GOLDEN:
            h = real_to_half(weight)
            assert to_pairs(h) == binary
            for scheme, (stored, counts) in rows.items():
                out = apply_scheme(h, scheme)
                assert to_pairs(out) == stored, (weight, scheme)
                c = cell_array(out).ravel()
                assert tuple(int((c == v).sum()) for v in range(4)) == counts, (weight, scheme)
            assert select_scheme([h]) is best
        assert time.perf_counter() - start < 1.0


def test_02_rounding_table():
    with criterion(2, "16 nibble rounding mappings"):
        groups = {"0000": range(0, 4), "0011": range(4, 8), "1100": range(8, 12), "1111": range(12, 16)}
        for target, nibbles in groups.items():
            for n in nibbles:
                assert format(ROUND_TABLE[n], "04b") == target
                assert round_tail(0xABC0 | n) == 0xABC0 | int(target, 2)
        assert round_tail(0b0011) == 0b0000


def test_03_overhead():
    with criterion(3, "metadata overhead for granularity 1..16"):
        expected = [0.125, 0.0625, 0.03125, 0.015625, 0.0078125]
        assert [metadata_overhead(g) for g in (1, 2, 4, 8, 16)] == expected


def test_04_exhaustive_losslessness(valid_words):
    with criterion(4, "exhaustive NoChange/Rotate round trip, Round within 4 ulp"):
        start = time.perf_counter()
        for s in (NC, ROT):
            assert np.array_equal(unapply_scheme(apply_scheme(valid_words, s), s), valid_words)
            for g in (1, 16):
                assert np.array_equal(decode_buffer(encode_buffer(valid_words, g, {NC, s})), valid_words)
        back = unapply_scheme(apply_scheme(valid_words, RND), RND)
        fin = is_finite(valid_words)
        err = np.abs(halves_to_reals(back[fin]) - halves_to_reals(valid_words[fin]))
        bound = 4 * np.array([ulp(h) for h in valid_words[fin]])
        assert np.all(err <= bound)
        assert time.perf_counter() - start < 30


def test_05_unused_bit(all_words):
    with criterion(5, "|value| < 2 implies bit 1 = 0 over all 2^16 words"):
        v = halves_to_reals(all_words)
        assert not np.any(all_words[np.abs(v) < 2] & 0x4000)


def test_06_fault_immunity():
    with criterion(6, "p=0.02 over >=1e6 cells: stable cells and sign pairs intact, flips binomial"):
        n_words = 1 << 17
        buf = encode_buffer(uniform_weights(n_words, 6), 1, SYSTEMS["hybrid"])
        assert 8 * n_words >= 10**6
        p = 0.02
        out = inject_faults(buf, FaultSpec(p, 2026))
        before, after = cell_array(buf.words), cell_array(out.words)
        stable = (before == 0) | (before == 3)
        assert np.count_nonzero(before[stable] != after[stable]) == 0
        assert np.count_nonzero((buf.words >> 14) != (out.words >> 14)) == 0
        dstats = DecodeStats()
        decode_buffer(out, dstats)
        assert dstats.sign_mismatches == 0
        n_inter = int(np.count_nonzero(~stable))
        flips = int(np.count_nonzero(before != after))
        sigma = math.sqrt(n_inter * p * (1 - p))
        assert abs(flips - n_inter * p) <= 5 * sigma, (flips, n_inter * p, sigma)


def test_07_sse_sweep():
    with criterion(7, "SSE sweep n=1e6: sign 4/3 within 1%, bits 12-15 smallest"):
        s = sse_sweep(10**6, 0)
        assert abs(s.mean_sse[0] - 4 / 3) <= 0.01 * 4 / 3, s.mean_sse[0]
        assert s.mean_sse[12:16].max() < s.mean_sse[0:12].min()


def test_08_energy():
    with criterion(8, "energy: hybrid below baseline at every granularity, savings decay"):
        rows = energy_comparison(uniform_weights(10**4, 0))
        base, hyb = rows[0], rows[1:]
        assert base.system == "baseline"
        for r in hyb:
            assert r.read_nj < base.read_nj and r.write_nj < base.write_nj, r.system
        read_sav = [-r.delta_read_pct for r in hyb]
        write_sav = [-r.delta_write_pct for r in hyb]
        assert all(a >= b for a, b in zip(read_sav, read_sav[1:]))
        assert all(a >= b for a, b in zip(write_sav, write_sav[1:]))
        RESULTS.append("      measured savings (read/write %): " + ", ".join(
            f"{r.system.split('_')[-1]}: {-r.delta_read_pct:.2f}/{-r.delta_write_pct:.2f}" for r in hyb))


EPSILON = 0.01


def test_09_accuracy_ordering():
    with criterion(9, "MLP p=0.02, 20 seeds: hybrid ~ error-free, unprotected significantly worse"):
        start = time.perf_counter()
        rows = {r.system: r for r in accuracy_experiment(p=0.02, granularity=1, trials=20, seed=0)}
        clean = rows["error_free"].mean_accuracy
        hybrid = rows["hybrid"]
        RESULTS.append("      mean accuracy: " + ", ".join(
            f"{k}={v.mean_accuracy:.4f}" for k, v in rows.items()))
        assert abs(hybrid.mean_accuracy - clean) <= EPSILON
        test = stats.ttest_1samp(rows["unprotected"].accuracies, clean, alternative="less")
        assert rows["unprotected"].mean_accuracy < clean and test.pvalue < 0.05
        assert hybrid.mean_accuracy >= rows["rotate"].mean_accuracy
        assert hybrid.mean_accuracy >= rows["round"].mean_accuracy
        assert time.perf_counter() - start < 300


def test_10_determinism(tmp_path):
    with criterion(10, "every command byte-identical across repeat and parallel runs"):
        w = tmp_path / "w.f16"
        write_weights(w, uniform_weights(5000, 10))
        buf = tmp_path / "buf"
        assert main(["encode", str(w), "-o", str(buf), "-g", "4"]) == 0

        def run(tag, argv):
            out = tmp_path / tag
            assert main(argv + ["-o", str(out)]) == 0
            return out.read_bytes()

        commands = {
            "encode": (["encode", str(w), "-g", "4"], None),
            "decode": (["decode", str(buf)], None),
            "inject": (["inject", str(buf), "--p", "0.02", "--seed", "5"], ["--workers", "4"]),
            "stats": (["stats", str(w)], None),
            "energy": (["energy", str(w)], None),
            "sse": (["sse", "--n", "20000", "--seed", "3"], None),
            "accuracy": (["accuracy", "--trials", "3", "--seed", "1"], ["--workers", "3"]),
        }
        for name, (argv, parallel) in commands.items():
            first = run(name + "1", argv)
            assert run(name + "2", argv) == first, name
            if parallel:
                assert run(name + "p", argv + parallel) == first, name
        assert main(["verify"]) == 0 and main(["verify"]) == 0
