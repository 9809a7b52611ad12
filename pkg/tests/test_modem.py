import csv
import io
import math

import numpy as np
import pytest

from y00sim.keystream import RunningKeyBlock
from y00sim.modem import (
    LevelScheme,
    SyncError,
    decode_keyed,
    design_levels,
    encode,
    key_parity,
    operating_point_table,
    parity_observable,
    phase_signal_distance,
)


def test_amplitude_delta():
    t = design_levels(80, 100, 100, "amplitude")
    assert t.delta == pytest.approx(0.1)
    assert np.allclose(np.diff(t.amplitudes), 0.1, rtol=1e-12)


def test_intensity_delta():
    t = design_levels(80, 100, 100, "intensity")
    assert t.delta == pytest.approx(18.0)
    d = np.diff(t.intensities)
    assert np.max(np.abs(d - 18.0)) / 18.0 < 1e-12


def test_small_amplitude_table():
    t = design_levels(0, 1, 2, "amplitude")
    assert np.allclose(t.amplitudes, [0, 0.25, 0.5, 0.75])
    pairs = [(t.amplitudes[m], t.amplitudes[m + 2]) for m in range(2)]
    assert np.allclose(pairs, [(0, 0.5), (0.25, 0.75)])


@pytest.mark.parametrize("lo,hi", [(100, 80), (5, 5), (-1, 3)])
def test_bad_range_rejected(lo, hi):
    with pytest.raises(ValueError):
        design_levels(lo, hi, 4)


@pytest.mark.parametrize("M", [2, 16, 100, 128])
def test_levels_increasing_and_mate_gap(M):
    t = design_levels(80, 100, M, "intensity")
    assert np.all(np.diff(t.amplitudes) > 0)
    gap = t.intensities[M:] - t.intensities[:M]
    assert np.allclose(gap, 0.5 * (100**2 - 80**2), rtol=1e-12)
    assert np.array_equal(t.mate(np.arange(2 * M)), (np.arange(2 * M) + M) % (2 * M))


def test_operating_point_keeps_amplitude_step():
    for M in (64, 100, 128):
        t = operating_point_table(M)
        assert (t.alpha_max - t.alpha_min) / (2 * M) == pytest.approx(0.1)
    assert operating_point_table(100).alpha_min == pytest.approx(80)


def test_phase_distance():
    assert phase_signal_distance(100, 100 * math.pi) == pytest.approx(1.0)
    assert phase_signal_distance(0, 10) == 0
    assert phase_signal_distance(100, 1000) == pytest.approx(math.pi / 10)
    assert design_levels(0, 100, 1000, "phase").delta == pytest.approx(math.pi / 10)


def test_encode_examples():
    t = design_levels(80, 100, 100)
    assert encode(0, RunningKeyBlock(3, 0), t) == 3
    assert encode(1, RunningKeyBlock(3, 0), t) == 103
    assert encode(1, RunningKeyBlock(3, 1), t) == 3


def test_decode_examples():
    t = design_levels(80, 100, 100)
    assert decode_keyed(103, RunningKeyBlock(3, 0), t) == 1
    with pytest.raises(SyncError):
        decode_keyed(7, RunningKeyBlock(3, 0), t)


@pytest.mark.parametrize("M", [2, 3, 8, 33, 64])
def test_encode_decode_bijection(M):
    t = design_levels(1, 2, M, "amplitude")
    for v in range(M):
        for o in (0, 1):
            blk = RunningKeyBlock(v, o)
            idx = [encode(b, blk, t) for b in (0, 1)]
            assert idx[0] != idx[1]
            assert all(i % M == v and 0 <= i < 2 * M for i in idx)
            assert [decode_keyed(i, blk, t) for i in idx] == [0, 1]


def test_vectorised_encode_matches_scalar():
    t = design_levels(80, 100, 64)
    rng = np.random.default_rng(1)
    x, v, o = rng.integers(0, 2, 500), rng.integers(0, 64, 500), rng.integers(0, 2, 500)
    vec = encode(x, (v, o), t)
    assert np.array_equal(vec, [encode(int(a), RunningKeyBlock(int(b), int(c)), t) for a, b, c in zip(x, v, o)])
    assert np.array_equal(decode_keyed(vec, (v, o), t), x)
    with pytest.raises(ValueError):
        encode(0, RunningKeyBlock(64, 0), t)


def test_parity_examples():
    t = design_levels(80, 100, 8)
    # running key numbered from one: value 0 is key 1 (odd)
    up_odd = parity_observable(8 + 0, t)
    down_even = parity_observable(1, t)
    assert up_odd == (1, 1)
    assert down_even == (0, 0)
    assert up_odd[0] ^ up_odd[1] == 0 and down_even[0] ^ down_even[1] == 0


@pytest.mark.parametrize("osk", [0, 1])
def test_half_plane_relation_exhaustive(osk):
    t = design_levels(80, 100, 8)
    for v in range(8):
        for x in (0, 1):
            idx = encode(x, RunningKeyBlock(v, osk), t)
            l, kt = parity_observable(idx, t)
            assert kt == key_parity(v)
            assert l == x ^ kt ^ osk


def test_table_csv():
    t = design_levels(80, 100, 4)
    rows = list(csv.reader(io.StringIO(t.to_csv())))
    assert rows[0] == ["index", "amplitude", "intensity", "basis", "mate_index"]
    assert len(rows) == 9
    assert rows[6][3:] == ["1", "1"]
    assert float(rows[1][2]) == pytest.approx(6400)


def test_signal_values():
    t = design_levels(80, 100, 4, LevelScheme.INTENSITY)
    assert np.allclose(t.signal_values(0.5), 0.25 * t.intensities)
    assert np.allclose(t.signal_values(0.5, "amplitude"), 0.5 * t.amplitudes)
