import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from y00sim.channel import MeasurementMode, MeasurementOutcome, measure, trial_rng
from y00sim.experiments import LinkConfig, run_simulation
from y00sim.keystream import RunningKeyBlock
from y00sim.modem import design_levels, encode
from y00sim.receiver import (
    DetectionStats,
    bob_detect,
    design_neighbor_error,
    eve_mary_detect,
    eye_histogram,
    eye_trace,
    neighbor_error_prob,
    pairwise_error_mc,
)

TABLE = design_levels(80, 100, 100, "intensity")


def direct(v):
    return MeasurementOutcome(MeasurementMode.DIRECT, v)


def mid_pair(table):
    """Adjacent pair straddling the mid-amplitude intensity."""
    target = (0.5 * (table.alpha_min + table.alpha_max)) ** 2
    centres = 0.5 * (table.intensities[1:] + table.intensities[:-1])
    return int(np.argmin(np.abs(centres - target)))


def offset_oracle(table, max_offset):
    """Exact P(decision offset = d) under per-level Gaussian shot noise, uniform symbols."""
    lv = table.intensities
    edges = np.concatenate([[-np.inf], 0.5 * (lv[1:] + lv[:-1]), [np.inf]])
    probs = {}
    for d in range(-max_offset, max_offset + 1):
        p = 0.0
        for k in range(lv.size):
            j = k + d
            if 0 <= j < lv.size:
                s = math.sqrt(lv[k])
                p += norm.cdf((edges[j + 1] - lv[k]) / s) - norm.cdf((edges[j] - lv[k]) / s)
        probs[d] = p / lv.size
    return probs


# ---------------------------------------------------------------- Bob


def test_bob_noiseless_lower_and_tie():
    blk = RunningKeyBlock(3, 0)
    assert bob_detect(direct(TABLE.intensities[3]), blk, TABLE) == 0
    thr = 0.5 * (TABLE.intensities[3] + TABLE.intensities[103])
    assert bob_detect(direct(thr), blk, TABLE) == 1
    assert bob_detect(direct(np.nextafter(thr, 0)), blk, TABLE) == 0


def test_bob_attenuated_threshold():
    k = 0.5
    blk = RunningKeyBlock(3, 1)
    assert bob_detect(direct(k**2 * TABLE.intensities[103]), blk, TABLE, k) == 0


def test_bob_error_free_at_design_point():
    rng = trial_rng(2024)
    n = 1_000_000
    v = rng.integers(0, 100, n)
    o = rng.integers(0, 2, n)
    x = rng.integers(0, 2, n)
    idx = encode(x, (v, o), TABLE)
    y = measure(TABLE.amplitudes[idx], "direct", rng)
    assert np.count_nonzero(bob_detect(y, (v, o), TABLE) != x) == 0


# ---------------------------------------------------------------- Eve


def test_eve_nearest_and_ties():
    assert eve_mary_detect(direct(TABLE.intensities[5]), TABLE) == 5
    mid = 0.5 * (TABLE.intensities[5] + TABLE.intensities[6])
    assert eve_mary_detect(direct(mid), TABLE) == 5
    assert eve_mary_detect(direct(0.0), TABLE) == 0
    assert eve_mary_detect(direct(1e9), TABLE) == 199
    het = MeasurementOutcome(MeasurementMode.HETERODYNE, complex(TABLE.amplitudes[42], 3.0))
    assert eve_mary_detect(het, TABLE) == 42


def test_eve_pairwise_and_full_error_at_design_point():
    rng = trial_rng(7)
    err, n = pairwise_error_mc(TABLE, mid_pair(TABLE), 1_000_000, rng)
    assert 0.40 <= err / n <= 0.55
    idx = rng.integers(0, 200, 1_000_000)
    dec = eve_mary_detect(measure(TABLE.amplitudes[idx], "direct", rng), TABLE)
    full = np.mean(dec != idx)
    assert full >= 0.4
    # every symbol error of the 2M-ary decision is far more likely than 0.45
    assert full == pytest.approx(1 - offset_oracle(TABLE, 0)[0], abs=3e-3)


def test_eve_offset_histogram_matches_oracle():
    rng = trial_rng(8)
    n = 1_000_000
    idx = rng.integers(0, 200, n)
    dec = eve_mary_detect(measure(TABLE.amplitudes[idx], "direct", rng), TABLE)
    stats = DetectionStats.from_arrays(idx, dec, dec - idx)
    oracle = offset_oracle(TABLE, 3)
    for d in (-3, -2, -1, 1, 2, 3):
        p = oracle[d]
        got = stats.offset_hist.get(d, 0) / n
        assert abs(got - p) < 4 * math.sqrt(p * (1 - p) / n)
    # neighbouring offsets are the most common error, not the overwhelming majority
    frac1 = (stats.offset_hist[1] + stats.offset_hist[-1]) / stats.errors
    assert frac1 == pytest.approx((oracle[1] + oracle[-1]) / (1 - oracle[0]), abs=0.01)


# ---------------------------------------------------------------- neighbour error


def test_neighbor_error_examples():
    assert neighbor_error_prob(0.0, 1.0) == 0.5
    assert neighbor_error_prob(1e6, 1.0) == pytest.approx(0.0, abs=1e-300)
    assert neighbor_error_prob(18.0, 90.0) == pytest.approx(0.4602, abs=5e-5)
    assert design_neighbor_error(TABLE) == pytest.approx(0.460172, abs=1e-6)
    with pytest.raises(ValueError):
        neighbor_error_prob(1.0, 0.0)


@given(d1=st.floats(0, 50), d2=st.floats(0, 50), s=st.floats(0.1, 100))
def test_neighbor_error_monotone(d1, d2, s):
    lo, hi = sorted((d1, d2))
    assert neighbor_error_prob(hi, s) <= neighbor_error_prob(lo, s)
    assert neighbor_error_prob(lo, s) <= neighbor_error_prob(lo, s * 1.5)
    assert 0 <= neighbor_error_prob(hi, s) <= 0.5


@pytest.mark.parametrize("lo,hi,M", [(80, 100, 100), (80, 100, 50), (50, 60, 20), (10, 20, 10), (90, 100, 200)])
def test_closed_form_vs_mc(lo, hi, M):
    table = design_levels(lo, hi, M, "intensity")
    n = 2_000_000
    err, _ = pairwise_error_mc(table, mid_pair(table), n, trial_rng(lo, hi, M))
    p = design_neighbor_error(table)
    assert abs(err / n - p) < 3 * math.sqrt(p * (1 - p) / n) + 2e-4


@pytest.mark.parametrize("kappa", [1.0, 0.8, 0.63, 0.5])
def test_bob_beats_eve(kappa):
    res = run_simulation(LinkConfig(M=100, kappa=kappa, n_bits=100_000), seed=3)
    assert res.bob.ber <= res.eve_bit.ber
    assert res.bob.ber < 1e-3


# ---------------------------------------------------------------- detection stats


def test_detection_stats():
    s = DetectionStats.from_arrays([0, 1, 1, 0], [0, 0, 1, 1], [0, -1, 0, 1])
    assert (s.trials, s.errors, s.ber) == (4, 2, 0.5)
    assert s.offset_hist == {-1: 1, 1: 1}
    m = s.merge(s)
    assert (m.trials, m.errors, m.offset_hist) == (8, 4, {-1: 2, 1: 2})
    with pytest.raises(ValueError):
        DetectionStats(1, 2)


# ---------------------------------------------------------------- eye


def test_eye_two_noiseless_levels():
    lv = np.array([100.0, 400.0] * 50)
    ph, val, slot = eye_trace(lv, trial_rng(0), shot_noise=False)
    h = eye_histogram(ph, val, lv[slot], value_range=(0, 500), value_bins=5000)
    assert h.opening() == pytest.approx(300.0, abs=0.2)
    assert h.total == val.size


def test_eye_empty():
    ph, val, slot = eye_trace(np.zeros(0), trial_rng(0))
    h = eye_histogram(ph, val, np.zeros(0))
    assert h.empty and h.opening() is None


def test_eye_merge_conserves_counts():
    rng = trial_rng(1)
    lv = rng.choice([100.0, 900.0, 1600.0], 3000)
    ph, val, slot = eye_trace(lv, rng)
    lab = lv[slot]
    kw = dict(value_range=(0, 2000), value_bins=256)
    whole = eye_histogram(ph, val, lab, **kw)
    a = eye_histogram(ph[:8000], val[:8000], lab[:8000], **kw)
    b = eye_histogram(ph[8000:], val[8000:], lab[8000:], **kw)
    for m in (a.merge(b), b.merge(a)):
        assert np.array_equal(m.counts, whole.counts)
        assert m.total == val.size
        assert m.opening() == pytest.approx(whole.opening())
    assert (whole.counts >= 0).all()
    assert whole.to_csv().splitlines()[0] == "slot_bin,intensity_bin,count"
