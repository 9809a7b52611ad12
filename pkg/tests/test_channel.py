import math

import numpy as np
import pytest

from y00sim.channel import (
    ChannelParams,
    MeasurementMode,
    attenuate,
    beamsplit_clone,
    measure,
    noise_sigma,
    parallel_map,
    trial_rng,
)

N = 1_000_000


def test_attenuate_examples():
    assert attenuate(3.5, ChannelParams(1.0)) == 3.5
    p = ChannelParams.from_fiber(0.2, 20)
    assert p.kappa == pytest.approx(10**-0.2)
    assert attenuate(100, p) == pytest.approx(63.0957, abs=1e-3)
    assert attenuate(100, ChannelParams(0.0)) == 0


def test_attenuate_linear():
    a = np.array([1.0, 2.5, 80.0])
    assert np.allclose(attenuate(3 * a, 0.7), 3 * attenuate(a, 0.7))


def test_invalid_kappa():
    with pytest.raises(ValueError):
        ChannelParams(1.2)
    with pytest.raises(ValueError):
        ChannelParams.from_fiber(-0.2, 1)


def test_heterodyne_moments():
    y = measure(np.zeros(N), "heterodyne", trial_rng(1)).value
    se = math.sqrt(0.5 / N)
    assert abs(y.real.mean()) < 4 * se and abs(y.imag.mean()) < 4 * se
    assert y.real.var() == pytest.approx(0.5, rel=0.01)
    assert y.imag.var() == pytest.approx(0.5, rel=0.01)


def test_homodyne_moments():
    y = measure(np.full(N, 2.0), "homodyne", trial_rng(2)).value
    assert abs(y.mean() - 2) < 5 * math.sqrt(0.25 / N)
    assert y.var() == pytest.approx(0.25, rel=0.01)


def test_direct_moments():
    y = measure(np.full(N, 100.0), "direct", trial_rng(3)).value
    assert abs(y.mean() - 1e4) < 4 * math.sqrt(1e4 / N)
    assert y.var() == pytest.approx(1e4, rel=0.02)


def test_direct_clamped():
    y = measure(np.full(10000, 0.5), MeasurementMode.DIRECT, trial_rng(4)).value
    assert y.min() >= 0


def test_excess_noise():
    assert noise_sigma(0, "heterodyne", 0.5) == pytest.approx(1.0)
    y = measure(np.zeros(N), "homodyne", trial_rng(5), excess=0.75).value
    assert y.var() == pytest.approx(1.0, rel=0.01)


def test_scalar_outcome():
    out = measure(1 + 0j, "heterodyne", trial_rng(0))
    assert isinstance(out.value, complex)
    assert out.mode is MeasurementMode.HETERODYNE


def test_clone_conventions():
    assert beamsplit_clone(7.0, 1) == [7.0]
    assert beamsplit_clone(7.0, 1, "energy-conserving") == [7.0]
    copies = beamsplit_clone(100.0, 1000)
    assert len(copies) == 1000 and copies[0] == pytest.approx(0.1)
    ec = beamsplit_clone(100.0, 100, "energy-conserving")
    assert ec[0] == pytest.approx(10.0)
    assert sum(c * c for c in ec) == pytest.approx(1e4, rel=1e-14)
    with pytest.raises(ValueError):
        beamsplit_clone(1.0, 0)
    with pytest.raises(ValueError):
        beamsplit_clone(1.0, 2, "other")


def test_trial_rng_independent_streams():
    a = trial_rng(7, 0).standard_normal(4)
    b = trial_rng(7, 1).standard_normal(4)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, trial_rng(7, 0).standard_normal(4))


@pytest.mark.parametrize("workers", [1, 2, 8])
def test_parallel_map_worker_independent(workers):
    def draw(i):
        return measure(np.full(1000, 50.0), "direct", trial_rng(99, i)).value.sum()

    assert parallel_map(draw, range(16), workers) == [draw(i) for i in range(16)]
