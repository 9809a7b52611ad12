"""Keyed and keyless detection, neighbour error, and eye-pattern histograms."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .channel import MeasurementMode, MeasurementOutcome
from .keystream import RunningKeyBlock
from .modem import LevelScheme, LevelTable, key_parity

__all__ = [
    "DetectionStats",
    "EyeHistogram",
    "bob_detect",
    "eve_mary_detect",
    "eve_keyless_bit",
    "neighbor_error_prob",
    "design_sigma",
    "design_neighbor_error",
    "pairwise_error_mc",
    "eye_trace",
    "eye_histogram",
]


def _reading(outcome: MeasurementOutcome):
    if outcome.mode is MeasurementMode.HETERODYNE:
        # levels are real; the nearest complex amplitude is the nearest real part
        return np.real(outcome.value), "amplitude"
    if outcome.mode is MeasurementMode.HOMODYNE:
        return np.asarray(outcome.value), "amplitude"
    return np.asarray(outcome.value), "direct"


def _block_arrays(block):
    if isinstance(block, RunningKeyBlock):
        return np.asarray(block.value), np.asarray(block.osk_bit)
    value, osk = block
    return np.asarray(value), np.asarray(osk)


def bob_detect(outcome: MeasurementOutcome, block, table: LevelTable, kappa: float = 1.0):
    """Keyed binary decision between the two levels of the selected basis.

    The threshold sits midway between the attenuated readings of the pair;
    readings at or above it decide the upper level (ties go to the upper level).
    """
    v, kind = _reading(outcome)
    value, osk = _block_arrays(block)
    levels = table.signal_values(kappa, "direct" if kind == "direct" else "amplitude")
    threshold = 0.5 * (levels[value] + levels[value + table.M])
    half = (v >= threshold).astype(np.int64)
    bit = half ^ key_parity(value) ^ osk.astype(np.int64)
    return int(bit) if bit.ndim == 0 else bit


def eve_mary_detect(outcome: MeasurementOutcome, table: LevelTable, kappa: float = 1.0):
    """Nearest-level decision over all 2M levels; ties go to the lower index."""
    v, kind = _reading(outcome)
    levels = table.signal_values(kappa, "direct" if kind == "direct" else "amplitude")
    mids = 0.5 * (levels[1:] + levels[:-1])
    idx = np.searchsorted(mids, v, side="left")
    return int(idx) if np.ndim(idx) == 0 else idx


def eve_keyless_bit(index, table: LevelTable):
    """Bit Eve infers from her M-ary decision, trusting its basis and ignoring OSK."""
    index = np.asarray(index)
    return (index >= table.M).astype(np.int64) ^ key_parity(index % table.M)


def neighbor_error_prob(delta, sigma):
    """``1/2 - Phi0(t0)`` with ``t0 = (delta / 2) / sigma``.

    ``Phi0`` is the standard normal integral from 0, so this is the Gaussian
    upper tail at ``t0``.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    t0 = 0.5 * np.asarray(delta, dtype=float) / sigma
    out = 0.5 * erfc(t0 / np.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def design_sigma(table: LevelTable, kappa: float = 1.0) -> float:
    """Noise scale used by the closed-form neighbour error.

    Intensity tables use the shot noise of the mid-range amplitude; amplitude
    tables use the homodyne quadrature noise (standard deviation 1/2).
    """
    if table.scheme is LevelScheme.INTENSITY:
        return kappa * 0.5 * (table.alpha_min + table.alpha_max)
    return 0.5


def design_neighbor_error(table: LevelTable, kappa: float = 1.0) -> float:
    if table.scheme is LevelScheme.INTENSITY:
        return neighbor_error_prob(kappa**2 * table.delta, design_sigma(table, kappa))
    return neighbor_error_prob(kappa * table.delta, design_sigma(table, kappa))


def pairwise_error_mc(table: LevelTable, lower: int, n: int, rng: np.random.Generator, kappa: float = 1.0,
                      chunk: int = 1 << 20) -> tuple[int, int]:
    """Monte Carlo of direct detection restricted to levels ``lower`` and ``lower+1``.

    Equiprobable symbols, exact per-level shot noise, midpoint threshold.
    Returns ``(errors, trials)``.
    """
    levels = table.signal_values(kappa, "direct")
    a, b = levels[lower], levels[lower + 1]
    thr = 0.5 * (a + b)
    errors = 0
    done = 0
    while done < n:
        k = min(chunk, n - done)
        upper = rng.random(k) < 0.5
        mean = np.where(upper, b, a)
        y = np.maximum(mean + np.sqrt(mean) * rng.standard_normal(k), 0.0)
        # nearest of two levels; ties to the lower one
        decided_upper = y > thr
        errors += int(np.count_nonzero(decided_upper != upper))
        done += k
    return errors, n


@dataclass
class DetectionStats:
    trials: int
    errors: int
    offset_hist: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.errors <= self.trials:
            raise ValueError("errors must lie in [0, trials]")

    @property
    def ber(self) -> float:
        return self.errors / self.trials if self.trials else float("nan")

    @classmethod
    def from_arrays(cls, truth, decided, offsets=None) -> "DetectionStats":
        truth = np.asarray(truth)
        decided = np.asarray(decided)
        hist = {}
        if offsets is not None:
            vals, counts = np.unique(np.asarray(offsets)[truth != decided], return_counts=True)
            hist = {int(v): int(c) for v, c in zip(vals, counts)}
        return cls(int(truth.size), int(np.count_nonzero(truth != decided)), hist)

    def merge(self, other: "DetectionStats") -> "DetectionStats":
        hist = Counter(self.offset_hist)
        hist.update(other.offset_hist)
        return DetectionStats(self.trials + other.trials, self.errors + other.errors,
                              dict(sorted(hist.items())))

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "errors": self.errors,
            "ber": self.ber,
            "offset_hist": {str(k): v for k, v in sorted(self.offset_hist.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# --------------------------------------------------------------------------
# eye patterns


def eye_trace(levels, rng: np.random.Generator, *, samples_per_slot: int = 8, rise: float = 0.3,
              offset=None, shot_noise: bool = True):
    """Sampled direct-detection waveform for a symbol sequence.

    ``levels`` are the noiseless per-symbol intensities.  Within each slot the
    waveform moves from the previous level to the current one along a
    raised-cosine edge lasting ``rise`` of the slot, then holds.  ``offset``
    (per symbol) is subtracted after noise, e.g. a keyed decision threshold.

    Returns ``(phase, value, slot)`` arrays of length ``len(levels) * samples_per_slot``.
    """
    levels = np.asarray(levels, dtype=float)
    n = levels.size
    phase = np.arange(samples_per_slot) / samples_per_slot
    edge = 0.5 * (1 - np.cos(np.pi * np.minimum(phase / rise, 1.0))) if rise > 0 else np.ones_like(phase)
    prev = np.concatenate([levels[:1], levels[:-1]])
    wave = prev[:, None] + (levels - prev)[:, None] * edge[None, :]
    if shot_noise:
        wave = np.maximum(wave + np.sqrt(np.maximum(wave, 0.0)) * rng.standard_normal(wave.shape), 0.0)
    if offset is not None:
        wave = wave - np.asarray(offset, dtype=float)[:, None]
    slot = np.repeat(np.arange(n), samples_per_slot)
    return np.tile(phase, n), wave.ravel(), slot


@dataclass
class EyeHistogram:
    phase_bins: int
    value_edges: np.ndarray
    counts: np.ndarray
    level_ids: np.ndarray
    level_counts: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def empty(self) -> bool:
        return self.total == 0

    def _quantile(self, row: np.ndarray, q: float) -> float:
        cum = np.cumsum(row)
        target = q * cum[-1]
        k = int(np.searchsorted(cum, target, side="left"))
        before = cum[k - 1] if k else 0
        frac = (target - before) / row[k] if row[k] else 0.0
        lo, hi = self.value_edges[k], self.value_edges[k + 1]
        return float(lo + frac * (hi - lo))

    def opening(self, q: float = 1e-3) -> float | None:
        """Smallest gap between adjacent levels' ``q`` / ``1-q`` envelopes at mid-slot.

        Levels are ordered by their mean mid-slot reading.  ``None`` when
        fewer than two levels were observed.
        """
        rows = self.level_counts[self.level_counts.sum(axis=1) > 0]
        if rows.shape[0] < 2:
            return None
        centers = 0.5 * (self.value_edges[1:] + self.value_edges[:-1])
        means = (rows * centers).sum(axis=1) / rows.sum(axis=1)
        rows = rows[np.argsort(means, kind="stable")]
        lows = [self._quantile(r, q) for r in rows]
        highs = [self._quantile(r, 1 - q) for r in rows]
        return float(min(lows[i + 1] - highs[i] for i in range(len(rows) - 1)))

    def merge(self, other: "EyeHistogram") -> "EyeHistogram":
        if self.phase_bins != other.phase_bins or not np.array_equal(self.value_edges, other.value_edges):
            raise ValueError("eye histograms use different binning")
        ids = np.union1d(self.level_ids, other.level_ids)
        lc = np.zeros((ids.size, self.level_counts.shape[1]), dtype=np.int64)
        for src in (self, other):
            lc[np.searchsorted(ids, src.level_ids)] += src.level_counts
        meta = dict(self.metadata)
        meta["samples"] = self.metadata.get("samples", 0) + other.metadata.get("samples", 0)
        return EyeHistogram(self.phase_bins, self.value_edges, self.counts + other.counts, ids, lc, meta)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["slot_bin", "intensity_bin", "count"])
        for (i, j), c in np.ndenumerate(self.counts):
            if c:
                writer.writerow([i, j, int(c)])
        return buf.getvalue()

    def metadata_json(self) -> str:
        opening = self.opening()
        meta = dict(self.metadata)
        meta.update(
            samples=self.total,
            phase_bins=self.phase_bins,
            value_range=[float(self.value_edges[0]), float(self.value_edges[-1])],
            value_bins=int(self.value_edges.size - 1),
            n_levels=int(self.level_ids.size),
            opening=opening,
            opening_defined=opening is not None,
            eye_open=bool(opening is not None and opening > 0),
        )
        return json.dumps(meta, indent=2, sort_keys=True)


def eye_histogram(phase, value, level, *, phase_bins: int = 8, value_bins: int = 2048,
                  value_range: tuple[float, float] | None = None, metadata: dict | None = None) -> EyeHistogram:
    """Bin tagged trace samples into a slot-phase x reading histogram.

    ``level`` labels every sample with the symbol level of its slot; the
    mid-slot column (the phase bin holding 0.5) is additionally kept per
    level so eye openings can be evaluated after merging.
    """
    phase = np.asarray(phase, dtype=float)
    value = np.asarray(value, dtype=float)
    level = np.asarray(level)
    if value_range is None:
        if value.size:
            lo, hi = float(value.min()), float(value.max())
            pad = 1e-9 + 1e-6 * max(abs(lo), abs(hi), hi - lo)
            value_range = (lo - pad, hi + pad)
        else:
            value_range = (0.0, 1.0)
    edges = np.linspace(value_range[0], value_range[1], value_bins + 1)
    pbin = np.clip((phase * phase_bins).astype(np.int64), 0, phase_bins - 1)
    vbin = np.clip(np.searchsorted(edges, value, side="right") - 1, 0, value_bins - 1)
    counts = np.zeros((phase_bins, value_bins), dtype=np.int64)
    np.add.at(counts, (pbin, vbin), 1)
    mid = pbin == int(0.5 * phase_bins)
    ids, inverse = np.unique(level[mid], return_inverse=True)
    lc = np.zeros((ids.size, value_bins), dtype=np.int64)
    np.add.at(lc, (inverse, vbin[mid]), 1)
    meta = dict(metadata or {})
    meta["samples"] = int(value.size)
    return EyeHistogram(phase_bins, edges, counts, ids, lc, meta)
