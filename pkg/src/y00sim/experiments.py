"""End-to-end transmission experiments: link simulation, eye patterns, BER vs distance.

Every driver is a pure function of its configuration and a master seed.
Randomness is drawn per chunk from ``trial_rng(seed, stream, chunk)`` so the
results do not depend on the number of worker threads.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

from .channel import ChannelParams, MeasurementMode, measure, parallel_map, trial_rng
from .keystream import DeBruijnNFSR, LFSR, PrngSpec, running_key_arrays
from .modem import LevelTable, design_levels, encode
from .receiver import DetectionStats, EyeHistogram, bob_detect, design_neighbor_error, eve_keyless_bit, eve_mary_detect, eye_histogram, eye_trace
from .secmetrics import bob_error_closed, max_distance

__all__ = [
    "LinkConfig",
    "EyeConfig",
    "BerDistanceConfig",
    "SimulationResult",
    "EyeResult",
    "BerDistanceResult",
    "make_prng",
    "run_simulation",
    "run_eye",
    "run_ber_distance",
]

# stream labels for trial_rng
_KEY_STREAM = 0
_DATA_STREAM = 1
_EYE_STREAM = 2
_SWEEP_STREAM = 3
_EVE_MC_STREAM = 4


@dataclass
class LinkConfig:
    key_len: int = 20
    kind: str = "lfsr"
    M: int = 128
    alpha_min: float = 80.0
    alpha_max: float = 100.0
    length_km: float = 20.0
    loss_db_per_km: float = 0.2
    kappa: float | None = None  # overrides the fibre model when set
    osk: bool = True
    n_bits: int = 1_000_000
    chunk: int = 1 << 16
    raw_samples: int = 1000

    def table(self) -> LevelTable:
        return design_levels(self.alpha_min, self.alpha_max, self.M, "intensity")

    def link_kappa(self) -> float:
        if self.kappa is not None:
            return ChannelParams(self.kappa).kappa
        return ChannelParams.from_fiber(self.loss_db_per_km, self.length_km).kappa


@dataclass
class EyeConfig(LinkConfig):
    n_bits: int = 20_000
    samples_per_slot: int = 8
    rise: float = 0.3
    phase_bins: int = 8
    value_bins: int = 2048
    quantile: float = 1e-3


@dataclass
class BerDistanceConfig:
    key_len: int = 20
    kind: str = "lfsr"
    M: int = 100
    alpha_min: float = 80.0
    alpha_max: float = 100.0
    loss_db_per_km: float = 0.2
    step_km: float = 5.0
    span_km: float = 300.0
    osk: bool = True
    n_bits: int = 2_000_000
    eve_trials: int = 10_000_000

    def table(self) -> LevelTable:
        return design_levels(self.alpha_min, self.alpha_max, self.M, "intensity")


def make_prng(kind: str, key_len: int, seed: int) -> PrngSpec:
    """Generator keyed by a secret derived from the master seed (never all-zero)."""
    key = int(trial_rng(seed, _KEY_STREAM).integers(1, 1 << key_len))
    if kind == "lfsr":
        return LFSR.maximal(key_len, key)
    if kind == "nfsr-debruijn":
        return DeBruijnNFSR(key_len, key)
    raise ValueError(f"unknown PRNG kind {kind!r}")


def _transmit(cfg, seed: int, n: int):
    """Data bits, running key and symbol indices for ``n`` symbols."""
    table = cfg.table()
    values, osk = running_key_arrays(make_prng(cfg.kind, cfg.key_len, seed), cfg.M, n, cfg.osk)
    x = trial_rng(seed, _DATA_STREAM).integers(0, 2, n).astype(np.int64)
    idx = np.asarray(encode(x, (values, osk), table)).reshape(n)
    return table, x, values, osk, idx


# --------------------------------------------------------------------------
# link simulation


@dataclass
class SimulationResult:
    kappa: float
    bob: DetectionStats
    eve_symbol: DetectionStats
    eve_bit: DetectionStats
    raw_csv: str

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "bob": self.bob.to_dict(),
            "eve_symbol": self.eve_symbol.to_dict(),
            "eve_bit": self.eve_bit.to_dict(),
        }


def run_simulation(cfg: LinkConfig, seed: int = 0, workers: int = 1) -> SimulationResult:
    """Alice to Bob over the fibre with keyed direct detection; Eve taps at the transmitter.

    Eve reads the full-power signal by direct detection, makes a 2M-ary
    nearest-level decision, and infers a bit from it without the key.
    """
    n = cfg.n_bits
    kappa = cfg.link_kappa()
    table, x, values, osk, idx = _transmit(cfg, seed, n)
    starts = list(range(0, n, cfg.chunk))

    def work(c):
        lo = starts[c]
        sl = slice(lo, min(lo + cfg.chunk, n))
        rng = trial_rng(seed, _DATA_STREAM, c + 1)
        amp = table.amplitudes[idx[sl]]
        bob_out = measure(kappa * amp, MeasurementMode.DIRECT, rng)
        eve_out = measure(amp, MeasurementMode.DIRECT, rng)
        bob_bit = bob_detect(bob_out, (values[sl], osk[sl]), table, kappa)
        eve_idx = eve_mary_detect(eve_out, table)
        return bob_bit, eve_idx, bob_out.value, eve_out.value

    parts = parallel_map(work, range(len(starts)), workers)
    empty = np.zeros(0)
    bob_bit = np.concatenate([p[0] for p in parts]) if parts else empty.astype(np.int64)
    eve_idx = np.concatenate([p[1] for p in parts]) if parts else empty.astype(np.int64)
    bob_y = np.concatenate([p[2] for p in parts]) if parts else empty
    eve_y = np.concatenate([p[3] for p in parts]) if parts else empty
    eve_bit = eve_keyless_bit(eve_idx, table)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["symbol", "data_bit", "key_value", "osk_bit", "tx_index", "bob_reading", "bob_bit",
                "eve_reading", "eve_index", "eve_bit"])
    for i in range(min(cfg.raw_samples, n)):
        w.writerow([i, int(x[i]), int(values[i]), int(osk[i]), int(idx[i]), repr(float(bob_y[i])),
                    int(bob_bit[i]), repr(float(eve_y[i])), int(eve_idx[i]), int(eve_bit[i])])

    return SimulationResult(
        kappa=kappa,
        bob=DetectionStats.from_arrays(x, bob_bit),
        eve_symbol=DetectionStats.from_arrays(idx, eve_idx, eve_idx - idx),
        eve_bit=DetectionStats.from_arrays(x, eve_bit),
        raw_csv=buf.getvalue(),
    )


# --------------------------------------------------------------------------
# eye patterns


@dataclass
class EyeResult:
    bob: EyeHistogram
    eve: EyeHistogram

    def openings(self) -> dict:
        return {"bob_opening": self.bob.opening(self.bob.metadata.get("quantile", 1e-3)),
                "eve_opening": self.eve.opening(self.eve.metadata.get("quantile", 1e-3)),
                "empty": self.bob.empty and self.eve.empty}


def run_eye(cfg: EyeConfig, seed: int = 0) -> EyeResult:
    """Eye histograms for Bob's keyed view and Eve's raw view.

    Bob's trace is his received intensity minus the keyed decision threshold,
    labelled by which half of the basis pair was sent.  Eve's trace is the
    full-power intensity at the transmitter, labelled by level index.
    """
    n = cfg.n_bits
    kappa = cfg.link_kappa()
    table, x, values, osk, idx = _transmit(cfg, seed, n)
    rx = kappa**2 * table.intensities
    thr = 0.5 * (rx[values] + rx[values + cfg.M])
    rng = trial_rng(seed, _EYE_STREAM)
    meta = {"M": cfg.M, "alpha_min": cfg.alpha_min, "alpha_max": cfg.alpha_max, "quantile": cfg.quantile,
            "samples_per_slot": cfg.samples_per_slot}
    common = dict(phase_bins=cfg.phase_bins, value_bins=cfg.value_bins)

    phase, val, slot = eye_trace(rx[idx], rng, samples_per_slot=cfg.samples_per_slot, rise=cfg.rise, offset=thr)
    bob = eye_histogram(phase, val, (idx >= cfg.M).astype(np.int64)[slot], **common,
                        metadata={**meta, "viewer": "bob", "kappa": kappa})
    phase, val, slot = eye_trace(table.intensities[idx], rng, samples_per_slot=cfg.samples_per_slot, rise=cfg.rise)
    eve = eye_histogram(phase, val, idx[slot], **common, metadata={**meta, "viewer": "eve", "kappa": 1.0})
    return EyeResult(bob, eve)


# --------------------------------------------------------------------------
# BER versus distance


@dataclass
class BerDistanceResult:
    rows: list[dict]
    closed_form_km: float
    mc_crossing_km: float | None
    eve_mc_error: float
    eve_closed_error: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["km", "kappa", "bob_ber", "bob_closed", "eve_error", "eve_closed", "advantage"]
        w.writerow(cols)
        for r in self.rows:
            w.writerow([repr(float(r[c])) for c in cols])
        return buf.getvalue()

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("rows")
        return d


def _eve_neighbor_mc(table: LevelTable, n: int, rng: np.random.Generator, chunk: int = 1 << 20) -> float:
    """Two-neighbour direct-detection error averaged over all adjacent level pairs."""
    levels = table.intensities
    errors = 0
    done = 0
    while done < n:
        k = min(chunk, n - done)
        lower = rng.integers(0, levels.size - 1, k)
        upper = rng.random(k) < 0.5
        a, b = levels[lower], levels[lower + 1]
        mean = np.where(upper, b, a)
        y = mean + np.sqrt(mean) * rng.standard_normal(k)
        errors += int(np.count_nonzero((y > 0.5 * (a + b)) != upper))
        done += k
    return errors / n if n else float("nan")


def run_ber_distance(cfg: BerDistanceConfig, seed: int = 0) -> BerDistanceResult:
    """Sweep fibre length and compare Bob's keyed BER with Eve's keyless error.

    Bob's noise draws are shared across lengths (common random numbers), so
    his simulated BER can only grow with distance.  Eve sits at the
    transmitter, so her error is simulated once.
    """
    table, x, values, osk, idx = _transmit(cfg, seed, cfg.n_bits)
    z = trial_rng(seed, _SWEEP_STREAM).standard_normal(cfg.n_bits)
    intens = table.intensities[idx]
    lo = table.intensities[values]
    hi = table.intensities[values + cfg.M]
    sent_upper = idx >= cfg.M
    # reading >= threshold  <=>  z >= kappa * (mid - I) / sqrt(I)
    scaled = (0.5 * (lo + hi) - intens) / np.sqrt(intens)

    eve_mc = _eve_neighbor_mc(table, cfg.eve_trials, trial_rng(seed, _EVE_MC_STREAM))
    eve_closed = design_neighbor_error(table)
    report = max_distance(table, cfg.loss_db_per_km, step_km=cfg.step_km, span_km=cfg.span_km)
    rows = []
    for km in np.arange(0.0, cfg.span_km + 0.5 * cfg.step_km, cfg.step_km):
        kappa = ChannelParams.from_fiber(cfg.loss_db_per_km, float(km)).kappa
        decided_upper = z >= kappa * scaled
        ber = float(np.count_nonzero(decided_upper != sent_upper)) / cfg.n_bits if cfg.n_bits else float("nan")
        rows.append({"km": float(km), "kappa": kappa, "bob_ber": ber, "bob_closed": bob_error_closed(table, kappa),
                     "eve_error": eve_mc, "eve_closed": eve_closed, "advantage": eve_mc - ber})
    crossing = next((r["km"] for r in rows if r["bob_ber"] >= r["eve_error"]), None)
    return BerDistanceResult(rows, report.distance_km, crossing, eve_mc, eve_closed)
