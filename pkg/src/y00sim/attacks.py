"""Known-plaintext attacks: conventional XOR cipher and Y-00.

The Y-00 attacker sits at the transmitter, knows the data bits of an initial
window, and measures every symbol.  The window covers the slots whose running
key spans ``known_bits`` generator bits, i.e. ``ceil(known_bits / log2 M)``
symbols.  Keys are ranked by the exact Gaussian log-likelihood of the
observed readings under the symbol sequence each key would have produced.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .channel import MeasurementMode, MeasurementOutcome, measure, parallel_map, trial_rng
from .keystream import (
    LFSR,
    MAXIMAL_TAPS,
    DeBruijnNFSR,
    berlekamp_massey,
    bits_per_block,
    blocks_from_bits,
    connection_to_taps,
    de_bruijn_sequence,
    extend_sequence,
    unicity_metrics,
)
from .modem import LevelTable, design_levels, encode, key_parity, operating_point_table
from .receiver import bob_detect, neighbor_error_prob
from .secmetrics import combinations_Q, required_plaintext_Z

__all__ = [
    "BRUTE_FORCE_MAX_KEY_BITS",
    "ComplexityGuard",
    "BreakResult",
    "break_conventional",
    "xor_cipher",
    "AttackConfig",
    "TrialResult",
    "AttackReport",
    "heterodyne_kpa",
    "parity_attack",
    "empirical_J",
]

BRUTE_FORCE_MAX_KEY_BITS = 24


class ComplexityGuard(RuntimeError):
    """A requested brute-force search exceeds the desk-scale key-size cap."""


# --------------------------------------------------------------------------
# conventional stream cipher


def xor_cipher(bits, keystream) -> np.ndarray:
    return np.bitwise_xor(np.asarray(bits, dtype=np.uint8), np.asarray(keystream, dtype=np.uint8))


@dataclass
class BreakResult:
    success: bool
    message: str
    required_bits: int
    linear_complexity: int | None = None
    taps: list[int] | None = None
    key_state: list[int] | None = None
    residual_plaintext: np.ndarray | None = field(default=None, repr=False)


def break_conventional(known_plain, cipher, key_len: int, residual_cipher=None) -> BreakResult:
    """Recover an LFSR-keyed XOR cipher from aligned known plaintext.

    ``known_plain`` and ``cipher`` cover the start of the stream.  The
    keystream they reveal is fed to Berlekamp-Massey; a register no longer
    than ``key_len`` is accepted as the generator.  ``residual_cipher`` (the
    ciphertext that follows) is then decrypted with the regenerated keystream.
    """
    known_plain = np.asarray(known_plain, dtype=np.uint8)
    cipher = np.asarray(cipher, dtype=np.uint8)
    if known_plain.shape != cipher.shape:
        raise ValueError("known plaintext and ciphertext lengths differ")
    need = 2 * key_len
    if known_plain.size < need:
        return BreakResult(False, f"need {need} known bits, have {known_plain.size}", need)
    running = xor_cipher(known_plain, cipher)
    L, conn = berlekamp_massey(running)
    if L > key_len or L == 0 or conn[-1] == 0:
        return BreakResult(False, f"linear complexity {L} does not fit a {key_len}-bit LFSR (model mismatch)",
                           need, linear_complexity=L)
    residual = None
    if residual_cipher is not None:
        residual_cipher = np.asarray(residual_cipher, dtype=np.uint8)
        stream = extend_sequence(conn, running, running.size + residual_cipher.size)
        residual = xor_cipher(residual_cipher, stream[running.size :])
    return BreakResult(True, "key recovered", need, L, connection_to_taps(conn),
                       [int(b) for b in running[:L]], residual)


# --------------------------------------------------------------------------
# Y-00 attack configuration


@dataclass
class AttackConfig:
    key_len: int = 16
    kind: str = "lfsr"
    M: int = 64
    alpha_max: float = 100.0
    alpha_min: float | None = None  # None: operating-point table (amplitude step 0.1)
    kappa: float = 1.0
    eve_mode: str = "heterodyne"
    known_bits: int | None = None  # None: 2|K|
    trials: int = 200
    master_seed: int = 0
    osk: bool = True
    noise_scale: float = 1.0
    residual_bits: int = 1000
    candidate_log_window: float = 8.0
    coverage: float = 0.95
    parity_symbols: int = 20000

    def __post_init__(self):
        if self.kind not in ("lfsr", "nfsr-debruijn"):
            raise ValueError(f"unknown PRNG kind {self.kind!r}")
        if self.kind == "lfsr" and self.key_len not in MAXIMAL_TAPS:
            raise ValueError(f"no maximal LFSR for |K|={self.key_len}")
        if self.known_bits is None:
            self.known_bits = 2 * self.key_len
        if self.M < 2:
            raise ValueError("M must be at least 2")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be non-negative")
        MeasurementMode(self.eve_mode)

    @property
    def f_of_K(self) -> int:
        return unicity_metrics(self.key_len, self.kind, 1.0, 0.0).f_of_K

    @property
    def key_window_slots(self) -> int:
        return math.ceil(self.known_bits / math.ceil(math.log2(self.M)))

    def table(self) -> LevelTable:
        if self.alpha_min is None:
            return operating_point_table(self.M, self.alpha_max)
        return design_levels(self.alpha_min, self.alpha_max, self.M, "intensity")


# --------------------------------------------------------------------------
# key space helpers


def _int_bits(values: np.ndarray, width: int) -> np.ndarray:
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((values[:, None].astype(np.int64) >> shifts) & 1).astype(np.uint8)


def _all_key_streams(kind: str, key_len: int, n_bits: int) -> tuple[np.ndarray, np.ndarray]:
    """Every key and the first ``n_bits`` of its stream, as ``(keys, bits)``."""
    if kind == "lfsr":
        keys = np.arange(1, 1 << key_len, dtype=np.int64)
        g = LFSR.maximal(key_len, 1).generator_matrix(n_bits)
        bits = ((_int_bits(keys, key_len).astype(np.int32) @ g.T.astype(np.int32)) & 1).astype(np.uint8)
        return keys, bits
    seq = de_bruijn_sequence(key_len)
    ext = np.concatenate([seq, np.resize(seq, max(n_bits, key_len))])
    windows = sliding_window_view(ext, max(n_bits, key_len))[: seq.size]
    state_bits = windows[:, :key_len]
    keys = (state_bits.astype(np.int64) @ (1 << np.arange(key_len - 1, -1, -1))).astype(np.int64)
    return keys, np.ascontiguousarray(windows[:, :n_bits])


def _generator(kind: str, key_len: int, key: int):
    if kind == "lfsr":
        return LFSR.maximal(key_len, int(key))
    return DeBruijnNFSR(key_len, int(key))


def _random_key(kind: str, key_len: int, rng: np.random.Generator) -> int:
    lo = 1 if kind == "lfsr" else 0
    return int(rng.integers(lo, 1 << key_len))


# --------------------------------------------------------------------------
# likelihoods


def _readings(y, mode: MeasurementMode) -> np.ndarray:
    return np.real(y) if mode is not MeasurementMode.DIRECT else np.asarray(y, dtype=float)


def _level_loglik(y, table: LevelTable, cfg: AttackConfig) -> np.ndarray:
    """``log p(y_t | level i)`` up to a per-slot constant, shape ``(slots, 2M)``.

    Zero noise degenerates to 0 for exact matches and ``-inf`` otherwise.
    """
    mode = MeasurementMode(cfg.eve_mode)
    r = _readings(y, mode)[:, None]
    s = cfg.noise_scale
    if mode is MeasurementMode.DIRECT:
        mu = (cfg.kappa**2 * table.intensities)[None, :]
        if s == 0:
            return np.where(np.isclose(r, mu, rtol=0, atol=1e-9 * max(1.0, float(mu.max()))), 0.0, -np.inf)
        var = s**2 * mu
        return -0.5 * (r - mu) ** 2 / var - 0.5 * np.log(var)
    mu = (cfg.kappa * table.amplitudes)[None, :]
    if s == 0:
        return np.where(np.isclose(r, mu, rtol=0, atol=1e-9 * max(1.0, float(mu.max()))), 0.0, -np.inf)
    var = s**2 * (0.5 if mode is MeasurementMode.HETERODYNE else 0.25)
    return -0.5 * (r - mu) ** 2 / var


def _measure(amplitudes, cfg: AttackConfig, rng: np.random.Generator):
    a = cfg.kappa * np.asarray(amplitudes, dtype=float)
    mode = MeasurementMode(cfg.eve_mode)
    if cfg.noise_scale == 0:
        return a.astype(complex) if mode is MeasurementMode.HETERODYNE else (a**2 if mode is MeasurementMode.DIRECT else a)
    # scale the quantum noise around the noiseless reading
    out = measure(a, mode, rng).value
    if cfg.noise_scale != 1.0:
        clean = a**2 if mode is MeasurementMode.DIRECT else a
        out = clean + cfg.noise_scale * (out - clean)
    return out


def empirical_J(offsets, coverage: float = 0.95) -> int:
    """Width ``2w + 1`` of the basis window holding ``coverage`` of Eve's errors."""
    offsets = np.abs(np.asarray(offsets))
    errs = np.sort(offsets[offsets != 0])
    if errs.size == 0:
        return 1
    w = int(errs[max(0, math.ceil(coverage * errs.size) - 1)])
    return 2 * w + 1


# --------------------------------------------------------------------------
# heterodyne known-plaintext attack


@dataclass
class TrialResult:
    trial: int
    true_key: int
    true_rank: int
    success: bool
    J_hat: int
    mean_candidates: float
    residual_ber: float | None
    best_wrong_key: int | None


@dataclass
class AttackReport:
    config: dict
    window_slots: int
    keys_tested: int
    guard_refused: bool
    neighbor_error: float
    trials: list[TrialResult] = field(default_factory=list)
    candidate_sizes: list[int] = field(default_factory=list)
    J_hat: int | None = None
    Q_hat: dict | None = None
    Z_hat: dict | None = None
    success_rate: float | None = None
    mean_residual_ber: float | None = None
    rank_hist: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "true_rank", "J_hat", "success"])
        for t in self.trials:
            w.writerow([t.trial, t.true_rank, t.J_hat, int(t.success)])
        return buf.getvalue()


class _KeySpace:
    """Per-configuration precomputation shared by all trials."""

    def __init__(self, cfg: AttackConfig):
        self.cfg = cfg
        self.slots = cfg.key_window_slots
        self.per = bits_per_block(cfg.M, cfg.osk)
        keys, bits = _all_key_streams(cfg.kind, cfg.key_len, self.slots * self.per)
        self.keys = keys
        self.values, self.osk = blocks_from_bits(bits, cfg.M, cfg.osk)
        self.parity = key_parity(self.values).astype(np.uint8)
        order = np.argsort(keys)
        self.sorted_keys = keys[order]
        self.sorted_rows = order

    def row_of(self, key: int) -> int:
        return int(self.sorted_rows[np.searchsorted(self.sorted_keys, key)])


def _candidate_posterior(ll: np.ndarray, x: np.ndarray, cfg: AttackConfig) -> np.ndarray:
    """``log p(y_t | basis m, x_t)`` marginalised over the OSK bit, shape ``(slots, M)``."""
    M = cfg.M
    m = np.arange(M)
    par = key_parity(m)
    rows = np.arange(ll.shape[0])[:, None]
    lower = ll[rows, m[None, :]]
    upper = ll[rows, (m + M)[None, :]]
    # bit-to-half mapping given x and parity, before OSK
    half = (x[:, None] ^ par[None, :]).astype(bool)
    direct = np.where(half, upper, lower)
    if not cfg.osk:
        return direct
    flipped = np.where(half, lower, upper)
    return np.logaddexp(direct, flipped) - math.log(2)


def _run_trial(trial: int, cfg: AttackConfig, table: LevelTable, space: _KeySpace | None):
    rng = trial_rng(cfg.master_seed, trial)
    key = _random_key(cfg.kind, cfg.key_len, rng)
    slots = cfg.key_window_slots
    per = bits_per_block(cfg.M, cfg.osk)
    n_res = cfg.residual_bits
    gen = _generator(cfg.kind, cfg.key_len, key)
    values, osk = blocks_from_bits(gen.next_bits((slots + n_res) * per), cfg.M, cfg.osk)
    x = rng.integers(0, 2, slots + n_res).astype(np.int64)
    idx = encode(x, (values, osk), table)
    y = _measure(table.amplitudes[idx], cfg, rng)

    ll = _level_loglik(y[:slots], table, cfg)
    post = _candidate_posterior(ll, x[:slots], cfg)
    best = post.max(axis=1, keepdims=True)
    cand = post >= best - cfg.candidate_log_window
    if cfg.noise_scale == 0:
        cand = np.isfinite(post)
    m_hat = post.argmax(axis=1)
    offsets = m_hat - values[:slots]
    sizes = cand.sum(axis=1)

    if space is None:
        return TrialResult(trial, key, 0, False, empirical_J(offsets, cfg.coverage), float(sizes.mean()),
                           None, None), offsets, sizes

    pred = space.values + ((x[None, :slots] ^ space.parity ^ space.osk) * cfg.M)
    scores = ll[np.arange(slots)[None, :], pred].sum(axis=1)
    true_row = space.row_of(key)
    true_score = scores[true_row]
    rank = 1 + int(np.count_nonzero(scores > true_score))
    masked = scores.copy()
    masked[true_row] = -np.inf
    wrong_row = int(np.argmax(masked))
    wrong_key = int(space.keys[wrong_row])

    residual_ber = None
    if n_res:
        wgen = _generator(cfg.kind, cfg.key_len, wrong_key)
        wv, wo = blocks_from_bits(wgen.next_bits((slots + n_res) * per), cfg.M, cfg.osk)
        mode = MeasurementMode(cfg.eve_mode)
        guess = bob_detect(MeasurementOutcome(mode, y[slots:]), (wv[slots:], wo[slots:]), table, cfg.kappa)
        residual_ber = float(np.mean(guess != x[slots:]))
    result = TrialResult(trial, key, rank, rank == 1, empirical_J(offsets, cfg.coverage), float(sizes.mean()),
                         residual_ber, wrong_key)
    return result, offsets, sizes


def _eve_neighbor_error(cfg: AttackConfig, table: LevelTable) -> float:
    mode = MeasurementMode(cfg.eve_mode)
    if mode is MeasurementMode.DIRECT:
        mid = (cfg.kappa * 0.5 * (table.alpha_min + table.alpha_max))
        return neighbor_error_prob(cfg.kappa**2 * table.delta, max(cfg.noise_scale, 1e-300) * mid)
    step = cfg.kappa * float(np.mean(np.diff(table.amplitudes)))
    sd = math.sqrt(0.5 if mode is MeasurementMode.HETERODYNE else 0.25)
    return neighbor_error_prob(step, max(cfg.noise_scale, 1e-300) * sd)


def heterodyne_kpa(cfg: AttackConfig, workers: int = 1) -> AttackReport:
    """Known-plaintext attack with brute-force key ranking.

    Above ``BRUTE_FORCE_MAX_KEY_BITS`` the key search is skipped and the report
    carries only the per-symbol analysis (``guard_refused=True``).
    """
    table = cfg.table()
    refused = cfg.key_len > BRUTE_FORCE_MAX_KEY_BITS
    space = None if refused else _KeySpace(cfg)
    outs = parallel_map(lambda t: _run_trial(t, cfg, table, space), range(cfg.trials), workers)
    results = [o[0] for o in outs]
    offsets = np.concatenate([o[1] for o in outs]) if outs else np.zeros(0, dtype=int)
    sizes = np.concatenate([o[2] for o in outs]) if outs else np.zeros(0, dtype=int)
    J = empirical_J(offsets, cfg.coverage)
    f = cfg.f_of_K
    Q = combinations_Q(J, f, cfg.M)
    Z = required_plaintext_Z(f, cfg.M, Q, J=J).Z
    report = AttackReport(
        config=asdict(cfg),
        window_slots=cfg.key_window_slots,
        keys_tested=0 if refused else int(space.keys.size),
        guard_refused=refused,
        neighbor_error=_eve_neighbor_error(cfg, table),
        trials=results,
        candidate_sizes=[int(s) for s in sizes],
        J_hat=J,
        Q_hat=Q.to_dict(),
        Z_hat=Z.to_dict(),
    )
    if not refused and results:
        report.success_rate = float(np.mean([r.success for r in results]))
        bers = [r.residual_ber for r in results if r.residual_ber is not None]
        report.mean_residual_ber = float(np.mean(bers)) if bers else None
        ranks, counts = np.unique([r.true_rank for r in results], return_counts=True)
        report.rank_hist = {str(int(r)): int(c) for r, c in zip(ranks, counts)}
    return report


# --------------------------------------------------------------------------
# indirect (half-plane) observable


def _mutual_information(a: np.ndarray, b: np.ndarray) -> float:
    joint = np.zeros((2, 2))
    np.add.at(joint, (a.astype(int), b.astype(int)), 1)
    joint /= joint.sum()
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0, joint * np.log2(joint / (pa * pb)), 0.0)
    return float(terms.sum())


def parity_attack(cfg: AttackConfig) -> dict:
    """Measure only the up/down observable and see what it reveals.

    Reports the observable's error rate, the mutual information between the
    parity Eve infers with known plaintext and the true running-key parity,
    the data-bit error Eve makes even when handed the true parity, and how
    many running-key values remain per parity class.
    """
    table = cfg.table()
    rng = trial_rng(cfg.master_seed, 0)
    key = _random_key(cfg.kind, cfg.key_len, rng)
    n = cfg.parity_symbols
    gen = _generator(cfg.kind, cfg.key_len, key)
    values, osk = blocks_from_bits(gen.next_bits(n * bits_per_block(cfg.M, cfg.osk)), cfg.M, cfg.osk)
    x = rng.integers(0, 2, n).astype(np.int64)
    idx = encode(x, (values, osk), table)
    y = _measure(table.amplitudes[idx], cfg, rng)
    mode = MeasurementMode(cfg.eve_mode)
    levels = table.signal_values(cfg.kappa, "direct" if mode is MeasurementMode.DIRECT else "amplitude")
    midline = 0.5 * (levels[cfg.M - 1] + levels[cfg.M])
    l_true = (idx >= cfg.M).astype(np.int64)
    l_hat = (_readings(y, mode) >= midline).astype(np.int64)
    kt = key_parity(values).astype(np.int64)
    k_hat = l_hat ^ x
    x_hat = l_hat ^ kt
    per_class = [int(np.count_nonzero(key_parity(np.arange(cfg.M)) == p)) for p in (0, 1)]
    return {
        "M": cfg.M,
        "symbols": n,
        "osk": cfg.osk,
        "l_error_rate": float(np.mean(l_hat != l_true)),
        "parity_error_rate": float(np.mean(k_hat != kt)),
        "mutual_information_bits": _mutual_information(k_hat, kt),
        "data_error_given_parity": float(np.mean(x_hat != x)),
        "values_per_parity_class": per_class,
        "parity_determines_key": max(per_class) == 1,
    }
