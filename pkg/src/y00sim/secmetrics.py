"""Closed-form security and distance figures.

Discrimination of ``M`` symmetric coherent states ``|alpha e^{2 pi i j / M}>``
rests on the spectrum of their circulant Gram matrix.  Expanding
``exp(nbar e^{i theta})`` in powers of ``e^{i theta}`` turns every normalised
eigenvalue into a Poisson mass on a residue class::

    |c_k|^2 = (1/M) sum_j e^{2 pi i j k / M} exp(nbar (e^{2 pi i j / M} - 1))
            = P[ N = -k (mod M) ],   N ~ Poisson(nbar)

The right-hand side is a sum of positive terms, so it is evaluated in the log
domain without the catastrophic cancellation of the oscillating left-hand
side, and stays meaningful far below the double-precision underflow limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc, gammaln, logsumexp
from scipy.stats import poisson

from .channel import ChannelParams
from .modem import LevelScheme, LevelTable
from .receiver import design_neighbor_error

__all__ = [
    "NumericalError",
    "TruncationError",
    "LogCount",
    "ComplexityReport",
    "DiscriminationResult",
    "DistanceReport",
    "combinations_Q",
    "required_plaintext_Z",
    "complexity_report",
    "residue_log_masses",
    "qum_success",
    "bayes_success_symmetric",
    "discriminate_symmetric",
    "helstrom_binary_pure",
    "homodyne_binary_error",
    "coherent_pair_helstrom",
    "helstrom_mixed",
    "helstrom_binary_mixed_small",
    "bob_error_closed",
    "max_distance",
]

MAX_EXACT_BITS = 1 << 16


class NumericalError(ArithmeticError):
    """A computed probability left its physical range."""


class TruncationError(ValueError):
    def __init__(self, required: int, given: int):
        super().__init__(f"Fock truncation n_max={given} leaves tail mass above tolerance; need n_max >= {required}")
        self.required = required


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


# --------------------------------------------------------------------------
# brute-force complexity


@dataclass(frozen=True)
class LogCount:
    """A possibly astronomical count: ``log2`` always, exact value when cheap."""

    log2: float
    exact: int | Fraction | None = None
    log2_exact: Fraction | None = None

    def __float__(self) -> float:
        return float(self.exact) if self.exact is not None else 2.0**self.log2

    def to_dict(self) -> dict:
        out = {"log2": self.log2}
        if self.exact is not None:
            out["exact"] = str(self.exact)
        if self.log2_exact is not None:
            out["log2_exact"] = str(self.log2_exact)
        return out


def _slots(f_of_K: int, M: int):
    if _is_pow2(M):
        return Fraction(f_of_K, M.bit_length() - 1)
    return f_of_K / math.log2(M)


def combinations_Q(J: int, f_of_K: int, M: int) -> LogCount:
    """``Q = J^(f / log2 M)`` candidate running-key combinations."""
    if J < 1:
        raise ValueError("J must be at least 1")
    if M < 2:
        raise ValueError("M must be at least 2")
    e = _slots(f_of_K, M)
    log2_exact = None
    if isinstance(e, Fraction) and _is_pow2(J):
        log2_exact = e * (J.bit_length() - 1)
        log2 = float(log2_exact)
    else:
        log2 = float(e) * math.log2(J)
    exact = None
    if log2 <= MAX_EXACT_BITS:
        if isinstance(e, Fraction) and e.denominator == 1:
            exact = J ** int(e)
        elif log2_exact is not None and log2_exact.denominator == 1:
            exact = 1 << int(log2_exact)
    return LogCount(log2, exact, log2_exact)


@dataclass(frozen=True)
class ComplexityReport:
    J: int
    f_of_K: int
    M: int
    Q: LogCount
    Z: LogCount
    period_threshold: LogCount | None = None
    regime: str | None = None
    lfsr_bound_holds: bool | None = None

    def to_dict(self) -> dict:
        return {
            "J": self.J,
            "f_of_K": self.f_of_K,
            "M": self.M,
            "Q": self.Q.to_dict(),
            "Z": self.Z.to_dict(),
            "period_threshold": self.period_threshold.to_dict() if self.period_threshold else None,
            "regime": self.regime,
            "lfsr_bound_holds": self.lfsr_bound_holds,
        }


def _less(a: LogCount, b: LogCount) -> bool:
    if a.exact is not None and b.exact is not None:
        return a.exact < b.exact
    return a.log2 < b.log2


def required_plaintext_Z(f_of_K: int, M: int, Q: LogCount | int, *, J: int = 0,
                         period: int | None = None, key_len: int | None = None,
                         kind: str | None = None) -> ComplexityReport:
    """Known-plaintext length ``Z = (f / log2 M) Q`` and the attack regime.

    With ``period`` (``|K'|``) given, ``Z < |K'| / log2 M`` is reported as
    ``breakable-in-period`` and anything else as ``attack-not-completable``.
    For an LFSR (``kind='lfsr'`` and ``key_len``) the bound
    ``Z < 2^|K| - 1`` is evaluated too.
    """
    if not isinstance(Q, LogCount):
        Q = LogCount(math.log2(Q), int(Q))
    if f_of_K <= 0 or M < 2 or Q.log2 < 0:
        raise ValueError("inputs must be positive and Q >= 1")
    e = _slots(f_of_K, M)
    exact = e * Q.exact if (isinstance(e, Fraction) and Q.exact is not None) else None
    if exact is not None and isinstance(exact, Fraction) and exact.denominator == 1:
        exact = int(exact)
    Z = LogCount(math.log2(float(e)) + Q.log2, exact)

    threshold = regime = None
    if period is not None:
        b = _slots(1, M)  # 1 / log2 M
        t_exact = b * period if isinstance(b, Fraction) else None
        threshold = LogCount(math.log2(period) + math.log2(float(b)), t_exact)
        regime = "breakable-in-period" if _less(Z, threshold) else "attack-not-completable"
    bound = None
    if kind == "lfsr" and key_len is not None:
        bound = _less(Z, LogCount(float(key_len), (1 << key_len) - 1))
    return ComplexityReport(J, f_of_K, M, Q, Z, threshold, regime, bound)


def complexity_report(J: int, key_len: int, M: int, kind: str = "lfsr") -> ComplexityReport:
    from .keystream import unicity_metrics

    u = unicity_metrics(key_len, kind, 1.0, 0.0)
    return required_plaintext_Z(u.f_of_K, M, combinations_Q(J, u.f_of_K, M), J=J,
                                period=u.period, key_len=key_len, kind=kind)


# --------------------------------------------------------------------------
# symmetric coherent-state discrimination


def residue_log_masses(M: int, nbar: float) -> np.ndarray:
    """``log P[N = r (mod M)]`` for ``r = 0..M-1`` and ``N ~ Poisson(nbar)``.

    Terms further than ``max(40 sqrt(nbar) + 50, M)`` from the mode are
    dropped; each of them is below its own class's leading term by more
    than ``e^-600``.  Summation order is fixed.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    if nbar == 0:
        out = np.full(M, -np.inf)
        out[0] = 0.0
        return out
    mode = int(math.floor(nbar))
    width = max(int(math.ceil(40 * math.sqrt(nbar))) + 50, M)
    lo = max(0, mode - width)
    hi = mode + width
    first_row = lo // M
    rows = hi // M - first_row + 1
    grid = np.full(rows * M, -np.inf)
    m = np.arange(lo, hi + 1)
    grid[m - first_row * M] = poisson.logpmf(m, nbar)
    return logsumexp(grid.reshape(rows, M), axis=0)


def _check_prob(p: float, what: str, eps: float = 1e-9) -> float:
    if not (-eps <= p <= 1 + eps) or math.isnan(p):
        raise NumericalError(f"{what} = {p!r} is outside [0, 1]")
    # only rounding-level excursions reach here
    return min(max(p, 0.0), 1.0)


def _eigen_masses(M: int, nbar: float) -> np.ndarray:
    # |c_k|^2 indexed by k = 0..M-1 (the residue of -k)
    logq = residue_log_masses(M, nbar)
    return logq[(-np.arange(M)) % M]


def qum_log_success(M: int, nbar: float) -> float:
    """Natural log of the unambiguous-discrimination success probability."""
    return math.log(M) + float(np.min(_eigen_masses(M, nbar)))


def qum_success(M: int, nbar: float) -> float:
    """``M min_k |c_k|^2`` for ``M`` equiprobable symmetric coherent states."""
    return _check_prob(math.exp(qum_log_success(M, nbar)), "P_D(QUM)")


def bayes_success_symmetric(M: int, nbar: float) -> float:
    """Square-root-measurement success ``(1/M^2) (sum_k sqrt(lambda_k))^2``.

    ``lambda_k = M |c_k|^2`` are the Gram eigenvalues; the square-root
    measurement is the minimum-error measurement for symmetric pure states.
    """
    logq = residue_log_masses(M, nbar)
    s = math.fsum(np.exp(0.5 * logq))
    return _check_prob(s * s / M, "P(Bayes)")


@dataclass(frozen=True)
class DiscriminationResult:
    M: int
    nbar: float
    P_D_qum: float
    log10_P_D_qum: float
    P_guess: float
    P_bayes: float
    log_domain: bool = True

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def discriminate_symmetric(M: int, nbar: float) -> DiscriminationResult:
    lq = qum_log_success(M, nbar)
    return DiscriminationResult(M, float(nbar), qum_success(M, nbar), lq / math.log(10), 1.0 / M,
                                bayes_success_symmetric(M, nbar))


# --------------------------------------------------------------------------
# binary bounds


def helstrom_binary_pure(overlap: float, priors: tuple[float, float] = (0.5, 0.5)) -> float:
    """Minimum error for two pure states: ``(1 - sqrt(1 - 4 p0 p1 |<a|b>|^2)) / 2``."""
    if not 0 <= overlap <= 1:
        raise ValueError("overlap must lie in [0, 1]")
    p0, p1 = priors
    x = 4 * p0 * p1 * overlap**2
    # 1 - sqrt(1 - x) == x / (1 + sqrt(1 - x)) without cancellation
    return 0.5 * x / (1 + math.sqrt(max(1 - x, 0.0)))


def coherent_pair_helstrom(S: float) -> float:
    """Helstrom error for ``|alpha>`` vs ``|-alpha>`` with ``|alpha|^2 = S``."""
    return helstrom_binary_pure(math.exp(-2 * S))


def homodyne_binary_error(S: float) -> float:
    """Homodyne error for ``+-alpha``: quadrature noise sd 1/2, threshold 0."""
    return 0.5 * float(erfc(2 * math.sqrt(S) / math.sqrt(2)))


def _fock_vector(alpha: float, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    if alpha == 0:
        v = np.zeros(n_max + 1)
        v[0] = 1.0
        return v
    logmag = -0.5 * alpha**2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    sign = np.where((alpha < 0) & (n % 2 == 1), -1.0, 1.0)
    return sign * np.exp(logmag)


def required_n_max(max_intensity: float, tail_tol: float = 1e-12) -> int:
    n = int(max_intensity)
    while poisson.sf(n, max_intensity) >= tail_tol:
        n += 1
    return n


def helstrom_mixed(down, up, priors: tuple[float, float] = (0.5, 0.5), n_max: int | None = None,
                   tail_tol: float = 1e-12) -> float:
    """Helstrom error between uniform mixtures of real coherent amplitudes.

    Works in the photon-number basis truncated at ``n_max``; the truncation
    must leave less than ``tail_tol`` Poisson mass for the brightest state.
    """
    down = np.asarray(down, dtype=float)
    up = np.asarray(up, dtype=float)
    if max(down.size, up.size) > 16:
        raise ValueError("desk-scale bound: at most 16 states per hypothesis")
    peak = float(max(np.max(down**2), np.max(up**2)))
    if peak > 16:
        raise ValueError("desk-scale bound: intensities up to 16 photons")
    need = required_n_max(peak, tail_tol)
    if n_max is None:
        n_max = need
    elif n_max < need:
        raise TruncationError(need, n_max)
    p0, p1 = priors

    def mixture(amps):
        vecs = np.stack([_fock_vector(a, n_max) for a in amps])
        return vecs.T @ vecs / len(amps)

    gamma = p1 * mixture(up) - p0 * mixture(down)
    trace_norm = float(np.sum(np.abs(np.linalg.eigvalsh(gamma))))
    return _check_prob(0.5 * (1 - trace_norm), "Helstrom error")


def helstrom_binary_mixed_small(table: LevelTable, n_max: int | None = None,
                                priors: tuple[float, float] = (0.5, 0.5)) -> float:
    """Error of the best up/down measurement on a small level table."""
    if table.M > 16:
        raise ValueError("desk-scale bound: M <= 16")
    amps = np.asarray(table.amplitudes)
    return helstrom_mixed(amps[: table.M], amps[table.M :], priors, n_max)


# --------------------------------------------------------------------------
# communication distance


def _tail(z):
    return 0.5 * erfc(np.asarray(z) / math.sqrt(2))


def bob_error_closed(table: LevelTable, kappa: float, excess: float = 0.0) -> float:
    """Keyed binary error averaged over bases, quantum noise only by default.

    Intensity tables use direct detection with per-level shot noise;
    amplitude tables use homodyne noise (sd 1/2).
    """
    M = table.M
    if kappa == 0:
        return 0.5
    if table.scheme is LevelScheme.INTENSITY:
        lo = kappa**2 * table.intensities[:M]
        hi = kappa**2 * table.intensities[M:]
        s_lo, s_hi = np.sqrt(lo + excess), np.sqrt(hi + excess)
    else:
        lo = kappa * table.amplitudes[:M]
        hi = kappa * table.amplitudes[M:]
        s_lo = s_hi = math.sqrt(0.25 + excess)
    half = 0.5 * (hi - lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        z_lo = np.where(s_lo > 0, half / s_lo, np.inf)
        z_hi = np.where(s_hi > 0, half / s_hi, np.inf)
    return float(np.mean(0.5 * (_tail(z_lo) + _tail(z_hi))))


@dataclass
class DistanceReport:
    distance_km: float
    loss_db_per_km: float
    eve_error: float
    Q: float | None
    diagnosis: str
    curve: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def max_distance(table: LevelTable, loss_db_per_km: float = 0.2, eve_position: str = "at-transmitter",
                 *, Q: float | None = None, step_km: float = 1.0, span_km: float | None = None,
                 excess: float = 0.0) -> DistanceReport:
    """Longest fibre over which Bob's keyed error stays below Eve's.

    Eve taps the full signal at the transmitter without the key; her error is
    the neighbouring-level error there.  Bob's error grows as the
    transmissivity ``kappa = 10^(-loss L / 20)`` shrinks the pair gap
    ``kappa^2 (alpha_max^2 - alpha_min^2) / 2``.  With ``Q`` given, the curve
    also reports Eve's error on an ``alpha/Q`` copy read with the correct key,
    and whether ``kappa > 1/Q``.
    """
    if eve_position != "at-transmitter":
        raise ValueError("only an eavesdropper at the transmitter is modelled")
    if loss_db_per_km <= 0:
        raise ValueError("loss must be positive")
    eve = design_neighbor_error(table)

    def bob(L):
        if math.isinf(loss_db_per_km):
            return 0.5 if L > 0 else bob_error_closed(table, 1.0, excess)
        return bob_error_closed(table, ChannelParams.from_fiber(loss_db_per_km, L).kappa, excess)

    if bob(0.0) >= eve:
        return DistanceReport(0.0, loss_db_per_km, eve, Q, "keyed error already exceeds keyless error at 0 km")
    if math.isinf(loss_db_per_km):
        return DistanceReport(0.0, loss_db_per_km, eve, Q, "infinite loss")
    hi = 1.0
    while bob(hi) < eve:
        hi *= 2
        if hi > 1e7:
            raise NumericalError("no crossing found")
    dist = float(brentq(lambda L: bob(L) - eve, 0.0, hi, xtol=1e-9))

    span = span_km if span_km is not None else 1.5 * dist
    eve_copy = bob_error_closed(table, 1.0 / Q, excess) if Q else None
    curve = []
    for km in np.arange(0.0, span + 0.5 * step_km, step_km):
        kappa = ChannelParams.from_fiber(loss_db_per_km, float(km)).kappa
        pb = bob(float(km))
        row = {"km": float(km), "kappa": kappa, "bob_error": pb, "eve_error": eve, "advantage": eve - pb}
        if Q:
            row["eve_keyed_copy_error"] = eve_copy
            row["kappa_exceeds_1_over_Q"] = bool(kappa > 1.0 / Q)
        curve.append(row)
    return DistanceReport(dist, loss_db_per_km, eve, Q, "ok", curve)
