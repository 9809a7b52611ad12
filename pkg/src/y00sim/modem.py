"""2M-level signal alphabet and keyed bit mapping.

Level ``m`` and level ``m + M`` form basis ``m``.  The transmitted index for a
data bit ``x`` under running-key value ``m`` and OSK bit ``o`` is::

    index = m + (x ^ parity(m) ^ o) * M,     parity(m) = (m + 1) % 2

``parity`` numbers bases from one, so odd-numbered bases (even ``m``) invert
the bit.  With this assignment the half-plane observable ``l`` (upper or
lower half of the level line) obeys ``l = x ^ parity ^ o``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .keystream import RunningKeyBlock

__all__ = [
    "LevelScheme",
    "LevelTable",
    "SyncError",
    "design_levels",
    "phase_signal_distance",
    "key_parity",
    "encode",
    "decode_keyed",
    "parity_observable",
]


class LevelScheme(str, Enum):
    AMPLITUDE = "amplitude"
    INTENSITY = "intensity"
    PHASE = "phase"


class SyncError(ValueError):
    """The received index does not belong to the basis selected by the key."""


@dataclass(frozen=True)
class LevelTable:
    scheme: LevelScheme
    amplitudes: np.ndarray
    M: int
    delta: float
    alpha_min: float
    alpha_max: float

    @property
    def intensities(self) -> np.ndarray:
        return self.amplitudes**2

    @property
    def n_levels(self) -> int:
        return 2 * self.M

    def mate(self, index):
        return (np.asarray(index) + self.M) % (2 * self.M)

    def signal_values(self, kappa: float = 1.0, mode: str = "direct") -> np.ndarray:
        """Noiseless receiver readings after amplitude transmissivity ``kappa``."""
        if mode == "direct":
            return kappa**2 * self.intensities
        return kappa * self.amplitudes

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "amplitude", "intensity", "basis", "mate_index"])
        for i, a in enumerate(self.amplitudes):
            writer.writerow([i, repr(float(a)), repr(float(a * a)), i % self.M, (i + self.M) % (2 * self.M)])
        return buf.getvalue()


def design_levels(alpha_min: float, alpha_max: float, M: int, scheme="intensity") -> LevelTable:
    """Divide ``[alpha_min, alpha_max)`` into ``2M`` uniformly spaced levels.

    Amplitude scheme: ``alpha_k = alpha_min + k * d`` with
    ``d = (alpha_max - alpha_min) / 2M``.  Intensity scheme: the squares are
    uniform, ``alpha_k^2 = alpha_min^2 + k * d`` with
    ``d = (alpha_max^2 - alpha_min^2) / 2M``.  The phase scheme only records
    the neighbour distance on a circle of radius ``alpha_max``.
    """
    scheme = LevelScheme(scheme)
    if not 0 <= alpha_min < alpha_max:
        raise ValueError("need 0 <= alpha_min < alpha_max")
    if M < 2:
        raise ValueError("M must be at least 2")
    k = np.arange(2 * M)
    if scheme is LevelScheme.AMPLITUDE:
        delta = (alpha_max - alpha_min) / (2 * M)
        amps = alpha_min + k * delta
    elif scheme is LevelScheme.INTENSITY:
        delta = (alpha_max**2 - alpha_min**2) / (2 * M)
        amps = np.sqrt(alpha_min**2 + k * delta)
    else:
        delta = phase_signal_distance(alpha_max, M)
        amps = np.full(2 * M, float(alpha_max))
    amps.setflags(write=False)
    return LevelTable(scheme, amps, M, float(delta), float(alpha_min), float(alpha_max))


def operating_point_table(M: int, alpha_max: float = 100.0, delta_am: float = 0.1) -> LevelTable:
    """Intensity table whose neighbour error matches the (80, 100, M=100) design.

    Keeping the amplitude step ``(alpha_max - alpha_min) / 2M`` fixed keeps
    ``t0 = delta_IM / (2 sigma_mid)`` fixed, since
    ``t0 = (alpha_max - alpha_min) / 2M`` when ``sigma_mid`` is the mid amplitude.
    """
    return design_levels(alpha_max - 2 * M * delta_am, alpha_max, M, LevelScheme.INTENSITY)


def phase_signal_distance(alpha: float, M: float) -> float:
    """Arc distance ``2 pi |alpha| / 2M`` between neighbouring PSK states."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if M < 1:
        raise ValueError("M must be at least 1")
    return 2 * math.pi * abs(alpha) / (2 * M)


def key_parity(value):
    """Parity bit of the running key, counting bases from one (1, 3, 5, ... -> 1)."""
    return (np.asarray(value) + 1) % 2


def _unpack(block):
    if isinstance(block, RunningKeyBlock):
        return block.value, block.osk_bit
    value, osk = block
    return value, osk


def encode(bit, block, table: LevelTable):
    """Map a data bit to a symbol index in ``[0, 2M)``.

    ``block`` is a ``RunningKeyBlock`` or a ``(values, osk_bits)`` pair of
    arrays; array inputs broadcast.
    """
    value, osk = _unpack(block)
    value = np.asarray(value)
    if np.any(value >= table.M) or np.any(value < 0):
        raise ValueError("running key value outside [0, M)")
    eff = np.bitwise_xor(np.bitwise_xor(np.asarray(bit, dtype=np.int64), key_parity(value)), np.asarray(osk, dtype=np.int64))
    out = value + eff * table.M
    return int(out) if out.ndim == 0 else out


def decode_keyed(index, block, table: LevelTable):
    """Invert ``encode`` given the running key; raises ``SyncError`` on basis mismatch."""
    value, osk = _unpack(block)
    index = np.asarray(index)
    value = np.asarray(value)
    if np.any(index % table.M != value):
        raise SyncError("received symbol does not belong to the keyed basis")
    half = (index >= table.M).astype(np.int64)
    bit = half ^ key_parity(value) ^ np.asarray(osk, dtype=np.int64)
    return int(bit) if bit.ndim == 0 else bit


def parity_observable(index, table: LevelTable):
    """Half-plane observable and running-key parity of a symbol index.

    Returns ``(l, ktilde)`` with ``l = 1`` for the upper half ("up").
    """
    index = np.asarray(index)
    if np.any(index < 0) or np.any(index >= 2 * table.M):
        raise ValueError("symbol index outside [0, 2M)")
    l = (index >= table.M).astype(np.int64)
    kt = key_parity(index % table.M)
    if l.ndim == 0:
        return int(l), int(kt)
    return l, kt
