"""Coherent-state propagation and measurement noise.

Noise conventions (vacuum units):

* heterodyne: complex outcome, mean ``alpha``, variance 1/2 per quadrature
* homodyne:   real outcome, mean ``Re alpha``, variance 1/4
* direct:     intensity outcome, Gaussian shot-noise approximation with
              mean and variance ``|alpha|^2``; negative draws are clamped to 0

``excess`` adds variance on top of the quantum noise (zero by default).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

__all__ = [
    "ChannelParams",
    "MeasurementMode",
    "MeasurementOutcome",
    "attenuate",
    "measure",
    "noise_sigma",
    "beamsplit_clone",
    "trial_rng",
    "parallel_map",
]

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class ChannelParams:
    kappa: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must lie in [0, 1]")

    @classmethod
    def from_fiber(cls, loss_db_per_km: float, length_km: float) -> "ChannelParams":
        if loss_db_per_km < 0 or length_km < 0:
            raise ValueError("loss and length must be non-negative")
        return cls(10.0 ** (-loss_db_per_km * length_km / 20.0))


class MeasurementMode(str, Enum):
    HETERODYNE = "heterodyne"
    HOMODYNE = "homodyne"
    DIRECT = "direct"


@dataclass(frozen=True)
class MeasurementOutcome:
    mode: MeasurementMode
    value: np.ndarray | complex | float


def attenuate(alpha, params: ChannelParams | float):
    kappa = params.kappa if isinstance(params, ChannelParams) else float(params)
    return kappa * np.asarray(alpha) if np.ndim(alpha) else kappa * alpha


def noise_sigma(alpha, mode, excess: float = 0.0):
    """Per-quadrature (or intensity) noise standard deviation."""
    mode = MeasurementMode(mode)
    if mode is MeasurementMode.HETERODYNE:
        return np.sqrt(0.5 + excess)
    if mode is MeasurementMode.HOMODYNE:
        return np.sqrt(0.25 + excess)
    return np.sqrt(np.abs(np.asarray(alpha)) ** 2 + excess)


def measure(alpha, mode, rng: np.random.Generator, excess: float = 0.0) -> MeasurementOutcome:
    mode = MeasurementMode(mode)
    alpha = np.asarray(alpha)
    shape = alpha.shape
    if mode is MeasurementMode.HETERODYNE:
        s = noise_sigma(alpha, mode, excess)
        value = alpha + s * rng.standard_normal(shape) + 1j * s * rng.standard_normal(shape)
    elif mode is MeasurementMode.HOMODYNE:
        value = alpha.real + noise_sigma(alpha, mode, excess) * rng.standard_normal(shape)
    else:
        mean = np.abs(alpha) ** 2
        value = np.maximum(mean + noise_sigma(alpha, mode, excess) * rng.standard_normal(shape), 0.0)
    if value.ndim == 0:
        value = value.item()
    return MeasurementOutcome(mode, value)


def beamsplit_clone(alpha, Q: int, convention: str = "divide-by-Q") -> list:
    """Split one coherent amplitude into ``Q`` copies.

    ``divide-by-Q`` divides the amplitude by ``Q``; ``energy-conserving`` divides it
    by ``sqrt(Q)`` so the copy intensities add up to the input intensity.
    """
    if Q < 1:
        raise ValueError("Q must be at least 1")
    if convention == "divide-by-Q":
        scale = 1.0 / Q
    elif convention == "energy-conserving":
        scale = 1.0 / math.sqrt(Q)
    else:
        raise ValueError(f"unknown cloning convention {convention!r}")
    return [alpha * scale] * Q


def trial_rng(master_seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for one trial, keyed by master seed and indices."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed) & (2**64 - 1), *map(int, stream)]))


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """Ordered map; results never depend on ``workers``."""
    items: Sequence[T] = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
