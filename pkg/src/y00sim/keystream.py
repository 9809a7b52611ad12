"""Running-key generation and analysis.

Two generator families are provided:

* ``LFSR`` -- a Fibonacci linear feedback shift register.  The register holds
  the next ``L`` output bits, so the first ``L`` bits of the stream are the
  seed itself.  Feedback follows the characteristic polynomial
  ``x^L + sum(c_j x^j)``: ``s[t+L] = XOR(s[t+j] for j with c_j = 1)``.
* ``DeBruijnNFSR`` -- a nonlinear register whose output is the prefer-one
  (Ford) de Bruijn sequence of order ``L``.  The seed is any ``L``-bit window,
  and the stream continues from the unique position of that window.

Bit sequences are ``numpy.uint8`` arrays of zeros and ones throughout.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

__all__ = [
    "MAXIMAL_TAPS",
    "LFSR",
    "DeBruijnNFSR",
    "PrngSpec",
    "RunningKeyBlock",
    "UnicityReport",
    "next_bits",
    "running_key_blocks",
    "running_key_arrays",
    "bits_per_block",
    "berlekamp_massey",
    "connection_to_taps",
    "extend_sequence",
    "blocks_from_bits",
    "unicity_metrics",
    "is_primitive",
    "de_bruijn_sequence",
    "de_bruijn_greedy",
    "prng_from_json",
]

# Characteristic polynomials x^L + ... + 1, listed by exponent.  Every entry
# is checked by ``is_primitive`` in the test-suite.
MAXIMAL_TAPS: dict[int, tuple[int, ...]] = {
    3: (3, 1, 0),
    4: (4, 1, 0),
    5: (5, 2, 0),
    6: (6, 1, 0),
    7: (7, 1, 0),
    8: (8, 4, 3, 2, 0),
    9: (9, 4, 0),
    10: (10, 3, 0),
    11: (11, 2, 0),
    12: (12, 6, 4, 1, 0),
    13: (13, 4, 3, 1, 0),
    14: (14, 5, 3, 1, 0),
    15: (15, 1, 0),
    16: (16, 5, 3, 2, 0),
    17: (17, 3, 0),
    18: (18, 7, 0),
    19: (19, 5, 2, 1, 0),
    20: (20, 3, 0),
    21: (21, 2, 0),
    22: (22, 1, 0),
    23: (23, 5, 0),
    24: (24, 4, 3, 1, 0),
    25: (25, 3, 0),
    26: (26, 6, 2, 1, 0),
    27: (27, 5, 2, 1, 0),
    28: (28, 3, 0),
    29: (29, 2, 0),
    30: (30, 6, 4, 1, 0),
    31: (31, 3, 0),
    32: (32, 22, 2, 1, 0),
}

MAX_DEBRUIJN_ORDER = 24
_BLOCK = 4096


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size and arr.max() > 1:
        raise ValueError("bit sequences may only contain 0 and 1")
    return arr


def _int_to_bits(value: int, length: int) -> np.ndarray:
    return np.array([(value >> (length - 1 - i)) & 1 for i in range(length)], dtype=np.uint8)


def _bits_to_int(bits) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def _hex_to_bits(text: str, length: int) -> np.ndarray:
    value = int(text, 16)
    if value >> length:
        raise ValueError(f"seed {text!r} does not fit in {length} bits")
    return _int_to_bits(value, length)


def _bits_to_hex(bits) -> str:
    width = (len(bits) + 3) // 4
    return format(_bits_to_int(bits), f"0{width}x")


# --------------------------------------------------------------------------
# polynomial arithmetic over GF(2), polynomials packed into Python ints


def _polymulmod(a: int, b: int, mod: int, deg: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if (a >> deg) & 1:
            a ^= mod
    return out


def _polypowmod(base: int, exp: int, mod: int, deg: int) -> int:
    result = 1
    while exp:
        if exp & 1:
            result = _polymulmod(result, base, mod, deg)
        base = _polymulmod(base, base, mod, deg)
        exp >>= 1
    return result


def _prime_factors(n: int) -> list[int]:
    factors = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            factors.append(p)
            while n % p == 0:
                n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        factors.append(n)
    return factors


def is_primitive(taps: Sequence[int]) -> bool:
    """True when the characteristic polynomial given by exponents is primitive.

    The multiplicative order of ``x`` modulo the polynomial must be exactly
    ``2^L - 1``; that also rules out reducible polynomials.
    """
    deg = max(taps)
    mod = 0
    for e in set(taps):
        mod |= 1 << e
    if not mod & 1 or deg < 1:
        return False
    order = (1 << deg) - 1
    if _polypowmod(2, order, mod, deg) != 1:
        return False
    return all(_polypowmod(2, order // q, mod, deg) != 1 for q in _prime_factors(order))


# --------------------------------------------------------------------------
# generators


class LFSR:
    """Fibonacci LFSR with state equal to the next ``L`` output bits."""

    kind = "lfsr"

    def __init__(self, taps: Sequence[int], seed, *, check: bool = True):
        taps = tuple(sorted(set(int(t) for t in taps), reverse=True))
        if not taps or taps[-1] != 0:
            raise ValueError("tap polynomial needs a constant term (exponent 0)")
        self.taps = taps
        self.length = taps[0]
        if self.length < 2:
            raise ValueError("register length must be at least 2")
        if isinstance(seed, str):
            state = _hex_to_bits(seed, self.length)
        elif isinstance(seed, (int, np.integer)):
            state = _int_to_bits(int(seed), self.length)
        else:
            state = _as_bits(seed).copy()
        if state.size != self.length:
            raise ValueError(f"seed has {state.size} bits, register needs {self.length}")
        if not state.any():
            raise ValueError("LFSR seed must not be all-zero")
        self.state = state
        self._feedback = tuple(t for t in taps[1:])
        if check:
            if self.length <= 32:
                if not is_primitive(taps):
                    warnings.warn(f"taps {taps} are not primitive; period is below 2^L - 1", stacklevel=2)
            else:
                warnings.warn(f"taps {taps} not checked for primitivity", stacklevel=2)

    @classmethod
    def maximal(cls, length: int, seed) -> "LFSR":
        if length not in MAXIMAL_TAPS:
            raise ValueError(f"no built-in maximal polynomial for length {length}")
        return cls(MAXIMAL_TAPS[length], seed, check=False)

    @property
    def period(self) -> int:
        return (1 << self.length) - 1

    def copy(self) -> "LFSR":
        return LFSR(self.taps, self.state.copy(), check=False)

    def generator_matrix(self, n: int) -> np.ndarray:
        """Rows ``g_t`` with ``s[t] = g_t . state (mod 2)`` for ``t < n``."""
        L = self.length
        g = np.zeros((max(n, L), L), dtype=np.uint8)
        g[:L] = np.eye(L, dtype=np.uint8)
        for t in range(L, n):
            row = g[t - L + self._feedback[0]].copy()
            for j in self._feedback[1:]:
                row ^= g[t - L + j]
            g[t] = row
        return g[:n]

    @staticmethod
    @lru_cache(maxsize=32)
    def _block_matrix(taps: tuple[int, ...], block: int) -> np.ndarray:
        m = LFSR(taps, 1, check=False).generator_matrix(block + taps[0])
        m.setflags(write=False)
        return m

    def next_bits(self, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError("n must be non-negative")
        L = self.length
        out = np.empty(n, dtype=np.uint8)
        done = 0
        while done < n:
            step = min(_BLOCK, n - done)
            g = self._block_matrix(self.taps, _BLOCK)
            seq = (g[: step + L].astype(np.int64) @ self.state) & 1
            out[done : done + step] = seq[:step]
            self.state = seq[step : step + L].astype(np.uint8)
            done += step
        return out

    def to_json(self) -> str:
        return json.dumps({"kind": "lfsr", "taps": list(self.taps), "seed": _bits_to_hex(self.state)})


def _lyndon_concatenation(order: int) -> np.ndarray:
    # FKM: Lyndon words whose length divides ``order``, in lexicographic order
    out = bytearray([0])
    a = [0] * (order + 1)
    while True:
        i = order
        while i > 0 and a[i] == 1:
            i -= 1
        if i == 0:
            break
        a[i] = 1
        for j in range(i + 1, order + 1):
            a[j] = a[j - i]
        if order % i == 0:
            out.extend(a[1 : i + 1])
    return np.frombuffer(bytes(out), dtype=np.uint8)


@lru_cache(maxsize=8)
def de_bruijn_sequence(order: int) -> np.ndarray:
    """Prefer-one de Bruijn sequence of the given order (length ``2**order``)."""
    if not 1 <= order <= MAX_DEBRUIJN_ORDER:
        raise ValueError(f"de Bruijn order must be in [1, {MAX_DEBRUIJN_ORDER}]")
    # prefer-one is the complement of the (prefer-zero) Lyndon concatenation,
    # rotated so that it opens with the all-zero window
    seq = np.roll(1 - _lyndon_concatenation(order), order).astype(np.uint8)
    seq.setflags(write=False)
    return seq


def de_bruijn_greedy(order: int) -> np.ndarray:
    """Textbook prefer-one construction; slow, kept as a cross-check."""
    n = order
    seen = {0}
    window = 0
    mask = (1 << n) - 1
    out = [0] * n
    while True:
        for bit in (1, 0):
            nxt = ((window << 1) | bit) & mask
            if nxt not in seen:
                seen.add(nxt)
                window = nxt
                out.append(bit)
                break
        else:
            break
    # the greedy walk ends with n-1 bits that wrap onto the leading zeros
    return np.array(out[: 1 << n], dtype=np.uint8)


@lru_cache(maxsize=8)
def _window_positions(order: int) -> np.ndarray:
    seq = de_bruijn_sequence(order)
    size = seq.size
    ext = np.concatenate([seq, seq[: order - 1]]).astype(np.int64)
    windows = np.zeros(size, dtype=np.int64)
    for i in range(order):
        windows = (windows << 1) | ext[i : i + size]
    pos = np.empty(size, dtype=np.int64)
    pos[windows] = np.arange(size)
    return pos


class DeBruijnNFSR:
    """Register producing the order-``L`` de Bruijn sequence, period ``2^L``."""

    kind = "nfsr-debruijn"

    def __init__(self, order: int, seed):
        if not 2 <= order <= MAX_DEBRUIJN_ORDER:
            raise ValueError(f"de Bruijn order must be in [2, {MAX_DEBRUIJN_ORDER}]")
        self.length = order
        if isinstance(seed, str):
            state = _hex_to_bits(seed, order)
        elif isinstance(seed, (int, np.integer)):
            state = _int_to_bits(int(seed), order)
        else:
            state = _as_bits(seed)
        if state.size != order:
            raise ValueError(f"seed has {state.size} bits, register needs {order}")
        self.position = int(_window_positions(order)[_bits_to_int(state)])

    @property
    def period(self) -> int:
        return 1 << self.length

    @property
    def state(self) -> np.ndarray:
        seq = de_bruijn_sequence(self.length)
        idx = (self.position + np.arange(self.length)) % seq.size
        return seq[idx].copy()

    def copy(self) -> "DeBruijnNFSR":
        return DeBruijnNFSR(self.length, self.state)

    def next_bits(self, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError("n must be non-negative")
        seq = de_bruijn_sequence(self.length)
        idx = (self.position + np.arange(n, dtype=np.int64)) % seq.size
        self.position = (self.position + n) % seq.size
        return seq[idx].copy()

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "order": self.length, "seed": _bits_to_hex(self.state)})


PrngSpec = Union[LFSR, DeBruijnNFSR]


def prng_from_json(text: str) -> PrngSpec:
    data = json.loads(text)
    kind = data.get("kind")
    if kind == "lfsr":
        return LFSR(data["taps"], data["seed"])
    if kind == "nfsr-debruijn":
        return DeBruijnNFSR(int(data["order"]), data["seed"])
    raise ValueError(f"unknown PRNG kind {kind!r}")


def next_bits(prng: PrngSpec, n: int) -> np.ndarray:
    """Draw ``n`` bits and advance ``prng``."""
    return prng.next_bits(n)


# --------------------------------------------------------------------------
# running key


@dataclass(frozen=True)
class RunningKeyBlock:
    value: int
    osk_bit: int = 0

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("running key value must be non-negative")
        if self.osk_bit not in (0, 1):
            raise ValueError("osk_bit must be 0 or 1")


def bits_per_block(M: int, osk: bool) -> int:
    """Stream bits consumed per block: ``ceil(log2 M)`` plus one OSK bit."""
    if M < 2:
        raise ValueError("M must be at least 2")
    return math.ceil(math.log2(M)) + int(bool(osk))


def blocks_from_bits(bits, M: int, osk: bool) -> tuple[np.ndarray, np.ndarray]:
    """Split raw stream bits into (values, osk_bits); trailing bits are dropped.

    Works on the last axis, so a ``(keys, bits)`` matrix yields per-key rows.
    When ``M`` is not a power of two the ``mod M`` reduction favours small
    values; callers that need uniform bases should use power-of-two ``M``.
    """
    width = math.ceil(math.log2(M))
    per = bits_per_block(M, osk)
    bits = np.asarray(bits, dtype=np.uint8)
    n_blocks = bits.shape[-1] // per
    chunks = bits[..., : n_blocks * per].reshape(bits.shape[:-1] + (n_blocks, per))
    weights = (1 << np.arange(width - 1, -1, -1)).astype(np.int64)
    values = (chunks[..., :width].astype(np.int64) @ weights) % M
    osk_bits = chunks[..., width].astype(np.uint8) if osk else np.zeros(values.shape, dtype=np.uint8)
    return values, osk_bits


def running_key_arrays(prng: PrngSpec, M: int, n_blocks: int, osk: bool) -> tuple[np.ndarray, np.ndarray]:
    bits = prng.next_bits(n_blocks * bits_per_block(M, osk))
    return blocks_from_bits(bits, M, osk)


def running_key_blocks(prng: PrngSpec, M: int, n_blocks: int, osk: bool) -> list[RunningKeyBlock]:
    values, osk_bits = running_key_arrays(prng, M, n_blocks, osk)
    return [RunningKeyBlock(int(v), int(o)) for v, o in zip(values, osk_bits)]


# --------------------------------------------------------------------------
# linear complexity


def berlekamp_massey(bits) -> tuple[int, list[int]]:
    """Linear complexity and connection polynomial of a binary sequence.

    Returns ``(L, c)`` where ``c = [1, c_1, ..., c_L]`` satisfies
    ``s[t] = XOR(c_i * s[t-i] for i in 1..L)`` for every ``t >= L``.
    """
    s = _as_bits(bits)
    if s.size == 0:
        raise ValueError("Berlekamp-Massey needs a non-empty sequence")
    n = s.size
    c = np.zeros(n + 1, dtype=np.uint8)
    b = np.zeros(n + 1, dtype=np.uint8)
    c[0] = b[0] = 1
    L, m = 0, -1
    for i in range(n):
        d = int(s[i])
        if L:
            d ^= int(np.dot(c[1 : L + 1], s[i - L : i][::-1]) & 1)
        if d:
            t = c.copy()
            shift = i - m
            c[shift:] ^= b[: n + 1 - shift]
            if 2 * L <= i:
                L, m, b = i + 1 - L, i, t
    return L, [int(x) for x in c[: L + 1]]


def connection_to_taps(connection: Sequence[int]) -> list[int]:
    """Characteristic-polynomial exponents for a connection polynomial."""
    L = len(connection) - 1
    return sorted({L} | {L - i for i in range(1, L + 1) if connection[i]}, reverse=True)


def extend_sequence(connection: Sequence[int], prefix, n: int) -> np.ndarray:
    """Continue ``prefix`` to total length ``n`` under the connection polynomial."""
    L = len(connection) - 1
    prefix = _as_bits(prefix)
    if prefix.size < L:
        raise ValueError("prefix shorter than the register")
    out = np.zeros(max(n, prefix.size), dtype=np.uint8)
    out[: prefix.size] = prefix
    idx = [i for i in range(1, L + 1) if connection[i]]
    for t in range(prefix.size, n):
        v = 0
        for i in idx:
            v ^= out[t - i]
        out[t] = v
    return out[:n]


# --------------------------------------------------------------------------
# unicity metrics


@dataclass(frozen=True)
class UnicityReport:
    n_u: float
    n_Gu: float
    f_of_K: int
    period: int
    shift_uncertainty_bits: int
    f_of_K_is_bound: bool = False

    def to_dict(self) -> dict:
        return {
            "n_u": "inf" if math.isinf(self.n_u) else self.n_u,
            "n_Gu": self.n_Gu,
            "f_of_K": self.f_of_K,
            "period": self.period,
            "shift_uncertainty_bits": self.shift_uncertainty_bits,
            "f_of_K_is_bound": self.f_of_K_is_bound,
        }


def debruijn_linear_complexity(order: int) -> int:
    seq = de_bruijn_sequence(order)
    L, _ = berlekamp_massey(np.concatenate([seq, seq]))
    return L


def unicity_metrics(key_len: int, kind: str, H_X: float, D: float) -> UnicityReport:
    """Shannon-style unicity figures for a keystream generator.

    ``n_u = H_X / D`` (infinite for incompressible plaintext, ``D = 0``) and
    the known-plaintext distance ``n_Gu ~ H(K) = |K|`` for a uniform key.
    ``f_of_K`` is the keystream length that pins down the generator:
    ``2|K| - 1`` for an LFSR; for the de Bruijn register it is the measured
    linear complexity up to order 16 and the lower bound ``2^(|K|-1) + |K|``
    beyond that.
    """
    if D < 0:
        raise ValueError("redundancy D must be non-negative")
    if key_len < 2:
        raise ValueError("key length must be at least 2")
    n_u = math.inf if D == 0 else H_X / D
    if kind == "lfsr":
        f, period, bound = 2 * key_len - 1, (1 << key_len) - 1, False
    elif kind == "nfsr-debruijn":
        period = 1 << key_len
        if key_len <= 16:
            f, bound = debruijn_linear_complexity(key_len), False
        else:
            f, bound = (1 << (key_len - 1)) + key_len, True
    else:
        raise ValueError(f"unknown PRNG kind {kind!r}")
    return UnicityReport(
        n_u=n_u,
        n_Gu=float(key_len),
        f_of_K=f,
        period=period,
        shift_uncertainty_bits=2 * key_len,
        f_of_K_is_bound=bound,
    )
