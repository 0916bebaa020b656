"""
Pseudo-noise sequence generation.

Two code families are provided:

- Legendre sequences of prime length p, built from the quadratic-residue
  character mod p. The leading zero is kept, which makes the cyclic
  autocorrelation exactly ``[p - 1, -1, ..., -1]``.
- Maximum-length sequences (m-sequences) of length ``2**N - 1`` produced by a
  Fibonacci LFSR whose feedback polynomial is primitive over GF(2).

All correlation checks run in exact integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

MAX_LEGENDRE_PRIME = 10_000

# Primitive polynomials over GF(2), written as bit masks including the x^N
# and constant terms (bit i <-> coefficient of x^i).
PRIMITIVE_TAPS = {
    2: 0b111,  # x^2 + x + 1
    3: 0b1101,  # x^3 + x^2 + 1
    4: 0b11001,  # x^4 + x^3 + 1
    5: 0b101001,  # x^5 + x^3 + 1
    6: 0b1100001,  # x^6 + x^5 + 1
    7: 0b11000001,  # x^7 + x^6 + 1
    8: 0b101110001,  # x^8 + x^6 + x^5 + x^4 + 1
    9: 0b1000100001,  # x^9 + x^5 + 1
    10: 0b10010000001,  # x^10 + x^7 + 1
    11: 0b101000000001,  # x^11 + x^9 + 1
    12: 0b1110000010001,  # x^12 + x^11 + x^10 + x^4 + 1
    13: 0b11100100000001,  # x^13 + x^12 + x^11 + x^8 + 1
    14: 0b111000000000101,  # x^14 + x^13 + x^12 + x^2 + 1
    15: 0b1100000000000001,  # x^15 + x^14 + 1
    16: 0b11010000000010001,  # x^16 + x^15 + x^13 + x^4 + 1
}


@dataclass(frozen=True)
class PnSequence:
    """
    One period of a pseudo-noise code.

    Attributes:
        values: Code values, each in {-1, 0, +1}.
        kind: ``"legendre"`` or ``"mls"``.
        p: The prime modulus (Legendre only).
        register_length: LFSR length N (MLS only).
        taps: Feedback polynomial bit mask (MLS only).
        seed: Initial LFSR state (MLS only).
    """

    values: tuple
    kind: str
    p: Optional[int] = None
    register_length: Optional[int] = None
    taps: Optional[int] = None
    seed: Optional[int] = None
    _array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("sequence must be a non-empty 1-D list")
        if not np.all(np.isin(arr, (-1, 0, 1))):
            raise ValueError("sequence values must lie in {-1, 0, +1}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", tuple(int(v) for v in arr))
        object.__setattr__(self, "_array", arr)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def length(self) -> int:
        return len(self.values)

    @property
    def array(self) -> np.ndarray:
        """Read-only int64 view of the values."""
        return self._array

    @classmethod
    def from_values(cls, values) -> "PnSequence":
        """Wrap an arbitrary ternary code (e.g. one read back from disk)."""
        return cls(values=tuple(values), kind="custom")


def is_prime(n: int) -> bool:
    """Deterministic trial division."""
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def quadratic_residues(p: int) -> set:
    """The set {k^2 mod p : 0 < k < p}."""
    return {(k * k) % p for k in range(1, p)}


def legendre_sequence(p: int) -> PnSequence:
    """
    Legendre sequence of prime length p.

    ``values[k]`` is 0 for k = 0, +1 when k is a quadratic residue mod p and
    -1 otherwise.

    Raises:
        ValueError: If p is not an odd prime (or exceeds the supported range).
    """
    if isinstance(p, bool) or int(p) != p:
        raise ValueError(f"primality check failed: p={p!r} is not an integer")
    p = int(p)
    if p > MAX_LEGENDRE_PRIME:
        raise ValueError(f"p={p} exceeds the supported maximum {MAX_LEGENDRE_PRIME}")
    if not is_prime(p):
        raise ValueError(f"primality check failed: p={p} is not prime")
    if p == 2:
        raise ValueError("primality check failed: p=2 is prime but not odd")
    residues = quadratic_residues(p)
    values = [0] + [1 if k in residues else -1 for k in range(1, p)]
    return PnSequence(values=tuple(values), kind="legendre", p=p)


def _poly_degree(mask: int) -> int:
    return mask.bit_length() - 1


def lfsr_states(register_length: int, taps: int, seed: int, steps: int):
    """
    Clock the LFSR `steps` times.

    The register holds ``(a[k], ..., a[k+N-1])`` with ``a[k]`` in bit 0; the
    recurrence is ``a[k+N] = XOR of a[k+i] for every i < N with taps bit i set``.
    Returns ``(bits, final_state, first_return)`` where `first_return` is the
    first clock at which the state equals `seed` again (or None).
    """
    n = register_length
    feedback = taps & ((1 << n) - 1)
    state = seed
    bits = np.empty(steps, dtype=np.int64)
    first_return = None
    for k in range(steps):
        bits[k] = state & 1
        fb = bin(state & feedback).count("1") & 1
        state = (state >> 1) | (fb << (n - 1))
        if first_return is None and state == seed:
            first_return = k + 1
    return bits, state, first_return


def mls_sequence(register_length: int, taps: Optional[int] = None, seed: int = 1) -> PnSequence:
    """
    One period of a maximum-length sequence.

    Output bits are mapped 0 -> +1, 1 -> -1, so the period sums to -1.

    Args:
        register_length: Shift-register length N; the period is ``2**N - 1``.
        taps: Feedback polynomial as a bit mask including the ``x**N`` and
            constant terms. Defaults to the shipped primitive polynomial.
        seed: Nonzero initial register state.

    Raises:
        ValueError: For a zero seed, a malformed polynomial, or taps whose
            cycle is shorter than ``2**N - 1`` (not primitive).
    """
    n = int(register_length)
    if n < 2:
        raise ValueError(f"register length must be >= 2, got {n}")
    if taps is None:
        if n not in PRIMITIVE_TAPS:
            raise ValueError(f"no shipped primitive polynomial for N={n}; pass taps")
        taps = PRIMITIVE_TAPS[n]
    taps = int(taps)
    if _poly_degree(taps) != n or not taps & 1:
        raise ValueError(
            f"taps {taps:#b} must be a degree-{n} polynomial with a constant term"
        )
    seed = int(seed)
    if seed == 0:
        raise ValueError("seed must be nonzero: the all-zero state is an LFSR fixed point")
    if not 0 < seed < (1 << n):
        raise ValueError(f"seed {seed:#b} does not fit in a {n}-bit register")
    period = (1 << n) - 1
    bits, _, first_return = lfsr_states(n, taps, seed, period)
    if first_return != period:
        raise ValueError(
            f"taps {taps:#b} are not primitive: cycle length {first_return} < {period}"
        )
    values = tuple(int(v) for v in 1 - 2 * bits)
    return PnSequence(values=values, kind="mls", register_length=n, taps=taps, seed=seed)


def cyclic_autocorrelation(seq: PnSequence) -> list:
    """Exact ``phi[k] = sum_m v[m] * v[(m + k) mod L]`` as Python ints."""
    v = seq.array
    doubled = np.concatenate([v, v])
    phi = np.correlate(doubled, v, mode="valid")[: len(v)]
    return [int(x) for x in phi]


def has_two_level_autocorrelation(seq: PnSequence) -> bool:
    """True when all off-peak autocorrelation lags equal -1."""
    phi = cyclic_autocorrelation(seq)
    return all(x == -1 for x in phi[1:])
