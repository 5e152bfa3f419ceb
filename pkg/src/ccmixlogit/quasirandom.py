"""Scrambled Halton sequences and the standard draws used for simulation.

Each random coefficient is assigned its own prime base, in declaration
order (2 for the first coefficient, 3 for the second, ...).  Unit ``u``
(1-based) receives the consecutive block of Halton indices
``skip + (u - 1) * R + 1 .. skip + u * R`` in every dimension, so draw
blocks never overlap across units.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np
from scipy.special import ndtri

__all__ = [
    "IDENTITY_SCRAMBLE",
    "DrawBudgetError",
    "HaltonConfig",
    "DrawMatrix",
    "first_primes",
    "halton_sequence",
    "scramble_digits",
    "normal_from_uniform",
    "build_draws",
    "write_draws",
    "read_draws",
]

# Reserved seed that selects the identity digit permutation.
IDENTITY_SCRAMBLE = 0xFFFFFFFFFFFFFFFF

MAX_DRAW_VALUES = 400_000_000

_MAGIC = b"HALT"
_VERSION = 1
_HEADER = struct.Struct("<4sIQQQBQ")
_SPACES = ("uniform01", "standard_normal")
_LEVELS = ("individual", "stratum")


class DrawBudgetError(ValueError):
    """Requested draw matrix is too large or exceeds the dimension cap."""


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def first_primes(k: int) -> tuple[int, ...]:
    primes: list[int] = []
    n = 2
    while len(primes) < k:
        if _is_prime(n):
            primes.append(n)
        n += 1
    return tuple(primes)


@dataclass(frozen=True)
class HaltonConfig:
    """Settings shared by every dimension of a draw matrix.

    ``dimension`` is the number of random coefficients; dimension ``k``
    uses the ``k``-th prime.  ``max_dimension`` caps it.
    """

    dimension: int = 1
    skip: int = 50
    scramble: bool = True
    seed: int = 20170510
    max_dimension: int = 20

    def __post_init__(self):
        if self.skip < 0:
            raise ValueError("skip must be >= 0")
        if not 0 <= self.seed <= IDENTITY_SCRAMBLE:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.dimension < 0:
            raise ValueError("dimension must be >= 0")

    @property
    def bases(self) -> tuple[int, ...]:
        return first_primes(self.dimension)

    @property
    def effective_seed(self) -> int:
        return self.seed if self.scramble else IDENTITY_SCRAMBLE


def _digit_permutation(base: int, seed: int) -> np.ndarray:
    """Seeded permutation of ``0..base-1`` that keeps 0 fixed."""
    if seed == IDENTITY_SCRAMBLE:
        return np.arange(base, dtype=np.int64)
    rng = np.random.default_rng([seed & 0xFFFFFFFF, seed >> 32, base])
    perm = np.empty(base, dtype=np.int64)
    perm[0] = 0
    perm[1:] = rng.permutation(np.arange(1, base, dtype=np.int64))
    return perm


def _radical_inverse(indices: np.ndarray, base: int, perm: np.ndarray) -> np.ndarray:
    n = np.array(indices, dtype=np.int64, copy=True)
    out = np.zeros(n.shape, dtype=np.float64)
    factor = 1.0 / base
    while np.any(n > 0):
        out += perm[n % base] * factor
        n //= base
        factor /= base
    return out


def _check_args(base: int, count: int, skip: int) -> None:
    if not _is_prime(base):
        raise ValueError(f"Halton base must be prime, got {base}")
    if count < 1:
        raise ValueError("count must be >= 1")
    if skip < 0:
        raise ValueError("skip must be >= 0")


def halton_sequence(base: int, count: int, skip: int = 0) -> np.ndarray:
    """Unscrambled radical-inverse sequence for indices ``skip+1 .. skip+count``.

    >>> halton_sequence(2, 3).tolist()
    [0.5, 0.25, 0.75]
    """
    _check_args(base, count, skip)
    idx = np.arange(skip + 1, skip + count + 1, dtype=np.int64)
    return _radical_inverse(idx, base, np.arange(base, dtype=np.int64))


def scramble_digits(base: int, count: int, skip: int, seed: int) -> np.ndarray:
    """Halton sequence with a seeded permutation applied to every digit.

    The same permutation of the nonzero digits is used at every digit
    position of ``base``; zero maps to zero so the values stay in (0, 1).
    Passing :data:`IDENTITY_SCRAMBLE` reproduces :func:`halton_sequence`.
    """
    _check_args(base, count, skip)
    idx = np.arange(skip + 1, skip + count + 1, dtype=np.int64)
    return _radical_inverse(idx, base, _digit_permutation(base, seed))


def normal_from_uniform(u):
    """Inverse standard-normal CDF.  Accepts scalars or arrays in (0, 1)."""
    arr = np.asarray(u, dtype=np.float64)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise ValueError("normal_from_uniform requires 0 < u < 1")
    out = ndtri(arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class DrawMatrix:
    """Precomputed standard draws, shape ``(units, draws_per_unit, dimension)``.

    At ``level="stratum"`` there is one block per stratum; members look
    up their block with :meth:`expand`.
    """

    values: np.ndarray
    level: str
    space: str
    config: HaltonConfig = field(default_factory=HaltonConfig)

    def __post_init__(self):
        if self.level not in _LEVELS:
            raise ValueError(f"unknown draw level {self.level!r}")
        if self.space not in _SPACES:
            raise ValueError(f"unknown draw space {self.space!r}")
        if self.values.ndim != 3:
            raise ValueError("draw values must be 3-dimensional")
        self.values.setflags(write=False)

    @property
    def units(self) -> int:
        return self.values.shape[0]

    @property
    def draws_per_unit(self) -> int:
        return self.values.shape[1]

    @property
    def dimension(self) -> int:
        return self.values.shape[2]

    def expand(self, codes: np.ndarray) -> np.ndarray:
        """Per-member view: row ``i`` is the block of ``codes[i]``."""
        return self.values[np.asarray(codes)]

    def fingerprint(self) -> dict:
        return {
            "seed": self.config.seed,
            "R": self.draws_per_unit,
            "skip": self.config.skip,
            "scramble": self.config.scramble,
        }

    def __eq__(self, other):
        if not isinstance(other, DrawMatrix):
            return NotImplemented
        return (
            self.level == other.level
            and self.space == other.space
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values)
        )


def build_draws(
    config: HaltonConfig,
    units: int,
    R: int,
    level: str = "individual",
    space: str = "standard_normal",
    dimension: int | None = None,
) -> DrawMatrix:
    """Build the draw matrix for ``units`` blocks of ``R`` points each."""
    K = config.dimension if dimension is None else dimension
    if level not in _LEVELS:
        raise ValueError(f"unknown draw level {level!r}")
    if space not in _SPACES:
        raise ValueError(f"unknown draw space {space!r}")
    if K > config.max_dimension:
        raise DrawBudgetError(f"dimension {K} exceeds cap {config.max_dimension}")
    if units < 0 or R < 1:
        raise ValueError("units must be >= 0 and R >= 1")
    total = units * R * max(K, 1)
    if total > MAX_DRAW_VALUES or config.skip + units * R >= 2**53:
        raise DrawBudgetError(f"draw budget exceeded: {units} x {R} x {K}")

    values = np.empty((units, R, K), dtype=np.float64)
    for k, base in enumerate(first_primes(K)):
        if units == 0:
            break
        seq = scramble_digits(base, units * R, config.skip, config.effective_seed)
        values[:, :, k] = seq.reshape(units, R)
    if space == "standard_normal":
        values = ndtri(values)
    return DrawMatrix(values=values, level=level, space=space, config=config)


def write_draws(draws: DrawMatrix, fh: BinaryIO) -> None:
    """Dump ``draws`` as a little-endian binary file (header + float64 values)."""
    U, R, K = draws.values.shape
    fh.write(
        _HEADER.pack(
            _MAGIC, _VERSION, U, R, K, _SPACES.index(draws.space), draws.config.seed
        )
    )
    fh.write(np.ascontiguousarray(draws.values, dtype="<f8").tobytes())


def read_draws(fh: BinaryIO, level: str = "individual") -> DrawMatrix:
    head = fh.read(_HEADER.size)
    magic, version, U, R, K, space, seed = _HEADER.unpack(head)
    if magic != _MAGIC:
        raise ValueError("not a draw-matrix file")
    if version != _VERSION:
        raise ValueError(f"unsupported draw-matrix version {version}")
    data = np.frombuffer(fh.read(U * R * K * 8), dtype="<f8")
    values = data.astype(np.float64).reshape(U, R, K)
    return DrawMatrix(
        values=values,
        level=level,
        space=_SPACES[space],
        config=HaltonConfig(dimension=K, seed=seed),
    )
