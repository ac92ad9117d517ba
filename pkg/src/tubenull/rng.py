"""Deterministic counter-based random streams.

All randomness that shapes a fractal realization flows through a single
documented generator: the splitmix64 finalizer applied to a key derived
from (master seed, stream index, level, cube key [, trial]).  Because
each draw is a pure function of its key, subdivision may be evaluated
in any order (or in parallel) and still produce bit-identical sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64


def mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, vectorized over uint64 arrays."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U64(30))) * _M1
        z = (z ^ (z >> _U64(27))) * _M2
        return z ^ (z >> _U64(31))


def derive_key(*parts) -> np.ndarray:
    """Fold integer parts (scalars or equal-shaped arrays) into one key.

    Each part is offset by the golden-ratio increment before mixing so
    that structured inputs (small consecutive integers) decorrelate.
    """
    key = np.uint64(0)
    with np.errstate(over="ignore"):
        for part in parts:
            p = np.asarray(part).astype(np.uint64, copy=False)
            key = mix64(key ^ (p + _GAMMA))
    return key


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible stream of draws.

    Identical (seed, index) pairs yield bit-identical draws on every
    platform; draws are keyed, not sequential, so consumers may request
    them in any order.
    """

    seed: int
    index: int = 0

    def child_choices(self, level: int, cube_keys: np.ndarray, d: int) -> np.ndarray:
        """One uniform child index in [0, 2**d) per cube key.

        2**d divides 2**64, so masking the mixed key is exactly uniform.
        """
        mixed = derive_key(self.seed, self.index, level, cube_keys)
        return (mixed & _U64((1 << d) - 1)).astype(np.int64)

    def trial_choices(
        self, level: int, cube_keys: np.ndarray, trials: np.ndarray, d: int
    ) -> np.ndarray:
        """Child indices for a (trial, cube) grid, shape (len(trials), len(cube_keys))."""
        base = derive_key(self.seed, self.index, level, np.asarray(cube_keys, dtype=np.uint64))
        t = mix64(np.asarray(trials, dtype=np.uint64) + _GAMMA)
        with np.errstate(over="ignore"):
            mixed = mix64(base[None, :] ^ (t[:, None] + _GAMMA))
        return (mixed & _U64((1 << d) - 1)).astype(np.int64)

    def uniforms(self, tag: int, count: int) -> np.ndarray:
        """`count` floats in [0, 1) keyed by (stream, tag, position)."""
        mixed = derive_key(self.seed, self.index, tag, np.arange(count, dtype=np.uint64))
        return (mixed >> _U64(11)).astype(np.float64) * 2.0**-53
