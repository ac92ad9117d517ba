"""Random nested dyadic sets and their normalized cell measures.

Level n is a set of surviving dyadic cubes of side 2**-n, stored as
sorted lattice coordinates.  A full step keeps all 2**d children of
every cube; a thinning step keeps one uniformly chosen child per cube,
choices independent across cubes and levels.  The normalized measure of
a box is 2**(dn) / P_n times the Lebesgue volume it shares with the
surviving cubes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .gauges import Schedule
from .rng import RngStream

MAX_KEY_BITS = 63


class FractalError(ValueError):
    pass


@dataclass(frozen=True)
class DyadicCube:
    """One closed dyadic cube: [c_i * 2**-n, (c_i + 1) * 2**-n] per axis."""

    level: int
    coords: tuple

    def __post_init__(self):
        side = 1 << self.level
        if any(not 0 <= c < side for c in self.coords):
            raise FractalError(f"coords {self.coords} outside [0, 2^{self.level})")

    @property
    def side(self) -> float:
        return 2.0**-self.level

    def bounds(self) -> tuple:
        s = self.side
        lo = np.array(self.coords, dtype=float) * s
        return lo, lo + s

    def children(self) -> list:
        d = len(self.coords)
        out = []
        for mask in range(1 << d):
            child = tuple(2 * c + ((mask >> i) & 1) for i, c in enumerate(self.coords))
            out.append(DyadicCube(self.level + 1, child))
        return out

    def parent(self) -> "DyadicCube":
        if self.level == 0:
            raise FractalError("level-0 cube has no parent")
        return DyadicCube(self.level - 1, tuple(c >> 1 for c in self.coords))


def _lex_sort(coords: np.ndarray) -> np.ndarray:
    order = np.lexsort(tuple(coords[:, j] for j in reversed(range(coords.shape[1]))))
    return coords[order]


class LevelSet:
    """The surviving cubes of one construction level.

    coords is an (m, d) int64 array, sorted lexicographically, one row
    per cube.  Instances are immutable after construction and safe to
    share across threads.
    """

    def __init__(self, level: int, coords: np.ndarray, schedule: Optional[Schedule] = None):
        coords = np.asarray(coords, dtype=np.int64)
        if coords.ndim != 2:
            raise FractalError("coords must be an (m, d) array")
        d = coords.shape[1]
        if d * max(level, 1) > MAX_KEY_BITS:
            raise FractalError(f"lattice keys for d={d}, n={level} exceed {MAX_KEY_BITS} bits")
        side = np.int64(1) << level
        if coords.size and (coords.min() < 0 or coords.max() >= side):
            raise FractalError("cube coordinates outside the level lattice")
        self.level = int(level)
        self.coords = _lex_sort(coords)
        self.coords.setflags(write=False)
        self.schedule = schedule
        if schedule is not None and schedule.products[level] != len(self.coords):
            raise FractalError(
                f"level {level} holds {len(self.coords)} cubes, schedule says "
                f"{schedule.products[level]}"
            )

    @property
    def dimension(self) -> int:
        return self.coords.shape[1]

    @property
    def count(self) -> int:
        return len(self.coords)

    @property
    def side(self) -> float:
        return 2.0**-self.level

    def keys(self) -> np.ndarray:
        """Linear lattice keys (row-major over axes); fits in int64."""
        d = self.dimension
        key = self.coords[:, 0].astype(np.int64)
        for j in range(1, d):
            key = (key << self.level) | self.coords[:, j]
        return key

    def contains(self, coords: np.ndarray) -> np.ndarray:
        """Boolean membership for an (m, d) array of lattice coords."""
        coords = np.asarray(coords, dtype=np.int64)
        d = self.dimension
        probe = coords[:, 0].astype(np.int64)
        for j in range(1, d):
            probe = (probe << self.level) | coords[:, j]
        have = self.keys()
        pos = np.searchsorted(have, probe)
        pos_ok = pos < len(have)
        out = np.zeros(len(coords), dtype=bool)
        out[pos_ok] = have[pos[pos_ok]] == probe[pos_ok]
        return out

    def cubes(self) -> list:
        return [DyadicCube(self.level, tuple(int(c) for c in row)) for row in self.coords]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LevelSet)
            and self.level == other.level
            and self.coords.shape == other.coords.shape
            and bool(np.all(self.coords == other.coords))
        )


def level0(d: int = 2) -> LevelSet:
    """The unit cube."""
    if d < 2:
        raise FractalError(f"dimension must be >= 2, got {d}")
    return LevelSet(0, np.zeros((1, d), dtype=np.int64))


def subdivide(level: LevelSet, a: int, rng: RngStream) -> LevelSet:
    """One construction step.

    a = 2**d keeps every child (deterministic, same region); a = 1 keeps
    one uniformly chosen child per cube, each choice keyed by the cube's
    lattice key so the result is independent of iteration order.
    """
    d = level.dimension
    full = 1 << d
    if a not in (1, full):
        raise FractalError(f"step factor must be 1 or {full}, got {a}")
    base = level.coords << 1
    if a == full:
        offs = np.array(
            [[(m >> j) & 1 for j in range(d)] for m in range(full)], dtype=np.int64
        )
        children = (base[:, None, :] + offs[None, :, :]).reshape(-1, d)
        return LevelSet(level.level + 1, children, level.schedule)
    picks = rng.child_choices(level.level, level.keys().astype(np.uint64), d)
    offs = np.stack([(picks >> j) & 1 for j in range(d)], axis=1)
    return LevelSet(level.level + 1, base + offs, level.schedule)


def build_levels(schedule: Schedule, seed: int, n_max: int) -> list:
    """Levels 0..n_max of one realization, deterministic in (schedule, seed)."""
    if n_max > schedule.n_max:
        raise FractalError(f"n_max={n_max} exceeds schedule length {schedule.n_max}")
    rng = RngStream(seed, 0)
    levels = [LevelSet(0, np.zeros((1, schedule.dimension), dtype=np.int64), schedule)]
    for n in range(n_max):
        levels.append(subdivide(levels[-1], schedule.entries[n], rng))
    return levels


def cell_measure(level: LevelSet, lo: Sequence[float], hi: Sequence[float]) -> float:
    """Normalized measure of an axis-aligned box inside the unit cube.

    Returns 2**(dn) / P_n times the total overlap volume, summed exactly
    over the surviving cubes.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = level.dimension
    if lo.shape != (d,) or hi.shape != (d,):
        raise FractalError("box endpoints must match the level dimension")
    if np.any(lo < -1e-12) or np.any(hi > 1 + 1e-12) or np.any(lo > hi):
        raise FractalError("box must satisfy 0 <= lo <= hi <= 1")
    s = level.side
    cube_lo = level.coords * s
    overlap = np.minimum(cube_lo + s, hi) - np.maximum(cube_lo, lo)
    np.clip(overlap, 0.0, None, out=overlap)
    vols = overlap.prod(axis=1)
    scale = 2.0 ** (d * level.level) / level.count
    return float(np.sum(vols) * scale)


# -- serialization ------------------------------------------------------------


def save_levelset(level: LevelSet, path, seed: Optional[int] = None) -> None:
    """Header line of JSON, then one 'n c_1 ... c_d' line per cube."""
    header = {
        "d": level.dimension,
        "n": level.level,
        "P_n": level.count,
        "seed": seed,
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for row in level.coords:
            fh.write(" ".join([str(level.level)] + [str(int(c)) for c in row]) + "\n")


def load_levelset(path) -> LevelSet:
    with open(path) as fh:
        header = json.loads(fh.readline())
        rows = []
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if int(parts[0]) != header["n"]:
                raise FractalError("cube line level disagrees with header")
            rows.append([int(c) for c in parts[1:]])
    coords = np.array(rows, dtype=np.int64).reshape(len(rows), header["d"])
    level = LevelSet(header["n"], coords)
    if level.count != header["P_n"]:
        raise FractalError("cube count disagrees with header P_n")
    return level
