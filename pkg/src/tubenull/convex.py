"""Finite codes for monotone convex graphs, and related curve families.

A resolution-N code discretizes a convex non-decreasing f with right-
derivative in [0, 1] on the grid X = {0, 1/N^2, ..., 1}.  Breakpoints
advance from 0 by at most 1/N, stopping early where the right-derivative
has climbed by 1/N; values at breakpoints are floor-quantized to the
grid.  The code determines f up to sup-error O(1/N^2) while using only
O(N log N) bits, which is what makes epsilon-nets of the convex class
tractable.  Breakpoints are kept as integer grid indices so the
structural bounds can be asserted exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .curves import ConvexGraph, CurveError, PLGraph


class InvalidCurveError(CurveError):
    """The supplied evaluators leave the monotone convex class."""


class NetTooLargeError(ValueError):
    def __init__(self, estimate, cap):
        super().__init__(f"net would hold ~{estimate:.3g} members, over the cap {cap:g}")
        self.estimate = estimate
        self.cap = cap


# -- breakpoints and codes -----------------------------------------------------


def _deriv_at(f: ConvexGraph, x: float) -> float:
    v = float(np.asarray(f.deriv_right(min(x, f.domain[1] - 1e-12))).reshape(-1)[0])
    if not -1e-9 <= v <= 1.0 + 1e-9:
        raise InvalidCurveError(f"right-derivative {v} at x={x} outside [0, 1]")
    return min(max(v, 0.0), 1.0)


def breakpoint_indices(f: ConvexGraph, N: int) -> list:
    """Integer grid indices of the code breakpoints (grid step 1/N^2).

    From x_k, the next breakpoint is the smallest of: the endpoint 1, the
    cap x_k + 1/N, and the first grid point where the right-derivative
    exceeds its value at x_k by 1/N.

    Endpoint convention (N >= 3): a step is never allowed to stop one
    grid point short of 1 -- it is absorbed into the endpoint when the
    combined gap stays within 1/N, and pulled back one grid point
    otherwise.  Without this the raw recursion can leave a final gap of
    a single grid step, breaking the advertised gap bounds; the shift
    moves one breakpoint by 1/N^2, which is inside the reconstruction
    error budget.
    """
    if N < 2:
        raise CurveError(f"resolution N must be >= 2, got {N}")
    if f.domain != (0.0, 1.0):
        raise CurveError("codes are defined for graphs on [0, 1]")
    n2 = N * N
    idx = [0]
    step = 1.0 / N
    while idx[-1] < n2:
        j = idx[-1]
        fp_here = _deriv_at(f, j / n2)
        nxt = min(j + N, n2)
        for jj in range(j + 1, nxt + 1):
            if _deriv_at(f, jj / n2) >= fp_here + step:
                nxt = jj
                break
        if N >= 3 and n2 - nxt == 1:
            nxt = n2 if nxt - j < N else nxt - 1
        idx.append(nxt)
    return idx


def convex_breakpoints(f: ConvexGraph, N: int) -> list:
    """Breakpoints as grid values in X = {0, 1/N^2, ..., 1}."""
    n2 = N * N
    return [j / n2 for j in breakpoint_indices(f, N)]


@dataclass(frozen=True)
class ConvexCode:
    """Breakpoints and floor-quantized values, as grid indices.

    resolution N fixes the grid X = {j / N^2}; y_idx are the breakpoint
    indices, p_idx the quantized value indices (p = floor(f * N^2) / N^2,
    so grid values are reproduced exactly).
    """

    N: int
    y_idx: tuple
    p_idx: tuple

    @property
    def breakpoints(self) -> list:
        n2 = self.N * self.N
        return [j / n2 for j in self.y_idx]

    @property
    def values(self) -> list:
        n2 = self.N * self.N
        return [k / n2 for k in self.p_idx]

    def validate(self) -> None:
        """Assert the structural bounds: <= 2N+1 points, gaps in (1/N^2, 1/N]."""
        N = self.N
        if len(self.y_idx) > 2 * N + 1:
            raise InvalidCurveError(f"{len(self.y_idx)} breakpoints exceed 2N+1 = {2*N+1}")
        gaps = np.diff(self.y_idx)
        if np.any(gaps <= 1) or np.any(gaps > N):
            raise InvalidCurveError(f"breakpoint gaps {gaps} leave (1, N] grid steps")
        if np.any(np.diff(self.p_idx) < 0):
            raise InvalidCurveError("quantized values must be non-decreasing")


def convex_code(f: ConvexGraph, N: int) -> ConvexCode:
    """The resolution-N code of f."""
    n2 = N * N
    y_idx = breakpoint_indices(f, N)
    p_idx = []
    for j in y_idx:
        v = float(np.asarray(f.value(j / n2)).reshape(-1)[0])
        k = int(math.floor(v * n2 + 1e-12))
        p_idx.append(max(0, min(k, n2)))
    return ConvexCode(N=N, y_idx=tuple(y_idx), p_idx=tuple(p_idx))


def code_reconstruct(code: ConvexCode) -> PLGraph:
    """Piecewise-linear interpolation through the coded points."""
    n2 = code.N * code.N
    xs = [j / n2 for j in code.y_idx]
    ys = [k / n2 for k in code.p_idx]
    return PLGraph(tuple(xs), tuple(ys))


# -- random members of the monotone convex class --------------------------------


def sample_convex_functions(count: int, rng: np.random.Generator, grid: int = 160):
    """Random monotone convex graphs on [0, 1] with values in [0, 1].

    Slopes are a normalized cumulative sum of uniforms on a `grid`-point
    lattice, so individual derivative jumps stay below ~2/grid; total
    slope range and intercept are drawn to keep the graph inside the
    unit square.
    """
    out = []
    knots = np.linspace(0.0, 1.0, grid + 1)
    while len(out) < count:
        span = rng.uniform(0.2, 1.0)
        u = rng.uniform(0.0, 1.0, size=grid - 1)
        total = float(u.sum())
        if total <= 0:
            continue
        # cap single jumps so no breakpoint recursion can fire after one grid step
        increments = np.minimum(span * u / total, 1.4 / grid)
        s0 = rng.uniform(0.0, max(1.0 - span, 0.0))
        slopes = s0 + np.concatenate([[0.0], np.cumsum(increments)])
        slopes = np.clip(slopes, 0.0, 1.0)
        rise = float(np.sum(slopes * np.diff(knots)))
        if rise > 1.0:
            continue
        y0 = rng.uniform(0.0, 1.0 - rise)
        out.append(ConvexGraph.from_slopes(knots, slopes, y0=y0))
    return out


def convex_net(N: int, ensemble: int, rng: np.random.Generator):
    """Sampled code-representative net of the monotone convex class.

    Draws `ensemble` random members on a 4N-point grid, codes them, and
    keeps one representative per distinct code.  Returns the
    representatives plus a report with the observed code count and the
    crude combinatorial ceiling  (N^2+1)^(2N+1) * C(N^2+1, <=2N+1).
    """
    if N < 2:
        raise CurveError(f"resolution N must be >= 2, got {N}")
    members = sample_convex_functions(ensemble, rng, grid=4 * N)
    reps = {}
    groups = {}
    for f in members:
        code = convex_code(f, N)
        key = (code.y_idx, code.p_idx)
        groups.setdefault(key, []).append(f)
        reps.setdefault(key, f)
    bound = _code_count_bound(N)
    report = {
        "N": N,
        "sampled": ensemble,
        "distinct_codes": len(reps),
        "combinatorial_bound_log": bound,
        "groups": groups,
    }
    return list(reps.values()), report


def _code_count_bound(N: int) -> float:
    """log of (N^2+1)^(2N+1) * sum_{m <= 2N+1} C(N^2+1, m)."""
    she = (2 * N + 1) * math.log(N * N + 1)
    total = 0.0
    for m in range(0, 2 * N + 2):
        total += math.comb(N * N + 1, m)
    return she + math.log(total)


# -- the staircase family --------------------------------------------------------


@dataclass
class StaircaseFamily:
    """All non-decreasing slope sequences a_i in {0, 1/N, ..., 1}.

    Member a is realized as the piecewise affine L_a with L_a(0) = 0 and
    slope a_i on ((i-1)/N, i/N); distinct members are at sup-distance at
    least 1/N^2 apart, which pins the exponential lower bound for the
    covering numbers of the convex class.
    """

    N: int
    slopes: np.ndarray  # (count, N) integer numerators, slope = k/N

    @property
    def count(self) -> int:
        return len(self.slopes)

    def member(self, i: int) -> PLGraph:
        N = self.N
        knots = np.linspace(0.0, 1.0, N + 1)
        ys = np.concatenate([[0.0], np.cumsum(self.slopes[i] / N) / N])
        return PLGraph(tuple(knots), tuple(ys))

    def min_pairwise_separation_times_n2(self) -> int:
        """min over pairs of (N^2 * sup-distance), computed exactly in ints.

        L_a(i/N) = (sum of first i numerators) / N^2 and the difference of
        two members is piecewise linear, so the sup sits at a grid point.
        """
        prefix = np.cumsum(self.slopes, axis=1)
        best = None
        for i in range(len(prefix) - 1):
            sep = int(np.abs(prefix[i + 1 :] - prefix[i]).max(axis=1).min())
            best = sep if best is None else min(best, sep)
        return 0 if best is None else best


def staircase_family(N: int, cap: int = 200_000) -> StaircaseFamily:
    """Full enumeration; refuses when C(2N, N) exceeds the cap."""
    if N < 1:
        raise CurveError(f"N must be >= 1, got {N}")
    size = math.comb(2 * N, N)
    if size > cap:
        raise NetTooLargeError(size, cap)
    seqs = np.array(
        list(combinations_with_replacement(range(N + 1), N)), dtype=np.int64
    )
    return StaircaseFamily(N=N, slopes=seqs)


# -- dyadic-crossing augmentation -------------------------------------------------


def dyadic_augment(base, n: int, eta: float):
    """Add vertical translates forcing crossings of dyadic heights.

    For each base graph whose initial flat piece (right-derivative below
    2**-(n+1)) passes within 2**(1-eta*n) of a height k 2**-n, translates
    f + y_i are added so that the shifted graph crosses y = k 2**-n at
    x_i = i 2**(-eta*n).  Cardinality grows by at most O(2**(eta n)) per
    base member.
    """
    if not 1.0 < eta < 4.0:
        raise CurveError(f"eta must lie in (1, 4), got {eta}")
    slope_cut = 2.0 ** -(n + 1)
    near = 2.0 ** (1 - eta * n)
    step = 2.0 ** (-eta * n)
    out = list(base)
    report = []
    for f in base:
        a, _ = f.domain
        flat_end = _flat_interval_end(f, slope_cut)
        crossings = []
        if flat_end > a:
            lo = float(np.asarray(f.value(a)).reshape(-1)[0])
            hi = float(np.asarray(f.value(flat_end)).reshape(-1)[0])
            k_lo = int(math.ceil((lo - near) * 2.0**n))
            k_hi = int(math.floor((hi + near) * 2.0**n))
            for k in range(k_lo, k_hi + 1):
                height = k * 2.0**-n
                i = 0
                while a + i * step <= flat_end + 1e-15:
                    xi = a + i * step
                    yi = height - float(np.asarray(f.value(xi)).reshape(-1)[0])
                    if abs(yi) < near:
                        out.append(f.shifted(yi))
                        crossings.append((k, xi))
                    i += 1
        report.append(crossings)
    return out, report


def _flat_interval_end(f: ConvexGraph, slope_cut: float) -> float:
    """sup{x : f'(x+) < slope_cut}, by bisection on the monotone derivative."""
    a, b = f.domain
    da = _deriv_at(f, a)
    if da >= slope_cut:
        return a
    if _deriv_at(f, b - (b - a) * 1e-12) < slope_cut:
        return b
    lo, hi = a, b
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _deriv_at(f, mid) < slope_cut:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
