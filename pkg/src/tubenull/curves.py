"""Curves, exact line-box clipping, arc lengths, and graph distances.

Curve variants:
  Line        -- point + unit direction in any dimension; in the plane the
                 canonical form is (theta, rho) with normal angle theta in
                 [0, pi) and signed offset rho.
  PolyGraph   -- y = c_0 + c_1 x + ... + c_k x**k, optionally with the axes
                 swapped (x = poly(y)) and/or the argument reflected.
  PLGraph     -- piecewise-linear graph through given breakpoints.
  ConvexGraph -- value and right-derivative evaluators on a subinterval of
                 [0, 1]; members of the monotone convex class have
                 non-decreasing values and right-derivative in [0, 1].

Lengths inside dyadic level sets sum per-cube clip lengths.  Cubes are
treated half-open per axis there, so a curve segment lying on a dyadic
hyperplane is counted once; for admissible (non-dyadic) curves those
overlaps have zero length anyway.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .fractal import LevelSet

SIMPSON_TOL = 1e-10
SIMPSON_MAX_DEPTH = 40


class CurveError(ValueError):
    pass


class NumericFailure(RuntimeError):
    """Adaptive quadrature or root finding failed to reach tolerance."""


# -- curve types ---------------------------------------------------------------


@dataclass(frozen=True)
class Line:
    """A line given by a point and a unit direction vector."""

    point: tuple
    direction: tuple

    def __post_init__(self):
        norm = math.sqrt(sum(u * u for u in self.direction))
        if not norm > 0:
            raise CurveError("line direction must be nonzero")
        if abs(norm - 1.0) > 1e-12:
            object.__setattr__(
                self, "direction", tuple(u / norm for u in self.direction)
            )

    @classmethod
    def from_theta_rho(cls, theta: float, rho: float) -> "Line":
        """Planar line {x cos(theta) + y sin(theta) = rho}."""
        c, s = math.cos(theta), math.sin(theta)
        return cls(point=(rho * c, rho * s), direction=(-s, c))

    @property
    def dimension(self) -> int:
        return len(self.point)

    @property
    def theta(self) -> float:
        if self.dimension != 2:
            raise CurveError("theta is defined for planar lines only")
        ux, uy = self.direction
        return math.atan2(ux, -uy) % math.pi

    @property
    def rho(self) -> float:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return self.point[0] * c + self.point[1] * s

    def is_dyadic(self, max_depth: int = 40) -> bool:
        """Contained in a hyperplane {x_j = k 2**-m} for some m <= max_depth."""
        for j, u in enumerate(self.direction):
            if abs(u) < 1e-15:
                v = self.point[j] * 2.0**max_depth
                if abs(v - round(v)) < 1e-6:
                    return True
        return False


@dataclass(frozen=True)
class PolyGraph:
    """Graph of a polynomial, with optional axis swap and reflection.

    swap:    the curve is {(p(t), t)} instead of {(t, p(t))}.
    reflect: the argument runs backwards (t replaced by 1 - t).
    The base polynomial should be monotone on its domain when used
    against level sets; only such graph pieces are accepted.
    """

    coeffs: tuple
    swap: bool = False
    reflect: bool = False
    domain: tuple = (0.0, 1.0)

    def base_value(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c in reversed(self.coeffs):
            out = out * x + c
        return out

    def base_deriv(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        k = len(self.coeffs) - 1
        for i, c in enumerate(reversed(self.coeffs[1:])):
            out = out * x + (k - i) * c
        return out

    def value(self, t):
        """y as a function of x for the displayed (flagged) curve."""
        x = 1.0 - np.asarray(t, dtype=float) if self.reflect else np.asarray(t, float)
        return self.base_value(x)

    def deriv(self, t):
        x = 1.0 - np.asarray(t, dtype=float) if self.reflect else np.asarray(t, float)
        d = self.base_deriv(x)
        return -d if self.reflect else d


@dataclass(frozen=True)
class PLGraph:
    """Piecewise-linear graph through (x_i, y_i) with non-decreasing y."""

    xs: tuple
    ys: tuple

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.size < 2 or xs.size != ys.size:
            raise CurveError("PLGraph needs >= 2 matching breakpoints")
        if np.any(np.diff(xs) <= 0):
            raise CurveError("PLGraph x-breakpoints must be strictly increasing")
        if np.any(np.diff(ys) < 0):
            raise CurveError("PLGraph values must be non-decreasing")
        object.__setattr__(self, "xs", tuple(float(v) for v in xs))
        object.__setattr__(self, "ys", tuple(float(v) for v in ys))

    @property
    def domain(self):
        return (self.xs[0], self.xs[-1])

    def value(self, t):
        return np.interp(np.asarray(t, dtype=float), self.xs, self.ys)

    def deriv_right(self, t):
        """Right-derivative (slope of the segment to the right of t)."""
        t = np.asarray(t, dtype=float)
        xs = np.asarray(self.xs)
        slopes = np.diff(self.ys) / np.diff(xs)
        idx = np.clip(np.searchsorted(xs, t, side="right") - 1, 0, len(slopes) - 1)
        return slopes[idx]

    def arc_length(self, u: float, v: float) -> float:
        xs = np.asarray(self.xs)
        knots = np.concatenate([[u], xs[(xs > u) & (xs < v)], [v]])
        dy = np.diff(self.value(knots))
        dx = np.diff(knots)
        return float(np.sum(np.hypot(dx, dy)))


class ConvexGraph:
    """Graph of a convex function via value/right-derivative evaluators."""

    def __init__(
        self,
        f: Callable,
        fprime_right: Callable,
        domain: tuple = (0.0, 1.0),
        breakpoints: Optional[np.ndarray] = None,
    ):
        self.f = f
        self.fprime_right = fprime_right
        self.domain = (float(domain[0]), float(domain[1]))
        if not self.domain[0] < self.domain[1]:
            raise CurveError("ConvexGraph domain must be nondegenerate")
        # derivative-jump locations when the function is PL-backed; lets
        # sup_distance and quadrature be exact across the kinks
        self.breakpoints = None if breakpoints is None else np.asarray(breakpoints, float)
        self._pl = None

    def value(self, t):
        return self.f(np.asarray(t, dtype=float))

    def deriv_right(self, t):
        return self.fprime_right(np.asarray(t, dtype=float))

    @classmethod
    def from_slopes(
        cls, knots: np.ndarray, slopes: np.ndarray, y0: float = 0.0
    ) -> "ConvexGraph":
        """Piecewise-linear convex member: slope[i] on [knots[i], knots[i+1])."""
        knots = np.asarray(knots, dtype=float)
        slopes = np.asarray(slopes, dtype=float)
        if len(slopes) != len(knots) - 1:
            raise CurveError("need one slope per knot interval")
        if np.any(np.diff(slopes) < 0):
            raise CurveError("slopes must be non-decreasing for convexity")
        ys = y0 + np.concatenate([[0.0], np.cumsum(slopes * np.diff(knots))])

        def f(t):
            return np.interp(t, knots, ys)

        def fp(t):
            idx = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, len(slopes) - 1)
            return slopes[idx]

        g = cls(f, fp, domain=(knots[0], knots[-1]), breakpoints=knots)
        g._pl = PLGraph(tuple(knots), tuple(ys))
        return g

    def shifted(self, dy: float) -> "ConvexGraph":
        """The vertical translate f + dy."""
        g = ConvexGraph(
            lambda t, _f=self.f, _dy=dy: _f(t) + _dy,
            self.fprime_right,
            domain=self.domain,
            breakpoints=self.breakpoints,
        )
        if self._pl is not None:
            g._pl = PLGraph(self._pl.xs, tuple(y + dy for y in self._pl.ys))
        return g


@dataclass(frozen=True)
class TubeSpec:
    """The w-neighborhood of a core curve; w is the neighborhood radius."""

    curve: object
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise CurveError(f"tube width must be positive, got {self.width}")


# -- JSON interchange ----------------------------------------------------------


def parse_curve(record):
    """Curve from its JSON record; accepts a dict or a JSON string."""
    if isinstance(record, str):
        record = json.loads(record)
    if "line" in record:
        spec = record["line"]
        if "theta" in spec:
            return Line.from_theta_rho(float(spec["theta"]), float(spec["rho"]))
        return Line(tuple(spec["point"]), tuple(spec["direction"]))
    if "poly" in record:
        spec = record["poly"]
        return PolyGraph(
            coeffs=tuple(float(c) for c in spec["coeffs"]),
            swap=bool(spec.get("swap", False)),
            reflect=bool(spec.get("reflect", False)),
        )
    if "pl" in record:
        pts = record["pl"]["pts"]
        return PLGraph(tuple(p[0] for p in pts), tuple(p[1] for p in pts))
    raise CurveError(f"unrecognized curve record: {record!r}")


def curve_to_json(curve) -> dict:
    if isinstance(curve, Line):
        if curve.dimension == 2:
            return {"line": {"theta": curve.theta, "rho": curve.rho}}
        return {"line": {"point": list(curve.point), "direction": list(curve.direction)}}
    if isinstance(curve, PolyGraph):
        return {
            "poly": {"coeffs": list(curve.coeffs), "swap": curve.swap, "reflect": curve.reflect}
        }
    if isinstance(curve, PLGraph):
        return {"pl": {"pts": [[x, y] for x, y in zip(curve.xs, curve.ys)]}}
    raise CurveError(f"cannot serialize {type(curve).__name__}")


# -- line clipping -------------------------------------------------------------


def _clip_interval(point, direction, lo, hi, half_open: bool):
    t0, t1 = -np.inf, np.inf
    for j in range(len(point)):
        u = direction[j]
        if u == 0.0:
            inside = lo[j] <= point[j] < hi[j] if half_open else lo[j] <= point[j] <= hi[j]
            if not inside:
                return None
            continue
        a = (lo[j] - point[j]) / u
        b = (hi[j] - point[j]) / u
        if a > b:
            a, b = b, a
        t0 = max(t0, a)
        t1 = min(t1, b)
    if t1 <= t0:
        return None
    return (t0, t1)


def line_box_length(line: Line, lo, hi) -> float:
    """Exact length of line n box via parametric slab clipping."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(hi <= lo):
        raise CurveError("box must be non-degenerate")
    span = _clip_interval(line.point, line.direction, lo, hi, half_open=False)
    return 0.0 if span is None else span[1] - span[0]


def line_box_interval(line: Line, lo, hi):
    """Parameter interval (t0, t1) of the clipped segment, or None."""
    return _clip_interval(
        line.point, line.direction, np.asarray(lo, float), np.asarray(hi, float), False
    )


def line_cell_intervals(line: Line, level: LevelSet, tspan=None):
    """Clip intervals of a line against every surviving cube, by descent.

    Walks the nesting structure: a cube at level n+1 can only be hit if
    its parent was, so work scales with the cubes actually met.  Cubes
    are half-open per axis for axis-parallel lines, so a line on a
    dyadic hyperplane is counted once.

    Returns (intervals, coords): an (m, 2) array of parameter intervals
    and the matching (m, d) cube coordinates.
    """
    d = level.dimension
    p = np.asarray(line.point, dtype=float)
    u = np.asarray(line.direction, dtype=float)

    span = _clip_interval(p, u, np.zeros(d), np.ones(d), half_open=True)
    if span is not None and tspan is not None:
        span = (max(span[0], tspan[0]), min(span[1], tspan[1]))
        if span[1] <= span[0]:
            span = None
    if span is None:
        return np.empty((0, 2)), np.empty((0, d), dtype=np.int64)

    offs = np.array([[(m >> j) & 1 for j in range(d)] for m in range(1 << d)], dtype=np.int64)
    coords = np.zeros((1, d), dtype=np.int64)
    t0 = np.array([span[0]])
    t1 = np.array([span[1]])
    for n in range(level.level):
        side = 2.0 ** -(n + 1)
        kids = ((coords << 1)[:, None, :] + offs[None, :, :]).reshape(-1, d)
        ka = np.repeat(t0, 1 << d)
        kb = np.repeat(t1, 1 << d)
        lo = kids * side
        for j in range(d):
            lj = lo[:, j]
            hj = lj + side
            if u[j] == 0.0:
                ok = (lj <= p[j]) & (p[j] < hj)
                ka = np.where(ok, ka, np.inf)
                continue
            a = (lj - p[j]) / u[j]
            b = (hj - p[j]) / u[j]
            ka = np.maximum(ka, np.minimum(a, b))
            kb = np.minimum(kb, np.maximum(a, b))
        keep = kb > ka
        kids, ka, kb = kids[keep], ka[keep], kb[keep]
        alive = _survivor_mask(kids, n + 1, level)
        coords, t0, t1 = kids[alive], ka[alive], kb[alive]
        if coords.size == 0:
            break
    return np.stack([t0, t1], axis=1), coords


def _survivor_mask(coords: np.ndarray, n: int, level: LevelSet) -> np.ndarray:
    """Which level-n cubes contain at least one surviving cube of `level`."""
    if n == level.level:
        return level.contains(coords)
    cache = level.__dict__.setdefault("_ancestor_key_cache", {})
    keys_anc = cache.get(n)
    if keys_anc is None:
        anc = level.coords >> (level.level - n)
        k = anc[:, 0].astype(np.int64)
        for j in range(1, level.dimension):
            k = (k << n) | anc[:, j]
        keys_anc = np.unique(k)
        cache[n] = keys_anc
    probe = coords[:, 0].astype(np.int64)
    for j in range(1, level.dimension):
        probe = (probe << n) | coords[:, j]
    pos = np.searchsorted(keys_anc, probe)
    ok = pos < len(keys_anc)
    out = np.zeros(len(coords), dtype=bool)
    out[ok] = keys_anc[pos[ok]] == probe[ok]
    return out


# -- arc length ----------------------------------------------------------------


def _adaptive_simpson(fun, a, b, tol=SIMPSON_TOL, max_depth=SIMPSON_MAX_DEPTH):
    if b <= a:
        return 0.0
    fa, fb = fun(a), fun(b)
    m = 0.5 * (a + b)
    fm = fun(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_rec(fun, a, b, fa, fm, fb, whole, tol, max_depth)


def _simpson_rec(fun, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = fun(lm), fun(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    err = left + right - whole
    if abs(err) <= 15.0 * tol:
        return left + right + err / 15.0
    if depth <= 0:
        raise NumericFailure(f"adaptive quadrature did not reach tol={tol:g} on [{a}, {b}]")
    return _simpson_rec(fun, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + _simpson_rec(
        fun, m, b, fm, frm, fb, right, tol / 2.0, depth - 1
    )


def _base_graph(curve):
    """The unflagged monotone graph underlying a curve (PolyGraph flags stripped)."""
    if isinstance(curve, PolyGraph) and (curve.swap or curve.reflect):
        return PolyGraph(curve.coeffs, domain=curve.domain)
    return curve


def _graph_domain(g):
    if isinstance(g, (PolyGraph, PLGraph)):
        return g.domain
    if isinstance(g, ConvexGraph):
        return g.domain
    raise CurveError(f"not a graph curve: {type(g).__name__}")


def _graph_value_fn(g):
    if isinstance(g, PolyGraph):
        return g.base_value
    return g.value


def _graph_deriv_fn(g):
    if isinstance(g, PolyGraph):
        return g.base_deriv
    return g.deriv_right


def graph_arc_length(g, u: float, v: float) -> float:
    """Arc length of a graph curve over the parameter interval [u, v].

    Exact for piecewise-linear graphs; adaptive Simpson on
    sqrt(1 + f'(t)**2) with absolute tolerance 1e-10 otherwise.  For
    flagged PolyGraphs the parameter is the base polynomial's argument
    (swap/reflect are isometries, so lengths are unchanged).
    """
    if v < u:
        raise CurveError("interval must satisfy u <= v")
    if v == u:
        return 0.0
    g = _base_graph(g)
    a, b = _graph_domain(g)
    if u < a - 1e-12 or v > b + 1e-12:
        raise CurveError(f"[{u}, {v}] outside the graph domain [{a}, {b}]")
    if isinstance(g, PLGraph):
        return g.arc_length(u, v)
    if isinstance(g, ConvexGraph) and g._pl is not None:
        return g._pl.arc_length(u, v)
    deriv = _graph_deriv_fn(g)

    def integrand(t):
        return math.hypot(1.0, float(deriv(t)))

    if isinstance(g, ConvexGraph) and g.breakpoints is not None:
        knots = g.breakpoints
        cuts = np.concatenate([[u], knots[(knots > u) & (knots < v)], [v]])
        return sum(_adaptive_simpson(integrand, x, y) for x, y in zip(cuts, cuts[1:]))
    return _adaptive_simpson(integrand, u, v)


# -- lengths inside level sets ---------------------------------------------------


def curve_levelset_length(curve, level: LevelSet, tspan=None) -> float:
    """Length of curve n (union of surviving cubes).

    Lines use exact per-cube clipping; monotone graphs locate their cube
    crossings by bisection (monotony makes every cube wall crossing
    unique) and integrate arc length per x-interval.
    """
    if isinstance(curve, Line):
        intervals, _ = line_cell_intervals(curve, level, tspan)
        if intervals.size == 0:
            return 0.0
        return float(np.sum(intervals[:, 1] - intervals[:, 0]))
    if isinstance(curve, (PolyGraph, PLGraph, ConvexGraph)):
        base = _base_graph(curve)
        spans = graph_cell_spans(curve, level)
        return float(sum(graph_arc_length(base, a, b) for a, b, _ in spans))
    raise CurveError(f"unsupported curve type {type(curve).__name__}")


def _monotone_solve(value_fn, target, a, b):
    """x with f(x) = target on [a, b] for non-decreasing f, by bisection."""
    fa = float(value_fn(a))
    fb = float(value_fn(b))
    if target <= fa:
        return a
    if target >= fb:
        return b
    lo, hi = a, b
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if float(value_fn(mid)) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16:
            break
    return 0.5 * (lo + hi)


def graph_cell_spans(curve, level: LevelSet):
    """(x0, x1, (col, row)) spans of a monotone graph inside surviving cubes.

    Planar only.  PolyGraph orientation flags are handled by transforming
    the lattice, keeping the walked graph non-decreasing.  Coordinates in
    the result refer to the transformed lattice.
    """
    if level.dimension != 2:
        raise CurveError("graph/level intersections are planar only")
    base = _base_graph(curve)
    value = _graph_value_fn(base)
    a, b = _graph_domain(base)
    a, b = max(a, 0.0), min(b, 1.0)
    if not b > a:
        return []
    n = level.level
    side_count = 1 << n
    coords = level.coords
    if getattr(curve, "swap", False):
        coords = coords[:, ::-1]
    if getattr(curve, "reflect", False):
        coords = coords.copy()
        coords[:, 0] = side_count - 1 - coords[:, 0]
    key = np.sort((coords[:, 0].astype(np.int64) << n) | coords[:, 1])

    s = 2.0**-n
    spans = []
    col_lo = max(int(np.floor(a / s)), 0)
    col_hi = min(int(np.ceil(b / s)), side_count - 1)
    for col in range(col_lo, col_hi + 1):
        x0 = max(a, col * s)
        x1 = min(b, (col + 1) * s)
        if not x1 > x0:
            continue
        y0, y1 = float(value(x0)), float(value(x1))
        if y1 < y0:
            raise CurveError("graph must be non-decreasing for level-set clipping")
        row_lo = max(int(np.floor(y0 / s)), 0)
        row_hi = min(int(np.floor(max(y1 - 1e-15, y0) / s)), side_count - 1)
        for row in range(row_lo, row_hi + 1):
            probe = (np.int64(col) << n) | np.int64(row)
            pos = np.searchsorted(key, probe)
            if pos >= len(key) or key[pos] != probe:
                continue
            xa = _monotone_solve(value, row * s, x0, x1)
            xb = _monotone_solve(value, (row + 1) * s, x0, x1)
            if xb > xa:
                spans.append((xa, xb, (col, row)))
    return spans


# -- sup distance ----------------------------------------------------------------


def _extended_eval(g, x: np.ndarray) -> np.ndarray:
    """Evaluate a graph, continuing linearly beyond its domain ends."""
    a, b = _graph_domain(g)
    value = _graph_value_fn(g)
    deriv = _graph_deriv_fn(g)
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    inside = (x >= a) & (x <= b)
    out[inside] = value(x[inside])
    left = x < a
    if np.any(left):
        slope = float(np.asarray(deriv(a)).reshape(-1)[0])
        out[left] = float(value(a)) + slope * (x[left] - a)
    right = x > b
    if np.any(right):
        eps = min(1e-9, (b - a) * 1e-6)
        slope = float(np.asarray(deriv(b - eps)).reshape(-1)[0])
        out[right] = float(value(b)) + slope * (x[right] - b)
    return out


def _pl_knots(g):
    if isinstance(g, PLGraph):
        return np.asarray(g.xs)
    if isinstance(g, ConvexGraph) and g.breakpoints is not None:
        return g.breakpoints
    return None


def sup_distance(f, g, grid: int = 2048, refine_rounds: int = 8) -> float:
    """sup over [0, 1] of |f - g|, extending both graphs linearly.

    Exact at the union of breakpoints when both graphs are piecewise
    linear; otherwise a dense grid plus local refinement around the
    leading maxima.  For 1-Lipschitz graphs the result brackets the
    Hausdorff distance D: D <= sup and sup <= (1 + Lip) D.
    """
    knots = [np.linspace(0.0, 1.0, grid + 1)]
    exact = True
    for h in (f, g):
        pts = _pl_knots(h)
        if pts is None:
            exact = False
        else:
            knots.append(pts[(pts >= 0.0) & (pts <= 1.0)])
    xs = np.unique(np.concatenate(knots))
    diff = np.abs(_extended_eval(f, xs) - _extended_eval(g, xs))
    best = float(diff.max())
    if exact:
        return best
    top = np.argsort(diff)[-4:]
    for i in top:
        lo = xs[max(int(i) - 1, 0)]
        hi = xs[min(int(i) + 1, len(xs) - 1)]
        for _ in range(refine_rounds):
            sub = np.linspace(lo, hi, 33)
            d = np.abs(_extended_eval(f, sub) - _extended_eval(g, sub))
            j = int(np.argmax(d))
            best = max(best, float(d[j]))
            lo = sub[max(j - 1, 0)]
            hi = sub[min(j + 1, 32)]
    return best
