"""Intersection statistics of curves with random dyadic sets.

The central quantity is the normalized intersection length
    y = 2**(dn) / P_n * length(level n curve),
a martingale in n for non-dyadic curves.  This module evaluates it for
single curves and for large line nets (batched, by descending the
nesting structure), runs resampling ensembles for the martingale mean
and tail checks, projects measures onto direction nets, evaluates tube
masses and cover certificates, and counts fiber covering intervals.

Reductions are fixed-order over trial/cube indices, so every report is
bit-stable for a given seed regardless of worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .curves import (
    ConvexGraph,
    Line,
    PLGraph,
    PolyGraph,
    TubeSpec,
    _survivor_mask,
    curve_levelset_length,
    graph_arc_length,
    graph_cell_spans,
    line_cell_intervals,
)
from .fractal import LevelSet
from .gauges import GaugeSpec, eval_gauge
from .rng import RngStream

_PAIR_BUDGET = 2_000_000


class StatsError(ValueError):
    pass


def worker_count() -> int:
    """Thread cap from TUBENULL_THREADS (default: up to 4)."""
    env = os.environ.get("TUBENULL_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


@dataclass
class StatSample:
    """One recorded intersection statistic."""

    curve_id: str
    level: int
    y: float
    dy: Optional[float] = None


# -- normalized intersection values ---------------------------------------------


def y_value(level: LevelSet, curve, allow_dyadic: bool = False) -> float:
    """2**(dn) / P_n times the curve's length inside the level set.

    Lines on the dyadic grid at this level's depth are rejected (they sit
    on cube boundaries and break the martingale normalization) unless
    allow_dyadic is set.
    """
    if (
        isinstance(curve, Line)
        and not allow_dyadic
        and curve.is_dyadic(max_depth=max(level.level, 1))
    ):
        raise StatsError("dyadic lines are excluded; pass allow_dyadic=True to override")
    length = curve_levelset_length(curve, level)
    d, n = level.dimension, level.level
    return 2.0 ** (d * n) / level.count * length


def _line_frames(theta: np.ndarray, rho: np.ndarray):
    theta = np.asarray(theta, dtype=float)
    rho = np.asarray(rho, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    px, py = rho * c, rho * s
    ux, uy = -s, c
    return px, py, ux, uy


def _clip_many(px, py, ux, uy, lo_x, lo_y, side, t0, t1):
    """Intersect current intervals with per-pair square slabs, in place."""
    with np.errstate(divide="ignore", invalid="ignore"):
        for p, u, lo in ((px, ux, lo_x), (py, uy, lo_y)):
            hi = lo + side
            a = (lo - p) / u
            b = (hi - p) / u
            amin = np.minimum(a, b)
            amax = np.maximum(a, b)
            parallel = u == 0.0
            if np.any(parallel):
                inside = (lo <= p) & (p < hi)
                amin = np.where(parallel, np.where(inside, -np.inf, np.inf), amin)
                amax = np.where(parallel, np.where(inside, np.inf, -np.inf), amax)
            np.maximum(t0, amin, out=t0)
            np.minimum(t1, amax, out=t1)
    return t0, t1


def levels_line_y(levels: Sequence[LevelSet], theta, rho) -> np.ndarray:
    """Per-level normalized intersection values for many lines at once.

    levels must be a nested chain (output of build_levels); returns an
    array of shape (len(levels), n_lines).  One descent through the
    nesting serves every level.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    n_lines = len(theta)
    deepest = levels[-1]
    d = deepest.dimension
    if d != 2:
        raise StatsError("batched line values are planar only")
    out = np.zeros((len(levels), n_lines))
    chunk = max(1, _PAIR_BUDGET // (8 * max(len(levels), 2)))
    for start in range(0, n_lines, chunk):
        sl = slice(start, min(start + chunk, n_lines))
        out[:, sl] = _levels_line_y_block(levels, theta[sl], rho[sl])
    return out


def _levels_line_y_block(levels, theta, rho):
    n_lines = len(theta)
    px, py, ux, uy = _line_frames(theta, rho)
    out = np.zeros((len(levels), n_lines))

    idx = np.arange(n_lines)
    coords = np.zeros((n_lines, 2), dtype=np.int64)
    t0 = np.full(n_lines, -np.inf)
    t1 = np.full(n_lines, np.inf)
    t0, t1 = _clip_many(px, py, ux, uy, np.zeros(n_lines), np.zeros(n_lines), 1.0, t0, t1)
    keep = t1 > t0
    idx, coords, t0, t1 = idx[keep], coords[keep], t0[keep], t1[keep]
    np.add.at(out[0], idx, t1 - t0)

    offs = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.int64)
    for depth, level in enumerate(levels[1:], start=1):
        if idx.size == 0:
            break
        side = 2.0**-depth
        kids = ((coords << 1)[:, None, :] + offs[None, :, :]).reshape(-1, 2)
        kidx = np.repeat(idx, 4)
        ka = np.repeat(t0, 4)
        kb = np.repeat(t1, 4)
        ka, kb = _clip_many(
            px[kidx], py[kidx], ux[kidx], uy[kidx],
            kids[:, 0] * side, kids[:, 1] * side, side, ka, kb,
        )
        keep = kb > ka
        kids, kidx, ka, kb = kids[keep], kidx[keep], ka[keep], kb[keep]
        alive = level.contains(kids)
        coords, idx, t0, t1 = kids[alive], kidx[alive], ka[alive], kb[alive]
        if idx.size:
            np.add.at(out[depth], idx, t1 - t0)

    for depth, level in enumerate(levels):
        out[depth] *= 2.0 ** (2 * depth) / level.count
    return out


def line_y_values(level: LevelSet, theta, rho) -> np.ndarray:
    """Normalized intersection values of many lines at a single level.

    Descends the level's own ancestor lattice, so no intermediate levels
    are required.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    n_lines = len(theta)
    out = np.zeros(n_lines)
    chunk = max(1, _PAIR_BUDGET // (8 * max(level.level, 2)))
    for start in range(0, n_lines, chunk):
        sl = slice(start, min(start + chunk, n_lines))
        out[sl] = _line_y_block(level, theta[sl], rho[sl])
    return out


def _line_y_block(level: LevelSet, theta, rho):
    n_lines = len(theta)
    px, py, ux, uy = _line_frames(theta, rho)
    idx = np.arange(n_lines)
    coords = np.zeros((n_lines, 2), dtype=np.int64)
    t0 = np.full(n_lines, -np.inf)
    t1 = np.full(n_lines, np.inf)
    t0, t1 = _clip_many(px, py, ux, uy, np.zeros(n_lines), np.zeros(n_lines), 1.0, t0, t1)
    keep = t1 > t0
    idx, coords, t0, t1 = idx[keep], coords[keep], t0[keep], t1[keep]

    offs = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.int64)
    for n in range(level.level):
        if idx.size == 0:
            break
        side = 2.0 ** -(n + 1)
        kids = ((coords << 1)[:, None, :] + offs[None, :, :]).reshape(-1, 2)
        kidx = np.repeat(idx, 4)
        ka = np.repeat(t0, 4)
        kb = np.repeat(t1, 4)
        ka, kb = _clip_many(
            px[kidx], py[kidx], ux[kidx], uy[kidx],
            kids[:, 0] * side, kids[:, 1] * side, side, ka, kb,
        )
        keep = kb > ka
        kids, kidx, ka, kb = kids[keep], kidx[keep], ka[keep], kb[keep]
        alive = _survivor_mask(kids, n + 1, level)
        coords, idx, t0, t1 = kids[alive], kidx[alive], ka[alive], kb[alive]

    out = np.zeros(n_lines)
    if idx.size:
        np.add.at(out, idx, t1 - t0)
    out *= 2.0 ** (2 * level.level) / level.count
    return out


# -- martingale ensembles ---------------------------------------------------------


@dataclass
class TailReport:
    """Empirical exceedance tail of one resampling ensemble.

    frequencies[i] estimates P(|dY| > kappa[i] * sqrt(y_base)); the
    fitted envelope is amplitude * exp(-decay * kappa^2 * scale) with
    scale = 2**((1-d) n) P_n, fitted on kappas with at least 10
    exceedances (None when no kappa qualifies).
    """

    level: int
    kappas: np.ndarray
    frequencies: np.ndarray
    scale: float
    amplitude: Optional[float] = None
    decay: Optional[float] = None

    def envelope(self, kappa) -> np.ndarray:
        if self.amplitude is None:
            raise StatsError("no envelope was fitted (too few exceedances)")
        kappa = np.asarray(kappa, dtype=float)
        return self.amplitude * np.exp(-self.decay * kappa**2 * self.scale)

    def shape_ok(self) -> bool:
        """Monotone tail, dominated by the envelope evaluated at kappa/2."""
        if np.any(np.diff(self.frequencies) > 1e-12):
            return False
        if self.amplitude is None:
            return True
        return bool(np.all(self.frequencies <= self.envelope(self.kappas / 2.0) + 1e-12))


@dataclass
class MartingaleReport:
    curve_id: str
    level: int
    deterministic: bool
    y_base: float
    trials: int
    mean_dy: float
    se_dy: float
    tail: Optional[TailReport] = None
    note: str = ""

    @property
    def mean_ok(self) -> bool:
        if self.deterministic:
            return self.mean_dy == 0.0
        return abs(self.mean_dy) <= 3.0 * self.se_dy


def martingale_ensemble(
    level: LevelSet,
    a_next: int,
    curve: Line,
    trials: int,
    seed: int,
    kappas: Optional[np.ndarray] = None,
    stream_index: int = 1,
) -> MartingaleReport:
    """Resample the step level -> level+1 with the level frozen.

    For the full step (a = 2**d) the increment is identically zero and a
    note says so.  Otherwise each trial draws one child per surviving
    cube (keyed by trial and cube, so the ensemble is deterministic in
    the seed) and records dY = Y_next - Y_base.
    """
    d = level.dimension
    n = level.level
    full = 1 << d
    if a_next not in (1, full):
        raise StatsError(f"step factor must be 1 or {full}")
    if isinstance(curve, Line) and curve.is_dyadic(max_depth=level.level + 1):
        raise StatsError("martingale ensembles require curves off the step's dyadic grid")
    if trials < 1:
        raise StatsError("need at least one trial")
    if kappas is None:
        kappas = np.linspace(0.25, 4.0, 16)
    kappas = np.asarray(kappas, dtype=float)

    scale_n = 2.0 ** (d * n) / level.count
    intervals, coords = line_cell_intervals(curve, level)
    y_base = scale_n * float(np.sum(intervals[:, 1] - intervals[:, 0])) if len(intervals) else 0.0

    if a_next == full:
        freqs = np.zeros_like(kappas)
        tail = TailReport(
            level=n, kappas=kappas, frequencies=freqs,
            scale=2.0 ** ((1 - d) * n) * level.count,
        )
        return MartingaleReport(
            curve_id="", level=n, deterministic=True, y_base=y_base,
            trials=trials, mean_dy=0.0, se_dy=0.0, tail=tail,
            note="deterministic step, dY = 0",
        )

    if len(coords) == 0:
        return MartingaleReport(
            curve_id="", level=n, deterministic=False, y_base=0.0,
            trials=trials, mean_dy=0.0, se_dy=0.0, tail=None,
            note="curve misses the level set",
        )

    # per-cube child clip lengths, shape (m, 2**d)
    child_len = _child_clip_lengths(curve, coords, n)
    cube_keys = (coords[:, 0].astype(np.uint64) << np.uint64(n)) | coords[:, 1].astype(np.uint64)
    rng = RngStream(seed, stream_index)

    dys = np.empty(trials)
    scale_next = 2.0 ** (d * (n + 1)) / level.count  # P_{n+1} = P_n on a thinning step
    block = max(1, min(trials, _PAIR_BUDGET // max(len(coords), 1)))

    def run_block(start):
        stop = min(start + block, trials)
        picks = rng.trial_choices(n, cube_keys, np.arange(start, stop, dtype=np.uint64), d)
        lengths = np.take_along_axis(
            np.broadcast_to(child_len, (stop - start, *child_len.shape)), picks[:, :, None], 2
        )[:, :, 0]
        dys[start:stop] = scale_next * lengths.sum(axis=1) - y_base

    starts = list(range(0, trials, block))
    if len(starts) > 1 and worker_count() > 1:
        with ThreadPoolExecutor(max_workers=worker_count()) as pool:
            list(pool.map(run_block, starts))
    else:
        for s in starts:
            run_block(s)

    mean = float(dys.mean())
    se = float(dys.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    thresholds = kappas * math.sqrt(max(y_base, 0.0))
    freqs = np.array([(np.abs(dys) > t).mean() for t in thresholds])
    scale = 2.0 ** ((1 - d) * n) * level.count
    amp, dec = _fit_tail_envelope(kappas, freqs, trials, scale)
    tail = TailReport(
        level=n, kappas=kappas, frequencies=freqs, scale=scale, amplitude=amp, decay=dec
    )
    return MartingaleReport(
        curve_id="", level=n, deterministic=False, y_base=y_base,
        trials=trials, mean_dy=mean, se_dy=se, tail=tail,
    )


def _child_clip_lengths(curve: Line, coords: np.ndarray, n: int) -> np.ndarray:
    px, py = curve.point
    ux, uy = curve.direction
    side = 2.0 ** -(n + 1)
    offs = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.int64)
    kids = ((coords << 1)[:, None, :] + offs[None, :, :]).reshape(-1, 2)
    m = len(kids)
    t0 = np.full(m, -np.inf)
    t1 = np.full(m, np.inf)
    t0, t1 = _clip_many(
        np.full(m, px), np.full(m, py), np.full(m, ux), np.full(m, uy),
        kids[:, 0] * side, kids[:, 1] * side, side, t0, t1,
    )
    lengths = np.maximum(t1 - t0, 0.0)
    return lengths.reshape(len(coords), 4)


def _fit_tail_envelope(kappas, freqs, trials, scale):
    """Least squares of log frequency against kappa^2 * scale."""
    counts = freqs * trials
    mask = (counts >= 10) & (freqs < 1.0)
    if mask.sum() < 2:
        return None, None
    x = kappas[mask] ** 2 * scale
    y = np.log(freqs[mask])
    slope, intercept = np.polyfit(x, y, 1)
    decay = max(-slope, 0.0)
    return float(np.exp(intercept)), float(decay)


# -- suprema over nets -------------------------------------------------------------


@dataclass
class TrendReport:
    levels: list
    maxima: np.ndarray
    argmax: list


def sup_over_net(levels: Sequence[LevelSet], net) -> TrendReport:
    """Exact per-level maximum of the normalized values over a finite net."""
    if hasattr(net, "theta"):
        values = levels_line_y(levels, net.theta, net.rho)
        arg = np.argmax(values, axis=1)
        return TrendReport(
            levels=[lv.level for lv in levels],
            maxima=values.max(axis=1),
            argmax=[int(i) for i in arg],
        )
    curves = list(net)
    if not curves:
        raise StatsError("net must be nonempty")
    values = np.zeros((len(levels), len(curves)))
    for j, curve in enumerate(curves):
        for i, lv in enumerate(levels):
            values[i, j] = y_value(lv, curve, allow_dyadic=False)
    arg = np.argmax(values, axis=1)
    return TrendReport(
        levels=[lv.level for lv in levels],
        maxima=values.max(axis=1),
        argmax=[int(i) for i in arg],
    )


# -- projections --------------------------------------------------------------------


def _square_shadow_cdf(a, b, t):
    """CDF at t of U[0,a] + U[0,b] (the square's shadow profile), a <= b elementwise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t = np.asarray(t, dtype=float)
    total = a + b
    t = np.clip(t, 0.0, total)
    ab = np.where(a > 0, a * b, 1.0)
    rising = np.where(a > 0, t**2 / (2.0 * ab), 0.0)
    plateau = (t - a / 2.0) / b
    falling = 1.0 - (total - t) ** 2 / (2.0 * ab)
    out = np.where(t < a, rising, np.where(t <= b, plateau, falling))
    return np.clip(out, 0.0, 1.0)


@dataclass
class ProjectionReport:
    width: float
    directions: np.ndarray
    per_direction: np.ndarray  # max bin density per direction

    @property
    def max_density(self) -> float:
        return float(self.per_direction.max())


def projection_density_sup(level: LevelSet, directions, width: float) -> ProjectionReport:
    """Max binned shadow density over a set of tube directions.

    For each direction the measure is pushed to the orthogonal axis with
    every cube contributing its exact trapezoid profile; bins of the
    given width are aligned at 0 and the density is bin mass / width.
    Planar only (the exact 3-d shadow profile is out of scope).
    """
    if level.dimension != 2:
        raise StatsError("projection densities are implemented for d = 2 only")
    if not 2.0**-24 <= width <= 4.0:
        raise StatsError(f"bin width {width} outside [2^-24, 4]")
    directions = np.atleast_1d(np.asarray(directions, dtype=float))
    s = level.side
    coords = level.coords.astype(float)
    mass = 1.0 / level.count
    n_bins = int(math.ceil(2.9 / width)) + 4
    offset = int(math.ceil(1.45 / width)) + 2

    per_dir = np.empty(len(directions))
    for i, phi in enumerate(directions):
        vx, vy = -math.sin(phi), math.cos(phi)
        z_lo = s * (coords[:, 0] * vx + coords[:, 1] * vy)
        z_lo = z_lo + s * (min(vx, 0.0) + min(vy, 0.0))
        a = s * min(abs(vx), abs(vy))
        b = s * max(abs(vx), abs(vy))
        support = a + b
        k_lo = np.floor(z_lo / width).astype(np.int64)
        k_hi = np.floor((z_lo + support) / width - 1e-15).astype(np.int64)
        k_hi = np.maximum(k_hi, k_lo)
        bins = np.zeros(n_bins)
        simple = k_lo == k_hi
        if np.any(simple):
            np.add.at(bins, k_lo[simple] + offset, mass)
        rest = ~simple
        if np.any(rest):
            zr, klor, khir = z_lo[rest], k_lo[rest], k_hi[rest]
            prev_cdf = np.zeros(zr.shape)
            max_span = int((khir - klor).max())
            for step in range(max_span):
                boundary = (klor + 1 + step) * width
                active = klor + step < khir
                cdf = np.where(
                    active, _square_shadow_cdf(a, b, boundary - zr), prev_cdf
                )
                seg = np.where(active, cdf - prev_cdf, 0.0)
                np.add.at(bins, np.minimum(klor + step, khir) + offset, seg * mass)
                prev_cdf = cdf
            np.add.at(bins, khir + offset, (1.0 - prev_cdf) * mass)
        per_dir[i] = bins.max() / width
    return ProjectionReport(width=width, directions=directions, per_direction=per_dir)


# -- tube functionals ----------------------------------------------------------------


@dataclass
class TubeMass:
    mass: float
    ratio: float
    se: Optional[float] = None
    flagged: bool = False


def tube_mass_ratio(
    level: LevelSet,
    tube: TubeSpec,
    mc_points: int = 1_000_000,
    seed: int = 0,
) -> TubeMass:
    """Normalized tube mass over width**(d-1).

    Planar levels are exact (per-cube strip clipping via the shadow
    profile); d = 3 uses stratified Monte Carlo with at least 10**6
    points and reports the standard error, flagging it when above 1% of
    the estimate.
    """
    if not isinstance(tube.curve, Line):
        raise StatsError("tube cores must be lines")
    d = level.dimension
    w = tube.width
    if d == 2:
        theta = tube.curve.theta
        rho = tube.curve.rho
        nx, ny = math.cos(theta), math.sin(theta)
        s = level.side
        coords = level.coords.astype(float)
        z_lo = s * (coords[:, 0] * nx + coords[:, 1] * ny)
        z_lo = z_lo + s * (min(nx, 0.0) + min(ny, 0.0))
        a = s * min(abs(nx), abs(ny))
        b = s * max(abs(nx), abs(ny))
        hi = _square_shadow_cdf(a, b, (rho + w) - z_lo)
        lo = _square_shadow_cdf(a, b, (rho - w) - z_lo)
        mass = float(np.sum(hi - lo)) / level.count
        return TubeMass(mass=mass, ratio=mass / w ** (d - 1))
    if d == 3:
        return _tube_mass_mc(level, tube, max(mc_points, 1_000_000), seed)
    raise StatsError(f"tube masses not implemented for d = {d}")


def _tube_mass_mc(level: LevelSet, tube: TubeSpec, mc_points: int, seed: int) -> TubeMass:
    d = 3
    w = tube.width
    p = np.asarray(tube.curve.point, dtype=float)
    u = np.asarray(tube.curve.direction, dtype=float)
    per_cube = max(8, int(math.ceil(mc_points / level.count)))
    s = level.side
    rng = np.random.default_rng(seed)
    frac = np.empty(level.count)
    block = max(1, _PAIR_BUDGET // per_cube)
    for start in range(0, level.count, block):
        stop = min(start + block, level.count)
        base = level.coords[start:stop].astype(float) * s
        pts = base[:, None, :] + rng.random((stop - start, per_cube, d)) * s
        rel = pts - p
        along = rel @ u
        dist2 = np.einsum("ijk,ijk->ij", rel, rel) - along**2
        frac[start:stop] = (dist2 <= w * w).mean(axis=1)
    mass = float(frac.sum()) / level.count
    se = float(np.sqrt(np.sum(frac * (1.0 - frac) / per_cube)) / level.count)
    ratio = mass / w ** (d - 1)
    return TubeMass(mass=mass, ratio=ratio, se=se, flagged=bool(se > 0.01 * max(mass, 1e-300)))


@dataclass
class CertificateReport:
    """The non-tube-nullity inequality chain for one explicit cover.

    Checks sum of w**(d-1) >= target_mass / density_bound, alongside the
    actual per-tube masses so a failure can be attributed either to the
    cover not capturing the mass or to an underestimated density bound.
    """

    target_mass: float
    density_bound: float
    width_sum: float
    threshold: float
    masses: np.ndarray
    verdict: str

    @property
    def ok(self) -> bool:
        return self.verdict == "cover is consistent with non-tube-nullity bound"


def tube_cover_certificate(
    level: LevelSet, tubes: Sequence[TubeSpec], target_mass: float, density_bound: float
) -> CertificateReport:
    d = level.dimension
    masses = np.array([tube_mass_ratio(level, t).mass for t in tubes])
    width_sum = float(sum(t.width ** (d - 1) for t in tubes))
    threshold = target_mass / density_bound
    if width_sum >= threshold - 1e-12:
        verdict = "cover is consistent with non-tube-nullity bound"
    elif masses.sum() > density_bound * width_sum + 1e-12:
        verdict = "cover violates claimed density bound"
    else:
        verdict = "cover fails to capture the target mass"
    return CertificateReport(
        target_mass=target_mass,
        density_bound=density_bound,
        width_sum=width_sum,
        threshold=threshold,
        masses=masses,
        verdict=verdict,
    )


# -- interval covers -----------------------------------------------------------------


def merge_intervals(intervals: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    if len(intervals) == 0:
        return np.empty((0, 2))
    order = np.argsort(intervals[:, 0], kind="stable")
    ivs = intervals[order]
    merged = [list(ivs[0])]
    for a, b in ivs[1:]:
        if a <= merged[-1][1] + tol:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return np.asarray(merged)


def greedy_interval_cover(intervals: np.ndarray, r: float) -> int:
    """Minimum count of length-r intervals covering a union of segments.

    Left-to-right greedy: place an interval at the first uncovered point,
    skip everything it covers.  Optimal for unions of intervals.
    """
    if r <= 0:
        raise StatsError("cover interval length must be positive")
    merged = merge_intervals(np.asarray(intervals, dtype=float))
    count = 0
    i = 0
    cursor = -np.inf
    while i < len(merged):
        a, b = merged[i]
        start = max(a, cursor)
        if start >= b - 1e-15:
            i += 1
            continue
        count += 1
        cursor = start + r
        while i < len(merged) and merged[i][1] <= cursor + 1e-15:
            i += 1
    return count


def optimal_interval_cover(intervals: np.ndarray, r: float, cap: int = 12) -> int:
    """Exhaustive-placement oracle for small instances.

    Any minimal cover can shift each interval right until its left end
    hits an uncovered segment point, so candidate starts are the segment
    endpoints plus r-multiples above them; the DP explores all of them.
    """
    merged = merge_intervals(np.asarray(intervals, dtype=float))
    if len(merged) == 0:
        return 0
    if len(merged) > cap:
        raise StatsError(f"oracle limited to {cap} merged intervals")
    max_chain = int(math.ceil((merged[-1][1] - merged[0][0]) / r)) + 1
    starts = set()
    for a, _ in merged:
        for j in range(max_chain + 1):
            starts.add(a + j * r)
    starts = sorted(starts)

    from functools import lru_cache

    def next_uncovered(x):
        for a, b in merged:
            if b > x + 1e-15:
                return max(a, x)
        return None

    @lru_cache(maxsize=None)
    def solve(x):
        nu = next_uncovered(x)
        if nu is None:
            return 0
        best = None
        for s in starts:
            if s - 1e-12 <= nu <= s + r - 1e-9:  # must cover nu and advance
                sub = solve(round(s + r, 14))
                if best is None or sub + 1 < best:
                    best = sub + 1
        return best if best is not None else len(merged) * 2
    return solve(-1e18)


def adversarial_strip_covers(count: int, tubes_per_cover: int, rng: np.random.Generator):
    """Random parallel-strip covers of the unit square.

    Each cover fixes a direction and tiles the square's full offset range
    with consecutive strips of random half-widths, so the union provably
    contains the square; certificates against these covers must pass
    whenever the density bound is honest.
    """
    covers = []
    for _ in range(count):
        phi = float(rng.uniform(0.0, math.pi))         # tube direction
        theta = (phi + math.pi / 2.0) % math.pi        # strip normal
        c, s = math.cos(theta), math.sin(theta)
        corners = [0.0, c, s, c + s]
        lo, hi = min(corners) - 1e-9, max(corners) + 1e-9
        widths = rng.uniform(0.3, 1.7, size=tubes_per_cover)
        widths *= (hi - lo) / (2.0 * widths.sum())
        tubes = []
        cursor = lo
        for w in widths:
            center = cursor + w
            tubes.append(TubeSpec(Line.from_theta_rho(theta, center), float(w)))
            cursor += 2.0 * w
        covers.append((phi, tubes))
    return covers


@dataclass
class FiberReport:
    r: float
    count: int
    ratio: float


def fiber_cover_count(level: LevelSet, curve, r: float, gauge: GaugeSpec) -> FiberReport:
    """Greedy covering of the curve's fiber by length-r parameter intervals.

    The fiber is the arclength-parametrized intersection with the level
    set; the ratio count * h(r) / r is the empirical covering constant.
    """
    if not 0.0 < r <= 1.0:
        raise StatsError(f"r must lie in (0, 1], got {r}")
    intervals = fiber_intervals(level, curve)
    count = greedy_interval_cover(intervals, r) if len(intervals) else 0
    return FiberReport(r=r, count=count, ratio=count * eval_gauge(gauge, r) / r)


def fiber_intervals(level: LevelSet, curve) -> np.ndarray:
    """Arclength-parameter intervals of the curve inside the level set."""
    if isinstance(curve, Line):
        intervals, _ = line_cell_intervals(curve, level)
        return merge_intervals(intervals)
    if isinstance(curve, (PolyGraph, PLGraph, ConvexGraph)):
        spans = graph_cell_spans(curve, level)
        from .curves import _base_graph

        base = _base_graph(curve)
        a0 = max(min(sp[0] for sp in spans), 0.0) if spans else 0.0
        out = []
        for xa, xb, _ in spans:
            sa = graph_arc_length(base, a0, xa)
            sb = sa + graph_arc_length(base, xa, xb)
            out.append((sa, sb))
        return merge_intervals(np.asarray(out)) if out else np.empty((0, 2))
    raise StatsError(f"unsupported curve type {type(curve).__name__}")


@dataclass
class BoxCoverReport:
    count: int
    ratio: float


def box_cover_count(level: LevelSet, gauge: GaugeSpec) -> BoxCoverReport:
    """Cube count at this level and its gauge-normalized ratio."""
    ratio = level.count * eval_gauge(gauge, level.side)
    return BoxCoverReport(count=level.count, ratio=float(ratio))
