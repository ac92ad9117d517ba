import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tubenull.curves import (
    ConvexGraph,
    CurveError,
    Line,
    PLGraph,
    PolyGraph,
    TubeSpec,
    curve_levelset_length,
    curve_to_json,
    graph_arc_length,
    line_box_length,
    line_cell_intervals,
    parse_curve,
    sup_distance,
)
from tubenull.fractal import LevelSet, build_levels, level0
from tubenull.gauges import Schedule


def sampling_length_oracle(line, lo, hi, coarse=4096):
    """Independent clip-length oracle: point sampling plus bisection.

    Brackets the inside/outside transitions on a dense parameter grid and
    bisects each transition; no shared code with the slab clipper.
    """
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    p = np.asarray(line.point)
    u = np.asarray(line.direction)

    def inside(t):
        x = p + t * u
        return bool(np.all(x >= lo - 1e-15) and np.all(x <= hi + 1e-15))

    tmax = float(np.sum(np.abs(hi - lo))) + float(np.linalg.norm(p - lo)) + 2.0
    ts = np.linspace(-tmax, tmax, coarse + 1)
    flags = np.array([inside(t) for t in ts])
    if not flags.any():
        return 0.0
    total = 0.0
    start = None
    for i in range(len(ts)):
        if flags[i] and start is None:
            start = ts[i] if i == 0 else _bisect_edge(inside, ts[i - 1], ts[i])
        if start is not None and (i == len(ts) - 1 or not flags[i + 1]):
            if i == len(ts) - 1:
                end = ts[i]
            else:
                end = _bisect_edge(lambda t: not inside(t), ts[i], ts[i + 1])
            total += end - start
            start = None
    return total


def _bisect_edge(pred, t_out, t_in):
    # pred false at t_out, true at t_in; return the crossing
    for _ in range(60):
        mid = 0.5 * (t_out + t_in)
        if pred(mid):
            t_in = mid
        else:
            t_out = mid
    return 0.5 * (t_out + t_in)


def full_level(n):
    side = 1 << n
    gx, gy = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    return LevelSet(n, np.stack([gx.ravel(), gy.ravel()], axis=1))


# -- line_box_length -----------------------------------------------------------


def test_diagonal():
    line = Line((0.0, 0.0), (1.0, 1.0))
    assert line_box_length(line, [0, 0], [1, 1]) == pytest.approx(math.sqrt(2), abs=1e-15)


def test_horizontal():
    line = Line((0.0, 0.5), (1.0, 0.0))
    assert line_box_length(line, [0, 0], [1, 1]) == 1.0


def test_slope_half_exit():
    # exits the unit square at (1, 0.5): length sqrt(1.25)
    line = Line((0.0, 0.0), (2.0, 1.0))
    got = line_box_length(line, [0, 0], [1, 1])
    assert got == pytest.approx(math.sqrt(1.25), abs=1e-12)
    assert got == pytest.approx(sampling_length_oracle(line, [0, 0], [1, 1]), abs=1e-9)


def test_clip_matches_sampling_oracle_random():
    rng = np.random.default_rng(42)
    for _ in range(60):
        theta = rng.uniform(0, math.pi)
        rho = rng.uniform(-1.0, 1.5)
        line = Line.from_theta_rho(theta, rho)
        lo = rng.uniform(0, 0.5, size=2)
        hi = lo + rng.uniform(0.1, 0.5, size=2)
        assert line_box_length(line, lo, hi) == pytest.approx(
            sampling_length_oracle(line, lo, hi), abs=1e-6
        )


@settings(max_examples=60, deadline=None)
@given(
    theta=st.floats(0.01, math.pi - 0.01),
    rho=st.floats(-0.9, 1.2),
)
def test_clip_square_symmetries(theta, rho):
    # the 8 symmetries of the unit square leave clip lengths unchanged
    line = Line.from_theta_rho(theta, rho)
    base = line_box_length(line, [0, 0], [1, 1])
    p = np.asarray(line.point)
    u = np.asarray(line.direction)
    mats = []
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    flip = np.array([[-1.0, 0.0], [0.0, 1.0]])
    m = np.eye(2)
    for _ in range(4):
        mats.extend([m, flip @ m])
        m = rot @ m
    center = np.array([0.5, 0.5])
    for m in mats:
        q = m @ (p - center) + center
        v = m @ u
        assert line_box_length(Line(tuple(q), tuple(v)), [0, 0], [1, 1]) == pytest.approx(
            base, abs=1e-12
        )


def test_3d_clip():
    line = Line((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    assert line_box_length(line, [0, 0, 0], [1, 1, 1]) == pytest.approx(math.sqrt(3))
    assert line_box_length(line, [0, 0, 0], [1, 1, 1]) == pytest.approx(
        sampling_length_oracle(line, [0, 0, 0], [1, 1, 1]), abs=1e-8
    )


# -- arc length ------------------------------------------------------------------


def gauss_legendre_arclength(deriv, a, b, panels=64, order=24):
    """High-order quadrature oracle, accurate far past 1e-12 here."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    total = 0.0
    edges = np.linspace(a, b, panels + 1)
    for lo, hi in zip(edges, edges[1:]):
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        ts = mid + half * nodes
        total += half * float(np.sum(weights * np.hypot(1.0, deriv(ts))))
    return total


def test_arc_length_flat():
    g = PolyGraph((0.0,))
    assert graph_arc_length(g, 0.0, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_arc_length_identity():
    g = PolyGraph((0.0, 1.0))
    assert graph_arc_length(g, 0.0, 1.0) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_arc_length_cubic():
    g = PolyGraph((0.0, 0.0, 0.0, 1.0 / 3.0))
    expected = gauss_legendre_arclength(lambda t: t**2, 0.0, 1.0)
    assert expected == pytest.approx(1.089429, abs=5e-7)  # integral of sqrt(1 + x^4)
    assert graph_arc_length(g, 0.0, 1.0) == pytest.approx(expected, abs=1e-10)


def test_arc_length_pl_exact():
    g = PLGraph((0.0, 0.5, 1.0), (0.0, 0.0, 0.5))
    assert graph_arc_length(g, 0.0, 1.0) == pytest.approx(0.5 + math.hypot(0.5, 0.5), abs=0)
    assert graph_arc_length(g, 0.25, 0.75) == pytest.approx(0.25 + math.hypot(0.25, 0.25))


def test_arc_length_convex_from_slopes():
    g = ConvexGraph.from_slopes(np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0]))
    assert graph_arc_length(g, 0.0, 1.0) == pytest.approx(0.5 + math.sqrt(0.5), abs=1e-12)


# -- curve_levelset_length -------------------------------------------------------


def test_full_level_diagonal():
    lv = full_level(2)
    line = Line((0.0, 0.0), (1.0, 1.0))
    assert curve_levelset_length(line, lv) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_single_cube_horizontal():
    lv = LevelSet(1, np.array([[0, 0]]))
    line = Line((0.0, 0.25), (1.0, 0.0))
    assert curve_levelset_length(line, lv) == pytest.approx(0.5, abs=1e-15)


def test_child_additivity():
    # splitting a cube into its 4 children preserves total clip length
    rng = np.random.default_rng(7)
    parent = LevelSet(1, np.array([[1, 0]]))
    kids = LevelSet(2, np.array([[2, 0], [2, 1], [3, 0], [3, 1]]))
    for _ in range(40):
        theta = rng.uniform(0.05, math.pi - 0.05)
        if abs(theta - math.pi / 2) < 0.05:
            continue
        line = Line.from_theta_rho(theta, rng.uniform(-0.5, 1.2))
        a = curve_levelset_length(line, parent)
        b = curve_levelset_length(line, kids)
        assert b == pytest.approx(a, abs=1e-12)


def test_levelset_length_upper_bound():
    sched = Schedule.from_entries(2, [4, 1, 1, 1, 1])
    levels = build_levels(sched, seed=3, n_max=5)
    rng = np.random.default_rng(5)
    for _ in range(25):
        line = Line.from_theta_rho(rng.uniform(0.05, 1.5), rng.uniform(0, 1.2))
        for lv in levels:
            got = curve_levelset_length(line, lv)
            total = line_box_length(line, [0, 0], [1, 1])
            assert got <= min(total, math.sqrt(2) * lv.side * lv.count) + 1e-12


def test_dyadic_line_counted_once():
    # a horizontal line on the boundary between two rows of cubes is
    # attributed to the upper row only
    lv = full_level(1)
    line = Line((0.0, 0.5), (1.0, 0.0))
    intervals, coords = line_cell_intervals(line, lv)
    assert len(intervals) == 2
    assert sorted(map(tuple, coords.tolist())) == [(0, 1), (1, 1)]
    assert curve_levelset_length(line, lv) == pytest.approx(1.0, abs=1e-15)


def test_graph_levelset_length_matches_line():
    # the same straight graph expressed as PolyGraph must agree with Line
    sched = Schedule.from_entries(2, [1, 1, 4, 1])
    levels = build_levels(sched, seed=11, n_max=4)
    g = PolyGraph((0.1, 0.7))
    line = Line((0.0, 0.1), (1.0, 0.7))
    for lv in levels:
        assert curve_levelset_length(g, lv) == pytest.approx(
            curve_levelset_length(line, lv), abs=1e-9
        )


def test_graph_levelset_flags():
    # swap reflects the curve across the main diagonal, so its length in a
    # level set equals the plain graph's length in the transposed set;
    # reflect mirrors across x = 1/2 likewise
    sched = Schedule.from_entries(2, [1, 4, 1])
    lv = build_levels(sched, seed=13, n_max=3)[3]
    g = PolyGraph((0.05, 0.0, 0.9))
    got_swap = curve_levelset_length(PolyGraph(g.coeffs, swap=True), lv)
    transposed = LevelSet(lv.level, lv.coords[:, ::-1])
    assert got_swap == pytest.approx(curve_levelset_length(g, transposed), abs=1e-9)

    got_refl = curve_levelset_length(PolyGraph(g.coeffs, reflect=True), lv)
    side = (1 << lv.level) - 1
    mirrored = lv.coords.copy()
    mirrored[:, 0] = side - mirrored[:, 0]
    assert got_refl == pytest.approx(
        curve_levelset_length(g, LevelSet(lv.level, mirrored)), abs=1e-9
    )


# -- sup distance ----------------------------------------------------------------


def test_sup_distance_identical():
    g = PolyGraph((0.0, 0.0, 0.0, 1.0 / 3.0))
    assert sup_distance(g, g) == 0.0


def test_sup_distance_constants():
    f = PLGraph((0.0, 1.0), (0.0, 0.0))
    g = PLGraph((0.0, 1.0), (0.25, 0.25))
    assert sup_distance(f, g) == pytest.approx(0.25, abs=0)


def test_sup_distance_pl_exact_at_kinks():
    f = PLGraph((0.0, 0.5, 1.0), (0.0, 0.5, 0.5))
    g = PLGraph((0.0, 1.0), (0.0, 0.5))
    # difference peaks at the kink x = 0.5: |0.5 - 0.25| = 0.25
    assert sup_distance(f, g) == pytest.approx(0.25, abs=0)


def test_length_stability_over_random_convex_pairs():
    # arc-length difference vs sup-norm distance: the ratio stays under the
    # calibrated constant 4 for monotone convex graphs with slopes in [0, 1]
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        k = int(rng.integers(2, 20))
        knots = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, size=k - 1)]))
        f = ConvexGraph.from_slopes(knots, np.sort(rng.uniform(0, 1, size=len(knots) - 1)))
        k2 = int(rng.integers(2, 20))
        knots2 = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, size=k2 - 1)]))
        g = ConvexGraph.from_slopes(
            knots2, np.sort(rng.uniform(0, 1, size=len(knots2) - 1)), y0=rng.uniform(0, 0.05)
        )
        s = sup_distance(f, g)
        if s < 1e-9:
            continue
        dl = abs(graph_arc_length(f, 0, 1) - graph_arc_length(g, 0, 1))
        worst = max(worst, dl / s)
    assert worst <= 4.0


# -- misc ------------------------------------------------------------------------


def test_parse_curve_roundtrip():
    records = [
        {"line": {"theta": 0.7, "rho": 0.3}},
        {"poly": {"coeffs": [0.0, 0.5, 0.25], "swap": False, "reflect": True}},
        {"pl": {"pts": [[0.0, 0.0], [0.5, 0.1], [1.0, 0.6]]}},
    ]
    for rec in records:
        curve = parse_curve(json.dumps(rec))
        back = curve_to_json(curve)
        again = parse_curve(back)
        assert type(again) is type(curve)
    line = parse_curve(records[0])
    assert line.theta == pytest.approx(0.7)
    assert line.rho == pytest.approx(0.3)


def test_dyadic_flag():
    assert Line((0.0, 0.25), (1.0, 0.0)).is_dyadic()
    assert Line((0.25, 0.0), (0.0, 1.0)).is_dyadic()
    assert not Line((0.0, 0.3000001), (1.0, 0.0)).is_dyadic(max_depth=10)
    assert not Line.from_theta_rho(0.7, 0.25).is_dyadic()


def test_tube_spec_validation():
    with pytest.raises(CurveError):
        TubeSpec(Line((0.0, 0.0), (1.0, 0.0)), 0.0)


def test_pl_validation():
    with pytest.raises(CurveError):
        PLGraph((0.0, 0.0), (0.0, 1.0))
    with pytest.raises(CurveError):
        PLGraph((0.0, 1.0), (0.5, 0.0))
