import math

import numpy as np
import pytest

from tubenull.convex import (
    ConvexCode,
    InvalidCurveError,
    NetTooLargeError,
    breakpoint_indices,
    code_reconstruct,
    convex_breakpoints,
    convex_code,
    convex_net,
    dyadic_augment,
    sample_convex_functions,
    staircase_family,
)
from tubenull.curves import ConvexGraph, sup_distance

GOLDEN_N5_BREAKPOINTS = [0, 5, 10, 15, 19, 23, 25]  # grid indices, step 1/25
GOLDEN_N5_VALUES = [0, 0, 0, 1, 3, 6, 8]  # floor(f(x) * 25), f = x^3/3


def cubic_third():
    return ConvexGraph(lambda x: x**3 / 3.0, lambda x: x * x)


def constant_zero():
    return ConvexGraph(lambda x: np.zeros_like(np.asarray(x, float)), lambda x: np.zeros_like(np.asarray(x, float)))


def identity_graph():
    return ConvexGraph(lambda x: np.asarray(x, float), lambda x: np.ones_like(np.asarray(x, float)))


def test_breakpoints_cubic_golden():
    got = breakpoint_indices(cubic_third(), 5)
    assert got == GOLDEN_N5_BREAKPOINTS
    assert convex_breakpoints(cubic_third(), 5) == [j / 25 for j in GOLDEN_N5_BREAKPOINTS]


def test_breakpoints_flat():
    # the derivative clause never fires: pure 1/N stepping
    assert breakpoint_indices(constant_zero(), 5) == [0, 5, 10, 15, 20, 25]


def test_breakpoints_identity():
    # threshold f' + 1/N = 1.2 is unattainable, so only the 1/N clause fires
    assert breakpoint_indices(identity_graph(), 5) == [0, 5, 10, 15, 20, 25]


def test_code_values_cubic():
    code = convex_code(cubic_third(), 5)
    assert list(code.p_idx) == GOLDEN_N5_VALUES
    assert code.values == [k / 25 for k in GOLDEN_N5_VALUES]
    code.validate()


def test_code_values_trivial():
    assert list(convex_code(constant_zero(), 5).p_idx) == [0] * 6
    code = convex_code(identity_graph(), 5)
    # grid values are exact under floor quantization
    assert list(code.p_idx) == list(code.y_idx)


def test_invalid_derivative_rejected():
    bad = ConvexGraph(lambda x: 2.0 * np.asarray(x, float), lambda x: 2.0 * np.ones_like(np.asarray(x, float)))
    with pytest.raises(InvalidCurveError):
        convex_code(bad, 5)


def test_reconstruct_zero():
    pl = code_reconstruct(convex_code(constant_zero(), 5))
    assert set(pl.ys) == {0.0}


def test_reconstruct_fig2_vertices():
    pl = code_reconstruct(convex_code(cubic_third(), 5))
    assert list(pl.xs) == [j / 25 for j in GOLDEN_N5_BREAKPOINTS]
    assert list(pl.ys) == [k / 25 for k in GOLDEN_N5_VALUES]


def test_reconstruction_error_bound_cubic():
    f = cubic_third()
    sup5 = sup_distance(code_reconstruct(convex_code(f, 5)), f)
    assert 0.0 < sup5 <= 16.0 / 25.0
    # one constant covers N in {5, 10, 20, 40}
    consts = []
    for N in (5, 10, 20, 40):
        err = sup_distance(code_reconstruct(convex_code(f, N)), f)
        consts.append(err * N * N)
    assert max(consts) <= 4.0


def test_reconstruction_slopes_bounded():
    rng = np.random.default_rng(99)
    for f in sample_convex_functions(50, rng):
        pl = code_reconstruct(convex_code(f, 10))
        slopes = np.diff(pl.ys) / np.diff(pl.xs)
        assert np.all(slopes <= 1.5 + 1e-12)
        assert np.all(slopes >= 0.0)


def test_structural_bounds_random_ensemble():
    rng = np.random.default_rng(123)
    members = sample_convex_functions(100, rng)
    for N in (5, 10, 20, 40):
        for f in members:
            code = convex_code(f, N)
            code.validate()  # exact: <= 2N+1 points, gaps in (1, N] grid steps


def test_code_validate_rejects_bad_gaps():
    with pytest.raises(InvalidCurveError):
        ConvexCode(N=5, y_idx=(0, 1, 25), p_idx=(0, 0, 0)).validate()
    with pytest.raises(InvalidCurveError):
        ConvexCode(N=5, y_idx=(0, 6, 25), p_idx=(0, 1, 0)).validate()


def test_convex_net_small():
    rng = np.random.default_rng(5)
    reps, report = convex_net(2, 10_000, rng)
    assert report["distinct_codes"] == len(reps)
    assert math.log(max(report["distinct_codes"], 1)) <= report["combinatorial_bound_log"]


def test_same_code_implies_close():
    # representative contract: members sharing a code sit within C/N^2
    rng = np.random.default_rng(17)
    worst = {}
    for N in (5, 10):
        _, report = convex_net(N, 2500, rng)
        for group in report["groups"].values():
            for i in range(len(group)):
                for j in range(i + 1, len(group)):
                    d = sup_distance(group[i], group[j])
                    worst[N] = max(worst.get(N, 0.0), d * N * N)
    for N, w in worst.items():
        assert w <= 8.0, (N, w)


def test_quantized_values_shared_with_reconstruction():
    rng = np.random.default_rng(31)
    (f,) = sample_convex_functions(1, rng)
    code = convex_code(f, 8)
    pl = code_reconstruct(code)
    n2 = 64
    for j, k in zip(code.y_idx, code.p_idx):
        assert pl.value(j / n2) == pytest.approx(k / n2, abs=1e-12)
        assert math.floor(float(f.value(j / n2)) * n2 + 1e-12) == k


def test_staircase_counts_and_separation():
    fam2 = staircase_family(2)
    assert fam2.count == 6
    assert fam2.min_pairwise_separation_times_n2() == 1  # sup distance 1/4

    fam1 = staircase_family(1)
    assert fam1.count == 2
    assert fam1.min_pairwise_separation_times_n2() == 1  # distance 1 = 1/N^2

    fam4 = staircase_family(4)
    assert fam4.count == 70
    assert fam4.min_pairwise_separation_times_n2() >= 1


def test_staircase_member_graphs():
    fam = staircase_family(2)
    # member with slopes (0, 1): values 0, 0, 1/4 at x = 0, 1/2, 1
    idx = [i for i in range(fam.count) if fam.slopes[i].tolist() == [0, 2]][0]
    pl = fam.member(idx)
    assert pl.value(1.0) == pytest.approx(0.5)
    idx0 = [i for i in range(fam.count) if fam.slopes[i].tolist() == [0, 0]][0]
    assert fam.member(idx0).value(1.0) == 0.0


def test_staircase_refusal():
    with pytest.raises(NetTooLargeError):
        staircase_family(12, cap=1000)


def test_dyadic_augment_no_flat_segment():
    # minimum slope above the cutoff: nothing added
    f = ConvexGraph.from_slopes(np.array([0.0, 1.0]), np.array([0.5]))
    out, report = dyadic_augment([f], n=3, eta=1.5)
    assert report == [[]]
    assert len(out) == 1


def test_dyadic_augment_constant_at_height():
    n, eta = 3, 1.5
    b = 1.0
    height = 3 * 2.0**-n
    f = ConvexGraph.from_slopes(np.array([0.0, 1.0]), np.array([0.0]), y0=height)
    out, report = dyadic_augment([f], n=n, eta=eta)
    crossings = [c for c in report[0] if c[0] == 3]
    assert len(crossings) == math.floor(b * 2.0 ** (eta * n)) + 1


def test_dyadic_augment_crossing_exact():
    n, eta = 2, 1.5
    f = ConvexGraph.from_slopes(np.array([0.0, 0.5, 1.0]), np.array([0.0, 0.5]), y0=0.23)
    out, report = dyadic_augment([f], n=n, eta=eta)
    assert len(report[0]) > 0
    # each translate crosses its designated dyadic height at its x_i
    for (k, xi), g in zip(report[0], out[1:]):
        assert float(g.value(xi)) == pytest.approx(k * 2.0**-n, abs=1e-12)
