import json
import math

import numpy as np
import pytest

from tubenull.convex import NetTooLargeError
from tubenull.curves import Line, PolyGraph, sup_distance
from tubenull.fractal import build_levels, level0
from tubenull.gauges import GaugeSpec, build_schedule
from tubenull.nets import (
    calibrate_net_slack,
    estimate_line_net_size,
    line_net,
    poly_graph_net,
    verify_line_net_domination,
)
from tubenull.stats import line_y_values


def test_lattice_counts_n0():
    net = line_net(0, c0=0.5)
    sizes = net.component_sizes()
    assert sizes["near_horizontal"] == 8  # (1+1) * (1+1) * 2 signs
    assert sizes["near_vertical"] == 8


def test_lattice_counts_n1():
    net = line_net(1, c0=4.0)
    sizes = net.component_sizes()
    assert sizes["near_horizontal"] == (8 + 1) * (2 + 1) * 2  # 54
    assert sizes["near_vertical"] == 54


def test_members_non_dyadic():
    net = line_net(1, c0=2.0)
    for i, line in enumerate(net.lines()):
        assert not line.is_dyadic(max_depth=12)
        if i > 4000:
            break


def test_cap_refusal_with_estimate():
    with pytest.raises(NetTooLargeError) as err:
        line_net(4, c0=1.0, cap=10_000)
    assert err.value.estimate == pytest.approx(estimate_line_net_size(4, 1.0))


def test_net_serialization(tmp_path):
    net = line_net(0, c0=0.5)
    path = tmp_path / "net.json"
    net.save(path)
    data = json.loads(path.read_text())
    assert data["kind"] == "line_net"
    assert data["n"] == 0
    assert data["cardinality"] == net.size == len(data["curves"])


def test_domination_full_level_nonnegative_slack():
    # on the full cube every value is the clip length, so a net member
    # attains the maximum and all slacks stay at least the allowance
    levels = [level0(2)]
    net = line_net(0, c0=0.25)
    rng = np.random.default_rng(1)
    probes = [
        Line.from_theta_rho(rng.uniform(0.05, math.pi - 0.05), rng.uniform(0, 1.2))
        for _ in range(50)
    ]
    rep = verify_line_net_domination(levels, net, probes, c_net=2.0)
    assert rep.ok
    assert rep.net_max <= math.sqrt(2) + 1e-12


def test_domination_self_probe_slack_exact():
    # a single-line net probed with itself: slack equals the allowance
    sched = build_schedule(GaugeSpec.power(1.5, 2), 4)
    levels = build_levels(sched, seed=6, n_max=4)
    net = line_net(0, c0=0.5)
    only = list(net.lines())[:1]
    from tubenull.nets import LineNet

    tiny = LineNet(
        level=4,
        c0=net.c0,
        theta=np.array([only[0].theta]),
        rho=np.array([only[0].rho]),
        labels=np.array([0], dtype=np.int8),
        perturbed=np.array([False]),
    )
    c_net = 1.7
    rep = verify_line_net_domination(levels, tiny, only, c_net=c_net)
    assert rep.slack[0] == pytest.approx(c_net * 2.0**-4, abs=1e-12)


def test_domination_violation_listed_not_raised():
    # an adversarial "net" far from the probe produces counterexample rows
    sched = build_schedule(GaugeSpec.power(1.5, 2), 4)
    levels = build_levels(sched, seed=6, n_max=4)
    from tubenull.nets import LineNet

    net = LineNet(
        level=4,
        c0=1.0,
        theta=np.array([0.003]),
        rho=np.array([-1.37]),  # essentially misses the square
        labels=np.array([0], dtype=np.int8),
        perturbed=np.array([False]),
    )
    probes = [Line.from_theta_rho(0.9, 0.4)]
    rep = verify_line_net_domination(levels, net, probes, c_net=0.01)
    assert not rep.ok
    assert len(rep.violations) == 1
    assert rep.violations[0]["y"] > 0


def test_calibration_floor():
    levels = [level0(2)]
    net = line_net(0, c0=0.25)
    probes = [Line.from_theta_rho(0.7, 0.3)]
    c = calibrate_net_slack(levels, net, probes, margin=1.25)
    assert c >= 0.05


def test_poly_net_counts():
    constants = poly_graph_net(0, 0.25)
    assert len(constants) == 5
    assert sorted(p.coeffs[0] for p in constants) == pytest.approx([0, 0.25, 0.5, 0.75, 1.0])

    lines = poly_graph_net(1, 0.5)
    assert len(lines) == 25


def test_poly_net_density():
    # rounding every coefficient to the net grid moves the graph by at most
    # sum |dc_i| <= delta/2 in sup norm, so the rounded member witnesses density
    rng = np.random.default_rng(9)
    delta = 0.25
    k = 2
    spacing = delta / (k + 1)
    net = poly_graph_net(k, delta)
    keys = {tuple(np.round(np.array(m.coeffs) / spacing).astype(int)): m for m in net}
    for _ in range(25):
        coeffs = rng.uniform(0, 1, size=k + 1)
        target = PolyGraph(tuple(coeffs))
        member = keys[tuple(np.round(coeffs / spacing).astype(int))]
        assert sup_distance(target, member) <= delta / 2 + 1e-9


def test_poly_net_refusal():
    with pytest.raises(NetTooLargeError):
        poly_graph_net(4, 2.0**-12)


def test_batch_y_on_net_components():
    # near-horizontal members must score comparably to their exact values
    net = line_net(1, c0=2.0)
    lv = level0(2)
    vals = line_y_values(lv, net.theta, net.rho)
    from tubenull.curves import line_box_length

    for i in np.random.default_rng(2).integers(0, net.size, size=12):
        line = Line.from_theta_rho(float(net.theta[i]), float(net.rho[i]))
        assert vals[i] == pytest.approx(
            line_box_length(line, [0, 0], [1, 1]), abs=1e-10
        )
