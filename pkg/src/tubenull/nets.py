"""Deterministic finite line and polynomial-graph nets.

The planar line net at level n has three components:
  dense      -- a (theta, rho) grid with spacing c0 * 64**-n;
  horizontal -- lines at angles +-8**-n through the lattice points
                (m 8**-n, k 2**-n), which dominate lines hugging a
                horizontal dyadic line;
  vertical   -- the 90-degree rotation of the horizontal component.

Members that fall on a dyadic line are nudged off the grid by
2**-(2n+7) and flagged.  Cardinality grows like a constant to the n-th
power, so construction refuses (with a size estimate) when the
configured cap would be exceeded.  Nets are stored as flat coefficient
arrays; iterate `lines()` to materialize curve objects.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .convex import NetTooLargeError
from .curves import Line, PolyGraph

DEFAULT_NET_CAP = 6_000_000
RHO_MAX = math.sqrt(2.0)


@dataclass
class LineNet:
    """A finite family of non-dyadic lines in normal form (theta, rho)."""

    level: int
    c0: float
    theta: np.ndarray
    rho: np.ndarray
    labels: np.ndarray  # 0 = dense, 1 = near-horizontal, 2 = near-vertical
    perturbed: np.ndarray

    @property
    def size(self) -> int:
        return len(self.theta)

    def lines(self):
        for t, r in zip(self.theta, self.rho):
            yield Line.from_theta_rho(float(t), float(r))

    def component_sizes(self) -> dict:
        return {
            "dense": int(np.sum(self.labels == 0)),
            "near_horizontal": int(np.sum(self.labels == 1)),
            "near_vertical": int(np.sum(self.labels == 2)),
        }

    def to_json(self) -> dict:
        return {
            "kind": "line_net",
            "n": self.level,
            "c0": self.c0,
            "cardinality": self.size,
            "components": self.component_sizes(),
            "curves": [
                {"line": {"theta": float(t), "rho": float(r)}}
                for t, r in zip(self.theta, self.rho)
            ],
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


def estimate_line_net_size(n: int, c0: float) -> float:
    """Predicted cardinality before construction."""
    spacing = c0 * 64.0**-n
    dense = (math.pi / spacing) * (2.0 * RHO_MAX / spacing + 1)
    lattice = 2.0 * (8.0**n + 1) * (2.0**n + 1)
    return dense + 2.0 * lattice


def line_net(n: int, c0: float = 1.0, cap: int = DEFAULT_NET_CAP) -> LineNet:
    """The level-n planar net; refuses if the predicted size exceeds cap."""
    if n < 0 or n > 8:
        raise ValueError(f"net level must lie in [0, 8], got {n}")
    if c0 <= 0:
        raise ValueError(f"density constant c0 must be positive, got {c0}")
    est = estimate_line_net_size(n, c0)
    if est > cap:
        raise NetTooLargeError(est, cap)

    thetas, rhos, labels = [], [], []

    # dense (theta, rho) grid
    spacing = c0 * 64.0**-n
    t_grid = np.arange(0.0, math.pi, spacing)
    r_grid = np.arange(-RHO_MAX, RHO_MAX + spacing * 0.5, spacing)
    tt, rr = np.meshgrid(t_grid, r_grid, indexing="ij")
    tt, rr = tt.ravel(), rr.ravel()
    keep = _meets_unit_square(tt, rr)
    thetas.append(tt[keep])
    rhos.append(rr[keep])
    labels.append(np.zeros(int(keep.sum()), dtype=np.int8))

    # lattice components around horizontal and vertical dyadic lines
    for vertical in (False, True):
        t, r = _lattice_component(n, vertical)
        thetas.append(t)
        rhos.append(r)
        labels.append(np.full(len(t), 2 if vertical else 1, dtype=np.int8))

    theta = np.concatenate(thetas)
    rho = np.concatenate(rhos)
    label = np.concatenate(labels)

    # nudge members lying on a dyadic line off the grid
    nudge = 2.0 ** -(2 * n + 7)
    eps = 1e-12
    axis = (np.abs(theta) < eps) | (np.abs(theta - math.pi / 2) < eps)
    scaled = rho * 2.0**12
    dyadic = axis & (np.abs(scaled - np.round(scaled)) < eps)
    rho = np.where(dyadic, rho + nudge, rho)
    return LineNet(
        level=n, c0=c0, theta=theta, rho=rho, labels=label, perturbed=dyadic
    )


def _meets_unit_square(theta: np.ndarray, rho: np.ndarray) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    corners = np.stack([np.zeros_like(c), c, s, c + s])
    return (rho >= corners.min(axis=0) - 1e-12) & (rho <= corners.max(axis=0) + 1e-12)


def _lattice_component(n: int, vertical: bool):
    """Lines at angle +-8**-n to the axis through (m 8**-n, k 2**-n)."""
    ms = np.arange(8**n + 1, dtype=float) * 8.0**-n
    ks = np.arange(2**n + 1, dtype=float) * 2.0**-n
    mm, kk = np.meshgrid(ms, ks, indexing="ij")
    mm, kk = mm.ravel(), kk.ravel()
    out_t, out_r = [], []
    for sign in (+1.0, -1.0):
        slope_angle = sign * 8.0**-n  # angle of the line to the axis
        if vertical:
            # nearly-vertical: direction angle pi/2 + slope -> normal angle
            theta = (slope_angle) % math.pi  # normal of a near-vertical line is near 0
            tt = np.full_like(mm, theta)
            rho = np.cos(theta) * kk + np.sin(theta) * mm
        else:
            theta = (math.pi / 2 + slope_angle) % math.pi
            tt = np.full_like(mm, theta)
            rho = np.cos(theta) * mm + np.sin(theta) * kk
        out_t.append(tt)
        out_r.append(rho)
    return np.concatenate(out_t), np.concatenate(out_r)


def random_lines(count: int, rng: np.random.Generator) -> list:
    """Random non-dyadic probe lines meeting the unit square."""
    out = []
    while len(out) < count:
        theta = float(rng.uniform(0.0, math.pi))
        rho = float(rng.uniform(-RHO_MAX, RHO_MAX))
        if not _meets_unit_square(np.array([theta]), np.array([rho]))[0]:
            continue
        line = Line.from_theta_rho(theta, rho)
        if line.is_dyadic():
            continue
        out.append(line)
    return out


# -- polynomial-coefficient nets -------------------------------------------------


def poly_graph_net(k: int, delta: float, cap: int = DEFAULT_NET_CAP) -> list:
    """Coefficient-grid net of polynomial graphs, sup-norm density delta.

    Each coefficient ranges over [0, 1] with spacing delta / (k + 1), so
    rounding any degree-<=k graph with coefficients in range moves it by
    at most sum |dc_i| <= delta/2 in sup norm on [0, 1].  Members whose
    graphs miss the unit square are dropped.
    """
    if k < 0 or k > 4:
        raise ValueError(f"degree must lie in [0, 4], got {k}")
    if delta < 2.0**-12:
        raise ValueError(f"delta must be >= 2^-12, got {delta}")
    spacing = delta / (k + 1)
    axis = np.arange(0.0, 1.0 + spacing * 0.5, spacing)
    count = float(len(axis)) ** (k + 1)
    if count > cap:
        raise NetTooLargeError(count, cap)
    grids = np.meshgrid(*([axis] * (k + 1)), indexing="ij")
    coeffs = np.stack([g.ravel() for g in grids], axis=1)
    # graph meets the square iff min over [0,1] of p <= 1; nonneg coeffs
    # make p increasing, so the minimum sits at x = 0
    keep = coeffs[:, 0] <= 1.0 + 1e-12
    return [PolyGraph(tuple(row)) for row in coeffs[keep]]


# -- domination reports -----------------------------------------------------------


@dataclass
class DominationReport:
    """Per-probe headroom of the net-domination inequality.

    slack[i] = net_max + allowance - probe_y[i]; a violation is a probe
    whose slack is negative.  Listed counterexamples are test data, not
    exceptions.
    """

    level: int
    net_max: float
    allowance: float
    probe_y: np.ndarray
    slack: np.ndarray
    violations: list = field(default_factory=list)

    @property
    def worst_slack(self) -> float:
        return float(self.slack.min()) if len(self.slack) else float("inf")

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_line_net_domination(
    levels, net: LineNet, probes, c_net: float, stats_module=None
) -> DominationReport:
    """Check probe_y <= max over net + c_net * 2**-n at the net's level.

    `levels` is the realization's list of LevelSet (index = level); the
    probes are Line objects or (theta, rho) pairs, non-dyadic.
    """
    from . import stats as _stats  # local import to avoid a cycle

    stats = stats_module or _stats
    n = net.level
    level = levels[n] if isinstance(levels, (list, tuple)) else levels
    if level.level != n:
        raise ValueError(f"level {level.level} does not match net level {n}")
    net_max = float(np.max(stats.line_y_values(level, net.theta, net.rho)))
    pt, pr = _probe_arrays(probes)
    probe_y = stats.line_y_values(level, pt, pr)
    allowance = c_net * 2.0**-n
    slack = net_max + allowance - probe_y
    violations = [
        {"theta": float(pt[i]), "rho": float(pr[i]), "y": float(probe_y[i]), "slack": float(s)}
        for i, s in enumerate(slack)
        if s < 0
    ]
    return DominationReport(
        level=n,
        net_max=net_max,
        allowance=allowance,
        probe_y=probe_y,
        slack=slack,
        violations=violations,
    )


def _probe_arrays(probes):
    thetas, rhos = [], []
    for p in probes:
        if isinstance(p, Line):
            thetas.append(p.theta)
            rhos.append(p.rho)
        else:
            thetas.append(float(p[0]))
            rhos.append(float(p[1]))
    return np.asarray(thetas), np.asarray(rhos)


def calibrate_net_slack(levels, net: LineNet, probes, margin: float = 1.25) -> float:
    """Pilot calibration of the domination constant.

    Returns margin * max over probes of (probe_y - net_max) * 2**n,
    floored at a small positive value so the frozen constant is usable
    even when the net dominates every pilot probe outright.
    """
    from . import stats as _stats

    n = net.level
    level = levels[n] if isinstance(levels, (list, tuple)) else levels
    net_max = float(np.max(_stats.line_y_values(level, net.theta, net.rho)))
    pt, pr = _probe_arrays(probes)
    probe_y = _stats.line_y_values(level, pt, pr)
    raw = float(np.max((probe_y - net_max) * 2.0**n))
    return max(raw, 0.05) * margin
