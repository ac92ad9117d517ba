"""Gauge functions and the branching schedule they induce.

A gauge h is positive, non-decreasing and continuous on (0, 1] with
h(1) = 1.  The subdivision schedule chooses, level by level, whether to
keep every child cube (factor 2**d) or a single random child (factor 1)
so that the running cube count P_n tracks 1/h(2**-n) within the fixed
band [2**-d, 2**d].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SPLICE_T = 0.125  # the log-corrected family follows a pure power on [SPLICE_T, 1]

_FAMILIES = ("power", "power_log_cubed", "table")


class GaugeError(ValueError):
    """Raised for gauges that violate the domain or family constraints."""


class InvalidGaugeError(GaugeError):
    """Raised when schedule construction detects a tracking violation."""


def _log_cubed_factor(t: float) -> float:
    # |log t * log|log t||^-3; only evaluated for t <= SPLICE_T < 1/e.
    lt = abs(math.log(t))
    return abs(lt * math.log(lt)) ** -3


@dataclass(frozen=True)
class GaugeSpec:
    """A gauge from a named parametric family, normalized so h(1) = 1.

    family 'power':            h(t) = t**beta
    family 'power_log_cubed':  h(t) = t**beta for t in [1/8, 1], and
        c * t**beta * |log t * log|log t||**-3 below 1/8, with c chosen
        for continuity at the splice point 1/8 (the raw formula has a
        singularity at t = 1/e, so it only applies for small t).
    family 'table':            log-log interpolation of (t, h) samples,
        rescaled so the value at t = 1 is exactly 1.
    """

    family: str
    dimension: int
    beta: float = 0.0
    table_t: tuple = ()
    table_h: tuple = ()
    _splice_c: float = field(init=False, default=0.0)

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise GaugeError(f"unknown gauge family {self.family!r}")
        if self.dimension < 2:
            raise GaugeError(f"dimension must be >= 2, got {self.dimension}")
        if self.family == "power" and self.beta < 0:
            raise GaugeError(f"power gauge needs beta >= 0, got {self.beta}")
        if self.family == "power_log_cubed":
            if self.beta <= 0:
                raise GaugeError(f"power_log_cubed needs beta > 0, got {self.beta}")
            object.__setattr__(self, "_splice_c", _log_cubed_factor(SPLICE_T) ** -1)
        if self.family == "table":
            t = np.asarray(self.table_t, dtype=float)
            h = np.asarray(self.table_h, dtype=float)
            if t.size < 2 or t.size != h.size:
                raise GaugeError("table gauge needs matching (t, h) samples, >= 2 rows")
            if np.any(t <= 0) or np.any(h <= 0):
                raise GaugeError("table gauge samples must be positive")
            if np.any(np.diff(t) <= 0):
                raise GaugeError("table gauge t samples must be strictly increasing")
            if t[-1] != 1.0:
                raise GaugeError("table gauge must include a sample at t = 1")
            if np.any(np.diff(h) < 0):
                raise GaugeError("table gauge h samples must be non-decreasing")
            object.__setattr__(self, "table_t", tuple(float(x) for x in t))
            object.__setattr__(self, "table_h", tuple(float(x) for x in h / h[-1]))

    # -- constructors ------------------------------------------------------

    @classmethod
    def power(cls, beta: float, dimension: int) -> "GaugeSpec":
        return cls(family="power", dimension=dimension, beta=beta)

    @classmethod
    def power_log_cubed(cls, beta: float, dimension: int) -> "GaugeSpec":
        return cls(family="power_log_cubed", dimension=dimension, beta=beta)

    @classmethod
    def from_table(cls, t: Sequence[float], h: Sequence[float], dimension: int) -> "GaugeSpec":
        return cls(family="table", dimension=dimension, table_t=tuple(t), table_h=tuple(h))

    @classmethod
    def from_table_csv(cls, path, dimension: int) -> "GaugeSpec":
        """Two-column CSV (t, h); a header row is skipped if non-numeric."""
        t, h = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row:
                    continue
                try:
                    tv, hv = float(row[0]), float(row[1])
                except ValueError:
                    continue
                t.append(tv)
                h.append(hv)
        return cls.from_table(t, h, dimension)

    @classmethod
    def from_config(cls, cfg: dict, dimension: int) -> "GaugeSpec":
        family = cfg.get("family")
        if family == "table":
            if "csv" in cfg:
                return cls.from_table_csv(cfg["csv"], dimension)
            return cls.from_table(cfg["t"], cfg["h"], dimension)
        return cls(family=family, dimension=dimension, beta=float(cfg.get("beta", 0.0)))

    # -- evaluation --------------------------------------------------------

    def __call__(self, t: float) -> float:
        return eval_gauge(self, t)

    def describe(self) -> dict:
        out = {"family": self.family, "dimension": self.dimension}
        if self.family in ("power", "power_log_cubed"):
            out["beta"] = self.beta
        else:
            out["samples"] = len(self.table_t)
        return out


def eval_gauge(spec: GaugeSpec, t: float) -> float:
    """h(t) for t in (0, 1]; positive, h(1) = 1."""
    if not 0.0 < t <= 1.0:
        raise GaugeError(f"gauge argument t={t} outside (0, 1]")
    if spec.family == "power":
        return t**spec.beta
    if spec.family == "power_log_cubed":
        if t >= SPLICE_T:
            return t**spec.beta
        return spec._splice_c * t**spec.beta * _log_cubed_factor(t)
    # table: linear interpolation in log-log coordinates
    lt = np.log(spec.table_t)
    lh = np.log(spec.table_h)
    if t < spec.table_t[0]:
        raise GaugeError(f"t={t} below the sampled range of the table gauge")
    return float(np.exp(np.interp(math.log(t), lt, lh)))


# -- hypothesis diagnostics ---------------------------------------------------


@dataclass
class GaugeReport:
    """Dyadic-grid diagnostics for the two gauge hypotheses.

    The growth condition is an integral hypothesis, not an algorithm, so
    the report only surfaces evidence: dyadic partial sums of the
    integrand plus a verdict keyed on whether the tail increments decay
    by at least `ratio_threshold` per octave.
    """

    variant: str
    depth: int
    doubling_ok: bool
    doubling_violations: list
    terms: np.ndarray
    partial_sums: np.ndarray
    tail_ratios: np.ndarray
    verdict: str
    ratio_threshold: float = 1.05


def verify_gauge_conditions(spec: GaugeSpec, variant: str = "linear", depth: int = 20) -> GaugeReport:
    """Check doubling on the dyadic grid and the growth-integral evidence.

    variant 'linear' discretizes   int t**-1 sqrt(t**(1-d) |log t| h(t)) dt,
    variant 'polynomial'           int t**-1 |log t| sqrt(t**(1-d) h(t)) dt,
    both over octaves t = 2**-j, j = 1..depth.
    """
    if depth < 4:
        raise GaugeError(f"depth must be >= 4, got {depth}")
    if variant not in ("linear", "polynomial"):
        raise GaugeError(f"unknown variant {variant!r}")
    d = spec.dimension
    h = np.array([eval_gauge(spec, 2.0**-j) for j in range(depth + 1)])

    violations = []
    for j in range(1, depth + 1):
        # doubling at t = 2**-j: h(2**-(j-1)) <= 2**d * h(2**-j)
        if h[j - 1] > 2.0**d * h[j]:
            violations.append((2.0**-j, h[j - 1] / h[j]))

    js = np.arange(1, depth + 1)
    log_t = js * math.log(2.0)
    if variant == "linear":
        terms = 0.5 * np.sqrt(2.0 ** ((d - 1) * js) * log_t * h[1:])
    else:
        terms = 0.5 * log_t * np.sqrt(2.0 ** ((d - 1) * js) * h[1:])
    partial = np.cumsum(terms)

    tail = max(3, depth // 4)
    ratios = terms[-tail - 1 : -1] / terms[-tail:]
    verdict = (
        "apparently convergent"
        if np.all(ratios >= GaugeReport.ratio_threshold)
        else "apparently divergent"
    )
    return GaugeReport(
        variant=variant,
        depth=depth,
        doubling_ok=not violations,
        doubling_violations=violations,
        terms=terms,
        partial_sums=partial,
        tail_ratios=ratios,
        verdict=verdict,
    )


# -- schedules ----------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    """Per-level branching factors and their running products.

    entries[i] is the factor applied on the step that creates level i+1;
    products[n] is P_n with P_0 = 1.  The construction guarantees
    2**-d <= P_n * h(2**-n) <= 2**d at every level.
    """

    dimension: int
    entries: tuple
    products: tuple

    def __post_init__(self):
        full = 1 << self.dimension
        if any(a not in (1, full) for a in self.entries):
            raise GaugeError(f"schedule entries must lie in {{1, {full}}}")
        p = 1
        for i, a in enumerate(self.entries):
            p *= a
            if self.products[i + 1] != p:
                raise GaugeError("schedule products inconsistent with entries")
        if self.products[0] != 1:
            raise GaugeError("P_0 must equal 1")

    @classmethod
    def from_entries(cls, dimension: int, entries: Sequence[int]) -> "Schedule":
        products = [1]
        for a in entries:
            products.append(products[-1] * a)
        return cls(dimension=dimension, entries=tuple(entries), products=tuple(products))

    @property
    def n_max(self) -> int:
        return len(self.entries)

    def tracking_values(self, spec: GaugeSpec) -> np.ndarray:
        """P_n * h(2**-n) for n = 0..n_max."""
        return np.array(
            [p * eval_gauge(spec, 2.0**-n) for n, p in enumerate(self.products)]
        )


def build_schedule(spec: GaugeSpec, n_max: int) -> Schedule:
    """Greedy schedule: branch fully while P_n < 1/h(2**-(n+1)).

    The tracking bound 2**-d <= P_n h(2**-n) <= 2**d is asserted during
    construction; a violation (a gauge whose dyadic ratios leave
    [2**-d, 1]) raises InvalidGaugeError.
    """
    if n_max < 0:
        raise GaugeError(f"n_max must be >= 0, got {n_max}")
    if abs(eval_gauge(spec, 1.0) - 1.0) > 1e-12:
        raise InvalidGaugeError("gauge is not normalized to h(1) = 1")
    d = spec.dimension
    full = 1 << d
    lo, hi = 2.0**-d, 2.0**d
    entries = []
    products = [1]
    p = 1
    for n in range(1, n_max + 1):
        a = full if p < 1.0 / eval_gauge(spec, 2.0**-n) else 1
        p *= a
        entries.append(a)
        products.append(p)
        value = p * eval_gauge(spec, 2.0**-n)
        if not lo <= value <= hi:
            raise InvalidGaugeError(
                f"tracking bound violated at level {n}: P_n*h(2^-n) = {value:.6g} "
                f"outside [{lo:.6g}, {hi:.6g}] (gauge fails the doubling hypothesis)"
            )
    return Schedule(dimension=d, entries=tuple(entries), products=tuple(products))
