"""Experiment pipelines: orchestration, atomic file output.

Every run writes CSV tables (bodies deterministic given the config) plus
a summary.json carrying the config hash, seed, headline numbers, and
verdicts.  Exit status: 0 on success, 1 when a checked property fails,
2 for configuration or runtime errors (handled by the CLI layer).
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, format_float
from .convex import code_reconstruct, convex_code, sample_convex_functions
from .curves import ConvexGraph, Line, sup_distance
from .fractal import build_levels, save_levelset
from .gauges import build_schedule, eval_gauge
from .nets import line_net, random_lines, verify_line_net_domination
from . import stats


@dataclass
class RunResult:
    status: int
    out_dir: Path
    files: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, config_hash: str, header, rows) -> None:
    lines = [f"# config={config_hash}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _cell(v) -> str:
    if isinstance(v, float):
        return format_float(v)
    if isinstance(v, (np.floating,)):
        return format_float(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def run_experiment(config: ExperimentConfig, out_dir=None) -> RunResult:
    out = Path(out_dir or config.out)
    out.mkdir(parents=True, exist_ok=True)
    result = RunResult(status=0, out_dir=out)
    result.summary = {
        "kind": config.kind,
        "config": config.canonical(),
        "config_hash": config.config_hash,
        "seed": config.seed,
        "warnings": list(config.warnings),
        "verdicts": {},
    }
    pipeline = {
        "build": _run_build,
        "lines": _run_lines,
        "convex": _run_convex,
        "tubes": _run_tubes,
        "fibers": _run_fibers,
    }
    if config.kind == "report":
        from .report import emit_report

        report_path, missing = emit_report(Path(config.params["run_dir"]))
        if missing:
            result.status = 2
            result.summary["verdicts"]["report"] = f"missing inputs: {missing}"
        else:
            result.files["report"] = str(report_path)
        return result

    pipeline[config.kind](config, out, result)
    result.summary["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
    summary_path = out / "summary.json"
    atomic_write_text(summary_path, json.dumps(result.summary, indent=2, sort_keys=True))
    result.files["summary"] = str(summary_path)
    return result


# -- build -------------------------------------------------------------------------


def _run_build(config: ExperimentConfig, out: Path, result: RunResult) -> None:
    schedule = build_schedule(config.gauge, config.n_max)
    levels = build_levels(schedule, config.seed, config.n_max)
    level_dir = out / "levels"
    level_dir.mkdir(parents=True, exist_ok=True)
    for lv in levels:
        path = level_dir / f"level_{lv.level:02d}.txt"
        save_levelset(lv, path, seed=config.seed)
        result.files[f"level_{lv.level}"] = str(path)

    rows = []
    for n, lv in enumerate(levels):
        rep = stats.box_cover_count(lv, config.gauge)
        rows.append((n, schedule.entries[n - 1] if n else 0, rep.count, rep.ratio))
    path = out / "box_cover.csv"
    write_csv(path, config.config_hash, ("n", "a_n", "count", "count_times_h"), rows)
    result.files["box_cover"] = str(path)

    ratios = [r[3] for r in rows]
    d = config.dimension
    ok = all(2.0**-d <= r <= 2.0**d for r in ratios)
    result.summary["verdicts"]["schedule_tracking"] = "pass" if ok else "fail"
    result.summary["tracking_range"] = [min(ratios), max(ratios)]
    if not ok:
        result.status = 1


# -- lines -------------------------------------------------------------------------


def _run_lines(config: ExperimentConfig, out: Path, result: RunResult) -> None:
    p = config.params
    schedule = build_schedule(config.gauge, config.n_max)
    levels = build_levels(schedule, config.seed, config.n_max)
    net = line_net(p["net_level"], c0=p["c0"])
    result.summary["net_size"] = net.size

    trend = stats.sup_over_net(levels, net)
    rows = [
        (n, m, float(net.theta[j]), float(net.rho[j]))
        for n, m, j in zip(trend.levels, trend.maxima, trend.argmax)
    ]
    path = out / "trend.csv"
    write_csv(path, config.config_hash, ("n", "max_y", "argmax_theta", "argmax_rho"), rows)
    result.files["trend"] = str(path)
    result.summary["maxima"] = [float(m) for m in trend.maxima]

    rng = np.random.default_rng(config.seed)
    probes = random_lines(int(p["probes"]), rng)
    dom = verify_line_net_domination(levels, net, probes, c_net=float(p["c_net"]))
    rows = [
        (line.theta, line.rho, float(y), float(s))
        for line, y, s in zip(probes, dom.probe_y, dom.slack)
    ]
    path = out / "domination.csv"
    write_csv(path, config.config_hash, ("theta", "rho", "y", "slack"), rows)
    result.files["domination"] = str(path)
    result.summary["verdicts"]["net_domination"] = "pass" if dom.ok else "fail"
    result.summary["net_max"] = dom.net_max
    result.summary["worst_slack"] = dom.worst_slack
    if not dom.ok:
        result.status = 1

    probe = Line.from_theta_rho(float(p["probe_theta"]), float(p["probe_rho"]))
    kappas = np.asarray(p["kappas"], dtype=float)
    mart_rows, tail_rows = [], []
    fitted = {}
    mean_ok = True
    for n in p["martingale_levels"]:
        rep = stats.martingale_ensemble(
            levels[n], schedule.entries[n], probe, int(p["trials"]), config.seed, kappas
        )
        mean_ok = mean_ok and rep.mean_ok
        mart_rows.append(
            (n, int(rep.deterministic), rep.y_base, rep.mean_dy, rep.se_dy, int(rep.mean_ok))
        )
        if rep.tail is not None:
            fit = rep.tail.amplitude is not None
            fitted[str(n)] = (
                {"amplitude": rep.tail.amplitude, "decay": rep.tail.decay} if fit else None
            )
            for k, f in zip(rep.tail.kappas, rep.tail.frequencies):
                env = rep.tail.envelope(k) if fit else ""
                env_half = rep.tail.envelope(k / 2.0) if fit else ""
                tail_rows.append((n, float(k), float(f), env, env_half))
    path = out / "martingale.csv"
    write_csv(
        path, config.config_hash,
        ("n", "deterministic", "y_base", "mean_dy", "se_dy", "mean_ok"), mart_rows,
    )
    result.files["martingale"] = str(path)
    path = out / "tails.csv"
    write_csv(
        path, config.config_hash,
        ("n", "kappa", "frequency", "envelope", "envelope_at_half"), tail_rows,
    )
    result.files["tails"] = str(path)
    result.summary["fitted_envelopes"] = fitted
    result.summary["verdicts"]["martingale_mean"] = "pass" if mean_ok else "fail"
    if not mean_ok:
        result.status = 1


# -- convex -------------------------------------------------------------------------


def _fraction_label(index: int, n2: int) -> str:
    frac = Fraction(index, n2)
    if frac.denominator == 1:
        return str(frac.numerator)
    return f"{index}/{n2}"


def _run_convex(config: ExperimentConfig, out: Path, result: RunResult) -> None:
    p = config.params
    cubic = ConvexGraph(lambda x: x**3 / 3.0, lambda x: x * x)

    rows = []
    for N in p["n_values"]:
        code = convex_code(cubic, N)
        n2 = N * N
        for j, k in zip(code.y_idx, code.p_idx):
            rows.append((N, j, _fraction_label(j, n2), j / n2, k, _fraction_label(k, n2), k / n2))
    path = out / "breakpoints.csv"
    write_csv(
        path, config.config_hash,
        ("N", "x_index", "x_fraction", "x", "p_index", "p_fraction", "p"), rows,
    )
    result.files["breakpoints"] = str(path)

    rng = np.random.default_rng(config.seed)
    members = sample_convex_functions(int(p["ensemble"]), rng)
    rows = []
    max_err = {}
    for N in p["n_values"]:
        worst = 0.0
        for f in [cubic] + members:
            err = sup_distance(code_reconstruct(convex_code(f, N)), f)
            worst = max(worst, err)
        max_err[N] = worst
        rows.append((N, worst, worst * N * N))
    path = out / "recon_error.csv"
    write_csv(path, config.config_hash, ("N", "max_error", "error_times_n2"), rows)
    result.files["recon_error"] = str(path)

    ns = sorted(max_err)
    if len(ns) >= 2:
        slope = np.polyfit(np.log([float(n) for n in ns]), np.log([max_err[n] for n in ns]), 1)[0]
        result.summary["recon_loglog_slope"] = float(slope)
        ok = -2.2 <= slope <= -1.8
        result.summary["verdicts"]["reconstruction_decay"] = "pass" if ok else "fail"
        if not ok:
            result.status = 1


# -- tubes --------------------------------------------------------------------------


def _run_tubes(config: ExperimentConfig, out: Path, result: RunResult) -> None:
    p = config.params
    schedule = build_schedule(config.gauge, config.n_max)
    levels = build_levels(schedule, config.seed, config.n_max)
    directions = np.arange(int(p["directions"])) * math.pi / int(p["directions"])
    w = float(p["bin_width"])

    rows = []
    density_by_level = {}
    for n in p["stability_levels"]:
        rep = stats.projection_density_sup(levels[n], directions, w)
        density_by_level[n] = rep.max_density
        for phi, dens in zip(rep.directions, rep.per_direction):
            rows.append((n, float(phi), float(dens)))
    path = out / "density.csv"
    write_csv(path, config.config_hash, ("n", "direction", "max_density"), rows)
    result.files["density"] = str(path)
    result.summary["density_by_level"] = {str(k): v for k, v in density_by_level.items()}

    ns = sorted(density_by_level)
    if len(ns) >= 2:
        a, b = density_by_level[ns[-2]], density_by_level[ns[-1]]
        drift = abs(b - a) / max(a, 1e-300)
        result.summary["density_drift"] = drift
        result.summary["verdicts"]["density_stability"] = "pass" if drift <= 0.25 else "fail"
        if drift > 0.25:
            result.status = 1

    rng = np.random.default_rng(config.seed + 1)
    top = levels[config.n_max]
    covers = stats.adversarial_strip_covers(int(p["covers"]), int(p["cover_tubes"]), rng)
    rows = []
    all_ok = True
    for idx, (phi, tubes) in enumerate(covers):
        min_w = min(t.width for t in tubes)
        dens = stats.projection_density_sup(top, [phi], max(0.1 * min_w, 2.0**-24))
        bound = 2.0 * dens.max_density * 1.1
        cert = stats.tube_cover_certificate(top, tubes, target_mass=1.0, density_bound=bound)
        all_ok = all_ok and cert.ok
        rows.append(
            (idx, float(phi), len(tubes), cert.width_sum, cert.threshold, bound, cert.verdict)
        )
    path = out / "certificates.csv"
    write_csv(
        path, config.config_hash,
        ("cover", "direction", "tubes", "width_sum", "threshold", "density_bound", "verdict"),
        rows,
    )
    result.files["certificates"] = str(path)
    result.summary["verdicts"]["tube_certificates"] = "pass" if all_ok else "fail"
    if not all_ok:
        result.status = 1


# -- fibers -------------------------------------------------------------------------


def _run_fibers(config: ExperimentConfig, out: Path, result: RunResult) -> None:
    p = config.params
    schedule = build_schedule(config.gauge, config.n_max)
    levels = build_levels(schedule, config.seed, config.n_max)
    top = levels[config.n_max]
    rng = np.random.default_rng(config.seed)
    lines = random_lines(int(p["lines"]), rng)
    r_values = [2.0**-e for e in p["r_exponents"]]

    rows = []
    envelope = {}
    for i, line in enumerate(lines):
        for r in r_values:
            rep = stats.fiber_cover_count(top, line, r, config.gauge)
            rows.append((i, line.theta, line.rho, rep.r, rep.count, rep.ratio))
            if rep.count > 0:
                envelope[r] = max(envelope.get(r, 0.0), rep.ratio)
    path = out / "fibers.csv"
    write_csv(path, config.config_hash, ("line", "theta", "rho", "r", "count", "ratio"), rows)
    result.files["fibers"] = str(path)

    if envelope:
        vals = list(envelope.values())
        band = max(vals) / max(min(vals), 1e-300)
        result.summary["fiber_envelope_band"] = band
        result.summary["verdicts"]["fiber_band"] = "pass" if band <= 4.0 else "fail"
        if band > 4.0:
            result.status = 1
