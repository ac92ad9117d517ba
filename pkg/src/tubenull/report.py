"""Human-readable run summaries: markdown plus rendered figures."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .plots import RENDERERS, _floats, _read_csv
from .runner import atomic_write_text

KNOWN_INPUTS = ("summary.json",)


def emit_report(run_dir: Path):
    """Write report.md (and PNG figures) summarizing a completed run.

    Returns (report_path, missing): `missing` lists required inputs that
    were absent, in which case no report is written.
    """
    run_dir = Path(run_dir)
    missing = [name for name in KNOWN_INPUTS if not (run_dir / name).exists()]
    if missing:
        return None, missing

    summary = json.loads((run_dir / "summary.json").read_text())
    lines = [
        f"# Run report: {summary.get('kind', '?')}",
        "",
        f"- config hash: `{summary.get('config_hash')}`",
        f"- seed: {summary.get('seed')}",
        "",
    ]
    if summary.get("warnings"):
        lines.append("## Warnings")
        lines.extend(f"- {w}" for w in summary["warnings"])
        lines.append("")

    verdicts = summary.get("verdicts", {})
    extra_flags = _tail_envelope_flags(run_dir)
    if verdicts or extra_flags:
        lines.append("## Checks")
        lines.append("")
        lines.append("| property | verdict |")
        lines.append("|---|---|")
        for name, verdict in sorted(verdicts.items()):
            mark = "PASS" if str(verdict) == "pass" else str(verdict).upper()
            lines.append(f"| {name} | {mark} |")
        for flag in extra_flags:
            lines.append(f"| {flag[0]} | {flag[1]} |")
        lines.append("")

    figures = []
    dimension = summary.get("config", {}).get("dimension", 2)
    for csv_name, (png_name, renderer) in RENDERERS.items():
        src = run_dir / csv_name
        if not src.exists():
            continue
        dst = run_dir / png_name
        if csv_name == "box_cover.csv":
            renderer(src, dst, dimension)
        else:
            renderer(src, dst)
        figures.append(png_name)

    if figures:
        lines.append("## Figures")
        lines.append("")
        for name in figures:
            lines.append(f"![{name}]({name})")
        lines.append("")

    lines.append("## Data files")
    lines.append("")
    for path in sorted(run_dir.glob("*.csv")):
        cols = _read_csv(path)
        n_rows = len(next(iter(cols.values()))) if cols else 0
        lines.append(f"- `{path.name}`: columns {list(cols)} ({n_rows} rows)")
    key_numbers = {
        k: v
        for k, v in summary.items()
        if k not in ("config", "verdicts", "warnings", "kind", "generated_at")
        and not isinstance(v, (dict, list))
    }
    if key_numbers:
        lines.append("")
        lines.append("## Headline numbers")
        lines.append("")
        for k, v in sorted(key_numbers.items()):
            lines.append(f"- {k}: {v}")

    report_path = run_dir / "report.md"
    atomic_write_text(report_path, "\n".join(lines) + "\n")
    return report_path, []


def _tail_envelope_flags(run_dir: Path):
    """Flag kappa rows whose frequency exceeds the envelope at kappa/2."""
    path = run_dir / "tails.csv"
    if not path.exists():
        return []
    cols = _read_csv(path)
    freq = _floats(cols, "frequency")
    env_half = _floats(cols, "envelope_at_half")
    kappa = _floats(cols, "kappa")
    level = cols["n"]
    flags = []
    bad = ~np.isnan(env_half) & (freq > env_half + 1e-12)
    for i in np.nonzero(bad)[0]:
        flags.append(
            (
                f"tail_envelope(n={level[i]}, kappa={kappa[i]:g})",
                f"VIOLATION: frequency {freq[i]:g} > envelope(kappa/2) {env_half[i]:g}",
            )
        )
    if not flags and not np.all(np.isnan(env_half)):
        flags.append(("tail_envelope", "PASS"))
    return flags
