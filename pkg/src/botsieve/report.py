"""CSV tables and PNG figures for classification and benchmark runs.

Figures are drawn with the object-oriented matplotlib API on an Agg canvas, so
nothing here touches pyplot's global state or needs a display.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

PHASE_COLUMNS = ("phase", "processed", "exits_benign", "exits_infected", "median_ms", "p95_ms")
BENCH_COLUMNS = ("iteration", "packets", "seconds", "packets_per_s")
LATENCY_COLUMNS = ("phase", "count", "mean_ms", "median_ms", "p95_ms")
PHASE_LABELS = {"1": "Phase 1\nlists", "2": "Phase 2\nrate", "3": "Phase 3\nDGA", "4": "Phase 4\nML"}

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def phase_rows(snapshot: Mapping) -> list[dict]:
    rows = []
    for p, ph in snapshot["phases"].items():
        lat = ph["latency_ms"]
        rows.append({"phase": int(p), "processed": ph["processed"], "exits_benign": ph["exits_benign"],
                     "exits_infected": ph["exits_infected"], "median_ms": lat["median"], "p95_ms": lat["p95"]})
    return rows


def write_phase_csv(snapshot: Mapping, path: str | Path) -> None:
    """One row per phase; header only when nothing was classified."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=PHASE_COLUMNS, lineterminator="\n")
        w.writeheader()
        if snapshot["total"]:
            w.writerows(phase_rows(snapshot))


def read_phase_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{"phase": int(r["phase"]), "processed": int(r["processed"]),
                 "exits_benign": int(r["exits_benign"]), "exits_infected": int(r["exits_infected"]),
                 "median_ms": float(r["median_ms"]), "p95_ms": float(r["p95_ms"])}
                for r in csv.DictReader(fh)]


def write_bench_csv(rows: Sequence[Mapping], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def write_latency_csv(snapshot: Mapping, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=LATENCY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for p, ph in snapshot["phases"].items():
            lat = ph["latency_ms"]
            w.writerow({"phase": int(p), "count": lat["count"], "mean_ms": lat["mean"],
                        "median_ms": lat["median"], "p95_ms": lat["p95"]})


def _figure(width: float = 6.0, height: float = 3.4) -> Figure:
    fig = Figure(figsize=(width, height), dpi=120)
    FigureCanvasAgg(fig)
    return fig


def plot_exit_ratios(runs: Mapping[str, Mapping], path: str | Path) -> None:
    """Share of packets leaving the pipeline at each phase, one bar group per run."""
    with matplotlib.rc_context(STYLE):
        fig = _figure()
        ax = fig.add_subplot()
        phases = list(PHASE_LABELS)
        width = 0.8 / max(len(runs), 1)
        for i, (name, snap) in enumerate(runs.items()):
            total = snap["total"] or 1
            benign = [100.0 * snap["phases"][p]["exits_benign"] / total for p in phases]
            infected = [100.0 * snap["phases"][p]["exits_infected"] / total for p in phases]
            xs = [k + (i - (len(runs) - 1) / 2) * width for k in range(len(phases))]
            ax.bar(xs, benign, width * 0.95, label=f"{name}: benign", color=f"C{2 * i}")
            ax.bar(xs, infected, width * 0.95, bottom=benign, label=f"{name}: infected",
                   color=f"C{2 * i + 1}")
        ax.set_xticks(range(len(phases)), [PHASE_LABELS[p] for p in phases])
        ax.set_ylabel("packets exiting (%)")
        ax.set_ylim(0, 100)
        ax.set_title("Ratio of packets classified per phase")
        ax.legend(frameon=False, ncol=2)
        fig.tight_layout()
        fig.savefig(path)


def plot_phase_latency(runs: Mapping[str, Mapping], path: str | Path) -> None:
    """Median per-packet time in each phase, with the p95 as an upper whisker."""
    with matplotlib.rc_context(STYLE):
        fig = _figure()
        ax = fig.add_subplot()
        phases = list(PHASE_LABELS)
        width = 0.8 / max(len(runs), 1)
        for i, (name, snap) in enumerate(runs.items()):
            lat = [snap["phases"][p]["latency_ms"] for p in phases]
            med = [v["median"] * 1000.0 for v in lat]
            upper = [max(v["p95"] - v["median"], 0.0) * 1000.0 for v in lat]
            xs = [k + (i - (len(runs) - 1) / 2) * width for k in range(len(phases))]
            ax.bar(xs, med, width * 0.95, yerr=[[0.0] * len(med), upper], capsize=3,
                   label=name, color=f"C{i}")
        ax.set_xticks(range(len(phases)), [PHASE_LABELS[p] for p in phases])
        ax.set_ylabel("time per packet (µs)")
        ax.set_yscale("symlog", linthresh=1.0)
        ax.set_title("Processing time per phase (median, p95 whisker)")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)


def plot_throughput(rows: Sequence[Mapping], path: str | Path) -> None:
    with matplotlib.rc_context(STYLE):
        fig = _figure(5.0, 3.0)
        ax = fig.add_subplot()
        its = [r for r in rows if r["iteration"] != "aggregate"]
        ax.plot([int(r["iteration"]) for r in its], [float(r["packets_per_s"]) for r in its], marker="o")
        ax.set_xlabel("iteration")
        ax.set_ylabel("packets / s")
        ax.set_ylim(bottom=0)
        ax.set_title("Replay throughput")
        fig.tight_layout()
        fig.savefig(path)


def figure_paths(report: str | Path, *names: str) -> list[Path]:
    """Sibling PNG paths for a CSV report: ``run.csv`` -> ``run_<name>.png``."""
    p = Path(report)
    return [p.with_name(f"{p.stem}_{n}.png") for n in names]

