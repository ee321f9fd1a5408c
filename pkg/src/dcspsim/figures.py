"""Render comparison figures from an emitted cells.csv.

Works purely from the delimited output (never from in-memory trial state),
so `dcspsim report` can regenerate figures for any previous run.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

_STYLE = {"apo": dict(color="tab:blue", marker="o"),
          "awc": dict(color="tab:red", marker="s")}


def _read_cells(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _group(rows, family):
    return [r for r in rows if r["family"] == family]


def _series(rows, protocol, xkey, ykey):
    pts = sorted(
        (float(r[xkey]), float(r[ykey]))
        for r in rows if r["protocol"] == protocol and r[xkey] != ""
    )
    return [p[0] for p in pts], [p[1] for p in pts]


def _plot_metric(rows, xkey, ykey, xlabel, ylabel, title, path, logy=False):
    fig, ax = plt.subplots(figsize=(6, 4))
    plotted = False
    for proto in ("apo", "awc"):
        xs, ys = _series(rows, proto, xkey, ykey)
        if xs:
            ax.plot(xs, ys, label=proto.upper(), **_STYLE[proto])
            plotted = True
    if not plotted:
        plt.close(fig)
        return
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_figures(cells_csv: str | Path, out_dir: str | Path) -> list[Path]:
    """One figure per (family, x-axis, metric) that the CSV supports."""
    rows = _read_cells(Path(cells_csv))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    made: list[Path] = []

    for family in ("minton", "random"):
        fam = _group(rows, family)
        if not fam:
            continue
        densities = sorted({r["density"] for r in fam if r["density"]})
        ns = sorted({int(r["n"]) for r in fam})
        for d in densities:
            sub = [r for r in fam if r["density"] == d]
            if len({r["n"] for r in sub}) > 1:
                for ykey, label, logy in (
                    ("cycles_mean", "mean cycles", False),
                    ("msgs_mean", "mean messages", True),
                ):
                    path = out / f"{family}_d{d}_{ykey}.png"
                    _plot_metric(sub, "n", ykey, "variables", label,
                                 f"{family} graphs, degree {d}", path, logy)
                    made.append(path)
        if len(densities) > 1:
            for n in ns:
                sub = [r for r in fam if int(r["n"]) == n]
                if len({r["density"] for r in sub}) > 1:
                    for ykey, label, logy in (
                        ("cycles_mean", "mean cycles", False),
                        ("msgs_mean", "mean messages", True),
                        ("solved_pct", "% completed", False),
                    ):
                        path = out / f"{family}_n{n}_{ykey}.png"
                        _plot_metric(sub, "density", ykey, "average degree",
                                     label, f"{family} graphs, n={n}", path, logy)
                        made.append(path)

    sensor = _group(rows, "sensor")
    if sensor and len({r["targets"] for r in sensor}) > 1:
        for ykey, label, logy in (
            ("cycles_mean", "mean cycles", False),
            ("msgs_mean", "mean messages", True),
            ("solved_pct", "% completed", False),
        ):
            path = out / f"sensor_{ykey}.png"
            _plot_metric(sensor, "targets", ykey, "targets", label,
                         "sensor field", path, logy)
            made.append(path)
    return [p for p in made if p.exists()]
