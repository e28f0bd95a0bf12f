"""SVG line charts of result tables (mean with stderr bars, theory dashed)."""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import PARAMS3, ResultTable, atomic_write  # noqa: E402

_SVG_META = {"Date": None, "Creator": None}


def _svg(fig) -> str:
    buf = io.StringIO()
    # fixed hash salt and no timestamp keep the output byte-stable
    with matplotlib.rc_context({"svg.hashsalt": "dfrc", "svg.fonttype": "path"}):
        fig.savefig(buf, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return buf.getvalue()


def _series(table: ResultTable, metric: str):
    out: dict[str, list] = {}
    for r in table.rows:
        if r.metric == metric:
            out.setdefault(r.scheme, []).append(r)
    for rows in out.values():
        rows.sort(key=lambda r: r.sweep_value)
    return out


def line_chart(table: ResultTable, metric: str, title: str = "", logy: bool = False,
               theory: bool = True, ylabel: str | None = None) -> str:
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    sweep_var = None
    for scheme, rows in _series(table, metric).items():
        x = [r.sweep_value for r in rows]
        y = [r.mean for r in rows]
        err = [r.stderr for r in rows]
        sweep_var = rows[0].sweep_var
        line = ax.errorbar(x, y, yerr=err, marker="o", ms=3, capsize=2, label=scheme)
        th = [r.theory for r in rows]
        if theory and any(t == t for t in th):
            ax.plot(x, th, ls="--", color=line[0].get_color(), label=f"{scheme} (theory)")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(sweep_var or "")
    ax.set_ylabel(ylabel or metric)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _svg(fig)


def figure_plots(table: ResultTable, figure: str) -> dict[str, str]:
    """SVG documents for a figure, keyed by a short name."""
    if figure == "fig4":
        return {name: line_chart(table, f"rmse_{name}", f"RMSE ({name})", logy=True)
                for name in PARAMS3}
    if figure == "fig5":
        return {"rate": line_chart(table, "rate", "total rate in block n"),
                "asymptote": line_chart(table, "asymptote", "high-power limit", theory=False)}
    return {"rate": line_chart(table, "rate", "average total rate", theory=False),
            "feasible": line_chart(table, "feasible", "feasible fraction", theory=False)}


def write_plots(table: ResultTable, figure: str, out_prefix: str | Path) -> list[Path]:
    paths = []
    for name, svg in figure_plots(table, figure).items():
        path = Path(f"{out_prefix}_{name}.svg")
        atomic_write(path, svg)
        paths.append(path)
    return paths
