"""PNG line plots of sweep results (headless)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "memoryless": dict(color="tab:blue", marker="o"),
    "improved": dict(color="tab:green", marker="s"),
    "random": dict(color="tab:red", marker="^"),
    "negotiate": dict(color="tab:orange", marker="v"),
}
RC = {"font.size": 9, "axes.grid": True, "grid.alpha": 0.3, "legend.fontsize": 7,
      "figure.figsize": (5.0, 3.6), "savefig.dpi": 150}


def _style(label: str) -> dict:
    scheme, _, rest = label.partition("_case")
    st = dict(STYLE.get(scheme, {}))
    if rest.endswith("_analysis"):
        st.update(marker=None, linestyle=":", linewidth=1.2)
    elif rest.startswith("2"):
        st["linestyle"] = "--"
    return st


def plot_sweep(header, table, xlabel, ylabel, path):
    """One line per column of ``table`` (first column is x)."""
    data = np.array(table, dtype=float)
    x = data[:, 0]
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for j, name in enumerate(header[1:], start=1):
            y = data[:, j]
            if np.all(np.isnan(y)):
                continue
            if name in ("upper_bound", "gamma"):
                ax.plot(x, y, color="k", linewidth=1.0, label=name.replace("_", " "))
            else:
                ax.plot(x, y, label=name.replace("_case", " case ").replace("_", " "),
                        **_style(name))
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.legend(ncol=2, frameon=False)
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)


def plot_point(rows, metric, ylabel, path):
    """Bar chart for a single operating point."""
    labels = [f"{r['scheme']}\ncase {r['case']}" for r in rows]
    vals = [r[metric] for r in rows]
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.bar(range(len(vals)), vals,
               color=[STYLE.get(r["scheme"], {}).get("color", "gray") for r in rows])
        ax.set_xticks(range(len(vals)), labels)
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
