"""Figure rendering for finished runs.

Reads the delimited artifacts a run leaves behind (convergence CSV,
payoff-matrix file) and writes PNG figures next to them: the value /
exploitability trace, per-oracle response gains, and a payoff heatmap.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import formats  # noqa: E402
from .errors import ParseError  # noqa: E402


def _read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    lines = path.read_text().strip().splitlines()
    if not lines:
        raise ParseError(str(path), 0, "empty CSV")
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        rows.append([float(c) if c else np.nan for c in cells])
    return header, np.asarray(rows, dtype=np.float64)


def plot_convergence(csv_path: Path, out_path: Path) -> None:
    header, data = _read_csv(csv_path)
    col = {name: i for i, name in enumerate(header)}
    iters = data[:, col["iteration"]]

    fig, (ax_val, ax_expl) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax_val.plot(iters, data[:, col["value"]], color="black", lw=2,
                label="equilibrium value")
    ax_val.plot(iters, data[:, col["blue_best_gain"]], color="tab:blue",
                marker="o", ms=4, lw=1, label="best Blue response")
    ax_val.plot(iters, data[:, col["red_best_gain"]] * -1.0, color="tab:red",
                marker="s", ms=4, lw=1, label="best Red response (Blue view)")
    ax_val.set_ylabel("gain (Blue)")
    ax_val.legend(loc="best", fontsize=8)
    ax_val.grid(True, alpha=0.3)

    ax_expl.plot(iters, data[:, col["exploitability"]], color="tab:purple",
                 marker="o", ms=4)
    ax_expl.set_xlabel("iteration")
    ax_expl.set_ylabel("exploitability")
    ax_expl.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_response_gains(csv_path: Path, out_path: Path) -> None:
    header, data = _read_csv(csv_path)
    col = {name: i for i, name in enumerate(header)}
    iters = data[:, col["iteration"]]

    fig, ax = plt.subplots(figsize=(7, 4))
    for name, i in col.items():
        if name.startswith("blue_gain_"):
            ax.plot(iters, data[:, i], marker="o", ms=3, lw=1,
                    color="tab:blue", alpha=0.7, label=name)
        elif name.startswith("red_gain_"):
            ax.plot(iters, data[:, i], marker="s", ms=3, lw=1,
                    color="tab:red", alpha=0.7, label=name)
    ax.plot(iters, data[:, col["value"]], color="black", lw=2, label="value")
    ax.set_xlabel("iteration")
    ax.set_ylabel("gain against opposing mixture")
    ax.legend(loc="best", fontsize=7)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_payoff_heatmap(matrix_path: Path, out_path: Path) -> None:
    payoff, blue_meta, red_meta = formats.parse_matrix(
        matrix_path.read_text(), source=str(matrix_path))
    fig, ax = plt.subplots(figsize=(6, 5))
    image = ax.imshow(payoff, cmap="RdBu", aspect="auto")
    fig.colorbar(image, ax=ax, label="Blue gain")
    ax.set_xticks(range(payoff.shape[1]))
    ax.set_xticklabels([m.label() for m in red_meta], rotation=90, fontsize=6)
    ax.set_yticks(range(payoff.shape[0]))
    ax.set_yticklabels([m.label() for m in blue_meta], fontsize=6)
    ax.set_xlabel("Red policies")
    ax.set_ylabel("Blue policies")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def render_run(run_dir: Path, out_dir: Path) -> list[Path]:
    """Render every figure the run directory supports; returns the paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    csv_path = run_dir / "convergence.csv"
    if csv_path.exists():
        target = out_dir / "convergence.png"
        plot_convergence(csv_path, target)
        written.append(target)
        target = out_dir / "response_gains.png"
        plot_response_gains(csv_path, target)
        written.append(target)
    matrix_path = run_dir / "payoff_matrix.matrix"
    if matrix_path.exists():
        target = out_dir / "payoff_matrix.png"
        plot_payoff_heatmap(matrix_path, target)
        written.append(target)
    if not written:
        raise ParseError(str(run_dir), 0,
                         "no convergence.csv or payoff_matrix.matrix found")
    return written
