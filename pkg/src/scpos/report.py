"""Report rendering: JSON detail, a plain-text accuracy table, per-run CSV,
and a PNG bar chart, all written side by side in the output directory."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from scpos.evaluator import EvalReport

METRIC_NAMES = ("ACC_SC", "ACC_POS", "ACC_SCPOS")


def format_table(report: EvalReport) -> str:
    """Accuracy table with one row per run plus the averaged result.

    Values are percentages to two decimals, laid out like the result tables
    this toolkit mirrors: metric columns under a schema heading.
    """
    header = f"{report.schema.value} / {report.mode.value} ({report.aggregation})"
    lines = [header, ""]
    lines.append(f"{'':<10}{METRIC_NAMES[0]:>10}{METRIC_NAMES[1]:>10}{METRIC_NAMES[2]:>12}")
    for index, (sc, pos, scpos) in enumerate(report.per_run, start=1):
        lines.append(
            f"{f'run {index}':<10}{sc * 100:>10.2f}{pos * 100:>10.2f}{scpos * 100:>12.2f}"
        )
    lines.append(
        f"{'mean':<10}{report.acc_sc * 100:>10.2f}{report.acc_pos * 100:>10.2f}"
        f"{report.acc_scpos * 100:>12.2f}"
    )
    return "\n".join(lines) + "\n"


def write_csv(report: EvalReport, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["run", "acc_sc", "acc_pos", "acc_scpos"])
        for index, (sc, pos, scpos) in enumerate(report.per_run, start=1):
            writer.writerow([index, f"{sc:.6f}", f"{pos:.6f}", f"{scpos:.6f}"])
        writer.writerow(
            ["mean", f"{report.acc_sc:.6f}", f"{report.acc_pos:.6f}", f"{report.acc_scpos:.6f}"]
        )


def render_figure(report: EvalReport, path: Path) -> None:
    """Grouped bar chart of the three accuracies, one bar group per run
    plus the mean."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = list(report.per_run) + [(report.acc_sc, report.acc_pos, report.acc_scpos)]
    row_labels = [f"run {i}" for i in range(1, len(report.per_run) + 1)] + ["mean"]
    width = 0.8 / len(rows)

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for offset, (row, label) in enumerate(zip(rows, row_labels)):
        positions = [m + offset * width for m in range(len(METRIC_NAMES))]
        ax.bar(positions, [v * 100 for v in row], width=width, label=label)
    ax.set_xticks([m + 0.4 - width / 2 for m in range(len(METRIC_NAMES))])
    ax.set_xticklabels(METRIC_NAMES)
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 105)
    ax.set_title(f"{report.schema.value} / {report.mode.value} ({report.aggregation})")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(
    report: EvalReport,
    outdir: str | Path,
    config_snapshot: dict | None = None,
    figures: bool = True,
) -> dict[str, Path]:
    """Write report.json / report.txt / report.csv (and report.png) into
    ``outdir``. Returns the paths by kind."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    payload = report.to_json_dict()
    if config_snapshot is not None:
        payload["config"] = config_snapshot

    paths = {
        "json": outdir / "report.json",
        "table": outdir / "report.txt",
        "csv": outdir / "report.csv",
    }
    paths["json"].write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    paths["table"].write_text(format_table(report), encoding="utf-8")
    write_csv(report, paths["csv"])
    if figures:
        paths["figure"] = outdir / "report.png"
        render_figure(report, paths["figure"])
    return paths
