"""Report emission: JSON, plain-text table, CSV, and figures.

One directory per report:

    report.json     # machine-readable stats + trial records
    report.txt      # text table mirroring the benchmark columns
    report.csv      # same rows, delimited
    latency_<row>.png, success_rates.png   # rendered figures

The text/CSV/JSON bodies are deterministic for identical inputs; the only
timestamp lives in the JSON header field.
"""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import LatencyStats, TrialRecord

__all__ = ["RunResult", "write_report", "render_text_table"]

_COLUMNS = ["Row", "Mean", "Median", "Std", "P95", "Horizon",
            "Per-step", "Single", "Multi"]


@dataclass
class RunResult:
    """One report row: a policy/protocol run with its stats and rates."""

    name: str
    stats: LatencyStats | None
    rates: dict | None
    records: list[TrialRecord] | None = None

    def cells(self) -> list[str]:
        s = self.stats
        lat = (
            [f"{s.mean_ms:.1f} ms", f"{s.median_ms:.1f} ms",
             f"{s.std_ms:.1f} ms", f"{s.p95_ms:.1f} ms", str(s.horizon),
             f"{s.per_step_display()} ms"]
            if s is not None else ["-"] * 6
        )
        if self.rates is not None:
            rates = [f"{self.rates['single'] * 100:.0f}%",
                     f"{self.rates['multi'] * 100:.0f}%"]
        else:
            rates = ["-", "-"]
        return [self.name] + lat + rates

    def as_dict(self) -> dict:
        out: dict = {"name": self.name}
        if self.stats is not None:
            out["latency"] = self.stats.as_dict()
        if self.rates is not None:
            out["success"] = dict(self.rates)
        if self.records is not None:
            out["trials"] = [r.as_dict() for r in self.records]
        return out


def render_text_table(results: list[RunResult]) -> str:
    rows = [_COLUMNS] + [r.cells() for r in results]
    widths = [max(len(row[i]) for row in rows) for i in range(len(_COLUMNS))]
    lines = []
    for idx, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_report(results: list[RunResult], out_dir,
                 latency_samples: dict[str, list[float]] | None = None) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    payload = {
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "rows": [r.as_dict() for r in results],
    }
    (out_dir / "report.json").write_text(json.dumps(payload, indent=2) + "\n")
    (out_dir / "report.txt").write_text(render_text_table(results))

    csv_lines = [",".join(_COLUMNS)]
    for r in results:
        csv_lines.append(",".join(cell.replace(",", ";") for cell in r.cells()))
    (out_dir / "report.csv").write_text("\n".join(csv_lines) + "\n")

    if latency_samples:
        for name, samples in latency_samples.items():
            if samples:
                _latency_figure(name, samples, out_dir)
    _success_figure(results, out_dir)
    return out_dir


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name)


def _latency_figure(name: str, samples: list[float], out_dir: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.hist(samples, bins=min(60, max(10, len(samples) // 20)),
            color="#4878b0", edgecolor="white")
    ax.set_xlabel("inference latency (ms)")
    ax.set_ylabel("calls")
    ax.set_title(f"{name}: {len(samples)} inference calls")
    fig.tight_layout()
    fig.savefig(out_dir / f"latency_{_safe(name)}.png", dpi=120)
    plt.close(fig)


def _success_figure(results: list[RunResult], out_dir: Path) -> None:
    scored = [r for r in results if r.rates is not None]
    if not scored:
        return
    names = [r.name for r in scored]
    single = [r.rates["single"] * 100 for r in scored]
    multi = [r.rates["multi"] * 100 for r in scored]
    x = range(len(scored))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar([i - 0.2 for i in x], single, width=0.4, label="single",
           color="#4878b0")
    ax.bar([i + 0.2 for i in x], multi, width=0.4, label="multi",
           color="#e1812c")
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=15, ha="right")
    ax.set_ylabel("success rate (%)")
    ax.set_ylim(0, 105)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_dir / "success_rates.png", dpi=120)
    plt.close(fig)
