"""Dataset export: canonical tree copies and flat per-episode tables.

The table schema has one row per frame and keeps numeric round-tripping
exact by writing shortest-repr floats: columns are ``index``, ``t_ms``,
``state_0..state_6``, ``action_0..action_6``, ``prompt`` (17 value columns)
plus the two relative image-path columns.
"""

from __future__ import annotations

import csv
import shutil
from pathlib import Path

from .episode import load_episode

__all__ = ["ExportError", "export", "TABLE_VALUE_COLUMNS", "TABLE_COLUMNS"]


class ExportError(RuntimeError):
    pass


TABLE_VALUE_COLUMNS = (
    ["index", "t_ms"]
    + [f"state_{i}" for i in range(7)]
    + [f"action_{i}" for i in range(7)]
    + ["prompt"]
)
TABLE_COLUMNS = TABLE_VALUE_COLUMNS[:-1] + ["image_base", "image_wrist", "prompt"]


def export(episode_paths, out_dir, schema: str = "canonical",
           allow_mixed: bool = False) -> Path:
    """Export a set of episodes; every episode is integrity-checked first."""
    episode_paths = [Path(p) for p in episode_paths]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    metas = []
    for p in episode_paths:
        meta, frames = load_episode(p)
        for _ in frames:  # full scan validates every frame record
            pass
        metas.append(meta)
    rates = {m.record_rate_hz for m in metas}
    if len(rates) > 1 and not allow_mixed:
        raise ExportError(
            f"mixed record rates {sorted(rates)}; pass allow_mixed to export anyway")

    if schema == "canonical":
        for p in episode_paths:
            dest = out_dir / p.name
            if dest.exists():
                raise ExportError(f"destination {dest} already exists")
            shutil.copytree(p, dest)
        return out_dir
    if schema == "table":
        for p in episode_paths:
            _write_table(p, out_dir)
        return out_dir
    raise ExportError(f"unknown export schema {schema!r}")


def _write_table(episode_path: Path, out_dir: Path) -> None:
    meta, frames = load_episode(episode_path)
    out_path = out_dir / f"{meta.episode_id}.csv"
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TABLE_COLUMNS)
        for f in frames:
            row = [f.index, repr(float(f.t_ms))]
            row += [repr(float(v)) for v in f.state]
            row += [repr(float(v)) for v in f.action]
            row += [
                str(Path(meta.episode_id) / "cam_base" / f.image_base.name),
                str(Path(meta.episode_id) / "cam_wrist" / f.image_wrist.name),
                f.prompt,
            ]
            writer.writerow(row)


def read_table(path) -> list[dict]:
    """Load an exported table; numeric columns come back as exact floats."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for raw in csv.DictReader(fh):
            row: dict = {"index": int(raw["index"]), "t_ms": float(raw["t_ms"])}
            row["state"] = [float(raw[f"state_{i}"]) for i in range(7)]
            row["action"] = [float(raw[f"action_{i}"]) for i in range(7)]
            row["image_base"] = raw["image_base"]
            row["image_wrist"] = raw["image_wrist"]
            row["prompt"] = raw["prompt"]
            rows.append(row)
    return rows
