"""Episode capture, on-disk format, and dataset export."""

from .episode import (
    EpisodeFrame,
    EpisodeMeta,
    EpisodeWriter,
    IntegrityError,
    iter_frames,
    load_episode,
)
from .export import ExportError, TABLE_COLUMNS, TABLE_VALUE_COLUMNS, export, read_table
from .record import RecordSession, TapClient, record

__all__ = [
    "EpisodeFrame",
    "EpisodeMeta",
    "EpisodeWriter",
    "IntegrityError",
    "iter_frames",
    "load_episode",
    "ExportError",
    "TABLE_COLUMNS",
    "TABLE_VALUE_COLUMNS",
    "export",
    "read_table",
    "RecordSession",
    "TapClient",
    "record",
]
