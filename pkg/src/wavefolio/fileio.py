"""Crash-safe file writes.

Content goes to ``<name>.partial`` first and is renamed into place only once
fully written, so an interrupted run leaves a visible ``.partial`` marker
rather than a truncated output.
"""
from __future__ import annotations

import csv
import io
import os
from pathlib import Path
from typing import Iterable, Sequence


def partial_path(path: Path) -> Path:
    return path.with_name(path.name + ".partial")


def atomic_write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    tmp = partial_path(path)
    try:
        with tmp.open("w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc
    os.replace(tmp, path)
    return path


def csv_text(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()
