"""Report files: CSV tables and JSON documents stamped with the toolkit version,
written through a staging directory so a failed run leaves nothing behind."""

from __future__ import annotations

import csv
import io
import json
import os
import shutil
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from overlapcomm import __version__

TOOLKIT = "overlapcomm"


def _cell(x) -> str:
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, bool):
        return "1" if x else "0"
    return str(x)


def csv_text(name: str, columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    """``# overlapcomm <version> <name>`` line, column header, then one line per row."""
    buf = io.StringIO()
    buf.write(f"# {TOOLKIT} {__version__} {name}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(x) for x in row])
    return buf.getvalue()


def read_csv(text: str) -> tuple[str, list[str], list[list[str]]]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(f"# {TOOLKIT} "):
        raise ValueError("missing report header line")
    name = lines[0].split(" ", 3)[3]
    rows = list(csv.reader(lines[1:]))
    return name, rows[0], rows[1:]


def json_text(name: str, payload: dict) -> str:
    doc = {"toolkit": TOOLKIT, "version": __version__, "report": name}
    doc.update(payload)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


class Staging:
    """Collects output files in a hidden directory and publishes them together.

    Used as a context manager: on a clean exit every staged file is moved into
    ``out_dir``; on an exception the staging directory is removed and
    ``out_dir`` is left untouched.
    """

    def __init__(self, out_dir: str | os.PathLike):
        self.out_dir = Path(out_dir)
        self._tmp: Path | None = None
        self.names: list[str] = []

    def __enter__(self) -> "Staging":
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._tmp = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.out_dir))
        return self

    def path(self, name: str) -> Path:
        if name not in self.names:
            self.names.append(name)
        return self._tmp / name

    def write_text(self, name: str, text: str) -> None:
        with open(self.path(name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)

    def csv(self, name: str, columns: Sequence[str], rows: Iterable[Sequence], filename: str | None = None):
        self.write_text(filename or f"{name}.csv", csv_text(name, columns, rows))

    def json(self, name: str, payload: dict, filename: str | None = None):
        self.write_text(filename or f"{name}.json", json_text(name, payload))

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is None:
                for name in self.names:
                    os.replace(self._tmp / name, self.out_dir / name)
        finally:
            shutil.rmtree(self._tmp, ignore_errors=True)
        return False
