"""
Result sink for the CLI. Every file carries its provenance
({"tool", "version", "config"}): as a top-level key in JSON, as a
`#` comment preamble in CSV. Nothing is written outside `--out`
(or `--samples-out`); "-" means stdout.
"""

import csv
import json
import logging
import math
import sys
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO

import numpy as np

from config import TOOL_NAME, TOOL_VERSION
from utils import format_float

logger = logging.getLogger(__name__)

FORMATS = ("json", "csv")


def provenance(config: Dict[str, Any]) -> Dict[str, Any]:
    return {"tool": TOOL_NAME, "version": TOOL_VERSION, "config": _plain(config)}


def _plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars and arrays to Python, tuples to lists, NaN to None."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) or math.isinf(value) else value
    return value


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (np.integer,)):
        return str(int(value))
    if isinstance(value, (float, np.floating, int, bool, np.bool_)):
        return format_float(bool(value) if isinstance(value, np.bool_) else value)
    return str(value)


class ResultWriter:
    """One output target; use as a context manager so files are closed on error."""

    def __init__(self, out: str = "-", config: Optional[Dict[str, Any]] = None):
        self.out = out or "-"
        self.config = config or {}
        self._handle: Optional[TextIO] = None

    def _stream(self) -> TextIO:
        if self._handle is None:
            if self.out == "-":
                self._handle = sys.stdout
            else:
                self._handle = open(self.out, "w", newline="", encoding="utf-8")
        return self._handle

    def write_json(self, body: Dict[str, Any]) -> None:
        document = {"provenance": provenance(self.config)}
        document.update(_plain(body))
        stream = self._stream()
        json.dump(document, stream, indent=2, sort_keys=False, allow_nan=False)
        stream.write("\n")

    def write_csv(self, rows: Sequence[Dict[str, Any]], columns: Optional[List[str]] = None) -> None:
        """Long-format CSV; missing or NaN values are empty cells."""
        if columns is None:
            columns = list(rows[0].keys()) if rows else []
        stream = self._stream()
        stream.write("# " + json.dumps(provenance(self.config), sort_keys=False) + "\n")
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])

    def write(self, fmt: str, body: Dict[str, Any], rows: Sequence[Dict[str, Any]], columns: Optional[List[str]] = None) -> None:
        if fmt == "json":
            self.write_json(body)
        elif fmt == "csv":
            self.write_csv(rows, columns)
        else:
            raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")

    def write_text(self, text: str) -> None:
        self._stream().write(text)

    def close(self):
        if self._handle is not None and self._handle is not sys.stdout:
            self._handle.close()
            logger.debug("wrote %s", self.out)
        elif self._handle is sys.stdout:
            sys.stdout.flush()
        self._handle = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()


def write_samples(path: str, samples: Iterable[float], config: Optional[Dict[str, Any]] = None) -> None:
    """Raw MC samples, one per line under the header `sample`."""
    with ResultWriter(path, config) as writer:
        writer.write_csv([{"sample": float(v)} for v in samples], ["sample"])
