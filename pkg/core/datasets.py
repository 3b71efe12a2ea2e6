"""
Dataset writers shared by all commands

Every tabular output is a CSV file with a header row, written atomically
(temporary file in the target directory, then rename). Every CSV gets a JSON
sidecar carrying the hash of the run document that produced it, so a
dataset can always be traced back to its configuration.
"""

import csv
import hashlib
import json
import logging
import os
import tempfile
from io import StringIO
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Sequence

logger = logging.getLogger(__name__)


def canonical_json(value: Any) -> str:
    """Stable JSON encoding: sorted keys, no insignificant whitespace"""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(value: Any) -> str:
    """SHA-256 of the canonical JSON encoding of a configuration mapping"""
    return hashlib.sha256(canonical_json(value).encode("utf-8")).hexdigest()


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


class DatasetWriter:
    """
    Writes CSV tables and JSON sidecars below one output directory

    Floats are formatted with a fixed format spec so that a rerun of the
    same configuration produces byte-identical files.
    """

    def __init__(
        self,
        directory: Path,
        provenance: Optional[Mapping[str, Any]] = None,
        float_format: str = ".17g"
    ):
        """
        Initialize the writer

        Args:
            directory: Target directory (created on first write)
            provenance: Fields merged into every sidecar (config hash, units, ...)
            float_format: Format spec applied to float cells
        """
        self.directory = Path(directory)
        self.provenance = dict(provenance or {})
        self.float_format = float_format
        self.written: list[Path] = []

    def _cell(self, value: Any) -> str:
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, (int,)) and not isinstance(value, bool):
            return str(value)
        try:
            return format(float(value), self.float_format)
        except (TypeError, ValueError):
            return str(value)

    def write_csv(
        self,
        name: str,
        header: Sequence[str],
        rows: Iterable[Sequence[Any]],
        metadata: Optional[Mapping[str, Any]] = None
    ) -> Path:
        """
        Write one CSV table plus its `<stem>.meta.json` sidecar

        Args:
            name: File name relative to the output directory
            header: Column names
            rows: Row sequences, same length as the header
            metadata: Extra sidecar fields

        Returns:
            Path of the CSV file
        """
        path = self.directory / name
        lines = [list(header)]
        width = len(header)
        for row in rows:
            cells = [self._cell(v) for v in row]
            if len(cells) != width:
                raise ValueError(f"Row of width {len(cells)} does not match header of width {width} in {name}")
            lines.append(cells)

        buffer = StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerows(lines)
        _atomic_write_text(path, buffer.getvalue())
        self.written.append(path)
        logger.info(f"Wrote {path} ({len(lines) - 1} rows)")

        sidecar = dict(self.provenance)
        sidecar["columns"] = list(header)
        sidecar["rows"] = len(lines) - 1
        if metadata:
            sidecar.update(metadata)
        self.write_json(Path(name).with_suffix(".meta.json").as_posix(), sidecar)
        return path

    def write_json(self, name: str, payload: Mapping[str, Any]) -> Path:
        """Write a JSON document atomically (sorted keys, indented)"""
        path = self.directory / name
        text = json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False, default=_json_default)
        _atomic_write_text(path, text + "\n")
        self.written.append(path)
        logger.debug(f"Wrote {path}")
        return path


def _json_default(value: Any) -> Any:
    if isinstance(value, Path):
        return value.as_posix()
    if hasattr(value, "model_dump"):
        return value.model_dump(mode="json")
    if hasattr(value, "tolist"):
        return value.tolist()
    if hasattr(value, "item"):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def read_csv(path: Path) -> Dict[str, list[str]]:
    """Read a CSV written by DatasetWriter into a column mapping of strings"""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        columns: Dict[str, list[str]] = {h: [] for h in header}
        for row in reader:
            for key, cell in zip(header, row):
                columns[key].append(cell)
    return columns
