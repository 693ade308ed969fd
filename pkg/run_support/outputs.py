import csv
import io
import json
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from lz_decoherence.constants import CSV_FLOAT_FORMAT


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), CSV_FLOAT_FORMAT)
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """
    Renders a table as CSV: header row, "\\n" line endings and floats with 17
    significant digits, so reruns compare byte for byte.

    :param header: Column names.
    :param rows: Table rows.
    :return: The CSV text.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(value) for value in row])
    return buffer.getvalue()


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def render_json(result: Dict[str, Any], config: Dict[str, Any]) -> str:
    """
    Renders a result with the resolved configuration that produced it.

    :param result: The result payload.
    :param config: The configuration document.
    :return: The JSON text, newline terminated.
    """
    payload = {"config": _plain(config), "result": _plain(result)}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_output(text: str, path: Optional[str]) -> None:
    """
    Writes rendered output to a file, or to stdout when no path is given.

    :param text: The rendered output.
    :param path: Destination file; parent directories are created.
    """
    if path is None:
        print(text, end="")
        return
    abs_path = os.path.abspath(path)
    abs_dir = os.path.dirname(abs_path)
    if not os.path.isdir(abs_dir):
        os.makedirs(abs_dir)

    print(f"Writing to {abs_path}")
    with open(abs_path, "w", newline="") as file:
        file.write(text)


def summary_lines(result: Dict[str, Any]) -> List[str]:
    """One "key: value" line per top-level result field."""
    return [f"{key}: {value}" for key, value in result.items()]
