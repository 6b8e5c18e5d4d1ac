import csv
import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np

from anisolab.schemas.experiment import CSV_COLUMNS, ResultRecord
from anisolab.schemas.grid import GridFunction, GridSpec
from anisolab.utils.helpers import format_float

logger = logging.getLogger(__name__)

GRID_MAGIC = b"ANISOGRD"
GRID_HEADER = struct.Struct("<8sIIIxxxxdd")
HEADER_SIZE = 64


# ===============================
# GRID FILES
# ===============================
def write_grid_function(f: GridFunction, path) -> Path:
    """64-byte header (magic, d, d_s, N, L, K_rad) then little-endian (re, im) pairs, row-major."""
    spec = f.spec
    header = GRID_HEADER.pack(
        GRID_MAGIC, spec.dim, spec.d_s, spec.points_per_axis, spec.box_length, spec.support_radius,
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as handle:
        handle.write(header.ljust(HEADER_SIZE, b"\0"))
        handle.write(np.ascontiguousarray(f.values, dtype="<c16").tobytes())
    return path


def read_grid_function(path, kind: str = "generic") -> GridFunction:
    with open(path, "rb") as handle:
        header = handle.read(HEADER_SIZE)
        payload = handle.read()
    if len(header) < HEADER_SIZE:
        raise ValueError(f"{path}: truncated header")
    magic, d, d_s, N, L, K_rad = GRID_HEADER.unpack(header[: GRID_HEADER.size])
    if magic != GRID_MAGIC:
        raise ValueError(f"{path}: not a grid function file")
    spec = GridSpec.create(d, d_s, N, L, K_rad)
    values = np.frombuffer(payload, dtype="<c16")
    if values.size != N ** d:
        raise ValueError(f"{path}: expected {N ** d} samples, found {values.size}")
    return GridFunction(spec=spec, values=values.reshape(spec.shape), kind=kind)


# ===============================
# RESULT FILES
# ===============================
def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def write_results_csv(records: Sequence[ResultRecord], path, thresholds: Dict[str, float]) -> Path:
    """Comment line with the verdict thresholds, then one row per record."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        handle.write("# " + " ".join(f"{k}={format_float(v)}" for k, v in sorted(thresholds.items())) + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record in records:
            row = record.row()
            writer.writerow([_cell(row[column]) for column in CSV_COLUMNS])
    logger.info(f"Wrote {len(records)} rows to {path}")
    return path


def write_json(path, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)
    return path


def write_results_json(records: Sequence[ResultRecord], path, thresholds: Dict[str, float]) -> Path:
    payload = {
        "thresholds": thresholds,
        "columns": list(CSV_COLUMNS),
        "records": [record.row() for record in records],
    }
    path = write_json(path, payload)
    logger.info(f"Wrote {len(records)} records to {path}")
    return path


def write_gnuplot_script(csv_path, series: List[str], path, experiment: str) -> Path:
    """Static log-log plot of value against N for each (quantity, parameter) series in the CSV."""
    csv_path = Path(csv_path)
    lines = [
        "set datafile separator ','",
        "set logscale xy 2",
        "set key outside right",
        "set xlabel 'N'",
        "set ylabel 'value'",
        f"set title '{experiment}'",
        "set terminal pngcairo size 1000,640",
        f"set output '{csv_path.with_suffix('.png').name}'",
    ]
    plots = []
    for label in series:
        # rows whose 'quantity|p|s|t|u_lambda' key matches the label; columns: N=6, value=10
        plots.append(
            f"'{csv_path.name}' using (stringcolumn(9).'|'.stringcolumn(2).'|'.stringcolumn(3).'|'"
            f".stringcolumn(4).'|'.stringcolumn(8) eq '{label}' ? $6 : 1/0):10 "
            f"with linespoints title '{label}'"
        )
    if plots:
        lines.append("plot " + ", \\\n     ".join(plots))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def series_label(record: ResultRecord) -> str:
    return "|".join(_cell(v) for v in (record.quantity, record.p, record.s, record.t, record.u_lambda))
