"""
Result writers: results.csv, results.json and manifest.json.
"""

import csv
import json
import logging
import math
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CSV_COLUMNS = (
    "axis",
    "axis_value",
    "precoder",
    "mode",
    "method",
    "rate",
    "stderr",
    "trials",
    "seed",
)
FORMATS = ("csv", "json", "both")
RESULTS_CSV = "results.csv"
RESULTS_JSON = "results.json"
MANIFEST_JSON = "manifest.json"


def format_value(value: Any) -> str:
    """CSV cell text: floats at 12 significant digits, None as an empty cell."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return f"{value:.12g}"
    return str(value)


def planned_files(fmt: str) -> List[str]:
    if fmt not in FORMATS:
        raise ValueError(f"Unknown output format: {fmt}")
    files = []
    if fmt in ("csv", "both"):
        files.append(RESULTS_CSV)
    if fmt in ("json", "both"):
        files.append(RESULTS_JSON)
    return files + [MANIFEST_JSON]


def check_writable(output_dir: str, fmt: str, force: bool = False) -> None:
    """
    Refuse to overwrite earlier results unless forced.

    Raises:
        FileExistsError: a result file exists and force is not set
    """
    existing = [
        name for name in planned_files(fmt) if os.path.exists(os.path.join(output_dir, name))
    ]
    if existing and not force:
        raise FileExistsError(
            f"{', '.join(existing)} already exist in {output_dir}; pass --force to overwrite"
        )


def write_csv(
    path: str, records: Iterable[Dict[str, Any]], columns: Sequence[str] = CSV_COLUMNS
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(f"#schema={SCHEMA_VERSION}\n")
        writer = csv.writer(f, delimiter=",", lineterminator="\n")
        writer.writerow(columns)
        for record in records:
            writer.writerow([format_value(record.get(column)) for column in columns])


def _json_ready(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    return value


def write_json(path: str, payload: Any) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_json_ready(payload), f, indent=2, sort_keys=False)
        f.write("\n")


def write_results(
    output_dir: str,
    records: List[Dict[str, Any]],
    manifest: Dict[str, Any],
    fmt: str = "both",
    force: bool = False,
    columns: Sequence[str] = CSV_COLUMNS,
    logger: Optional[logging.Logger] = None,
) -> List[str]:
    """
    Write the records and the manifest into output_dir.

    Returns:
        paths of the written files
    """
    logger = logger or logging.getLogger(__name__)
    check_writable(output_dir, fmt, force)
    os.makedirs(output_dir, exist_ok=True)

    written = []
    if fmt in ("csv", "both"):
        path = os.path.join(output_dir, RESULTS_CSV)
        write_csv(path, records, columns)
        written.append(path)
    if fmt in ("json", "both"):
        path = os.path.join(output_dir, RESULTS_JSON)
        write_json(path, records)
        written.append(path)

    path = os.path.join(output_dir, MANIFEST_JSON)
    write_json(path, {**manifest, "files": [os.path.basename(p) for p in written]})
    written.append(path)

    logger.info(f"Wrote {len(records)} records to {output_dir}")
    return written
