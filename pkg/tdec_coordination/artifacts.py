# tdec_coordination/artifacts.py
"""
Deterministic artifact writing: fixed float formatting, JSON and CSV
text builders, and write-temp-then-rename file replacement.
"""

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

SIGNIFICANT_DIGITS = 12


def format_float(value):
    return f"{float(value):.{SIGNIFICANT_DIGITS}g}"


def round_floats(obj):
    """Recursively round floats (and numpy scalars/arrays) to 12 significant digits."""
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [round_floats(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(format_float(obj))
    return obj


def json_text(obj):
    return json.dumps(round_floats(obj), indent=2) + "\n"


def csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write_text(path, json_text(obj))


def write_csv(path, header, rows):
    atomic_write_text(path, csv_text(header, rows))
