"""Byte-stable text output helpers.

Floats are written with ``repr`` (shortest round-trip form); undefined
values (NaN, None) become empty cells in CSV and ``null`` in JSON.
"""

import csv
import json
import math

import numpy as np


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(stream, header, rows) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])


def write_matrix_csv(stream, codes, values) -> None:
    """Square matrix with layer codes as row and column headers."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["layer", *codes])
    for code, row in zip(codes, np.asarray(values).tolist()):
        w.writerow([code] + [fmt(v) for v in row])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return None if math.isnan(float(obj)) else float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"
