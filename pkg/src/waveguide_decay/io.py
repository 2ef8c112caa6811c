"""CSV and JSON records written by the command-line runner."""
import csv
import json
import math
import platform

import numpy as np

from . import __version__
from .montecarlo_engine import AveragedDecay

DECAY_COLUMNS = ("t_over_tau0", "mean_intensity", "std_error")
SWEEP_COLUMNS = ("n_atoms", "od_equivalent", "fast_rate", "fast_rate_stderr")


def _fmt(v, float_format):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), float_format)


def write_table(path, columns, rows, float_format=".17g"):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v, float_format) for v in row])


def write_decay_csv(path, curve, float_format=".17g"):
    rows = zip(curve.time_grid, curve.mean_intensity, curve.std_error)
    write_table(path, DECAY_COLUMNS, rows, float_format)


def read_decay_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != DECAY_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(DECAY_COLUMNS)}")
        data = np.array([[float(x) for x in row] for row in reader if row])
    if data.size == 0:
        raise ValueError(f"{path}: no data rows")
    return AveragedDecay(data[:, 0], data[:, 1], data[:, 2])


def clean_json(obj):
    # strict JSON: non-finite numbers become null
    if isinstance(obj, dict):
        return {k: clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean_json(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(path, record):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(clean_json(record), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def metadata_record(config_dict, command, wall_time, **extra):
    record = {
        "command": command,
        "config": config_dict,
        "master_seed": config_dict["run"]["master_seed"],
        "version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "wall_time_s": wall_time,
    }
    record.update(extra)
    return record
