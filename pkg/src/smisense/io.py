"""Flat-file formats: CSV tables and the precoder matrix file."""
import csv
import io
from pathlib import Path

import numpy as np

SIG_DIGITS = 12


def format_value(x):
    if x is None or x == "":
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if x == 0.0:
            return "0"
        return f"{x:.{SIG_DIGITS}g}"
    return str(x)


def write_csv(rows, columns, path=None):
    """Write dict rows with a fixed column order; returns the text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    text = buf.getvalue()
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_precoder(f, path):
    """``N_T K`` header, then one row per antenna of interleaved ``re im`` pairs.

    Values use ``repr`` so they read back bit-exactly.
    """
    f = np.asarray(f, dtype=complex)
    lines = [f"{f.shape[0]} {f.shape[1]}"]
    for row in f:
        lines.append(" ".join(f"{float(z.real)!r} {float(z.imag)!r}" for z in row))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")


def read_precoder(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: expected header 'N_T K'")
        n_tx, k = int(header[0]), int(header[1])
        f = np.empty((n_tx, k), dtype=complex)
        for i in range(n_tx):
            vals = [float(v) for v in fh.readline().split()]
            if len(vals) != 2 * k:
                raise ValueError(f"{path}: row {i + 1} has {len(vals)} values, expected {2 * k}")
            # viewing the interleaved pairs keeps signed zeros intact
            f[i] = np.array(vals, dtype=float).view(complex)
    return f
