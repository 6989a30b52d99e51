"""Dataset files.

Spectral and calibration data are CSV with header ``energy,count``; factor
data are a wide CSV with header ``y1..yp`` and one row per observation. Each
dataset can carry a provenance JSON next to it recording how it was made.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import InvalidParams

__all__ = [
    "save_counts",
    "load_counts",
    "save_matrix",
    "load_matrix",
    "save_provenance",
    "load_provenance",
]


def _header(path) -> list:
    with open(path) as fh:
        return fh.readline().strip().split(",")


def save_counts(path, E, counts) -> None:
    E = np.asarray(E, dtype=float)
    counts = np.asarray(counts, dtype=np.int64)
    if E.shape != counts.shape:
        raise InvalidParams("energy and count columns differ in length")
    with open(path, "w", newline="") as fh:
        fh.write("energy,count\n")
        for e, c in zip(E, counts):
            fh.write(f"{e:.17g},{c:d}\n")


def load_counts(path):
    """Read an ``energy,count`` file.

    Returns
    -------
    E : numpy.ndarray of float
    counts : numpy.ndarray of int64
    """
    header = _header(path)
    if header != ["energy", "count"]:
        raise InvalidParams(f"{path}: expected header energy,count, got {','.join(header)}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    counts = data[:, 1]
    if np.any(counts != np.round(counts)) or np.any(counts < 0):
        raise InvalidParams(f"{path}: counts must be non-negative integers")
    return data[:, 0].copy(), counts.astype(np.int64)


def save_matrix(path, Y, prefix: str = "y") -> None:
    Y = np.asarray(Y, dtype=float)
    header = ",".join(f"{prefix}{j + 1}" for j in range(Y.shape[1]))
    np.savetxt(path, Y, fmt="%.17g", delimiter=",", header=header, comments="")


def load_matrix(path) -> np.ndarray:
    _header(path)
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def save_provenance(path, **fields) -> None:
    Path(path).write_text(json.dumps(fields, indent=2, sort_keys=True, default=_plain) + "\n")


def load_provenance(path) -> dict:
    return json.loads(Path(path).read_text())


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")
