"""Field dumps and tabular artifacts: stable file contracts for the CLI.

A field dump is a JSON header next to a data file (binary .npy or CSV of
re,im samples).  Strip dumps carry the grid placement (K, x_lo); box dumps
carry the box order R and side.  CSV written here uses shortest round-trip
float formatting so byte-identical reruns are possible.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .expand import FieldStrip


def fmt(x) -> str:
    """Shortest decimal that round-trips the double."""
    return repr(float(x))


def save_field_dump(path: Path, u: FieldStrip, data_format: str = "npy",
                    extra: dict | None = None) -> list[Path]:
    """Write <path>.json header plus <path>.npy or <path>.csv samples."""
    path = Path(path)
    header = {
        "kind": "strip",
        "epsilon": u.epsilon,
        "K": u.K,
        "n_cell": u.n_cell,
        "x_lo": u.x_lo,
        "shape": list(u.samples.shape),
        "data_format": data_format,
        "data_file": path.name + ("." + ("npy" if data_format == "npy" else "csv")),
    }
    if extra:
        header.update(extra)
    header_path = path.with_suffix(".json")
    data_path = path.parent / header["data_file"]
    header_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    if data_format == "npy":
        np.save(data_path, u.samples)
    elif data_format == "csv":
        with open(data_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["re", "im"])
            flat = u.samples.ravel()
            for z in flat:
                writer.writerow([fmt(z.real), fmt(z.imag)])
    else:
        raise ValidationError(f"unknown dump format {data_format!r}")
    return [header_path, data_path]


def save_box_dump(path: Path, samples: np.ndarray, R: int, epsilon: float,
                  n_cell: int, side: str, data_format: str = "npy") -> list[Path]:
    """Write a W_R box field dump: header {R, epsilon, n_cell, side} plus data."""
    path = Path(path)
    header = {
        "kind": "box",
        "R": R,
        "epsilon": epsilon,
        "n_cell": n_cell,
        "side": side,
        "shape": list(samples.shape),
        "data_format": data_format,
        "data_file": path.name + ("." + ("npy" if data_format == "npy" else "csv")),
    }
    header_path = path.with_suffix(".json")
    data_path = path.parent / header["data_file"]
    header_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    if data_format == "npy":
        np.save(data_path, samples)
    else:
        with open(data_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["re", "im"])
            for z in samples.ravel():
                writer.writerow([fmt(z.real), fmt(z.imag)])
    return [header_path, data_path]


def load_dump_raw(header_path: Path) -> tuple[np.ndarray, dict]:
    """Read any field dump (strip or box) as raw samples plus its header."""
    header_path = Path(header_path)
    header = json.loads(header_path.read_text())
    data_path = header_path.parent / header["data_file"]
    if header["data_format"] == "npy":
        samples = np.load(data_path)
    else:
        table = np.loadtxt(data_path, delimiter=",", skiprows=1)
        samples = (table[:, 0] + 1j * table[:, 1]).reshape(header["shape"])
    return samples, header


def load_field_dump(header_path: Path) -> tuple[FieldStrip, dict]:
    samples, header = load_dump_raw(header_path)
    if header.get("kind") != "strip":
        raise ValidationError(f"{header_path} is not a strip field dump")
    strip = FieldStrip(samples=samples, epsilon=header["epsilon"], K=header["K"],
                       n_cell=header["n_cell"], x_lo=header["x_lo"])
    return strip, header


def write_csv(path: Path, columns: list[str], rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([cell if isinstance(cell, str) else fmt(cell) for cell in row])
    return path


def write_json(path: Path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(Path(path).read_bytes())
    return digest.hexdigest()
