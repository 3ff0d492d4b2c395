"""Deterministic figure rendering from blochstrip artifact files.

Every kind reads only documented columns; a missing column raises SchemaError
naming it.  Figures are written through the Agg backend with fixed size and
dpi, so byte-identical inputs give byte-identical PNGs.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

KINDS = ("bands", "isofreq", "measure", "radiation-decay", "field-magnitude")

SIDE_COLORS = {"minus": "tab:blue", "plus": "tab:red"}


class SchemaError(ValueError):
    """An input file does not carry the documented columns or keys."""


def read_csv_columns(path: str, required: list[str]) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        for column in required:
            if column not in header:
                raise SchemaError(f"{path}: missing column {column!r}")
        rows = list(reader)
    out: dict[str, np.ndarray] = {}
    for column in header:
        idx = header.index(column)
        values = [row[idx] for row in rows]
        try:
            out[column] = np.array([float(v) for v in values])
        except ValueError:
            out[column] = np.array(values)
    return out


def _new_figure():
    return plt.figure(figsize=(6.4, 4.8), dpi=120)


def _finish(fig, out_path: str):
    fig.tight_layout()
    fig.savefig(out_path, format="png", metadata={"Software": "blochstrip-plots"})
    plt.close(fig)


def _sorted_unique(values: np.ndarray) -> np.ndarray:
    return np.unique(values)


def render_bands(inputs: list[str], out_path: str):
    data = read_csv_columns(inputs[0], ["j1", "j2", "m", "mu", "side"])
    fig = _new_figure()
    ax = fig.add_subplot(111)
    for side in ("minus", "plus"):
        sel_side = data["side"] == side
        if not np.any(sel_side):
            continue
        j2_line = data["j2"][sel_side].min()
        for m in _sorted_unique(data["m"][sel_side]):
            sel = sel_side & (data["m"] == m) & (data["j2"] == j2_line)
            order = np.argsort(data["j1"][sel])
            ax.plot(data["j1"][sel][order], data["mu"][sel][order],
                    color=SIDE_COLORS[side], alpha=0.35 + 0.1 * min(int(m), 4),
                    lw=1.2, label=f"{side}, band {int(m)}" if m < 2 else None)
    ax.set_xlabel("phase j1 (along j2 = const)")
    ax.set_ylabel("band value")
    ax.set_title("band structure along the first grid row")
    ax.legend(loc="upper right", fontsize=8)
    _finish(fig, out_path)


def _load_prediction(paths: list[str]) -> dict | None:
    for path in paths:
        if path.endswith(".json"):
            payload = json.loads(Path(path).read_text())
            if "candidates" in payload:
                return payload
    return None


def render_isofreq(inputs: list[str], out_path: str):
    contour_csv = next(p for p in inputs if p.endswith(".csv"))
    data = read_csv_columns(contour_csv, ["contour", "side", "j1", "j2"])
    prediction = _load_prediction(inputs)
    fig = _new_figure()
    ax = fig.add_subplot(111)
    for side in ("minus", "plus"):
        sel_side = data["side"] == side
        for cid in _sorted_unique(data["contour"][sel_side]):
            sel = sel_side & (data["contour"] == cid)
            ax.plot(data["j1"][sel], data["j2"][sel], color=SIDE_COLORS[side], lw=1.0)
    if prediction is not None:
        for cand in prediction.get("candidates", []):
            j = cand["j"]
            ax.axhline(j[1], color="gray", ls="--", lw=0.8)
            ax.plot([j[0]], [j[1]], marker="*", color="black", ms=12)
            gv = cand.get("group_velocity")
            if gv:
                norm = float(np.hypot(*gv))
                if norm > 0:
                    ax.annotate("", xy=(j[0] + 0.08 * gv[0] / norm,
                                        j[1] + 0.08 * gv[1] / norm),
                                xytext=(j[0], j[1]),
                                arrowprops={"arrowstyle": "->", "color": "black"})
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
    ax.set_xlabel("j1")
    ax.set_ylabel("j2")
    ax.set_title("isofrequency contours with conserved line and candidates")
    _finish(fig, out_path)


def render_measure(inputs: list[str], out_path: str):
    measure_csv = next(p for p in inputs if p.endswith("measure.csv"))
    data = read_csv_columns(measure_csv, ["j1", "j2", "l", "weight", "R"])
    fig = _new_figure()
    ax = fig.add_subplot(111)
    r_max = data["R"].max()
    sel = (data["R"] == r_max) & (data["l"] == 0) & (data["weight"] > 0)
    weights = data["weight"][sel]
    if weights.size:
        scale = 220.0 / weights.max()
        ax.scatter(data["j1"][sel], data["j2"][sel], s=np.maximum(weights * scale, 1.0),
                   c="tab:red", alpha=0.7, edgecolors="none")
    contour_inputs = [p for p in inputs if p.endswith("isofreq.csv")]
    if contour_inputs:
        contours = read_csv_columns(contour_inputs[0], ["contour", "side", "j1", "j2"])
        sel_side = contours["side"] == "plus"
        for cid in _sorted_unique(contours["contour"][sel_side]):
            csel = sel_side & (contours["contour"] == cid)
            ax.plot(contours["j1"][csel], contours["j2"][csel], color="tab:blue", lw=0.8)
    prediction = _load_prediction(inputs)
    if prediction is not None:
        for cand in prediction.get("candidates", []):
            ax.plot([cand["j"][0]], [cand["j"][1]], marker="*", color="black", ms=12)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
    ax.set_xlabel("j1")
    ax.set_ylabel("j2")
    ax.set_title(f"level-0 measure atoms at R = {int(r_max)}")
    _finish(fig, out_path)


def render_radiation_decay(inputs: list[str], out_path: str):
    payload = json.loads(Path(inputs[0]).read_text())
    if "reports" not in payload:
        raise SchemaError(f"{inputs[0]}: missing key 'reports'")
    fig = _new_figure()
    ax = fig.add_subplot(111)
    for report in payload["reports"]:
        side = report["side"]
        rs = [entry["R"] for entry in report["entries"]]
        for key, style in (("outgoing_metric", "-o"), ("outgoing_metric_leq", "--s"),
                           ("m_ge1_mass", ":^")):
            vals = [max(entry[key], 1e-16) for entry in report["entries"]]
            ax.semilogy(rs, vals, style, color=SIDE_COLORS[side], ms=4,
                        label=f"{side}: {key}")
    ax.set_xlabel("box order R")
    ax.set_ylabel("weighted mass")
    ax.set_title("radiation metrics over the box sequence")
    ax.legend(fontsize=7)
    _finish(fig, out_path)


def render_field_magnitude(inputs: list[str], out_path: str):
    header_path = Path(inputs[0])
    header = json.loads(header_path.read_text())
    for key in ("data_file", "data_format", "shape", "x_lo", "epsilon", "n_cell"):
        if key not in header:
            raise SchemaError(f"{inputs[0]}: missing key {key!r}")
    data_path = header_path.parent / header["data_file"]
    if header["data_format"] == "npy":
        samples = np.load(data_path)
    else:
        table = np.loadtxt(data_path, delimiter=",", skiprows=1)
        samples = (table[:, 0] + 1j * table[:, 1]).reshape(header["shape"])
    dx = header["epsilon"] / header["n_cell"]
    x_hi = header["x_lo"] + (samples.shape[0] - 1) * dx
    fig = _new_figure()
    ax = fig.add_subplot(111)
    img = ax.imshow(np.abs(samples).T, origin="lower", aspect="auto",
                    extent=(header["x_lo"], x_hi, 0.0, samples.shape[1] * dx),
                    cmap="magma")
    fig.colorbar(img, ax=ax, label="|u|")
    ax.axvline(0.0, color="white", lw=0.8, ls="--")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_title("field magnitude on the strip")
    _finish(fig, out_path)


_RENDERERS = {
    "bands": render_bands,
    "isofreq": render_isofreq,
    "measure": render_measure,
    "radiation-decay": render_radiation_decay,
    "field-magnitude": render_field_magnitude,
}


def render_job(kind: str, inputs: list[str], out_path: str):
    """Render one figure of the given kind from artifact paths."""
    if kind not in _RENDERERS:
        raise SchemaError(f"unknown plot kind {kind!r}; choose from {KINDS}")
    for path in inputs:
        if not Path(path).exists():
            raise FileNotFoundError(path)
    _RENDERERS[kind](inputs, out_path)
    return out_path
