"""Regenerate the shipped run configurations (frozen numeric values)."""
import json
import math
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent.parent / "src" / "blochstrip" / "configs"
HERE.mkdir(parents=True, exist_ok=True)


def dump(name, payload):
    (HERE / name).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print("wrote", HERE / name)


# --- rod transmission (oblique incidence, mid-band) ---
omega_sq = 4.1
k2 = -0.25
k1 = math.sqrt(omega_sq / (4 * math.pi**2) - k2**2)
dump("rod_transmission.json", {
    "geometry": {"epsilon": 1.0, "geometry": {
        "type": "rod", "center": [0.5, 0.5], "radius": 0.3,
        "a_inside": 0.25, "a_outside": 1.0, "mollify": 0.15}},
    "frequencies": {"omega": math.sqrt(omega_sq), "k": [k1, k2]},
    "discretization": {"cutoff": 6, "n_cell": 16, "grid_n": 256, "bands_M": 4},
    "radiation": {"R_sequence": [4, 8, 16]},
    "solver": {"K": 4, "x_lo": -58.0, "x_hi": 58.0,
               "sponge": {"width": 24.0, "delta_max": 2.0, "exponent": 3.0},
               "tfsf_plane": -33.0},
    "output": {"directory": "out_rod", "formats": ["csv", "json", "npy"]},
})

# --- band-edge support run (normal incidence, weak rod, K=1) ---
import sys
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))
from blochstrip.cell import build_coefficient_field
from blochstrip.bands import BasisProvider

rod6 = build_coefficient_field({"type": "rod", "center": [0.5, 0.5], "radius": 0.3,
                                "a_inside": 0.6, "a_outside": 1.0, "mollify": 0.15})
prov = BasisProvider(rod6, 5)
osq = float(prov.band_on_points("plus", np.array([(31 / 64, 0.0)]), 1)[0, 0])
omega = math.sqrt(osq)
dump("support_band_edge.json", {
    "geometry": {"epsilon": 1.0, "geometry": {
        "type": "rod", "center": [0.5, 0.5], "radius": 0.3,
        "a_inside": 0.6, "a_outside": 1.0, "mollify": 0.15}},
    "frequencies": {"omega": omega, "k": [omega / (2 * math.pi), 0.0]},
    "discretization": {"cutoff": 5, "n_cell": 16, "grid_n": 256, "bands_M": 4},
    "radiation": {"R_sequence": [32, 64]},
    "solver": {"K": 1, "x_lo": -156.0, "x_hi": 156.0,
               "sponge": {"width": 24.0, "delta_max": 2.0, "exponent": 3.0},
               "tfsf_plane": -131.0},
    "output": {"directory": "out_support", "formats": ["csv", "json", "npy"]},
})

# --- negative refraction (diagonal laminate, K=8) ---
n = 64
c = (np.arange(n) + 0.5) / n
x1, x2 = np.meshgrid(c, c, indexing="ij")
values = np.exp(3.0 * (np.cos(2 * np.pi * (x1 - x2)) - 1) / 2)
osq = 1.275
k2 = -0.125
k1 = math.sqrt(osq / (4 * math.pi**2) - k2**2)
dump("negative_refraction.json", {
    "geometry": {"epsilon": 1.0, "geometry": {
        "type": "grid", "values": [[float(v) for v in row] for row in values]}},
    "frequencies": {"omega": math.sqrt(osq), "k": [k1, k2]},
    "discretization": {"cutoff": 5, "n_cell": 12, "grid_n": 128, "bands_M": 3},
    "radiation": {"R_sequence": [8, 16]},
    "solver": {"K": 8, "x_lo": -66.0, "x_hi": 66.0,
               "sponge": {"width": 32.0, "delta_max": 2.0, "exponent": 3.0},
               "tfsf_plane": -33.0},
    "output": {"directory": "out_negref", "formats": ["csv", "json", "npy"]},
})

# --- minimal free-space config ---
k1 = 0.25
dump("free_space.json", {
    "geometry": {"epsilon": 1.0, "geometry": {"type": "constant", "value": 1.0}},
    "frequencies": {"omega": 2 * math.pi * k1, "k": [k1, 0.0]},
    "discretization": {"cutoff": 4, "n_cell": 16, "grid_n": 128, "bands_M": 4},
    "radiation": {"R_sequence": [2, 4]},
    "solver": {"K": 2, "x_lo": -26.0, "x_hi": 26.0,
               "sponge": {"width": 16.0, "delta_max": 3.0, "exponent": 3.0},
               "tfsf_plane": -9.0},
    "output": {"directory": "out_free", "formats": ["csv", "json", "npy"]},
})
