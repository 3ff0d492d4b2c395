"""Run configuration: one JSON document driving every pipeline command.

Validation is not fail-fast: all violations are collected and reported with
their field paths.  Unknown keys are rejected so typos cannot silently fall
back to defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import numpy as np

from .cell import CoefficientField, build_coefficient_field
from .errors import ConfigError
from .solve import ScatterConfig, SpongeSpec

_SECTIONS = {"geometry", "frequencies", "discretization", "radiation", "solver", "output"}

_KEYS = {
    "geometry": {"epsilon", "geometry"},
    "geometry.geometry": {"type", "value", "center", "radius", "a_inside", "a_outside",
                          "mollify", "values"},
    "frequencies": {"omega", "k"},
    "discretization": {"cutoff", "n_cell", "grid_n", "bands_M"},
    "radiation": {"R_sequence", "tol_P", "tol_freq", "tol_vert", "cutoff_flavor",
                  "outgoing_threshold", "expand_side"},
    "solver": {"K", "x_lo", "x_hi", "sponge", "tfsf_plane", "averaging"},
    "solver.sponge": {"width", "delta_max", "exponent"},
    "output": {"directory", "formats"},
}

_DEFAULTS = {
    "discretization": {"cutoff": 8, "n_cell": 18, "grid_n": 256, "bands_M": 4},
    "radiation": {"tol_P": None, "tol_freq": 0.05, "tol_vert": None,
                  "cutoff_flavor": "horizontal", "outgoing_threshold": 0.01,
                  "expand_side": "plus"},
    "solver": {"averaging": "arithmetic"},
    "output": {"directory": "out", "formats": ["csv", "json", "npy"]},
}


@dataclass
class RunConfig:
    raw: dict
    field: CoefficientField
    epsilon: float
    omega: float
    k: tuple[float, float]
    cutoff: int
    n_cell: int
    grid_n: int
    bands_M: int
    R_sequence: list[int]
    tol_P: float | None
    tol_freq: float
    tol_vert: float | None
    cutoff_flavor: str
    outgoing_threshold: float
    expand_side: str
    K: int
    x_lo: float
    x_hi: float
    sponge: SpongeSpec
    tfsf_plane: float
    averaging: str
    out_dir: str
    formats: list[str]

    def scatter_config(self) -> ScatterConfig:
        return ScatterConfig(omega=self.omega, k=self.k, epsilon=self.epsilon, K=self.K,
                             x_lo=self.x_lo, x_hi=self.x_hi, n_cell=self.n_cell,
                             sponge=self.sponge, tfsf_plane=self.tfsf_plane,
                             averaging=self.averaging,
                             analysis_R_max=max(self.R_sequence))

    def poynting_tol(self) -> float:
        if self.tol_P is not None:
            return self.tol_P
        return 1e-9 * 2 * np.pi / self.epsilon


def _check_keys(problems: list[str], obj: dict, path: str):
    allowed = _KEYS.get(path)
    if allowed is None:
        return
    for key in obj:
        if key not in allowed:
            problems.append(f"{path}.{key}: unknown key")


def load_config(path: str | Path) -> RunConfig:
    """Parse and fully validate a configuration file.

    Raises ConfigError carrying every violation found, or a json error with
    position information when the document itself does not parse.
    """
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"])
    return validate_config(raw)


def validate_config(raw: dict) -> RunConfig:
    problems: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be a JSON object"])
    for key in raw:
        if key not in _SECTIONS:
            problems.append(f"{key}: unknown section")
    for required in ("geometry", "frequencies", "solver"):
        if required not in raw:
            problems.append(f"{required}: section missing")
    if problems:
        raise ConfigError(problems)

    geo = raw.get("geometry", {})
    _check_keys(problems, geo, "geometry")
    epsilon = float(geo.get("epsilon", 1.0))
    if epsilon <= 0:
        problems.append("geometry.epsilon: must be positive")
    field = None
    geom_spec = geo.get("geometry")
    if not isinstance(geom_spec, dict):
        problems.append("geometry.geometry: missing geometry description")
    else:
        _check_keys(problems, geom_spec, "geometry.geometry")
        try:
            field = build_coefficient_field(geom_spec, epsilon=epsilon)
        except Exception as exc:
            problems.append(f"geometry.geometry: {exc}")

    freq = raw.get("frequencies", {})
    _check_keys(problems, freq, "frequencies")
    omega = float(freq.get("omega", 0.0))
    k_raw = freq.get("k", [0.0, 0.0])
    k = (float(k_raw[0]), float(k_raw[1]))
    if omega <= 0:
        problems.append("frequencies.omega: must be positive")
    else:
        mismatch = abs(4 * np.pi**2 * (k[0] ** 2 + k[1] ** 2) - omega**2)
        if mismatch > 1e-12 * omega**2:
            problems.append(
                f"frequencies.k: frequency-wavevector mismatch, 4 pi^2 |k|^2 - omega^2 = {mismatch:.3e}")
    if k[0] <= 0:
        problems.append("frequencies.k: incident wave must be right-going (k1 > 0)")

    disc = {**_DEFAULTS["discretization"], **raw.get("discretization", {})}
    _check_keys(problems, raw.get("discretization", {}), "discretization")
    cutoff = int(disc["cutoff"])
    n_cell = int(disc["n_cell"])
    grid_n = int(disc["grid_n"])
    bands_M = int(disc["bands_M"])
    if cutoff < 1:
        problems.append("discretization.cutoff: must be >= 1")
    if n_cell < 2 * cutoff + 2:
        problems.append(
            f"discretization.n_cell: must be >= 2*cutoff+2 = {2 * cutoff + 2} to avoid aliasing")
    if grid_n < 8:
        problems.append("discretization.grid_n: must be >= 8")
    if bands_M < 1:
        problems.append("discretization.bands_M: must be >= 1")

    sol = raw.get("solver", {})
    _check_keys(problems, sol, "solver")
    K = int(sol.get("K", 1))
    x_lo = float(sol.get("x_lo", -8.0))
    x_hi = float(sol.get("x_hi", 8.0))
    sponge_raw = {**{"width": 16.0, "delta_max": 2.0, "exponent": 3.0},
                  **sol.get("sponge", {})}
    _check_keys(problems, sol.get("sponge", {}), "solver.sponge")
    sponge = SpongeSpec(width=float(sponge_raw["width"]),
                        delta_max=float(sponge_raw["delta_max"]),
                        exponent=float(sponge_raw["exponent"]))
    tfsf_plane = float(sol.get("tfsf_plane", x_lo / 2))
    averaging = sol.get("averaging", _DEFAULTS["solver"]["averaging"])
    if K < 1:
        problems.append("solver.K: must be a positive integer")
    else:
        k2h = k[1] * K * epsilon
        if abs(k2h - round(k2h)) > 1e-12 * max(1.0, abs(k2h)):
            problems.append(
                f"frequencies.k: vertical periodicity violated, k2*h = {k2h} is not an integer")

    rad = {**_DEFAULTS["radiation"], **raw.get("radiation", {})}
    _check_keys(problems, raw.get("radiation", {}), "radiation")
    R_sequence = [int(r) for r in rad.get("R_sequence", [K, 2 * K, 4 * K])]
    if not R_sequence or any(r <= 0 for r in R_sequence):
        problems.append("radiation.R_sequence: must be positive integers")
    elif K >= 1:
        bad = [r for r in R_sequence if r % K != 0]
        if bad:
            problems.append(f"radiation.R_sequence: {bad} not multiples of K={K}")
        if sorted(R_sequence) != R_sequence:
            problems.append("radiation.R_sequence: must be ascending")
    if rad["cutoff_flavor"] not in ("horizontal", "square"):
        problems.append("radiation.cutoff_flavor: must be 'horizontal' or 'square'")
    if rad["expand_side"] not in ("plus", "minus"):
        problems.append("radiation.expand_side: must be 'plus' or 'minus'")

    if K >= 1 and R_sequence and all(r > 0 for r in R_sequence):
        r_max = max(R_sequence)
        need = 2 * r_max * epsilon
        if x_lo + sponge.width * epsilon > -need + 1e-9:
            problems.append(
                f"solver.x_lo: left sponge overlaps the analysis box [-2R eps, -R eps] for R={r_max}")
        if x_hi - sponge.width * epsilon < need - 1e-9:
            problems.append(
                f"solver.x_hi: right sponge overlaps the analysis box [R eps, 2R eps] for R={r_max}")

    out = {**_DEFAULTS["output"], **raw.get("output", {})}
    _check_keys(problems, raw.get("output", {}), "output")

    if problems:
        raise ConfigError(problems)

    cfg = RunConfig(raw=raw, field=field, epsilon=epsilon, omega=omega, k=k,
                    cutoff=cutoff, n_cell=n_cell, grid_n=grid_n, bands_M=bands_M,
                    R_sequence=R_sequence, tol_P=rad["tol_P"], tol_freq=float(rad["tol_freq"]),
                    tol_vert=rad["tol_vert"], cutoff_flavor=rad["cutoff_flavor"],
                    outgoing_threshold=float(rad["outgoing_threshold"]),
                    expand_side=rad["expand_side"], K=K, x_lo=x_lo, x_hi=x_hi,
                    sponge=sponge, tfsf_plane=tfsf_plane, averaging=averaging,
                    out_dir=out["directory"], formats=list(out["formats"]))
    try:
        cfg.scatter_config()
    except ConfigError as exc:
        raise ConfigError([f"solver: {v}" for v in exc.violations])
    return cfg
