"""Command-line pipelines: configuration in, reproducible artifacts out.

Every command reads one JSON config (--config) and writes its artifacts into
the output directory.  `full` chains simulate -> check-radiation ->
bloch-measure -> transmit -> validate and writes a manifest with content
hashes of every artifact.  With --threads 1 all CSV/JSON artifacts are
byte-reproducible; the manifest itself carries timings and is not.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bands import BasisProvider, isofrequency_contour
from .config import RunConfig, load_config
from .errors import ConfigError
from .expand import FieldStrip, bloch_coefficients
from .flux import BoxDomain, build_poynting_table
from .io import fmt, load_field_dump, save_field_dump, sha256_file, write_csv, write_json
from .radiation import (band_table, energy_balance, measure_from_coefficients,
                        measure_support_report, radiation_report,
                        truncated_box_coefficients)
from .solve import difference_solution, incident_field, residual_check, solve_scattering
from .transmission import refraction_report, transmitted_modes, validate_against_field

COMMANDS = ("bands", "isofreq", "poynting", "transmit", "simulate", "expand",
            "check-radiation", "bloch-measure", "validate", "full")


def _provider(cfg: RunConfig) -> BasisProvider:
    return BasisProvider(cfg.field, cfg.cutoff)


def _field_dump_path(out: Path) -> Path:
    return out / "field.json"


def _load_strip(out: Path) -> tuple[FieldStrip, dict]:
    path = _field_dump_path(out)
    if not path.exists():
        raise FileNotFoundError(f"no field dump at {path}; run `simulate` first")
    return load_field_dump(path)


def cmd_bands(cfg: RunConfig, out: Path, provider: BasisProvider, threads: int) -> list[Path]:
    R = max(cfg.R_sequence)
    rows = []
    for side in ("minus", "plus"):
        table = band_table(provider, side, R, cfg.bands_M)
        for r1 in range(R):
            for r2 in range(R):
                for m in range(cfg.bands_M):
                    rows.append([r1 / R, r2 / R, str(m), table[r1, r2, m], side])
    return [write_csv(out / "bands.csv", ["j1", "j2", "m", "mu", "side"], rows)]


def cmd_isofreq(cfg: RunConfig, out: Path, provider: BasisProvider, threads: int) -> list[Path]:
    rows = []
    for side in ("minus", "plus"):
        contours = isofrequency_contour(provider, side, 0, cfg.omega**2, cfg.grid_n)
        for cid, poly in enumerate(contours):
            for j1, j2 in poly:
                rows.append([str(cid), side, j1, j2])
    return [write_csv(out / "isofreq.csv", ["contour", "side", "j1", "j2"], rows)]


def cmd_poynting(cfg: RunConfig, out: Path, provider: BasisProvider, threads: int) -> list[Path]:
    R = max(cfg.R_sequence)
    tol = cfg.poynting_tol()
    rows = []
    for side in ("minus", "plus"):
        table = build_poynting_table(provider, side, R, cfg.bands_M)
        names = {1: "right", -1: "left", 0: "vertical"}
        cls = table.classifications(tol)
        for r1 in range(R):
            for r2 in range(R):
                for m in range(cfg.bands_M):
                    rows.append([r1 / R, r2 / R, str(m), side, table.values[r1, r2, m],
                                 names[int(cls[r1, r2, m])]])
    return [write_csv(out / "poynting.csv", ["j1", "j2", "m", "side", "P", "classification"],
                      rows)]


def cmd_simulate(cfg: RunConfig, out: Path, provider: BasisProvider, threads: int) -> list[Path]:
    scfg = cfg.scatter_config()
    t0 = time.perf_counter()
    u = solve_scattering(scfg, cfg.field)
    elapsed = time.perf_counter() - t0
    residual = residual_check(u, scfg, cfg.field)
    data_format = "npy" if "npy" in cfg.formats else "csv"
    paths = save_field_dump(out / "field", u, data_format=data_format,
                            extra={"omega": cfg.omega, "k": list(cfg.k)})
    balance = energy_balance(u, min(2 * cfg.K, max(cfg.R_sequence)), cfg.field,
                             residual=residual)
    run_info = {
        "grid": {"n1": u.samples.shape[0], "n2": u.samples.shape[1], "dx": u.dx},
        "residual": residual,
        "energy_balance": {"flux_left": balance.flux_left, "flux_right": balance.flux_right,
                           "defect": balance.defect},
        "elapsed_seconds": elapsed,
    }
    paths.append(write_json(out / "simulate_run.json", run_info))
    return paths


def cmd_expand(cfg: RunConfig, out: Path, provider: BasisProvider, threads: int) -> list[Path]:
    from .io import load_dump_raw
    path = _field_dump_path(out)
    samples, header = load_dump_raw(path)
    if header.get("kind") == "strip":
        strip = FieldStrip(samples=samples, epsilon=header["epsilon"], K=header["K"],
                           n_cell=header["n_cell"], x_lo=header["x_lo"])
        R = max(cfg.R_sequence)
        side = cfg.expand_side
        coeffs = truncated_box_coefficients(strip, side, R, cfg.bands_M, provider,
                                            cfg.cutoff_flavor)
    else:
        R = int(header["R"])
        side = header["side"]
        box = BoxDomain(R=R, epsilon=header["epsilon"], n_cell=header["n_cell"])
        coeffs = bloch_coefficients(samples, side, cfg.bands_M, provider, box)
    rows = []
    for r1 in range(coeffs.R):
        for r2 in range(coeffs.R):
            for m in range(coeffs.M):
                a = coeffs.alpha[r1, r2, m]
                rows.append([r1 / coeffs.R, r2 / coeffs.R, str(m), a.real, a.imag])
    out_csv = write_csv(out / "coefficients.csv", ["j1", "j2", "m", "re", "im"], rows)
    meta = write_json(out / "expand.json", {"R": coeffs.R, "side": side, "M": coeffs.M,
                                            "residual_mass": coeffs.residual_mass})
    return [out_csv, meta]


def cmd_check_radiation(cfg: RunConfig, out: Path, provider: BasisProvider,
                        threads: int) -> list[Path]:
    u, _ = _load_strip(out)
    scfg = cfg.scatter_config()
    refl = difference_solution(u, incident_field(scfg))
    tol = cfg.poynting_tol()

    def one(side_field):
        side, fieldstrip = side_field
        return radiation_report(fieldstrip, side, cfg.R_sequence, cfg.bands_M, provider,
                                tol, cfg.cutoff_flavor)

    jobs = [("plus", u), ("minus", refl)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(one, jobs))
    else:
        reports = [one(job) for job in jobs]
    payload = {
        "threshold": cfg.outgoing_threshold,
        "reports": [r.to_json_dict() for r in reports],
    }
    for report in payload["reports"]:
        for entry in report["entries"]:
            entry["outgoing_fraction"] = (entry["outgoing_metric"] / entry["total_mass"]
                                          if entry["total_mass"] > 0 else 0.0)
    return [write_json(out / "radiation.json", payload)]


def cmd_bloch_measure(cfg: RunConfig, out: Path, provider: BasisProvider,
                      threads: int) -> list[Path]:
    u, _ = _load_strip(out)
    rows = []
    measures = {}
    for R in cfg.R_sequence:
        coeffs = truncated_box_coefficients(u, "plus", R, cfg.bands_M, provider,
                                            cfg.cutoff_flavor)
        measures[R] = [measure_from_coefficients(coeffs, l) for l in range(cfg.bands_M)]
        for meas in measures[R]:
            for r1 in range(R):
                for r2 in range(R):
                    rows.append([r1 / R, r2 / R, str(meas.l), meas.atoms[r1, r2], str(R)])
    csv_path = write_csv(out / "measure.csv", ["j1", "j2", "l", "weight", "R"], rows)
    support = measure_support_report(measures, cfg.omega, cfg.k[1], provider,
                                     tol_freq=cfg.tol_freq, tol_vert=cfg.tol_vert,
                                     tol_P=cfg.tol_P)
    support_path = write_json(out / "support.json", {
        "omega": support.omega, "k2": support.k2, "per_R": support.per_R,
        "transport": support.transport, "empty": support.empty,
    })
    return [csv_path, support_path]


def cmd_transmit(cfg: RunConfig, out: Path, provider: BasisProvider, threads: int) -> list[Path]:
    cands = transmitted_modes(provider, cfg.omega, cfg.k[1], grid_n=cfg.grid_n)
    pred = refraction_report(cfg.k, cands, cfg.omega)
    payload = {
        "omega": pred.omega,
        "k": list(pred.k),
        "uniqueness": pred.uniqueness,
        "negative_refraction": pred.negative_refraction,
        "candidates": [{
            "j": list(c.j), "mu_defect": c.mu_defect,
            "group_velocity": list(c.group_velocity),
            "gv_from_differences": c.gv_from_differences,
            "P0": c.P0, "vertical_flux": c.vertical_flux,
            "negative": flag,
        } for c, flag in zip(pred.candidates, pred.per_candidate_negative)],
        "vertical_candidates": [{
            "j": list(c.j), "P0": c.P0} for c in pred.vertical_candidates],
    }
    return [write_json(out / "prediction.json", payload)]


def _prediction_from_json(payload: dict):
    from .transmission import Candidate, TransmissionPrediction
    cands = [Candidate(j=tuple(c["j"]), mu_defect=c["mu_defect"],
                       group_velocity=tuple(c["group_velocity"]),
                       gv_from_differences=c["gv_from_differences"], P0=c["P0"],
                       vertical_flux=c["vertical_flux"])
             for c in payload["candidates"]]
    return TransmissionPrediction(
        omega=payload["omega"], k=tuple(payload["k"]), candidates=cands,
        vertical_candidates=[], negative_refraction=payload["negative_refraction"],
        per_candidate_negative=[c.get("negative", False) for c in payload["candidates"]],
        uniqueness=payload["uniqueness"])


def cmd_validate(cfg: RunConfig, out: Path, provider: BasisProvider, threads: int) -> list[Path]:
    pred_payload = json.loads((out / "prediction.json").read_text())
    prediction = _prediction_from_json(pred_payload)
    rows = np.genfromtxt(out / "measure.csv", delimiter=",", names=True)
    R = max(cfg.R_sequence)
    sel = (rows["R"] == R) & (rows["l"] == 0)
    atoms = np.zeros((R, R))
    r1 = np.round(rows["j1"][sel] * R).astype(int)
    r2 = np.round(rows["j2"][sel] * R).astype(int)
    atoms[r1, r2] = rows["weight"][sel]
    from .radiation import DiscreteBlochMeasure
    meas = DiscreteBlochMeasure(l=0, side="plus", R=R, atoms=atoms, residual_mass=0.0,
                                field_mass=float(atoms.sum()))
    result = validate_against_field(prediction, meas)
    payload = {
        "peak_j": list(result.peak_j) if result.peak_j else None,
        "distance_to_prediction": result.distance_to_prediction,
        "mass_fraction_near_prediction": result.mass_fraction_near_prediction,
        "impossible": result.impossible,
        "R": R,
    }
    return [write_json(out / "validation.json", payload)]


_STAGES = {
    "bands": cmd_bands,
    "isofreq": cmd_isofreq,
    "poynting": cmd_poynting,
    "simulate": cmd_simulate,
    "expand": cmd_expand,
    "check-radiation": cmd_check_radiation,
    "bloch-measure": cmd_bloch_measure,
    "transmit": cmd_transmit,
    "validate": cmd_validate,
}


def cmd_full(cfg: RunConfig, out: Path, provider: BasisProvider, threads: int,
             config_path: str) -> list[Path]:
    artifacts: list[Path] = []
    timings: dict[str, float] = {}
    failure = None
    for stage in ("simulate", "check-radiation", "bloch-measure", "transmit", "validate"):
        t0 = time.perf_counter()
        try:
            artifacts.extend(_STAGES[stage](cfg, out, provider, threads))
        except Exception as exc:
            failure = f"{stage}: {exc}"
            break
        timings[stage] = time.perf_counter() - t0

    headline = {}
    try:
        if (out / "prediction.json").exists():
            pred = json.loads((out / "prediction.json").read_text())
            headline["negative_refraction"] = pred["negative_refraction"]
            headline["uniqueness"] = pred["uniqueness"]
        if (out / "radiation.json").exists():
            rad = json.loads((out / "radiation.json").read_text())
            for rep in rad["reports"]:
                headline[f"outgoing_fraction_{rep['side']}"] = \
                    rep["entries"][-1]["outgoing_fraction"]
        if (out / "support.json").exists():
            sup = json.loads((out / "support.json").read_text())
            headline["support_inside_fraction"] = sup["per_R"][-1]["inside_fraction"]
        if (out / "simulate_run.json").exists():
            run = json.loads((out / "simulate_run.json").read_text())
            headline["energy_balance_defect"] = run["energy_balance"]["defect"]
    except Exception as exc:  # headline extraction must not mask stage failures
        headline["extraction_error"] = str(exc)

    manifest = {
        "package_version": __version__,
        "config_sha256": hashlib.sha256(Path(config_path).read_bytes()).hexdigest(),
        "threads": threads,
        "timings": timings,
        "headline": headline,
        "artifacts": {p.name: sha256_file(p) for p in artifacts},
        "failure": failure,
    }
    manifest_path = write_json(out / "manifest.json", manifest)
    if failure is not None:
        raise RuntimeError(failure)
    return artifacts + [manifest_path]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="blochstrip",
        description="Bloch band structures, radiation-condition checks and "
                    "negative-refraction prediction for photonic-crystal strips.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory (default from config)")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for randomized property tests (recorded only)")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    out = Path(args.out) if args.out else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    provider = _provider(cfg)
    try:
        if args.command == "full":
            cmd_full(cfg, out, provider, args.threads, args.config)
        else:
            _STAGES[args.command](cfg, out, provider, args.threads)
    except Exception as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
