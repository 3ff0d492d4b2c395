"""Transmitted-mode prediction from the conserved-quantity conditions and
cross-validation against solver Bloch measures.

A transmitted candidate satisfies (a) the lowest band value equals omega^2,
(b) its vertical phase equals the incident vertical wave number (modulo the
cell), and (c) its group velocity points into the crystal.  Negative
refraction holds when the surviving candidate's vertical group velocity has
the sign opposite to the incident vertical wave number.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

from .bands import BasisProvider, group_velocity
from .flux import bloch_pair_flux
from .radiation import DiscreteBlochMeasure, circle_distance


@dataclass(frozen=True)
class Candidate:
    j: tuple[float, float]
    mu_defect: float
    group_velocity: tuple[float, float]
    gv_from_differences: bool
    P0: float
    vertical_flux: bool


@dataclass(frozen=True)
class TransmissionPrediction:
    omega: float
    k: tuple[float, float]
    candidates: list[Candidate]
    vertical_candidates: list[Candidate]
    negative_refraction: bool
    per_candidate_negative: list[bool]
    uniqueness: str  # unique | multiple | none


def _band0_on_line(provider: BasisProvider, j2: float, j1_values: np.ndarray) -> np.ndarray:
    pts = np.stack([j1_values, np.full_like(j1_values, j2)], axis=-1)
    return provider.band_on_points("plus", pts, 1)[:, 0]


def transmitted_modes(provider: BasisProvider, omega: float, k2: float,
                      grid_n: int = 256, tol_P: float | None = None) -> list[Candidate]:
    """All lowest-band candidates on the conserved vertical line.

    Scans j1 over [0,1) with periodic wrap, brackets sign changes of the band
    defect, bisects each root to |mu - omega^2| <= 1e-8 omega^2, and filters by
    the rightward group-velocity condition.  Vertical-flux candidates (|P|
    below tol_P) are flagged and excluded from refraction verdicts.
    """
    eps = provider.epsilon
    j2 = float(np.mod(k2 * eps, 1.0))
    omega_sq = omega**2
    if tol_P is None:
        tol_P = 0.02 * 2 * np.pi / eps
    grid = np.arange(grid_n) / grid_n
    vals = _band0_on_line(provider, j2, grid) - omega_sq
    roots: list[float] = []
    for i in range(grid_n):
        a = vals[i]
        b = vals[(i + 1) % grid_n]
        if a == 0.0:
            roots.append(float(grid[i]))
            continue
        if a * b < 0:
            lo, hi = grid[i], grid[i] + 1.0 / grid_n
            flo = float(a)
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                fm = _band0_on_line(provider, j2, np.array([np.mod(mid, 1.0)]))[0] - omega_sq
                if abs(fm) <= 1e-8 * omega_sq:
                    lo = hi = mid
                    break
                if (fm < 0) == (flo < 0):
                    lo, flo = mid, fm
                else:
                    hi = mid
            roots.append(float(np.mod(0.5 * (lo + hi), 1.0)))
    if not roots:
        logger.warning(
            "no on-shell roots on the line j2 = %.4f: omega^2 = %.4f lies outside "
            "the band range [%.4f, %.4f]", j2, omega_sq,
            float(vals.min() + omega_sq), float(vals.max() + omega_sq))
    out = []
    for r in roots:
        j = (r, j2)
        mu = _band0_on_line(provider, j2, np.array([r]))[0]
        gv, from_fd = group_velocity(provider, "plus", j, 0)
        if gv[0] <= 0:
            continue
        mode = provider.modes("plus", j, 1)[0]
        p0 = float(np.imag(bloch_pair_flux(mode, mode, provider.a_hat)))
        out.append(Candidate(j=j, mu_defect=float(mu - omega_sq),
                             group_velocity=(float(gv[0]), float(gv[1])),
                             gv_from_differences=bool(from_fd), P0=p0,
                             vertical_flux=bool(abs(p0) <= tol_P)))
    return out


def refraction_report(k, candidates: list[Candidate], omega: float) -> TransmissionPrediction:
    """Classify the refraction sign of the surviving candidates.

    The incident vertical group velocity carries the sign of k2 (free-space
    dispersion), so refraction is negative when a candidate's vertical group
    velocity has the opposite sign.  Normal incidence is never negative.
    """
    k = (float(k[0]), float(k[1]))
    main = [c for c in candidates if not c.vertical_flux]
    vertical = [c for c in candidates if c.vertical_flux]
    flags = []
    for c in main:
        if k[1] == 0.0:
            flags.append(False)
        else:
            flags.append(bool(np.sign(c.group_velocity[1]) == -np.sign(k[1])
                              and c.group_velocity[1] != 0.0))
    if len(main) == 0:
        uniqueness = "none"
    elif len(main) == 1:
        uniqueness = "unique"
    else:
        uniqueness = "multiple"
    negative = bool(uniqueness == "unique" and flags[0])
    return TransmissionPrediction(omega=omega, k=k, candidates=main,
                                  vertical_candidates=vertical,
                                  negative_refraction=negative,
                                  per_candidate_negative=flags, uniqueness=uniqueness)


@dataclass(frozen=True)
class MeasureValidation:
    peak_j: tuple[float, float] | None
    distance_to_prediction: float
    mass_fraction_near_prediction: float
    impossible: bool


def validate_against_field(prediction: TransmissionPrediction,
                           measure: DiscreteBlochMeasure,
                           tol: float | None = None) -> MeasureValidation:
    """Compare the dominant atom cluster of a level-0 measure with the
    predicted transmitted modes.

    The cluster is the mass-weighted circular centroid of atoms above 10% of
    the largest atom; `tol` (default 2/R) sets the near-prediction window for
    the mass fraction.
    """
    atoms = measure.atoms
    total = float(np.sum(atoms))
    if total <= 1e-14:
        return MeasureValidation(peak_j=None, distance_to_prediction=float("inf"),
                                 mass_fraction_near_prediction=0.0, impossible=True)
    if tol is None:
        tol = 2.0 / measure.R
    big = atoms >= 0.1 * atoms.max()
    nodes = measure.j_nodes()
    w = np.where(big, atoms, 0.0)

    def circular_centroid(values: np.ndarray, weights: np.ndarray) -> float:
        ang = np.exp(2j * np.pi * values)
        z = np.sum(weights * ang)
        return float(np.mod(np.angle(z) / (2 * np.pi), 1.0))

    peak = (circular_centroid(nodes[..., 0], w), circular_centroid(nodes[..., 1], w))
    if not prediction.candidates:
        return MeasureValidation(peak_j=peak, distance_to_prediction=float("inf"),
                                 mass_fraction_near_prediction=0.0, impossible=False)

    def dist(j, jt) -> float:
        return float(np.hypot(circle_distance(np.array(j[0]), jt[0]),
                              circle_distance(np.array(j[1]), jt[1])))

    best = min(dist(peak, c.j) for c in prediction.candidates)
    near = np.zeros_like(atoms, dtype=bool)
    for c in prediction.candidates:
        d = np.hypot(circle_distance(nodes[..., 0], c.j[0]),
                     circle_distance(nodes[..., 1], c.j[1]))
        near |= d <= tol
    frac = float(np.sum(atoms[near]) / total)
    return MeasureValidation(peak_j=peak, distance_to_prediction=best,
                             mass_fraction_near_prediction=frac, impossible=False)
