"""Frequency-domain finite-difference solution of the strip transmission problem.

Five-point flux-form stencil with vertical periodic wrap, total-field /
scattered-field injection of the incident plane wave at a plane in the
free-space half, and limiting-absorption sponge bands (coefficient multiplied
by 1 + i*delta(x1)) toward both ends of the truncated strip.  The incident
wave is injected with the horizontal wavenumber that satisfies the *discrete*
dispersion relation, so the injection is exact on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np
import scipy.linalg

from .cell import CoefficientField
from .errors import ConfigError, GridError, SolverError, ValidationError
from .expand import FieldStrip


@dataclass(frozen=True)
class SpongeSpec:
    """Absorbing band: delta ramps from 0 to delta_max over `width` cells (in eps)."""

    width: float = 8.0
    delta_max: float = 0.5
    exponent: float = 2.0


@dataclass(frozen=True)
class ScatterConfig:
    omega: float
    k: tuple[float, float]
    epsilon: float = 1.0
    K: int = 1
    x_lo: float = -8.0
    x_hi: float = 8.0
    n_cell: int = 16
    sponge: SpongeSpec = dataclass_field(default_factory=SpongeSpec)
    tfsf_plane: float = -1.0
    averaging: str = "arithmetic"
    analysis_R_max: int | None = None

    def __post_init__(self):
        problems = []
        k = np.asarray(self.k, dtype=float)
        if self.omega <= 0:
            problems.append("omega must be positive")
        else:
            mismatch = abs(4 * np.pi**2 * float(k @ k) - self.omega**2)
            if mismatch > 1e-12 * self.omega**2:
                problems.append(
                    f"frequency-wavevector mismatch: 4 pi^2 |k|^2 differs from omega^2 by {mismatch:.3e}")
        if k[0] <= 0:
            problems.append("incident wave must be right-going (k1 > 0)")
        h = self.K * self.epsilon
        if self.K < 1 or self.epsilon <= 0:
            problems.append("need K >= 1 and epsilon > 0")
        else:
            k2h = k[1] * h
            if abs(k2h - round(k2h)) > 1e-12 * max(1.0, abs(k2h)):
                problems.append(f"vertical periodicity violated: k2*h = {k2h} is not an integer")
        if self.n_cell < 8:
            problems.append("n_cell must be at least 8 to resolve the cell")
        if self.x_lo >= self.tfsf_plane or self.tfsf_plane >= 0:
            problems.append("tfsf_plane must lie in the free-space half, inside the strip")
        elif self.tfsf_plane < self.x_lo + self.sponge.width * self.epsilon:
            problems.append("tfsf_plane must lie right of the left sponge band")
        if self.x_hi <= 0:
            problems.append("strip must extend into the crystal half (x_hi > 0)")
        if self.averaging not in ("arithmetic", "harmonic"):
            problems.append(f"unknown face averaging {self.averaging!r}")
        if self.omega > 0:
            dx = self.epsilon / self.n_cell
            if 2 * np.pi / self.omega < 10 * dx:
                problems.append(
                    f"grid under-resolves the wavelength: 2 pi/omega = {2 * np.pi / self.omega:.3f} "
                    f"needs dx <= {2 * np.pi / self.omega / 10:.4f}, have {dx:.4f}")
        if self.analysis_R_max is not None:
            ls = self.sponge.width * self.epsilon
            lo_edge = self.x_lo + ls
            hi_edge = self.x_hi - ls
            need = 2 * self.analysis_R_max * self.epsilon
            if lo_edge > -need or hi_edge < need:
                problems.append(
                    f"sponge overlaps the analysis boxes [R eps, 2 R eps] for R_max={self.analysis_R_max}")
        if problems:
            raise ConfigError(problems)

    @property
    def dx(self) -> float:
        return self.epsilon / self.n_cell

    def x1_nodes(self) -> np.ndarray:
        n1 = int(round((self.x_hi - self.x_lo) / self.dx)) + 1
        return self.x_lo + np.arange(n1) * self.dx

    def x2_nodes(self) -> np.ndarray:
        return np.arange(self.K * self.n_cell) * self.dx


def discrete_k1(cfg: ScatterConfig) -> float:
    """Horizontal wavenumber whose grid plane wave satisfies the 5-point stencil
    dispersion at (omega, k2) exactly."""
    dx = cfg.dx
    s2 = cfg.omega**2 * dx**2 / 4.0 - np.sin(np.pi * cfg.k[1] * dx) ** 2
    if not (0.0 < s2 <= 1.0):
        raise ValidationError("incident wave is evanescent or unresolvable on this grid")
    return float(np.arcsin(np.sqrt(s2)) / (np.pi * dx))


def incident_field(cfg: ScatterConfig) -> FieldStrip:
    """The injected incident wave exp(2 pi i (k1_h x1 + k2 x2)) on the strip grid."""
    k1h = discrete_k1(cfg)
    x1 = cfg.x1_nodes()
    x2 = cfg.x2_nodes()
    samples = np.exp(2j * np.pi * (k1h * x1[:, None] + cfg.k[1] * x2[None, :]))
    return FieldStrip(samples=samples, epsilon=cfg.epsilon, K=cfg.K, n_cell=cfg.n_cell,
                      x_lo=cfg.x_lo)


def _delta_profile(cfg: ScatterConfig, x1: np.ndarray) -> np.ndarray:
    ls = cfg.sponge.width * cfg.epsilon
    left_depth = np.clip((cfg.x_lo + ls - x1) / ls, 0.0, 1.0)
    right_depth = np.clip((x1 - (cfg.x_hi - ls)) / ls, 0.0, 1.0)
    depth = np.maximum(left_depth, right_depth)
    return cfg.sponge.delta_max * depth**cfg.sponge.exponent


def coefficient_on_strip(cfg: ScatterConfig, field: CoefficientField) -> np.ndarray:
    """a(x) at strip nodes: 1 on the left half, the periodic field for x1 >= 0."""
    x1 = cfg.x1_nodes()
    x2 = cfg.x2_nodes()
    a = np.ones((len(x1), len(x2)))
    right = x1 >= -1e-12
    if np.any(right):
        a[right, :] = field(x1[right][:, None], x2[None, :])
    return a


def _face(avg: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if avg == "harmonic":
        return 2.0 * a * b / (a + b)
    return 0.5 * (a + b)


@dataclass
class SparseComplexSystem:
    """Banded operator in LAPACK general-banded layout plus its right-hand side."""

    ab: np.ndarray
    rhs: np.ndarray
    n1: int
    n2: int
    bandwidth: int
    tfsf_index: int


def assemble_helmholtz(cfg: ScatterConfig, field: CoefficientField) -> SparseComplexSystem:
    """Banded system for the damped Helmholtz operator with TF/SF source terms."""
    x1 = cfg.x1_nodes()
    x2 = cfg.x2_nodes()
    n1, n2 = len(x1), len(x2)
    dx = cfg.dx
    # With the e^{-i omega t} convention, absorption of outgoing waves needs a
    # negative imaginary coefficient part; +i delta would act as gain.
    a = coefficient_on_strip(cfg, field).astype(complex)
    a *= (1.0 - 1j * _delta_profile(cfg, x1))[:, None]

    # face coefficients; aW[i] couples column i to column i-1, aS[.., i2] couples
    # row i2 to i2-1 (vertical wrap is periodic)
    aW = np.zeros((n1, n2), dtype=complex)
    aW[1:] = _face(cfg.averaging, a[:-1], a[1:])
    aE = np.zeros((n1, n2), dtype=complex)
    aE[:-1] = aW[1:]
    aS = _face(cfg.averaging, np.roll(a, 1, axis=1), a)
    aN = np.roll(aS, -1, axis=1)

    inv = 1.0 / dx**2
    diag = (aW + aE + aS + aN) * inv - cfg.omega**2
    # Dirichlet walls at the strip ends
    diag[0, :] = 1.0
    diag[-1, :] = 1.0
    for arr in (aW, aE, aS, aN):
        arr[0, :] = 0.0
        arr[-1, :] = 0.0

    N = n1 * n2
    bw = n2
    ab = np.zeros((2 * bw + 1, N), dtype=complex)

    def put(row_idx, col_idx, vals):
        ab[bw + row_idx - col_idx, col_idx] = vals

    idx = np.arange(N).reshape(n1, n2)
    put(idx, idx, diag)
    # horizontal couplings
    put(idx[1:], idx[:-1], -aW[1:] * inv)
    put(idx[:-1], idx[1:], -aE[:-1] * inv)
    # vertical couplings with periodic wrap
    put(idx, np.roll(idx, 1, axis=1), -aS * inv)
    put(idx, np.roll(idx, -1, axis=1), -aN * inv)

    # TF/SF corrections on the links crossing the injection plane
    i_p = int(np.searchsorted(x1, cfg.tfsf_plane - 1e-12))
    if not (1 <= i_p < n1 - 1):
        raise ConfigError(["tfsf_plane falls outside the interior of the grid"])
    k1h = discrete_k1(cfg)

    def u_inc(i1):
        return np.exp(2j * np.pi * (k1h * x1[i1] + cfg.k[1] * x2))

    rhs = np.zeros(N, dtype=complex)
    face = aW[i_p]  # link between columns i_p-1 and i_p
    rhs_block = rhs.reshape(n1, n2)
    rhs_block[i_p] += face * inv * u_inc(i_p - 1)
    rhs_block[i_p - 1] -= face * inv * u_inc(i_p)

    return SparseComplexSystem(ab=ab, rhs=rhs, n1=n1, n2=n2, bandwidth=bw, tfsf_index=i_p)


def solve_scattering(cfg: ScatterConfig, field: CoefficientField) -> FieldStrip:
    """Total field on the strip for the incident plane wave of `cfg`."""
    system = assemble_helmholtz(cfg, field)
    try:
        sol = scipy.linalg.solve_banded((system.bandwidth, system.bandwidth),
                                        system.ab, system.rhs)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(
            f"banded factorization failed ({exc}); consider increasing sponge delta_max") from exc
    if not np.all(np.isfinite(sol)):
        raise SolverError("linear solve produced non-finite values; increase delta_max")
    u = sol.reshape(system.n1, system.n2)
    # the matrix unknowns are scattered field left of the plane: add the incident
    inc = incident_field(cfg)
    u[: system.tfsf_index] += inc.samples[: system.tfsf_index]
    return FieldStrip(samples=u, epsilon=cfg.epsilon, K=cfg.K, n_cell=cfg.n_cell, x_lo=cfg.x_lo)


def analysis_mask(cfg: ScatterConfig, pad_cells: int = 2) -> np.ndarray:
    """Columns where the undamped equation should hold: outside sponges, away
    from the TF/SF plane and the Dirichlet walls."""
    x1 = cfg.x1_nodes()
    ls = cfg.sponge.width * cfg.epsilon
    pad = pad_cells * cfg.dx
    mask = (x1 > cfg.x_lo + ls + pad) & (x1 < cfg.x_hi - ls - pad)
    mask &= np.abs(x1 - cfg.tfsf_plane) > 2.5 * cfg.dx
    mask[[0, -1]] = False
    return mask


def apply_operator(u: FieldStrip, cfg: ScatterConfig, field: CoefficientField) -> np.ndarray:
    """Undamped discrete flux-form operator applied to a strip field."""
    if u.samples.shape != (len(cfg.x1_nodes()), len(cfg.x2_nodes())):
        raise GridError("field grid does not match the configuration grid")
    a = coefficient_on_strip(cfg, field)
    aW = np.zeros_like(a)
    aW[1:] = _face(cfg.averaging, a[:-1], a[1:])
    aE = np.zeros_like(a)
    aE[:-1] = aW[1:]
    aS = _face(cfg.averaging, np.roll(a, 1, axis=1), a)
    aN = np.roll(aS, -1, axis=1)
    s = u.samples
    out = np.zeros_like(s)
    inv = 1.0 / cfg.dx**2
    out[1:-1] = (aW[1:-1] * (s[1:-1] - s[:-2]) + aE[1:-1] * (s[1:-1] - s[2:])) * inv
    out += (aS * (s - np.roll(s, 1, axis=1)) + aN * (s - np.roll(s, -1, axis=1))) * inv
    return out


def residual_check(u: FieldStrip, cfg: ScatterConfig, field: CoefficientField) -> float:
    """Max relative defect of L0 u = omega^2 u over the analysis region."""
    lu = apply_operator(u, cfg, field)
    defect = np.abs(lu - cfg.omega**2 * u.samples)
    mask = analysis_mask(cfg)
    scale = cfg.omega**2 * max(float(np.max(np.abs(u.samples[mask]))), 1e-300)
    return float(np.max(defect[mask]) / scale)


def difference_solution(u1: FieldStrip, u2: FieldStrip) -> FieldStrip:
    """Pointwise difference of two solutions on identical grids."""
    if u1.samples.shape != u2.samples.shape or abs(u1.x_lo - u2.x_lo) > 1e-12 \
            or u1.n_cell != u2.n_cell or u1.K != u2.K or abs(u1.epsilon - u2.epsilon) > 1e-12:
        raise GridError("solution grids differ")
    return FieldStrip(samples=u1.samples - u2.samples, epsilon=u1.epsilon, K=u1.K,
                      n_cell=u1.n_cell, x_lo=u1.x_lo)
