"""Pre-Bloch and Bloch expansions on strips and boxes, with projections.

The strip grid is node-based (x = i * eps/n_cell, no duplicated periodic row).
On a box W_R the 2D FFT bin kappa splits uniquely as kappa = G*R + r with
r = kappa mod R, which identifies the bin with the phase vector j = r/R and
the plane-wave index G; expansions and their inverses ride on that splitting.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .bands import BasisProvider
from .errors import GridError, NumericError, ValidationError
from .flux import BoxDomain, PoyntingTable


@dataclass(frozen=True)
class FieldStrip:
    """Complex samples on [x_lo, x_hi] x [0, h), h = K*eps, vertically periodic.

    samples[i1, i2] sits at (x_lo + i1*dx, i2*dx) with dx = eps/n_cell.
    """

    samples: np.ndarray
    epsilon: float
    K: int
    n_cell: int
    x_lo: float

    def __post_init__(self):
        if self.samples.ndim != 2:
            raise GridError("strip samples must be a 2D array")
        if self.samples.shape[1] != self.K * self.n_cell:
            raise GridError(
                f"strip has {self.samples.shape[1]} rows, expected K*n_cell = {self.K * self.n_cell}")

    @property
    def dx(self) -> float:
        return self.epsilon / self.n_cell

    @property
    def h(self) -> float:
        return self.K * self.epsilon

    @property
    def x_hi(self) -> float:
        return self.x_lo + (self.samples.shape[0] - 1) * self.dx

    def x1_nodes(self) -> np.ndarray:
        return self.x_lo + np.arange(self.samples.shape[0]) * self.dx

    def x2_nodes(self) -> np.ndarray:
        return np.arange(self.samples.shape[1]) * self.dx

    def column_index(self, x1: float) -> int:
        idx = (x1 - self.x_lo) / self.dx
        r = int(round(idx))
        if abs(idx - r) > 1e-8:
            raise GridError(f"x1 = {x1} is not on the strip grid")
        if not (0 <= r < self.samples.shape[0]):
            raise GridError(f"x1 = {x1} lies outside the strip extent")
        return r


@dataclass(frozen=True)
class PreBlochExpansion:
    """Vertical decomposition u = sum_{j2 in Q_K} Phi_{j2}(x) exp(2 pi i j2 x2 / eps)."""

    K: int
    epsilon: float
    n_cell: int
    x_lo: float
    coefficients: dict[int, np.ndarray]  # r -> Phi array for j2 = r/K

    def reconstruct(self) -> np.ndarray:
        n1, n2 = next(iter(self.coefficients.values())).shape
        x2 = np.arange(n2) * (self.epsilon / self.n_cell)
        out = np.zeros((n1, n2), dtype=complex)
        for r, phi in self.coefficients.items():
            out += phi * np.exp(2j * np.pi * (r / self.K) * x2 / self.epsilon)[None, :]
        return out


def _vertical_bin_masks(n2: int, K: int) -> list[np.ndarray]:
    kappa = np.arange(n2)
    return [(kappa % K) == r for r in range(K)]


def vertical_pre_bloch(u: FieldStrip) -> PreBlochExpansion:
    """Exact vertical splitting into eps-periodic components with phase shifts."""
    n2 = u.samples.shape[1]
    if n2 % u.K != 0:
        raise GridError(f"vertical sample count {n2} not divisible by K={u.K}")
    spec = np.fft.fft(u.samples, axis=1)
    x2 = u.x2_nodes()
    coeffs: dict[int, np.ndarray] = {}
    for r, mask in enumerate(_vertical_bin_masks(n2, u.K)):
        part = np.where(mask[None, :], spec, 0.0)
        proj = np.fft.ifft(part, axis=1)
        coeffs[r] = proj * np.exp(-2j * np.pi * (r / u.K) * x2 / u.epsilon)[None, :]
    return PreBlochExpansion(K=u.K, epsilon=u.epsilon, n_cell=u.n_cell, x_lo=u.x_lo,
                             coefficients=coeffs)


def _vertical_index(k2: float, K: int) -> int:
    r = k2 * K
    ri = int(round(r))
    if abs(r - ri) > 1e-9 or not (0 <= ri < K):
        raise ValidationError(f"vertical wave number {k2} is not in Q_{K}")
    return ri


def vertical_projection(u: FieldStrip, k2: float) -> FieldStrip:
    """Component of u with vertical phase shift k2 in Q_K (orthogonal projection)."""
    r = _vertical_index(k2, u.K)
    spec = np.fft.fft(u.samples, axis=1)
    mask = _vertical_bin_masks(u.samples.shape[1], u.K)[r]
    proj = np.fft.ifft(np.where(mask[None, :], spec, 0.0), axis=1)
    return replace(u, samples=proj)


def extend_and_expand(u: FieldStrip, R: int) -> PreBlochExpansion:
    """Pre-Bloch expansion of the vertical periodic extension onto Q_R."""
    if R % u.K != 0:
        raise GridError(f"R={R} must be a multiple of K={u.K}")
    reps = R // u.K
    tiled = replace(u, samples=np.tile(u.samples, (1, reps)), K=R)
    return vertical_pre_bloch(tiled)


@dataclass(frozen=True)
class BlochCoefficients:
    """Expansion coefficients on W_R: alpha[r1, r2, m] for j = (r1/R, r2/R)."""

    R: int
    side: str
    M: int
    epsilon: float
    n_cell: int
    alpha: np.ndarray
    residual_mass: float

    def total_mass(self) -> float:
        return float(np.sum(np.abs(self.alpha) ** 2) + self.residual_mass)

    def coefficient_mass(self) -> float:
        return float(np.sum(np.abs(self.alpha) ** 2))


def _check_mode_bandwidth(provider: BasisProvider, n_cell: int):
    if provider.cutoff > n_cell // 2 - 1:
        raise GridError(
            f"box grid with n_cell={n_cell} aliases plane waves at cutoff {provider.cutoff}; "
            f"need n_cell >= {2 * provider.cutoff + 2}")


def _gather_bins(g_list: np.ndarray, r1: int, r2: int, R: int, N: int) -> tuple[np.ndarray, np.ndarray]:
    n_cell = N // R
    if np.max(np.abs(g_list)) > n_cell // 2 - 1:
        raise GridError(
            f"box grid with n_cell={n_cell} aliases a basis wave with "
            f"|G| = {int(np.max(np.abs(g_list)))}")
    return (g_list[:, 0] * R + r1) % N, (g_list[:, 1] * R + r2) % N


def bloch_coefficients(w: np.ndarray, side: str, M: int, provider: BasisProvider,
                       box: BoxDomain) -> BlochCoefficients:
    """Expand a W_R field in the discrete Bloch basis of `side`.

    alpha_lambda is the weighted inner product of w with the basis wave, exact
    for band-limited fields; the Parseval remainder is booked as residual_mass.
    """
    N = box.size
    if w.shape != (N, N):
        raise GridError(f"field must be {N} x {N} samples of W_R")
    if side == "plus":
        _check_mode_bandwidth(provider, box.n_cell)
    spec = np.fft.fft2(w) / (N * N)
    R = box.R
    alpha = np.empty((R, R, M), dtype=complex)
    for r1 in range(R):
        for r2 in range(R):
            modes = provider.modes(side, (r1 / R, r2 / R), M)
            for m, mode in enumerate(modes):
                b1, b2 = _gather_bins(mode.g_list, r1, r2, R, N)
                alpha[r1, r2, m] = np.sum(np.conj(mode.coeffs) * spec[b1, b2])
    total = float(np.mean(np.abs(w) ** 2))
    residual = total - float(np.sum(np.abs(alpha) ** 2))
    if residual < -1e-8 * max(total, 1.0):
        raise NumericError(f"negative Parseval remainder {residual:.3e}: basis inconsistent")
    return BlochCoefficients(R=R, side=side, M=M, epsilon=box.epsilon, n_cell=box.n_cell,
                             alpha=alpha, residual_mass=residual)


def synthesize(coeffs: BlochCoefficients, provider: BasisProvider,
               box: BoxDomain | None = None) -> np.ndarray:
    """Superpose the basis waves with the given coefficients on the W_R grid."""
    if box is None:
        box = BoxDomain(R=coeffs.R, epsilon=coeffs.epsilon, n_cell=coeffs.n_cell)
    N = box.size
    R = coeffs.R
    if coeffs.side == "plus":
        _check_mode_bandwidth(provider, box.n_cell)
    spec = np.zeros((N, N), dtype=complex)
    for r1 in range(R):
        for r2 in range(R):
            col = coeffs.alpha[r1, r2]
            if not np.any(col):
                continue
            modes = provider.modes(coeffs.side, (r1 / R, r2 / R), coeffs.M)
            for m, mode in enumerate(modes):
                if col[m] == 0:
                    continue
                b1, b2 = _gather_bins(mode.g_list, r1, r2, R, N)
                np.add.at(spec, (b1, b2), col[m] * mode.coeffs)
    return np.fft.ifft2(spec * (N * N))


def synthesize_gradient(coeffs: BlochCoefficients, provider: BasisProvider,
                        box: BoxDomain | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Exact gradient of the synthesized field (spectral differentiation)."""
    if box is None:
        box = BoxDomain(R=coeffs.R, epsilon=coeffs.epsilon, n_cell=coeffs.n_cell)
    N = box.size
    R = coeffs.R
    spec1 = np.zeros((N, N), dtype=complex)
    spec2 = np.zeros((N, N), dtype=complex)
    for r1 in range(R):
        for r2 in range(R):
            col = coeffs.alpha[r1, r2]
            if not np.any(col):
                continue
            modes = provider.modes(coeffs.side, (r1 / R, r2 / R), coeffs.M)
            for m, mode in enumerate(modes):
                if col[m] == 0:
                    continue
                b1, b2 = _gather_bins(mode.g_list, r1, r2, R, N)
                f1 = (2j * np.pi / coeffs.epsilon) * (mode.g_list[:, 0] + r1 / R)
                f2 = (2j * np.pi / coeffs.epsilon) * (mode.g_list[:, 1] + r2 / R)
                np.add.at(spec1, (b1, b2), col[m] * mode.coeffs * f1)
                np.add.at(spec2, (b1, b2), col[m] * mode.coeffs * f2)
    return np.fft.ifft2(spec1 * (N * N)), np.fft.ifft2(spec2 * (N * N))


def project(coeffs: BlochCoefficients, *, poynting: str | None = None,
            table: PoyntingTable | None = None, tol: float | None = None,
            vertical: float | None = None, level: int | None = None,
            level_ge: int | None = None) -> BlochCoefficients:
    """Zero out coefficients outside the requested index class.

    Predicates (conjunction of all that are given):
      poynting: one of '>0', '<0', '>=0', '<=0', '=0' (needs `table` and `tol`)
      vertical: keep only j2 == given value (in Q_R)
      level / level_ge: keep one band index, or all indices >= level_ge
    """
    mask = np.ones(coeffs.alpha.shape, dtype=bool)
    if poynting is not None:
        if table is None or tol is None:
            raise ValidationError("Poynting predicates need a PoyntingTable and a tolerance")
        if table.R != coeffs.R or table.M < coeffs.M or table.side != coeffs.side:
            raise ValidationError("Poynting table does not match the coefficient grid")
        cls = table.classifications(tol)[:, :, :coeffs.M]
        choices = {">0": cls == 1, "<0": cls == -1, ">=0": cls >= 0,
                   "<=0": cls <= 0, "=0": cls == 0}
        if poynting not in choices:
            raise ValidationError(f"unknown Poynting predicate {poynting!r}")
        mask &= choices[poynting]
    if vertical is not None:
        r2 = _vertical_index(vertical, coeffs.R)
        sel = np.zeros(coeffs.alpha.shape, dtype=bool)
        sel[:, r2, :] = True
        mask &= sel
    if level is not None:
        sel = np.zeros(coeffs.alpha.shape, dtype=bool)
        sel[:, :, level] = True
        mask &= sel
    if level_ge is not None:
        sel = np.zeros(coeffs.alpha.shape, dtype=bool)
        sel[:, :, level_ge:] = True
        mask &= sel
    return replace(coeffs, alpha=np.where(mask, coeffs.alpha, 0.0))


def spectral_gradient_strip(u: FieldStrip) -> tuple[np.ndarray, np.ndarray]:
    """FFT gradient treating the strip extent as periodic in both directions.

    Valid for band-limited fields that actually are periodic on the extent
    (as in the commutation checks); not meant for general solver output.
    """
    n1, n2 = u.samples.shape
    spec = np.fft.fft2(u.samples)
    f1 = 2j * np.pi * np.fft.fftfreq(n1, d=u.dx)
    f2 = 2j * np.pi * np.fft.fftfreq(n2, d=u.dx)
    d1 = np.fft.ifft2(spec * f1[:, None])
    d2 = np.fft.ifft2(spec * f2[None, :])
    return d1, d2


def projection_gradient_commutation_check(u: FieldStrip, k2: float) -> float:
    """Sup-norm defect of grad(Pi_vert u) - Pi_vert(grad u) with spectral gradients."""
    d1, d2 = spectral_gradient_strip(u)
    pu = vertical_projection(u, k2)
    pd1, pd2 = spectral_gradient_strip(pu)
    qd1 = vertical_projection(replace(u, samples=d1), k2).samples
    qd2 = vertical_projection(replace(u, samples=d2), k2).samples
    return float(max(np.max(np.abs(pd1 - qd1)), np.max(np.abs(pd2 - qd2))))


def weighted_mean_sq(w: np.ndarray) -> float:
    """The weighted norm (1/|W_R|) int |w|^2 as a grid mean."""
    return float(np.mean(np.abs(w) ** 2))
