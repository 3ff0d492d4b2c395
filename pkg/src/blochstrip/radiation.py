"""Outgoing-wave metrics, Bloch measures, and conservation checks on far boxes.

Each far-field quantity follows the same pipeline: restrict the strip solution
to a box W_R shifted by R eps (right) or -2R eps (left), taper it with a
cut-off that is 1 on the inner (R-1)-box, expand in the discrete Bloch basis,
and read off masses per Poynting class, band index, or phase vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bands import BasisProvider
from .cell import CoefficientField, _smoothstep
from .errors import DomainError, ValidationError
from .expand import (BlochCoefficients, FieldStrip, bloch_coefficients, project,
                     synthesize, synthesize_gradient, weighted_mean_sq)
from .flux import BoxDomain, PoyntingTable, bloch_pair_flux, build_poynting_table


def restrict_box(u: FieldStrip, R: int, side: str) -> np.ndarray:
    """Samples of u_R^+ (shift by R eps) or u_R^- (shift by -2R eps) on W_R.

    Vertical h-periodic extension is tiled R/K times; the horizontal extent of
    the strip must cover the shifted box.
    """
    if R % u.K != 0:
        raise ValidationError(f"R={R} must be a multiple of K={u.K}")
    N = R * u.n_cell
    if side == "plus":
        start_x = R * u.epsilon
    elif side == "minus":
        start_x = -2 * R * u.epsilon
    else:
        raise ValidationError(f"side must be 'plus' or 'minus', got {side!r}")
    end_x = start_x + R * u.epsilon
    if u.x_lo > start_x + 1e-12 or u.x_hi < end_x - u.dx - 1e-12:
        raise DomainError(
            f"strip extent [{u.x_lo}, {u.x_hi}] does not cover the required interval "
            f"[{start_x}, {end_x}] for R={R}, side={side}")
    i0 = u.column_index(start_x)
    block = u.samples[i0:i0 + N, :]
    return np.tile(block, (1, R // u.K))


@dataclass(frozen=True)
class CutoffProfile:
    """Cut-off on W_R: 1 on the inner box, smooth ramp of width eps to 0.

    flavor 'horizontal' depends on x1 only (vertically периodic); 'square'
    tapers both directions; 'ramp' is the strip-level piecewise-linear profile
    (1 for |x1| <= R eps, linear to 0 at 2 R eps) used by energy identities.
    """

    R: int
    epsilon: float
    flavor: str
    n_cell: int
    values: np.ndarray
    x1: np.ndarray | None = None

    def on_box(self) -> np.ndarray:
        if self.flavor == "horizontal":
            return np.broadcast_to(self.values[:, None],
                                   (len(self.values), len(self.values))).copy()
        if self.flavor == "square":
            return self.values
        raise ValidationError("ramp cut-offs live on the strip, not on a box")

    def max_grid_slope(self) -> float:
        dx = self.epsilon / self.n_cell
        if self.values.ndim == 1:
            return float(np.max(np.abs(np.diff(self.values))) / dx)
        return float(max(np.max(np.abs(np.diff(self.values, axis=0))),
                         np.max(np.abs(np.diff(self.values, axis=1)))) / dx)


def build_cutoff(R: int, epsilon: float, flavor: str = "horizontal",
                 n_cell: int = 16) -> CutoffProfile:
    if R < 2:
        raise ValidationError("cut-off profiles need R >= 2")
    N = R * n_cell
    x = np.arange(N) * (epsilon / n_cell)
    if flavor in ("horizontal", "square"):
        ramp_up = _smoothstep(x / epsilon)
        ramp_down = _smoothstep((R * epsilon - x) / epsilon)
        prof = np.minimum(ramp_up, ramp_down)
        if flavor == "horizontal":
            return CutoffProfile(R=R, epsilon=epsilon, flavor=flavor, n_cell=n_cell,
                                 values=prof)
        return CutoffProfile(R=R, epsilon=epsilon, flavor=flavor, n_cell=n_cell,
                             values=np.minimum.outer(prof, prof))
    if flavor == "ramp":
        xs = np.arange(-2 * N, 2 * N + 1) * (epsilon / n_cell)
        vals = np.clip(2.0 - np.abs(xs) / (R * epsilon), 0.0, 1.0)
        return CutoffProfile(R=R, epsilon=epsilon, flavor=flavor, n_cell=n_cell,
                             values=vals, x1=xs)
    raise ValidationError(f"unknown cut-off flavor {flavor!r}")


def _box(provider: BasisProvider, u: FieldStrip, R: int) -> BoxDomain:
    return BoxDomain(R=R, epsilon=u.epsilon, n_cell=u.n_cell, K=u.K)


def truncated_box_coefficients(u: FieldStrip, side: str, R: int, M: int,
                               provider: BasisProvider,
                               flavor: str = "horizontal") -> BlochCoefficients:
    """Bloch coefficients of the eta-truncated box restriction of u."""
    w = restrict_box(u, R, side)
    eta = build_cutoff(R, u.epsilon, flavor=flavor, n_cell=u.n_cell).on_box()
    return bloch_coefficients(w * eta, side, M, provider, _box(provider, u, R))


def outgoing_metric(u: FieldStrip, side: str, R: int, M: int, provider: BasisProvider,
                    table: PoyntingTable, tol_P: float,
                    include_zero: bool = False, flavor: str = "horizontal") -> float:
    """Weighted mass of the incoming-classified part of the far box field.

    Side 'plus' measures left-going content, side 'minus' right-going content;
    `include_zero` switches from the strict class to the one including
    vertical waves.
    """
    coeffs = truncated_box_coefficients(u, side, R, M, provider, flavor)
    if side == "plus":
        predicate = "<=0" if include_zero else "<0"
    else:
        predicate = ">=0" if include_zero else ">0"
    return project(coeffs, poynting=predicate, table=table, tol=tol_P).coefficient_mass()


def spectral_box_flux(coeffs: BlochCoefficients, provider: BasisProvider) -> float:
    """Im b_R(w, w) of a coefficient-represented field, evaluated spectrally.

    Exact for the synthesized field: wave-number orthogonality kills cross-j
    terms, and same-j pairs reduce to cell-level flux integrals.
    """
    a_hat = provider.a_hat if coeffs.side == "plus" else None
    total = 0.0 + 0.0j
    R = coeffs.R
    for r1 in range(R):
        for r2 in range(R):
            col = coeffs.alpha[r1, r2]
            live = np.nonzero(col)[0]
            if len(live) == 0:
                continue
            modes = provider.modes(coeffs.side, (r1 / R, r2 / R), coeffs.M)
            for mi in live:
                for mj in live:
                    total += (np.conj(col[mi]) * col[mj]
                              * bloch_pair_flux(modes[mi], modes[mj], a_hat))
    return float(np.imag(total))


def energetic_outgoing_metric(u: FieldStrip, side: str, R: int, M: int,
                              provider: BasisProvider, table: PoyntingTable,
                              tol_P: float, flavor: str = "horizontal") -> float:
    """Energy flux carried by the incoming-classified, lowest-band part."""
    coeffs = truncated_box_coefficients(u, side, R, M, provider, flavor)
    predicate = "<0" if side == "plus" else ">0"
    proj = project(coeffs, poynting=predicate, table=table, tol=tol_P, level=0)
    return spectral_box_flux(proj, provider)


def m_ge1_mass(u: FieldStrip, side: str, R: int, M: int, provider: BasisProvider,
               flavor: str = "horizontal") -> float:
    """Weighted mass of the box field outside the lowest band (m >= 1 plus remainder)."""
    coeffs = truncated_box_coefficients(u, side, R, M, provider, flavor)
    upper = project(coeffs, level_ge=1).coefficient_mass()
    return upper + coeffs.residual_mass


@dataclass(frozen=True)
class DiscreteBlochMeasure:
    """Atomic measure on Z: weight |alpha_{(j,l)}|^2 at each j in Q_R x Q_R."""

    l: int
    side: str
    R: int
    atoms: np.ndarray  # (R, R) nonnegative weights
    residual_mass: float
    field_mass: float

    def total_mass(self) -> float:
        return float(np.sum(self.atoms))

    def j_nodes(self) -> np.ndarray:
        q = np.arange(self.R) / self.R
        return np.stack(np.meshgrid(q, q, indexing="ij"), axis=-1)


def bloch_measure(u: FieldStrip, side: str, l: int, R: int, M: int,
                  provider: BasisProvider, flavor: str = "horizontal") -> DiscreteBlochMeasure:
    if l >= M:
        raise ValidationError(f"band level {l} not below the cutoff M={M}")
    coeffs = truncated_box_coefficients(u, side, R, M, provider, flavor)
    return measure_from_coefficients(coeffs, l)


def measure_from_coefficients(coeffs: BlochCoefficients, l: int) -> DiscreteBlochMeasure:
    atoms = np.abs(coeffs.alpha[:, :, l]) ** 2
    return DiscreteBlochMeasure(l=l, side=coeffs.side, R=coeffs.R, atoms=atoms,
                                residual_mass=coeffs.residual_mass,
                                field_mass=coeffs.total_mass())


def circle_distance(a: np.ndarray, b: float) -> np.ndarray:
    d = np.abs(np.mod(a - b, 1.0))
    return np.minimum(d, 1.0 - d)


@dataclass
class SupportReport:
    """Mass location of level-0 Bloch measures against the conserved-quantity sets."""

    omega: float
    k2: float
    per_R: list[dict]
    transport: list[dict]
    empty: bool

    def final_inside_fraction(self) -> float:
        return self.per_R[-1]["inside_fraction"] if self.per_R else float("nan")


def measure_support_report(measures_by_R: dict[int, list[DiscreteBlochMeasure]],
                           omega: float, k2: float, provider: BasisProvider,
                           tol_freq: float = 0.05, tol_vert: float | None = None,
                           tol_P: float | None = None) -> SupportReport:
    """Fraction of level-0 mass inside the frequency set intersected with the
    union of the vertical-wave-number set and the vertical-flux set.

    k2 is taken modulo the cell (k2 * eps mod 1).  tol_vert defaults to half a
    grid bin, tol_P to 2% of the largest |P| on the grid.
    """
    if len(measures_by_R) < 2:
        raise ValidationError("support reports need at least two box orders R")
    k2_frac = float(np.mod(k2 * provider.epsilon, 1.0))
    omega_sq = omega**2
    per_R = []
    for R in sorted(measures_by_R):
        levels = measures_by_R[R]
        side = levels[0].side
        level0 = next(m for m in levels if m.l == 0)
        table = build_poynting_table(provider, side, R, 1)
        bands = band_table(provider, side, R, 1)[:, :, 0]
        q = np.arange(R) / R
        j2 = np.broadcast_to(q[None, :], (R, R))
        tv = 1.0 / (2 * R) if tol_vert is None else tol_vert
        tp = 0.02 * float(np.max(np.abs(table.values))) if tol_P is None else tol_P
        freq_ok = np.abs(bands - omega_sq) <= tol_freq * omega_sq
        vert_ok = circle_distance(j2, k2_frac) <= tv + 1e-12
        flux_ok = np.abs(table.values[:, :, 0]) <= tp
        inside = freq_ok & (vert_ok | flux_ok)
        m0 = level0.total_mass()
        total = sum(m.total_mass() for m in levels) + level0.residual_mass
        upper = total - m0
        per_R.append({
            "R": R,
            "side": side,
            "mass_l0": m0,
            "inside_fraction": float(np.sum(level0.atoms[inside]) / m0) if m0 > 0 else 0.0,
            "upper_level_fraction": float(upper / total) if total > 0 else 0.0,
            "total_mass": total,
        })
    rs = sorted(measures_by_R)
    transport = []
    for lo, hi in zip(rs[:-1], rs[1:]):
        if hi % lo != 0:
            continue
        fine = next(m for m in measures_by_R[hi] if m.l == 0)
        coarse = next(m for m in measures_by_R[lo] if m.l == 0)
        ratio = hi // lo
        binned = fine.atoms.reshape(lo, ratio, lo, ratio).sum(axis=(1, 3))
        a = binned / max(binned.sum(), 1e-300)
        b = coarse.atoms / max(coarse.atoms.sum(), 1e-300)
        transport.append({"R_from": lo, "R_to": hi,
                          "tv_distance": float(0.5 * np.sum(np.abs(a - b)))})
    empty = all(p["total_mass"] < 1e-14 for p in per_R)
    fracs = [p["inside_fraction"] for p in per_R]
    for p, f_prev, f in zip(per_R[1:], fracs[:-1], fracs[1:]):
        p["inside_fraction_nondecreasing"] = bool(f >= f_prev - 1e-9)
    return SupportReport(omega=omega, k2=k2, per_R=per_R, transport=transport, empty=empty)


@dataclass(frozen=True)
class EnergyBalance:
    flux_left: float
    flux_right: float
    defect: float
    warning: str | None = None


def _strip_dx1(u: FieldStrip) -> np.ndarray:
    return np.gradient(u.samples, u.dx, axis=0)


def _box_column_mean(u: FieldStrip, values: np.ndarray, x_start: float, R: int) -> complex:
    """Mean of `values` over [x_start, x_start + R eps] x (0, h): trapezoid in x1,
    plain (periodic) mean in x2."""
    i0 = u.column_index(x_start)
    n = R * u.n_cell
    block = values[i0:i0 + n + 1, :]
    if block.shape[0] != n + 1:
        raise DomainError("strip does not cover the flux box")
    w = np.ones(n + 1)
    w[0] = w[-1] = 0.5
    return complex(np.sum(block.mean(axis=1) * w) / n)


def energy_balance(u: FieldStrip, R: int, field: CoefficientField,
                   residual: float | None = None,
                   residual_threshold: float = 1e-6) -> EnergyBalance:
    """Energy fluxes through the far boxes: for exact solutions the imaginary
    parts coincide (flux in from the left equals flux out on the right)."""
    du = _strip_dx1(u)
    x1 = u.x1_nodes()
    x2 = u.x2_nodes()
    a = np.asarray(field(x1[:, None], x2[None, :]))
    left = _box_column_mean(u, np.conj(u.samples) * du, -2 * R * u.epsilon, R)
    right = _box_column_mean(u, np.conj(u.samples) * a * du, R * u.epsilon, R)
    warning = None
    if residual is not None and residual > residual_threshold:
        warning = f"input residual {residual:.3e} above threshold {residual_threshold:.1e}"
    return EnergyBalance(flux_left=float(np.imag(left)), flux_right=float(np.imag(right)),
                         defect=float(np.imag(left) - np.imag(right)), warning=warning)


def caccioppoli_check(u: FieldStrip, window: float) -> float:
    """Gradient-window to L2-window ratio around x1 = window (in units of eps)."""
    d1 = _strip_dx1(u)
    # vertical derivative: wrap-corrected central difference (periodic direction)
    d2 = (np.roll(u.samples, -1, axis=1) - np.roll(u.samples, 1, axis=1)) / (2 * u.dx)
    grad_sq = np.abs(d1) ** 2 + np.abs(d2) ** 2
    eps = u.epsilon

    def window_integral(vals: np.ndarray, lo: float, hi: float) -> float:
        i0 = u.column_index(lo)
        i1 = u.column_index(hi)
        block = vals[i0:i1 + 1, :]
        w = np.ones(block.shape[0])
        w[0] = w[-1] = 0.5
        return float(np.sum(block.mean(axis=1) * w) * u.dx * u.h)

    num = window_integral(grad_sq, window * eps, (window + 1) * eps)
    den = 1.0 + window_integral(np.abs(u.samples) ** 2, (window - 1) * eps, (window + 2) * eps)
    return num / den


def band_table(provider: BasisProvider, side: str, R: int, M: int) -> np.ndarray:
    """Eigenvalues mu_m(j) on the Q_R grid via the cached mode sets."""
    def build() -> np.ndarray:
        out = np.empty((R, R, M))
        for r1 in range(R):
            for r2 in range(R):
                modes = provider.modes(side, (r1 / R, r2 / R), M)
                out[r1, r2] = [md.mu for md in modes]
        return out

    return provider.cached(("bands", side, R, M), build)


def truncated_operator_defect(u: FieldStrip, side: str, R: int, M: int,
                              provider: BasisProvider, omega: float,
                              flavor: str = "horizontal") -> float:
    """Weighted defect between L0(v) eta and the eigenvalue-weighted expansion
    of v eta, for a solution v of L0 v = omega^2 v on the box."""
    w = restrict_box(u, side=side, R=R)
    eta = build_cutoff(R, u.epsilon, flavor=flavor, n_cell=u.n_cell).on_box()
    box = BoxDomain(R=R, epsilon=u.epsilon, n_cell=u.n_cell, K=u.K)
    truncated = w * eta
    coeffs = bloch_coefficients(truncated, side, M, provider, box)
    mus = band_table(provider, side, R, M)
    weighted = BlochCoefficients(R=coeffs.R, side=coeffs.side, M=coeffs.M,
                                 epsilon=coeffs.epsilon, n_cell=coeffs.n_cell,
                                 alpha=coeffs.alpha * mus, residual_mass=0.0)
    synth = synthesize(weighted, provider, box)
    lhs = omega**2 * truncated
    return weighted_mean_sq(lhs - synth)


def box_operator(w: np.ndarray, side: str, box: BoxDomain,
                 field: CoefficientField | None) -> np.ndarray:
    """Periodic flux-form 5-point operator on the box grid (for compactly
    supported fields the periodic treatment is exact)."""
    if side == "plus":
        if field is None:
            raise ValidationError("crystal-side operator needs the coefficient field")
        x = box.nodes()
        a = np.asarray(field(x[:, None], x[None, :]))
    else:
        a = np.ones((box.size, box.size))
    inv = 1.0 / box.spacing**2
    aW = 0.5 * (np.roll(a, 1, axis=0) + a)
    aE = np.roll(aW, -1, axis=0)
    aS = 0.5 * (np.roll(a, 1, axis=1) + a)
    aN = np.roll(aS, -1, axis=1)
    return (aW * (w - np.roll(w, 1, axis=0)) + aE * (w - np.roll(w, -1, axis=0))
            + aS * (w - np.roll(w, 1, axis=1)) + aN * (w - np.roll(w, -1, axis=1))) * inv


def regularity_surrogate(u: FieldStrip, side: str, R: int, M: int,
                         provider: BasisProvider, a_min: float,
                         field: CoefficientField | None,
                         flavor: str = "horizontal") -> tuple[float, float]:
    """(lhs, rhs) of the gradient bound for the upper-band projection:
    lhs = weighted |grad Pi_{m>=1}(v eta)|^2, rhs = (1/a_min) * rms(L0(v eta)) *
    rms(Pi_{m>=1}(v eta)); for admissible fields lhs <= rhs up to truncation."""
    w = restrict_box(u, side=side, R=R)
    eta = build_cutoff(R, u.epsilon, flavor=flavor, n_cell=u.n_cell).on_box()
    box = BoxDomain(R=R, epsilon=u.epsilon, n_cell=u.n_cell, K=u.K)
    truncated = w * eta
    coeffs = bloch_coefficients(truncated, side, M, provider, box)
    upper = project(coeffs, level_ge=1)
    d1, d2 = synthesize_gradient(upper, provider, box)
    lhs = float(np.mean(np.abs(d1) ** 2 + np.abs(d2) ** 2))
    lw = box_operator(truncated, side, box, field)
    rhs = (np.sqrt(weighted_mean_sq(lw)) * np.sqrt(max(upper.coefficient_mass(), 0.0))) / a_min
    return lhs, float(rhs)


def weighted_flux_sums(coeffs: BlochCoefficients, table: PoyntingTable, tol_P: float) -> float:
    """Level-0 projected energy sums of the conservation argument:
    sum over the right-going class of |alpha|^2 P on side plus, and the
    left-going analogue (absolute value) on side minus."""
    p0 = table.values[:, :, 0]
    a0 = np.abs(coeffs.alpha[:, :, 0]) ** 2
    if coeffs.side == "plus":
        mask = p0 >= -tol_P
    else:
        mask = p0 <= tol_P
    return float(np.sum(a0[mask] * np.abs(p0[mask])))


@dataclass
class RadiationReport:
    side: str
    R_sequence: list[int]
    entries: list[dict]
    max_window_mass: float

    def to_json_dict(self) -> dict:
        return {"side": self.side, "R_sequence": self.R_sequence,
                "entries": self.entries, "max_window_mass": self.max_window_mass}


def window_masses(u: FieldStrip, side: str) -> list[float]:
    """Per-unit-window L2 means along the covered half of the strip."""
    eps = u.epsilon
    out = []
    x_lo, x_hi = u.x_lo, u.x_hi
    if side == "plus":
        start = 0.0
        while start + eps <= x_hi:
            i0 = u.column_index(start)
            out.append(float(np.mean(np.abs(u.samples[i0:i0 + u.n_cell + 1]) ** 2)))
            start += eps
    else:
        start = -eps
        while start >= x_lo:
            i0 = u.column_index(start)
            out.append(float(np.mean(np.abs(u.samples[i0:i0 + u.n_cell + 1]) ** 2)))
            start -= eps
    return out


def radiation_report(u: FieldStrip, side: str, R_sequence: list[int], M: int,
                     provider: BasisProvider, tol_P: float,
                     flavor: str = "horizontal") -> RadiationReport:
    entries = []
    for R in R_sequence:
        table = build_poynting_table(provider, side, R, M)
        coeffs = truncated_box_coefficients(u, side, R, M, provider, flavor)
        strict = "<0" if side == "plus" else ">0"
        weak = "<=0" if side == "plus" else ">=0"
        metric = project(coeffs, poynting=strict, table=table, tol=tol_P).coefficient_mass()
        metric_leq = project(coeffs, poynting=weak, table=table, tol=tol_P).coefficient_mass()
        pred = "<0" if side == "plus" else ">0"
        energetic = spectral_box_flux(
            project(coeffs, poynting=pred, table=table, tol=tol_P, level=0), provider)
        upper = project(coeffs, level_ge=1).coefficient_mass() + coeffs.residual_mass
        entries.append({
            "R": R,
            "outgoing_metric": metric,
            "outgoing_metric_leq": metric_leq,
            "energetic_metric": energetic,
            "m_ge1_mass": upper,
            "total_mass": coeffs.total_mass(),
        })
    masses = window_masses(u, side)
    return RadiationReport(side=side, R_sequence=list(R_sequence), entries=entries,
                           max_window_mass=max(masses) if masses else 0.0)
