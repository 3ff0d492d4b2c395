"""Horizontal energy-flux quantities: Poynting numbers, index classification,
and the sesquilinear flux forms on boxes.

The cell-averaged flux of a Bloch wave is evaluated spectrally,

    b(U, V) = sum_{G',G} conj(c^U_{G'}) c^V_G (2 pi i / eps)(G_1 + j_1) a_hat(G'-G),

with a_hat = delta on the free-space side; the Poynting number is P = Im b(U, U),
real and independent of the eigenvector phase gauge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bands import BasisProvider, BlochMode
from .cell import CoefficientField
from .errors import GridError, ValidationError


def default_poynting_tol(epsilon: float) -> float:
    """Numerical width of the 'vertical' class, in the natural flux unit."""
    return 1e-9 * (2.0 * np.pi / epsilon)


@dataclass(frozen=True)
class BoxDomain:
    """The square W_R = (0, R*eps)^2 with a uniform R*n_cell grid per side."""

    R: int
    epsilon: float
    n_cell: int
    K: int = 1

    def __post_init__(self):
        if self.R % self.K != 0:
            raise ValidationError(f"box order R={self.R} must be a multiple of K={self.K}")

    @property
    def size(self) -> int:
        return self.R * self.n_cell

    @property
    def spacing(self) -> float:
        return self.epsilon / self.n_cell

    def nodes(self) -> np.ndarray:
        return np.arange(self.size) * self.spacing


@dataclass(frozen=True)
class PoyntingRecord:
    lam: tuple[tuple[float, float], int]
    side: str
    P: float
    classification: str
    tol_used: float


def classify_index(p: float, tol: float) -> str:
    """'right' for P > tol, 'left' for P < -tol, 'vertical' otherwise."""
    if tol < 0:
        raise ValidationError("classification tolerance must be >= 0")
    if p > tol:
        return "right"
    if p < -tol:
        return "left"
    return "vertical"


def bloch_pair_flux(mode_u: BlochMode, mode_v: BlochMode,
                    a_hat: dict[tuple[int, int], complex] | None) -> complex:
    """Cell-averaged b(U, V) for two modes sharing the same phase vector."""
    if mode_u.j != mode_v.j:
        raise ValidationError("pair flux is defined for modes with equal phase vectors")
    eps = mode_u.epsilon
    j1 = mode_u.j[0]
    gu, cu = mode_u.g_list, mode_u.coeffs
    gv, cv = mode_v.g_list, mode_v.coeffs
    weight = (2j * np.pi / eps) * (gv[:, 0] + j1) * cv
    if a_hat is None:
        # free space: only G' == G contributes
        total = 0.0 + 0.0j
        index = {tuple(g): i for i, g in enumerate(gu)}
        for g, w in zip(map(tuple, gv), weight):
            i = index.get(g)
            if i is not None:
                total += np.conj(cu[i]) * w
        return complex(total)
    d1 = gu[:, None, 0] - gv[None, :, 0]
    d2 = gu[:, None, 1] - gv[None, :, 1]
    span = int(max(np.max(np.abs(d1)), np.max(np.abs(d2))))
    coverage = max(abs(g1) for g1, _ in a_hat)
    if span > coverage:
        raise ValidationError(f"coefficient spectrum covers |G| <= {coverage}, need {span}")
    arr = np.zeros((2 * span + 1, 2 * span + 1), dtype=complex)
    for (g1, g2), val in a_hat.items():
        if abs(g1) <= span and abs(g2) <= span:
            arr[g1 + span, g2 + span] = val
    conv = arr[d1 + span, d2 + span]
    return complex(cu.conj() @ (conv @ weight))


def poynting_number(mode: BlochMode, a_hat: dict[tuple[int, int], complex] | None = None) -> float:
    """Horizontal Poynting number of a normalized Bloch mode.

    `a_hat` must be supplied for crystal-side modes; free-space modes need none.
    """
    if mode.side == "plus" and a_hat is None:
        raise ValidationError("crystal-side Poynting number needs the coefficient spectrum")
    return float(np.imag(bloch_pair_flux(mode, mode, a_hat if mode.side == "plus" else None)))


@dataclass(frozen=True)
class PoyntingTable:
    """Poynting numbers for every (j in Q_R x Q_R, m < M) of one side."""

    side: str
    R: int
    M: int
    epsilon: float
    values: np.ndarray  # shape (R, R, M)

    def classifications(self, tol: float) -> np.ndarray:
        """Int8 array: +1 right-going, -1 left-going, 0 vertical."""
        out = np.zeros(self.values.shape, dtype=np.int8)
        out[self.values > tol] = 1
        out[self.values < -tol] = -1
        return out

    def records(self, tol: float) -> list[PoyntingRecord]:
        names = {1: "right", -1: "left", 0: "vertical"}
        cls = self.classifications(tol)
        q = np.arange(self.R) / self.R
        out = []
        for i1 in range(self.R):
            for i2 in range(self.R):
                for m in range(self.M):
                    out.append(PoyntingRecord(
                        lam=((float(q[i1]), float(q[i2])), m), side=self.side,
                        P=float(self.values[i1, i2, m]),
                        classification=names[int(cls[i1, i2, m])], tol_used=tol))
        return out


def build_poynting_table(provider: BasisProvider, side: str, R: int, M: int) -> PoyntingTable:
    def build() -> PoyntingTable:
        a_hat = provider.a_hat if side == "plus" else None
        q = np.arange(R) / R
        vals = np.empty((R, R, M))
        for i1 in range(R):
            for i2 in range(R):
                modes = provider.modes(side, (q[i1], q[i2]), M)
                for m in range(M):
                    vals[i1, i2, m] = np.imag(bloch_pair_flux(modes[m], modes[m], a_hat))
        return PoyntingTable(side=side, R=R, M=M, epsilon=provider.epsilon, values=vals)

    return provider.cached(("poynting", side, R, M), build)


def sample_coefficient_on_box(field: CoefficientField, box: BoxDomain) -> np.ndarray:
    x = box.nodes()
    return np.asarray(field(x[:, None], x[None, :]))


def sesquilinear_b(u: np.ndarray, v: np.ndarray, side: str, box: BoxDomain,
                   field: CoefficientField | None = None,
                   dv: np.ndarray | None = None) -> complex:
    """Weighted flux form b_R(u, v) = mean over W_R of conj(u) a dv/dx1.

    `dv` may carry an exact (spectral) horizontal derivative of v; otherwise a
    centered difference with one-sided edges is used (second-order accurate).
    The quadrature is the plain grid mean, exact for W_R-periodic integrands.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape or u.shape != (box.size, box.size):
        raise GridError(f"fields must be {box.size} x {box.size} samples of W_R")
    if dv is None:
        dv = np.gradient(v, box.spacing, axis=0)
    elif dv.shape != v.shape:
        raise GridError("dv and v grids differ")
    if side == "plus":
        if field is None:
            raise ValidationError("crystal-side flux form needs the coefficient field")
        a = sample_coefficient_on_box(field, box)
    elif side == "minus":
        a = 1.0
    else:
        raise ValidationError(f"side must be 'plus' or 'minus', got {side!r}")
    return complex(np.mean(np.conj(u) * a * dv))


def energy_flux_B(w: np.ndarray, side: str, box: BoxDomain,
                  field: CoefficientField | None = None,
                  dw: np.ndarray | None = None) -> float:
    """Poynting number of a box field: Im b_R(w, w)."""
    return float(np.imag(sesquilinear_b(w, w, side, box, field=field, dv=dw)))
