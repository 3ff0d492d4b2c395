"""Periodic coefficient fields on the unit cell and their Fourier coefficients.

The coefficient a(x) is the inverse permittivity of the medium: Y_eps-periodic
on the crystal side, identically 1 on the free-space side.  Geometries are a
constant value, a mollified circular rod, or an arbitrary grid of samples.
All representations evaluate exactly periodically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


def _smoothstep(t: np.ndarray) -> np.ndarray:
    """C^2 quintic ramp: 0 for t<=0, 1 for t>=1, t^3(6t^2-15t+10) between."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


@dataclass(frozen=True)
class ConstantGeometry:
    value: float


@dataclass(frozen=True)
class RodGeometry:
    """Circular rod centered in the cell, mollified over width `mollify`.

    The profile transitions from a_inside to a_outside across the radial band
    [radius - mollify/2, radius + mollify/2] (cell units), so the field is C^1.
    """

    center: tuple[float, float]
    radius: float
    a_inside: float
    a_outside: float
    mollify: float = 0.05


@dataclass(frozen=True)
class GridGeometry:
    """Cell-centered n x n samples; evaluation is periodic bilinear interpolation."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


Geometry = ConstantGeometry | RodGeometry | GridGeometry


@dataclass(frozen=True)
class CoefficientField:
    """A periodic coefficient a(x) on the cell Y_eps = (0, epsilon)^2."""

    epsilon: float
    geometry: Geometry
    a_min: float
    a_max: float

    def __call__(self, x1, x2):
        """Evaluate a at points (x1, x2); periodic in both directions."""
        u = np.mod(np.asarray(x1, dtype=float) / self.epsilon, 1.0)
        v = np.mod(np.asarray(x2, dtype=float) / self.epsilon, 1.0)
        g = self.geometry
        if isinstance(g, ConstantGeometry):
            return np.broadcast_to(np.float64(g.value), np.broadcast_shapes(u.shape, v.shape)).copy()
        if isinstance(g, RodGeometry):
            du = np.abs(u - g.center[0])
            dv = np.abs(v - g.center[1])
            du = np.minimum(du, 1.0 - du)
            dv = np.minimum(dv, 1.0 - dv)
            r = np.hypot(du, dv)
            t = _smoothstep((r - (g.radius - 0.5 * g.mollify)) / g.mollify)
            return g.a_inside + (g.a_outside - g.a_inside) * t
        # grid geometry: samples live at cell centers ((i+1/2)/n, (k+1/2)/n)
        vals = g.values
        n = vals.shape[0]
        fu = u * n - 0.5
        fv = v * n - 0.5
        i0 = np.floor(fu).astype(int)
        k0 = np.floor(fv).astype(int)
        wu = fu - i0
        wv = fv - k0
        i1 = np.mod(i0 + 1, n)
        k1 = np.mod(k0 + 1, n)
        i0 = np.mod(i0, n)
        k0 = np.mod(k0, n)
        return ((1 - wu) * (1 - wv) * vals[i0, k0] + wu * (1 - wv) * vals[i1, k0]
                + (1 - wu) * wv * vals[i0, k1] + wu * wv * vals[i1, k1])


@dataclass(frozen=True)
class CellGrid:
    """Uniform cell-centered n x n sampling of Y_eps; n must be a power of two."""

    n: int
    epsilon: float = 1.0

    def __post_init__(self):
        if self.n < 1 or (self.n & (self.n - 1)) != 0:
            raise ValidationError(f"cell grid size must be a power of two, got {self.n}")

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        c = (np.arange(self.n) + 0.5) * (self.epsilon / self.n)
        return np.meshgrid(c, c, indexing="ij")


def build_coefficient_field(spec, epsilon: float = 1.0) -> CoefficientField:
    """Build a validated CoefficientField from a geometry description.

    `spec` is a dict with a "type" tag ("constant" | "rod" | "grid"), matching
    the geometry block of the JSON configuration, or an already-built Geometry.
    """
    if isinstance(spec, (ConstantGeometry, RodGeometry, GridGeometry)):
        geom = spec
    else:
        kind = spec.get("type")
        if kind == "constant":
            geom = ConstantGeometry(value=float(spec["value"]))
        elif kind == "rod":
            geom = RodGeometry(
                center=tuple(spec.get("center", (0.5, 0.5))),
                radius=float(spec["radius"]),
                a_inside=float(spec["a_inside"]),
                a_outside=float(spec["a_outside"]),
                mollify=float(spec.get("mollify", 0.05)),
            )
        elif kind == "grid":
            geom = GridGeometry(values=np.asarray(spec["values"], dtype=float))
        else:
            raise ValidationError(f"unknown geometry type: {kind!r}")

    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")

    if isinstance(geom, ConstantGeometry):
        if geom.value <= 0:
            raise ValidationError("constant coefficient must be positive")
        a_min = a_max = float(geom.value)
    elif isinstance(geom, RodGeometry):
        if geom.a_inside <= 0 or geom.a_outside <= 0:
            raise ValidationError("rod coefficients must be positive")
        if not (0.0 < geom.radius < 0.5):
            raise ValidationError("rod radius must lie in (0, 1/2) so the rod stays inside the cell")
        if geom.mollify <= 0:
            raise ValidationError("mollification width must be positive")
        a_min = float(min(geom.a_inside, geom.a_outside))
        a_max = float(max(geom.a_inside, geom.a_outside))
    else:
        vals = geom.values
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValidationError("grid-sampled geometry must be a square n x n array")
        if np.any(vals <= 0):
            raise ValidationError("grid-sampled coefficients must all be positive")
        a_min = float(vals.min())
        a_max = float(vals.max())

    return CoefficientField(epsilon=float(epsilon), geometry=geom, a_min=a_min, a_max=a_max)


def free_space_field(epsilon: float = 1.0) -> CoefficientField:
    """The a = 1 coefficient of the free-space half."""
    return build_coefficient_field({"type": "constant", "value": 1.0}, epsilon=epsilon)


def sample_on_grid(field: CoefficientField, grid: CellGrid) -> np.ndarray:
    """Pointwise evaluation at the cell centers of `grid`."""
    x1, x2 = grid.points()
    scale = field.epsilon / grid.epsilon
    return np.asarray(field(x1 * scale, x2 * scale))


def _sampling_size(field: CoefficientField, cutoff: int) -> int:
    n_min = 4 * cutoff + 2
    if isinstance(field.geometry, GridGeometry):
        n_geom = field.geometry.values.shape[0]
        if n_geom >= n_min and (n_geom & (n_geom - 1)) == 0:
            return n_geom
    # mollified profiles are only C^2; oversample well beyond the alias limit
    # so low-order coefficients carry the full quadrature accuracy
    n = 1024
    while n < n_min:
        n *= 2
    return n

def fourier_coefficients(field: CoefficientField, cutoff: int) -> dict[tuple[int, int], complex]:
    """Fourier coefficients a_hat(G) for |G|_inf <= 2*cutoff.

    a_hat(G) = cell average of a(x) exp(-2 pi i G.x/eps), computed by FFT of a
    cell-centered sampling with at least 4*cutoff + 2 points per side so the
    quadratic-form assembly (which consumes a_hat(G - G')) is alias-safe.
    """
    if cutoff < 1:
        raise ValidationError("cutoff must be >= 1")
    n = _sampling_size(field, cutoff)
    if isinstance(field.geometry, GridGeometry) and field.geometry.values.shape[0] == n:
        samples = field.geometry.values
    else:
        samples = sample_on_grid(field, CellGrid(n=n, epsilon=field.epsilon))
    spec = np.fft.fft2(samples) / (n * n)
    # cell-centered samples at (i+1/2)/n: demodulate the half-sample phase
    g_axis = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    phase = np.exp(-1j * np.pi * g_axis / n)
    spec = spec * phase[:, None] * phase[None, :]

    out: dict[tuple[int, int], complex] = {}
    span = 2 * cutoff
    for g1 in range(-span, span + 1):
        for g2 in range(-span, span + 1):
            out[(g1, g2)] = complex(spec[g1 % n, g2 % n])
    return out
