"""Cell eigenproblem: plane-wave assembly, band solves, group velocities, contours.

The shifted cell operator for phase vector j acts on eps-periodic functions;
in the plane-wave basis exp(2 pi i G.x/eps), |G|_inf <= cutoff, its matrix is

    A[G', G] = (4 pi^2 / eps^2) ((G'+j).(G+j)) a_hat(G'-G),

Hermitian for real a.  Free space (a = 1) diagonalizes exactly in this basis.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .cell import CoefficientField, fourier_coefficients
from .errors import AssemblyError, DegenerateBandError, NumericError, ValidationError


def g_lattice(cutoff: int) -> np.ndarray:
    """Plane-wave index set, shape (dim, 2), ordered lexicographically."""
    r = np.arange(-cutoff, cutoff + 1)
    g1, g2 = np.meshgrid(r, r, indexing="ij")
    return np.stack([g1.ravel(), g2.ravel()], axis=-1)


@dataclass(frozen=True)
class BlochMode:
    """One cell eigenfunction with its phase vector and band index.

    `g_list` and `coeffs` hold the plane-wave representation of the periodic
    factor; the full Bloch wave is sum_G c_G exp(2 pi i (G+j).x/eps).
    """

    j: tuple[float, float]
    m: int
    mu: float
    g_list: np.ndarray
    coeffs: np.ndarray
    side: str  # "plus" (crystal) or "minus" (free space)
    epsilon: float

    def synthesize(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        """Evaluate the Bloch wave on physical coordinates."""
        phase = np.zeros(np.broadcast_shapes(np.shape(x1), np.shape(x2)), dtype=complex)
        for (g1, g2), c in zip(self.g_list, self.coeffs):
            phase += c * np.exp(2j * np.pi * ((g1 + self.j[0]) * np.asarray(x1)
                                              + (g2 + self.j[1]) * np.asarray(x2)) / self.epsilon)
        return phase

    def gradient(self, x1: np.ndarray, x2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        shape = np.broadcast_shapes(np.shape(x1), np.shape(x2))
        d1 = np.zeros(shape, dtype=complex)
        d2 = np.zeros(shape, dtype=complex)
        for (g1, g2), c in zip(self.g_list, self.coeffs):
            wave = c * np.exp(2j * np.pi * ((g1 + self.j[0]) * np.asarray(x1)
                                            + (g2 + self.j[1]) * np.asarray(x2)) / self.epsilon)
            d1 += (2j * np.pi / self.epsilon) * (g1 + self.j[0]) * wave
            d2 += (2j * np.pi / self.epsilon) * (g2 + self.j[1]) * wave
        return d1, d2


@dataclass(frozen=True)
class BandStructure:
    """First M band values on a Q_R x Q_R grid of phase vectors."""

    R: int
    bands: np.ndarray  # shape (R, R, M), ascending in the last axis
    side: str
    epsilon: float

    def j_nodes(self) -> np.ndarray:
        q = np.arange(self.R) / self.R
        j1, j2 = np.meshgrid(q, q, indexing="ij")
        return np.stack([j1, j2], axis=-1)


def canonical_j(j) -> tuple[float, float]:
    j = np.asarray(j, dtype=float)
    return (float(np.mod(j[0], 1.0)), float(np.mod(j[1], 1.0)))


def _a_hat_array(a_hat: dict[tuple[int, int], complex], span: int) -> np.ndarray:
    arr = np.empty((2 * span + 1, 2 * span + 1), dtype=complex)
    try:
        for d1 in range(-span, span + 1):
            for d2 in range(-span, span + 1):
                arr[d1 + span, d2 + span] = a_hat[(d1, d2)]
    except KeyError as exc:
        raise AssemblyError(f"missing Fourier coefficient {exc} (cutoff too small)") from exc
    return arr


def assemble_cell_operator(a_hat: dict[tuple[int, int], complex], j, epsilon: float,
                           cutoff: int) -> np.ndarray:
    """Hermitian plane-wave matrix of the shifted cell operator."""
    if cutoff < 1:
        raise ValidationError("cutoff must be >= 1")
    g = g_lattice(cutoff)
    jv = np.asarray(canonical_j(j))
    arr = _a_hat_array(a_hat, 2 * cutoff)
    p = g + jv[None, :]
    dots = p @ p.T
    d1 = g[:, None, 0] - g[None, :, 0]
    d2 = g[:, None, 1] - g[None, :, 1]
    conv = arr[d1 + 2 * cutoff, d2 + 2 * cutoff]
    return (4.0 * np.pi**2 / epsilon**2) * dots * conv


def _phase_gauge(vec: np.ndarray) -> np.ndarray:
    """Rotate the eigenvector so its largest-magnitude entry is real and >= 0."""
    idx = int(np.argmax(np.abs(vec)))
    pivot = vec[idx]
    if abs(pivot) == 0.0:
        return vec
    return vec * (np.conj(pivot) / abs(pivot))


def solve_bands(a_matrix: np.ndarray, count: int) -> list[tuple[float, np.ndarray]]:
    """First `count` eigenpairs, ascending, orthonormal, deterministically gauged.

    Within a degenerate cluster (relative gap below 1e-9) the eigenvectors are
    replaced by a deterministic orthonormal basis of the cluster's invariant
    subspace, ordered by dominant-coefficient index.
    """
    dim = a_matrix.shape[0]
    if count > dim:
        raise ValidationError(f"requested {count} bands from a {dim}-dim operator")
    herm_defect = np.max(np.abs(a_matrix - a_matrix.conj().T))
    scale = max(np.max(np.abs(a_matrix)), 1e-300)
    if herm_defect > 1e-10 * scale:
        raise NumericError(f"operator not Hermitian: defect {herm_defect:.3e}")
    try:
        vals, vecs = scipy.linalg.eigh(a_matrix)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericError(f"eigensolver failed: {exc}") from exc

    vals = vals[:count].copy()
    vecs = vecs[:, :count].copy()

    # group indices into degenerate clusters
    clusters: list[list[int]] = [[0]] if count else []
    for m in range(1, count):
        tol = 1e-9 * max(1.0, abs(vals[m]))
        if vals[m] - vals[m - 1] < tol:
            clusters[-1].append(m)
        else:
            clusters.append([m])

    for cluster in clusters:
        if len(cluster) == 1:
            m = cluster[0]
            vecs[:, m] = _phase_gauge(vecs[:, m])
            continue
        cols = vecs[:, cluster]
        proj = cols @ cols.conj().T
        # rebuild a deterministic basis from the projector: seed with the
        # coordinate directions of largest in-subspace norm
        norms = np.real(np.diagonal(proj)).copy()
        basis: list[np.ndarray] = []
        while len(basis) < len(cluster):
            idx = int(np.argmax(norms))
            if norms[idx] < 0:  # pragma: no cover
                raise NumericError("failed to orthonormalize a degenerate cluster")
            norms[idx] = -1.0
            v = proj[:, idx].copy()
            for b in basis:
                v -= b * (b.conj() @ v)
            nv = np.linalg.norm(v)
            if nv < 1e-8:
                continue  # seed nearly dependent on earlier picks; try next coordinate
            basis.append(_phase_gauge(v / nv))
        for m, b in zip(cluster, basis):
            vecs[:, m] = b

    gram = vecs.conj().T @ vecs
    if np.max(np.abs(gram - np.eye(count))) > 1e-10:
        raise NumericError("eigenvectors lost orthonormality")
    return [(float(vals[m]), vecs[:, m].copy()) for m in range(count)]


def band_values(a_matrix: np.ndarray, count: int) -> np.ndarray:
    """Eigenvalues only (ascending), for sweeps that do not need vectors."""
    return scipy.linalg.eigh(a_matrix, eigvals_only=True, subset_by_index=[0, count - 1])


def free_space_bands(j, epsilon: float, count: int) -> list[tuple[float, tuple[int, int]]]:
    """Closed-form bands of the a = 1 operator: mu = 4 pi^2 |k+j|^2 / eps^2.

    Returns the `count` lowest (mu, k) pairs; ties are broken lexicographically
    in k so the numbering k(m) is deterministic.
    """
    jv = np.asarray(canonical_j(j))
    bound = 2
    while True:
        r = np.arange(-bound, bound + 1)
        k1, k2 = np.meshgrid(r, r, indexing="ij")
        ks = np.stack([k1.ravel(), k2.ravel()], axis=-1)
        mu = 4.0 * np.pi**2 * np.sum((ks + jv) ** 2, axis=1) / epsilon**2
        order = sorted(range(len(ks)), key=lambda i: (mu[i], int(ks[i, 0]), int(ks[i, 1])))
        # safe if the count-th value cannot be beaten by any k outside the box
        safe_mu = 4.0 * np.pi**2 * (bound - 1) ** 2 / epsilon**2
        if count <= len(order) and mu[order[count - 1]] < safe_mu:
            return [(float(mu[i]), (int(ks[i, 0]), int(ks[i, 1]))) for i in order[:count]]
        bound *= 2


def free_space_mode(j, epsilon: float, m: int, count_hint: int | None = None) -> BlochMode:
    bands = free_space_bands(j, epsilon, max(m + 1, count_hint or 0))
    mu, k = bands[m]
    return BlochMode(j=canonical_j(j), m=m, mu=mu,
                     g_list=np.array([k], dtype=int),
                     coeffs=np.array([1.0 + 0.0j]),
                     side="minus", epsilon=epsilon)


class BasisProvider:
    """Caching source of Bloch modes for both sides of the interface.

    Crystal modes come from the plane-wave eigensolve of `field`; free-space
    modes use the closed form.  The cache is safe for concurrent insert-or-get.
    """

    def __init__(self, field: CoefficientField, cutoff: int):
        self.field = field
        self.cutoff = cutoff
        self.epsilon = field.epsilon
        self._a_hat = fourier_coefficients(field, cutoff)
        self._lock = threading.Lock()
        self._cache: dict[tuple, list[BlochMode]] = {}
        self._aux: dict[tuple, object] = {}

    @property
    def a_hat(self) -> dict[tuple[int, int], complex]:
        return self._a_hat

    def cached(self, key: tuple, builder):
        """Insert-or-get for derived tables (Poynting grids, band grids, ...)."""
        with self._lock:
            hit = self._aux.get(key)
        if hit is not None:
            return hit
        value = builder()
        with self._lock:
            return self._aux.setdefault(key, value)

    def modes(self, side: str, j, count: int) -> list[BlochMode]:
        jc = canonical_j(j)
        key = (side, round(jc[0], 12), round(jc[1], 12))
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None and len(hit) >= count:
            return hit[:count]
        if side == "minus":
            out = [free_space_mode(jc, self.epsilon, m, count_hint=count) for m in range(count)]
        elif side == "plus":
            a_mat = assemble_cell_operator(self._a_hat, jc, self.epsilon, self.cutoff)
            pairs = solve_bands(a_mat, count)
            g = g_lattice(self.cutoff)
            out = [BlochMode(j=jc, m=m, mu=mu, g_list=g, coeffs=vec, side="plus",
                             epsilon=self.epsilon)
                   for m, (mu, vec) in enumerate(pairs)]
        else:
            raise ValidationError(f"side must be 'plus' or 'minus', got {side!r}")
        with self._lock:
            old = self._cache.get(key)
            if old is None or len(old) < len(out):
                self._cache[key] = out
            else:
                out = old
        return out[:count]

    def band_grid(self, side: str, R: int, count: int) -> BandStructure:
        """Band values on the Q_R x Q_R grid (eigenvalues only, batched)."""
        q = np.arange(R) / R
        pts = np.stack(np.meshgrid(q, q, indexing="ij"), axis=-1).reshape(-1, 2)
        vals = self.band_on_points(side, pts, count).reshape(R, R, count)
        return BandStructure(R=R, bands=vals, side=side, epsilon=self.epsilon)

    def _conv_matrix(self) -> np.ndarray:
        key = ("conv", self.cutoff)
        with self._lock:
            hit = self._aux.get(key)
        if hit is not None:
            return hit
        g = g_lattice(self.cutoff)
        arr = _a_hat_array(self._a_hat, 2 * self.cutoff)
        d1 = g[:, None, 0] - g[None, :, 0]
        d2 = g[:, None, 1] - g[None, :, 1]
        conv = arr[d1 + 2 * self.cutoff, d2 + 2 * self.cutoff]
        with self._lock:
            return self._aux.setdefault(key, conv)

    def band_on_points(self, side: str, points: np.ndarray, count: int) -> np.ndarray:
        """Band values at arbitrary phase vectors, shape (npts, count)."""
        points = np.mod(np.atleast_2d(np.asarray(points, dtype=float)), 1.0)
        out = np.empty((len(points), count))
        if side == "minus":
            # enumerate a lattice box large enough that the count-th smallest
            # |k+j|^2 cannot be undercut by anything outside the box
            bound = 2
            while (bound - 1) ** 2 < count + 1:
                bound += 1
            r = np.arange(-bound, bound + 1)
            k1, k2 = np.meshgrid(r, r, indexing="ij")
            ks = np.stack([k1.ravel(), k2.ravel()], axis=-1)
            dist = ((ks[None, :, 0] + points[:, None, 0]) ** 2
                    + (ks[None, :, 1] + points[:, None, 1]) ** 2)
            part = np.sort(dist, axis=1)[:, :count]
            return 4.0 * np.pi**2 * part / self.epsilon**2
        conv = self._conv_matrix()
        g = g_lattice(self.cutoff)
        chunk = 64
        scale = 4.0 * np.pi**2 / self.epsilon**2
        for lo in range(0, len(points), chunk):
            sub = points[lo:lo + chunk]
            p = g[None, :, :] + sub[:, None, :]
            dots = np.einsum("bid,bkd->bik", p, p)
            mats = scale * dots * conv[None, :, :]
            out[lo:lo + chunk] = np.linalg.eigvalsh(mats)[:, :count]
        return out


def group_velocity(provider: BasisProvider, side: str, j, m: int,
                   fd_step: float = 1e-3) -> tuple[np.ndarray, bool]:
    """Gradient of the m-th band at j.

    Uses the Hellmann-Feynman identity on simple eigenvalues; near a degeneracy
    (relative gap below 1e-6) falls back to central differences of the band
    value and flags the result.
    """
    jc = canonical_j(j)
    if side == "minus":
        mode = free_space_mode(jc, provider.epsilon, m)
        k = mode.g_list[0]
        # check simplicity against neighbors in the closed-form list
        bands = free_space_bands(jc, provider.epsilon, m + 2)
        simple = _is_simple([mu for mu, _ in bands], m)
        if simple:
            vec = 8.0 * np.pi**2 * (np.asarray(k, dtype=float) + np.asarray(jc)) / provider.epsilon**2
            return vec, False
        return _fd_gradient(provider, side, jc, m, fd_step), True

    modes = provider.modes("plus", jc, m + 2)
    mus = [md.mu for md in modes]
    if _is_simple(mus, m):
        mode = modes[m]
        g = mode.g_list
        c = mode.coeffs
        arr = _a_hat_array(provider.a_hat, 2 * provider.cutoff)
        d1 = g[:, None, 0] - g[None, :, 0]
        d2 = g[:, None, 1] - g[None, :, 1]
        conv = arr[d1 + 2 * provider.cutoff, d2 + 2 * provider.cutoff]
        vec = np.empty(2)
        for axis in range(2):
            s = g[:, None, axis] + g[None, :, axis] + 2.0 * jc[axis]
            da = (4.0 * np.pi**2 / provider.epsilon**2) * s * conv
            vec[axis] = float(np.real(c.conj() @ (da @ c)))
        return vec, False
    return _fd_gradient(provider, "plus", jc, m, fd_step), True


def _is_simple(mus, m: int) -> bool:
    mu = mus[m]
    tol = 1e-6 * max(1.0, abs(mu))
    if m > 0 and mu - mus[m - 1] < tol:
        return False
    if m + 1 < len(mus) and mus[m + 1] - mu < tol:
        return False
    return True


def _fd_gradient(provider: BasisProvider, side: str, j, m: int, step: float) -> np.ndarray:
    out = np.empty(2)
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = step
        hi = provider.band_on_points(side, np.asarray(j) + e, m + 1)[0, m]
        lo = provider.band_on_points(side, np.asarray(j) - e, m + 1)[0, m]
        out[axis] = (hi - lo) / (2 * step)
    return out


def check_frequency_smallness(provider: BasisProvider, omega: float,
                              grid_n: int = 32) -> dict:
    """Frequency admissibility: omega^2 must lie below the second band of both
    sides.  Returns the grid infima and the margin min(inf) - omega^2."""
    if grid_n < 8:
        raise ValidationError("frequency check needs grid_n >= 8")
    q = np.arange(grid_n) / grid_n
    pts = np.stack(np.meshgrid(q, q, indexing="ij"), axis=-1).reshape(-1, 2)
    inf_plus = float(np.min(provider.band_on_points("plus", pts, 2)[:, 1]))
    inf_minus = float(np.min(provider.band_on_points("minus", pts, 2)[:, 1]))
    margin = min(inf_plus, inf_minus) - omega**2
    return {"ok": bool(margin > 0), "margin": margin,
            "inf_plus": inf_plus, "inf_minus": inf_minus}


def isofrequency_contour(provider: BasisProvider, side: str, m: int, omega_sq: float,
                         grid_n: int) -> list[np.ndarray]:
    """Level set {j : mu_m(j) = omega^2} as polylines in Z = [0,1]^2.

    Marching squares on a (grid_n+1)^2 sampling that duplicates the periodic
    wrap row, so contours close across the zone boundary.  Returns an empty
    list when the level set is empty.
    """
    from skimage import measure

    q = np.arange(grid_n + 1) / grid_n
    pts = np.stack(np.meshgrid(np.mod(q, 1.0), np.mod(q, 1.0), indexing="ij"),
                   axis=-1).reshape(-1, 2)
    vals = provider.band_on_points(side, pts, m + 1)[:, m].reshape(grid_n + 1, grid_n + 1)
    if omega_sq < vals.min() or omega_sq > vals.max():
        return []
    contours = measure.find_contours(vals, level=omega_sq)
    return [c / grid_n for c in contours]
