"""Cosine Fourier basis on a box domain and spectral trajectory statistics.

The basis functions are

    F_k(x) = (1/h_k) * prod_i cos(k_i * pi * (x_i - lower_i) / L_i)

with h_k chosen so each F_k has unit L2 norm on the box. A trajectory is
summarized by the time-averaged coefficients c_k = (1/T) int F_k(x(t)) dt,
a target distribution by coefficients phi_k, and the distance from
ergodicity by the weighted squared coefficient distance.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box: per-dimension lower bound and positive extent."""

    lower: np.ndarray
    lengths: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        lengths = np.atleast_1d(np.asarray(self.lengths, dtype=float))
        if lower.shape != lengths.shape or lower.ndim != 1 or lower.size < 1:
            raise ValueError("lower and lengths must be 1-D vectors of equal size")
        if np.any(lengths <= 0.0):
            raise ValueError("domain lengths must be strictly positive")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "lengths", lengths)

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def upper(self) -> np.ndarray:
        return self.lower + self.lengths

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def volume(self) -> float:
        return float(np.prod(self.lengths))


def lattice(order: int, n: int) -> np.ndarray:
    """Full multi-index lattice {0..order}^n as an (M, n) int array, row-major."""
    if order < 0 or n < 1:
        raise ValueError("order must be >= 0 and n >= 1")
    grids = np.meshgrid(*([np.arange(order + 1)] * n), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


@dataclass(frozen=True)
class CoefficientSet:
    """Dense coefficients over the full lattice {0..order}^n, row-major flat."""

    order: int
    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        expected = (self.order + 1) ** self.domain.n
        if values.size != expected:
            raise ValueError(
                f"expected {expected} coefficients for order {self.order} "
                f"in {self.domain.n} dims, got {values.size}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.domain.n

    def reshaped(self) -> np.ndarray:
        return self.values.reshape((self.order + 1,) * self.n)


@dataclass(frozen=True)
class FrequencyWeights:
    """Per-mode weights (1 + ||k||^2)^(-(n+1)/2), aligned with the flat lattice."""

    order: int
    n: int
    values: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        ks = lattice(self.order, self.n)
        s = (self.n + 1) / 2.0
        vals = (1.0 + np.sum(ks.astype(float) ** 2, axis=1)) ** (-s)
        object.__setattr__(self, "values", vals)


def frequency_weights(order: int, n: int) -> FrequencyWeights:
    return FrequencyWeights(order=order, n=n)


def normalizer(k, domain: Domain) -> float:
    """Unit-L2 normalizing factor: prod of sqrt(L_i) if k_i=0 else sqrt(L_i/2)."""
    k = np.atleast_1d(np.asarray(k, dtype=int))
    if k.size != domain.n:
        raise ValueError(f"multi-index has {k.size} entries, domain has {domain.n} dims")
    per_dim = np.where(k == 0, np.sqrt(domain.lengths), np.sqrt(domain.lengths / 2.0))
    return float(np.prod(per_dim))


def mass_normalizer(domain: Domain) -> float:
    """h at the all-zeros index; every normalized coefficient set has 1/h there."""
    return float(np.prod(np.sqrt(domain.lengths)))


def basis_eval(k, x, domain: Domain) -> float:
    """Evaluate one basis function F_k at a single point."""
    k = np.atleast_1d(np.asarray(k, dtype=int))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != domain.n or k.size != domain.n:
        raise ValueError("dimension mismatch between k, x, and domain")
    z = (x - domain.lower) / domain.lengths
    return float(np.prod(np.cos(k * np.pi * z)) / normalizer(k, domain))


def _per_dim_normalizers(order: int, domain: Domain) -> list[np.ndarray]:
    out = []
    for i in range(domain.n):
        h = np.full(order + 1, np.sqrt(domain.lengths[i] / 2.0))
        h[0] = np.sqrt(domain.lengths[i])
        out.append(h)
    return out


def basis_matrix(points: np.ndarray, order: int, domain: Domain) -> np.ndarray:
    """All basis functions at all points: (N, (order+1)^n) matrix."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != domain.n:
        raise ValueError("points must have domain.n columns")
    ks = lattice(order, domain.n)
    freqs = np.arange(order + 1)
    hs = _per_dim_normalizers(order, domain)
    out = np.ones((points.shape[0], ks.shape[0]))
    for i in range(domain.n):
        z = (points[:, i] - domain.lower[i]) / domain.lengths[i]
        cos_i = np.cos(np.outer(z, freqs * np.pi)) / hs[i]
        out *= cos_i[:, ks[:, i]]
    return out


def basis_gradient(points: np.ndarray, order: int, domain: Domain) -> np.ndarray:
    """Spatial gradients of all basis functions: (N, modes, n) array."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != domain.n:
        raise ValueError("points must have domain.n columns")
    ks = lattice(order, domain.n)
    freqs = np.arange(order + 1)
    hs = _per_dim_normalizers(order, domain)
    n_pts, n_modes = points.shape[0], ks.shape[0]
    cos_parts, dcos_parts = [], []
    for i in range(domain.n):
        z = (points[:, i] - domain.lower[i]) / domain.lengths[i]
        ang = np.outer(z, freqs * np.pi)
        cos_parts.append(np.cos(ang) / hs[i])
        # d/dx_i of cos(k pi (x_i-lo)/L_i) = -(k pi / L_i) sin(...)
        dcos_parts.append(-np.sin(ang) * (freqs * np.pi / domain.lengths[i]) / hs[i])
    grad = np.empty((n_pts, n_modes, domain.n))
    for i in range(domain.n):
        g = dcos_parts[i][:, ks[:, i]]
        for j in range(domain.n):
            if j != i:
                g = g * cos_parts[j][:, ks[:, j]]
        grad[:, :, i] = g
    return grad


def to_domain(points: np.ndarray, domain: Domain, periodic=None):
    """Map points into the box: wrap periodic dims, clamp the rest.

    Returns (mapped points, number of clamped samples). Clamping is counted
    so callers can surface demonstrations that exceed the search bounds.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float)).copy()
    if periodic is None:
        periodic = [False] * domain.n
    clamped = 0
    for i in range(domain.n):
        lo, length = domain.lower[i], domain.lengths[i]
        if periodic[i]:
            points[:, i] = lo + np.mod(points[:, i] - lo, length)
        else:
            out = (points[:, i] < lo) | (points[:, i] > lo + length)
            clamped += int(np.count_nonzero(out))
            points[:, i] = np.clip(points[:, i], lo, lo + length)
    return points, clamped


def traj_coefficients(
    times: np.ndarray,
    points: np.ndarray,
    order: int,
    domain: Domain,
    periodic=None,
) -> CoefficientSet:
    """Time-averaged trajectory coefficients via the trapezoid rule.

    The zero-order coefficient is pinned analytically to 1/h_0 so weighted
    fusions preserve unit mass exactly.
    """
    times = np.asarray(times, dtype=float).ravel()
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if times.size < 2:
        raise ValueError("trajectory needs at least 2 samples")
    if points.shape[0] != times.size:
        raise ValueError("times and points disagree in sample count")
    if np.any(np.diff(times) <= 0.0):
        raise ValueError("timestamps must be strictly increasing")
    mapped, clamped = to_domain(points, domain, periodic)
    if clamped:
        log.warning("clamped %d out-of-domain samples into the box", clamped)
    duration = times[-1] - times[0]
    fmat = basis_matrix(mapped, order, domain)
    vals = np.trapezoid(fmat, times, axis=0) / duration
    vals[0] = 1.0 / mass_normalizer(domain)
    return CoefficientSet(order=order, domain=domain, values=vals)


def delta_coefficients(x_star, order: int, domain: Domain) -> CoefficientSet:
    """Coefficients of a point concentration at x_star (sifting property)."""
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    if not domain.contains(x_star):
        raise ValueError("x_star lies outside the domain box")
    vals = basis_matrix(x_star[None, :], order, domain)[0]
    return CoefficientSet(order=order, domain=domain, values=vals)


def uniform_coefficients(order: int, domain: Domain) -> CoefficientSet:
    """Coefficients of the uniform distribution: only the k=0 entry survives."""
    vals = np.zeros((order + 1) ** domain.n)
    vals[0] = 1.0 / mass_normalizer(domain)
    return CoefficientSet(order=order, domain=domain, values=vals)


def ergodic_metric(c: CoefficientSet, phi: CoefficientSet, weights: FrequencyWeights) -> float:
    """Weighted squared coefficient distance; zero iff the sets coincide."""
    if c.order != phi.order or c.n != phi.n:
        raise ValueError("coefficient sets live on different lattices")
    if weights.order != c.order or weights.n != c.n:
        raise ValueError("frequency weights do not match the lattice")
    diff = c.values - phi.values
    return float(np.dot(weights.values, diff * diff))


def grid_cell_centers(domain: Domain, resolution) -> list[np.ndarray]:
    """Per-dimension cell-center coordinates of a uniform evaluation grid."""
    res = _resolution_tuple(domain, resolution)
    return [
        domain.lower[i] + (np.arange(res[i]) + 0.5) * domain.lengths[i] / res[i]
        for i in range(domain.n)
    ]


def _resolution_tuple(domain: Domain, resolution):
    if np.isscalar(resolution):
        res = (int(resolution),) * domain.n
    else:
        res = tuple(int(r) for r in resolution)
    if len(res) != domain.n or any(r < 2 for r in res):
        raise ValueError("resolution must be >= 2 per dimension")
    return res


def reconstruct_density(
    phi: CoefficientSet, resolution, clip_negative: bool = False
) -> np.ndarray:
    """Pointwise density sum phi_k F_k(x) on a cell-centered grid.

    With clip_negative the grid is floored at zero and renormalized so
    cell-sum times cell-volume equals one. Negative values are legitimate
    for subtractive fusions; clipping is for display only.
    """
    domain = phi.domain
    res = _resolution_tuple(domain, resolution)
    axes = grid_cell_centers(domain, res)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    dens = basis_matrix(pts, phi.order, domain) @ phi.values
    grid = dens.reshape(res)
    if clip_negative:
        grid = np.maximum(grid, 0.0)
        cell_volume = domain.volume() / np.prod(res)
        total = grid.sum() * cell_volume
        if total > 0.0:
            grid = grid / total
    return grid
