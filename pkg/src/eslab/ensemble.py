"""Ensemble states in three representations, with entropy and expectation.

A density state is one of

* :class:`ParticleEnsemble` - weighted samples, any dimension;
* :class:`GridDensity` - cell-centred values on a uniform grid, d <= 2;
* :class:`GaussianDensity` - mean and covariance, used for closed forms.

Entropy is differential entropy and may be negative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma, gammaln
from scipy.stats import norm

from .errors import DegenerateInputError, InputError, TruncationError
from .landscape import Potential
from .rng import normal_block

# cells below this are treated as empty; logs are clamped at LOG_FLOOR_REL * max
DENSITY_FLOOR = 1e-300
LOG_FLOOR_REL = 1e-12
KNN_K = 3
MAX_GRID_DIM = 2
SAMPLE_STREAM = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    positions: np.ndarray
    weights: np.ndarray = None
    seed_provenance: int = 0

    def __post_init__(self):
        x = np.asarray(self.positions, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 1:
            raise InputError(f"particle positions must be an (N>=2, d>=1) array, got shape {x.shape}")
        if self.weights is None:
            w = np.full(x.shape[0], 1.0 / x.shape[0])
        else:
            w = np.asarray(self.weights, dtype=float).reshape(-1)
            if w.shape[0] != x.shape[0]:
                raise InputError("weights and positions disagree on N")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise InputError("particle weights must be non-negative and sum to 1")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    def mean(self) -> np.ndarray:
        return self.weights @ self.positions

    def covariance(self) -> np.ndarray:
        c = self.positions - self.mean()
        return (c * self.weights[:, None]).T @ c


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Piecewise-constant density on a uniform tensor grid.

    ``values[i]`` is the density (not the mass) of cell ``i``.
    """

    domain: tuple
    cells: tuple
    values: np.ndarray
    _centers: tuple = field(init=False, repr=False)

    def __post_init__(self):
        domain = tuple((float(lo), float(hi)) for lo, hi in np.atleast_2d(np.asarray(self.domain, float)))
        cells = tuple(int(c) for c in np.atleast_1d(self.cells))
        if len(domain) != len(cells):
            raise InputError("domain and cells must have one entry per axis")
        if not 1 <= len(cells) <= MAX_GRID_DIM:
            raise InputError(f"grid densities support 1 <= d <= {MAX_GRID_DIM}, got d={len(cells)}")
        if any(hi <= lo for lo, hi in domain) or any(c < 2 for c in cells):
            raise InputError("each axis needs hi > lo and at least 2 cells")
        values = np.asarray(self.values, dtype=float).reshape(cells)
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InputError("grid values must be finite and non-negative")
        centers = tuple(
            lo + (np.arange(n) + 0.5) * (hi - lo) / n for (lo, hi), n in zip(domain, cells)
        )
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_centers", centers)

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def widths(self) -> np.ndarray:
        return np.array([(hi - lo) / n for (lo, hi), n in zip(self.domain, self.cells)])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def centers(self) -> tuple:
        """Per-axis cell-centre coordinates."""
        return self._centers

    def points(self) -> np.ndarray:
        """Cell centres as an array of shape ``cells + (d,)``."""
        mesh = np.meshgrid(*self._centers, indexing="ij")
        return np.stack(mesh, axis=-1)

    def edges(self, axis: int = 0) -> np.ndarray:
        (lo, hi), n = self.domain[axis], self.cells[axis]
        return np.linspace(lo, hi, n + 1)

    def mass(self) -> float:
        return float(np.sum(self.values) * self.cell_volume)

    def with_values(self, values) -> GridDensity:
        return GridDensity(self.domain, self.cells, values)

    def same_grid(self, other: GridDensity) -> bool:
        return self.cells == other.cells and np.allclose(self.domain, other.domain, rtol=0, atol=1e-12)

    def mean(self) -> np.ndarray:
        w = self.values * self.cell_volume
        return np.array([np.sum(w * self.points()[..., i]) for i in range(self.dim)]) / w.sum()

    def covariance(self) -> np.ndarray:
        w = (self.values * self.cell_volume).reshape(-1)
        pts = self.points().reshape(-1, self.dim)
        c = pts - w @ pts / w.sum()
        return (c * w[:, None]).T @ c / w.sum()


@dataclass(frozen=True, eq=False)
class GaussianDensity:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if mu.ndim != 1 or cov.shape != (mu.size, mu.size):
            raise InputError(f"covariance must be {mu.size}x{mu.size}, got {cov.shape}")
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(cov))):
            raise InputError("covariance must be symmetric")
        cov = 0.5 * (cov + cov.T)
        if not np.all(np.isfinite(cov)) or np.linalg.eigvalsh(cov)[0] <= 0:
            raise InputError("covariance must be positive definite")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "covariance", cov)

    @classmethod
    def isotropic(cls, mean, var: float) -> GaussianDensity:
        mu = np.atleast_1d(np.asarray(mean, dtype=float))
        return cls(mu, float(var) * np.eye(mu.size))

    @property
    def dim(self) -> int:
        return self.mean.size

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        diff = x - self.mean
        prec = np.linalg.inv(self.covariance)
        quad = np.einsum("...i,ij,...j->...", diff, prec, diff)
        _, logdet = np.linalg.slogdet(self.covariance)
        return np.exp(-0.5 * quad - 0.5 * logdet - 0.5 * self.dim * math.log(2 * math.pi))


DensityState = Union[ParticleEnsemble, GridDensity, GaussianDensity]


def normalize(g: GridDensity) -> GridDensity:
    """Rescale a grid so its midpoint-rule mass is one."""
    total = math.fsum(g.values.ravel()) * g.cell_volume
    if not total > 0:
        raise DegenerateInputError("cannot normalize a grid with zero mass")
    return g.with_values(g.values / total)


def log_density(g: GridDensity) -> np.ndarray:
    """log of grid values with the absolute floor and the relative clamp applied."""
    floor = max(DENSITY_FLOOR, LOG_FLOOR_REL * float(np.max(g.values)))
    return np.log(np.maximum(g.values, floor))


def entropy(q: DensityState, k: int = KNN_K) -> float:
    """Differential entropy -int q log q.

    Gaussian: closed form.  Grid: midpoint quadrature.  Particles:
    Kozachenko-Leonenko k-nearest-neighbour estimate (uniform weights).
    """
    if isinstance(q, GaussianDensity):
        _, logdet = np.linalg.slogdet(q.covariance)
        return 0.5 * (q.dim * math.log(2 * math.pi * math.e) + logdet)
    if isinstance(q, GridDensity):
        return float(-np.sum(q.values * log_density(q)) * q.cell_volume)
    if isinstance(q, ParticleEnsemble):
        return knn_entropy(q.positions, k=k, weights_uniform=q.is_uniform())
    raise InputError(f"unsupported density type {type(q).__name__}")


def knn_entropy(x, k: int = KNN_K, weights_uniform: bool = True) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if n < k + 1:
        raise InputError(f"k-NN entropy with k={k} needs at least {k + 1} particles, got {n}")
    if not weights_uniform:
        raise InputError("k-NN entropy requires uniformly weighted particles")
    dist, _ = cKDTree(x).query(x, k=k + 1)
    r = dist[:, k]
    positive = r[r > 0]
    if positive.size == 0:
        raise DegenerateInputError("all particles coincide; entropy is -inf")
    r = np.maximum(r, positive.min())
    log_unit_ball = 0.5 * d * math.log(math.pi) - gammaln(0.5 * d + 1)
    return float(digamma(n) - digamma(k) + log_unit_ball + d * np.mean(np.log(r)))


def expectation(q: DensityState, p: Potential) -> float:
    """Ensemble average of the potential."""
    if q.dim != p.dim:
        raise InputError(f"density dimension {q.dim} does not match potential dimension {p.dim}")
    if isinstance(q, GaussianDensity):
        if p.kind == "Quadratic":
            return 0.5 * p.stiffness * float(q.mean @ q.mean + np.trace(q.covariance))
        return _gauss_hermite_expectation(q, p)
    if isinstance(q, GridDensity):
        return float(np.sum(q.values * p.value(q.points())) * q.cell_volume)
    if isinstance(q, ParticleEnsemble):
        return float(q.weights @ p.value(q.positions))
    raise InputError(f"unsupported density type {type(q).__name__}")


def _gauss_hermite_expectation(q: GaussianDensity, p: Potential, nodes: int = 48) -> float:
    z, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()
    grids = np.meshgrid(*([z] * q.dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.prod(np.meshgrid(*([w] * q.dim), indexing="ij"), axis=0).ravel()
    chol = np.linalg.cholesky(q.covariance)
    return float(wts @ p.value(q.mean + pts @ chol.T))


def sample(g: GaussianDensity, n: int, seed: int) -> ParticleEnsemble:
    """Draw ``n`` particles from ``g``; identical for identical seeds."""
    if n < 2:
        raise InputError(f"need at least 2 particles, got {n}")
    try:
        chol = np.linalg.cholesky(g.covariance)
    except np.linalg.LinAlgError:
        raise InputError("covariance is not positive definite") from None
    z = normal_block(seed, SAMPLE_STREAM, range(n), g.dim)
    return ParticleEnsemble(g.mean + z @ chol.T, None, seed)


def grid_from_gaussian(g: GaussianDensity, domain, cells) -> GridDensity:
    """Tabulate ``g`` at cell centres and normalize.

    Raises :class:`TruncationError` if more than 1e-6 of the mass falls
    outside the domain (union bound over axes) or a cell is wider than half
    a marginal standard deviation.
    """
    domain = np.atleast_2d(np.asarray(domain, dtype=float))
    cells = np.atleast_1d(cells)
    if domain.shape[0] != g.dim or cells.size != g.dim:
        raise InputError("domain/cells dimension does not match the Gaussian")
    sd = np.sqrt(np.diag(g.covariance))
    clipped = 0.0
    for (lo, hi), m, s in zip(domain, g.mean, sd):
        clipped += norm.cdf(lo, m, s) + norm.sf(hi, m, s)
    if clipped > 1e-6:
        raise TruncationError(f"domain clips {clipped:.3g} of the Gaussian mass (limit 1e-6)")
    widths = (domain[:, 1] - domain[:, 0]) / cells
    if np.any(widths > sd / 2):
        raise TruncationError(
            f"grid under-resolves the Gaussian: cell width {widths.max():.3g} > sigma/2 = {sd.min() / 2:.3g}"
        )
    grid = GridDensity(domain, cells, np.zeros(tuple(cells)))
    return normalize(grid.with_values(g.pdf(grid.points())))


def shift(q: DensityState, c) -> DensityState:
    """Translate a density by the vector ``c``."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if isinstance(q, GaussianDensity):
        return GaussianDensity(q.mean + c, q.covariance)
    if isinstance(q, ParticleEnsemble):
        return ParticleEnsemble(q.positions + c, q.weights, q.seed_provenance)
    if isinstance(q, GridDensity):
        domain = [(lo + ci, hi + ci) for (lo, hi), ci in zip(q.domain, c)]
        return GridDensity(domain, q.cells, q.values)
    raise InputError(f"unsupported density type {type(q).__name__}")
