"""Ensemble dynamics: Langevin particles, Fokker-Planck grids, closed-form OU.

Physical time is tau in [0, horizon]; records are indexed by the normalized
time s = tau / horizon.  Entropy-production rates stored on a trajectory are
rates per unit *normalized* time, ``horizon**2 * int q |v_tau|^2``, so that
integrating them over s in [0, 1] gives the normalized action, and dividing
that by the horizon gives the physical action.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ensemble import DENSITY_FLOOR, GaussianDensity, GridDensity, ParticleEnsemble
from .errors import BlowUpError, InputError, StabilityError
from .landscape import Potential
from .rng import normal_block

log = logging.getLogger(__name__)

CFL_SAFETY = 0.4
NEG_CLAMP_SILENT = -1e-14
NEG_FAIL = -1e-8


@dataclass(frozen=True)
class Schedule:
    horizon: float
    steps: int
    record_every: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise InputError(f"horizon must be positive, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise InputError(f"steps must be an integer >= 1, got {self.steps}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise InputError(f"record_every must be an integer >= 1, got {self.record_every}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def record_steps(self) -> list[int]:
        """Step indices at which snapshots are taken; always includes 0 and ``steps``."""
        idx = list(range(0, self.steps, self.record_every))
        idx.append(self.steps)
        return idx

    def s_of(self, step: int) -> float:
        return step / self.steps

    @classmethod
    def with_records(cls, horizon: float, steps: int, records: int) -> Schedule:
        """Schedule with roughly ``records`` snapshot intervals."""
        return cls(horizon, steps, max(1, steps // max(1, records)))


@dataclass(eq=False)
class VelocityField:
    """Probability-flow velocity.

    Either sampled on a grid (``values`` has shape ``cells + (d,)``) or affine,
    v(x) = ``matrix`` @ x + ``offset``, for Gaussian states.
    """

    values: np.ndarray | None = None
    grid: GridDensity | None = None
    matrix: np.ndarray | None = None
    offset: np.ndarray | None = None

    @property
    def is_affine(self) -> bool:
        return self.matrix is not None

    def __call__(self, x) -> np.ndarray:
        if not self.is_affine:
            raise InputError("only affine velocity fields can be evaluated at arbitrary points")
        return np.asarray(x, float) @ self.matrix.T + self.offset


@dataclass(eq=False)
class TrajectoryRecord:
    snapshots: list  # [(s, DensityState)]
    sigma_series: np.ndarray | None
    schedule: Schedule
    T: float
    potential: Potential
    thermo: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    sigma_fn: Callable[[float], float] | None = None

    def __post_init__(self):
        s = np.array([sk for sk, _ in self.snapshots])
        if s.size < 2 or s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
            raise InputError("snapshot times must increase strictly from s=0 to s=1")
        if self.sigma_series is not None:
            sig = np.asarray(self.sigma_series, dtype=float)
            if sig.shape != s.shape or np.any(sig < 0):
                raise InputError("sigma series must be non-negative with one entry per snapshot")
            self.sigma_series = sig

    @property
    def times(self) -> np.ndarray:
        return np.array([sk for sk, _ in self.snapshots])

    @property
    def states(self) -> list:
        return [q for _, q in self.snapshots]

    @property
    def horizon(self) -> float:
        return self.schedule.horizon

    @property
    def representation(self) -> str:
        q = self.snapshots[0][1]
        if isinstance(q, GridDensity):
            return "grid"
        if isinstance(q, GaussianDensity):
            return "gaussian"
        return "particles"


# ---------------------------------------------------------------------------
# Langevin particles


def langevin_step(
    e: ParticleEnsemble,
    p: Potential,
    T: float,
    dt: float,
    seed: int,
    step: int = 0,
    workers: int = 1,
) -> ParticleEnsemble:
    """One Euler-Maruyama step x <- x - grad(phi) dt + sqrt(2 T dt) xi.

    ``(seed, step)`` selects the noise stream; particle ``i`` always reads
    rows ``i`` of it, whatever the worker split.
    """
    if not dt > 0:
        raise InputError(f"dt must be positive, got {dt}")
    if T < 0:
        raise InputError(f"temperature must be non-negative, got {T}")
    if e.dim != p.dim:
        raise InputError(f"ensemble dimension {e.dim} does not match potential dimension {p.dim}")
    x = e.positions
    noise_scale = math.sqrt(2.0 * T * dt)

    def block(lo, hi):
        xb = x[lo:hi]
        with np.errstate(over="ignore", invalid="ignore"):
            out = xb - dt * p.gradient(xb)
        if noise_scale > 0:
            out = out + noise_scale * normal_block(seed, step, range(lo, hi), e.dim)
        return out

    bounds = _blocks(e.n, workers)
    if len(bounds) == 1:
        new = block(*bounds[0])
    else:
        with ThreadPoolExecutor(max_workers=len(bounds)) as pool:
            new = np.concatenate(list(pool.map(lambda b: block(*b), bounds)))
    if not np.all(np.isfinite(new)):
        raise BlowUpError(f"Langevin integration produced non-finite positions at step {step}", step=step)
    return ParticleEnsemble(new, e.weights, e.seed_provenance)


def _blocks(n, workers):
    workers = max(1, min(int(workers), n))
    edges = np.linspace(0, n, workers + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def simulate_langevin(
    e0: ParticleEnsemble,
    p: Potential,
    T: float,
    sched: Schedule,
    seed: int,
    workers: int = 1,
    thermo: bool = True,
) -> TrajectoryRecord:
    """Euler-Maruyama trajectory; snapshots per ``sched``.

    Entropy-production rates are not estimated for raw particle clouds, so
    ``sigma_series`` is ``None``.  With ``thermo`` the free energy of each
    snapshot is recorded using the k-NN entropy estimate.
    """
    from .thermo import free_energy

    records = set(sched.record_steps())
    snaps = [(0.0, e0)]
    reports = [free_energy(e0, p, T, at_s=0.0)] if thermo else []
    e = e0
    for n in range(sched.steps):
        e = langevin_step(e, p, T, sched.dt, seed, n, workers)
        if n + 1 in records:
            s = sched.s_of(n + 1)
            snaps.append((s, e))
            if thermo:
                reports.append(free_energy(e, p, T, at_s=s))
    return TrajectoryRecord(snaps, None, sched, T, p, reports, {"seed": seed, "particles": e0.n})


# ---------------------------------------------------------------------------
# Fokker-Planck on grids


def cfl_dt(grid: GridDensity, p: Potential, T: float) -> float:
    """Largest stable explicit step: 0.4 * min(dx^2 / (2 d T), dx / max|grad phi|)."""
    dx = float(np.min(grid.widths))
    bound = math.inf
    if T > 0:
        bound = dx * dx / (2 * grid.dim * T)
    gmax = max(float(np.max(np.abs(b))) for b in _FPOperator.face_drifts(grid, p))
    if gmax > 0:
        bound = min(bound, dx / gmax)
    if not math.isfinite(bound):
        return math.inf
    return CFL_SAFETY * bound


class _FPOperator:
    """Explicit conservative update with exponentially fitted upwind fluxes.

    The face flux between cells l and r is the Scharfetter-Gummel flux
    (T/dx^2) [B(w) q_l - B(-w) q_r] with w = (phi_r - phi_l)/T and
    B(x) = x/(e^x - 1).  It reduces to plain upwinding of the drift as
    T -> 0 and to centred diffusion where phi is flat, and it vanishes
    exactly on the discrete Gibbs state exp(-phi/T), so that state is a
    fixed point and the discrete free energy is nonincreasing under the
    CFL bound.  Boundary faces carry no flux.
    """

    def __init__(self, grid: GridDensity, p: Potential, T: float, dt: float):
        if grid.dim != p.dim:
            raise InputError(f"grid dimension {grid.dim} does not match potential dimension {p.dim}")
        if T < 0:
            raise InputError(f"temperature must be non-negative, got {T}")
        if not dt > 0:
            raise InputError(f"dt must be positive, got {dt}")
        limit = cfl_dt(grid, p, T)
        if dt > limit * (1 + 1e-12):
            raise StabilityError(
                f"dt={dt:.4g} violates the CFL bound; use dt <= {limit:.4g}", suggested_dt=limit
            )
        self.dim = grid.dim
        self.dt = dt
        self.coef = []
        phi = p.value(grid.points())
        outflow = np.zeros(grid.cells)
        for axis in range(grid.dim):
            dx = grid.widths[axis]
            lo = [slice(None)] * grid.dim
            hi = [slice(None)] * grid.dim
            lo[axis], hi[axis] = slice(None, -1), slice(1, None)
            dphi = phi[tuple(hi)] - phi[tuple(lo)]
            lam = dt / (dx * dx)
            # flux = cl * q_left + cr * q_right, pre-multiplied by dt/dx
            cl = lam * _fitted(dphi, T)
            cr = -lam * _fitted(-dphi, T)
            outflow[tuple(lo)] += cl
            outflow[tuple(hi)] -= cr
            self.coef.append((cl, cr))
        worst = float(outflow.max())
        if worst > 1.0:
            raise StabilityError(
                f"dt={dt:.4g} lets a cell lose more than its mass in one step", suggested_dt=dt / worst
            )

    @staticmethod
    def face_drifts(grid: GridDensity, p: Potential):
        """Drift -grad(phi) on the interior faces of each axis."""
        drifts = []
        for axis in range(grid.dim):
            coords = list(grid.centers)
            e = grid.edges(axis)
            coords[axis] = e[1:-1]
            mesh = np.stack(np.meshgrid(*coords, indexing="ij"), axis=-1)
            b = -p.gradient(mesh)[..., axis]
            drifts.append(b)
        return drifts

    def apply(self, q: np.ndarray) -> np.ndarray:
        out = q.copy()
        if self.dim == 1:
            cl, cr = self.coef[0]
            flux = cl * q[:-1] + cr * q[1:]
            out[:-1] -= flux
            out[1:] += flux
        else:
            cl, cr = self.coef[0]
            flux = cl * q[:-1, :] + cr * q[1:, :]
            out[:-1, :] -= flux
            out[1:, :] += flux
            cl, cr = self.coef[1]
            flux = cl * q[:, :-1] + cr * q[:, 1:]
            out[:, :-1] -= flux
            out[:, 1:] += flux
        return out


def _fitted(dphi: np.ndarray, T: float) -> np.ndarray:
    """T * B(dphi / T) with B(x) = x / (e^x - 1); equals max(-dphi, 0) at T = 0."""
    if T == 0:
        return np.maximum(-dphi, 0.0)
    x = dphi / T
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        b = np.where(x == 0.0, 1.0, x / np.expm1(x))
    return T * b


def _enforce_positivity(q: np.ndarray, step) -> tuple[np.ndarray, int]:
    qmin = float(q.min())
    if qmin >= 0.0:
        return q, 0
    if qmin < NEG_FAIL:
        raise BlowUpError(f"negative density {qmin:.3g} after Fokker-Planck step {step}", step=step)
    bad = q < 0
    n = int(bad.sum())
    if qmin < NEG_CLAMP_SILENT:
        log.warning("clamped %d negative cells (min %.3g) at step %s", n, qmin, step)
    q = np.where(bad, 0.0, q)
    return q, n


def fp_step(q: GridDensity, p: Potential, T: float, dt: float) -> GridDensity:
    """One explicit finite-volume Fokker-Planck step with no-flux boundaries."""
    op = _FPOperator(q, p, T, dt)
    values, _ = _enforce_positivity(op.apply(q.values), 0)
    return q.with_values(values)


def velocity_field(q: GridDensity, p: Potential, T: float) -> VelocityField:
    """v = -grad(phi + T log q) sampled at cell centres.

    For T > 0 the gradient is taken of ``log q + phi / T`` (the log-density
    relative to the Gibbs state), which vanishes identically at equilibrium.
    Central differences inside, second-order one-sided at the boundary.
    Cells below the density floor get v = 0.
    """
    if q.dim != p.dim:
        raise InputError(f"grid dimension {q.dim} does not match potential dimension {p.dim}")
    if T < 0:
        raise InputError(f"temperature must be non-negative, got {T}")
    pts = q.points()
    if T == 0:
        v = -p.gradient(pts)
    else:
        g = np.log(np.maximum(q.values, DENSITY_FLOOR)) + p.value(pts) / T
        comps = []
        for axis in range(q.dim):
            comps.append(-T * np.gradient(g, q.widths[axis], axis=axis, edge_order=2))
        v = np.stack(comps, axis=-1)
    v = np.where((q.values < DENSITY_FLOOR)[..., None], 0.0, v)
    return VelocityField(values=v, grid=q)


def gaussian_velocity(g: GaussianDensity, p: Potential, T: float) -> VelocityField:
    """Affine velocity -k x + T Sigma^{-1} (x - mu) of a Gaussian under a quadratic potential."""
    if p.kind != "Quadratic":
        raise InputError("closed-form Gaussian velocity requires a Quadratic potential")
    k = p.stiffness
    prec = np.linalg.inv(g.covariance)
    matrix = -k * np.eye(g.dim) + T * prec
    return VelocityField(matrix=matrix, offset=-T * prec @ g.mean)


def simulate_fp(
    q0: GridDensity,
    p: Potential,
    T: float,
    sched: Schedule,
    monitor: bool = True,
) -> TrajectoryRecord:
    """Evolve a grid density; record snapshots, free energies and sigma.

    With ``monitor`` the free energy is evaluated after every step and the
    largest single-step increase is stored in ``diagnostics``.
    """
    from .thermo import entropy_production_rate, free_energy

    op = _FPOperator(q0, p, T, sched.dt)
    records = set(sched.record_steps())
    phi_dv = p.value(q0.points()) * q0.cell_volume
    dv = q0.cell_volume
    h2 = sched.horizon ** 2

    def fe(values):
        return _grid_free_energy(values, phi_dv, dv, T)

    def record(s, grid):
        snaps.append((s, grid))
        reports.append(free_energy(grid, p, T, at_s=s))
        sigmas.append(h2 * entropy_production_rate(grid, velocity_field(grid, p, T)))

    snaps, reports, sigmas = [], [], []
    record(0.0, q0)
    mass0 = math.fsum(q0.values.ravel()) * dv
    values = q0.values
    f_prev = fe(values) if monitor else None
    worst_rise = -math.inf
    clamped = 0
    for n in range(1, sched.steps + 1):
        values, c = _enforce_positivity(op.apply(values), n)
        clamped += c
        if monitor:
            f_now = fe(values)
            worst_rise = max(worst_rise, f_now - f_prev)
            f_prev = f_now
        if n in records:
            record(sched.s_of(n), q0.with_values(values))
    diag = {
        "dt": sched.dt,
        "cells": list(q0.cells),
        "mass_drift": math.fsum(values.ravel()) * dv - mass0,
        "clamped_cells": clamped,
    }
    if monitor:
        diag["max_free_energy_rise"] = worst_rise
    return TrajectoryRecord(snaps, np.array(sigmas), sched, T, p, reports, diag)


def _grid_free_energy(values, phi_dv, dv, T):
    e_phi = float(np.sum(values * phi_dv))
    if T == 0:
        return e_phi
    floor = max(DENSITY_FLOOR, 1e-12 * float(values.max()))
    h = -float(np.sum(values * np.log(np.maximum(values, floor)))) * dv
    return e_phi - T * h


# ---------------------------------------------------------------------------
# Closed-form Ornstein-Uhlenbeck


def ou_moments(mean0, cov0, k: float, T: float, tau: float):
    """Mean and covariance at physical time ``tau`` under phi = k/2 |x|^2."""
    mean0 = np.atleast_1d(np.asarray(mean0, dtype=float))
    cov0 = np.atleast_2d(np.asarray(cov0, dtype=float))
    decay = math.exp(-k * tau)
    cov = decay * decay * cov0 + (T / k) * (1 - decay * decay) * np.eye(mean0.size)
    return mean0 * decay, cov


def gaussian_sigma_rate(g: GaussianDensity, p: Potential, T: float) -> float:
    """int q |v|^2 for Gaussian q under a quadratic potential (physical time)."""
    k = p.stiffness
    prec = np.linalg.inv(g.covariance)
    d = g.dim
    # E|A(x - mu) - k mu|^2 with A = -k I + T Sigma^{-1}
    spread = k * k * np.trace(g.covariance) - 2 * k * T * d + T * T * np.trace(prec)
    return float(k * k * (g.mean @ g.mean) + max(spread, 0.0))


def gaussian_ou_trajectory(g0: GaussianDensity, p: Potential, T: float, sched: Schedule) -> TrajectoryRecord:
    """Exact OU trajectory from a Gaussian initial state, sampled per ``sched``."""
    from .thermo import free_energy

    if p.kind != "Quadratic":
        raise InputError("closed-form OU trajectories require a Quadratic potential")
    if not T > 0:
        raise InputError("closed-form OU trajectories require T > 0")
    if g0.dim != p.dim:
        raise InputError("initial state and potential disagree on dimension")
    k = p.stiffness
    H = sched.horizon

    def state(s):
        mean, cov = ou_moments(g0.mean, g0.covariance, k, T, s * H)
        return GaussianDensity(mean, cov)

    def sigma_fn(s):
        return H * H * gaussian_sigma_rate(state(s), p, T)

    snaps, reports, sigmas = [], [], []
    for n in sched.record_steps():
        s = sched.s_of(n)
        g = g0 if n == 0 else state(s)
        snaps.append((s, g))
        reports.append(free_energy(g, p, T, at_s=s))
        sigmas.append(sigma_fn(s))
    return TrajectoryRecord(snaps, np.array(sigmas), sched, T, p, reports, {"closed_form": True}, sigma_fn)


def stationary_grid(grid: GridDensity, p: Potential, T: float) -> GridDensity:
    """Discrete Gibbs state exp(-phi / T) on ``grid``, normalized."""
    from .ensemble import normalize

    if not T > 0:
        raise InputError("the Gibbs state needs T > 0")
    phi = p.value(grid.points())
    return normalize(grid.with_values(np.exp(-(phi - phi.min()) / T)))
