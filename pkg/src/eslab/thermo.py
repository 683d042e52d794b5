"""Free energy, entropy production and their bookkeeping along trajectories."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import quad

from .dynamics import TrajectoryRecord, VelocityField
from .ensemble import DensityState, GridDensity, entropy, expectation
from .errors import InputError
from .landscape import Potential


@dataclass(frozen=True)
class ThermoReport:
    F: float
    H: float
    E_phi: float
    T: float
    at_s: float = 0.0


@dataclass(frozen=True)
class DissipationLedger:
    """Accumulated entropy production versus free-energy drop.

    ``Sigma`` is the action in normalized time (integral over s in [0, 1]);
    ``Sigma_physical = Sigma / horizon`` is the action in physical time and
    is what the free-energy drop equals along Fokker-Planck flows.
    """

    sigma_series: list
    Sigma: float
    F_drop: float
    residual: float
    horizon: float = 1.0

    @property
    def Sigma_physical(self) -> float:
        return self.Sigma / self.horizon

    def to_json(self) -> dict:
        d = asdict(self)
        d["sigma_series"] = [[float(s), float(v)] for s, v in self.sigma_series]
        d["Sigma_physical"] = self.Sigma_physical
        return d


def free_energy(q: DensityState, p: Potential, T: float, at_s: float = 0.0) -> ThermoReport:
    """F = E_q[phi] - T H[q], with both components kept on the report."""
    if T < 0:
        raise InputError(f"temperature must be non-negative, got {T}")
    e_phi = expectation(q, p)
    h = entropy(q)
    return ThermoReport(e_phi - T * h, h, e_phi, float(T), float(at_s))


def entropy_production_rate(q: GridDensity, v: VelocityField) -> float:
    """sigma = int q |v|^2 by the midpoint rule."""
    if v.is_affine or v.values is None:
        raise InputError("entropy_production_rate expects a grid-sampled velocity field")
    if v.values.shape != q.cells + (q.dim,):
        raise InputError(f"velocity grid {v.values.shape[:-1]} does not match density grid {q.cells}")
    if v.grid is not None and not v.grid.same_grid(q):
        raise InputError("velocity field lives on a different grid")
    speed2 = np.sum(v.values * v.values, axis=-1)
    return float(np.sum(q.values * speed2) * q.cell_volume)


def accumulate_sigma(traj: TrajectoryRecord, method: str = "trapezoid") -> DissipationLedger:
    """Integrate the recorded sigma series and compare with the free-energy drop.

    ``method="trapezoid"`` integrates the recorded samples.  ``"exact"``
    integrates the closed-form rate adaptively and is only available on
    closed-form (Gaussian OU) trajectories.
    """
    s = traj.times
    if s.size < 2:
        raise InputError("need at least two snapshots")
    if np.any(np.diff(s) <= 0):
        raise InputError("snapshot times must be strictly increasing")
    if traj.sigma_series is None:
        raise InputError("trajectory carries no entropy-production series")
    sig = traj.sigma_series
    if method == "trapezoid":
        total = float(np.sum(0.5 * (sig[1:] + sig[:-1]) * np.diff(s)))
    elif method == "exact":
        if traj.sigma_fn is None:
            raise InputError("exact integration needs a closed-form sigma")
        total, _ = quad(traj.sigma_fn, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    else:
        raise InputError(f"unknown integration method {method!r}")
    f0, f1 = _endpoint_reports(traj)
    f_drop = f0.F - f1.F
    sigma_phys = total / traj.horizon
    return DissipationLedger(
        [(float(a), float(b)) for a, b in zip(s, sig)],
        total,
        f_drop,
        abs(f_drop - sigma_phys),
        traj.horizon,
    )


def _endpoint_reports(traj: TrajectoryRecord):
    if traj.thermo:
        return traj.thermo[0], traj.thermo[-1]
    (s0, q0), (s1, q1) = traj.snapshots[0], traj.snapshots[-1]
    return free_energy(q0, traj.potential, traj.T, s0), free_energy(q1, traj.potential, traj.T, s1)


def decompose_free_energy(q0: DensityState, q1: DensityState, p: Potential, T: float):
    """Split F[q0] - F[q1] into (objective change, T * entropy change).

    Returns ``(E_q0[phi] - E_q1[phi], T (H[q1] - H[q0]))``.
    """
    r0 = free_energy(q0, p, T)
    r1 = free_energy(q1, p, T)
    return r0.E_phi - r1.E_phi, T * (r1.H - r0.H)


def stationary_free_energy(k: float, T: float, dim: int = 1) -> float:
    """Free energy of the Gibbs state N(0, T/k I) under phi = k/2 |x|^2."""
    return 0.5 * dim * T - 0.5 * dim * T * math.log(2 * math.pi * math.e * T / k)
