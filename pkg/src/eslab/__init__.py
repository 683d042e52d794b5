"""eslab: entropy-production speed limits for ensemble dynamics.

Library layout: ``landscape`` (objective potentials), ``ensemble`` (density
representations and estimators), ``dynamics`` (Langevin, Fokker-Planck and
closed-form OU evolution), ``thermo`` (free energy and dissipation),
``transport`` (Wasserstein distances and geodesics), ``verify`` (checks and
scenario reports) and ``cli``.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .landscape import Potential  # noqa: E402
from .ensemble import GaussianDensity, GridDensity, ParticleEnsemble  # noqa: E402
from .dynamics import Schedule, TrajectoryRecord  # noqa: E402
from .thermo import DissipationLedger, ThermoReport, free_energy  # noqa: E402
from .transport import w2_squared, geodesic, path_action  # noqa: E402
from .verify import EslReport, run_scenario  # noqa: E402

__all__ = [
    "Potential",
    "GaussianDensity",
    "GridDensity",
    "ParticleEnsemble",
    "Schedule",
    "TrajectoryRecord",
    "ThermoReport",
    "DissipationLedger",
    "free_energy",
    "w2_squared",
    "geodesic",
    "path_action",
    "EslReport",
    "run_scenario",
]
