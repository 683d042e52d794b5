"""Speed-limit harness: run scenarios and check the dissipation identity,
the entropy-production bound, the objective bound, horizon scaling and
geodesic tightness.

Conventions.  ``Sigma`` is always the action over normalized time s in
[0, 1].  Along a Fokker-Planck run of physical length ``horizon`` the
free-energy drop equals ``Sigma / horizon``, so the dissipation residual and
the objective gap are computed in physical units, which reduce to the plain
statements when the horizon is 1.

Tolerances.  Each check has a base tolerance per representation
(:data:`BASE_TOLERANCES`).  Grid tolerances are relative and are multiplied
by ``max(1, |reference|)``; the effective absolute tolerance that decided
each flag is what ends up in the report.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    Schedule,
    TrajectoryRecord,
    gaussian_ou_trajectory,
    ou_moments,
    simulate_fp,
    simulate_langevin,
    stationary_grid,
)
from .ensemble import GaussianDensity, GridDensity, grid_from_gaussian, sample
from .errors import EslabError, InputError, ResolutionError, UnsupportedRepresentationError
from .landscape import Potential
from .presets import resolve
from .thermo import accumulate_sigma, _endpoint_reports
from .transport import geodesic, path_action, w2_squared

BASE_TOLERANCES = {
    "closed": {"esl": 1e-6, "dissipation": 1e-9, "tightness": 1e-9, "scaling": 1e-6},
    "grid": {"esl": 1e-2, "dissipation": 1e-2, "tightness": 1e-3, "scaling": 1e-2},
}


def base_tolerances(kind: str, overrides: dict | None = None) -> dict:
    tol = dict(BASE_TOLERANCES[kind])
    for key, val in (overrides or {}).items():
        if key not in tol:
            raise InputError(f"tolerances: unknown check {key!r}")
        if not (isinstance(val, (int, float)) and val > 0):
            raise InputError(f"tolerances.{key}: must be positive, got {val!r}")
        tol[key] = float(val)
    return tol


def _kind(traj_or_state) -> str:
    if isinstance(traj_or_state, TrajectoryRecord):
        return "closed" if traj_or_state.sigma_fn is not None else "grid"
    return "grid" if isinstance(traj_or_state, GridDensity) else "closed"


@dataclass
class CheckResult:
    value: float
    passed: bool
    tol: float
    backend: str | None = None
    detail: dict = field(default_factory=dict)

    def __iter__(self):
        # allows ``value, ok = check_x(...)``
        return iter((self.value, self.passed))


@dataclass
class ScalingTable:
    mode: str
    rows: list
    tol: float
    passed: bool

    COLUMNS = ("horizon", "Sigma_physical", "Sigma_physical_x_horizon", "W2_squared_over_horizon", "F_drop", "pass")


@dataclass
class EslReport:
    scenario: str
    T: float
    horizon: float
    Sigma: float | None
    W2_squared: float | None
    slack: float | None
    F_drop: float | None
    residual: float | None
    objective_gap: float | None
    entropy_term: float | None
    backend: str | None
    tolerances: dict
    passes: dict
    seed: int
    Sigma_physical: float | None = None
    tightness_slack: float | None = None
    resolution: dict | None = None
    scaling: ScalingTable | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v for v in self.passes.values() if v is not None)

    def to_json(self) -> dict:
        out = {
            "scenario": self.scenario,
            "T": self.T,
            "horizon": self.horizon,
            "Sigma": self.Sigma,
            "W2_squared": self.W2_squared,
            "slack": self.slack,
            "F_drop": self.F_drop,
            "residual": self.residual,
            "objective_gap": self.objective_gap,
            "entropy_term": self.entropy_term,
            "backend": self.backend,
            "tolerances": self.tolerances,
            "pass": self.passes,
            "seed": self.seed,
            "Sigma_physical": self.Sigma_physical,
            "tightness_slack": self.tightness_slack,
            "resolution": self.resolution,
            "diagnostics": _jsonable(self.diagnostics),
        }
        if self.scaling is not None:
            out["scaling"] = {
                "mode": self.scaling.mode,
                "tol": self.scaling.tol,
                "columns": list(ScalingTable.COLUMNS),
                "rows": self.scaling.rows,
                "pass": self.scaling.passed,
            }
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


# ---------------------------------------------------------------------------
# Individual checks


def _require_sigma(traj: TrajectoryRecord):
    if traj.representation == "particles" or traj.sigma_series is None:
        raise UnsupportedRepresentationError(
            "entropy production is not estimated for particle trajectories; "
            "use a grid or closed-form Gaussian representation"
        )


def _ledger(traj):
    _require_sigma(traj)
    return accumulate_sigma(traj, "exact" if traj.sigma_fn is not None else "trapezoid")


def check_dissipation(traj: TrajectoryRecord, tol: float | None = None) -> CheckResult:
    """Residual |F_drop - Sigma_physical| against ``tol * max(1, |F_drop|)``."""
    ledger = _ledger(traj)
    base = tol if tol is not None else BASE_TOLERANCES[_kind(traj)]["dissipation"]
    eff = base * max(1.0, abs(ledger.F_drop))
    return CheckResult(ledger.residual, ledger.residual <= eff, eff, None, {"ledger": ledger})


def check_esl(traj, backend: str | None = None, tol: float | None = None) -> CheckResult:
    """slack = Sigma - W2(q0, q1)^2 in normalized time.

    Accepts a trajectory or a geodesic path.  The preferred backend is the
    most precise one applicable to the endpoint pair.
    """
    if isinstance(traj, TrajectoryRecord):
        sigma = _ledger(traj).Sigma
        q0, q1 = traj.states[0], traj.states[-1]
        kind = _kind(traj)
    else:
        sigma = path_action(traj)
        q0, q1 = traj.q0, traj.q1
        kind = _kind(q0)
    w2, used = w2_squared(q0, q1, backend)
    base = tol if tol is not None else BASE_TOLERANCES[kind]["esl"]
    eff = base * max(1.0, w2) if kind == "grid" else base
    slack = sigma - w2
    return CheckResult(slack, slack >= -eff, eff, used, {"Sigma": sigma, "W2_squared": w2})


def check_objective_bound(traj: TrajectoryRecord, backend: str | None = None, tol: float | None = None) -> CheckResult:
    """gap = (E0[phi] - E1[phi]) - W2^2 / horizon - T (H0 - H1)."""
    if traj.representation == "particles":
        raise UnsupportedRepresentationError("objective bound needs a grid or closed-form trajectory")
    r0, r1 = _endpoint_reports(traj)
    w2, used = w2_squared(traj.states[0], traj.states[-1], backend)
    kind = _kind(traj)
    base = tol if tol is not None else BASE_TOLERANCES[kind]["esl"]
    eff = base * max(1.0, w2) if kind == "grid" else base
    entropy_term = traj.T * (r0.H - r1.H)
    gap = (r0.E_phi - r1.E_phi) - w2 / traj.horizon - entropy_term
    return CheckResult(gap, gap >= -eff, eff, used, {"entropy_term": entropy_term, "W2_squared": w2})


def check_geodesic_tightness(q0, q1, times=None, tol: float | None = None) -> CheckResult:
    """slack = action of the constant-speed geodesic - W2^2."""
    path = geodesic(q0, q1, times=times)
    action = path_action(path)
    if path.rule == "plan":
        from .transport import w2_discrete_exact

        w2, used = w2_discrete_exact(q0, q1)[0], "exact"
    else:
        w2, used = w2_squared(q0, q1)
    kind = "grid" if path.rule == "quantile-1d" else "closed"
    eff = tol if tol is not None else BASE_TOLERANCES[kind]["tightness"]
    slack = action - w2
    return CheckResult(slack, abs(slack) <= eff, eff, used, {"action": action, "W2_squared": w2})


def resolution_estimate(traj: TrajectoryRecord) -> dict:
    """Richardson-style error estimate of the trapezoid Sigma.

    Compares the full-resolution trapezoid with one using every other
    snapshot.  Fewer than three snapshots cannot be assessed and are flagged.
    """
    n = len(traj.snapshots)
    if traj.sigma_series is None:
        return {"snapshots": n, "sigma_error_estimate": None, "ok": None}
    if traj.sigma_fn is not None:
        return {"snapshots": n, "sigma_error_estimate": 0.0, "ok": True, "method": "exact"}
    if n < 3:
        return {"snapshots": n, "sigma_error_estimate": None, "ok": False, "method": "trapezoid"}
    s, sig = traj.times, traj.sigma_series
    fine = float(np.sum(0.5 * (sig[1:] + sig[:-1]) * np.diff(s)))
    idx = list(range(0, n, 2))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    cs, csig = s[idx], sig[idx]
    coarse = float(np.sum(0.5 * (csig[1:] + csig[:-1]) * np.diff(cs)))
    err = abs(fine - coarse) / 3.0
    ok = err <= BASE_TOLERANCES["grid"]["dissipation"] * max(1.0, abs(fine))
    return {"snapshots": n, "sigma_error_estimate": err, "ok": bool(ok), "method": "trapezoid"}


# ---------------------------------------------------------------------------
# Horizon scaling


def check_time_scaling(scenario: dict, horizons, mode: str | None = None) -> ScalingTable:
    """Traverse one normalized path over several physical horizons.

    ``mode="rescaled"`` (default) keeps the normalized path fixed: geodesics
    are re-timed, Fokker-Planck runs use phi/horizon and T/horizon so that the
    same density path is traced.  The physical action times the horizon must
    then be constant.  ``mode="fixed"`` runs the unchanged dynamics for a
    longer physical time; only the bound F_drop >= W2^2/horizon is checked.
    """
    horizons = [float(h) for h in horizons]
    if not horizons:
        raise InputError("horizons: need at least one horizon")
    if any(not (math.isfinite(h) and h > 0) for h in horizons):
        raise InputError(f"horizons: all horizons must be positive, got {horizons}")
    cfg = resolve(dict(scenario, horizons=None))
    mode = mode or scenario.get("scaling_mode", "rescaled")
    if mode not in ("rescaled", "fixed"):
        raise InputError(f"scaling_mode: expected 'rescaled' or 'fixed', got {mode!r}")
    rep = cfg["representation"]
    kind = "grid" if rep == "grid" else "closed"
    tol = base_tolerances(kind, cfg.get("tolerances"))
    scale_tol = tol["scaling"]
    bound_tol = tol["esl"]

    rows = []
    for H in horizons:
        if rep == "geodesic":
            q0, q1 = _gaussian(cfg["initial"]), _gaussian(cfg["target"])
            times = np.linspace(0.0, 1.0, cfg["steps"] + 1)
            path = geodesic(q0, q1, times=times, horizon=H)
            phys = path_action(path, physical=True)
            w2, _ = w2_squared(q0, q1)
            rows.append([H, phys, phys * H, w2 / H, None, None])
            continue
        traj = _run_rescaled(cfg, H, mode)
        ledger = _ledger(traj)
        w2, _ = w2_squared(traj.states[0], traj.states[-1], cfg.get("backend"))
        ok = ledger.F_drop >= w2 / H - bound_tol * max(1.0, w2) / H
        rows.append([H, ledger.Sigma_physical, ledger.Sigma_physical * H, w2 / H, ledger.F_drop, bool(ok)])

    passed = all(r[5] is not False for r in rows)
    if mode == "rescaled":
        products = np.array([r[2] for r in rows])
        ref = products[0]
        spread = float(products.max() - products.min())
        const_ok = spread <= scale_tol * max(1.0, abs(ref))
        for r in rows:
            r[5] = bool(const_ok and (r[5] is not False))
        passed = passed and const_ok
    return ScalingTable(mode, rows, scale_tol, bool(passed))


def _run_rescaled(cfg: dict, H: float, mode: str) -> TrajectoryRecord:
    base = dict(cfg)
    if mode == "rescaled":
        pot = Potential.from_config(cfg["potential"]).scaled(cfg["horizon"] / H)
        base.update(
            potential=pot.to_config(),
            T=cfg["T"] * cfg["horizon"] / H,
            horizon=H,
        )
        # the CFL limit scales with the horizon, so the step count carries over
    else:
        base.update(horizon=H, steps=None, record_every=None, records=_records(cfg))
    return simulate(resolve(base), monitor=False)


def _records(cfg):
    return max(1, cfg["steps"] // cfg["record_every"])


# ---------------------------------------------------------------------------
# Scenario execution


def _gaussian(spec) -> GaussianDensity:
    return GaussianDensity(spec["mean"], spec["cov"])


def initial_state(cfg: dict):
    pot = Potential.from_config(cfg["potential"])
    init = cfg["initial"]
    rep = cfg["representation"]
    if rep == "grid":
        grid = GridDensity(cfg["domain"], cfg["cells"], np.ones(cfg["cells"]))
        if init.get("gibbs"):
            return stationary_grid(grid, pot, cfg["T"])
        return grid_from_gaussian(_gaussian(init), cfg["domain"], cfg["cells"])
    if init.get("gibbs"):
        if pot.kind != "Quadratic" or cfg["T"] <= 0:
            raise InputError("initial.gibbs: only available as a Gaussian for Quadratic potentials with T > 0")
        g = GaussianDensity(np.zeros(pot.dim), (cfg["T"] / pot.stiffness) * np.eye(pot.dim))
    else:
        g = _gaussian(init)
    if rep == "particles":
        return sample(g, cfg["particles"], cfg["seed"])
    return g


def simulate(cfg: dict, workers: int = 1, monitor: bool = True, thermo: bool = False) -> TrajectoryRecord:
    """Run the dynamics of a resolved scenario.

    ``thermo`` only matters for particles, whose free energies need a k-NN
    entropy estimate per snapshot and are skipped by default.
    """
    rep = cfg["representation"]
    if rep == "geodesic":
        raise InputError("representation: geodesic scenarios have no dynamics to simulate")
    pot = Potential.from_config(cfg["potential"])
    sched = Schedule(cfg["horizon"], cfg["steps"], cfg["record_every"])
    q0 = initial_state(cfg)
    if rep == "grid":
        return simulate_fp(q0, pot, cfg["T"], sched, monitor=monitor)
    if rep == "gaussian":
        return gaussian_ou_trajectory(q0, pot, cfg["T"], sched)
    return simulate_langevin(q0, pot, cfg["T"], sched, cfg["seed"], workers=workers, thermo=thermo)


def run_scenario(cfg: dict, workers: int = 1, traj: TrajectoryRecord | None = None) -> EslReport:
    """Execute a scenario and every applicable check.

    ``cfg`` may be a preset-style partial config; it is resolved first.  A
    precomputed trajectory of the same scenario can be passed to avoid
    re-running the dynamics.
    """
    cfg = resolve(cfg)
    name = cfg["scenario"]
    try:
        return _run(cfg, workers, traj)
    except EslabError as exc:
        exc.args = (f"scenario {name}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
        raise


def _run(cfg, workers, traj):
    rep = cfg["representation"]
    kind = "grid" if rep == "grid" else "closed"
    tol = base_tolerances(kind, cfg.get("tolerances"))
    backend = cfg.get("backend")
    diagnostics = {}
    if rep == "geodesic":
        return _run_geodesic(cfg, tol, backend)

    if rep == "particles":
        if traj is None:
            traj = simulate(cfg, workers=workers)
        diagnostics["particles"] = _particle_moments(cfg, traj)
        pot = Potential.from_config(cfg["potential"])
        if pot.kind != "Quadratic":
            raise UnsupportedRepresentationError(
                "particle scenarios are checked through the Gaussian closed form, which needs a Quadratic potential"
            )
        closed = dict(cfg, representation="gaussian")
        closed.pop("particles", None)
        traj = simulate(closed)
        diagnostics["checked_via"] = "gaussian-closed-form"
    elif traj is None:
        traj = simulate(cfg, workers=workers)
    diagnostics.update(traj.diagnostics)

    diss = check_dissipation(traj, tol["dissipation"])
    esl = check_esl(traj, backend, tol["esl"])
    obj = check_objective_bound(traj, backend, tol["esl"])
    q0, q1 = traj.states[0], traj.states[-1]
    tight = check_geodesic_tightness(q0, q1, tol=tol["tightness"])
    res = resolution_estimate(traj)
    scaling = None
    if cfg.get("horizons"):
        scaling = check_time_scaling(cfg, cfg["horizons"], cfg["scaling_mode"])
    ledger = diss.detail["ledger"]
    tolerances = {
        "dissipation": diss.tol,
        "esl": esl.tol,
        "objective": obj.tol,
        "tightness": tight.tol,
        "scaling": scaling.tol if scaling else tol["scaling"],
        "base": tol,
    }
    passes = {
        "dissipation": bool(diss.passed),
        "esl": bool(esl.passed),
        "objective": bool(obj.passed),
        "scaling": scaling.passed if scaling else None,
        "tightness": bool(tight.passed),
    }
    return EslReport(
        scenario=cfg["scenario"],
        T=cfg["T"],
        horizon=cfg["horizon"],
        Sigma=ledger.Sigma,
        W2_squared=esl.detail["W2_squared"],
        slack=esl.value,
        F_drop=ledger.F_drop,
        residual=ledger.residual,
        objective_gap=obj.value,
        entropy_term=obj.detail["entropy_term"],
        backend=esl.backend,
        tolerances=tolerances,
        passes=passes,
        seed=cfg["seed"],
        Sigma_physical=ledger.Sigma_physical,
        tightness_slack=tight.value,
        resolution=res,
        scaling=scaling,
        diagnostics=diagnostics,
    )


def _run_geodesic(cfg, tol, backend):
    q0, q1 = _gaussian(cfg["initial"]), _gaussian(cfg["target"])
    times = np.linspace(0.0, 1.0, cfg["steps"] + 1)
    path = geodesic(q0, q1, times=times, horizon=cfg["horizon"])
    esl = check_esl(path, backend, tol["esl"])
    tight = check_geodesic_tightness(q0, q1, times=times, tol=tol["tightness"])
    scaling = None
    if cfg.get("horizons"):
        scaling = check_time_scaling(cfg, cfg["horizons"])
    sigma = esl.detail["Sigma"]
    return EslReport(
        scenario=cfg["scenario"],
        T=cfg["T"],
        horizon=cfg["horizon"],
        Sigma=sigma,
        W2_squared=esl.detail["W2_squared"],
        slack=esl.value,
        F_drop=None,
        residual=None,
        objective_gap=None,
        entropy_term=None,
        backend=esl.backend,
        tolerances={
            "esl": esl.tol,
            "tightness": tight.tol,
            "scaling": scaling.tol if scaling else tol["scaling"],
            "base": tol,
        },
        passes={
            "dissipation": None,
            "esl": bool(esl.passed),
            "objective": None,
            "scaling": scaling.passed if scaling else None,
            "tightness": bool(tight.passed),
        },
        seed=cfg["seed"],
        Sigma_physical=sigma / cfg["horizon"],
        tightness_slack=tight.value,
        resolution={"snapshots": len(times), "sigma_error_estimate": 0.0, "ok": True, "method": path.rule},
        scaling=scaling,
        diagnostics={"rule": path.rule},
    )


def _particle_moments(cfg, traj) -> dict:
    """Final empirical mean/variance against the OU closed form, in standard errors."""
    pot = Potential.from_config(cfg["potential"])
    e = traj.states[-1]
    out = {"n": e.n, "mean": e.mean().tolist(), "variance": np.diag(e.covariance()).tolist()}
    if pot.kind == "Quadratic" and not cfg["initial"].get("gibbs"):
        g0 = _gaussian(cfg["initial"])
        mean, cov = ou_moments(g0.mean, g0.covariance, pot.stiffness, cfg["T"], cfg["horizon"])
        var = np.diag(cov)
        se_mean = np.sqrt(var / e.n)
        se_var = var * math.sqrt(2.0 / (e.n - 1))
        out["mean_z"] = ((e.mean() - mean) / se_mean).tolist()
        out["variance_z"] = ((np.diag(e.covariance()) - var) / se_var).tolist()
    return out


def random_scenario_reports(n: int = 50, seed: int = 0) -> list[EslReport]:
    from .presets import random_ou_scenarios

    return [run_scenario(cfg) for cfg in random_ou_scenarios(n, seed)]
