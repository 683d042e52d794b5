from __future__ import annotations

import json
import math

import numpy as np
import pytest

from eslab.dynamics import Schedule, gaussian_ou_trajectory, simulate_langevin
from eslab.ensemble import GaussianDensity, sample
from eslab.errors import InputError, UnsupportedRepresentationError
from eslab.io import dumps_json
from eslab.presets import preset, random_ou_scenarios, resolve
from eslab.verify import (
    base_tolerances,
    check_dissipation,
    check_esl,
    check_geodesic_tightness,
    check_objective_bound,
    check_time_scaling,
    random_scenario_reports,
    resolution_estimate,
    run_scenario,
    simulate,
)

OU_GAP = 0.13102


def closed_ou(ou, steps=1000):
    return gaussian_ou_trajectory(GaussianDensity([2.0], [[1.0]]), ou, 1.0, Schedule(1.0, steps, 10))


def test_closed_form_checks(ou):
    traj = closed_ou(ou)
    res, ok = check_dissipation(traj)
    assert ok and res <= 1e-9
    slack, ok = check_esl(traj)
    assert ok and slack == pytest.approx(OU_GAP, abs=1e-5)
    gap = check_objective_bound(traj)
    assert gap.passed and gap.value == pytest.approx(OU_GAP, abs=1e-5)
    assert gap.detail["entropy_term"] == pytest.approx(0.0, abs=1e-12)
    assert resolution_estimate(traj)["method"] == "exact"


def test_tightness_examples():
    g0, g1 = GaussianDensity([0.0], [[1.0]]), GaussianDensity([4.0], [[1.0]])
    r = check_geodesic_tightness(g0, g1, times=np.linspace(0, 1, 11))
    assert r.passed and abs(r.value) <= 1e-9 and r.detail["W2_squared"] == pytest.approx(16.0)


def test_particle_checks_refused(ou):
    e = sample(GaussianDensity([2.0], [[1.0]]), 50, seed=1)
    traj = simulate_langevin(e, ou, 1.0, Schedule(1.0, 10, 5), seed=1)
    with pytest.raises(UnsupportedRepresentationError):
        check_dissipation(traj)
    with pytest.raises(UnsupportedRepresentationError):
        check_objective_bound(traj)


def test_base_tolerances_validation():
    assert base_tolerances("grid")["esl"] == 1e-2
    assert base_tolerances("closed", {"esl": 1e-4})["esl"] == 1e-4
    with pytest.raises(InputError, match="tolerances"):
        base_tolerances("grid", {"bogus": 1.0})
    with pytest.raises(InputError, match="tolerances.esl"):
        base_tolerances("grid", {"esl": -1.0})


def test_ou_grid_preset_report():
    cfg = dict(preset("ou-relaxation"), cells=[512])
    rep = run_scenario(cfg)
    assert rep.passed, rep.passes
    assert rep.slack == pytest.approx(OU_GAP, abs=2e-3)
    assert rep.objective_gap == pytest.approx(OU_GAP, abs=2e-3)
    assert rep.backend == "quantile-1d"
    assert rep.Sigma_physical == rep.Sigma  # horizon 1
    doc = rep.to_json()
    for key in ("scenario", "T", "horizon", "Sigma", "W2_squared", "slack", "F_drop", "residual",
                "objective_gap", "entropy_term", "backend", "tolerances", "pass", "seed"):
        assert key in doc
    json.loads(dumps_json(doc))


def test_double_well_and_stationary_presets():
    rep = run_scenario(dict(preset("double-well"), cells=[512]))
    assert rep.passed and rep.slack >= 0
    st = run_scenario(preset("stationary"))
    assert st.passed
    for v in (st.Sigma, st.W2_squared, st.F_drop, st.residual):
        assert abs(v) <= 1e-12


def test_geodesic_preset_report():
    rep = run_scenario(preset("geodesic-gaussian"))
    assert rep.passed
    assert rep.Sigma == pytest.approx(16.0, abs=1e-9)
    assert abs(rep.slack) <= 1e-9
    assert [r[2] for r in rep.scaling.rows] == pytest.approx([16.0] * 3, abs=1e-9)


def test_coarse_run_flagged_under_resolved():
    rep = run_scenario(preset("ou-coarse"))
    assert rep.resolution["ok"] is False
    assert rep.passes["dissipation"] is False
    assert rep.passes["esl"] is True


def test_particle_preset_checked_via_closed_form():
    cfg = dict(preset("ou-particles"), particles=2000, steps=200, record_every=100)
    rep = run_scenario(cfg)
    assert rep.diagnostics["checked_via"] == "gaussian-closed-form"
    assert all(abs(z) <= 4 for z in rep.diagnostics["particles"]["mean_z"])
    assert rep.passed


def test_random_ou_scenarios_all_pass():
    reports = random_scenario_reports(50, seed=0)
    assert len(reports) == 50
    for rep in reports:
        assert rep.passed, (rep.scenario, rep.passes)
        assert rep.slack >= -1e-6 and rep.residual <= 1e-9 * max(1, abs(rep.F_drop))
    assert random_ou_scenarios(3, 5) == random_ou_scenarios(3, 5)


def test_time_scaling_modes():
    geo = check_time_scaling(preset("geodesic-gaussian"), [1, 2, 4])
    assert geo.passed
    ou = dict(preset("ou-relaxation"), cells=[256], records=20)
    table = check_time_scaling(ou, [1, 2, 4], "rescaled")
    assert table.passed
    prods = [r[2] for r in table.rows]
    assert max(prods) - min(prods) <= 1e-6
    fixed = check_time_scaling(ou, [1, 2], "fixed")
    assert all(r[4] >= r[3] for r in fixed.rows)
    with pytest.raises(InputError):
        check_time_scaling(ou, [1, -2])
    with pytest.raises(InputError):
        check_time_scaling(ou, [])


def test_run_scenario_names_failing_scenario():
    cfg = dict(preset("ou-particles"), potential={"kind": "DoubleWell", "params": {"a": 1.0}, "dim": 1},
               particles=100, steps=10, record_every=5)
    with pytest.raises(UnsupportedRepresentationError, match="ou-particles"):
        run_scenario(cfg)


def test_simulate_rejects_geodesic():
    with pytest.raises(InputError):
        simulate(resolve(preset("geodesic-gaussian")))


def test_resolve_validation():
    with pytest.raises(InputError, match="steps"):
        resolve(dict(preset("ou-relaxation"), steps=0))
    with pytest.raises(InputError, match="horizon"):
        resolve(dict(preset("ou-relaxation"), horizon=-1.0))
    with pytest.raises(InputError, match="colour"):
        resolve(dict(preset("ou-relaxation"), colour="red"))
    with pytest.raises(InputError, match="CFL"):
        resolve(dict(preset("ou-relaxation"), steps=10))
    cfg = resolve(preset("ou-relaxation"))
    assert resolve(cfg) == cfg
    assert math.isclose(cfg["horizon"], 1.0)
