from __future__ import annotations

import json
import math

import numpy as np
import pytest

from eslab.dynamics import Schedule, TrajectoryRecord, gaussian_ou_trajectory, simulate_fp, cfl_dt, stationary_grid, velocity_field
from eslab.ensemble import GaussianDensity, GridDensity, grid_from_gaussian, normalize, sample
from eslab.errors import InputError
from eslab.landscape import Potential
from eslab.thermo import (
    accumulate_sigma,
    decompose_free_energy,
    entropy_production_rate,
    free_energy,
    stationary_free_energy,
)
from eslab.dynamics import VelocityField

SIGMA_OU = 2 * (1 - math.exp(-2))


def test_free_energy_examples(ou):
    r = free_energy(GaussianDensity([0.0], [[1.0]]), ou, 1.0)
    assert r.F == pytest.approx(-0.9189385, abs=1e-7)
    assert r.F == r.E_phi - r.T * r.H
    cold = free_energy(GaussianDensity([1.0], [[2.0]]), ou, 0.0)
    assert cold.F == cold.E_phi
    assert stationary_free_energy(1.0, 1.0) == pytest.approx(0.5 - 0.5 * math.log(2 * math.pi * math.e))
    with pytest.raises(InputError):
        free_energy(GaussianDensity([0.0], [[1.0]]), ou, -1.0)


def test_gibbs_minimizes_free_energy(ou):
    best = stationary_free_energy(1.0, 1.0)
    for mu, var in [(0.0, 0.5), (0.0, 2.0), (0.3, 1.0), (-1.0, 0.9)]:
        assert free_energy(GaussianDensity([mu], [[var]]), ou, 1.0).F > best


def test_definitional_identity_all_representations(ou, std_grid):
    for q in (GaussianDensity([1.0], [[0.5]]), std_grid, sample(GaussianDensity([0.0], [[1.0]]), 2000, 1)):
        r = free_energy(q, ou, 0.7)
        assert abs(r.F - (r.E_phi - r.T * r.H)) <= 1e-12


def test_entropy_production_rate_examples(ou):
    grid = GridDensity([(-8, 8)], [1024], np.ones(1024))
    gibbs = stationary_grid(grid, ou, 1.0)
    assert entropy_production_rate(gibbs, velocity_field(gibbs, ou, 1.0)) <= 1e-10
    mu = 1.2
    q = grid_from_gaussian(GaussianDensity([mu], [[1.0]]), [(-8, 8)], [1024])
    assert entropy_production_rate(q, velocity_field(q, ou, 1.0)) == pytest.approx(mu * mu, rel=1e-6)
    uni = normalize(GridDensity([(0, 2)], [50], np.ones(50)))
    v = VelocityField(values=np.full((50, 1), 0.7), grid=uni)
    assert entropy_production_rate(uni, v) == pytest.approx(0.49, rel=1e-14)
    other = VelocityField(values=np.zeros((40, 1)))
    with pytest.raises(InputError):
        entropy_production_rate(uni, other)


def test_accumulate_sigma_closed_form(ou):
    traj = gaussian_ou_trajectory(GaussianDensity([2.0], [[1.0]]), ou, 1.0, Schedule(1.0, 1000, 10))
    exact = accumulate_sigma(traj, "exact")
    assert exact.Sigma == pytest.approx(SIGMA_OU, abs=1e-12)
    assert exact.F_drop == pytest.approx(SIGMA_OU, abs=1e-12)
    assert exact.residual <= 1e-9
    trap = accumulate_sigma(traj)
    assert abs(trap.Sigma - SIGMA_OU) < 1e-4
    payload = json.loads(json.dumps(trap.to_json()))
    assert set(payload) >= {"sigma_series", "Sigma", "F_drop", "residual"}


def test_accumulate_sigma_converges_with_resolution(ou):
    errs = []
    for records in (10, 40, 160):
        traj = gaussian_ou_trajectory(GaussianDensity([2.0], [[1.0]]), ou, 1.0, Schedule(1.0, 160, 160 // records))
        errs.append(abs(accumulate_sigma(traj).Sigma - SIGMA_OU))
    assert errs[0] > errs[1] > errs[2]


def test_accumulate_sigma_stationary_and_errors(ou):
    grid = stationary_grid(GridDensity([(-8, 8)], [256], np.ones(256)), ou, 1.0)
    traj = simulate_fp(grid, ou, 1.0, Schedule(0.1, math.ceil(0.1 / cfl_dt(grid, ou, 1.0)), 10))
    led = accumulate_sigma(traj)
    assert led.Sigma <= 1e-20 and led.residual <= 1e-12
    with pytest.raises(InputError):
        accumulate_sigma(traj, "simpson")
    with pytest.raises(InputError):
        accumulate_sigma(traj, "exact")


def test_horizon_scaling_of_ledger(ou):
    g0 = GaussianDensity([2.0], [[1.0]])
    base = accumulate_sigma(gaussian_ou_trajectory(g0, ou, 1.0, Schedule(1.0, 10)), "exact")
    for H in (2.0, 4.0):
        led = accumulate_sigma(gaussian_ou_trajectory(g0, ou.scaled(1 / H), 1 / H, Schedule(H, 10)), "exact")
        assert led.Sigma == pytest.approx(base.Sigma, rel=1e-10)
        assert led.Sigma_physical == pytest.approx(base.Sigma / H, rel=1e-10)
        assert led.residual <= 1e-10


def test_decomposition(ou):
    g0 = GaussianDensity([2.0], [[1.0]])
    g1 = GaussianDensity([2 * math.exp(-1)], [[1.0]])
    dE, TdH = decompose_free_energy(g0, g1, ou, 1.0)
    assert dE == pytest.approx(SIGMA_OU, abs=1e-12) and TdH == pytest.approx(0.0, abs=1e-15)
    assert decompose_free_energy(g0, g0, ou, 1.0) == (0.0, 0.0)
    drop = free_energy(g0, ou, 1.0).F - free_energy(g1, ou, 1.0).F
    assert abs(dE + TdH - drop) <= 1e-12


def test_decomposition_pure_entropy_limit():
    # phi -> 0 through a vanishing quadratic envelope; only entropy changes
    flat = Potential.gaussian_mixture_well(1e-12, [])
    q0 = grid_from_gaussian(GaussianDensity([0.0], [[1.0]]), [(-16, 16)], [4096])
    q1 = grid_from_gaussian(GaussianDensity([0.0], [[4.0]]), [(-16, 16)], [4096])
    T = 0.8
    dE, TdH = decompose_free_energy(q0, q1, flat, T)
    assert abs(dE) <= 1e-10
    assert TdH == pytest.approx(T * math.log(2), abs=1e-4)
