from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from eslab import io as eio
from eslab.dynamics import Schedule, gaussian_ou_trajectory, simulate_fp
from eslab.ensemble import GaussianDensity, ParticleEnsemble, grid_from_gaussian
from eslab.errors import InputError
from eslab.transport import w2_discrete_exact


def test_particles_round_trip(tmp_path, rng):
    e = ParticleEnsemble(rng.normal(size=(9, 2)), rng.dirichlet(np.ones(9)))
    eio.write_particles(tmp_path / "p.csv", e)
    back = eio.read_particles(tmp_path / "p.csv")
    np.testing.assert_array_equal(back.positions, e.positions)
    np.testing.assert_array_equal(back.weights, e.weights)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "theta_1,theta_2,weight"


def test_density_json_round_trip(tmp_path):
    g = GaussianDensity([1.0, -2.0], [[2.0, 0.3], [0.3, 1.0]])
    q = grid_from_gaussian(GaussianDensity([0.0], [[1.0]]), [(-5, 5)], [64])
    for name, d in (("g.json", g), ("q.json", q)):
        eio.write_json(tmp_path / name, eio.density_to_json(d))
    g2, q2 = eio.read_density(tmp_path / "g.json"), eio.read_density(tmp_path / "q.json")
    np.testing.assert_array_equal(g2.covariance, g.covariance)
    np.testing.assert_array_equal(q2.values, q.values)


def test_grid_values_file(tmp_path):
    np.savetxt(tmp_path / "v.csv", np.ones(10), delimiter=",")
    (tmp_path / "q.json").write_text(json.dumps({"kind": "grid", "domain": [[0, 1]], "cells": [10], "values_file": "v.csv"}))
    q = eio.read_density(tmp_path / "q.json")
    assert q.mass() == pytest.approx(1.0)


def test_read_density_errors(tmp_path):
    with pytest.raises(InputError, match="no such file"):
        eio.read_density(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(InputError, match="invalid JSON"):
        eio.read_density(tmp_path / "bad.json")
    (tmp_path / "k.json").write_text('{"kind": "cloud"}')
    with pytest.raises(InputError, match="unknown density kind"):
        eio.read_density(tmp_path / "k.json")
    (tmp_path / "h.csv").write_text("x,y\n1,2\n")
    with pytest.raises(InputError, match="header"):
        eio.read_density(tmp_path / "h.csv")


def test_trajectory_and_snapshots(tmp_path, ou):
    traj = gaussian_ou_trajectory(GaussianDensity([2.0], [[1.0]]), ou, 1.0, Schedule(1.0, 20, 5))
    eio.write_trajectory(tmp_path / "t.csv", traj)
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["s", "F", "H", "E_phi", "sigma"] and len(rows) == 6
    assert float(rows[-1][1]) == traj.thermo[-1].F  # repr round-trips exactly
    eio.write_snapshots(tmp_path / "h.json", tmp_path / "d.csv", traj)
    header = json.loads((tmp_path / "h.json").read_text())
    assert header["representation"] == "gaussian" and header["data"] == "d.csv"

    q0 = grid_from_gaussian(GaussianDensity([2.0], [[1.0]]), [(-8, 8)], [64])
    gtraj = simulate_fp(q0, ou, 1.0, Schedule(1.0, 400, 100))
    eio.write_snapshots(tmp_path / "gh.json", tmp_path / "gd.csv", gtraj)
    data = np.loadtxt(tmp_path / "gd.csv", delimiter=",", skiprows=1)
    assert data.shape == (5, 65)
    np.testing.assert_array_equal(data[-1, 1:], gtraj.states[-1].values)


def test_plan_csv(tmp_path):
    _, plan = w2_discrete_exact(ParticleEnsemble(np.array([[0.0], [1.0]])), ParticleEnsemble(np.array([[1.0], [2.0]])))
    eio.write_plan(tmp_path / "plan.csv", plan)
    assert (tmp_path / "plan.csv").read_text() == "i,j,mass\n0,0,0.5\n1,1,0.5\n"


def test_json_rejects_nan(tmp_path):
    with pytest.raises(ValueError):
        eio.write_json(tmp_path / "x.json", {"a": float("nan")})
