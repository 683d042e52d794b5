"""Plain-text readers and writers for densities, trajectories and plans.

Every float is written with ``repr`` so files round-trip exactly and are
byte-identical across runs.
"""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .ensemble import GaussianDensity, GridDensity, ParticleEnsemble
from .errors import InputError


def fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj))


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


# ---------------------------------------------------------------------------
# densities


def density_to_json(q) -> dict:
    if isinstance(q, GaussianDensity):
        return {"kind": "gaussian", "mean": q.mean.tolist(), "cov": q.covariance.tolist()}
    if isinstance(q, GridDensity):
        return {
            "kind": "grid",
            "domain": [list(map(float, ab)) for ab in q.domain],
            "cells": list(q.cells),
            "values": q.values.ravel().tolist(),
        }
    raise InputError(f"{type(q).__name__} is stored as CSV, not JSON")


def write_particles(path, e: ParticleEnsemble) -> None:
    header = [f"theta_{i + 1}" for i in range(e.dim)] + ["weight"]
    write_rows(path, header, (list(x) + [w] for x, w in zip(e.positions, e.weights)))


def read_particles(path) -> ParticleEnsemble:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty particle file")
    header, body = rows[0], rows[1:]
    if not header or header[-1] != "weight" or not all(h.startswith("theta_") for h in header[:-1]):
        raise InputError(f"{path}: expected header theta_1..theta_d,weight")
    try:
        data = np.array([[float(v) for v in r] for r in body if r], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    if data.size == 0:
        raise InputError(f"{path}: no particles")
    return ParticleEnsemble(data[:, :-1], data[:, -1])


def read_density(path):
    """Load a Gaussian/grid JSON spec or a particle CSV."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: no such file")
    if path.suffix.lower() == ".csv":
        return read_particles(path)
    try:
        spec = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    kind = spec.get("kind")
    if kind == "gaussian":
        return GaussianDensity(spec["mean"], spec["cov"])
    if kind == "grid":
        cells = [int(c) for c in spec["cells"]]
        values = spec.get("values")
        if values is None and "values_file" in spec:
            values = np.loadtxt(path.parent / spec["values_file"], delimiter=",", ndmin=1)
        if values is None:
            raise InputError(f"{path}: grid spec needs 'values' or 'values_file'")
        return GridDensity(spec["domain"], cells, np.asarray(values, float).reshape(cells))
    raise InputError(f"{path}: unknown density kind {kind!r}")


# ---------------------------------------------------------------------------
# trajectories


def trajectory_rows(traj):
    sig = traj.sigma_series
    rows = []
    for i, rep in enumerate(traj.thermo):
        rows.append([rep.at_s, rep.F, rep.H, rep.E_phi, None if sig is None else sig[i]])
    return rows


def write_trajectory(path, traj) -> None:
    write_rows(path, ["s", "F", "H", "E_phi", "sigma"], trajectory_rows(traj))


def write_snapshots(header_path, data_path, traj) -> None:
    """Density snapshots: a JSON header describing the layout and a CSV body."""
    rep = traj.representation
    times = traj.times.tolist()
    header = {"representation": rep, "s": times, "data": os.path.basename(data_path)}
    first = traj.states[0]
    if rep == "grid":
        header.update(
            domain=[list(map(float, ab)) for ab in first.domain],
            cells=list(first.cells),
            layout="one row per snapshot: s followed by cell values in row-major order",
        )
        n = first.values.size
        write_rows(data_path, ["s"] + [f"q_{i}" for i in range(n)],
                   ([s] + q.values.ravel().tolist() for s, q in traj.snapshots))
    elif rep == "gaussian":
        d = first.dim
        header.update(dim=d, layout="one row per snapshot: s, mean, covariance row-major")
        cols = ["s"] + [f"mean_{i + 1}" for i in range(d)]
        cols += [f"cov_{i + 1}_{j + 1}" for i in range(d) for j in range(d)]
        write_rows(data_path, cols,
                   ([s] + q.mean.tolist() + q.covariance.ravel().tolist() for s, q in traj.snapshots))
    else:
        d = first.dim
        header.update(dim=d, particles=first.n, layout="one row per particle per snapshot")
        cols = ["s"] + [f"theta_{i + 1}" for i in range(d)] + ["weight"]

        def rows():
            for s, e in traj.snapshots:
                for x, w in zip(e.positions, e.weights):
                    yield [s] + list(x) + [w]

        write_rows(data_path, cols, rows())
    write_json(header_path, header)


def write_plan(path, plan, threshold: float = 0.0) -> None:
    write_rows(path, ["i", "j", "mass"], ([str(i), str(j), m] for i, j, m in plan.entries(threshold)))


def write_scaling(path, table) -> None:
    from .verify import ScalingTable

    rows = []
    for r in table.rows:
        rows.append([*r[:5], "" if r[5] is None else str(bool(r[5])).lower()])
    write_rows(path, list(ScalingTable.COLUMNS), rows)
