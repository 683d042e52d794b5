"""Built-in scenarios and the randomized OU generator.

A scenario is a plain dict; :func:`resolve` fills every default so that the
resolved dict fully determines a run and can be stored as a manifest.
"""
from __future__ import annotations

import copy
import math

import numpy as np

from .errors import InputError

DEFAULTS = {
    "representation": "grid",
    "potential": {"kind": "Quadratic", "params": {"k": 1.0}, "dim": 1},
    "initial": {"mean": [2.0], "cov": [[1.0]]},
    "T": 1.0,
    "horizon": 1.0,
    "steps": None,
    "dt": None,
    "record_every": None,
    "records": 100,
    "domain": [[-8.0, 8.0]],
    "cells": [2048],
    "particles": 10000,
    "seed": 0,
    "backend": None,
    "tolerances": {},
    "horizons": None,
    "scaling_mode": "rescaled",
}

PRESETS = {
    "ou-relaxation": {
        "description": "Grid Fokker-Planck OU relaxation, k=1, T=1, N(2,1) on [-8,8] with 2048 cells",
        "representation": "grid",
    },
    "ou-closed-form": {
        "description": "Exact Gaussian OU relaxation, k=1, T=1, N(2,1)",
        "representation": "gaussian",
        "steps": 1000,
        "record_every": 10,
    },
    "geodesic-gaussian": {
        "description": "Constant-speed geodesic N(0,1) -> N(4,1), traversed over horizons 1, 2, 4",
        "representation": "geodesic",
        "initial": {"mean": [0.0], "cov": [[1.0]]},
        "target": {"mean": [4.0], "cov": [[1.0]]},
        "steps": 100,
        "record_every": 1,
        "horizons": [1.0, 2.0, 4.0],
    },
    "double-well": {
        "description": "Grid relaxation from the barrier top of a double well, T=0.25, horizon 4",
        "representation": "grid",
        "potential": {"kind": "DoubleWell", "params": {"a": 1.0}, "dim": 1},
        "initial": {"mean": [0.0], "cov": [[0.04]]},
        "T": 0.25,
        "horizon": 4.0,
        "domain": [[-3.0, 3.0]],
        "cells": [1024],
        "records": 200,
    },
    "stationary": {
        "description": "Grid OU started at its Gibbs state; every check should read zero",
        "representation": "grid",
        "initial": {"gibbs": True},
        "cells": [512],
    },
    "ou-coarse": {
        "description": "Long grid OU run recorded at its two endpoints only; sigma is under-resolved",
        "representation": "grid",
        "horizon": 4.0,
        "cells": [512],
        "records": 1,
    },
    "ou-particles": {
        "description": "Euler-Maruyama particles for the OU relaxation, checked through the Gaussian closed form",
        "representation": "particles",
        "particles": 10000,
        "steps": 1000,
        "record_every": 100,
    },
}

KNOWN_KEYS = set(DEFAULTS) | {"scenario", "target", "description"}
SUITE = ("ou-relaxation", "geodesic-gaussian", "double-well")
REPRESENTATIONS = ("grid", "gaussian", "particles", "geodesic")


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise InputError(f"unknown scenario {name!r}; available: {', '.join(sorted(PRESETS))}")
    cfg = copy.deepcopy(PRESETS[name])
    cfg["scenario"] = name
    return cfg


def resolve(cfg: dict) -> dict:
    """Fill defaults and validate; raises :class:`InputError` naming the bad field."""
    from .dynamics import cfl_dt
    from .ensemble import GridDensity
    from .landscape import Potential

    if not isinstance(cfg, dict):
        raise InputError("config: expected a mapping of settings")
    unknown = sorted(set(cfg) - KNOWN_KEYS)
    if unknown:
        raise InputError(f"{unknown[0]}: unknown config key (known: {', '.join(sorted(KNOWN_KEYS))})")
    out = copy.deepcopy(DEFAULTS)
    out.update(copy.deepcopy(cfg))
    out.pop("description", None)
    out.setdefault("scenario", "custom")
    rep = out["representation"]
    if rep not in REPRESENTATIONS:
        raise InputError(f"representation: expected one of {REPRESENTATIONS}, got {rep!r}")
    _positive(out, "horizon")
    if not (isinstance(out["T"], (int, float)) and out["T"] >= 0):
        raise InputError(f"T: must be a non-negative real, got {out['T']!r}")
    out["T"] = float(out["T"])
    out["horizon"] = float(out["horizon"])
    seed = out["seed"]
    if not (isinstance(seed, int) and 0 <= seed < 2**64):
        raise InputError(f"seed: must be an unsigned 64-bit integer, got {seed!r}")
    pot = Potential.from_config(out["potential"])
    out["potential"] = pot.to_config()
    if rep == "gaussian" and out["T"] == 0:
        raise InputError("T: closed-form OU scenarios need T > 0")

    init = out["initial"]
    if not init.get("gibbs"):
        g0 = _gaussian(init, "initial")
        if g0.dim != pot.dim:
            raise InputError("initial: dimension does not match the potential")
    if rep == "geodesic":
        _gaussian(out.get("target") or {}, "target")

    if out["horizons"] is not None:
        hs = [float(h) for h in out["horizons"]]
        if len(hs) < 1 or any(not (math.isfinite(h) and h > 0) for h in hs):
            raise InputError(f"horizons: all horizons must be positive, got {out['horizons']!r}")
        out["horizons"] = hs
    if out["scaling_mode"] not in ("rescaled", "fixed"):
        raise InputError("scaling_mode: expected 'rescaled' or 'fixed'")

    if rep == "grid":
        domain = [[float(a), float(b)] for a, b in out["domain"]]
        cells = [int(c) for c in np.atleast_1d(out["cells"])]
        if len(domain) != pot.dim or len(cells) != pot.dim:
            raise InputError("domain/cells: need one entry per dimension")
        if any(c < 2 for c in cells):
            raise InputError(f"cells: need at least 2 cells per axis, got {cells}")
        out["domain"], out["cells"] = domain, cells
        grid = GridDensity(domain, cells, np.ones(cells))
        limit = cfl_dt(grid, pot, out["T"])
        _resolve_steps(out, limit)
    else:
        out.pop("domain", None)
        out.pop("cells", None)
        _resolve_steps(out, math.inf)
    if rep == "particles":
        n = out["particles"]
        if not (isinstance(n, int) and n >= 4):
            raise InputError(f"particles: need an integer >= 4, got {n!r}")
    else:
        out.pop("particles", None)
    return out


def _resolve_steps(out, dt_limit):
    H = out["horizon"]
    steps, dt = out.get("steps"), out.get("dt")
    if steps is not None:
        if not (isinstance(steps, int) and steps >= 1):
            raise InputError(f"steps: must be an integer >= 1, got {steps!r}")
    elif dt is not None:
        if not (isinstance(dt, (int, float)) and dt > 0):
            raise InputError(f"dt: must be positive, got {dt!r}")
        steps = max(1, math.ceil(H / dt - 1e-9))
    elif math.isfinite(dt_limit):
        steps = max(1, math.ceil(H / dt_limit))
    else:
        steps = 100
    if H / steps > dt_limit * (1 + 1e-12):
        raise InputError(
            f"steps: {steps} steps over horizon {H} gives dt={H / steps:.4g}, above the CFL limit {dt_limit:.4g}"
        )
    every = out.get("record_every")
    if every is None:
        every = max(1, steps // max(1, int(out.get("records") or 1)))
    if not (isinstance(every, int) and every >= 1):
        raise InputError(f"record_every: must be an integer >= 1, got {every!r}")
    out["steps"], out["record_every"], out["dt"] = steps, every, None
    out.pop("records", None)


def _positive(out, key):
    v = out[key]
    if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
        raise InputError(f"{key}: must be a positive real, got {v!r}")


def _gaussian(spec, field):
    from .ensemble import GaussianDensity

    try:
        return GaussianDensity(spec["mean"], spec["cov"])
    except KeyError:
        raise InputError(f"{field}: needs 'mean' and 'cov'") from None
    except InputError as exc:
        raise InputError(f"{field}: {exc}") from None


def random_ou_scenarios(n: int = 50, seed: int = 0) -> list[dict]:
    """Closed-form OU scenarios with k in [0.5, 4], T in [0.1, 2], mu0 in [-3, 3], var0 in [0.25, 4]."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        k = rng.uniform(0.5, 4.0)
        T = rng.uniform(0.1, 2.0)
        mu = rng.uniform(-3.0, 3.0)
        var = rng.uniform(0.25, 4.0)
        out.append(
            {
                "scenario": f"random-ou-{seed}-{i}",
                "representation": "gaussian",
                "potential": {"kind": "Quadratic", "params": {"k": float(k)}, "dim": 1},
                "initial": {"mean": [float(mu)], "cov": [[float(var)]]},
                "T": float(T),
                "horizon": 1.0,
                "steps": 200,
                "record_every": 1,
                "seed": seed,
            }
        )
    return out
