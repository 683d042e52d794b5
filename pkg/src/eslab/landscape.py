"""Objective landscapes with analytic values and gradients.

Three confining families are available:

* ``Quadratic``            phi(x) = k/2 |x|^2
* ``DoubleWell``           phi(x) = (|x|^2 - a)^2 / 4
* ``GaussianMixtureWell``  phi(x) = kappa/2 |x|^2 - sum_i w_i exp(-|x - c_i|^2 / (2 rho_i^2))

Every potential carries an optional positive ``scale`` that multiplies both
value and gradient.  It is used to run a fixed normalized path over a longer
physical horizon (phi / horizon, T / horizon).

Potentials and temperatures are dimensionless.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import InputError

KINDS = ("Quadratic", "DoubleWell", "GaussianMixtureWell")


@dataclass(frozen=True, eq=False)
class Potential:
    kind: str
    params: dict[str, Any]
    dim: int = 1
    scale: float = 1.0
    _centers: np.ndarray = field(init=False, repr=False)
    _weights: np.ndarray = field(init=False, repr=False)
    _widths: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise InputError(f"dim must be a positive integer, got {self.dim}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise InputError(f"scale must be positive, got {self.scale}")
        p = self.params
        centers = np.zeros((0, self.dim))
        weights = np.zeros(0)
        widths = np.zeros(0)
        if self.kind == "Quadratic":
            _require_positive(p, "k")
        elif self.kind == "DoubleWell":
            _require_positive(p, "a")
        else:
            _require_positive(p, "kappa")
            bumps = p.get("bumps", [])
            if bumps:
                centers = np.array([np.atleast_1d(np.asarray(b["c"], float)) for b in bumps])
                weights = np.array([float(b["w"]) for b in bumps])
                widths = np.array([float(b["rho"]) for b in bumps])
            if centers.shape[1:] != (self.dim,):
                raise InputError(f"bump centers must have dimension {self.dim}")
            if np.any(weights <= 0) or np.any(widths <= 0):
                raise InputError("bump weights w and widths rho must be positive")
        object.__setattr__(self, "_centers", centers)
        object.__setattr__(self, "_weights", weights)
        object.__setattr__(self, "_widths", widths)

    # constructors -----------------------------------------------------------

    @classmethod
    def quadratic(cls, k: float = 1.0, dim: int = 1) -> Potential:
        return cls("Quadratic", {"k": float(k)}, dim)

    @classmethod
    def double_well(cls, a: float = 1.0, dim: int = 1) -> Potential:
        return cls("DoubleWell", {"a": float(a)}, dim)

    @classmethod
    def gaussian_mixture_well(cls, kappa: float, bumps: list[dict], dim: int = 1) -> Potential:
        bumps = [
            {"w": float(b["w"]), "c": [float(c) for c in np.atleast_1d(b["c"])], "rho": float(b["rho"])}
            for b in bumps
        ]
        return cls("GaussianMixtureWell", {"kappa": float(kappa), "bumps": bumps}, dim)

    @classmethod
    def from_config(cls, cfg: dict) -> Potential:
        try:
            kind = cfg["kind"]
        except KeyError:
            raise InputError("potential config needs a 'kind' field") from None
        dim = int(cfg.get("dim", 1))
        params = dict(cfg.get("params", {}))
        if kind == "GaussianMixtureWell":
            pot = cls.gaussian_mixture_well(params.get("kappa", 0.0), params.get("bumps", []), dim)
        else:
            pot = cls(kind, {k: float(v) for k, v in params.items()}, dim)
        scale = float(cfg.get("scale", 1.0))
        return pot.scaled(scale) if scale != 1.0 else pot

    def to_config(self) -> dict:
        cfg = {"kind": self.kind, "params": self.params, "dim": self.dim}
        if self.scale != 1.0:
            cfg["scale"] = self.scale
        return cfg

    def scaled(self, factor: float) -> Potential:
        """Same landscape with value and gradient multiplied by ``factor``."""
        return Potential(self.kind, self.params, self.dim, self.scale * float(factor))

    # evaluation -------------------------------------------------------------

    def _check(self, theta) -> np.ndarray:
        x = np.asarray(theta, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1)
        if x.shape[-1] != self.dim:
            raise InputError(f"point dimension {x.shape[-1]} does not match potential dim {self.dim}")
        return x

    def value(self, theta) -> np.ndarray | float:
        """Phi at one point (shape (d,)) or a stack of points (shape (..., d))."""
        x = self._check(theta)
        r2 = np.sum(x * x, axis=-1)
        if self.kind == "Quadratic":
            out = 0.5 * self.params["k"] * r2
        elif self.kind == "DoubleWell":
            out = 0.25 * (r2 - self.params["a"]) ** 2
        else:
            out = 0.5 * self.params["kappa"] * r2
            for c, w, rho in zip(self._centers, self._weights, self._widths):
                d2 = np.sum((x - c) ** 2, axis=-1)
                out = out - w * np.exp(-d2 / (2.0 * rho * rho))
        out = self.scale * out
        return float(out) if np.ndim(out) == 0 else out

    def gradient(self, theta) -> np.ndarray:
        x = self._check(theta)
        if self.kind == "Quadratic":
            g = self.params["k"] * x
        elif self.kind == "DoubleWell":
            r2 = np.sum(x * x, axis=-1, keepdims=True)
            g = (r2 - self.params["a"]) * x
        else:
            g = self.params["kappa"] * x
            for c, w, rho in zip(self._centers, self._weights, self._widths):
                diff = x - c
                d2 = np.sum(diff * diff, axis=-1, keepdims=True)
                g = g + (w / (rho * rho)) * np.exp(-d2 / (2.0 * rho * rho)) * diff
        return self.scale * g

    def lower_bound(self) -> float:
        """A value guaranteed to be <= min phi."""
        if self.kind == "GaussianMixtureWell":
            return -self.scale * float(np.sum(self._weights))
        return 0.0

    @property
    def stiffness(self) -> float:
        """k of a quadratic potential, including ``scale``."""
        if self.kind != "Quadratic":
            raise InputError(f"stiffness is only defined for Quadratic potentials, not {self.kind}")
        return self.scale * self.params["k"]


def _require_positive(params, name):
    v = params.get(name)
    if v is None or not np.isfinite(v) or v <= 0:
        raise InputError(f"parameter {name!r} must be a positive real, got {v!r}")


def value(p: Potential, theta) -> float | np.ndarray:
    return p.value(theta)


def gradient(p: Potential, theta) -> np.ndarray:
    return p.gradient(theta)


def gradient_check(p: Potential, probes, h: float = 1e-4) -> float:
    """Largest |analytic - central difference| / (1 + |analytic|) over ``probes``."""
    if not h > 0:
        raise InputError(f"finite-difference step must be positive, got {h}")
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    worst = 0.0
    eye = np.eye(p.dim)
    for x in probes:
        analytic = p.gradient(x)
        fd = np.array([(p.value(x + h * e) - p.value(x - h * e)) / (2 * h) for e in eye])
        err = np.linalg.norm(analytic - fd) / (1.0 + np.linalg.norm(analytic))
        worst = max(worst, float(err))
    return worst
