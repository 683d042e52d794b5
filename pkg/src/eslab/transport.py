"""Wasserstein-2 distances, transport plans, displacement interpolation and path actions.

Backends, from most to least precise:

``gaussian``    Bures closed form between Gaussian densities
``quantile-1d`` exact integral of squared quantile differences (1D grids / particles)
``exact``       linear assignment / network LP on at most 512 atoms per side
``entropic``    log-domain Sinkhorn; reports the plain transport cost of its plan

``w2_gaussian`` and ``w2_1d`` return distances; ``w2_discrete_exact`` and
``sinkhorn`` return squared costs together with the plan.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog
from scipy.special import logsumexp
from scipy.stats import norm

from .dynamics import TrajectoryRecord
from .ensemble import (
    DensityState,
    GaussianDensity,
    GridDensity,
    ParticleEnsemble,
    normalize,
)
from .errors import ConvergenceError, InputError, ResolutionError, ScaleError, UnsupportedRepresentationError

EXACT_MAX_ATOMS = 512
EIG_FLOOR = 1e-14
BACKENDS = ("gaussian", "quantile-1d", "exact", "entropic")


@dataclass(eq=False)
class TransportPlan:
    source: np.ndarray
    target: np.ndarray
    source_weights: np.ndarray
    target_weights: np.ndarray
    coupling: np.ndarray
    cost: float

    def marginal_error(self) -> float:
        rows = np.abs(self.coupling.sum(axis=1) - self.source_weights).max()
        cols = np.abs(self.coupling.sum(axis=0) - self.target_weights).max()
        return float(max(rows, cols))

    def entries(self, threshold: float = 0.0):
        """(i, j, mass) triples with mass above ``threshold``."""
        i, j = np.nonzero(self.coupling > threshold)
        return list(zip(i.tolist(), j.tolist(), self.coupling[i, j].tolist()))


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    return (v * np.sqrt(np.maximum(w, EIG_FLOOR))) @ v.T


def w2_gaussian(g0: GaussianDensity, g1: GaussianDensity) -> float:
    """W2 between Gaussians: sqrt(|dmu|^2 + tr(S0 + S1 - 2 (S1^1/2 S0 S1^1/2)^1/2))."""
    if not (isinstance(g0, GaussianDensity) and isinstance(g1, GaussianDensity)):
        raise InputError("w2_gaussian needs two GaussianDensity arguments")
    if g0.dim != g1.dim:
        raise InputError("Gaussians live in different dimensions")
    dmu = g0.mean - g1.mean
    if g0.dim == 1:
        s0 = math.sqrt(g0.covariance[0, 0])
        s1 = math.sqrt(g1.covariance[0, 0])
        return math.sqrt(float(dmu @ dmu) + (s0 - s1) ** 2)
    r1 = _sqrtm_psd(g1.covariance)
    cross = _sqrtm_psd(r1 @ g0.covariance @ r1)
    bures = np.trace(g0.covariance) + np.trace(g1.covariance) - 2 * np.trace(cross)
    return math.sqrt(max(float(dmu @ dmu) + float(bures), 0.0))


def gaussian_map(g0: GaussianDensity, g1: GaussianDensity) -> np.ndarray:
    """Symmetric matrix A of the optimal affine map x -> mu1 + A (x - mu0)."""
    r0 = _sqrtm_psd(g0.covariance)
    r0inv = np.linalg.inv(r0)
    return r0inv @ _sqrtm_psd(r0 @ g1.covariance @ r0) @ r0inv


# ---------------------------------------------------------------------------
# 1D quantile machinery


def _pieces(q):
    """Quantile function of a 1D measure as linear pieces (u_lo, u_hi, x_lo, x_hi)."""
    if isinstance(q, GridDensity):
        if q.dim != 1:
            raise InputError(f"quantile methods need one-dimensional inputs, got d={q.dim}")
        masses = q.values * q.cell_volume
        masses = masses / masses.sum()
        edges = q.edges(0)
        keep = masses > 0
        cdf = np.concatenate([[0.0], np.cumsum(masses)])
        u_lo, u_hi = cdf[:-1][keep], cdf[1:][keep]
        x_lo, x_hi = edges[:-1][keep], edges[1:][keep]
    elif isinstance(q, ParticleEnsemble):
        if q.dim != 1:
            raise InputError(f"quantile methods need one-dimensional inputs, got d={q.dim}")
        order = np.argsort(q.positions[:, 0], kind="stable")
        x = q.positions[order, 0]
        w = q.weights[order]
        keep = w > 0
        cdf = np.concatenate([[0.0], np.cumsum(w)])
        u_lo, u_hi = cdf[:-1][keep], cdf[1:][keep]
        x_lo = x_hi = x[keep]
    else:
        raise UnsupportedRepresentationError(f"no quantile function for {type(q).__name__}")
    u_hi = u_hi / u_hi[-1]
    u_lo = np.concatenate([[0.0], u_hi[:-1]])
    return u_lo, u_hi, x_lo, x_hi


def _eval_pieces(pieces, u, u_mid):
    """Quantile values at ``u`` using the piece that contains ``u_mid``."""
    u_lo, u_hi, x_lo, x_hi = pieces
    idx = np.clip(np.searchsorted(u_hi, u_mid, side="left"), 0, u_hi.size - 1)
    span = u_hi[idx] - u_lo[idx]
    frac = np.where(span > 0, (u - u_lo[idx]) / np.where(span > 0, span, 1.0), 0.0)
    return x_lo[idx] + frac * (x_hi[idx] - x_lo[idx])


def _merged(p0, p1):
    u = np.union1d(np.concatenate([p0[0], p0[1]]), np.concatenate([p1[0], p1[1]]))
    u = u[(u >= 0) & (u <= 1)]
    lo, hi = u[:-1], u[1:]
    keep = hi > lo
    return lo[keep], hi[keep]


def w2_1d(q0, q1) -> float:
    """W2 between 1D grids or particle sets via the quantile integral.

    Both quantile functions are piecewise linear in u, so the integral of
    (Q0 - Q1)^2 is evaluated exactly on the merged breakpoints.
    """
    p0, p1 = _pieces(q0), _pieces(q1)
    lo, hi = _merged(p0, p1)
    mid = 0.5 * (lo + hi)
    d_lo = _eval_pieces(p0, lo, mid) - _eval_pieces(p1, lo, mid)
    d_hi = _eval_pieces(p0, hi, mid) - _eval_pieces(p1, hi, mid)
    total = np.sum((hi - lo) * (d_lo * d_lo + d_lo * d_hi + d_hi * d_hi) / 3.0)
    return math.sqrt(max(float(total), 0.0))


def quantile_atoms(q, n: int = EXACT_MAX_ATOMS) -> ParticleEnsemble:
    """``n`` equally weighted atoms at the conditional means of the quantile bins.

    For a 1D Gaussian the bin means are closed form; for grids and particle
    sets the piecewise-linear quantile function is integrated exactly.
    """
    if n < 2:
        raise InputError("need at least two atoms")
    u = np.linspace(0.0, 1.0, n + 1)
    if isinstance(q, GaussianDensity):
        if q.dim != 1:
            raise InputError("quantile atoms need a one-dimensional Gaussian")
        mu, sd = float(q.mean[0]), math.sqrt(q.covariance[0, 0])
        z = norm.ppf(u)
        pdf = norm.pdf(z)
        atoms = mu + sd * n * (pdf[:-1] - pdf[1:])
        return ParticleEnsemble(atoms[:, None])
    pieces = _pieces(q)
    lo, hi = _merged(pieces, (u[:-1], u[1:]))
    mid = 0.5 * (lo + hi)
    a, b = _eval_pieces(pieces, lo, mid), _eval_pieces(pieces, hi, mid)
    integral = (hi - lo) * 0.5 * (a + b)
    which = np.clip(np.searchsorted(u, mid, side="right") - 1, 0, n - 1)
    atoms = np.bincount(which, weights=integral, minlength=n) * n
    return ParticleEnsemble(atoms[:, None])


# ---------------------------------------------------------------------------
# Discrete solvers


def _as_points(a):
    if isinstance(a, ParticleEnsemble):
        return a.positions, a.weights
    x, w = a
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    w = np.asarray(w, dtype=float)
    return x, w / w.sum()


def _cost_matrix(x, y):
    if x.shape[1] != y.shape[1]:
        raise InputError("supports live in different dimensions")
    diff = x[:, None, :] - y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def w2_discrete_exact(a, b):
    """Exact squared-Euclidean OT between weighted point sets.

    ``a`` and ``b`` are ParticleEnsembles or ``(points, weights)`` pairs.
    Equal-size uniform inputs use linear assignment; anything else goes to
    the HiGHS dual simplex on the transportation LP.  Returns ``(W2^2, plan)``.
    """
    x, wa = _as_points(a)
    y, wb = _as_points(b)
    n, m = len(wa), len(wb)
    if n > EXACT_MAX_ATOMS or m > EXACT_MAX_ATOMS:
        raise ScaleError(
            f"exact OT is limited to {EXACT_MAX_ATOMS} atoms per side (got {n} x {m}); use the entropic backend"
        )
    C = _cost_matrix(x, y)
    uniform = n == m and np.all(wa == wa[0]) and np.all(wb == wb[0])
    if uniform:
        rows, cols = linear_sum_assignment(C)
        plan = np.zeros((n, m))
        plan[rows, cols] = 1.0 / n
    else:
        plan = _transport_lp(C, wa, wb)
    cost = float(np.sum(plan * C))
    return cost, TransportPlan(x, y, wa, wb, plan, cost)


def _transport_lp(C, a, b):
    n, m = C.shape
    row = sparse.kron(sparse.eye(n), np.ones((1, m)))
    col = sparse.kron(np.ones((1, n)), sparse.eye(m))
    A = sparse.vstack([row, col.tocsr()[:-1]]).tocsr()
    rhs = np.concatenate([a, b[:-1]])
    res = linprog(
        C.ravel(),
        A_eq=A,
        b_eq=rhs,
        bounds=(0, None),
        method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise ConvergenceError(f"transport LP failed: {res.message}")
    plan = np.maximum(res.x.reshape(n, m), 0.0)
    return plan


def sinkhorn(a, b, eps: float, max_iters: int = 50000, tol: float = 1e-6, anneal: bool = True, newton: bool = True):
    """Entropic OT by log-domain alternating scaling.

    With ``anneal`` the regularization starts at the largest cost and is
    halved down to ``eps``, warm-starting the dual potentials at every stage.
    Stops when the L1 marginal violation is <= ``tol``; the violation is
    checked every 10 sweeps.  Returns ``(<plan, cost>, plan)`` without the
    entropy term.

    At small ``eps`` the plan splits into nearly independent blocks and
    plain sweeps stall with a fixed mass imbalance between them.  With
    ``newton``, a stall (or a slow crawl past a fixed sweep budget) at the
    final ``eps`` hands over to damped Newton ascent on the dual, which
    moves those blocks directly.  Every sweep and
    every Newton step counts against ``max_iters``.
    """
    if not eps > 0:
        raise InputError(f"eps must be positive, got {eps}")
    x, wa = _as_points(a)
    y, wb = _as_points(b)
    C = _cost_matrix(x, y)
    la, lb = np.log(wa), np.log(wb)
    f = np.zeros(len(wa))
    g = np.zeros(len(wb))
    stages = [eps]
    if anneal:
        e = max(float(C.max()), eps)
        stages = []
        while e > eps:
            stages.append(e)
            e *= 0.5
        stages.append(eps)
    iters = 0
    violation = math.inf
    for k, e in enumerate(stages):
        last = k == len(stages) - 1
        stage_tol = tol if last else max(tol, 1e-3)
        stage_start, best, best_at = iters, math.inf, iters
        while True:
            f = e * la - e * logsumexp((g[None, :] - C) / e, axis=1)
            g = e * lb - e * logsumexp((f[:, None] - C) / e, axis=0)
            iters += 1
            if iters % 10 == 0 or iters >= max_iters:
                violation = _violation(f, g, C, e, wa, wb)
                if violation <= stage_tol:
                    break
                if violation < 0.9 * best:
                    best, best_at = violation, iters
                if not last and iters - stage_start >= _STAGE_SWEEPS:
                    break  # warm start only; the final stage decides
                slow = iters - stage_start >= _POLISH_AFTER or iters - best_at >= _STALL_SWEEPS
                if last and newton and slow:
                    f, g, iters, violation = _newton_polish(f, g, C, e, wa, wb, tol, iters, max_iters)
                    break
            if iters >= max_iters:
                break
        if iters >= max_iters and violation > tol:
            break
    if violation > tol:
        raise ConvergenceError(
            f"Sinkhorn did not converge in {max_iters} iterations (violation {violation:.3g})",
            violation=violation,
        )
    plan = np.exp((f[:, None] + g[None, :] - C) / eps)
    cost = float(np.sum(plan * C))
    return cost, TransportPlan(x, y, wa, wb, plan, cost)


_STAGE_SWEEPS = 200
_STALL_SWEEPS = 100
_POLISH_AFTER = 500


def _violation(f, g, C, eps, wa, wb) -> float:
    logp = (f[:, None] + g[None, :] - C) / eps
    rows = np.exp(logsumexp(logp, axis=1))
    cols = np.exp(logsumexp(logp, axis=0))
    return float(np.abs(rows - wa).sum() + np.abs(cols - wb).sum())


def _newton_polish(f, g, C, eps, wa, wb, tol, iters, max_iters):
    """Levenberg-Marquardt damped Newton ascent on the entropic dual.

    The dual is concave with Hessian -(1/eps) [[diag r, P], [P^T, diag c]],
    singular along the constant shift (f + t, g - t), which is removed by
    pinning the last entry of ``g``.  Blocks whose coupling has underflowed
    make it singular as well; the damping turns those directions into
    gradient steps and is raised whenever the line search fails.
    """
    n = len(wa)

    def dual(f, g):
        return float(f @ wa + g @ wb - eps * np.exp(logsumexp((f[:, None] + g[None, :] - C) / eps)))

    D = dual(f, g)
    mu = 1e-9
    violation = _violation(f, g, C, eps, wa, wb)
    while violation > tol and iters < max_iters:
        with np.errstate(over="ignore", under="ignore"):
            P = np.exp((f[:, None] + g[None, :] - C) / eps)
        r, c = P.sum(axis=1), P.sum(axis=0)
        H = np.block([[np.diag(r), P], [P.T, np.diag(c)]])[:-1, :-1] / eps
        G = np.concatenate([wa - r, wb - c])[:-1]
        step = np.linalg.solve(H + mu * np.abs(np.diag(H)).max() * np.eye(len(H)), G)
        step = np.append(step, 0.0)
        slope = float(G @ step[:-1])
        t = 1.0
        while t >= 1e-10:
            fn, gn = f + t * step[:n], g + t * step[n:]
            with np.errstate(over="ignore"):
                Dn = dual(fn, gn)
            if math.isfinite(Dn) and Dn >= D + 1e-4 * t * slope:
                break
            t *= 0.5
        iters += 1
        if t < 1e-10:
            mu *= 100.0
            continue
        f, g, D = fn, gn, Dn
        violation = _violation(f, g, C, eps, wa, wb)
    return f, g, iters, violation


# ---------------------------------------------------------------------------
# Dispatch


def grid_atoms(g: GridDensity, max_atoms: int = EXACT_MAX_ATOMS) -> ParticleEnsemble:
    """Cell centres weighted by cell mass, merging square blocks until <= ``max_atoms`` remain."""
    values = g.values * g.cell_volume
    centers = [np.asarray(c) for c in g.centers]
    block = 1
    while True:
        agg, pts = _aggregate(values, centers, block)
        keep = agg > 0
        if keep.sum() <= max_atoms:
            w = agg[keep] / agg[keep].sum()
            return ParticleEnsemble(pts[keep], w)
        block *= 2


def _aggregate(values, centers, block):
    if block == 1:
        mesh = np.stack(np.meshgrid(*centers, indexing="ij"), axis=-1)
        return values.ravel(), mesh.reshape(-1, len(centers))
    shape = values.shape
    pad = [(0, (-s) % block) for s in shape]
    v = np.pad(values, pad)
    mesh = np.stack(np.meshgrid(*centers, indexing="ij"), axis=-1)
    mesh = np.pad(mesh, pad + [(0, 0)])
    new_shape = []
    for s in v.shape:
        new_shape += [s // block, block]
    v = v.reshape(new_shape)
    m = mesh.reshape(new_shape + [len(centers)])
    axes = tuple(range(1, 2 * len(shape), 2))
    mass = v.sum(axis=axes)
    weighted = (m * v[..., None]).sum(axis=axes)
    with np.errstate(invalid="ignore", divide="ignore"):
        pts = weighted / mass[..., None]
    return mass.ravel(), np.nan_to_num(pts.reshape(-1, len(centers)))


def applicable_backends(q0: DensityState, q1: DensityState) -> list[str]:
    """Backends able to compare ``q0`` and ``q1``, best first."""
    out = []
    if isinstance(q0, GaussianDensity) and isinstance(q1, GaussianDensity):
        return ["gaussian"] + (["quantile-1d", "exact"] if q0.dim == 1 else [])
    discrete = (GridDensity, ParticleEnsemble)
    if isinstance(q0, discrete) and isinstance(q1, discrete) and q0.dim == q1.dim:
        if q0.dim == 1:
            out.append("quantile-1d")
        out += ["exact", "entropic"]
    return out


def w2_squared(q0: DensityState, q1: DensityState, backend: str | None = None, eps: float = 1e-3):
    """Squared W2 with the chosen (or best applicable) backend; returns ``(value, backend)``."""
    options = applicable_backends(q0, q1)
    if not options:
        raise InputError(
            f"no W2 backend applies to {type(q0).__name__} vs {type(q1).__name__} (d={q0.dim}, {q1.dim})"
        )
    if backend is None:
        backend = options[0]
    if backend not in BACKENDS:
        raise InputError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    if backend not in options:
        raise InputError(f"backend {backend!r} does not apply to these inputs; options: {options}")
    if backend == "gaussian":
        return w2_gaussian(q0, q1) ** 2, backend
    if backend == "quantile-1d":
        if isinstance(q0, GaussianDensity):
            q0, q1 = quantile_atoms(q0, 4096), quantile_atoms(q1, 4096)
        return w2_1d(q0, q1) ** 2, backend
    a, b = _discretize(q0), _discretize(q1)
    if backend == "exact":
        return w2_discrete_exact(a, b)[0], backend
    return sinkhorn(a, b, eps)[0], backend


def _discretize(q):
    if isinstance(q, ParticleEnsemble):
        return q
    if isinstance(q, GaussianDensity):
        return quantile_atoms(q, EXACT_MAX_ATOMS)
    if q.dim == 1:
        return quantile_atoms(q, EXACT_MAX_ATOMS)
    return grid_atoms(q)


# ---------------------------------------------------------------------------
# Geodesics


@dataclass(eq=False)
class GeodesicPath:
    """Constant-speed W2 geodesic between two states.

    ``rule`` is ``gaussian``, ``quantile-1d`` or ``plan``; ``times`` are the
    normalized sample times and ``horizon`` the physical duration over
    which the path is traversed.
    """

    q0: DensityState
    q1: DensityState
    rule: str
    times: np.ndarray
    plan: TransportPlan | None = None
    horizon: float = 1.0

    def state(self, s: float) -> DensityState:
        return mccann_interpolate(self.q0, self.q1, s, plan=self.plan)


def geodesic(q0, q1, times=None, horizon: float = 1.0, plan: TransportPlan | None = None) -> GeodesicPath:
    if times is None:
        times = np.linspace(0.0, 1.0, 11)
    times = np.asarray(times, dtype=float)
    if isinstance(q0, GaussianDensity) and isinstance(q1, GaussianDensity):
        rule = "gaussian"
    elif isinstance(q0, GridDensity) and isinstance(q1, GridDensity) and q0.dim == q1.dim == 1:
        rule = "quantile-1d"
    elif isinstance(q0, ParticleEnsemble) and isinstance(q1, ParticleEnsemble):
        rule = "plan"
        if plan is None:
            plan = w2_discrete_exact(q0, q1)[1]
    else:
        raise InputError(f"no geodesic rule for {type(q0).__name__} -> {type(q1).__name__}")
    if not horizon > 0:
        raise InputError("horizon must be positive")
    return GeodesicPath(q0, q1, rule, times, plan, float(horizon))


def mccann_interpolate(q0, q1, s: float, plan: TransportPlan | None = None) -> DensityState:
    """Displacement interpolation at normalized time ``s``."""
    if not 0.0 <= s <= 1.0:
        raise InputError(f"s must lie in [0, 1], got {s}")
    if isinstance(q0, GaussianDensity) and isinstance(q1, GaussianDensity):
        if s == 0.0:
            return q0
        if s == 1.0:
            return q1
        mean = (1 - s) * q0.mean + s * q1.mean
        if q0.dim == 1:
            sd = (1 - s) * math.sqrt(q0.covariance[0, 0]) + s * math.sqrt(q1.covariance[0, 0])
            return GaussianDensity(mean, [[sd * sd]])
        M = (1 - s) * np.eye(q0.dim) + s * gaussian_map(q0, q1)
        cov = M @ q0.covariance @ M
        return GaussianDensity(mean, 0.5 * (cov + cov.T))
    if isinstance(q0, GridDensity) and isinstance(q1, GridDensity):
        if s == 0.0:
            return q0
        if s == 1.0:
            return q1
        return _quantile_interpolate(q0, q1, s, _union_grid(q0, q1))
    if isinstance(q0, ParticleEnsemble) and isinstance(q1, ParticleEnsemble):
        if plan is None:
            plan = w2_discrete_exact(q0, q1)[1]
        i, j = np.nonzero(plan.coupling > 0)
        pts = (1 - s) * plan.source[i] + s * plan.target[j]
        w = plan.coupling[i, j]
        return ParticleEnsemble(pts, w / w.sum())
    raise InputError(f"cannot interpolate {type(q0).__name__} with {type(q1).__name__}")


def _union_grid(q0: GridDensity, q1: GridDensity) -> GridDensity:
    if q0.dim != 1 or q1.dim != 1:
        raise InputError("quantile interpolation is one-dimensional")
    lo = min(q0.domain[0][0], q1.domain[0][0])
    hi = max(q0.domain[0][1], q1.domain[0][1])
    dx = min(q0.widths[0], q1.widths[0])
    cells = max(2, int(round((hi - lo) / dx)))
    return GridDensity([(lo, hi)], [cells], np.zeros(cells))


def _interp_cdf(q0, q1, s, x):
    """CDF of the quantile interpolant at points ``x``."""
    p0, p1 = _pieces(q0), _pieces(q1)
    lo, hi = _merged(p0, p1)
    mid = 0.5 * (lo + hi)
    xs_lo = (1 - s) * _eval_pieces(p0, lo, mid) + s * _eval_pieces(p1, lo, mid)
    xs_hi = (1 - s) * _eval_pieces(p0, hi, mid) + s * _eval_pieces(p1, hi, mid)
    xp = np.column_stack([xs_lo, xs_hi]).ravel()
    up = np.column_stack([lo, hi]).ravel()
    xp = np.maximum.accumulate(xp)
    return np.interp(x, xp, up, left=0.0, right=1.0)


def _quantile_interpolate(q0, q1, s, grid: GridDensity) -> GridDensity:
    cdf = _interp_cdf(q0, q1, s, grid.edges(0))
    mass = np.maximum(np.diff(cdf), 0.0)
    return normalize(grid.with_values(mass / grid.cell_volume))


def _geodesic_rates(path: GeodesicPath) -> np.ndarray:
    """Entropy-production rate in normalized time at each sample time of ``path``."""
    if path.rule == "gaussian":
        g0, g1 = path.q0, path.q1
        dmu = g1.mean - g0.mean
        A = gaussian_map(g0, g1)
        eye = np.eye(g0.dim)
        out = []
        for s in path.times:
            M = (1 - s) * eye + s * A
            cov = M @ g0.covariance @ M
            B = (A - eye) @ np.linalg.inv(M)
            out.append(float(dmu @ dmu + np.trace(B @ cov @ B.T)))
        return np.array(out)
    if path.rule == "plan":
        P = path.plan
        disp = P.target[None, :, :] - P.source[:, None, :]
        speed2 = np.sum(disp * disp, axis=-1)
        # atom velocity y - x is the same at every s
        return np.full(path.times.size, float(np.sum(P.coupling * speed2)))
    return np.array([_quantile_rate(path.q0, path.q1, s) for s in path.times])


def _quantile_rate(q0, q1, s, refine: int = 2) -> float:
    """Grid quadrature of q_s |v_s|^2 for the quantile interpolant.

    q_s is tabulated on a refined union grid from the interpolated CDF; the
    velocity at a cell centre x is the displacement Q1(u) - Q0(u) of the
    quantile u = F_s(x) passing through it.
    """
    base = _union_grid(q0, q1)
    cells = base.cells[0] * refine
    grid = GridDensity(base.domain, [cells], np.zeros(cells))
    dx = grid.widths[0]
    dens = np.diff(_interp_cdf(q0, q1, s, grid.edges(0))) / dx
    u = _interp_cdf(q0, q1, s, grid.centers[0])
    p0, p1 = _pieces(q0), _pieces(q1)
    v = _eval_pieces(p1, u, u) - _eval_pieces(p0, u, u)
    return float(np.sum(dens * v * v) * dx)


def path_action(path, physical: bool = False) -> float:
    """Benamou-Brenier action of a recorded trajectory or a geodesic.

    The default is the action in normalized time, int_0^1 sigma_s ds.  With
    ``physical`` the velocities are rescaled to physical time tau = horizon*s
    and integrated over tau, which gives the normalized action / horizon.
    """
    if isinstance(path, TrajectoryRecord):
        if path.sigma_series is None:
            raise InputError("trajectory has no entropy-production series")
        s, rate, horizon = path.times, path.sigma_series, path.horizon
    elif isinstance(path, GeodesicPath):
        s, rate, horizon = path.times, _geodesic_rates(path), path.horizon
    else:
        raise InputError(f"no action for {type(path).__name__}")
    if s.size < 3:
        raise ResolutionError(f"path action needs at least 3 snapshots, got {s.size}")
    if physical:
        tau = horizon * s
        phys_rate = rate / (horizon * horizon)
        return float(np.sum(0.5 * (phys_rate[1:] + phys_rate[:-1]) * np.diff(tau)))
    return float(np.sum(0.5 * (rate[1:] + rate[:-1]) * np.diff(s)))
