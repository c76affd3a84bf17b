"""Filament extraction by subspace-constrained mean shift, and integral curves of V.

Any object with ``value(xs)`` and ``derivatives(xs) -> (f, grad, hess)`` works
as a field here (``ScalarField`` and ``AnalyticField`` both qualify).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidSpecError
from .field import eigen_min_many

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITER = "max_iter"
DISCARDED_TAU = "discarded_tau"
DIVERGED = "diverged"
STATUSES = (CONVERGED, MAX_ITER, DISCARDED_TAU, DIVERGED)

MAX_CONSECUTIVE_CLAMPS = 10


def grid_seeds(n: int) -> np.ndarray:
    """``n x n`` lattice of cell centres of the uniform partition of the unit square.

    Seeds never sit exactly on the boundary, where a mirror-symmetric surface
    has a spurious zero of the ridge residual.
    """
    g = (np.arange(int(n)) + 0.5) / int(n)
    a, b = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([a.ravel(), b.ravel()])


@dataclass(frozen=True)
class ScmsConfig:
    step_a: float = 0.02
    tol_eps: float = 1e-6
    threshold_tau: float = 2.0
    max_iter: int = 5000
    seeds: object = 50  # lattice size, or an explicit (m, 2) array

    def __post_init__(self):
        if not self.step_a > 0:
            raise InvalidSpecError("step_a must be > 0")
        if not self.tol_eps > 0:
            raise InvalidSpecError("tol_eps must be > 0")
        if int(self.max_iter) < 1:
            raise InvalidSpecError("max_iter must be >= 1")

    def seed_points(self) -> np.ndarray:
        if np.isscalar(self.seeds):
            return grid_seeds(int(self.seeds))
        pts = np.asarray(self.seeds, dtype=float).reshape(-1, 2)
        if pts.shape[0] == 0:
            raise InvalidSpecError("seed set is empty")
        return pts


@dataclass(eq=False)
class Filament:
    """Unordered point set produced by SCMS, one entry per seed."""

    points: np.ndarray
    status: np.ndarray
    lambdas: np.ndarray
    residuals: np.ndarray = None
    iterations: np.ndarray = None
    stop_clause: np.ndarray = None  # "step", "residual" or "" per point

    def __post_init__(self):
        m = len(self.points)
        self.points = np.asarray(self.points, dtype=float).reshape(m, 2)
        self.status = np.asarray(self.status, dtype=object)
        self.lambdas = np.asarray(self.lambdas, dtype=float)
        if self.residuals is None:
            self.residuals = np.full(m, np.nan)
        if self.iterations is None:
            self.iterations = np.zeros(m, dtype=int)
        if self.stop_clause is None:
            self.stop_clause = np.full(m, "", dtype=object)

    def __len__(self):
        return len(self.points)

    @property
    def converged(self) -> np.ndarray:
        return self.status == CONVERGED

    @property
    def ridge_mask(self) -> np.ndarray:
        """Converged points that are genuine filament points (lambda < 0)."""
        return self.converged & (self.lambdas < 0)

    def ridge_points(self) -> np.ndarray:
        return self.points[self.ridge_mask]

    def subset(self, mask) -> "Filament":
        mask = np.asarray(mask)
        return Filament(
            self.points[mask], self.status[mask], self.lambdas[mask],
            self.residuals[mask], self.iterations[mask], self.stop_clause[mask],
        )

    def ridge_only(self) -> "Filament":
        return self.subset(self.ridge_mask)

    def status_counts(self) -> dict:
        return {s: int(np.sum(self.status == s)) for s in STATUSES}


def _clamp(x: np.ndarray):
    y = np.clip(x, 0.0, 1.0)
    return y, np.any(y != x, axis=1)


def _projected_gradient(field, x):
    _, g, h = field.derivatives(x)
    lam, vec, _ = eigen_min_many(h[:, 0], h[:, 1], h[:, 2])
    res = np.einsum("mi,mi->m", vec, g)
    return vec * res[:, None], res, lam


def scms_step(field, x, step_a: float):
    """One update ``x + a V V' grad f(x)``; returns ``(new_point, clamped)``."""
    x = np.asarray(x, dtype=float).reshape(1, 2)
    proj, _, _ = _projected_gradient(field, x)
    new, clamped = _clamp(x + step_a * proj)
    return new[0], bool(clamped[0])


def scms(field, cfg: ScmsConfig) -> Filament:
    """Run SCMS from every seed; all seeds advance together as one batch."""
    seeds = cfg.seed_points()
    m = seeds.shape[0]
    points = seeds.copy()
    status = np.full(m, MAX_ITER, dtype=object)
    iters = np.zeros(m, dtype=int)
    clause = np.full(m, "", dtype=object)
    residuals = np.full(m, np.nan)
    lambdas = np.full(m, np.nan)

    f0 = field.value(seeds)
    keep = f0 > cfg.threshold_tau
    status[~keep] = DISCARDED_TAU
    lambdas[~keep] = np.nan

    idx = np.flatnonzero(keep)
    x = seeds[idx].copy()
    clamp_run = np.zeros(idx.size, dtype=int)
    for it in range(1, int(cfg.max_iter) + 1):
        if idx.size == 0:
            break
        proj, res, _ = _projected_gradient(field, x)
        delta = cfg.step_a * proj
        new, clamped = _clamp(x + delta)
        # length of the proposed update: a point pinned against the boundary moves
        # zero distance after clamping but has not converged
        step = np.linalg.norm(delta, axis=1)
        clamp_run = np.where(clamped, clamp_run + 1, 0)
        by_step = step < cfg.tol_eps
        by_res = np.abs(res) < cfg.tol_eps
        done = by_step | by_res
        diverged = ~done & (clamp_run > MAX_CONSECUTIVE_CLAMPS)

        points[idx] = new
        iters[idx] = it
        finished = done | diverged
        if np.any(finished):
            fi = idx[finished]
            status[idx[done]] = CONVERGED
            status[idx[diverged]] = DIVERGED
            clause[idx[done]] = np.where(by_step[done], "step", "residual")
            idx = idx[~finished]
            x = new[~finished]
            clamp_run = clamp_run[~finished]
            log.debug("iter %d: %d seeds finished, %d running", it, fi.size, idx.size)
        else:
            x = new

    run = np.flatnonzero(keep)
    if run.size:
        _, g, h = field.derivatives(points[run])
        lam, vec, _ = eigen_min_many(h[:, 0], h[:, 1], h[:, 2])
        lambdas[run] = lam
        residuals[run] = np.einsum("mi,mi->m", vec, g)
    return Filament(points, status, lambdas, residuals, iters, clause)


# ---------------------------------------------------------------- integral curves


@dataclass(frozen=True)
class Hit:
    t: float  # elapsed time along the branch, >= 0
    point: np.ndarray
    direction: int  # +1 along the sign-convention V, -1 against it

    @property
    def signed_time(self) -> float:
        return self.direction * self.t


@dataclass(eq=False)
class IntegralCurve:
    """Both branches of the integral curve through ``start``.

    ``times`` are signed and increasing: the backward (-V) branch occupies
    negative times.  ``hit`` is the filament crossing closest in |t|.
    """

    start: np.ndarray
    times: np.ndarray
    states: np.ndarray
    hit: Optional[Hit] = None
    branch_hits: list = dc_field(default_factory=list)


def _frame(field, x):
    _, g, h = field.derivatives(x.reshape(1, 2))
    lam, vec, _ = eigen_min_many(h[:, 0], h[:, 1], h[:, 2])
    return vec[0], g[0], float(lam[0])


def _aligned(field, x, ref):
    v, g, lam = _frame(field, x)
    if v @ ref < 0:
        v = -v
    return v, g, lam


def _inside(x) -> bool:
    return bool(np.all((x >= 0.0) & (x <= 1.0)))


def _rk4(field, x, h, ref):
    def vel(y):
        return _aligned(field, np.clip(y, 0.0, 1.0), ref)[0]

    k1 = vel(x)
    k2 = vel(x + 0.5 * h * k1)
    k3 = vel(x + 0.5 * h * k2)
    k4 = vel(x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _exit_fraction(x, y) -> float:
    """Largest s in [0, 1] with x + s (y - x) inside the unit square."""
    d = y - x
    s = 1.0
    for k in range(2):
        if y[k] > 1.0 and d[k] > 0:
            s = min(s, (1.0 - x[k]) / d[k])
        elif y[k] < 0.0 and d[k] < 0:
            s = min(s, (0.0 - x[k]) / d[k])
    return max(s, 0.0)


def _branch(field, x0, t_max, dt, direction, res_tol, max_bisect):
    v0, _, _ = _frame(field, x0)
    ref = direction * v0
    x = x0.copy()
    v, g, lam = _aligned(field, x, ref)
    res = float(g @ v)
    times, states = [0.0], [x.copy()]
    if abs(res) <= res_tol and lam < 0:
        return times, states, Hit(0.0, x.copy(), direction)
    nsteps = int(np.ceil(t_max / dt - 1e-9))
    t = 0.0
    for k in range(1, nsteps + 1):
        h = min(dt, t_max - t)
        y = _rk4(field, x, h, ref)
        exited = not _inside(y)
        if exited:
            s = _exit_fraction(x, y)
            h = s * h
            y = np.clip(x + s * (y - x), 0.0, 1.0)
        t_new = t + h
        vy, gy, lam_y = _aligned(field, y, ref)
        res_y = float(gy @ vy)
        crossed = (res_y == 0.0 or np.sign(res_y) != np.sign(res)) and lam_y < 0
        if abs(res_y) <= res_tol and lam_y < 0:
            times.append(t_new)
            states.append(y)
            return times, states, Hit(t_new, y.copy(), direction)
        if crossed and h > 0:
            hit = _bisect(field, x, t, h, ref, res, res_tol, max_bisect, direction)
            times.append(t_new)
            states.append(y)
            return times, states, hit
        times.append(t_new)
        states.append(y)
        x, res, ref, t = y, res_y, vy, t_new
        if exited:
            break
    return times, states, None


def _bisect(field, x, t, h, ref, res_lo, res_tol, max_bisect, direction):
    lo, hi = 0.0, h
    point = x
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        y = np.clip(_rk4(field, x, mid, ref), 0.0, 1.0)
        v, g, _ = _aligned(field, y, ref)
        r = float(g @ v)
        point = y
        if abs(r) <= res_tol:
            return Hit(t + mid, y, direction)
        if np.sign(r) == np.sign(res_lo):
            lo = mid
        else:
            hi = mid
    return Hit(t + 0.5 * (lo + hi), point, direction)


def trace_integral_curve(field, x0, t_max: float = 1.0, dt: float = 1e-3,
                         res_tol: float = 1e-10, max_bisect: int = 60) -> IntegralCurve:
    """Fixed-step RK4 along the sign-aligned eigenvector field, in both time directions.

    Each branch stops at ``t_max``, on leaving the unit square, or at its
    first filament crossing (residual sign change with lambda < 0, refined by
    bisection).
    """
    if not dt > 0:
        raise InvalidSpecError("dt must be > 0")
    x0 = np.asarray(x0, dtype=float)
    if not _inside(x0):
        raise InvalidSpecError(f"start point {x0.tolist()} outside the unit square")
    fwd_t, fwd_x, fwd_hit = _branch(field, x0, t_max, dt, +1, res_tol, max_bisect)
    bwd_t, bwd_x, bwd_hit = _branch(field, x0, t_max, dt, -1, res_tol, max_bisect)
    times = np.concatenate([-np.asarray(bwd_t[:0:-1]), np.asarray(fwd_t)])
    states = np.vstack([np.asarray(bwd_x[:0:-1]).reshape(-1, 2), np.asarray(fwd_x)])
    hits = [h for h in (fwd_hit, bwd_hit) if h is not None]
    return IntegralCurve(x0, times, states, hitting_time_of(hits), hits)


def hitting_time_of(hits: Sequence[Hit]) -> Optional[Hit]:
    if not hits:
        return None
    return min(hits, key=lambda h: (h.t, -h.direction))


def hitting_time(curve: IntegralCurve):
    """``(t, point)`` of the crossing with smallest |t|, or ``None``."""
    hit = hitting_time_of(curve.branch_hits) if curve.branch_hits else curve.hit
    if hit is None:
        return None
    return hit.t, hit.point
