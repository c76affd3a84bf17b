"""Credible sets for filaments built from sup-norm bands on second derivatives.

A posterior surface is inside the band for derivative ``k`` when
``sup_x |f^(k) - f~^(k)| <= rho * R_k``, where ``R_k`` is the empirical
``1 - gamma`` quantile of that supremum over posterior draws and ``f~`` is the
posterior mean.  ``k = 1, 2, 3`` index ``f^(2,0), f^(1,1), f^(0,2)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .bspline import BasisSpec, basis_matrix
from .errors import EstimationError, InvalidSpecError
from .field import ScalarField, eigen_min_many
from .metrics import hausdorff
from .posterior import FittedPosterior, sample_theta
from .ridge import Filament, ScmsConfig, scms

SECOND_DERIVS = {1: (2, 0), 2: (1, 1), 3: (0, 2)}

ASCENT_MAX_STEPS = 100
ASCENT_MIN_GAIN = 1e-12
_FD_STEP = 1e-6


@dataclass(frozen=True)
class CredibleSpec:
    gamma: float = 0.1
    rho: float = 1.2
    r_quantiles: dict = dc_field(default_factory=dict)
    c_over_eta: float = 1.0

    def __post_init__(self):
        if not 0 < self.gamma < 0.5:
            raise InvalidSpecError(f"gamma must lie in (0, 0.5), got {self.gamma}")
        if not self.rho >= 0:
            raise InvalidSpecError("rho must be nonnegative")
        for k, v in self.r_quantiles.items():
            if not (math.isfinite(v) and v >= 0):
                raise InvalidSpecError(f"quantile R_{k} must be finite and >= 0, got {v}")
        if not self.c_over_eta >= 0:
            raise InvalidSpecError("c_over_eta must be nonnegative")

    @property
    def radius(self) -> float:
        """Hausdorff-ball radius ``(C/eta) * rho * max_k R_k``."""
        return self.c_over_eta * self.rho * max(self.r_quantiles.values(), default=0.0)


@dataclass(frozen=True)
class SupNormEstimate:
    value: float
    argmax: np.ndarray
    method: str = "grid+ascent"


# ------------------------------------------------------------------ local ascent


def ascend(objective: Callable[[np.ndarray, np.ndarray], np.ndarray], x0: np.ndarray, step0: float):
    """Batched projected ascent of ``objective`` over the unit square.

    ``objective(xs, rows)`` evaluates problem ``rows[i]`` at point ``xs[i]``.
    Uses central finite-difference gradients and a normalized step with
    backtracking; a row stops when its gain drops below ``ASCENT_MIN_GAIN``
    or after ``ASCENT_MAX_STEPS`` steps.  Values never fall below those at
    ``x0``.
    """
    x = np.array(x0, dtype=float)
    m = x.shape[0]
    val = objective(x, np.arange(m))
    step = np.full(m, float(step0))
    active = np.arange(m)
    for _ in range(ASCENT_MAX_STEPS):
        if active.size == 0:
            break
        xa, va = x[active], val[active]
        g = np.empty_like(xa)
        for k in range(2):
            e = np.zeros(2)
            e[k] = _FD_STEP
            hi, lo = np.clip(xa + e, 0.0, 1.0), np.clip(xa - e, 0.0, 1.0)
            g[:, k] = (objective(hi, active) - objective(lo, active)) / (hi[:, k] - lo[:, k])
        gn = np.linalg.norm(g, axis=1)
        d = g / np.where(gn > 0, gn, 1.0)[:, None]
        trial = step[active].copy()
        best_x, gain = xa.copy(), np.zeros(active.size)
        pending = gn > 0
        for _ in range(40):
            if not pending.any():
                break
            pi = np.flatnonzero(pending)
            cand = np.clip(xa[pi] + trial[pi, None] * d[pi], 0.0, 1.0)
            cv = objective(cand, active[pi])
            ok = cv > va[pi]
            best_x[pi[ok]] = cand[ok]
            gain[pi[ok]] = cv[ok] - va[pi[ok]]
            pending[pi[ok]] = False
            trial[pi[~ok]] *= 0.5
        improved = gain > 0
        x[active[improved]] = best_x[improved]
        val[active[improved]] += gain[improved]
        step[active] = np.where(improved, 1.5 * trial, trial)
        active = active[improved & (gain >= ASCENT_MIN_GAIN)]
    return x, val


# ------------------------------------------------------------------ sup norms


def _grid_batch(spec: BasisSpec, dthetas: np.ndarray, r, grid_n: int):
    g = np.linspace(0.0, 1.0, grid_n)
    G1 = basis_matrix(spec.kv1, g, r[0])
    G2 = basis_matrix(spec.kv2, g, r[1])
    T = dthetas.reshape(-1, *spec.shape)
    vals = np.abs(np.einsum("ai,mij,bj->mab", G1, T, G2, optimize=True))
    flat = vals.reshape(T.shape[0], -1)
    idx = flat.argmax(axis=1)
    i1, i2 = np.unravel_index(idx, (grid_n, grid_n))
    return flat[np.arange(T.shape[0]), idx], np.column_stack([g[i1], g[i2]])


def _abs_derivative_objective(spec: BasisSpec, dthetas: np.ndarray, r):
    T = dthetas.reshape(-1, *spec.shape)

    def obj(xs, rows):
        B1 = basis_matrix(spec.kv1, xs[:, 0], r[0])
        B2 = basis_matrix(spec.kv2, xs[:, 1], r[1])
        return np.abs(np.einsum("mi,mij,mj->m", B1, T[rows], B2))

    return obj


def sup_norms(spec: BasisSpec, dthetas, r, grid_n: int = 64):
    """``sup_x |b^(r)(x)' dtheta|`` for each row of ``dthetas``: grid search then ascent.

    Returns ``(values, argmaxes)``.
    """
    dthetas = np.atleast_2d(np.asarray(dthetas, dtype=float))
    if grid_n < 8:
        raise InvalidSpecError("grid_n must be >= 8")
    if dthetas.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 2))
    grid_max, start = _grid_batch(spec, dthetas, r, grid_n)
    x, val = ascend(_abs_derivative_objective(spec, dthetas, r), start, 1.0 / (grid_n - 1))
    return np.maximum(val, grid_max), x


def sup_norm_diff(field_a: ScalarField, field_b: ScalarField, r, grid_n: int = 64) -> SupNormEstimate:
    if not field_a.spec.same_space(field_b.spec):
        raise InvalidSpecError("fields live in different spline spaces")
    val, arg = sup_norms(field_a.spec, field_a.theta - field_b.theta, r, grid_n)
    return SupNormEstimate(float(val[0]), arg[0], "grid+ascent")


def posterior_suprema(post: FittedPosterior, thetas, grid_n: int = 64, derivs=SECOND_DERIVS) -> np.ndarray:
    """Sup-norm deviation from the posterior mean, shape (m, len(derivs))."""
    d = np.atleast_2d(thetas) - post.mean_theta[None, :]
    return np.column_stack([sup_norms(post.spec, d, r, grid_n)[0] for r in derivs.values()])


def empirical_quantile(values, gamma: float) -> float:
    """Order statistic ``ceil((1 - gamma) m)`` of ``values`` (1-based)."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise EstimationError("empirical quantile of an empty sample")
    k = math.ceil((1.0 - gamma) * v.size - 1e-9)
    return float(v[min(max(k, 1), v.size) - 1])


def estimate_r_quantiles(post: FittedPosterior, sample_count: int = 200, gamma: float = 0.1,
                         grid_n: int = 64, rng_seed=0, derivs=SECOND_DERIVS) -> dict:
    """Empirical ``1 - gamma`` quantiles of the posterior sup-norm deviations, keyed by k."""
    if sample_count < 20:
        raise InvalidSpecError("sample_count must be >= 20")
    thetas = sample_theta(post, post.sigma2_hat, rng_seed, sample_count)
    sup = posterior_suprema(post, thetas, grid_n, derivs)
    return {k: empirical_quantile(sup[:, i], gamma) for i, k in enumerate(derivs)}


@dataclass(frozen=True)
class BandResult:
    per_k: dict
    inside: bool

    def __bool__(self):
        return self.inside


def in_band(candidate: ScalarField, center: ScalarField, spec: CredibleSpec, grid_n: int = 64) -> BandResult:
    per_k = {}
    for k, r in SECOND_DERIVS.items():
        sup = sup_norm_diff(candidate, center, r, grid_n).value
        per_k[k] = bool(sup <= spec.rho * spec.r_quantiles[k])
    return BandResult(per_k, all(per_k.values()))


def band_mask(suprema: np.ndarray, spec: CredibleSpec) -> np.ndarray:
    """Rows of a :func:`posterior_suprema` table that lie inside every band."""
    bounds = np.array([spec.rho * spec.r_quantiles[k] for k in SECOND_DERIVS])
    return np.all(np.asarray(suprema) <= bounds[None, :], axis=1)


@dataclass
class CredibleRun:
    filaments: list
    accepted: np.ndarray  # indices of accepted draws
    acceptance_fraction: float
    suprema: np.ndarray
    thetas: np.ndarray


def credible_filaments(post: FittedPosterior, spec: CredibleSpec, scms_cfg: ScmsConfig,
                       sample_count: int = 200, rng_seed=0, grid_n: int = 64,
                       workers: int = 1) -> CredibleRun:
    """Filaments of posterior draws that fall inside all three derivative bands."""
    p = post.mean_theta.size
    if sample_count <= 0:
        return CredibleRun([], np.zeros(0, dtype=int), float("nan"), np.zeros((0, 3)), np.zeros((0, p)))
    thetas = sample_theta(post, post.sigma2_hat, rng_seed, sample_count)
    sup = posterior_suprema(post, thetas, grid_n)
    accepted = np.flatnonzero(band_mask(sup, spec))

    def run(i):
        return scms(ScalarField(post.spec, thetas[i]), scms_cfg)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fils = list(pool.map(run, accepted))
    else:
        fils = [run(i) for i in accepted]
    return CredibleRun(fils, accepted, accepted.size / sample_count, sup, thetas)


def in_hausdorff_ball(candidate, center, spec: CredibleSpec) -> bool:
    a = candidate.ridge_points() if isinstance(candidate, Filament) else candidate
    b = center.ridge_points() if isinstance(center, Filament) else center
    return hausdorff(a, b) <= spec.radius


def sup_gradient_norm(field: ScalarField, grid_n: int = 64) -> SupNormEstimate:
    g1 = field.grid_values(grid_n, (1, 0))
    g2 = field.grid_values(grid_n, (0, 1))
    nrm = np.hypot(g1, g2)
    i1, i2 = np.unravel_index(nrm.argmax(), nrm.shape)
    grid = np.linspace(0.0, 1.0, grid_n)
    start = np.array([[grid[i1], grid[i2]]])

    def obj(xs, rows):
        return np.hypot(field.eval_many(xs, (1, 0)), field.eval_many(xs, (0, 1)))

    x, val = ascend(obj, start, 1.0 / (grid_n - 1))
    return SupNormEstimate(float(max(val[0], nrm.max())), x[0], "grid+ascent")


def estimate_c_over_eta(field, filament: Filament, grid_n: int = 64) -> float:
    """``sup ||grad f|| / min(-lambda)`` over the filament's converged points."""
    pts = filament.points[filament.converged]
    if pts.shape[0] == 0:
        raise EstimationError("filament has no converged points")
    _, _, h = field.derivatives(pts)
    lam, _, _ = eigen_min_many(h[:, 0], h[:, 1], h[:, 2])
    if np.any(lam >= 0):
        raise EstimationError("lambda >= 0 at a filament point: the ridge is not strongly concave there")
    eta = float(np.min(-lam))
    if isinstance(field, ScalarField):
        C = sup_gradient_norm(field, grid_n).value
    else:
        g = np.linspace(0.0, 1.0, grid_n)
        a, b = np.meshgrid(g, g, indexing="ij")
        _, grad, _ = field.derivatives(np.column_stack([a.ravel(), b.ravel()]))
        C = float(np.linalg.norm(grad, axis=1).max())
    return C / eta
