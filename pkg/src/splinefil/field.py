"""Pointwise geometry of a spline surface: derivatives, Hessian eigen-pair, ridge residual."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bspline import BasisSpec, _as_points, _check_multi_index, basis_matrices, basis_matrix
from .errors import InvalidSpecError

DEGENERATE_GAP = 1e-10
_UNDERFLOW = 1e-14


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Spline surface ``f(x) = b(x)' theta`` on the unit square."""

    spec: BasisSpec
    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).ravel()
        if theta.size != self.spec.dim:
            raise InvalidSpecError(f"theta has length {theta.size}, basis dimension is {self.spec.dim}")
        if not np.all(np.isfinite(theta)):
            raise InvalidSpecError("theta must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def coef_grid(self) -> np.ndarray:
        return self.theta.reshape(self.spec.shape)

    def eval_many(self, xs, r=(0, 0)) -> np.ndarray:
        xs = _as_points(xs)
        r1, r2 = _check_multi_index(self.spec, r)
        B1 = basis_matrix(self.spec.kv1, xs[:, 0], r1)
        B2 = basis_matrix(self.spec.kv2, xs[:, 1], r2)
        return np.einsum("mi,ij,mj->m", B1, self.coef_grid, B2)

    def value(self, xs) -> np.ndarray:
        return self.eval_many(xs, (0, 0))

    def derivatives(self, xs):
        """Values, gradients (m, 2) and Hessian entries (m, 3) = (f20, f11, f02)."""
        xs = _as_points(xs)
        T = self.coef_grid
        B1 = basis_matrices(self.spec.kv1, xs[:, 0], 2)
        B2 = basis_matrices(self.spec.kv2, xs[:, 1], 2)
        # contract the x2 axis first, reused by every x1 derivative
        C = [B2[d] @ T.T for d in range(3)]  # (m, J1)

        def part(a, b):
            return np.einsum("mi,mi->m", B1[a], C[b])

        f = part(0, 0)
        grad = np.column_stack([part(1, 0), part(0, 1)])
        hess = np.column_stack([part(2, 0), part(1, 1), part(0, 2)])
        return f, grad, hess

    def grid_values(self, n: int, r=(0, 0)) -> np.ndarray:
        """Values of ``f^{(r)}`` on an n x n lattice, indexed [i1, i2]."""
        r1, r2 = _check_multi_index(self.spec, r)
        g = np.linspace(0.0, 1.0, n)
        return basis_matrix(self.spec.kv1, g, r1) @ self.coef_grid @ basis_matrix(self.spec.kv2, g, r2).T


@dataclass(frozen=True)
class EigenFrame:
    lambda_min: float
    v: np.ndarray
    gap: float


def eval(field: ScalarField, x, r=(0, 0)) -> float:  # noqa: A001 - mirrors the operation name
    return float(field.eval_many(np.asarray(x, dtype=float)[None, :], r)[0])


def d2f(field, x) -> tuple[float, float, float]:
    """``(f20, f11, f02)`` at a single point."""
    _, _, h = field.derivatives(np.asarray(x, dtype=float)[None, :])
    return float(h[0, 0]), float(h[0, 1]), float(h[0, 2])


def grad(field, x) -> np.ndarray:
    _, g, _ = field.derivatives(np.asarray(x, dtype=float)[None, :])
    return g[0]


def eigen_min_many(u, v, w):
    """Vectorized smallest eigen-pair of ``[[u, v], [v, w]]``.

    Returns ``(lam, vec, gap)`` with ``vec`` of shape (m, 2).
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    w = np.atleast_1d(np.asarray(w, dtype=float))
    d = u - w
    s = np.hypot(d, 2.0 * v)
    lam = 0.5 * (u + w - s)
    # direction (u - w - s, 2v); for u > w rewrite u - w - s = -4v^2 / (u - w + s)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(d > 0, -4.0 * v * v / (d + s), d - s)
    a = np.where(np.isfinite(a), a, 0.0)
    b = 2.0 * v
    small = (np.abs(a) < _UNDERFLOW) & (np.abs(b) < _UNDERFLOW)
    a = np.where(small, np.where(d > 0, 0.0, 1.0), a)
    b = np.where(small, np.where(d > 0, 1.0, 0.0), b)
    nrm = np.hypot(a, b)
    vec = np.column_stack([a / nrm, b / nrm])
    flip = (vec[:, 0] < 0) | ((vec[:, 0] == 0) & (vec[:, 1] < 0))
    vec[flip] *= -1.0
    gap = np.where(small & (s < _UNDERFLOW), 0.0, s)
    return lam, vec, gap


def eigen_min(u: float, v: float, w: float) -> EigenFrame:
    lam, vec, gap = eigen_min_many(u, v, w)
    return EigenFrame(float(lam[0]), vec[0], float(gap[0]))


def eigen_frame(field, x) -> EigenFrame:
    return eigen_min(*d2f(field, x))


def ridge_residual_many(field, xs):
    """``<grad f, V>`` together with ``lambda`` at many points."""
    _, g, h = field.derivatives(xs)
    lam, vec, gap = eigen_min_many(h[:, 0], h[:, 1], h[:, 2])
    return np.einsum("mi,mi->m", g, vec), lam, vec, gap


def ridge_residual(field, x) -> float:
    res, _, _, _ = ridge_residual_many(field, np.asarray(x, dtype=float)[None, :])
    return float(res[0])


def eigvec_jacobian(field, x, h: float = 1e-6) -> np.ndarray:
    """Finite-difference Jacobian of V at ``x`` (columns = d/dx1, d/dx2).

    Diagnostic only; neighbouring eigenvectors are sign-aligned with V(x).
    """
    x = np.asarray(x, dtype=float)
    v0 = eigen_frame(field, x).v
    J = np.empty((2, 2))
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        lo, hi = np.clip(x - e, 0, 1), np.clip(x + e, 0, 1)
        vp, vm = eigen_frame(field, hi).v, eigen_frame(field, lo).v
        vp = vp if vp @ v0 >= 0 else -vp
        vm = vm if vm @ v0 >= 0 else -vm
        J[:, k] = (vp - vm) / (hi[k] - lo[k])
    return J
