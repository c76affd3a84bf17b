"""Clamped B-spline bases on [0, 1] and their tensor products.

Univariate bases are evaluated with the Cox-de Boor recursion; derivatives
use the standard recursion in which the r-th derivative of an order-k basis
is a knot-gap weighted difference of (r-1)-th derivatives of order k-1.
All evaluators are vectorized over points.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, InvalidSpecError, UnsupportedDerivativeError

MAX_DERIV = 3


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Clamped knot vector of a given order (order = degree + 1).

    ``knots`` holds the full sequence including the ``order``-fold end knots.
    """

    order: int
    knots: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.knots, dtype=float)
        q = int(self.order)
        if q < 2:
            raise InvalidSpecError(f"order must be >= 2, got {q}")
        if t.ndim != 1 or t.size < 2 * q:
            raise InvalidSpecError("knot vector too short for the order")
        if not (np.all(t[:q] == 0.0) and np.all(t[-q:] == 1.0)):
            raise InvalidSpecError("knots must be clamped: order-fold 0 and 1 at the ends")
        inner = t[q - 1:t.size - q + 1]
        if np.any(np.diff(inner) <= 0):
            raise InvalidSpecError("interior knots must be strictly increasing inside (0, 1)")
        t.setflags(write=False)
        object.__setattr__(self, "knots", t)
        object.__setattr__(self, "order", q)

    @property
    def interior_count(self) -> int:
        return self.knots.size - 2 * self.order

    @property
    def num_basis(self) -> int:
        return self.order + self.interior_count

    @property
    def interior(self) -> np.ndarray:
        return self.knots[self.order:self.knots.size - self.order]

    @cached_property
    def inverse_gaps(self) -> dict:
        """Per order k, reciprocal knot spans ``(1/(t[i+k-1]-t[i]), 1/(t[i+k]-t[i+1]))``, 0 where empty."""
        t, L = self.knots, self.knots.size
        return {k: (_safe_inv(t[k - 1:L - 1] - t[:L - k]), _safe_inv(t[k:L] - t[1:L - k + 1]))
                for k in range(2, self.order + 1)}

    def mesh_ratio(self) -> float:
        """max/min of the gaps between consecutive distinct breakpoints."""
        gaps = np.diff(self.knots[self.order - 1:self.knots.size - self.order + 1])
        return float(gaps.max() / gaps.min())

    def __repr__(self):
        return f"KnotVector(order={self.order}, num_basis={self.num_basis})"


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """Tensor-product spline space; flat index is ``j1 * J2 + j2``."""

    kv1: KnotVector
    kv2: KnotVector

    @property
    def shape(self) -> tuple[int, int]:
        return (self.kv1.num_basis, self.kv2.num_basis)

    @property
    def dim(self) -> int:
        return self.kv1.num_basis * self.kv2.num_basis

    @property
    def orders(self) -> tuple[int, int]:
        return (self.kv1.order, self.kv2.order)

    def same_space(self, other: "BasisSpec") -> bool:
        return (
            self.orders == other.orders
            and np.array_equal(self.kv1.knots, other.kv1.knots)
            and np.array_equal(self.kv2.knots, other.kv2.knots)
        )

    def __repr__(self):
        return f"BasisSpec(orders={self.orders}, shape={self.shape})"


def make_uniform_knots(q: int, num_basis: int) -> KnotVector:
    """Clamped knots with ``num_basis - q`` equally spaced interior knots."""
    if q < 2:
        raise InvalidSpecError(f"order must be >= 2, got {q}")
    if num_basis < q:
        raise InvalidSpecError(f"num_basis={num_basis} is smaller than order q={q}")
    n_int = num_basis - q
    interior = np.arange(1, n_int + 1) / (n_int + 1)
    knots = np.concatenate([np.zeros(q), interior, np.ones(q)])
    return KnotVector(q, knots)


def make_spec(q1: int, j1: int, q2: int | None = None, j2: int | None = None) -> BasisSpec:
    """Uniform tensor spec; the second axis defaults to the first."""
    q2 = q1 if q2 is None else q2
    j2 = j1 if j2 is None else j2
    return BasisSpec(make_uniform_knots(q1, j1), make_uniform_knots(q2, j2))


def _check_points(x: np.ndarray) -> None:
    bad = ~((x >= 0.0) & (x <= 1.0))
    if np.any(bad):
        i = int(np.flatnonzero(bad.ravel())[0])
        raise DomainError(f"point {x.ravel()[i]!r} at index {i} is outside [0, 1]")


def _order1(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    N = ((t[:-1][None, :] <= x[:, None]) & (x[:, None] < t[1:][None, :])).astype(float)
    # left-limit convention at the right end: last nonempty interval owns x = 1
    at_end = x == t[-1]
    if np.any(at_end):
        last = np.flatnonzero(t[:-1] < t[1:])[-1]
        N[at_end, :] = 0.0
        N[at_end, last] = 1.0
    return N


def _safe_inv(d: np.ndarray) -> np.ndarray:
    out = np.zeros_like(d)
    nz = d > 0
    out[nz] = 1.0 / d[nz]
    return out


def _basis(t: np.ndarray, x: np.ndarray, k: int, r: int) -> np.ndarray:
    """All order-k basis functions over full knots ``t``, r-th derivative.

    Returns shape (m, len(t) - k).
    """
    L = t.size
    if k == 1:
        if r > 0:
            return np.zeros((x.size, L - 1))
        return _order1(t, x)
    lower = _basis(t, x, k - 1, max(r - 1, 0))
    left_gap = _safe_inv(t[k - 1:L - 1] - t[:L - k])
    right_gap = _safe_inv(t[k:L] - t[1:L - k + 1])
    if r == 0:
        w1 = (x[:, None] - t[None, :L - k]) * left_gap[None, :]
        w2 = (t[None, k:L] - x[:, None]) * right_gap[None, :]
        return w1 * lower[:, :-1] + w2 * lower[:, 1:]
    return (k - 1) * (lower[:, :-1] * left_gap[None, :] - lower[:, 1:] * right_gap[None, :])


def basis_matrix(kv: KnotVector, x, deriv: int = 0) -> np.ndarray:
    """Matrix of ``d^deriv/dx^deriv B_j(x_i)``, shape (len(x), J)."""
    if not 0 <= deriv < kv.order:
        raise UnsupportedDerivativeError(
            f"derivative {deriv} not supported for order {kv.order} (need deriv < order)"
        )
    if deriv > MAX_DERIV:
        raise UnsupportedDerivativeError(f"derivatives above {MAX_DERIV} are not supported")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_points(x)
    return _basis(kv.knots, x, kv.order, deriv)


def basis_matrices(kv: KnotVector, x, max_deriv: int) -> list:
    """``[basis_matrix(kv, x, r) for r in 0..max_deriv]`` from a single recursion pass."""
    if not 0 <= max_deriv < kv.order or max_deriv > MAX_DERIV:
        raise UnsupportedDerivativeError(f"derivative {max_deriv} not supported for order {kv.order}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_points(x)
    t, L = kv.knots, kv.knots.size
    cur = [_order1(t, x)]
    gaps = kv.inverse_gaps
    for k in range(2, kv.order + 1):
        left_gap, right_gap = gaps[k]
        w1 = (x[:, None] - t[None, :L - k]) * left_gap[None, :]
        w2 = (t[None, k:L] - x[:, None]) * right_gap[None, :]
        nxt = [w1 * cur[0][:, :-1] + w2 * cur[0][:, 1:]]
        for r in range(1, min(max_deriv, k - 1) + 1):
            lo = cur[r - 1]
            nxt.append((k - 1) * (lo[:, :-1] * left_gap[None, :] - lo[:, 1:] * right_gap[None, :]))
        cur = nxt
    return cur[:max_deriv + 1]


def eval_univariate(kv: KnotVector, x: float, deriv: int = 0) -> np.ndarray:
    """Values of all J basis functions (or a derivative) at a scalar ``x``."""
    return basis_matrix(kv, [x], deriv)[0]


def _as_points(xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 1:
        xs = xs[None, :]
    if xs.ndim != 2 or xs.shape[1] != 2:
        raise DomainError(f"expected points of shape (n, 2), got {xs.shape}")
    return xs


def _check_multi_index(spec: BasisSpec, r) -> tuple[int, int]:
    r1, r2 = int(r[0]), int(r[1])
    if r1 < 0 or r2 < 0 or r1 + r2 > MAX_DERIV:
        raise UnsupportedDerivativeError(f"multi-index {r} outside |r| <= {MAX_DERIV}")
    return r1, r2


def tensor_basis(spec: BasisSpec, xs, r=(0, 0)) -> np.ndarray:
    """Rows ``b^{(r)}(x_i)`` in dictionary order, shape (n, J1*J2)."""
    xs = _as_points(xs)
    r1, r2 = _check_multi_index(spec, r)
    B1 = basis_matrix(spec.kv1, xs[:, 0], r1)
    B2 = basis_matrix(spec.kv2, xs[:, 1], r2)
    return (B1[:, :, None] * B2[:, None, :]).reshape(xs.shape[0], -1)


def eval_tensor(spec: BasisSpec, x, r=(0, 0)) -> np.ndarray:
    return tensor_basis(spec, np.asarray(x, dtype=float)[None, :], r)[0]


def design_matrix(spec: BasisSpec, xs) -> np.ndarray:
    """Design matrix with one tensor-basis row per data point."""
    xs = _as_points(xs)
    bad = ~np.all((xs >= 0.0) & (xs <= 1.0), axis=1)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise DomainError(f"row {i} ({xs[i].tolist()}) is outside [0, 1]^2")
    return tensor_basis(spec, xs, (0, 0))

