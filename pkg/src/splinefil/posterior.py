"""Conjugate Gaussian posterior for tensor-spline coefficients.

Model: ``Y | theta, s2 ~ N(B theta, s2 I)`` with prior
``theta | s2 ~ N(theta0, s2 Lambda0)`` and diagonal ``Lambda0``.  The noise
variance is replaced by its empirical-Bayes plug-in estimate.

Everything is computed in coefficient space through the Cholesky factor of
``B'B + Lambda0^{-1}``; no n x n matrix is ever formed.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy import linalg

from .bspline import BasisSpec, design_matrix, make_spec
from .errors import DataError, InvalidSpecError, NumericalError

log = logging.getLogger(__name__)

TIE_RTOL = 1e-10
COLLAPSE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class PriorSpec:
    theta0: np.ndarray
    lambda0_diag: np.ndarray
    c1: float = 0.0
    c2: float = math.inf

    def __post_init__(self):
        theta0 = np.asarray(self.theta0, dtype=float).ravel()
        lam = np.asarray(self.lambda0_diag, dtype=float).ravel()
        if theta0.shape != lam.shape:
            raise InvalidSpecError("theta0 and lambda0_diag must have equal length")
        if not np.all(np.isfinite(theta0)):
            raise InvalidSpecError("theta0 must be finite")
        if not np.all(lam > 0) or not np.all(np.isfinite(lam)):
            raise InvalidSpecError("lambda0_diag must be positive and finite")
        c1 = float(lam.min()) if self.c1 == 0.0 else float(self.c1)
        c2 = float(lam.max()) if math.isinf(self.c2) else float(self.c2)
        if not (0 < c1 <= c2 < math.inf):
            raise InvalidSpecError(f"need 0 < c1 <= c2 < inf, got ({c1}, {c2})")
        if lam.min() < c1 or lam.max() > c2:
            raise InvalidSpecError(f"prior variances outside the declared bounds [{c1}, {c2}]")
        object.__setattr__(self, "theta0", theta0)
        object.__setattr__(self, "lambda0_diag", lam)
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "c2", c2)

    @property
    def dim(self) -> int:
        return self.theta0.size


def default_prior(spec: BasisSpec, scale: float = 1.0) -> PriorSpec:
    """``theta0 = 0``, ``Lambda0 = scale * I``."""
    return PriorSpec(np.zeros(spec.dim), np.full(spec.dim, float(scale)))


@dataclass(frozen=True, eq=False)
class FittedPosterior:
    spec: BasisSpec
    prior: PriorSpec
    mean_theta: np.ndarray
    precision_chol: np.ndarray
    sigma2_hat: float
    n: int
    # log det(B'B + Lambda0^{-1}); kept for the model score
    logdet_precision: float = math.nan

    def covariance(self, sigma2: float | None = None) -> np.ndarray:
        """Dense posterior covariance; for tests and small problems."""
        s2 = self.sigma2_hat if sigma2 is None else sigma2
        Linv = linalg.solve_triangular(self.precision_chol, np.eye(self.mean_theta.size), lower=True)
        return s2 * (Linv.T @ Linv)


def _check_data(spec: BasisSpec, prior: PriorSpec, xs, ys):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.ndim != 2 or xs.shape[1] != 2:
        raise DataError(f"xs must have shape (n, 2), got {xs.shape}")
    if xs.shape[0] < 1:
        raise DataError("need at least one observation")
    if xs.shape[0] != ys.size:
        raise DataError(f"{xs.shape[0]} points but {ys.size} responses")
    if not np.all(np.isfinite(ys)):
        i = int(np.flatnonzero(~np.isfinite(ys))[0])
        raise DataError(f"non-finite response at row {i}")
    if prior.dim != spec.dim:
        raise InvalidSpecError(f"prior has dimension {prior.dim}, basis has {spec.dim}")
    return xs, ys


def _precision_factor(B: np.ndarray, prior: PriorSpec):
    P = B.T @ B
    P[np.diag_indices_from(P)] += 1.0 / prior.lambda0_diag
    try:
        L = linalg.cholesky(P, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"Cholesky of the posterior precision failed: {exc}") from exc
    return L


def _sigma2_from_factor(B, ys, prior, L) -> float:
    resid = ys - B @ prior.theta0
    z = linalg.solve_triangular(L, B.T @ resid, lower=True)
    # Woodbury: r'(B Lambda0 B' + I)^{-1} r = r'r - |L^{-1} B' r|^2
    rr = float(resid @ resid)
    s2 = (rr - float(z @ z)) / ys.size
    # below this the difference is cancellation noise: the data are interpolated
    if s2 <= COLLAPSE_RTOL * rr / ys.size:
        return 0.0
    return s2


def empirical_bayes_sigma2(spec: BasisSpec, prior: PriorSpec, xs, ys) -> float:
    """Plug-in noise variance ``n^{-1} r'(B Lambda0 B' + I)^{-1} r``, ``r = Y - B theta0``."""
    xs, ys = _check_data(spec, prior, xs, ys)
    B = design_matrix(spec, xs)
    return _sigma2_from_factor(B, ys, prior, _precision_factor(B, prior))


def fit(spec: BasisSpec, prior: PriorSpec, xs, ys) -> FittedPosterior:
    xs, ys = _check_data(spec, prior, xs, ys)
    B = design_matrix(spec, xs)
    L = _precision_factor(B, prior)
    rhs = B.T @ ys + prior.theta0 / prior.lambda0_diag
    mean = linalg.cho_solve((L, True), rhs)
    s2 = _sigma2_from_factor(B, ys, prior, L)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return FittedPosterior(spec, prior, mean, L, s2, ys.size, logdet)


def score_from_posterior(post: FittedPosterior) -> float:
    """Log model score of an already fitted posterior (see :func:`log_model_score`)."""
    if post.sigma2_hat <= 0.0:
        warnings.warn(
            f"sigma_hat is zero for {post.spec!r}: data are interpolated exactly; "
            "returning the +inf sentinel score",
            RuntimeWarning,
            stacklevel=2,
        )
        return math.inf
    # det(B Lambda0 B' + I) = det(Lambda0^{-1} + B'B) det(Lambda0)
    logdet_n = post.logdet_precision + float(np.sum(np.log(post.prior.lambda0_diag)))
    return -post.n * math.log(post.sigma2_hat) - logdet_n


def log_model_score(spec: BasisSpec, prior: PriorSpec, xs, ys) -> float:
    """``-2n log sigma_hat - log det(B Lambda0 B' + I_n)``, constants dropped.

    Returns ``+inf`` (with a RuntimeWarning) when the residual variance
    collapses to zero; :func:`select_j` never selects such a candidate.
    """
    return score_from_posterior(fit(spec, prior, xs, ys))


def select_j(
    candidates: Iterable[tuple[int, int]],
    xs,
    ys,
    prior_builder: Callable[[BasisSpec], PriorSpec] = default_prior,
    q: int | tuple[int, int] = 5,
    return_scores: bool = False,
):
    """Pick ``(J1, J2)`` maximizing the log model score.

    Ties (relative difference below ``TIE_RTOL``) go to the smaller ``J1*J2``,
    then the smaller ``J1``.  Candidates whose
    score is the +inf interpolation sentinel are ranked last.
    """
    cands = sorted({(int(a), int(b)) for a, b in candidates}, key=lambda c: (c[0] * c[1], c[0], c[1]))
    if not cands:
        raise InvalidSpecError("candidate set is empty")
    q1, q2 = (q, q) if isinstance(q, int) else q
    scores = {}
    for j1, j2 in cands:
        spec = make_spec(q1, j1, q2, j2)
        scores[(j1, j2)] = log_model_score(spec, prior_builder(spec), xs, ys)
        log.debug("score J=(%d,%d): %.6f", j1, j2, scores[(j1, j2)])
    finite = [c for c in cands if math.isfinite(scores[c])]
    pool = finite if finite else cands
    best = pool[0]
    for c in pool[1:]:
        # scores equal up to round-off count as tied, so the earlier (smaller) candidate stays
        if scores[c] > scores[best] + TIE_RTOL * max(1.0, abs(scores[best])):
            best = c
    if return_scores:
        return best, scores
    return best


def sample_theta(post: FittedPosterior, sigma2: float, rng_seed, count: int) -> np.ndarray:
    """Draws of ``theta ~ N(mean, sigma2 (B'B + Lambda0^{-1})^{-1})``, shape (count, p)."""
    if sigma2 < 0:
        raise InvalidSpecError("sigma2 must be nonnegative")
    rng = np.random.default_rng(rng_seed)
    p = post.mean_theta.size
    z = rng.standard_normal((p, int(count)))
    dev = linalg.solve_triangular(post.precision_chol, z, lower=True, trans="T")
    return post.mean_theta[None, :] + math.sqrt(sigma2) * dev.T
