"""Synthetic ground truth: closed-form surfaces, noisy samples, reference filaments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .bspline import _as_points

FD_STEP_GRAD = 1e-6
# second differences at 1e-6 lose ~4 digits to cancellation; 1e-4 keeps
# truncation error near 1e-7 for the surfaces used here
FD_STEP_HESS = 1e-4


@dataclass(frozen=True)
class AnalyticField:
    """Closed-form surface with the same evaluation interface as ``ScalarField``.

    ``fn`` maps (x1, x2) arrays to values.  ``grad_fn`` / ``hess_fn`` may supply
    exact derivatives as (m, 2) and (m, 3) = (f20, f11, f02) arrays; missing
    ones are replaced by central finite differences.
    """

    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_fn: Optional[Callable] = None
    hess_fn: Optional[Callable] = None
    name: str = "analytic"
    h_grad: float = FD_STEP_GRAD
    h_hess: float = FD_STEP_HESS

    def value(self, xs) -> np.ndarray:
        xs = _as_points(xs)
        return np.broadcast_to(np.asarray(self.fn(xs[:, 0], xs[:, 1]), dtype=float), (xs.shape[0],)).copy()

    def _fd_grad(self, x1, x2):
        h = self.h_grad
        f = self.fn
        return np.column_stack([(f(x1 + h, x2) - f(x1 - h, x2)) / (2 * h), (f(x1, x2 + h) - f(x1, x2 - h)) / (2 * h)])

    def _fd_hess(self, x1, x2):
        h = self.h_hess
        f = self.fn
        f0 = f(x1, x2)
        f20 = (f(x1 + h, x2) - 2 * f0 + f(x1 - h, x2)) / (h * h)
        f02 = (f(x1, x2 + h) - 2 * f0 + f(x1, x2 - h)) / (h * h)
        f11 = (f(x1 + h, x2 + h) - f(x1 + h, x2 - h) - f(x1 - h, x2 + h) + f(x1 - h, x2 - h)) / (4 * h * h)
        return np.column_stack([f20, f11, f02])

    def derivatives(self, xs):
        xs = _as_points(xs)
        x1, x2 = xs[:, 0], xs[:, 1]
        m = xs.shape[0]
        f = self.value(xs)
        g = self.grad_fn(x1, x2) if self.grad_fn is not None else self._fd_grad(x1, x2)
        H = self.hess_fn(x1, x2) if self.hess_fn is not None else self._fd_hess(x1, x2)
        g = np.broadcast_to(np.asarray(g, dtype=float), (m, 2)).copy()
        H = np.broadcast_to(np.asarray(H, dtype=float), (m, 3)).copy()
        return f, g, H

    def scaled(self, c: float) -> "AnalyticField":
        """The field ``c * f``."""
        fn, gf, hf = self.fn, self.grad_fn, self.hess_fn
        return AnalyticField(
            lambda a, b: c * fn(a, b),
            None if gf is None else (lambda a, b: c * np.asarray(gf(a, b))),
            None if hf is None else (lambda a, b: c * np.asarray(hf(a, b))),
            name=f"{c}*{self.name}",
            h_grad=self.h_grad,
            h_hess=self.h_hess,
        )


def normal_pdf(t, mean: float = 0.5, sd: float = 0.3):
    return np.exp(-((t - mean) ** 2) / (2 * sd * sd)) / (sd * math.sqrt(2 * math.pi))


def _paper_fn(x1, x2):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    r2 = x1 * x1 + x2 * x2
    # cos^2(arctan(x2/x1)) = x1^2 / r^2, extended by 0 on x1 = 0; origin uses angle 0
    with np.errstate(invalid="ignore", divide="ignore"):
        c2 = np.where(r2 > 0, x1 * x1 / np.where(r2 > 0, r2, 1.0), 1.0)
    return 1.0 + normal_pdf(np.sqrt(r2)) ** (1.0 + c2)


def paper_surface() -> AnalyticField:
    """Ring-shaped test surface: ``1 + phi(|x|)^(1 + cos^2(angle))``, phi = N(0.5, 0.3^2) pdf."""
    return AnalyticField(_paper_fn, name="paper-surface")


def quadratic_field(a: float = 0.0, b: float = 0.0, c: float = -1.0, x2_center: float = 0.0,
                    x1_center: float = 0.0, offset: float = 0.0) -> AnalyticField:
    """``a*dx1^2 + b*dx1*dx2 + c*dx2^2 + offset`` with exact derivatives."""

    def fn(x1, x2):
        d1, d2 = x1 - x1_center, x2 - x2_center
        return a * d1 * d1 + b * d1 * d2 + c * d2 * d2 + offset

    def gf(x1, x2):
        d1, d2 = np.asarray(x1) - x1_center, np.asarray(x2) - x2_center
        return np.column_stack([2 * a * d1 + b * d2, b * d1 + 2 * c * d2])

    def hf(x1, x2):
        return np.array([[2 * a, b, 2 * c]])

    return AnalyticField(fn, gf, hf, name="quadratic")


def generate(field, n: int, noise_sd: float, rng_seed):
    """Uniform design on the unit square with Gaussian noise; returns ``(xs, ys)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng_seed)
    xs = rng.uniform(0.0, 1.0, size=(int(n), 2))
    noise = rng.standard_normal(int(n))
    ys = field.value(xs) + noise_sd * noise
    return xs, ys


def reference_filament(field, scms_cfg):
    """Filament of the exact surface, used as ground truth."""
    from .ridge import scms

    return scms(field, scms_cfg)
