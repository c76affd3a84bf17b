import math

import numpy as np
import pytest
from scipy import stats

from splinefil.bspline import make_spec
from splinefil.errors import EstimationError, InvalidSpecError
from splinefil.field import ScalarField, ridge_residual_many
from splinefil.posterior import default_prior, fit, sample_theta
from splinefil.ridge import CONVERGED, Filament, ScmsConfig, scms
from splinefil.synth import generate, paper_surface, quadratic_field
from splinefil.uncertainty import (
    CredibleSpec, SECOND_DERIVS, band_mask, credible_filaments, empirical_quantile, estimate_c_over_eta,
    estimate_r_quantiles, in_band, in_hausdorff_ball, posterior_suprema, sup_norm_diff, sup_norms,
)

from conftest import quadratic_theta


@pytest.fixture(scope="module")
def small_post():
    xs, ys = generate(paper_surface(), 800, 0.1, 4)
    spec = make_spec(5, 7)
    return fit(spec, default_prior(spec), xs, ys)


class TestSupNorm:
    def test_identical_fields(self, random_field):
        est = sup_norm_diff(random_field, random_field, (2, 0))
        assert est.value == 0.0

    def test_single_hat(self):
        spec = make_spec(2, 5)
        d = np.zeros(spec.dim)
        d[2 * 5 + 3] = -0.7
        val, arg = sup_norms(spec, d, (0, 0), grid_n=10)
        assert val[0] == pytest.approx(0.7, abs=1e-12)
        np.testing.assert_allclose(arg[0], [0.5, 0.75], atol=1e-9)

    @pytest.mark.parametrize("r", list(SECOND_DERIVS.values()))
    def test_against_dense_grid(self, r, rng):
        spec = make_spec(5, 9)
        for _ in range(3):
            a = ScalarField(spec, rng.normal(size=spec.dim))
            b = ScalarField(spec, rng.normal(size=spec.dim))
            est = sup_norm_diff(a, b, r, grid_n=64)
            dense = np.abs(ScalarField(spec, a.theta - b.theta).grid_values(1024, r)).max()
            assert abs(est.value - dense) / dense < 1e-3
            # value is attained at the reported argmax
            assert est.value == pytest.approx(abs(ScalarField(spec, a.theta - b.theta).eval_many([est.argmax], r)[0]),
                                              rel=1e-12)

    def test_spec_mismatch(self):
        a = ScalarField(make_spec(3, 4), np.zeros(16))
        b = ScalarField(make_spec(3, 5, 3, 4), np.zeros(20))
        with pytest.raises(InvalidSpecError):
            sup_norm_diff(a, b, (1, 1))

    def test_grid_too_small(self, random_field):
        with pytest.raises(InvalidSpecError):
            sup_norm_diff(random_field, random_field, (0, 0), grid_n=4)


class TestQuantiles:
    def test_order_statistic(self):
        v = np.arange(1, 201, dtype=float)[::-1]
        assert empirical_quantile(v, 0.1) == 180.0
        assert empirical_quantile(np.arange(1, 11.0), 0.25) == 8.0

    def test_zero_variance(self, small_post):
        from dataclasses import replace

        post = replace(small_post, sigma2_hat=0.0)
        assert estimate_r_quantiles(post, 20, grid_n=16) == {1: 0.0, 2: 0.0, 3: 0.0}

    def test_plumbing(self, small_post):
        q = estimate_r_quantiles(small_post, 200, 0.1, grid_n=32, rng_seed=1)
        assert set(q) == {1, 2, 3} and all(v > 0 for v in q.values())
        with pytest.raises(InvalidSpecError):
            estimate_r_quantiles(small_post, 19)

    def test_monotone_in_gamma(self, small_post):
        th = sample_theta(small_post, small_post.sigma2_hat, 2, 100)
        sup = posterior_suprema(small_post, th, grid_n=32)
        for i in range(3):
            qs = [empirical_quantile(sup[:, i], g) for g in (0.05, 0.1, 0.2)]
            assert qs[0] >= qs[1] >= qs[2]

    def test_gaussian_toy(self, rng):
        """q=2, J=2: f^(1,1) = a' theta is constant in x, so its sup is |N(0, s^2)|."""
        spec = make_spec(2, 2)
        xs, ys = rng.random((12, 2)), rng.normal(size=12)
        post = fit(spec, default_prior(spec), xs, ys)
        a = np.array([1.0, -1.0, -1.0, 1.0])
        s = math.sqrt(a @ post.covariance() @ a)
        gamma = 0.1
        q = estimate_r_quantiles(post, 50_000, gamma, grid_n=8, rng_seed=5, derivs={2: (1, 1)})
        assert q[2] == pytest.approx(s * stats.norm.ppf(1 - gamma / 2), rel=0.02)


class TestBands:
    def test_center_inside(self, small_post):
        c = ScalarField(small_post.spec, small_post.mean_theta)
        spec = CredibleSpec(0.1, 1.2, {1: 1.0, 2: 1.0, 3: 1.0})
        assert in_band(c, c, spec).inside

    def test_tiny_rho_only_center(self, small_post):
        c = ScalarField(small_post.spec, small_post.mean_theta)
        spec = CredibleSpec(0.1, 1e-300, {1: 1.0, 2: 1.0, 3: 1.0})
        th = sample_theta(small_post, small_post.sigma2_hat, 0, 3)
        assert in_band(c, c, spec)
        assert not any(in_band(ScalarField(c.spec, t), c, spec) for t in th)

    def test_infinite_rho_accepts_all(self, small_post):
        sup = posterior_suprema(small_post, sample_theta(small_post, small_post.sigma2_hat, 0, 30), grid_n=16)
        assert band_mask(sup, CredibleSpec(0.1, math.inf, {1: 1.0, 2: 1.0, 3: 1.0})).all()

    def test_pass_fraction_at_rho_one(self, small_post):
        """Fresh draws pass each band at rate 1 - gamma within 3 binomial standard errors.

        The joint (all three bands) rate is lower since the bands are not perfectly
        dependent; it is only bounded by the smallest per-band rate.
        """
        gamma, m = 0.1, 400
        R = estimate_r_quantiles(small_post, m, gamma, grid_n=32, rng_seed=11)
        fresh = sample_theta(small_post, small_post.sigma2_hat, 12, m)
        sup = posterior_suprema(small_post, fresh, grid_n=32)
        se = math.sqrt(gamma * (1 - gamma) / m)
        per_k = [np.mean(sup[:, i] <= R[k]) for i, k in enumerate(SECOND_DERIVS)]
        for frac in per_k:
            assert abs(frac - (1 - gamma)) <= 3 * se
        joint = band_mask(sup, CredibleSpec(gamma, 1.0, R)).mean()
        assert joint <= min(per_k)

    def test_spec_validation(self):
        with pytest.raises(InvalidSpecError):
            CredibleSpec(gamma=0.6)
        with pytest.raises(InvalidSpecError):
            CredibleSpec(r_quantiles={1: -1.0})
        assert CredibleSpec(0.1, 1.2, {1: 2.0, 2: 5.0, 3: 1.0}, 0.5).radius == pytest.approx(3.0)


class TestCredibleFilaments:
    def test_zero_samples(self, small_post):
        run = credible_filaments(small_post, CredibleSpec(r_quantiles={1: 1, 2: 1, 3: 1}), ScmsConfig(seeds=10), 0)
        assert run.filaments == [] and run.accepted.size == 0

    def test_huge_quantiles_accept_all(self, small_post):
        spec = CredibleSpec(0.1, 1.2, {1: 1e9, 2: 1e9, 3: 1e9})
        run = credible_filaments(small_post, spec, ScmsConfig(seeds=12), 6, rng_seed=3, grid_n=16)
        assert run.acceptance_fraction == 1.0 and len(run.filaments) == 6

    def test_acceptance_near_nominal(self, small_post):
        gamma, m = 0.1, 200
        R = estimate_r_quantiles(small_post, m, gamma, grid_n=32, rng_seed=8)
        cfg = ScmsConfig(seeds=15)
        run = credible_filaments(small_post, CredibleSpec(gamma, 1.2, R), cfg, m, rng_seed=8, grid_n=32, workers=2)
        assert abs(run.acceptance_fraction - (1 - gamma)) <= 3 * math.sqrt(gamma * (1 - gamma) / m)
        for fil in run.filaments:
            c = fil.status == CONVERGED
            assert np.all(np.abs(fil.residuals[c]) < cfg.tol_eps / cfg.step_a + 1e-12)

    def test_workers_deterministic(self, small_post):
        spec = CredibleSpec(0.1, 1.2, {1: 1e9, 2: 1e9, 3: 1e9})
        a = credible_filaments(small_post, spec, ScmsConfig(seeds=10), 5, rng_seed=1, grid_n=16, workers=1)
        b = credible_filaments(small_post, spec, ScmsConfig(seeds=10), 5, rng_seed=1, grid_n=16, workers=3)
        for fa, fb in zip(a.filaments, b.filaments):
            np.testing.assert_array_equal(fa.points, fb.points)


class TestHausdorffBall:
    def test_identical(self):
        fil = Filament(np.array([[0.2, 0.3], [0.4, 0.5]]), [CONVERGED] * 2, [-1.0, -1.0])
        assert in_hausdorff_ball(fil, fil, CredibleSpec(r_quantiles={1: 0.0, 2: 0.0, 3: 0.0}))

    def test_zero_radius(self):
        a = Filament(np.array([[0.2, 0.3]]), [CONVERGED], [-1.0])
        b = Filament(np.array([[0.2, 0.3 + 1e-9]]), [CONVERGED], [-1.0])
        assert not in_hausdorff_ball(a, b, CredibleSpec(r_quantiles={1: 0.0, 2: 0.0, 3: 0.0}))


class TestCOverEta:
    def test_negative_square(self):
        spec = make_spec(3, 5)
        f = ScalarField(spec, quadratic_theta(spec, lambda a, b: -b * b + 3))
        fil = scms(f, ScmsConfig(seeds=10))
        assert estimate_c_over_eta(f, fil.ridge_only()) == pytest.approx(1.0, rel=1e-6)

    def test_analytic_path_and_scaling(self):
        f = quadratic_field(c=-1, offset=3)
        fil = scms(f, ScmsConfig(seeds=10)).ridge_only()
        base = estimate_c_over_eta(f, fil)
        assert base == pytest.approx(1.0, rel=1e-9)
        assert estimate_c_over_eta(f.scaled(7.5), fil) == pytest.approx(base, rel=1e-9)

    def test_errors(self):
        f = quadratic_field(c=-1, offset=3)
        with pytest.raises(EstimationError):
            estimate_c_over_eta(f, Filament(np.zeros((0, 2)), [], []))
        with pytest.raises(EstimationError):
            estimate_c_over_eta(quadratic_field(a=1, c=2), Filament(np.array([[0.5, 0.5]]), [CONVERGED], [1.0]))
