import math

import numpy as np
import pytest

from uotkit import KL, Balanced, Berg, DiscreteMeasure, aprox, conj, conj_grad, divergence, softmin
from uotkit.entropies import conj_hess, logdotexp


class TestDivergence:
    def test_kl_zero_at_equal(self, rng):
        w = rng.uniform(0.1, 1, 6)
        assert divergence(KL(1.0), w, w) == 0.0

    def test_kl_doubled_unit_mass(self):
        nu = np.array([0.25, 0.25, 0.5])
        val = divergence(KL(1.0), 2 * nu, nu)
        assert val == pytest.approx(2 * math.log(2) - 1, abs=1e-12)

    def test_kl_infinite_on_singular_part(self):
        assert divergence(KL(1.0), [1.0], [0.0]) == np.inf

    def test_berg_recession_slope_is_rho(self):
        # mass where nu vanishes is priced at rho per unit
        base = divergence(Berg(2.5), [1.0, 0.0], [1.0, 0.0])
        with_mass = divergence(Berg(2.5), [1.0, 3.0], [1.0, 0.0])
        assert with_mass - base == pytest.approx(2.5 * 3.0)

    def test_berg_infinite_when_mu_vanishes(self):
        assert divergence(Berg(1.0), [0.0], [1.0]) == np.inf

    def test_balanced_indicator(self):
        w = np.array([0.5, 0.5])
        assert divergence(Balanced(), w, w) == 0.0
        assert divergence(Balanced(), w + 1e-6, w) == np.inf
        assert divergence(Balanced(), w + 1e-12, w) == 0.0

    def test_nonnegative_zero_iff_equal(self, rng):
        for spec in (KL(0.7), Berg(1.3)):
            for _ in range(20):
                mu = rng.uniform(0.05, 1, 5)
                nu = rng.uniform(0.05, 1, 5)
                val = divergence(spec, mu, nu)
                assert val >= 0
                if not np.allclose(mu, nu):
                    assert val > 0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            divergence(KL(1.0), [1.0], [1.0, 2.0])

    def test_negative_weight(self):
        with pytest.raises(ValueError):
            divergence(KL(1.0), [-1.0], [1.0])


class TestConjugates:
    def test_kl_at_zero(self):
        assert conj(KL(1.0), 0.0) == 0.0
        assert conj_grad(KL(1.0), 0.0) == 1.0

    def test_balanced_identity(self):
        assert conj(Balanced(), 7.0) == 7.0
        assert conj_grad(Balanced(), 7.0) == 1.0

    def test_berg_values(self):
        assert conj(Berg(2.0), 1.0) == pytest.approx(2 * math.log(2), abs=1e-12)
        assert conj_grad(Berg(2.0), 1.0) == pytest.approx(2.0)

    def test_berg_domain(self):
        with pytest.raises(ValueError):
            conj(Berg(1.0), 1.0)
        with pytest.raises(ValueError):
            conj_grad(Berg(1.0), 2.0)

    def test_grad_matches_finite_differences(self, rng):
        h = 1e-6
        for spec, points in (
            (KL(0.8), rng.normal(0, 1, 20)),
            (Berg(1.5), rng.uniform(-3, 1.4, 20)),
            (Balanced(), rng.normal(0, 1, 20)),
        ):
            for x in points:
                fd = (conj(spec, x + h) - conj(spec, x - h)) / (2 * h)
                grad = conj_grad(spec, x)
                assert grad == pytest.approx(fd, rel=1e-6, abs=1e-9)

    def test_hess_matches_grad_differences(self, rng):
        h = 1e-6
        for spec in (KL(0.8), Berg(1.5)):
            for x in rng.uniform(-2, 0.5, 10):
                fd = (conj_grad(spec, x + h) - conj_grad(spec, x - h)) / (2 * h)
                assert conj_hess(spec, x) == pytest.approx(fd, rel=1e-5)


class TestSoftmin:
    def test_single_atom(self):
        a = DiscreteMeasure([0.0], [1.0])
        assert softmin(a, 0.37, np.array([3.5])) == pytest.approx(3.5)

    def test_two_equal_weights(self):
        a = DiscreteMeasure([0.0, 1.0], [1.0, 1.0])
        assert softmin(a, 1.0, np.zeros(2)) == pytest.approx(-math.log(2))

    def test_shift_equivariance(self, rng):
        a = DiscreteMeasure(np.sort(rng.uniform(0, 1, 5)), rng.uniform(0.1, 1, 5))
        f = rng.normal(0, 1, 5)
        base = softmin(a, 0.5, f)
        assert softmin(a, 0.5, f + 2.0) == pytest.approx(base + 2.0, abs=1e-12)

    def test_converges_to_min_as_eps_vanishes(self, rng):
        # For probability weights the softmin sits above the plain minimum
        # (by at most eps log(1/w_argmin)) and decreases to it as eps drops.
        w = rng.uniform(0.1, 1, 6)
        a = DiscreteMeasure(np.sort(rng.uniform(0, 1, 6)), w / w.sum())
        f = rng.normal(0, 1, 6)
        gaps = [softmin(a, eps, f) - f.min() for eps in (1e-1, 1e-2, 1e-3)]
        assert all(g >= -1e-12 for g in gaps)
        assert gaps[0] >= gaps[1] >= gaps[2]
        assert gaps[2] < 1e-2

    def test_lower_bound_with_mass(self, rng):
        # Smin >= min f - eps log m(a) for any total mass
        for _ in range(10):
            a = DiscreteMeasure(np.sort(rng.uniform(0, 1, 5)), rng.uniform(0.1, 2, 5))
            f = rng.normal(0, 1, 5)
            for eps in (0.05, 0.5):
                bound = f.min() - eps * np.log(a.mass)
                assert softmin(a, eps, f) >= bound - 1e-12

    def test_sup_norm_nonexpansive(self, rng):
        a = DiscreteMeasure(np.sort(rng.uniform(0, 1, 8)), rng.uniform(0.1, 1, 8))
        for _ in range(25):
            u = rng.normal(0, 2, 8)
            v = rng.normal(0, 2, 8)
            lhs = abs(softmin(a, 0.3, u) - softmin(a, 0.3, v))
            assert lhs <= np.abs(u - v).max() + 1e-12

    def test_zero_weight_entries_ignored(self):
        a = DiscreteMeasure([0.0, 1.0], [1.0, 0.0])
        # the huge potential sits on a zero-weight atom and must not matter
        assert softmin(a, 1.0, np.array([2.0, -1e6])) == pytest.approx(2.0)


class TestAprox:
    def test_kl_linear_scaling(self):
        assert aprox(KL(2.0), 1.0, 3.0) == pytest.approx(2.0)

    def test_balanced_identity(self):
        assert aprox(Balanced(), 1.0, -4.0) == -4.0

    def test_kl_lipschitz_factor(self, rng):
        spec, eps = KL(0.6), 0.9
        factor = 1.0 / (1.0 + eps / spec.rho)
        x, y = rng.normal(0, 3, 2)
        assert abs(aprox(spec, eps, x) - aprox(spec, eps, y)) == pytest.approx(
            factor * abs(x - y)
        )

    def test_berg_against_grid_oracle(self, rng):
        # independent oracle: brute grid minimization of the defining objective
        spec, eps = Berg(1.0), 1.0
        for x in (0.5, -0.3, 0.9, -2.0):
            ys = np.arange(x - 4.0, spec.rho - 1e-9, 1e-6)
            obj = eps * np.exp((x - ys) / eps) + (-spec.rho * np.log1p(-ys / spec.rho))
            best = ys[np.argmin(obj)]
            assert aprox(spec, eps, x) == pytest.approx(best, abs=5e-6)

    def test_berg_stationarity_residual(self, rng):
        spec, eps = Berg(0.7), 0.4
        xs = rng.uniform(-1.5, 1.0, 50)
        ys = aprox(spec, eps, xs)
        res = ys + eps * np.log(spec.rho / (spec.rho - ys)) - xs
        assert np.abs(res).max() < 1e-12

    def test_berg_steep_inputs_match_brentq(self):
        # far above rho the stationarity curve is steep; compare against an
        # independent bracketing root finder
        from scipy.optimize import brentq

        spec, eps = Berg(0.7), 0.4
        for x in (3.0, 5.24, 8.0):
            got = aprox(spec, eps, x)
            ref = brentq(
                lambda y: y + eps * np.log(spec.rho / (spec.rho - y)) - x,
                -100.0,
                np.nextafter(spec.rho, 0.0),
                xtol=5e-16,
            )
            assert got == pytest.approx(ref, abs=1e-12)

    def test_vector_input(self):
        out = aprox(KL(1.0), 1.0, np.array([2.0, -2.0]))
        np.testing.assert_allclose(out, [1.0, -1.0])


class TestLogdotexp:
    def test_matches_direct_sum(self, rng):
        v = rng.normal(0, 1, 7)
        w = rng.uniform(0.1, 1, 7)
        assert logdotexp(v, w) == pytest.approx(math.log(np.dot(w, np.exp(v))))

    def test_stable_under_large_values(self):
        assert logdotexp(np.array([1000.0, 1000.0]), np.array([1.0, 1.0])) == pytest.approx(
            1000.0 + math.log(2)
        )

    def test_zero_weights_masked(self):
        assert logdotexp(np.array([1e9, 0.0]), np.array([0.0, 2.0])) == pytest.approx(
            math.log(2.0)
        )

    def test_axis_reduction(self, rng):
        v = rng.normal(0, 1, (4, 3))
        w = rng.uniform(0.1, 1, 4)
        out = logdotexp(v, w, axis=0)
        expected = [math.log(np.dot(w, np.exp(v[:, j]))) for j in range(3)]
        np.testing.assert_allclose(out, expected)
