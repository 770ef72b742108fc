import json

import numpy as np
import pytest

from uotkit import assemble_certificate, double_star_norm, hilbert_norm, scalar_max_oracle
from uotkit.certify import double_star_norm_grid, grid_max_scalar, hilbert_norm_grid


class TestHilbertNorm:
    def test_closed_form(self):
        assert hilbert_norm([1.0, 3.0, 5.0]) == 2.0

    def test_constant_vector(self):
        assert hilbert_norm(np.full(4, 3.3)) == 0.0

    def test_shift_invariance_exact(self, rng):
        f = rng.normal(0, 2, 9)
        assert hilbert_norm(f + 17.5) == hilbert_norm(f)

    def test_bounded_by_sup_norm(self, rng):
        f = rng.normal(0, 2, 9)
        assert hilbert_norm(f) <= np.abs(f).max()

    def test_matches_grid_oracle(self, rng):
        for _ in range(20):
            f = rng.normal(0, 3, 7)
            assert hilbert_norm(f) == pytest.approx(hilbert_norm_grid(f), abs=1e-5)


class TestDoubleStarNorm:
    def test_closed_form(self):
        assert double_star_norm([0.0, 1.0], [0.0, 2.0]) == 3.0

    def test_negated_pair_doubles_hilbert(self, rng):
        f = rng.normal(0, 2, 6)
        assert double_star_norm(f, -f) == pytest.approx(2 * hilbert_norm(f))

    def test_opposite_shift_invariance_exact(self, rng):
        f = rng.normal(0, 2, 5)
        g = rng.normal(0, 2, 7)
        lam = 4.2
        assert double_star_norm(f + lam, g - lam) == double_star_norm(f, g)

    def test_bounded_by_sum_of_sup_norms(self, rng):
        f = rng.normal(0, 2, 5)
        g = rng.normal(0, 2, 7)
        assert double_star_norm(f, g) <= np.abs(f).max() + np.abs(g).max()

    def test_matches_grid_oracle(self, rng):
        for _ in range(20):
            f = rng.normal(0, 3, 5)
            g = rng.normal(0, 3, 6)
            assert double_star_norm(f, g) == pytest.approx(
                double_star_norm_grid(f, g), abs=1e-5
            )


class TestScalarMaxOracle:
    def test_quadratic(self):
        x, val = scalar_max_oracle(lambda t: -((t - 0.3) ** 2), (-1.0, 1.0), tol=1e-12)
        assert x == pytest.approx(0.3, abs=1e-9)
        assert val == pytest.approx(0.0, abs=1e-15)

    def test_linear_decreasing_hits_left_endpoint(self):
        x, _ = scalar_max_oracle(lambda t: -t, (-2.0, 5.0), tol=1e-10)
        assert x == pytest.approx(-2.0, abs=1e-9)

    def test_valley_rejected(self):
        with pytest.raises(ValueError):
            scalar_max_oracle(lambda t: t**2, (-1.0, 1.0))

    def test_grid_max_scalar_refines(self):
        x, val = grid_max_scalar(lambda t: -((t - 0.123456) ** 2), -1.0, 1.0)
        assert x == pytest.approx(0.123456, abs=2e-6)


class TestCertificate:
    def test_pass(self):
        cert = assemble_certificate(1.0, 1.0, 0.0, 1e-6)
        assert cert.passed and cert.gap == 0.0

    def test_gap_beyond_tol_fails(self):
        assert not assemble_certificate(1.0 + 1e-3, 1.0, 0.0, 1e-6).passed

    def test_feasibility_violation_fails(self):
        assert not assemble_certificate(1.0, 1.0, 1e-3, 1e-6).passed

    def test_weak_duality_breach_flagged(self):
        cert = assemble_certificate(1.0, 1.0 + 1e-3, 0.0, 1e-6)
        assert cert.weak_duality_breach and not cert.passed

    def test_tiny_negative_gap_tolerated(self):
        cert = assemble_certificate(1.0, 1.0 + 1e-10, 0.0, 1e-6)
        assert cert.passed and not cert.weak_duality_breach

    def test_json_fields(self):
        payload = json.loads(assemble_certificate(2.0, 1.0, 0.0, 1e-6).to_json())
        assert sorted(payload) == [
            "dual",
            "feasibility_violation",
            "gap",
            "passed",
            "primal",
        ]

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            assemble_certificate(np.inf, 0.0, 0.0, 1e-6)
