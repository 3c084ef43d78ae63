import numpy as np
import pytest

from actloss import (
    classify,
    generate,
    gradient,
    hessian,
    min_eigenpair,
    min_eigenvalue,
    moment_identity_check,
    sample_point,
    sample_region,
    value,
    verify_point,
)
from actloss.landscape import _label_from_measurements


class TestClassify:
    def test_truth_is_r1(self, rng):
        x = rng.standard_normal(6)
        assert classify(x, x).label == "R1"

    def test_scaled_truth_is_r2c(self, rng):
        x = rng.standard_normal(6)
        lab = classify(1.5 * x, x)
        assert lab.label == "R2c"
        assert lab.t == pytest.approx(2.25, rel=1e-12)
        assert lab.d == pytest.approx(0.5, rel=1e-12)

    def test_small_orthogonal_is_r3(self):
        x = np.array([1.0, 0.0])
        z = np.array([0.0, np.sqrt(0.1)])
        assert classify(z, x, delta=0.01).label == "R3"

    def test_orthogonal_third_energy_is_saddle_slab(self):
        x = np.array([1.0, 0.0, 0.0])
        z = np.array([0.0, np.sqrt(1.0 / 3.0), 0.0])
        lab = classify(z, x, delta=0.01)
        assert lab.label == "R2aSub"
        assert lab.in_r2a
        assert lab.c == 0.0

    def test_origin_is_undefined(self):
        assert classify(np.zeros(4), np.ones(4)).label == "Undefined"

    def test_delta_validation(self, rng):
        x = rng.standard_normal(4)
        with pytest.raises(ValueError):
            classify(x, x, delta=0.02)
        with pytest.raises(ValueError):
            classify(x, x, delta=0.0)

    def test_zero_x_rejected(self):
        with pytest.raises(ValueError):
            classify(np.ones(3), np.zeros(3))


class TestBoundarySemantics:
    """The closed/open interval markings of the region definitions."""

    def test_t_band_edges(self):
        delta = 0.01
        d_far = 1.0  # far from both signs of x
        assert _label_from_measurements(1.0 / 3.0 - delta, d_far, 0.5, delta) == "R3"
        just_above = np.nextafter(1.0 / 3.0 - delta, 1.0)
        assert _label_from_measurements(just_above, d_far, 0.5, delta) == "R2a"
        assert _label_from_measurements(0.99, d_far, 0.5, delta) == "R2b"
        assert _label_from_measurements(np.nextafter(0.99, 0.0), d_far, 0.5, delta) == "R2a"
        assert _label_from_measurements(1.01, d_far, 0.5, delta) == "R2b"
        assert _label_from_measurements(np.nextafter(1.01, 2.0), d_far, 0.5, delta) == "R2c"

    def test_r1_takes_precedence_on_its_boundary(self):
        delta = 0.01
        assert _label_from_measurements(1.0, 0.2, 1.0, delta) == "R1"
        assert _label_from_measurements(1.0, np.nextafter(0.2, 1.0), 1.0, delta) == "R2b"

    def test_saddle_slab_edges(self):
        delta = 0.01
        third = 1.0 / 3.0
        assert _label_from_measurements(third, 1.0, delta, delta) == "R2a"  # c == delta excluded
        assert (
            _label_from_measurements(third, 1.0, np.nextafter(delta, 0.0), delta)
            == "R2aSub"
        )
        assert _label_from_measurements(third + delta, 1.0, 0.0, delta) == "R2a"

    def test_partition_exhaustive_and_exclusive(self):
        rng = np.random.default_rng(99)
        labels = {"R1", "R2a", "R2aSub", "R2b", "R2c", "R3"}
        for _ in range(10_000):
            n = int(rng.integers(1, 8))
            x = rng.standard_normal(n)
            while np.linalg.norm(x) == 0.0:
                x = rng.standard_normal(n)
            z = rng.standard_normal(n) * rng.uniform(0.0, 2.0)
            delta = rng.uniform(1e-4, 0.01)
            lab = classify(z, x, delta)
            if np.linalg.norm(z) == 0.0:
                assert lab.label == "Undefined"
            else:
                assert lab.label in labels


class TestMinEigenvalue:
    def test_identity(self):
        assert min_eigenvalue(np.eye(3)) == pytest.approx(1.0, rel=1e-14)

    def test_diagonal(self):
        assert min_eigenvalue(np.diag([3.0, -2.0, 5.0])) == pytest.approx(-2.0, rel=1e-14)

    def test_two_by_two_closed_form(self, rng):
        for _ in range(20):
            a, b, c = rng.standard_normal(3)
            H = np.array([[a, b], [b, c]])
            root = 0.5 * (a + c) - 0.5 * np.sqrt((a - c) ** 2 + 4 * b * b)
            assert min_eigenvalue(H) == pytest.approx(root, abs=1e-12)

    def test_eigenpair_residual(self, rng):
        M = rng.standard_normal((40, 40))
        H = M + M.T
        lam, v = min_eigenpair(H)
        assert np.linalg.norm(H @ v - lam * v) <= 1e-8 * np.linalg.norm(H, 2)

    def test_rejects_asymmetric(self, rng):
        H = rng.standard_normal((4, 4))
        with pytest.raises(ValueError):
            min_eigenvalue(H)

    def test_spectral_reconstruction(self, rng):
        M = rng.standard_normal((128, 128))
        H = M + M.T
        w, V = np.linalg.eigh(H)
        rebuilt = (V * w) @ V.T
        rel = np.linalg.norm(rebuilt - H) / np.linalg.norm(H)
        assert rel <= 1e-10


class TestSamplePoint:
    @pytest.mark.parametrize("region", ["R1", "R2a", "R2aSub", "R2b", "R2c", "R3"])
    def test_membership(self, region, rng):
        x = rng.standard_normal(24)
        for _ in range(10):
            z = sample_point(region, x, 0.01, rng)
            got = classify(z, x, 0.01).label
            if region == "R2a":
                assert got in ("R2a", "R2aSub")
            else:
                assert got == region

    def test_r2c_ball_clip(self, rng):
        x = rng.standard_normal(16)
        for _ in range(20):
            z = sample_point("R2c", x, 0.01, rng)
            assert np.linalg.norm(z) <= 2.0 * np.linalg.norm(x) * (1 + 1e-12)

    def test_unknown_region(self, rng):
        with pytest.raises(ValueError):
            sample_point("R9", rng.standard_normal(4), 0.01, rng)


class TestVerifyPoint:
    def test_r1_certificate_small_scale(self, h1_profile):
        ens = generate(32, 192, seed=3, x_mode="ones")
        rng = np.random.default_rng(1)
        rep = verify_point(ens, h1_profile, sample_point("R1", ens.x, 0.01, rng))
        assert rep.region == "R1"
        (chk,) = rep.checks
        assert chk.name == "min_curvature"
        assert chk.bound == pytest.approx(32.0 / 25.0)
        assert chk.satisfied

    def test_plain_r2a_has_no_pointwise_bound(self, h1_profile):
        ens = generate(16, 128, seed=3)
        rng = np.random.default_rng(4)
        z = sample_point("R2a", ens.x, 0.01, rng)
        while classify(z, ens.x, 0.01).label != "R2a":
            z = sample_point("R2a", ens.x, 0.01, rng)
        rep = verify_point(ens, h1_profile, z)
        assert rep.checks == []
        assert rep.satisfied is None

    def test_undefined_rejected(self, h1_profile):
        ens = generate(8, 64, seed=3)
        with pytest.raises(ValueError):
            verify_point(ens, h1_profile, np.zeros(8))


class TestSampleRegion:
    def test_r3_certificates_small_scale(self, h1_profile):
        ens = generate(32, 192, seed=5, x_mode="ones")
        reports, summary = sample_region(ens, h1_profile, "R3", 25, sampler_seed=2)
        assert summary["count"] == 25
        assert summary["pass_fraction"] >= 0.8
        assert all(r.region == "R3" for r in reports)

    def test_deterministic_and_order_independent(self, h1_profile):
        ens = generate(16, 96, seed=5)
        _, s1 = sample_region(ens, h1_profile, "R2c", 8, sampler_seed=9)
        _, s2 = sample_region(ens, h1_profile, "R2c", 8, sampler_seed=9)
        assert s1 == s2

    def test_count_validation(self, h1_profile):
        ens = generate(8, 64, seed=5)
        with pytest.raises(ValueError):
            sample_region(ens, h1_profile, "R1", 0)


class TestMomentIdentity:
    def test_aligned_unit_vectors_analytic_value(self):
        u = np.array([1.0, 0.0])
        out = moment_identity_check(u, u, samples=1000, seed=1)
        assert out["analytic"] == 3.0  # fourth Gaussian moment

    def test_orthogonal_unit_vectors_analytic_value(self):
        out = moment_identity_check(
            np.array([1.0, 0.0]), np.array([0.0, 1.0]), samples=1000, seed=1
        )
        assert out["analytic"] == 1.0

    def test_monte_carlo_agreement(self, rng):
        u = rng.standard_normal(6)
        v = rng.standard_normal(6)
        out = moment_identity_check(u, v, samples=200_000, seed=3)
        assert out["rel_err"] <= 0.05

    def test_validation(self):
        with pytest.raises(ValueError):
            moment_identity_check(np.zeros(3), np.ones(3), samples=10)


class TestCurvatureConsistency:
    def test_directional_curvature_matches_second_difference(self, h1_profile):
        # x^T H x from the assembled Hessian vs the one-dimensional second
        # difference of t -> f(z + t x).
        ens = generate(8, 64, seed=29)
        rng = np.random.default_rng(8)
        step = 1e-4
        for region in ("R1", "R2b", "R2c"):
            z = sample_point(region, ens.x, 0.01, rng)
            H = hessian(ens, h1_profile, z).hess
            quad = float(ens.x @ (H @ ens.x))
            f = lambda t: value(ens, h1_profile, z + t * ens.x)
            fd = (f(step) - 2.0 * f(0.0) + f(-step)) / step**2
            assert fd == pytest.approx(quad, rel=1e-3)


class TestCriticalPointLocator:
    def test_no_critical_points_in_r2a_outside_slab(self, h1_profile):
        # Statistical check: the gradient never vanishes on R2a away from
        # the saddle slab.
        ens = generate(64, 1280, seed=13, x_mode="ones")
        rng = np.random.default_rng(31)
        norms = []
        for _ in range(1000):
            z = sample_point("R2a", ens.x, 0.01, rng)
            if classify(z, ens.x, 0.01).label != "R2a":
                continue
            norms.append(np.linalg.norm(gradient(ens, h1_profile, z).grad))
        assert len(norms) > 900
        assert min(norms) > 0.0
