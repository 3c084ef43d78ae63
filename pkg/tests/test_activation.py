import numpy as np
import pytest

from actloss import ActivationProfile, evaluate, junction_report, profile_from_spec, sup_norms


class TestH1:
    def test_plateau(self, h1_profile):
        assert evaluate(h1_profile, 5.0) == (1.0, 0.0, 0.0)
        assert evaluate(h1_profile, 10.0) == (1.0, 0.0, 0.0)

    def test_cutoff(self, h1_profile):
        assert evaluate(h1_profile, 25.0) == (0.0, 0.0, 0.0)
        assert evaluate(h1_profile, 20.0) == (0.0, 0.0, 0.0)

    def test_midpoint_value(self, h1_profile):
        # Hand evaluation of the ramp at t = 1/2:
        # -6/32 + 15/16 - 10/8 + 1 = 0.5 exactly.
        h, dh, d2h = evaluate(h1_profile, 15.0)
        assert h == 0.5
        assert dh == pytest.approx(-1.875 / 10.0, abs=1e-15)
        assert d2h == pytest.approx(0.0, abs=1e-15)

    def test_sup_norms_closed_forms(self, h1_profile):
        dsup, d2sup = sup_norms(h1_profile)
        assert dsup == 0.1875
        assert d2sup == pytest.approx((10.0 / np.sqrt(3.0)) / 100.0, rel=1e-12)

    def test_d2sup_matches_grid_maximum(self, h1_profile):
        u = np.linspace(10.0, 20.0, 1_000_001)
        _, _, d2h = evaluate(h1_profile, u)
        assert np.max(np.abs(d2h)) == pytest.approx(h1_profile.d2sup, rel=1e-6)


class TestH2:
    def test_linear_midpoint(self, h2_profile):
        h, dh, d2h = evaluate(h2_profile, 15.0)
        assert h == 0.5
        assert dh == -0.1  # -1/(gamma-beta)
        assert d2h == 0.0

    def test_shoulder_matches_linear_piece_at_junction(self, h2_profile):
        # Quintic shoulder at t = 0.1: -30000e-5 + 8000e-4 - 600e-3 + 1 = 0.9,
        # agreeing with the linear piece 1 - 0.1.
        h, dh, _ = evaluate(h2_profile, 11.0)
        assert h == pytest.approx(0.9, abs=1e-12)
        assert dh == pytest.approx(-0.1, abs=1e-12)
        just_below = evaluate(h2_profile, np.nextafter(11.0, 0.0))
        assert just_below[0] == pytest.approx(0.9, abs=1e-9)

    def test_dsup_at_least_inverse_width(self, h2_profile):
        dsup, _ = sup_norms(h2_profile)
        assert dsup >= 1.0 / 10.0
        assert dsup == pytest.approx(1.512 / 10.0, rel=1e-12)

    def test_sup_norms_bound_dense_grid(self, h2_profile):
        u = np.linspace(0.0, 25.0, 100_000)
        _, dh, d2h = evaluate(h2_profile, u)
        assert np.max(np.abs(dh)) <= h2_profile.dsup * (1.0 + 1e-6)
        assert np.max(np.abs(d2h)) <= h2_profile.d2sup * (1.0 + 1e-6)


class TestJunctions:
    def test_h1_jumps_vanish(self, h1_profile):
        for _, hj, dj, d2j in junction_report(h1_profile):
            assert abs(hj) <= 1e-12
            assert abs(dj) <= 1e-12
            assert abs(d2j) <= 1e-12

    def test_h2_jumps_vanish(self, h2_profile):
        for _, hj, dj, d2j in junction_report(h2_profile):
            assert abs(hj) <= 1e-10
            assert abs(dj) <= 1e-10
            assert abs(d2j) <= 1e-10

    def test_h2_interior_junction_slope(self, h2_profile):
        # At u = beta + 0.1 (gamma - beta) the one-sided slopes agree at
        # -1/(gamma-beta) = -0.1.
        locs = junction_report(h2_profile)
        assert locs[1][0] == 11.0
        left = evaluate(h2_profile, np.nextafter(11.0, 10.0))[1]
        right = evaluate(h2_profile, 11.0)[1]
        assert left == pytest.approx(-0.1, abs=1e-9)
        assert right == -0.1

    def test_plateau_edge_value(self, h1_profile):
        assert evaluate(h1_profile, 10.0)[0] == 1.0
        assert evaluate(h1_profile, np.nextafter(10.0, 11.0))[0] == pytest.approx(1.0, abs=1e-12)


class TestProperties:
    @pytest.mark.parametrize("kind", ["h1", "h2"])
    def test_finite_difference_consistency(self, kind, rng):
        prof = ActivationProfile(kind, 10.0, 20.0)
        junctions = np.array([loc for loc, *_ in junction_report(prof)])
        eps = 1e-6
        u = rng.uniform(eps, prof.gamma + 5.0, size=1000)
        # One-sided pieces only: skip the immediate junction neighborhoods.
        u = u[np.min(np.abs(u[:, None] - junctions[None, :]), axis=1) > 1e-4]
        h_p, dh_p, _ = evaluate(prof, u + eps)
        h_m, dh_m, _ = evaluate(prof, u - eps)
        _, dh, d2h = evaluate(prof, u)
        assert np.max(np.abs((h_p - h_m) / (2 * eps) - dh)) <= 1e-6
        assert np.max(np.abs((dh_p - dh_m) / (2 * eps) - d2h)) <= 1e-5

    @pytest.mark.parametrize("kind", ["h1", "h2"])
    def test_range_and_monotone_envelope(self, kind, rng):
        prof = ActivationProfile(kind, 10.0, 20.0)
        u = rng.uniform(0.0, 30.0, size=5000)
        h = evaluate(prof, u)[0]
        assert np.all(h >= 0.0) and np.all(h <= 1.0)
        below = rng.uniform(0.0, prof.beta, size=100)
        above = rng.uniform(prof.gamma, prof.gamma + 10, size=100)
        assert np.all(evaluate(prof, below)[0] >= evaluate(prof, above)[0])

    def test_negative_argument_rejected(self, h1_profile):
        with pytest.raises(ValueError):
            evaluate(h1_profile, -0.5)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            ActivationProfile("h1", 0.5, 2.0)  # beta must exceed 1
        with pytest.raises(ValueError):
            ActivationProfile("h1", 10.0, 10.0)
        with pytest.raises(ValueError):
            ActivationProfile("h3", 10.0, 20.0)


class TestSpecStrings:
    def test_parse_full_spec(self):
        prof = profile_from_spec("h1:beta=10,gamma=20")
        assert (prof.kind, prof.beta, prof.gamma) == ("h1", 10.0, 20.0)

    def test_parse_with_default_ratio(self):
        prof = profile_from_spec("h2:beta=5", default_gamma_ratio=1.5)
        assert (prof.kind, prof.beta, prof.gamma) == ("h2", 5.0, 7.5)

    def test_round_trip(self):
        prof = profile_from_spec("h2:beta=5,gamma=7.5")
        again = profile_from_spec(prof.spec_string())
        assert again == prof

    @pytest.mark.parametrize(
        "bad", ["h3:beta=10,gamma=20", "h1:beta=ten", "h1:gamma=20", "h1:beta=10;gamma=20"]
    )
    def test_bad_specs_rejected(self, bad):
        with pytest.raises(ValueError):
            profile_from_spec(bad)
