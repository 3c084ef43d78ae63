import numpy as np
import pytest

from actloss import (
    EnsembleFormatError,
    EnsembleValidationError,
    MeasurementEnsemble,
    RngSpec,
    generate,
    load,
    mean_energy_check,
    save,
)


class TestGenerate:
    def test_deterministic_bit_for_bit(self):
        e1 = generate(2, 3, seed=7, x_mode="given", x=np.array([1.0, 0.0]))
        e2 = generate(2, 3, seed=7, x_mode="given", x=np.array([1.0, 0.0]))
        assert np.array_equal(e1.A, e2.A)
        assert np.array_equal(e1.x, e2.x)
        assert np.array_equal(e1.y, e2.y)
        assert e1.y1_over_m == e2.y1_over_m

    def test_measurements_nonnegative(self):
        ens = generate(16, 200, seed=3)
        assert np.min(ens.y) >= 0.0

    def test_y_matches_squared_projections(self):
        ens = generate(5, 20, seed=9)
        assert np.array_equal(ens.y, (ens.A @ ens.x) ** 2)

    def test_mean_energy_concentrates_at_desk_scale(self):
        # ||x||^2 = 128 for the all-ones truth; the mean measurement stays
        # within a factor of two of it.
        ens = generate(128, 768, seed=42, x_mode="ones")
        assert 64.0 <= ens.y1_over_m <= 256.0

    def test_x_modes(self):
        ones = generate(6, 12, seed=0, x_mode="ones")
        assert np.array_equal(ones.x, np.ones(6))
        given = generate(3, 9, seed=0, x_mode="given", x=np.array([2.0, 0.0, 1.0]))
        assert np.array_equal(given.x, [2.0, 0.0, 1.0])

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            generate(0, 4, seed=1)
        with pytest.raises(ValueError):
            generate(4, 0, seed=1)
        with pytest.raises(ValueError):
            generate(3, 6, seed=1, x_mode="given", x=np.zeros(3))
        with pytest.raises(ValueError):
            generate(3, 6, seed=1, x_mode="nope")
        with pytest.raises(ValueError):
            generate(3, 6, seed=1, x_mode="given", x=np.ones(4))

    def test_scaling_x_scales_y_exactly(self):
        base = generate(7, 30, seed=5)
        scaled = MeasurementEnsemble(
            n=7, m=30, A=base.A, x=2.0 * base.x, y=(base.A @ (2.0 * base.x)) ** 2
        )
        assert np.array_equal(scaled.y, 4.0 * base.y)

    def test_sample_mean_energy_statistics(self):
        # E[(a^T x)^2] = ||x||^2: the m = 1e5 sample mean lands in 1 +- 0.05.
        ens = generate(4, 100_000, seed=21)
        ratio = ens.y1_over_m / float(ens.x @ ens.x)
        assert 0.95 <= ratio <= 1.05

    def test_arrays_immutable(self):
        ens = generate(3, 5, seed=2)
        with pytest.raises(ValueError):
            ens.A[0, 0] = 1.0
        with pytest.raises(ValueError):
            ens.y[0] = 1.0


class TestRngSpec:
    def test_same_stream_reproduces(self):
        a = RngSpec(9, 4).generator().standard_normal(10)
        b = RngSpec(9, 4).generator().standard_normal(10)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RngSpec(9, 4).generator().standard_normal(10)
        b = RngSpec(9, 5).generator().standard_normal(10)
        assert not np.array_equal(a, b)


class TestMeanEnergyCheck:
    def test_aligned_single_row_gives_ratio_one(self):
        x = np.array([3.0, 4.0])
        a = x / np.linalg.norm(x)  # (a^T x)^2 = ||x||^2
        ens = MeasurementEnsemble(n=2, m=1, A=a[None, :], x=x, y=(a @ x) ** 2 * np.ones(1))
        out = mean_energy_check(ens)
        assert out["ratio"] == pytest.approx(1.0, rel=1e-12)
        assert out["in_bounds"]

    def test_seed_sweep_in_bounds(self):
        results = [
            mean_energy_check(generate(128, 768, seed=s, x_mode="ones"))["in_bounds"]
            for s in range(100)
        ]
        assert all(results)

    def test_ratio_scale_invariant(self):
        base = generate(6, 40, seed=8)
        scaled = MeasurementEnsemble(
            n=6, m=40, A=base.A, x=2.0 * base.x, y=4.0 * base.y
        )
        assert mean_energy_check(scaled)["ratio"] == mean_energy_check(base)["ratio"]


class TestPersistence:
    @pytest.mark.parametrize("text", [False, True])
    def test_round_trip(self, tmp_path, text):
        ens = generate(6, 14, seed=77, stream_id=3)
        path = tmp_path / "e.bin"
        save(ens, path, text=text)
        back = load(path)
        assert back.n == ens.n and back.m == ens.m
        assert back.seed == ens.seed and back.stream_id == ens.stream_id
        assert np.array_equal(back.A, ens.A)
        assert np.array_equal(back.x, ens.x)
        assert np.array_equal(back.y, ens.y)
        assert back.y1_over_m == ens.y1_over_m

    def test_truncated_file_is_a_parse_error(self, tmp_path):
        ens = generate(4, 10, seed=1)
        path = tmp_path / "e.bin"
        save(ens, path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(EnsembleFormatError) as err:
            load(path)
        assert err.value.offset >= 0

    def test_garbage_file_is_a_parse_error(self, tmp_path):
        path = tmp_path / "e.bin"
        path.write_bytes(b"not an ensemble at all")
        with pytest.raises(EnsembleFormatError) as err:
            load(path)
        assert err.value.offset == 0

    def test_inconsistent_y_is_a_validation_error(self, tmp_path):
        ens = generate(4, 10, seed=1)
        path = tmp_path / "e.bin"
        save(ens, path)
        blob = bytearray(path.read_bytes())
        # y starts after header + A + x; bump y[0] by ~1e-6 relative.
        off = 40 + 8 * (ens.m * ens.n + ens.n)
        y0 = np.frombuffer(bytes(blob[off : off + 8]), "<f8")[0]
        blob[off : off + 8] = np.float64(y0 * (1.0 + 1e-6)).tobytes()
        path.write_bytes(bytes(blob))
        with pytest.raises(EnsembleValidationError):
            load(path)

    def test_text_header_corruption(self, tmp_path):
        ens = generate(3, 5, seed=1)
        path = tmp_path / "e.txt"
        save(ens, path, text=True)
        lines = path.read_text().splitlines()
        lines[1] = "n oops"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(EnsembleFormatError):
            load(path)
