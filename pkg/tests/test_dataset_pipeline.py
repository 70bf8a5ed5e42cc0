"""Tests for packing, dataset generation, normalization, and storage."""

import numpy as np
import pytest

from faslab.config import ExperimentConfig, dataset_fingerprint, desk_profile
from faslab.dataset_pipeline import (
    Dataset,
    Normalizer,
    apply_normalizer,
    fit_normalizer,
    generate_dataset,
    invert_normalizer,
    load_dataset,
    pack_complex,
    save_dataset,
    split,
    unpack_complex,
)
from faslab.errors import ChecksumError, FileFormatError


def micro_config(**overrides):
    cfg = ExperimentConfig(
        num_ports=16,
        num_antennas=2,
        num_slots=8,
        aperture_wavelengths=3.0,
        num_clusters=1,
        rays_per_cluster=3,
        snr_db_list=[0.0, 10.0],
        n_train_samples=50,
        hidden_width=8,
        batch_size=8,
        max_epochs=3,
    )
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


class TestPacking:
    def test_pack_layout(self):
        packed = pack_complex(np.array([1 + 2j, 3 - 1j]))
        assert packed.tolist() == [1.0, 3.0, 2.0, -1.0]

    def test_pack_real_vector_has_zero_tail(self):
        packed = pack_complex(np.array([1.5, -2.0]))
        assert packed.tolist() == [1.5, -2.0, 0.0, 0.0]

    def test_round_trip_exact(self):
        rng = np.random.default_rng(0)
        v = rng.standard_normal(17) + 1j * rng.standard_normal(17)
        assert np.array_equal(unpack_complex(pack_complex(v)), v)

    def test_unpack_examples(self):
        assert unpack_complex(np.array([0.0, 0.0, 1.0, 1.0])).tolist() == [1j, 1j]
        assert unpack_complex(np.array([1.0, 2.0, 0.0, 0.0])).tolist() == [1.0, 2.0]

    def test_unpack_odd_length_rejected(self):
        with pytest.raises(ValueError, match="even"):
            unpack_complex(np.array([1.0, 2.0, 3.0]))


class TestGenerateDataset:
    def test_noiseless_full_coverage_is_permutation_of_target(self):
        cfg = micro_config()
        ds = generate_dataset(cfg, 1, np.inf, 7)  # snr = +inf => sigma^2 = 0
        feat = unpack_complex(ds.features[0].astype(float))
        tgt = unpack_complex(ds.targets[0].astype(float))
        order = cfg.build_schedule().flat_indices()
        assert np.array_equal(feat, tgt[order])

    def test_reference_scale_widths(self):
        # Full-scale configuration: 5e4 rows, widths 2PM = 2N = 512.
        cfg = ExperimentConfig()
        ds = generate_dataset(cfg, cfg.n_train_samples, 0.0, cfg.seeds.channel)
        assert ds.features.shape == (50_000, 512)
        assert ds.targets.shape == (50_000, 512)
        assert ds.features.dtype == np.float32

    def test_deterministic_bytes(self):
        cfg = micro_config()
        a = generate_dataset(cfg, 20, 5.0, 99)
        b = generate_dataset(cfg, 20, 5.0, 99)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.targets, b.targets)
        assert a.config_fingerprint == b.config_fingerprint

    def test_rows_do_not_depend_on_total_count(self):
        # Counter-derived streams: sample i is the same whether 10 or 30 rows
        # are generated.
        cfg = micro_config()
        small = generate_dataset(cfg, 10, 0.0, 3)
        large = generate_dataset(cfg, 30, 0.0, 3)
        assert np.array_equal(small.features, large.features[:10])
        assert np.array_equal(small.targets, large.targets[:10])

    def test_mixed_snr_mode(self):
        cfg = micro_config()
        ds = generate_dataset(cfg, 40, [0.0, 20.0], 11)
        again = generate_dataset(cfg, 40, [0.0, 20.0], 11)
        assert np.array_equal(ds.features, again.features)
        assert ds.features.shape == (40, 2 * 16)
        assert ds.config_fingerprint == dataset_fingerprint(cfg, [0.0, 20.0])

    def test_fingerprint_distinguishes_snr(self):
        cfg = micro_config()
        assert dataset_fingerprint(cfg, 0.0) != dataset_fingerprint(cfg, 10.0)


class TestSplit:
    def make_dataset(self, n):
        rng = np.random.default_rng(0)
        return Dataset(
            rng.standard_normal((n, 4)).astype(np.float32),
            rng.standard_normal((n, 6)).astype(np.float32),
            bytes(32),
            3,
            1,
            2,
        )

    def test_validation_ratio(self):
        train, val = split(self.make_dataset(100), 0.05, np.random.default_rng(1))
        assert val.n_samples == 5
        assert train.n_samples == 95

    def test_disjoint_union(self):
        ds = self.make_dataset(60)
        train, val = split(ds, 0.25, np.random.default_rng(2))
        combined = np.vstack([train.features, val.features])
        original = {row.tobytes() for row in ds.features}
        recombined = {row.tobytes() for row in combined}
        assert original == recombined
        assert len(recombined) == 60

    def test_deterministic(self):
        ds = self.make_dataset(40)
        t1, v1 = split(ds, 0.2, np.random.default_rng(3))
        t2, v2 = split(ds, 0.2, np.random.default_rng(3))
        assert np.array_equal(t1.features, t2.features)
        assert np.array_equal(v1.features, v2.features)

    def test_degenerate_split_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            split(self.make_dataset(10), 0.01, np.random.default_rng(0))
        with pytest.raises(ValueError, match="rho"):
            split(self.make_dataset(10), 1.5, np.random.default_rng(0))


class TestNormalizer:
    def test_constant_column_maps_to_zero(self):
        m = np.column_stack([np.full(10, 3.0), np.arange(10.0)])
        nrm = fit_normalizer(m)
        assert nrm.mean[0] == 3.0
        assert nrm.std[0] == 0.0
        normalized = apply_normalizer(nrm, m)
        assert np.all(normalized[:, 0] == 0.0)

    def test_two_point_column(self):
        nrm = fit_normalizer(np.array([[-1.0], [1.0]]))
        assert nrm.mean[0] == 0.0
        assert nrm.std[0] == 1.0
        assert apply_normalizer(nrm, np.array([[-1.0], [1.0]])).ravel().tolist() == [-1.0, 1.0]

    def test_round_trip(self):
        rng = np.random.default_rng(5)
        m = rng.standard_normal((50, 8)) * 3 + 1
        nrm = fit_normalizer(m)
        back = invert_normalizer(nrm, apply_normalizer(nrm, m))
        assert np.max(np.abs(back - m)) < 1e-6 * np.max(np.abs(m))

    def test_normalized_train_is_standard(self):
        rng = np.random.default_rng(6)
        m = rng.standard_normal((200, 5)) * 7 - 2
        z = apply_normalizer(fit_normalizer(m), m)
        assert np.max(np.abs(z.mean(axis=0))) < 1e-6
        assert np.max(np.abs(z.std(axis=0) - 1)) < 1e-6

    def test_other_rows_use_train_statistics(self):
        # A constant shift of held-out rows must survive normalization.
        rng = np.random.default_rng(7)
        train = rng.standard_normal((100, 3))
        nrm = fit_normalizer(train)
        shifted = train + 10.0
        z = apply_normalizer(nrm, shifted)
        z_train = apply_normalizer(nrm, train)
        assert np.allclose(z - z_train, 10.0 / nrm.scale(), atol=1e-9)

    def test_too_few_rows_rejected(self):
        with pytest.raises(ValueError, match="2 rows"):
            fit_normalizer(np.ones((1, 4)))

    def test_width_mismatch_rejected(self):
        nrm = fit_normalizer(np.ones((3, 4)) * np.arange(4))
        with pytest.raises(ValueError, match="width"):
            apply_normalizer(nrm, np.ones((2, 5)))
        with pytest.raises(ValueError, match="width"):
            invert_normalizer(nrm, np.ones((2, 3)))

    def test_rejects_bad_fields(self):
        with pytest.raises(ValueError, match="std"):
            Normalizer(np.zeros(2), np.array([-0.1, 1.0]))


class TestStorage:
    def make_dataset(self):
        cfg = micro_config()
        return generate_dataset(cfg, 25, 0.0, 13)

    def test_round_trip_bit_exact(self, tmp_path):
        ds = self.make_dataset()
        path = tmp_path / "ds.fasd"
        save_dataset(ds, path)
        loaded = load_dataset(path)
        assert np.array_equal(loaded.features, ds.features)
        assert np.array_equal(loaded.targets, ds.targets)
        assert loaded.config_fingerprint == ds.config_fingerprint
        assert (loaded.num_ports, loaded.num_antennas, loaded.num_slots) == (16, 2, 8)

    def test_rewrite_is_byte_identical(self, tmp_path):
        ds = self.make_dataset()
        p1, p2 = tmp_path / "a.fasd", tmp_path / "b.fasd"
        save_dataset(ds, p1)
        save_dataset(ds, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_truncated_file_fails_checksum(self, tmp_path):
        ds = self.make_dataset()
        path = tmp_path / "ds.fasd"
        save_dataset(ds, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-10])
        with pytest.raises(ChecksumError, match="truncated"):
            load_dataset(path)

    def test_corrupt_payload_fails_checksum(self, tmp_path):
        ds = self.make_dataset()
        path = tmp_path / "ds.fasd"
        save_dataset(ds, path)
        raw = bytearray(path.read_bytes())
        raw[-1] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(ChecksumError):
            load_dataset(path)

    def test_wrong_magic_rejected(self, tmp_path):
        ds = self.make_dataset()
        path = tmp_path / "ds.fasd"
        save_dataset(ds, path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"NOPE"
        path.write_bytes(bytes(raw))
        with pytest.raises(FileFormatError, match="magic"):
            load_dataset(path)

    def test_fingerprint_mismatch_warns_not_errors(self, tmp_path):
        ds = self.make_dataset()
        path = tmp_path / "ds.fasd"
        save_dataset(ds, path)
        with pytest.warns(UserWarning, match="fingerprint"):
            loaded = load_dataset(path, expected_fingerprint=bytes(32))
        assert loaded.n_samples == 25
