import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noiselab.datasets import (
    LabeledDataset,
    SplitSpec,
    gen_confusable_blobs,
    load_csv,
    load_idx,
    load_noisy,
    pair_separation,
    read_idx,
    save_csv,
    save_noisy,
    split,
    split_indices,
    standardize,
)
from noiselab.errors import ConfigError, IngestionError
from noiselab.harness import TrainConfig, train_clean
from noiselab.noise import make_snapshot, pseudo_noise
from noiselab.numerics import ModelSpec


def write_idx(path, array, code=0x08):
    dtype = {0x08: ">u1", 0x0C: ">i4", 0x0E: ">f8"}[code]
    header = bytes([0, 0, code, array.ndim]) + struct.pack(f">{array.ndim}I", *array.shape)
    path.write_bytes(header + np.asarray(array, dtype=dtype).tobytes())


class TestBlobs:
    def test_construction(self):
        ds = gen_confusable_blobs(4, 250, 8, 0.5, seed=1)
        assert len(ds) == 1000
        np.testing.assert_array_equal(ds.class_counts(), [250] * 4)
        assert ds.features.shape == (1000, 8)
        assert ds.provenance == "clean" and ds.noise_rate == 0.0

    def test_deterministic(self):
        a = gen_confusable_blobs(5, 40, 6, 0.3, seed=7)
        b = gen_confusable_blobs(5, 40, 6, 0.3, seed=7)
        assert a.features.tobytes() == b.features.tobytes()
        assert a == b
        assert a != gen_confusable_blobs(5, 40, 6, 0.3, seed=8)

    def test_separable_at_zero_confusability(self):
        ds = gen_confusable_blobs(4, 100, 8, 0.0, seed=0)
        (tr,) = standardize(ds)
        spec = ModelSpec("mlp", (8,), 4, hidden=(), seed=0)
        snaps = train_clean(tr, spec, TrainConfig(epochs=60, batch_size=32, lr=0.01, schedule="constant"))
        assert snaps.snapshots[-1].train_acc >= 0.99

    def test_pairs_move_closer(self):
        seps = [pair_separation(c) for c in (0.0, 0.25, 0.5, 0.75, 0.95)]
        assert all(a > b for a, b in zip(seps, seps[1:]))

    def test_paired_means_closer_as_confusability_grows(self):
        def pair_gap(c):
            ds = gen_confusable_blobs(4, 2000, 8, c, seed=3)
            means = [ds.features[ds.true_labels == k].mean(axis=0) for k in range(4)]
            return np.linalg.norm(means[0] - means[1])

        assert pair_gap(0.2) > pair_gap(0.5) > pair_gap(0.9)

    @pytest.mark.parametrize("args", [(1, 10, 4, 0.5), (4, 10, 4, 1.0), (4, 10, 4, -0.1), (4, 0, 4, 0.5)])
    def test_invalid(self, args):
        with pytest.raises(ConfigError):
            gen_confusable_blobs(*args)


class TestIdx:
    def test_images_and_labels(self, tmp_path):
        rng = np.random.default_rng(0)
        imgs = rng.integers(0, 256, size=(10, 28, 28))
        labels = rng.integers(0, 10, size=10)
        write_idx(tmp_path / "img", imgs)
        write_idx(tmp_path / "lab", labels)
        ds = load_idx(tmp_path / "img", tmp_path / "lab", n_classes=10)
        assert len(ds) == 10
        assert ds.features.shape == (10, 28, 28, 1)
        np.testing.assert_allclose(ds.features[..., 0], imgs / 255.0, atol=1e-15)
        np.testing.assert_array_equal(ds.true_labels, labels)

    def test_wider_types(self, tmp_path):
        arr = np.arange(12, dtype=np.float64).reshape(3, 4) / 7
        write_idx(tmp_path / "f", arr, 0x0E)
        np.testing.assert_array_equal(read_idx(tmp_path / "f"), arr)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad"
        p.write_bytes(b"\x01\x00\x08\x01" + struct.pack(">I", 0))
        with pytest.raises(IngestionError, match="byte 0"):
            read_idx(p)

    def test_truncated(self, tmp_path):
        write_idx(tmp_path / "img", np.zeros((4, 3, 3)))
        data = (tmp_path / "img").read_bytes()
        (tmp_path / "img").write_bytes(data[:-5])
        with pytest.raises(IngestionError, match="byte"):
            read_idx(tmp_path / "img")

    def test_label_out_of_range(self, tmp_path):
        write_idx(tmp_path / "img", np.zeros((2, 3, 3)))
        write_idx(tmp_path / "lab", np.array([0, 5]))
        with pytest.raises(IngestionError, match="record 1"):
            load_idx(tmp_path / "img", tmp_path / "lab", n_classes=3)


class TestCsv:
    def test_label_at_least_c(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("# noiselab v1 provenance=clean C=3\nindex,true_label,observed_label,f0\n0,1,1,0.5\n1,3,3,0.1\n")
        with pytest.raises(IngestionError, match=":4"):
            load_csv(p)

    @pytest.mark.parametrize(
        "body",
        [
            "index,true,observed_label,f0\n0,1,1,0.5\n",
            "index,true_label,observed_label,f0\n0,1,1\n",
            "index,true_label,observed_label,f0\n1,1,1,0.5\n",
            "index,true_label,observed_label,f0\n0,x,1,0.5\n",
        ],
    )
    def test_malformed(self, tmp_path, body):
        p = tmp_path / "d.csv"
        p.write_text("# noiselab v1 provenance=symmetric C=3\n" + body)
        with pytest.raises(IngestionError):
            load_csv(p)

    def test_version_mismatch(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("# noiselab v2 provenance=clean C=3\nindex,true_label,observed_label,f0\n0,1,1,0.5\n")
        with pytest.raises(IngestionError):
            load_noisy(p)

    def test_round_trip(self, tmp_path):
        ds = gen_confusable_blobs(3, 20, 5, 0.4, seed=2)
        save_csv(ds, tmp_path / "d.csv")
        back = load_csv(tmp_path / "d.csv")
        assert np.max(np.abs(back.features - ds.features)) <= 1e-12
        np.testing.assert_array_equal(back.true_labels, ds.true_labels)
        np.testing.assert_array_equal(back.observed_labels, ds.observed_labels)
        assert back == ds

    def test_image_shape_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        ds = LabeledDataset(rng.random((4, 3, 3, 2)), [0, 1, 2, 0], [1, 1, 2, 0], 3, "symmetric")
        save_noisy(ds, tmp_path / "d.csv")
        assert load_noisy(tmp_path / "d.csv") == ds

    def test_lf_line_endings(self, tmp_path):
        save_csv(gen_confusable_blobs(2, 3, 2, seed=0), tmp_path / "d.csv")
        raw = (tmp_path / "d.csv").read_bytes()
        assert b"\r" not in raw
        assert raw.startswith(b"# noiselab v1 provenance=clean C=2\nindex,true_label,observed_label,f0,f1\n")

    def test_clean_has_no_noisy(self, tmp_path):
        save_noisy(gen_confusable_blobs(4, 10, 3, seed=0), tmp_path / "d.csv")
        assert load_noisy(tmp_path / "d.csv").noisy_mask.sum() == 0

    def test_pseudo_count(self, tmp_path):
        ds = gen_confusable_blobs(4, 250, 8, 0.5, seed=0)
        rng = np.random.default_rng(0)
        preds = ds.true_labels.copy()
        wrong = rng.choice(1000, size=195, replace=False)
        preds[wrong] = (preds[wrong] + 1) % 4
        snap = make_snapshot(3, preds, ds.true_labels, 4)
        assert abs(snap.train_acc - 0.8) <= 0.02
        save_noisy(pseudo_noise(ds, snap), tmp_path / "p.csv")
        loaded = load_noisy(tmp_path / "p.csv")
        assert loaded.provenance == "pseudo"
        assert abs(int(loaded.noisy_mask.sum()) - 200) <= 20

    @settings(max_examples=25, deadline=None)
    @given(
        st.integers(2, 5),
        st.integers(1, 12),
        st.integers(1, 4),
        st.floats(-1e300, 1e300, allow_nan=False),
        st.integers(0, 2**32 - 1),
    )
    def test_round_trip_property(self, tmp_path_factory, c, n, d, scale, seed):
        rng = np.random.default_rng(seed)
        feats = rng.normal(size=(n, d)) * scale
        true = rng.integers(0, c, n)
        obs = rng.integers(0, c, n)
        ds = LabeledDataset(feats, true, obs, c, "randomized")
        p = tmp_path_factory.mktemp("rt") / "d.csv"
        save_noisy(ds, p)
        assert load_noisy(p) == ds


class TestSplit:
    def test_sizes(self):
        ds = gen_confusable_blobs(4, 250, 4, seed=0)
        tr, te = split(ds, SplitSpec(0.2, seed=3))
        assert (len(tr), len(te)) == (800, 200)

    def test_deterministic_partition(self):
        a = split_indices(1000, SplitSpec(0.2, 5))
        b = split_indices(1000, SplitSpec(0.2, 5))
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])
        assert sorted(np.concatenate(a).tolist()) == list(range(1000))

    def test_invalid_fraction(self):
        with pytest.raises(ConfigError):
            SplitSpec(1.0)

    def test_standardize_uses_train_statistics(self):
        ds = gen_confusable_blobs(2, 50, 3, seed=1)
        tr, te = split(ds, SplitSpec(0.3, 1))
        str_, ste = standardize(tr, te)
        np.testing.assert_allclose(str_.features.mean(axis=0), 0, atol=1e-12)
        mu, sd = tr.features.mean(axis=0), tr.features.std(axis=0)
        np.testing.assert_allclose(ste.features, (te.features - mu) / sd, atol=1e-12)


class TestLabeledDataset:
    def test_read_only(self):
        ds = gen_confusable_blobs(2, 3, 2, seed=0)
        with pytest.raises(ValueError):
            ds.observed_labels[0] = 1

    def test_clean_requires_matching_labels(self):
        with pytest.raises(ConfigError):
            LabeledDataset(np.zeros((2, 1)), [0, 1], [1, 1], 2, "clean")

    def test_masks(self):
        ds = LabeledDataset(np.zeros((4, 1)), [0, 1, 1, 0], [0, 0, 1, 1], 2, "symmetric")
        np.testing.assert_array_equal(ds.clean_mask, [True, False, True, False])
        assert ds.noise_rate == 0.5
