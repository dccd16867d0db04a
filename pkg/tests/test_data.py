import hashlib
from importlib.resources import files

import numpy as np
import pytest

from zlprlab.data import (
    Dataset,
    SyntheticSpec,
    batch_indices,
    generate_synthetic,
    load_dataset,
    make_rng,
    save_dataset,
    split,
)
from zlprlab.errors import ParseError, SchemaError, UsageError
from zlprlab.risk import builtin_joint, load_joint

FIXTURE_SHA256 = {
    "coupled_L8.joint": "9d45bafb5999893ae372111ac7bcc39fbea69d677d93f4e2991fbff3958c66ff",
    "tiny20.jsonl": "65b7fc768ed84a61d7fe5fbf585cb9451b46a52609ce2607c9ce278643387a5b",
}


def tiny(n=20, f=3, L=4, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(rng.normal(size=(n, f)), rng.uniform(size=(n, L)) < 0.5, "tiny")


class TestDataset:
    def test_immutable(self):
        ds = tiny()
        with pytest.raises(ValueError):
            ds.features[0, 0] = 1.0

    def test_rejects_misaligned(self):
        with pytest.raises(SchemaError):
            Dataset(np.zeros((3, 2)), np.zeros((4, 2)))

    def test_rejects_nan(self):
        with pytest.raises(SchemaError):
            Dataset(np.full((1, 1), np.nan), np.zeros((1, 1)))


class TestFiles:
    def test_round_trip_exact(self, tmp_path):
        ds = generate_synthetic(SyntheticSpec(num_features=5, num_labels=3, sample_count=50, noise_std=0.3), 1)
        save_dataset(ds, tmp_path / "d.jsonl")
        assert load_dataset(tmp_path / "d.jsonl") == ds

    def test_schema_error_names_line(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text(
            '{"name": "x", "num_features": 2, "num_labels": 2}\n'
            '{"features": [0.0, 1.0], "labels": [0]}\n'
            '{"features": [0.0], "labels": [1]}\n'
        )
        with pytest.raises(SchemaError) as exc:
            load_dataset(p)
        assert exc.value.lineno == 3
        assert "line 3" in str(exc.value)

    def test_label_out_of_range(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text('{"num_features": 1, "num_labels": 2}\n{"features": [0.0], "labels": [2]}\n')
        with pytest.raises(SchemaError):
            load_dataset(p)

    def test_malformed_json(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text('{"num_features": 1, "num_labels": 2}\n{"features": [0.0], \n')
        with pytest.raises(ParseError) as exc:
            load_dataset(p)
        assert exc.value.lineno == 2

    @pytest.mark.parametrize("name", sorted(FIXTURE_SHA256))
    def test_fixture_checksums(self, name):
        data = (files("zlprlab") / "fixtures" / name).read_bytes()
        assert hashlib.sha256(data).hexdigest() == FIXTURE_SHA256[name]

    def test_tiny_fixture_loads(self):
        ds = load_dataset(files("zlprlab") / "fixtures" / "tiny20.jsonl")
        assert (len(ds), ds.num_features, ds.num_labels) == (20, 4, 3)


class TestSynthetic:
    def test_deterministic(self):
        spec = SyntheticSpec(sample_count=100, noise_std=0.5)
        assert generate_synthetic(spec, 3) == generate_synthetic(spec, 3)
        assert generate_synthetic(spec, 3) != generate_synthetic(spec, 4)

    def test_standardized(self):
        ds = generate_synthetic(SyntheticSpec(sample_count=500), 0)
        np.testing.assert_allclose(ds.features.mean(axis=0), 0, atol=1e-12)
        np.testing.assert_allclose(ds.features.std(axis=0), 1, atol=1e-12)

    def test_coupled_needs_table(self):
        with pytest.raises(UsageError):
            generate_synthetic(SyntheticSpec(mode="coupled"), 0)

    def test_mirror_labels_stay_equal(self):
        spec = SyntheticSpec(mode="coupled", num_labels=2, sample_count=10_000, coupling=builtin_joint("mirror_2"))
        ds = generate_synthetic(spec, 5)
        mixed = np.mean(ds.labels[:, 0] != ds.labels[:, 1])
        assert mixed < 0.01

    def test_coupled_label_sets_follow_table(self):
        joint = load_joint(files("zlprlab") / "fixtures" / "coupled_L8.joint")
        spec = SyntheticSpec(mode="coupled", num_labels=8, sample_count=20_000, coupling=joint, noise_std=1.0)
        ds = generate_synthetic(spec, 6)
        masks = ds.labels.astype(np.int64) @ (1 << np.arange(8))
        freq = np.bincount(masks, minlength=256) / len(ds)
        assert 0.5 * np.abs(freq - joint.probs).sum() < 0.02

    def test_independent_labels_are_not_constant(self):
        ds = generate_synthetic(SyntheticSpec(num_features=4, num_labels=2, sample_count=200), 0)
        assert np.all((ds.labels.mean(axis=0) > 0) & (ds.labels.mean(axis=0) < 1))


class TestSplitAndBatches:
    @pytest.mark.parametrize("n,sizes", [(100, (80, 10, 10)), (101, (81, 10, 10)), (10, (8, 1, 1))])
    def test_sizes(self, n, sizes):
        parts = split(tiny(n), 0)
        assert tuple(len(p) for p in parts) == sizes

    def test_partition(self):
        ds = tiny(57)
        parts = split(ds, 3)
        rows = np.concatenate([p.features for p in parts])
        assert sorted(map(tuple, rows)) == sorted(map(tuple, ds.features))
        assert [p.name for p in parts] == ["tiny/train", "tiny/val", "tiny/test"]

    def test_split_seeded(self):
        a, b = split(tiny(50), 1), split(tiny(50), 1)
        assert all(x == y for x, y in zip(a, b))

    def test_too_small(self):
        with pytest.raises(UsageError):
            split(tiny(9), 0)

    def test_batches(self):
        batches = batch_indices(10, 4, 0, 0)
        assert [len(b) for b in batches] == [4, 4, 2]
        assert sorted(np.concatenate(batches)) == list(range(10))

    def test_epochs_reshuffle(self):
        assert not np.array_equal(np.concatenate(batch_indices(50, 8, 0, 0)), np.concatenate(batch_indices(50, 8, 0, 1)))
        np.testing.assert_array_equal(batch_indices(50, 8, 2, 3)[0], batch_indices(50, 8, 2, 3)[0])


def test_rng_is_philox():
    assert isinstance(make_rng(0).bit_generator, np.random.Philox)
    assert make_rng((1, 2)).integers(1 << 30) == make_rng((1, 2)).integers(1 << 30)


def test_split_seeds_differ_but_sizes_match():
    a, b = split(tiny(50), 1), split(tiny(50), 2)
    assert [len(p) for p in a] == [len(p) for p in b]
    assert a[0] != b[0]
