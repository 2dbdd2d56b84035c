import numpy as np
import pytest

from fedpgn.data import (CsvSchema, Partition, SyntheticSource, class_means,
                         dirichlet_partition, ingest_csv, next_batch,
                         synth_clusters)
from fedpgn.errors import ConfigError, CsvFormatError
from fedpgn.models import SOFTMAX, Model, loss_and_grad
from fedpgn.numerics import stream


class TestSynthClusters:
    def test_same_seed_identical_bytes(self):
        a = synth_clusters(3, 5, 20, 0.2, seed=9)
        b = synth_clusters(3, 5, 20, 0.2, seed=9)
        assert a.features.tobytes() == b.features.tobytes()
        assert np.array_equal(a.labels, b.labels)

    def test_zero_spread_collapses_to_means(self):
        ds = synth_clusters(4, 6, 10, 0.0, seed=1)
        means = class_means(4, 6)
        for c in range(4):
            rows = ds.features[ds.labels == c]
            assert np.allclose(rows, means[c])

    def test_labels_balanced(self):
        ds = synth_clusters(5, 4, 17, 0.3, seed=2)
        assert all((ds.labels == c).sum() == 17 for c in range(5))

    def test_linear_model_separates_tight_clusters(self):
        """Full-batch gradient descent reaches 99% train accuracy fast."""
        ds = synth_clusters(2, 8, 100, 0.1, seed=3)
        model = Model(SOFTMAX, n_in=8, n_cls=2)
        from fedpgn.data import DataBatch
        from fedpgn.models import accuracy
        batch = DataBatch(ds.features, ds.labels)
        x = np.zeros(model.dim)
        for _ in range(200):
            _, grad = loss_and_grad(model, x, batch)
            x = x - 0.5 * grad
            if accuracy(model, x, ds.features, ds.labels) >= 0.99:
                break
        assert accuracy(model, x, ds.features, ds.labels) >= 0.99

    def test_class_means_unit_sphere(self):
        for n_cls, n_in in ((2, 4), (10, 32), (12, 5)):
            means = class_means(n_cls, n_in)
            np.testing.assert_allclose(np.linalg.norm(means, axis=1), 1.0, rtol=1e-12)

    def test_source_train_test_disjoint_streams(self):
        src = SyntheticSource(n_cls=3, n_in=4, per_class=10, spread=0.2,
                              test_per_class=10)
        train, test = src.load(5)
        assert train.features.tobytes() != test.features.tobytes()


class TestIngestCsv:
    def test_three_row_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0,1.0,2.0\n1,0.5,0.25\n0,-1,3\n")
        ds = ingest_csv(path, CsvSchema(n_cls=2, n_in=2))
        assert ds.n == 3
        assert list(ds.labels) == [0, 1, 0]
        assert ds.features[2, 0] == -1.0

    def test_header_skipped_when_declared(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("label,f1\n0,1.0\n1,2.0\n")
        ds = ingest_csv(path, CsvSchema(n_cls=2, n_in=1, has_header=True))
        assert ds.n == 2

    def test_label_out_of_range_names_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0,1.0\n7,2.0\n")
        with pytest.raises(CsvFormatError) as err:
            ingest_csv(path, CsvSchema(n_cls=5, n_in=1))
        assert err.value.line == 2

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0,1.0\n1,not_a_number\n")
        with pytest.raises(CsvFormatError) as err:
            ingest_csv(path, CsvSchema(n_cls=2, n_in=1))
        assert err.value.line == 2

    def test_checksum_stable_across_reads(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0,1.0\n1,2.0\n")
        a = ingest_csv(path, CsvSchema(n_cls=2, n_in=1))
        b = ingest_csv(path, CsvSchema(n_cls=2, n_in=1))
        assert a.provenance["sha256"] == b.provenance["sha256"]


class TestDirichletPartition:
    def test_disjoint_cover_always(self):
        ds = synth_clusters(4, 3, 50, 0.3, seed=1)
        for alpha in (0.1, 0.6, 10.0):
            part = dirichlet_partition(ds, 5, alpha, seed=2)
            part.validate(ds.n)

    def test_huge_alpha_balances_labels(self):
        """Dir(inf) proportions are uniform, so shards mirror the global mix."""
        ds = synth_clusters(4, 3, 200, 0.3, seed=3)
        part = dirichlet_partition(ds, 5, 1e6, seed=4)
        global_frac = 1.0 / 4
        for shard in part.client_indices:
            labels = ds.labels[shard]
            for c in range(4):
                frac = (labels == c).sum() / len(labels)
                assert abs(frac - global_frac) / global_frac <= 0.05

    def test_low_alpha_concentrates_labels(self):
        """Median client sees few distinct labels at alpha = 0.1."""
        ds = synth_clusters(10, 4, 500, 0.3, seed=5)
        distinct = []
        part = dirichlet_partition(ds, 50, 0.1, seed=6)
        for shard in part.client_indices:
            distinct.append(len(np.unique(ds.labels[shard])))
        assert sorted(distinct)[len(distinct) // 2] <= 5

    def test_min_client_size_enforced(self):
        ds = synth_clusters(5, 3, 100, 0.3, seed=7)
        part = dirichlet_partition(ds, 8, 0.1, seed=8, min_client_size=20)
        assert min(len(s) for s in part.client_indices) >= 20

    def test_infeasible_raises(self):
        ds = synth_clusters(2, 3, 10, 0.3, seed=9)
        with pytest.raises(ConfigError):
            dirichlet_partition(ds, 5, 1.0, seed=10, min_client_size=10)

    def test_label_diversity_monotone_in_alpha(self):
        """Average distinct-label count grows with alpha across 20 seeds."""
        ds = synth_clusters(10, 4, 100, 0.3, seed=11)
        means = []
        for alpha in (0.1, 0.6, 10.0):
            counts = []
            for seed in range(20):
                part = dirichlet_partition(ds, 10, alpha, seed=seed)
                counts.extend(len(np.unique(ds.labels[s])) for s in part.client_indices)
            means.append(np.mean(counts))
        assert means[0] < means[1] < means[2]

    def test_same_seed_same_partition(self):
        ds = synth_clusters(4, 3, 100, 0.3, seed=12)
        p1 = dirichlet_partition(ds, 6, 0.5, seed=13)
        p2 = dirichlet_partition(ds, 6, 0.5, seed=13)
        for a, b in zip(p1.client_indices, p2.client_indices):
            assert np.array_equal(a, b)

    def test_partition_json_round_trip(self):
        import json
        ds = synth_clusters(3, 3, 30, 0.3, seed=14)
        part = dirichlet_partition(ds, 4, 1.0, seed=15)
        loaded = json.loads(part.to_json())
        rebuilt = Partition([np.array(loaded[str(i)]) for i in range(4)], 1.0, 15)
        rebuilt.validate(ds.n)


class TestNextBatch:
    def make(self):
        ds = synth_clusters(2, 3, 40, 0.3, seed=20)
        part = dirichlet_partition(ds, 4, 1.0, seed=21)
        return ds, part

    def test_oversized_batch_returns_full_shard(self):
        ds, part = self.make()
        shard = part.client_indices[0]
        batch = next_batch(ds, part, 0, len(shard) + 100, stream(0, 0))
        assert np.array_equal(batch.features, ds.features[shard])

    def test_fixed_stream_reproducible(self):
        ds, part = self.make()
        b1 = next_batch(ds, part, 1, 5, stream(1, 2, 3))
        b2 = next_batch(ds, part, 1, 5, stream(1, 2, 3))
        assert np.array_equal(b1.features, b2.features)

    def test_unknown_client_rejected(self):
        ds, part = self.make()
        with pytest.raises(ConfigError):
            next_batch(ds, part, 99, 5, stream(0, 0))

    def test_single_draws_uniform(self):
        """Frequency of each element over many B=1 draws is binomial-consistent."""
        ds, part = self.make()
        shard = part.client_indices[2][:10]
        part10 = Partition([shard], 1.0, 0)
        rng = stream(5, 0)
        counts = np.zeros(10)
        draws = 10_000
        for _ in range(draws):
            batch = next_batch(ds, part10, 0, 1, rng)
            idx = np.flatnonzero((ds.features[shard] == batch.features[0]).all(axis=1))
            counts[idx[0]] += 1
        p = 0.1
        sigma = np.sqrt(draws * p * (1 - p))
        assert np.all(np.abs(counts - draws * p) <= 4 * sigma)
