import math

import numpy as np
import pytest

from fedpgn.data import DataBatch
from fedpgn.errors import ConfigError
from fedpgn.models import MLP, SOFTMAX, Model, accuracy, loss_and_grad, perturbed_grad
from fedpgn.numerics import l2_norm


def random_batch(rng, n, n_in, n_cls):
    return DataBatch(rng.standard_normal((n, n_in)),
                     rng.integers(0, n_cls, size=n).astype(np.int64))


def finite_difference(model, x, batch, coord, h=1e-6):
    xp = x.copy()
    xp[coord] += h
    xm = x.copy()
    xm[coord] -= h
    return (loss_and_grad(model, xp, batch)[0] - loss_and_grad(model, xm, batch)[0]) / (2 * h)


class TestLossAndGrad:
    def test_zero_params_balanced_two_class_gives_ln2(self):
        """All-zero weights predict uniformly, so cross-entropy is ln 2."""
        model = Model(SOFTMAX, n_in=4, n_cls=2)
        rng = np.random.default_rng(0)
        feats = rng.standard_normal((10, 4))
        labels = np.array([0, 1] * 5, dtype=np.int64)
        loss, _ = loss_and_grad(model, np.zeros(model.dim), DataBatch(feats, labels))
        assert loss == pytest.approx(math.log(2), rel=1e-12)

    def test_duplicating_batch_changes_nothing(self):
        model = Model(MLP, n_in=3, n_cls=4, hidden=5)
        rng = np.random.default_rng(1)
        x = 0.5 * rng.standard_normal(model.dim)
        batch = random_batch(rng, 8, 3, 4)
        doubled = DataBatch(np.vstack([batch.features, batch.features]),
                            np.concatenate([batch.labels, batch.labels]))
        l1, g1 = loss_and_grad(model, x, batch)
        l2, g2 = loss_and_grad(model, x, doubled)
        assert l1 == pytest.approx(l2, rel=1e-12)
        np.testing.assert_allclose(g1, g2, rtol=1e-12)

    @pytest.mark.parametrize("model", [
        Model(SOFTMAX, n_in=6, n_cls=3),
        Model(MLP, n_in=5, n_cls=4, hidden=7),
        Model(MLP, n_in=4, n_cls=3, hidden=6, activation="relu"),
    ])
    def test_gradient_matches_central_differences(self, model):
        rng = np.random.default_rng(2)
        for trial in range(5):
            x = 0.5 * rng.standard_normal(model.dim)
            batch = random_batch(rng, 12, model.n_in, model.n_cls)
            _, grad = loss_and_grad(model, x, batch)
            for coord in rng.choice(model.dim, size=10, replace=False):
                fd = finite_difference(model, x, batch, coord)
                assert abs(grad[coord] - fd) <= 1e-4 * max(1e-4, abs(fd))

    def test_dimension_mismatch_is_config_error(self):
        model = Model(SOFTMAX, n_in=4, n_cls=2)
        with pytest.raises(ConfigError):
            loss_and_grad(model, np.zeros(model.dim + 1),
                          random_batch(np.random.default_rng(0), 4, 4, 2))

    def test_loss_nonnegative(self):
        rng = np.random.default_rng(3)
        model = Model(SOFTMAX, n_in=4, n_cls=3)
        for _ in range(20):
            x = rng.standard_normal(model.dim)
            loss, _ = loss_and_grad(model, x, random_batch(rng, 6, 4, 3))
            assert loss >= 0.0


class TestPerturbedGrad:
    def test_rho_zero_is_plain_gradient(self):
        model = Model(SOFTMAX, n_in=4, n_cls=3)
        rng = np.random.default_rng(4)
        x = rng.standard_normal(model.dim)
        batch = random_batch(rng, 6, 4, 3)
        direction = rng.standard_normal(model.dim)
        expected = loss_and_grad(model, x, batch)[1]
        assert np.array_equal(perturbed_grad(model, x, direction, 0.0, batch), expected)

    def test_zero_direction_is_plain_gradient(self):
        """Matches the first round, when the pseudo-gradient is still zero."""
        model = Model(SOFTMAX, n_in=4, n_cls=3)
        rng = np.random.default_rng(5)
        x = rng.standard_normal(model.dim)
        batch = random_batch(rng, 6, 4, 3)
        expected = loss_and_grad(model, x, batch)[1]
        got = perturbed_grad(model, x, np.zeros(model.dim), 0.2, batch)
        assert np.array_equal(got, expected)

    def test_shift_along_own_gradient(self):
        model = Model(MLP, n_in=5, n_cls=3, hidden=4)
        rng = np.random.default_rng(6)
        x = 0.3 * rng.standard_normal(model.dim)
        batch = random_batch(rng, 10, 5, 3)
        _, grad = loss_and_grad(model, x, batch)
        got = perturbed_grad(model, x, grad, 0.2, batch)
        shifted = x + 0.2 * grad / l2_norm(grad)
        expected = loss_and_grad(model, shifted, batch)[1]
        np.testing.assert_allclose(got, expected, rtol=1e-12, atol=0)


class TestModelShape:
    def test_dim_formula(self):
        assert Model(SOFTMAX, n_in=32, n_cls=10).dim == 330
        assert Model(MLP, n_in=32, n_cls=10, hidden=16).dim == 32 * 16 + 16 + 160 + 10

    def test_blocks_tile_the_vector(self):
        for model in (Model(SOFTMAX, n_in=3, n_cls=2),
                      Model(MLP, n_in=3, n_cls=2, hidden=4)):
            stop = 0
            for _, sl in model.blocks():
                assert sl.start == stop
                stop = sl.stop
            assert stop == model.dim

    def test_accuracy_on_separated_points(self):
        model = Model(SOFTMAX, n_in=2, n_cls=2)
        # weights mapping x -> sign(x0) decide the two clusters perfectly
        x = np.array([1.0, 0.0, -1.0, 0.0, 0.0, 0.0])
        feats = np.array([[2.0, 0.0], [-2.0, 0.0], [3.0, 1.0]])
        labels = np.array([0, 1, 0])
        assert accuracy(model, x, feats, labels) == 1.0
