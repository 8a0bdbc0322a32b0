import math

import numpy as np
import pytest

from qtnn import Barrier, EnergyMap, SeedStream
from qtnn import bayes, nn
from oracles import relative_error

QT_ACT = nn.qt_activation(Barrier(1.0, 1.0), EnergyMap("smooth", 1.0))


class ZeroEps:
    """Test hook: epsilon stream forced to zero."""

    def gaussians(self, n):
        return np.zeros(n)


class FrozenEps:
    """Replays one fixed epsilon vector from the start on demand."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.float64)
        self.pos = 0

    def reset(self):
        self.pos = 0

    def gaussians(self, n):
        out = self.values[self.pos:self.pos + n]
        self.pos += n
        return out


def tiny_net(seed=1, sizes=(3, 4, 2)):
    return bayes.make_bayes_network(SeedStream(seed), sizes, QT_ACT)


def param_count(layers):
    return sum(l.mus.size + l.bias_mus.size for l in layers)


class TestSampleWeights:
    def test_zero_eps_returns_mu(self):
        layers = tiny_net()
        dense, _, _ = bayes.sample_weights(layers[0], ZeroEps())
        assert np.array_equal(dense.weights, layers[0].mus)
        assert np.array_equal(dense.bias, layers[0].bias_mus)

    def test_rho_zero_gives_ln2_sigma(self):
        layer = bayes.BayesLayer(np.zeros((2, 2)), np.zeros((2, 2)),
                                 np.zeros(2), np.zeros(2), nn.IDENTITY_ACTIVATION)
        eps = FrozenEps(np.ones(6))
        dense, _, _ = bayes.sample_weights(layer, eps)
        assert np.allclose(dense.weights, math.log(2.0), atol=1e-15)

    def test_row_major_consumption_order(self):
        layer = bayes.BayesLayer(np.zeros((2, 3)), np.zeros((2, 3)),
                                 np.zeros(2), np.zeros(2), nn.IDENTITY_ACTIVATION)
        eps = FrozenEps(np.arange(1.0, 9.0))
        dense, _, _ = bayes.sample_weights(layer, eps)
        ln2 = math.log(2.0)
        assert np.allclose(dense.weights, ln2 * np.arange(1.0, 7.0).reshape(2, 3))
        assert np.allclose(dense.bias, ln2 * np.array([7.0, 8.0]))

    def test_sample_mean_approaches_mu(self):
        layer = bayes.BayesLayer(np.full((1, 1), 0.3), np.zeros((1, 1)),
                                 np.zeros(1), np.zeros(1), nn.IDENTITY_ACTIVATION)
        s = SeedStream(42)
        draws = [bayes.sample_weights(layer, s)[0].weights[0, 0] for _ in range(10000)]
        bound = 3.0 * math.log(2.0) / 100.0  # 3 sigma / sqrt(n)
        assert abs(np.mean(draws) - 0.3) < bound


class TestKl:
    def test_standard_normal_posterior_is_zero(self):
        rho = math.log(math.e - 1.0)  # sigma = 1
        assert bayes.kl_gaussian(0.0, rho) == pytest.approx(0.0, abs=1e-12)

    def test_unit_mean(self):
        rho = math.log(math.e - 1.0)
        assert bayes.kl_gaussian(1.0, rho) == pytest.approx(0.5, abs=1e-12)

    def test_sigma_two(self):
        rho = math.log(math.exp(2.0) - 1.0)
        expected = (4.0 - 1.0 - math.log(4.0)) / 2.0
        assert bayes.kl_gaussian(0.0, rho) == pytest.approx(expected, abs=1e-12)

    def test_nonnegative_everywhere(self):
        s = SeedStream(8)
        mus = 3.0 * s.gaussians(500)
        rhos = 3.0 * s.gaussians(500)
        assert np.all(bayes.kl_gaussian(mus, rhos) >= 0.0)


class TestElbo:
    def test_beta_zero_is_sampled_nll(self):
        layers = tiny_net(2)
        x = SeedStream(3).gaussians(9).reshape(3, 3)
        y = np.array([0, 1, 1])
        eps = FrozenEps(SeedStream(4).gaussians(param_count(layers)))
        loss, _ = bayes.elbo_loss(layers, x, y, eps, beta=0.0, n_batches=5)
        eps.reset()
        sampled, _ = bayes.sample_network(layers, eps)
        cache = nn.net_forward(sampled, x)
        nll, _ = nn.batch_softmax_cross_entropy(cache.output, y)
        assert loss == pytest.approx(nll, abs=1e-15)

    def test_prior_posterior_kl_contributes_zero(self):
        rho = math.log(math.e - 1.0)
        layers = tiny_net(5)
        for layer in layers:
            layer.mus[:] = 0.0
            layer.rhos[:] = rho
            layer.bias_mus[:] = 0.0
            layer.bias_rhos[:] = rho
        assert bayes.kl_total(layers) == pytest.approx(0.0, abs=1e-9)
        x = SeedStream(6).gaussians(6).reshape(2, 3)
        y = np.array([0, 1])
        eps = FrozenEps(SeedStream(7).gaussians(param_count(layers)))
        loss1, _ = bayes.elbo_loss(layers, x, y, eps, beta=0.0, n_batches=3)
        eps.reset()
        loss5, _ = bayes.elbo_loss(layers, x, y, eps, beta=5.0, n_batches=3)
        assert loss1 == pytest.approx(loss5, abs=1e-9)

    def test_gradients_match_finite_differences(self):
        layers = tiny_net(9, sizes=(4, 3, 2))
        x = SeedStream(10).gaussians(12).reshape(3, 4)
        y = np.array([0, 1, 0])
        eps = FrozenEps(SeedStream(11).gaussians(param_count(layers)))
        beta, n_batches = 1.0, 4

        eps.reset()
        _, grads = bayes.elbo_loss(layers, x, y, eps, beta, n_batches)

        def loss_at():
            eps.reset()
            val, _ = bayes.elbo_loss(layers, x, y, eps, beta, n_batches)
            return val

        h = 1e-6
        worst = 0.0
        for li, layer in enumerate(layers):
            for a_idx, arr in enumerate(layer.parameter_arrays()):
                flat = arr.reshape(-1)
                for j in range(flat.size):
                    keep = flat[j]
                    flat[j] = keep + h
                    lp = loss_at()
                    flat[j] = keep - h
                    lm = loss_at()
                    flat[j] = keep
                    fd = (lp - lm) / (2.0 * h)
                    an = grads[li][a_idx].reshape(-1)[j]
                    worst = max(worst, relative_error(an, fd))
        assert worst < 1e-4


class TestPredictMc:
    def test_rows_sum_to_one(self):
        layers = tiny_net(12)
        x = SeedStream(13).gaussians(15).reshape(5, 3)
        probs = bayes.predict_mc(layers, x, 7, SeedStream(14))
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_single_sample_equals_manual_pass(self):
        layers = tiny_net(15)
        x = SeedStream(16).gaussians(6).reshape(2, 3)
        probs = bayes.predict_mc(layers, x, 1, SeedStream(17))
        sampled, _ = bayes.sample_network(layers, SeedStream(17).spawn(0))
        cache = nn.net_forward(sampled, x)
        assert np.array_equal(probs, nn.softmax(cache.output))

    def test_degenerate_posterior_matches_mean_forward(self):
        layers = tiny_net(18)
        for layer in layers:
            layer.rhos[:] = -20.0
            layer.bias_rhos[:] = -20.0
        x = SeedStream(19).gaussians(9).reshape(3, 3)
        probs = bayes.predict_mc(layers, x, 5, SeedStream(20))
        mean_layers = [nn.DenseLayer(l.mus, l.bias_mus, l.activation) for l in layers]
        cache = nn.net_forward(mean_layers, x)
        assert np.allclose(probs, nn.softmax(cache.output), atol=1e-6)

    def test_reduction_order_invariance(self):
        # simulate a worker pool: compute samples out of order, reduce sorted
        layers = tiny_net(21)
        x = SeedStream(22).gaussians(6).reshape(2, 3)
        stream = SeedStream(23)
        serial = bayes.predict_mc(layers, x, 6, stream)
        partial = {}
        for j in (4, 0, 5, 2, 1, 3):
            sampled, _ = bayes.sample_network(layers, stream.spawn(j))
            partial[j] = nn.softmax(nn.net_forward(sampled, x).output)
        acc = np.zeros_like(partial[0])
        for j in range(6):
            acc += partial[j]
        assert np.array_equal(acc / 6, serial)

    def test_mc_variance_scales_inversely_with_samples(self):
        layers = tiny_net(24, sizes=(3, 3, 2))
        x = SeedStream(25).gaussians(3).reshape(1, 3)
        ns = [1, 2, 4, 8, 16, 32]
        variances = []
        master = SeedStream(26)
        k = 0
        for n in ns:
            vals = []
            for _ in range(300):
                vals.append(bayes.predict_mc(layers, x, n, master.spawn(k))[0, 0])
                k += 1
            variances.append(np.var(vals))
        slope = np.polyfit(np.log(ns), np.log(variances), 1)[0]
        assert abs(slope + 1.0) < 0.2

    def test_rejects_zero_samples(self):
        with pytest.raises(ValueError):
            bayes.predict_mc(tiny_net(), np.zeros((1, 3)), 0, SeedStream(0))


class TestTrainBnn:
    def _data(self, seed, n=24, dim=6):
        s = SeedStream(seed)
        x = s.gaussians(n * dim).reshape(n, dim)
        y = (x[:, 0] > 0).astype(np.int64)
        x[:, 0] += 2.0 * (2.0 * y - 1.0)  # make it separable
        return x, y

    def _settings(self, epochs, **kw):
        defaults = dict(lr=0.05, batch=8, mc_samples=4, beta=1.0)
        defaults.update(kw)
        return bayes.BnnTrainSettings(epochs=epochs, **defaults)

    def test_zero_epochs_returns_initial(self):
        layers = bayes.make_bayes_network(SeedStream(30), (6, 4, 2), QT_ACT)
        before = [np.array(a) for l in layers for a in l.parameter_arrays()]
        x, y = self._data(31)
        _, history = bayes.train_bnn(layers, x, y, x, y, self._settings(0),
                                     SeedStream(32))
        assert history == []
        after = [a for l in layers for a in l.parameter_arrays()]
        for b, a in zip(before, after):
            assert np.array_equal(b, a)

    def test_same_seed_identical_metrics(self):
        x, y = self._data(33)
        runs = []
        for _ in range(2):
            layers = bayes.make_bayes_network(SeedStream(34), (6, 4, 2), QT_ACT)
            _, history = bayes.train_bnn(layers, x, y, x, y, self._settings(3),
                                         SeedStream(35))
            runs.append([(m.epoch, m.train_loss, m.train_accuracy,
                          m.test_loss, m.test_accuracy) for m in history])
        assert runs[0] == runs[1]

    def test_learns_separable_data(self):
        # beta = 0 ablation: on 40 samples the KL term would rightly dominate,
        # so isolate the sampled-weight learning mechanism
        x, y = self._data(36, n=40)
        layers = bayes.make_bayes_network(SeedStream(37), (6, 8, 2), QT_ACT)
        _, history = bayes.train_bnn(layers, x, y, x, y,
                                     self._settings(40, lr=0.1, beta=0.0),
                                     SeedStream(38))
        assert history[-1].train_accuracy >= 0.9

    def test_degenerate_sigma_matches_deterministic_twin(self):
        # sigma ~ 4e-18: beta = 0 training must track plain SGD from mu
        x, y = self._data(39, n=16)
        layers = bayes.make_bayes_network(SeedStream(40), (6, 4, 2), QT_ACT)
        for layer in layers:
            layer.rhos[:] = -40.0
            layer.bias_rhos[:] = -40.0
        twin = [nn.DenseLayer(np.array(l.mus), np.array(l.bias_mus), l.activation)
                for l in layers]

        settings = self._settings(5, beta=0.0, batch=4, mc_samples=1)
        _, history = bayes.train_bnn(layers, x, y, x, y, settings, SeedStream(41))

        # deterministic twin with the identical shuffle stream
        shuffle = SeedStream(41).spawn(0)
        params = [a for l in twin for a in (l.weights, l.bias)]
        n_batches = (16 + settings.batch - 1) // settings.batch
        twin_losses = []
        for _ in range(5):
            order = shuffle.permutation(16)
            for b in range(n_batches):
                idx = order[b * settings.batch:(b + 1) * settings.batch]
                _, cache, grad_out = nn.net_loss(twin, x[idx], y[idx])
                grads = nn.backward(twin, cache, grad_out)
                nn.sgd_update(params, [g for pair in grads for g in pair],
                              settings.lr)
            cache = nn.net_forward(twin, x)
            probs = nn.softmax(cache.output)
            twin_losses.append(float(-np.log(probs[np.arange(16), y]).mean()))
        for m, tl in zip(history, twin_losses):
            assert abs(m.train_loss - tl) < 1e-6
