import csv
import math

import numpy as np
import pytest
from scipy import optimize, stats

from fexpbayes.posterior import (
    Estimate,
    HLossEstimate,
    PosteriorSamples,
    SamplerConfig,
    _Target,
    effective_sample_size,
    estimate_d,
    estimate_f_h,
    estimate_f_log,
    log_mean_params,
    periodogram,
    posterior_prob,
    run_mcmc,
    whittle_loglik,
)
from fexpbayes.prior import PriorSpec, log_prior_density
from fexpbayes.simulate import SimRequest, sample
from fexpbayes.spectral import Fexp, FexpParams, autocov, eval_fexp, fexp_from_arfima
from fexpbayes.toeplitz import gauss_loglik

GRID = np.linspace(0.05, np.pi, 40)


@pytest.fixture(scope="module")
def arfima_data():
    return sample(SimRequest(Fexp(fexp_from_arfima(0.3)), 256, seed=17))[0]


@pytest.fixture(scope="module")
def chain(arfima_data):
    prior = PriorSpec(variant="fexp_beta")
    return run_mcmc(arfima_data, prior, SamplerConfig(iterations=3000, burn_in=1000, seed=3))


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(iterations=10, burn_in=10), dict(thin=0),
                                    dict(d_step=0.0), dict(theta_step=-1.0), dict(jump_rate=2.0),
                                    dict(target_accept_d=1.0), dict(scale_step=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SamplerConfig(**kw)

    def test_empty_data(self):
        with pytest.raises(ValueError):
            run_mcmc(np.array([]), PriorSpec(), SamplerConfig())


class TestRunMcmc:
    def test_point_mass(self, rng):
        p = FexpParams(0.2, [0.1, -0.3])
        s = run_mcmc(rng.normal(size=32), PriorSpec.point_mass(p),
                     SamplerConfig(iterations=300, burn_in=100))
        assert all(q == p for q in s.draws)
        assert estimate_d(s).value == pytest.approx(0.2, abs=1e-15)
        m = log_mean_params(s)
        assert m.d == p.d
        np.testing.assert_allclose(m.theta, p.theta, rtol=1e-12)
        np.testing.assert_allclose(estimate_f_log(s, GRID), eval_fexp(p, GRID), rtol=1e-12)
        np.testing.assert_allclose(estimate_f_h(s, GRID), eval_fexp(p, GRID), rtol=1e-12)

    def test_deterministic(self, arfima_data):
        cfg = SamplerConfig(iterations=400, burn_in=100, seed=5)
        a = run_mcmc(arfima_data[:64], PriorSpec(), cfg)
        b = run_mcmc(arfima_data[:64], PriorSpec(), cfg)
        assert np.array_equal(a.d, b.d)
        assert all(np.array_equal(x, y) for x, y in zip(a.thetas, b.thetas))

    def test_diagnostics(self, chain):
        assert len(chain) == 2000
        assert chain.ess_d > 0
        for k in ("d", "block", "birth", "death"):
            assert 0 < chain.acceptance[k] < 1
        assert sum(chain.k_hist.values()) == len(chain)
        prior = PriorSpec(variant="fexp_beta")
        assert all(np.isfinite(log_prior_density(prior, p)) for p in chain.draws)

    def test_log_posterior_recomputed(self, chain, arfima_data):
        prior = PriorSpec(variant="fexp_beta")
        idx = np.random.default_rng(0).choice(len(chain), 100, replace=False)
        n = arfima_data.size
        for i in idx:
            p = chain.draws[i]
            lp = gauss_loglik(autocov(p, n), arfima_data) + log_prior_density(prior, p)
            assert lp == pytest.approx(chain.log_posterior[i], abs=1e-8)

    def test_thinning(self, arfima_data):
        s = run_mcmc(arfima_data[:32], PriorSpec(),
                     SamplerConfig(iterations=500, burn_in=100, thin=7, seed=1))
        assert len(s) == math.ceil(400 / 7)
        assert np.all(np.diff(s.iteration) == 7)

    def test_likelihood_failure_counted(self):
        t = _Target(np.ones(16), PriorSpec(), prior_only=False)
        assert t.loglik(0.2, np.array([800.0])) == -math.inf
        assert t.failures == 1

    def test_recovers_memory(self, chain):
        assert abs(estimate_d(chain).value - 0.3) < 0.15

    @pytest.mark.slow
    def test_prior_only_marginals(self):
        prior = PriorSpec(variant="fexp_beta", mu=1.5)
        s = run_mcmc(np.zeros(4), prior, SamplerConfig(iterations=61000, burn_in=1000, thin=20,
                                                      prior_only=True, seed=4))
        u = (s.d - prior.d_lo) / (prior.d_hi - prior.d_lo)
        assert stats.kstest(u, "uniform").pvalue > 0.01
        k = np.minimum(s.K, 4)
        pmf = stats.poisson.pmf(np.arange(4), prior.mu)
        pmf = np.append(pmf, 1 - pmf.sum())
        assert stats.chisquare(np.bincount(k, minlength=5), pmf * k.size).pvalue > 0.01

    @pytest.mark.slow
    def test_white_noise_memory(self):
        prior = PriorSpec(variant="fexp_beta")
        X = sample(SimRequest(Fexp(FexpParams(0.0, [-np.log(2 * np.pi)])), 512, replicates=10,
                              seed=21))
        hits = 0
        for r, x in enumerate(X):
            s = run_mcmc(x, prior, SamplerConfig(iterations=2500, burn_in=1000, seed=r))
            hits += abs(estimate_d(s).value) <= 0.1
        assert hits >= 9

    def test_csv(self, chain, tmp_path):
        path = tmp_path / "samples.csv"
        chain.to_csv(path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        kmax = chain.K.max()
        assert rows[0] == ["iter", "K", "d"] + [f"theta_{j}" for j in range(kmax + 1)] + \
            ["log_posterior"]
        assert len(rows) == len(chain) + 1
        first = rows[1]
        K = int(first[1])
        assert first[3 + K + 1: 3 + kmax + 1] == [""] * (kmax - K)


def two_point(p, c):
    th = np.array(p.theta)
    th[0] += math.log(c)
    return PosteriorSamples.from_draws([p, FexpParams(p.d, th)])


class TestEstimators:
    def test_estimate_d_trivial(self):
        s = PosteriorSamples.from_draws([FexpParams(0.3, [0.0])] * 5)
        assert estimate_d(s).value == pytest.approx(0.3)
        s = PosteriorSamples.from_draws([FexpParams(0.1, [0.0]), FexpParams(0.3, [0.0])])
        assert estimate_d(s).value == pytest.approx(0.2)
        assert isinstance(estimate_d(s), Estimate)

    def test_empty(self):
        s = PosteriorSamples.from_draws([])
        for fn in (estimate_d, log_mean_params):
            with pytest.raises(ValueError):
                fn(s)
        with pytest.raises(ValueError):
            estimate_f_log(s, GRID)
        with pytest.raises(ValueError):
            posterior_prob(s, lambda p: True)

    def test_grid_with_zero(self, chain):
        with pytest.raises(ValueError):
            estimate_f_log(chain, [0.0, 1.0])

    def test_single_draw(self):
        p = FexpParams(0.25, [0.3, -0.2, 0.1])
        s = PosteriorSamples.from_draws([p])
        np.testing.assert_allclose(estimate_f_log(s, GRID), eval_fexp(p, GRID), rtol=1e-12)
        np.testing.assert_allclose(estimate_f_h(s, GRID), eval_fexp(p, GRID), rtol=1e-12)

    @pytest.mark.parametrize("c", [0.2, 3.0])
    def test_geometric_mean_pair(self, c):
        p = FexpParams(0.1, [0.2, 0.4])
        s = two_point(p, c)
        ref = math.sqrt(c) * eval_fexp(p, GRID)
        np.testing.assert_allclose(estimate_f_log(s, GRID), ref, rtol=1e-12)
        np.testing.assert_allclose(estimate_f_h(s, GRID), ref, rtol=1e-12)

    def test_h_estimate_between_draws(self, chain):
        f = np.exp(chain.log_spectra(GRID))
        fh = estimate_f_h(chain, GRID)
        assert np.all(fh >= f.min(axis=0) * (1 - 1e-12))
        assert np.all(fh <= f.max(axis=0) * (1 + 1e-12))

    def test_hloss_spectral_fn(self, chain):
        h = HLossEstimate(chain)
        np.testing.assert_allclose(h(GRID), estimate_f_h(chain, GRID), rtol=1e-10)
        assert h.memory == pytest.approx(0.5 * (chain.d.max() + chain.d.min()))
        assert np.all(np.isfinite(h.smooth(np.array([0.0, 1e-8, 1.0]))))

    def test_log_mean_params(self, chain):
        p = log_mean_params(chain)
        np.testing.assert_allclose(np.log(eval_fexp(p, GRID)), np.log(estimate_f_log(chain, GRID)),
                                   rtol=1e-10)

    def test_posterior_prob(self, chain):
        assert posterior_prob(chain, lambda p: True).value == 1.0
        assert posterior_prob(chain, lambda p: False).value == 0.0
        e = posterior_prob(chain, lambda p: p.d > estimate_d(chain).value)
        assert 0 < e.value < 1 and e.stderr > 0


class TestEss:
    def test_iid(self, rng):
        x = rng.normal(size=4000)
        assert 3000 < effective_sample_size(x) < 5500

    def test_ar1(self, rng):
        phi = 0.9
        e = rng.normal(size=20000)
        x = np.empty_like(e)
        x[0] = e[0]
        for i in range(1, e.size):
            x[i] = phi * x[i - 1] + e[i]
        expect = e.size * (1 - phi) / (1 + phi)
        assert effective_sample_size(x) == pytest.approx(expect, rel=0.3)


class TestWhittle:
    def test_scaling_identity(self, arfima_data):
        f = Fexp(FexpParams(0.2, [0.1, 0.3]))
        c = 2.5
        lam, I = periodogram(arfima_data)
        fv = eval_fexp(f.params, lam)
        expect = whittle_loglik(arfima_data, f) - np.sum(np.log(c) + (1 / c - 1) * I / fv)
        assert whittle_loglik(arfima_data, f.scaled(c)) == pytest.approx(expect, rel=1e-12)

    def test_white_noise_maximiser(self, rng):
        x = rng.normal(size=301) * 1.7
        lam, I = periodogram(x)

        def neg(log_s2):
            s2 = math.exp(log_s2)
            return -whittle_loglik(x, FexpParams(0.0, [math.log(s2 / (2 * math.pi))]))

        best = math.exp(optimize.minimize_scalar(neg, bounds=(-5, 5), method="bounded",
                                                 options={"xatol": 1e-10}).x)
        assert best == pytest.approx(2 * math.pi * I.mean(), rel=1e-6)

    def test_exact_and_whittle_ratios_converge(self):
        f1, f2 = FexpParams(0.0, [0.0, 0.5]), FexpParams(0.0, [0.1, 0.3, -0.1])
        gaps = []
        for n in (128, 256, 512):
            X = sample(SimRequest(Fexp(f1), n, replicates=20, seed=n))
            g1, g2 = autocov(f1, n), autocov(f2, n)
            diff = [abs((gauss_loglik(g1, x) - gauss_loglik(g2, x))
                        - (whittle_loglik(x, f1) - whittle_loglik(x, f2))) / n for x in X]
            gaps.append(np.mean(diff))
        assert gaps[0] > gaps[1] > gaps[2]

    def test_short_series(self):
        with pytest.raises(ValueError):
            whittle_loglik(np.ones(3), FexpParams(0.0, [0.0]))
