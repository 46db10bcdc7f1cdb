import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fexpbayes import divergences as dv
from fexpbayes.spectral import Fexp, FexpParams, PowerLawTimesSmooth, Scaled, autocov
from fexpbayes.toeplitz import ToeplitzCov

from .conftest import random_fexp


def scaled_params(p, c):
    th = np.array(p.theta)
    th[0] += np.log(c)
    return FexpParams(p.d, th)


def dense_kl(f0, f, n):
    A = ToeplitzCov(autocov(f0, n)).dense()
    B = ToeplitzCov(autocov(f, n)).dense()
    M = A @ np.linalg.inv(B)
    _, ld = np.linalg.slogdet(M)
    return 0.5 * (np.trace(M) - n - ld) / n


def quad_full(fn):
    """Plain adaptive quadrature over (0, pi], doubled; independent of the module."""
    val, _ = integrate.quad(fn, 0.0, np.pi, limit=800, epsabs=1e-12, epsrel=1e-12)
    return 2.0 * val


class TestFiniteN:
    def test_self_zero(self, fexp_pair):
        f0, _ = fexp_pair
        assert abs(dv.kl_n(f0, f0, 64)) < 1e-10
        assert abs(dv.b_n(f0, f0, 32)) < 1e-10

    @pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
    @pytest.mark.parametrize("n", [8, 64, 256])
    def test_scaling_family(self, fexp_pair, c, n):
        f0, _ = fexp_pair
        fc = scaled_params(f0, c)
        assert dv.kl_n(f0, fc, n) == pytest.approx(0.5 * (1 / c - 1 + np.log(c)), abs=1e-10)
        assert dv.b_n(f0, fc, n) == pytest.approx((1 / c - 1) ** 2, abs=1e-10)
        hn = dv.h_n(f0, fc, n)
        assert hn == pytest.approx(0.5 * (c + 1 / c - 2), abs=1e-10)

    def test_dense_oracle(self, fexp_pair):
        f0, f1 = fexp_pair
        assert dv.kl_n(f0, f1, 32) == pytest.approx(dense_kl(f0, f1, 32), rel=1e-8)

    def test_b_n_dense(self, fexp_pair):
        f0, f1 = fexp_pair
        A = ToeplitzCov(autocov(f0, 64)).dense()
        B = ToeplitzCov(autocov(f1, 64)).dense()
        D = np.eye(64) - A @ np.linalg.inv(B)
        assert dv.b_n(f0, f1, 64) == pytest.approx(np.trace(D @ D) / 64, rel=1e-8)

    def test_symmetrised(self, fexp_pair):
        f0, f1 = fexp_pair
        assert dv.h_n(f0, f1, 48) == pytest.approx(dv.h_n(f1, f0, 48), rel=1e-12)
        k01, k10 = dv.kl_n(f0, f1, 48), dv.kl_n(f1, f0, 48)
        assert dv.d_n(f0, f1, 48) == pytest.approx(min(k01, k10), rel=1e-12)

    def test_stochastic_mode(self, fexp_pair):
        f0, f1 = fexp_pair
        exact = dv.kl_n(f0, f1, 128)
        est = dv.kl_n(f0, f1, 128, mode="stochastic", probes=512, seed=3)
        assert est == pytest.approx(exact, abs=0.05 * max(exact, 0.01))

    def test_cap(self, fexp_pair):
        with pytest.raises(ValueError):
            dv.kl_n(*fexp_pair, 513)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        f0 = random_fexp(rng)
        f1 = random_fexp(rng, d_range=(f0.d - 0.1, f0.d + 0.1))
        r = dv.divergence_report(f0, f1, 24)
        for v in (r.kl_n, r.kl_n_reverse, r.h_n, r.d_n, r.b_n, r.l):
            assert v >= -1e-12
        assert r.h_n == pytest.approx(r.kl_n + r.kl_n_reverse, rel=1e-14)


class TestIntegralForms:
    def test_self_zero(self, fexp_pair):
        f0, _ = fexp_pair
        assert abs(dv.kl_inf(f0, f0)) < 1e-12
        assert abs(dv.h(f0, f0)) < 1e-12
        assert abs(dv.b(f0, f0)) < 1e-12
        assert dv.log_l2(f0, f0) == 0.0

    @pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
    def test_scaling_family(self, fexp_pair, c):
        f0, _ = fexp_pair
        fc = scaled_params(f0, c)
        k = 1 / c - 1 + np.log(c)
        assert dv.kl_inf(f0, fc, "paper") == pytest.approx(2 * k, rel=1e-9)
        assert dv.kl_inf(f0, fc, "szego") == pytest.approx(0.5 * k, rel=1e-9)
        assert dv.h(f0, fc, "paper") == pytest.approx(c + 1 / c - 2, rel=1e-9)
        assert dv.b(f0, fc) == pytest.approx((1 / c - 1) ** 2, rel=1e-9)
        assert dv.log_l2(f0, fc) == pytest.approx(2 * np.pi * np.log(c) ** 2, rel=1e-12)
        # "paper" mode constants over the finite-n forms
        assert dv.kl_inf(f0, fc, "paper") / dv.kl_n(f0, fc, 16) == pytest.approx(4.0, rel=1e-9)
        assert dv.h(f0, fc, "paper") / dv.h_n(f0, fc, 16) == pytest.approx(2.0, rel=1e-9)

    def test_bad_mode(self, fexp_pair):
        with pytest.raises(ValueError):
            dv.kl_inf(*fexp_pair, constant_mode="other")

    def test_against_plain_quadrature(self):
        f0, f1 = FexpParams(0.25, [0.1, 0.3]), FexpParams(0.2, [-0.1, 0.1, 0.05])
        a, b = Fexp(f0), Fexp(f1)
        r = lambda x: a(x) / b(x)
        assert dv.kl_inf(f0, f1, "paper") == pytest.approx(
            quad_full(lambda x: r(x) - 1 - np.log(r(x))) / np.pi, rel=1e-7)
        assert dv.h(f0, f1, "paper") == pytest.approx(
            quad_full(lambda x: r(x) + 1 / r(x) - 2) / (2 * np.pi), rel=1e-7)
        assert dv.b(f0, f1) == pytest.approx(
            quad_full(lambda x: (r(x) - 1) ** 2) / (2 * np.pi), rel=1e-7)
        assert dv.mean_ratio(f0, f1) == pytest.approx(quad_full(r) / (2 * np.pi), rel=1e-8)

    def test_kl_n_near_szego_limit(self, fexp_pair):
        f0, f1 = fexp_pair
        lim = dv.kl_inf(f0, f1, "szego")
        assert dv.kl_n(f0, f1, 512) == pytest.approx(lim, rel=0.1)

    def test_convergence_monotone(self):
        f0, f1 = FexpParams(0.3, [0.0, 0.4, -0.1]), FexpParams(0.22, [0.2, 0.1])
        kl_lim, h_lim = dv.kl_inf(f0, f1, "szego"), dv.h(f0, f1, "szego")
        ns = (64, 128, 256, 512)
        ek = [abs(dv.kl_n(f0, f1, n) - kl_lim) for n in ns]
        eh = [abs(dv.h_n(f0, f1, n) - h_lim) for n in ns]
        assert all(b < a for a, b in zip(ek, ek[1:]))
        assert all(b < a for a, b in zip(eh, eh[1:]))

    def test_memory_gap_warns(self):
        with pytest.warns(RuntimeWarning):
            dv.h(FexpParams(0.3, [0.0]), FexpParams(0.0, [0.0]))

    def test_d_inf(self, fexp_pair):
        f0, f1 = fexp_pair
        assert dv.d_inf(f0, f1) == min(dv.kl_inf(f0, f1), dv.kl_inf(f1, f0))


class TestLogL2:
    @pytest.mark.parametrize("K0,K1", [(0, 0), (2, 0), (1, 3), (4, 4)])
    def test_closed_form_vs_quadrature(self, rng, K0, K1):
        f, g = random_fexp(rng, K=K0), random_fexp(rng, K=K1)
        assert f.d != g.d
        a, b = Fexp(f), Fexp(g)
        # generic path of the module and a direct quadrature of the definition
        generic = dv.log_l2(PowerLawTimesSmooth(f.d, a.smooth), PowerLawTimesSmooth(g.d, b.smooth))
        direct = quad_full(lambda x: (a.log(x) - b.log(x)) ** 2)
        closed = dv.log_l2(f, g)
        assert closed == pytest.approx(generic, rel=1e-6)
        assert closed == pytest.approx(direct, rel=1e-6)

    def test_pure_memory(self):
        # only the d-term: pi * sum (2 dd / j)^2 = 4 pi dd^2 pi^2 / 6
        dd = 0.1
        v = dv.log_l2(FexpParams(dd, [0.0]), FexpParams(0.0, [0.0]))
        assert v == pytest.approx(4 * np.pi * dd**2 * np.pi**2 / 6, rel=1e-14)

    def test_scaled_generic(self, rng):
        f = Fexp(random_fexp(rng))
        assert dv.log_l2(Scaled(3.0, f), f) == pytest.approx(2 * np.pi * np.log(3.0) ** 2,
                                                             rel=1e-9)


class TestInequalities:
    def test_tiny_perturbation(self):
        f0 = FexpParams(0.2, [0.1, 0.3, -0.1])
        f = FexpParams(0.2, [0.1, 0.31, -0.1])
        r = dv.check_b_h_inequality(f0, f)
        assert 0 < r.h < 1e-3 and r.in_regime and r.holds and not r.degenerate

    def test_degenerate(self):
        f0 = FexpParams(0.2, [0.1])
        r = dv.check_b_h_inequality(f0, f0)
        assert r.degenerate and r.holds

    def test_outside_regime_reported(self):
        r = dv.check_b_h_inequality(FexpParams(0.0, [0.0, 1.5]), FexpParams(0.0, [0.0]))
        assert r.h > 0.05 and not r.in_regime
        assert np.isfinite(r.b) and np.isfinite(r.bound)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_h_dominates_l(self, seed):
        rng = np.random.default_rng(seed)
        f0 = random_fexp(rng)
        f1 = FexpParams(float(np.clip(f0.d + rng.uniform(-0.1, 0.1), -0.45, 0.45)),
                        rng.normal(0, 0.3, int(rng.integers(1, 5))))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert dv.h(f0, f1, "paper") >= dv.log_l2(f0, f1) / (2 * np.pi) - 1e-12
