"""Trans-dimensional MCMC for the FEXP posterior and the Bayes estimators.

The target is

    pi(K, d, theta | x)  propto  phi_{f(d, theta)}(x) * prior(K, d, theta),

with phi the exact zero-mean Gaussian density of x under T_n(f).  Each
iteration runs

1. a random walk on u = logit((d - lo) / (hi - lo)), scalar, adapted to
   acceptance 0.44;
2. a joint random walk on (u, theta_0..theta_K), whose covariance is
   learned per model order K during burn-in (scaled 2.38^2 / dim, adapted to
   acceptance 0.23);
3. with probability ``scale_rate``, a multiplicative move
   theta_j -> theta_j exp(s z) on one coordinate j >= 1 (a random walk on
   log|theta_j|, Jacobian included), which reaches the near-zero spikes of
   the Dirichlet prior that additive steps cannot; 30% of these steps are
   five times longer so the walk crosses many decades quickly;
4. with probability ``jump_rate``, a birth (append theta_{K+1} ~ N(0, s^2))
   or death (drop theta_K) move, each proposed with probability 1/2.

All adaptation stops at the end of burn-in, so retained draws come from a
fixed, reversible kernel.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from .prior import PriorSpec, birth_scale, log_prior_raw, sample_prior
from .spectral import (
    AutocovError,
    FexpParams,
    SpectralFn,
    _fexp_autocov,
    _log_abs_one_minus_exp,
    as_spectral,
    fourier_grid,
    log_spectrum_grid,
)
from .toeplitz import PD_FLOOR, _durbin_loglik_terms

__all__ = [
    "Estimate",
    "HLossEstimate",
    "PosteriorSamples",
    "SamplerConfig",
    "effective_sample_size",
    "estimate_d",
    "estimate_f_h",
    "estimate_f_log",
    "log_mean_params",
    "periodogram",
    "posterior_prob",
    "run_mcmc",
    "whittle_loglik",
]


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int = 6000
    burn_in: int = 2000
    thin: int = 1
    d_step: Optional[float] = None
    theta_step: Optional[float] = None
    jump_rate: float = 1.0
    scale_rate: Optional[float] = None
    scale_step: float = 1.0
    birth_sd: Optional[float] = None
    adapt_window: int = 50
    target_accept_d: float = 0.44
    target_accept_block: float = 0.23
    seed: int = 0
    prior_only: bool = False

    def __post_init__(self):
        if not self.iterations > self.burn_in >= 0:
            raise ValueError("need iterations > burn_in >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        for name in ("d_step", "theta_step", "birth_sd"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.jump_rate <= 1:
            raise ValueError("jump_rate must lie in [0, 1]")
        if self.scale_rate is not None and not 0 <= self.scale_rate <= 1:
            raise ValueError("scale_rate must lie in [0, 1]")
        if not self.scale_step > 0:
            raise ValueError("scale_step must be positive")
        if self.adapt_window < 1:
            raise ValueError("adapt_window must be >= 1")
        if not (0 < self.target_accept_d < 1 and 0 < self.target_accept_block < 1):
            raise ValueError("target acceptance rates must lie in (0, 1)")


def effective_sample_size(chain) -> float:
    """Geyer's initial monotone sequence estimate of the ESS."""
    x = np.asarray(chain, dtype=float)
    m = x.size
    if m < 4:
        return float(m)
    x = x - x.mean()
    var = np.dot(x, x) / m
    if var <= 0:
        return float(m)
    nfft = 1 << (2 * m - 1).bit_length()
    fx = np.fft.rfft(x, nfft)
    acf = np.fft.irfft(fx * np.conj(fx), nfft)[:m] / (m * var)
    tau = -1.0
    prev = np.inf
    for k in range(0, m - 1, 2):
        pair = acf[k] + acf[k + 1]
        if pair <= 0:
            break
        pair = min(pair, prev)
        tau += 2.0 * pair
        prev = pair
    return float(m / max(tau, 1.0 / m))


@dataclass
class PosteriorSamples:
    """Retained draws and chain diagnostics."""

    d: np.ndarray
    thetas: list
    log_posterior: np.ndarray
    log_likelihood: np.ndarray
    iteration: np.ndarray
    acceptance: dict = field(default_factory=dict)
    failures: int = 0

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        if self.d.size != len(self.thetas):
            raise ValueError("d and thetas differ in length")

    @classmethod
    def from_draws(cls, draws, log_posterior=None) -> "PosteriorSamples":
        draws = list(draws)
        m = len(draws)
        lp = np.zeros(m) if log_posterior is None else np.asarray(log_posterior, dtype=float)
        return cls(
            d=np.array([p.d for p in draws]),
            thetas=[np.asarray(p.theta) for p in draws],
            log_posterior=lp,
            log_likelihood=np.zeros(m),
            iteration=np.arange(m),
        )

    def __len__(self):
        return self.d.size

    @property
    def draws(self) -> list:
        return [FexpParams(d, t) for d, t in zip(self.d, self.thetas)]

    @property
    def K(self) -> np.ndarray:
        return np.array([t.size - 1 for t in self.thetas])

    @property
    def k_hist(self) -> dict:
        ks, counts = np.unique(self.K, return_counts=True)
        return {int(k): int(c) for k, c in zip(ks, counts)}

    @property
    def ess_d(self) -> float:
        return effective_sample_size(self.d)

    def theta_matrix(self) -> np.ndarray:
        """Draws x (Kmax + 1) array of theta, zero-padded beyond each K."""
        kmax = max(t.size for t in self.thetas)
        out = np.zeros((len(self.thetas), kmax))
        for i, t in enumerate(self.thetas):
            out[i, : t.size] = t
        return out

    def log_spectra(self, grid) -> np.ndarray:
        """Draws x grid matrix of log f(lambda)."""
        lam = np.asarray(grid, dtype=float)
        if np.any(lam == 0):
            raise ValueError("grid must exclude lambda = 0")
        if np.any(np.abs(lam) > np.pi):
            raise ValueError("grid outside [-pi, pi]")
        Th = self.theta_matrix()
        C = np.cos(np.outer(np.arange(Th.shape[1]), lam))
        return Th @ C - 2.0 * np.outer(self.d, _log_abs_one_minus_exp(lam))

    def to_csv(self, path) -> None:
        """Columns: iter, K, d, theta_0..theta_Kmax (blank-padded), log_posterior."""
        kmax = max(t.size for t in self.thetas) - 1
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "K", "d"] + [f"theta_{j}" for j in range(kmax + 1)]
                       + ["log_posterior"])
            for it, d, t, lp in zip(self.iteration, self.d, self.thetas, self.log_posterior):
                pad = [repr(float(v)) for v in t] + [""] * (kmax + 1 - t.size)
                w.writerow([int(it), t.size - 1, repr(float(d))] + pad + [repr(float(lp))])


class _Target:
    """Log-likelihood and log-prior evaluation on raw (d, theta)."""

    def __init__(self, x, prior: PriorSpec, prior_only: bool):
        self.x = np.ascontiguousarray(x, dtype=float)
        self.n = self.x.size
        self.prior = prior
        self.prior_only = prior_only
        self.const = 0.5 * self.n * math.log(2.0 * math.pi)
        self.failures = 0

    def loglik(self, d, theta) -> float:
        if self.prior_only:
            return 0.0
        try:
            with np.errstate(over="raise", invalid="raise"):
                g, _ = _fexp_autocov(d, theta, self.n, 1e-10)
        except (AutocovError, FloatingPointError, OverflowError):
            self.failures += 1
            return -math.inf
        if not (g[0] > 0 and np.isfinite(g[0])):
            self.failures += 1
            return -math.inf
        logdet, quad, fail = _durbin_loglik_terms(g, self.x, PD_FLOOR * g[0])
        if fail >= 0:
            self.failures += 1
            return -math.inf
        return -0.5 * quad - 0.5 * logdet - self.const

    def logprior(self, d, theta) -> float:
        return log_prior_raw(self.prior, d, theta)


def _sigmoid(u):
    if u >= 0:
        return 1.0 / (1.0 + math.exp(-u))
    e = math.exp(u)
    return e / (1.0 + e)


class _BlockAdapter:
    """Per-K running covariance of (u, theta) with Robbins-Monro scale."""

    MIN_COUNT = 200

    def __init__(self, d_step, theta_step):
        self.d_step = d_step
        self.theta_step = theta_step
        self.stats = {}
        self.log_scale = {}
        self.chol = {}
        self.updates = {}

    def _diag(self, K):
        s = np.full(K + 2, self.theta_step)
        s[0] = self.d_step
        return np.diag(s)

    def factor(self, K):
        if K not in self.chol:
            self.chol[K] = (self._diag(K), False)
        return self.chol[K][0], math.exp(self.log_scale.get(K, 0.0))

    def observe(self, K, z):
        cnt, mean, m2 = self.stats.get(K, (0, np.zeros(z.size), np.zeros((z.size, z.size))))
        cnt += 1
        delta = z - mean
        mean = mean + delta / cnt
        m2 = m2 + np.outer(delta, z - mean)
        self.stats[K] = (cnt, mean, m2)

    def refresh(self):
        for K, (cnt, _, m2) in self.stats.items():
            dim = K + 2
            if cnt < max(self.MIN_COUNT, 20 * dim):
                continue
            cov = m2 / (cnt - 1)
            cov = (2.38**2 / dim) * cov + 1e-10 * np.eye(dim)
            try:
                L = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                continue
            if not self.chol.get(K, (None, False))[1]:
                self.log_scale[K] = 0.0
            self.chol[K] = (L, True)

    def adapt(self, K, accept_prob, target):
        k = self.updates.get(K, 0) + 1
        self.updates[K] = k
        self.log_scale[K] = self.log_scale.get(K, 0.0) + (accept_prob - target) / math.sqrt(k)


def run_mcmc(x, prior: PriorSpec, cfg: SamplerConfig) -> PosteriorSamples:
    """Sample the FEXP posterior given data ``x`` (zero mean)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 1:
        raise ValueError("empty data")
    rng = np.random.default_rng(np.random.SeedSequence(int(cfg.seed)))
    tgt = _Target(x, prior, cfg.prior_only)
    lo, hi = prior.d_lo, prior.d_hi
    width = hi - lo

    if cfg.prior_only:
        d_step = cfg.d_step or 1.5
        theta_step = cfg.theta_step or 0.5
    else:
        d_step = cfg.d_step or min(1.0, 8.0 / math.sqrt(n))
        theta_step = cfg.theta_step or 1.5 / math.sqrt(n)

    scale_rate = cfg.scale_rate
    if scale_rate is None:
        scale_rate = 1.0 if cfg.prior_only else 0.2

    def bsd(K_new):
        if cfg.birth_sd is not None:
            return cfg.birth_sd
        s = birth_scale(prior, K_new)
        return s if cfg.prior_only else min(s, 4.0 / math.sqrt(n))

    # initial state
    if prior.variant == "point" or cfg.prior_only:
        p0 = sample_prior(prior, rng).params
        d, theta = p0.d, np.array(p0.theta)
    else:
        d = min(max(0.0, lo + 1e-3), hi - 1e-3)
        theta = np.array([math.log(max(np.var(x), 1e-300) / (2.0 * math.pi))])
        if not np.isfinite(tgt.logprior(d, theta)):
            p0 = sample_prior(prior, rng).params
            d, theta = p0.d, np.array(p0.theta)
    ll = tgt.loglik(d, theta)
    lp = tgt.logprior(d, theta)
    for _ in range(1000):
        if np.isfinite(ll + lp):
            break
        p0 = sample_prior(prior, rng).params
        d, theta = p0.d, np.array(p0.theta)
        ll, lp = tgt.loglik(d, theta), tgt.logprior(d, theta)
    else:
        raise RuntimeError("could not find a starting point with finite posterior")

    def logit_of(dv):
        w = (dv - lo) / width
        w = min(max(w, 1e-300), 1 - 1e-16)
        return math.log(w) - math.log1p(-w)

    def log_jac(u):
        w = _sigmoid(u)
        return math.log(max(w * (1.0 - w), 1e-300))

    log_d_step = math.log(d_step)
    adapter = _BlockAdapter(d_step, theta_step)
    acc = {"d": [0, 0], "block": [0, 0], "scale": [0, 0], "birth": [0, 0], "death": [0, 0]}
    d_updates = 0

    keep_d, keep_t, keep_lp, keep_ll, keep_it = [], [], [], [], []

    for it in range(cfg.iterations):
        adapting = it < cfg.burn_in
        counting = not adapting

        # 1. scalar move on d in logit space
        u = logit_of(d)
        u_new = u + math.exp(log_d_step) * rng.standard_normal()
        d_new = lo + width * _sigmoid(u_new)
        lp_new = tgt.logprior(d_new, theta)
        log_a = -math.inf
        if np.isfinite(lp_new):
            ll_new = tgt.loglik(d_new, theta)
            log_a = (ll_new + lp_new + log_jac(u_new)) - (ll + lp + log_jac(u))
        a_prob = math.exp(min(0.0, log_a)) if log_a > -math.inf else 0.0
        accepted = rng.uniform() < a_prob
        if accepted:
            d, ll, lp = d_new, ll_new, lp_new
        if counting:
            acc["d"][0] += accepted
            acc["d"][1] += 1
        if adapting:
            d_updates += 1
            log_d_step += (a_prob - cfg.target_accept_d) / math.sqrt(d_updates)

        # 2. joint block move on (u, theta)
        K = theta.size - 1
        L, scale = adapter.factor(K)
        u = logit_of(d)
        z = np.concatenate(([u], theta))
        z_new = z + scale * (L @ rng.standard_normal(K + 2))
        d_new = lo + width * _sigmoid(z_new[0])
        th_new = z_new[1:]
        lp_new = tgt.logprior(d_new, th_new)
        log_a = -math.inf
        if np.isfinite(lp_new):
            ll_new = tgt.loglik(d_new, th_new)
            log_a = (ll_new + lp_new + log_jac(z_new[0])) - (ll + lp + log_jac(u))
        a_prob = math.exp(min(0.0, log_a)) if log_a > -math.inf else 0.0
        accepted = rng.uniform() < a_prob
        if accepted:
            d, theta, ll, lp = d_new, th_new, ll_new, lp_new
        if counting:
            acc["block"][0] += accepted
            acc["block"][1] += 1
        if adapting:
            adapter.adapt(K, a_prob, cfg.target_accept_block)

        # 3. log-scale move on one theta_j, j >= 1
        K = theta.size - 1
        if K > 0 and scale_rate > 0 and rng.uniform() < scale_rate:
            j = 1 + int(rng.integers(K))
            # occasional long jumps cross the many decades of the spikes near 0
            step = cfg.scale_step * rng.standard_normal() * (5.0 if rng.uniform() < 0.3 else 1.0)
            th_new = theta.copy()
            th_new[j] *= math.exp(step)
            lp_new = tgt.logprior(d, th_new)
            accepted = False
            if np.isfinite(lp_new):
                ll_new = tgt.loglik(d, th_new)
                # |d theta_j' / d log|theta_j'|| = |theta_j'|
                log_a = ll_new + lp_new - ll - lp + step
                accepted = math.log(rng.uniform()) < log_a
            if accepted:
                theta, ll, lp = th_new, ll_new, lp_new
            if counting:
                acc["scale"][0] += accepted
                acc["scale"][1] += 1

        # 4. birth / death
        if cfg.jump_rate > 0 and rng.uniform() < cfg.jump_rate:
            K = theta.size - 1
            if rng.uniform() < 0.5:
                s = bsd(K + 1)
                new = s * rng.standard_normal()
                th_new = np.append(theta, new)
                log_q = -0.5 * (new / s) ** 2 - math.log(s) - 0.5 * math.log(2 * math.pi)
                lp_new = tgt.logprior(d, th_new)
                log_a = -math.inf
                if np.isfinite(lp_new):
                    ll_new = tgt.loglik(d, th_new)
                    log_a = ll_new + lp_new - ll - lp - log_q
                kind = "birth"
            elif K > 0:
                s = bsd(K)
                old = theta[-1]
                th_new = theta[:-1].copy()
                log_q = -0.5 * (old / s) ** 2 - math.log(s) - 0.5 * math.log(2 * math.pi)
                lp_new = tgt.logprior(d, th_new)
                log_a = -math.inf
                if np.isfinite(lp_new):
                    ll_new = tgt.loglik(d, th_new)
                    log_a = ll_new + lp_new - ll - lp + log_q
                kind = "death"
            else:
                kind = "death"
                log_a = -math.inf
            accepted = log_a > -math.inf and math.log(rng.uniform()) < log_a
            if accepted:
                theta, ll, lp = th_new, ll_new, lp_new
            if counting:
                acc[kind][0] += accepted
                acc[kind][1] += 1

        if adapting:
            adapter.observe(theta.size - 1, np.concatenate(([logit_of(d)], theta)))
            if (it + 1) % cfg.adapt_window == 0:
                adapter.refresh()
        elif (it - cfg.burn_in) % cfg.thin == 0:
            keep_d.append(d)
            keep_t.append(theta.copy())
            keep_lp.append(ll + lp)
            keep_ll.append(ll)
            keep_it.append(it)

    acceptance = {k: (v[0] / v[1] if v[1] else float("nan")) for k, v in acc.items()}
    return PosteriorSamples(
        d=np.array(keep_d),
        thetas=keep_t,
        log_posterior=np.array(keep_lp),
        log_likelihood=np.array(keep_ll),
        iteration=np.array(keep_it),
        acceptance=acceptance,
        failures=tgt.failures,
    )


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float

    def __float__(self):
        return self.value


def _require(s: PosteriorSamples):
    if len(s) == 0:
        raise ValueError("no posterior draws")


def estimate_d(s: PosteriorSamples) -> Estimate:
    """Posterior mean of d with Monte Carlo standard error (ESS-based)."""
    _require(s)
    m = s.d.mean()
    if len(s) < 2 or np.all(s.d == s.d[0]):
        return Estimate(float(m), 0.0)
    return Estimate(float(m), float(s.d.std(ddof=1) / math.sqrt(s.ess_d)))


def log_mean_params(s: PosteriorSamples) -> FexpParams:
    """FEXP point whose log-spectrum is the posterior mean log-spectrum.

    log f is linear in (d, theta), so exp(E[log f]) is itself FEXP with
    the averaged (zero-padded) coefficients.
    """
    _require(s)
    return FexpParams(float(s.d.mean()), s.theta_matrix().mean(axis=0))


def estimate_f_log(s: PosteriorSamples, grid) -> np.ndarray:
    """exp(E[log f(lambda) | x]) on ``grid``."""
    _require(s)
    return np.exp(s.log_spectra(grid).mean(axis=0))


def estimate_f_h(s: PosteriorSamples, grid) -> np.ndarray:
    """sqrt(E[f(lambda) | x] / E[1/f(lambda) | x]) on ``grid``."""
    _require(s)
    lf = s.log_spectra(grid)
    return np.exp(0.5 * (logsumexp(lf, axis=0) - logsumexp(-lf, axis=0)))


class HLossEstimate(SpectralFn):
    """The h-loss Bayes estimate as a spectral density.

    Near 0 it behaves like |lambda|^{-(d_max + d_min)}, so ``memory`` is
    (d_max + d_min) / 2 and ``smooth`` stays bounded at lambda = 0.
    """

    def __init__(self, s: PosteriorSamples):
        _require(s)
        self._d = s.d.copy()
        self._theta = s.theta_matrix()
        self.dmax = float(self._d.max())
        self.dmin = float(self._d.min())
        self.memory = 0.5 * (self.dmax + self.dmin)

    def smooth(self, lam):
        lam = np.abs(np.atleast_1d(np.asarray(lam, dtype=float)))
        C = np.cos(np.outer(np.arange(self._theta.shape[1]), lam))
        # log of the FEXP smooth factor for every draw
        ratio = np.log(np.sinc(lam / (2.0 * np.pi)))
        log_s = self._theta @ C - 2.0 * np.outer(self._d, ratio)
        with np.errstate(divide="ignore", invalid="ignore"):
            loglam = np.log(lam)
            up = np.outer(self.dmax - self._d, 2.0 * loglam)
            dn = np.outer(self._d - self.dmin, 2.0 * loglam)
        up = np.where((self.dmax - self._d)[:, None] == 0, 0.0, up)
        dn = np.where((self._d - self.dmin)[:, None] == 0, 0.0, dn)
        a = logsumexp(up + log_s, axis=0)
        b = logsumexp(dn - log_s, axis=0)
        out = np.exp(0.5 * (a - b))
        return out if np.ndim(out) and out.size > 1 else float(out[0])


def posterior_prob(s: PosteriorSamples, predicate: Callable[[FexpParams], bool]) -> Estimate:
    """Fraction of draws satisfying ``predicate``, with ESS-based binomial SE."""
    _require(s)
    ind = np.array([bool(predicate(p)) for p in s.draws], dtype=float)
    p = float(ind.mean())
    if p in (0.0, 1.0):
        return Estimate(p, 0.0)
    return Estimate(p, math.sqrt(p * (1 - p) / effective_sample_size(ind)))


def periodogram(x) -> tuple:
    """(lambda_j, I(lambda_j)) for j = 1..floor((n-1)/2), I = |DFT|^2 / (2 pi n)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    J = (n - 1) // 2
    dft = np.fft.rfft(x)[1 : J + 1]
    lam = 2.0 * np.pi * np.arange(1, J + 1) / n
    return lam, np.abs(dft) ** 2 / (2.0 * np.pi * n)


def whittle_loglik(x, f) -> float:
    """Whittle pseudo-log-likelihood -sum_j [log f(lambda_j) + I(lambda_j) / f(lambda_j)].

    Diagnostic only; the additive constant is dropped.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 4:
        raise ValueError("need n >= 4")
    lam, I = periodogram(x)
    f = as_spectral(f)
    fv = np.asarray(f(lam))
    return float(-np.sum(np.log(fv) + I / fv))
