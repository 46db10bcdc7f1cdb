"""FEXP spectral densities and their autocovariance sequences.

Spectral densities here follow the convention

    gamma(tau) = int_{-pi}^{pi} f(lambda) exp(i tau lambda) d lambda,

so white noise of variance sigma^2 has f = sigma^2 / (2 pi).  The FEXP
family is

    f(lambda) = |1 - exp(i lambda)|^{-2d} exp(sum_j theta_j cos(j lambda)),

with sigma^2 = 2 pi exp(theta_0) for the ARFIMA(0, d, 0) member.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev
from scipy import integrate, special

__all__ = [
    "AutocovError",
    "AutocovSeq",
    "Fexp",
    "FexpParams",
    "PoleError",
    "PowerLawTimesSmooth",
    "Scaled",
    "SmoothnessClassSpec",
    "SpectralFn",
    "arfima_autocov",
    "as_spectral",
    "autocov",
    "eval_fexp",
    "fexp_from_arfima",
    "fourier_grid",
    "in_class_S",
    "log_spectrum_grid",
    "quadrature_autocov",
]


class PoleError(ValueError):
    """Evaluation requested at the spectral pole lambda = 0."""


class AutocovError(RuntimeError):
    """Autocovariances could not be computed to the requested tolerance."""

    def __init__(self, msg: str, achieved: float = np.nan):
        super().__init__(msg)
        self.achieved = achieved


@dataclass(frozen=True, eq=False)
class FexpParams:
    """A point (d, K, theta_0..theta_K) of the FEXP model."""

    d: float
    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "d", float(self.d))
        if not (-0.5 < self.d < 0.5):
            raise ValueError(f"memory parameter d={self.d} outside (-1/2, 1/2)")
        if theta.size == 0:
            raise ValueError("theta must hold at least theta_0")
        if not (np.all(np.isfinite(theta)) and np.isfinite(self.d)):
            raise ValueError("FEXP parameters must be finite")

    @property
    def K(self) -> int:
        return self.theta.size - 1

    @property
    def sigma2(self) -> float:
        """Innovation variance 2 pi exp(theta_0) of the fractional part."""
        return 2.0 * np.pi * np.exp(self.theta[0])

    def __eq__(self, other):
        if not isinstance(other, FexpParams):
            return NotImplemented
        return self.d == other.d and np.array_equal(self.theta, other.theta)

    def __hash__(self):
        return hash((self.d, self.theta.tobytes()))

    def __repr__(self):
        return f"FexpParams(d={self.d!r}, theta={self.theta.tolist()!r})"


def fexp_from_arfima(d: float, sigma2: float = 1.0) -> FexpParams:
    """ARFIMA(0, d, 0) with innovation variance ``sigma2`` as a K = 0 FEXP point."""
    return FexpParams(d, [np.log(sigma2 / (2.0 * np.pi))])


@dataclass(frozen=True)
class SmoothnessClassSpec:
    """Parameters of the Sobolev-type class S(beta, L0), plus optional G/L bounds."""

    beta: float
    L0: float
    t: float | None = None
    m: float | None = None
    M: float | None = None
    L: float | None = None
    rho: float | None = None

    def __post_init__(self):
        if not (self.beta > 0 and self.L0 > 0):
            raise ValueError("beta and L0 must be positive")
        if self.t is not None and not (0 < self.t < 0.5):
            raise ValueError("t must lie in (0, 1/2)")
        if self.m is not None and self.M is not None and not (0 < self.m <= self.M):
            raise ValueError("need 0 < m <= M")
        if self.rho is not None and not (0 < self.rho <= 1):
            raise ValueError("rho must lie in (0, 1]")


def in_class_S(params: FexpParams, spec: SmoothnessClassSpec) -> bool:
    j = np.arange(params.theta.size)
    return bool(np.sum(params.theta**2 * (1.0 + j) ** (2 * spec.beta)) <= spec.L0)


@dataclass(frozen=True, eq=False)
class AutocovSeq:
    """Autocovariances gamma(0), ..., gamma(n-1)."""

    gamma: np.ndarray
    provenance: str = "analytic"
    tol_achieved: float = 0.0

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float).reshape(-1)
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        if g.size == 0 or not g[0] > 0:
            raise ValueError("gamma(0) must be positive")
        if np.any(np.abs(g) > g[0] * (1 + 1e-12)):
            raise ValueError("|gamma(tau)| exceeds gamma(0)")

    @property
    def n(self) -> int:
        return self.gamma.size

    def __len__(self):
        return self.gamma.size

    def scaled(self, c: float) -> "AutocovSeq":
        return AutocovSeq(c * self.gamma, self.provenance, abs(c) * self.tol_achieved)


def _check_domain(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if np.any(np.abs(lam) > np.pi):
        raise ValueError("frequency outside [-pi, pi]")
    return lam


def _log_abs_one_minus_exp(lam: np.ndarray) -> np.ndarray:
    # log|1 - e^{i lam}| = log(2 |sin(lam / 2)|)
    with np.errstate(divide="ignore"):
        return np.log(2.0 * np.abs(np.sin(lam / 2.0)))


def log_spectrum_grid(params: FexpParams, grid) -> np.ndarray:
    """Elementwise log f(lambda_i) for an FEXP point."""
    lam = _check_domain(grid)
    if params.d != 0 and np.any(lam == 0):
        raise PoleError("log-spectrum undefined at lambda = 0 when d != 0")
    out = chebyshev.chebval(np.cos(lam), params.theta)
    if params.d != 0:
        out = out - 2.0 * params.d * _log_abs_one_minus_exp(lam)
    return out


def eval_fexp(params: FexpParams, lam):
    """Evaluate the FEXP density; raises :class:`PoleError` at 0 when d > 0."""
    lam = _check_domain(lam)
    if params.d > 0 and np.any(lam == 0):
        raise PoleError("FEXP density has a pole at lambda = 0 for d > 0")
    short = np.exp(chebyshev.chebval(np.cos(lam), params.theta))
    if params.d == 0:
        out = short
    else:
        with np.errstate(divide="ignore"):
            out = (2.0 * np.abs(np.sin(lam / 2.0))) ** (-2.0 * params.d) * short
    return out if out.ndim else float(out)


def fourier_grid(n: int) -> np.ndarray:
    """Fourier frequencies 2 pi j / n for j = 1..floor(n/2)."""
    return 2.0 * np.pi * np.arange(1, n // 2 + 1) / n


class SpectralFn:
    """Symmetric spectral density f(lambda) = |lambda|^{-2 memory} * smooth(lambda).

    Subclasses provide ``memory`` and ``smooth``; ``smooth`` must be finite and
    positive on [0, pi] (including lambda = 0).
    """

    memory: float = 0.0

    def smooth(self, lam: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, lam):
        lam = _check_domain(lam)
        if self.memory > 0 and np.any(lam == 0):
            raise PoleError("spectral density has a pole at lambda = 0")
        a = np.abs(lam)
        with np.errstate(divide="ignore"):
            out = a ** (-2.0 * self.memory) * self.smooth(a)
        return out if np.ndim(out) else float(out)

    def log(self, lam) -> np.ndarray:
        lam = _check_domain(lam)
        if self.memory != 0 and np.any(lam == 0):
            raise PoleError("log-spectrum undefined at lambda = 0")
        a = np.abs(lam)
        with np.errstate(divide="ignore"):
            return -2.0 * self.memory * np.log(a) + np.log(self.smooth(a))

    def autocov(self, n: int, tol: float = 1e-10) -> AutocovSeq:
        return quadrature_autocov(self, n, tol)

    def scaled(self, c: float) -> "Scaled":
        return Scaled(c, self)


@dataclass(frozen=True, eq=False)
class Fexp(SpectralFn):
    params: FexpParams

    @property
    def memory(self) -> float:
        return self.params.d

    def smooth(self, lam):
        lam = np.asarray(lam, dtype=float)
        # |1 - e^{i lam}| / |lam| = sinc(lam / 2pi), continuous and positive on [-pi, pi]
        ratio = np.sinc(lam / (2.0 * np.pi))
        return ratio ** (-2.0 * self.params.d) * np.exp(
            chebyshev.chebval(np.cos(lam), self.params.theta)
        )

    def __call__(self, lam):
        return eval_fexp(self.params, lam)

    def log(self, lam):
        return log_spectrum_grid(self.params, lam)

    def autocov(self, n: int, tol: float = 1e-10) -> AutocovSeq:
        gamma, err = _fexp_autocov(self.params.d, self.params.theta, n, tol)
        return AutocovSeq(gamma, "analytic", err)


@dataclass(frozen=True, eq=False)
class PowerLawTimesSmooth(SpectralFn):
    """|lambda|^{-2d} s(lambda) for a user-supplied vectorised callback s."""

    d: float
    smooth_fn: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if not self.d < 0.5:
            raise ValueError("non-integrable pole: need d < 1/2")

    @property
    def memory(self) -> float:
        return self.d

    def smooth(self, lam):
        return np.asarray(self.smooth_fn(np.asarray(lam, dtype=float)), dtype=float)


@dataclass(frozen=True, eq=False)
class Scaled(SpectralFn):
    c: float
    inner: SpectralFn

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("scale factor must be positive")

    @property
    def memory(self) -> float:
        return self.inner.memory

    def smooth(self, lam):
        return self.c * self.inner.smooth(lam)

    def __call__(self, lam):
        out = self.inner(lam)
        return self.c * out

    def log(self, lam):
        return np.log(self.c) + self.inner.log(lam)

    def autocov(self, n: int, tol: float = 1e-10) -> AutocovSeq:
        return self.inner.autocov(n, tol / self.c).scaled(self.c)


def as_spectral(f) -> SpectralFn:
    """Accept either a :class:`SpectralFn` or bare :class:`FexpParams`."""
    if isinstance(f, FexpParams):
        return Fexp(f)
    if isinstance(f, SpectralFn):
        return f
    raise TypeError(f"not a spectral density: {type(f).__name__}")


def autocov(f: SpectralFn | FexpParams, n: int, tol: float = 1e-10) -> AutocovSeq:
    """gamma(0..n-1) of a spectral density (analytic for FEXP, quadrature otherwise)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    f = as_spectral(f)
    if not f.memory < 0.5:
        raise ValueError("autocovariances undefined for d >= 1/2")
    return f.autocov(n, tol)


def arfima_autocov(d: float, sigma2: float, n: int) -> np.ndarray:
    """Autocovariances of ARFIMA(0, d, 0) at lags 0..n-1."""
    g = np.empty(n)
    g[0] = sigma2 * np.exp(special.gammaln(1 - 2 * d) - 2 * special.gammaln(1 - d))
    k = np.arange(1, n)
    g[1:] = g[0] * np.cumprod((k - 1 + d) / (k - d))
    return g


_MAX_MA_TERMS = 20000


def _exp_ma_weights(theta: np.ndarray, tol: float) -> np.ndarray:
    """Coefficients psi of psi(z) = exp(sum_{j>=1} theta_j z^j / 2).

    exp(sum_j theta_j cos(j lam)) = |psi(e^{i lam})|^2 for j >= 1, so the
    short-memory factor is the spectrum of an MA(infinity) filter with these
    weights.  Truncation stops once K consecutive weights drop below
    ``tol`` relative to the largest one seen.
    """
    K = theta.size - 1
    if K == 0:
        return np.ones(1)
    kc = np.arange(1, K + 1) * theta[1:] / 2.0
    psi = [1.0]
    peak = 1.0
    for m in range(1, _MAX_MA_TERMS):
        kk = min(m, K)
        s = 0.0
        for k in range(kk):
            s += kc[k] * psi[m - 1 - k]
        s /= m
        psi.append(s)
        peak = max(peak, abs(s))
        if m >= K and max(abs(p) for p in psi[-K:]) < tol * peak:
            return np.asarray(psi)
    raise AutocovError("MA expansion of the short-memory part did not converge")


def _fexp_autocov(d: float, theta: np.ndarray, n: int, tol: float):
    theta = np.asarray(theta, dtype=float)
    sigma2 = 2.0 * np.pi * np.exp(theta[0])
    psi = _exp_ma_weights(theta, min(tol, 1e-3) / 10.0)
    M = psi.size - 1
    if M == 0:
        return arfima_autocov(d, sigma2, n), 0.0
    r = np.correlate(psi, psi, "full")  # lags -M..M
    ga = arfima_autocov(d, sigma2, n + M)
    ga_sym = ga[np.abs(np.arange(-M, n + M))]
    gamma = np.convolve(ga_sym, r, "valid")
    # truncated tail: |psi_m| < tol/10 relative; bound its effect on gamma
    err = 2.0 * ga[0] * np.sum(np.abs(psi)) * np.max(np.abs(psi[-theta.size + 1:]))
    return gamma, float(err)


def quadrature_autocov(f: SpectralFn, n: int, tol: float = 1e-10) -> AutocovSeq:
    """Autocovariances by adaptive quadrature with an exact algebraic weight.

    The pole |lambda|^{-2d} is carried by the weight function of QUADPACK's
    QAWS rule, so only the bounded factor ``f.smooth`` is sampled.
    """
    alpha = -2.0 * f.memory
    if alpha <= -1:
        raise AutocovError("non-integrable pole (d >= 1/2)")
    gamma = np.empty(n)
    worst = 0.0
    for tau in range(n):
        val, err = integrate.quad(
            lambda lam: f.smooth(lam) * np.cos(tau * lam),
            0.0,
            np.pi,
            weight="alg",
            wvar=(alpha, 0.0),
            limit=2000,
            epsabs=tol / 4,
            epsrel=1e-12,
        )
        gamma[tau] = 2.0 * val
        worst = max(worst, 2.0 * err)
    if worst > tol:
        raise AutocovError(
            f"quadrature autocovariance error {worst:.3g} exceeds tol {tol:.3g}", worst
        )
    return AutocovSeq(gamma, "quadrature", worst)
