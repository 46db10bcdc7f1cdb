"""Exact linear algebra for symmetric positive definite Toeplitz matrices.

Everything is driven by the Durbin recursion on the first column
gamma(0..n-1): reflection coefficients kappa_k, innovation variances v_k and
order-k predictors phi^(k).  From those,

* log det T_n = sum_k log v_k,
* x' T_n^{-1} x = sum_k e_k^2 / v_k with e_k the order-k prediction errors,
* T_n^{-1} b follows from Levinson's update, and
* T_n^{-1} itself from the Gohberg-Semencul (Trench) fill.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit
from scipy import fft as sfft

from .spectral import AutocovSeq, FexpParams, SpectralFn, autocov

__all__ = [
    "EXACT_TRACE_CAP",
    "NotPositiveDefinite",
    "ToeplitzCov",
    "ToeplitzSolver",
    "TraceEstimate",
    "factor",
    "gauss_loglik",
    "matvec",
    "trace_product",
    "trace_ratio",
]

EXACT_TRACE_CAP = 512
# innovation variances below this multiple of gamma(0) are treated as singular
PD_FLOOR = 1e-13


class NotPositiveDefinite(np.linalg.LinAlgError):
    def __init__(self, index: int, min_innovation: float = np.nan):
        super().__init__(
            f"Toeplitz matrix not positive definite: innovation variance at order "
            f"{index} fell to {min_innovation:.3g}"
        )
        self.index = index
        self.min_innovation = min_innovation


@njit(cache=True)
def _durbin(r, floor):
    n = r.size
    kappa = np.zeros(n)
    v = np.empty(n)
    phi = np.zeros(n)
    tmp = np.zeros(n)
    v[0] = r[0]
    if not r[0] > 0:
        return kappa, v, phi, 0
    for k in range(1, n):
        acc = r[k]
        for j in range(1, k):
            acc -= phi[j] * r[k - j]
        kap = acc / v[k - 1]
        for j in range(1, k):
            tmp[j] = phi[j] - kap * phi[k - j]
        for j in range(1, k):
            phi[j] = tmp[j]
        phi[k] = kap
        kappa[k] = kap
        v[k] = v[k - 1] * (1.0 - kap * kap)
        if not v[k] > floor:
            return kappa, v, phi, k
    return kappa, v, phi, -1


@njit(cache=True)
def _durbin_loglik_terms(r, x, floor):
    """One pass giving (log det, x'T^{-1}x, failing index or -1)."""
    n = r.size
    phi = np.zeros(n)
    tmp = np.zeros(n)
    v = r[0]
    if not v > floor:
        return 0.0, 0.0, 0
    logdet = np.log(v)
    quad = x[0] * x[0] / v
    for k in range(1, n):
        acc = r[k]
        for j in range(1, k):
            acc -= phi[j] * r[k - j]
        kap = acc / v
        for j in range(1, k):
            tmp[j] = phi[j] - kap * phi[k - j]
        for j in range(1, k):
            phi[j] = tmp[j]
        phi[k] = kap
        v = v * (1.0 - kap * kap)
        if not v > floor:
            return logdet, quad, k
        e = x[k]
        for j in range(1, k + 1):
            e -= phi[j] * x[k - j]
        logdet += np.log(v)
        quad += e * e / v
    return logdet, quad, -1


@njit(cache=True)
def _levinson_solve(r, kappa, v, B):
    """Solve T Y = B column-wise, rebuilding predictors from kappa."""
    n, m = B.shape
    Y = np.zeros((n, m))
    phi = np.zeros(n)
    tmp = np.zeros(n)
    for c in range(m):
        Y[0, c] = B[0, c] / v[0]
    for k in range(1, n):
        kap = kappa[k]
        for j in range(1, k):
            tmp[j] = phi[j] - kap * phi[k - j]
        for j in range(1, k):
            phi[j] = tmp[j]
        phi[k] = kap
        # T_{k+1} (-phi_k, ..., -phi_1, 1)' = (0, ..., 0, v_k)'
        for c in range(m):
            rho = 0.0
            for j in range(k):
                rho += r[k - j] * Y[j, c]
            mu = (B[k, c] - rho) / v[k]
            for j in range(k):
                Y[j, c] -= mu * phi[k - j]
            Y[k, c] = mu
    return Y


@njit(cache=True)
def _innovations(kappa, X):
    """Prediction errors e_k = x_k - sum_j phi^(k)_j x_{k-j} for each column."""
    n, m = X.shape
    E = np.empty((n, m))
    phi = np.zeros(n)
    tmp = np.zeros(n)
    for c in range(m):
        E[0, c] = X[0, c]
    for k in range(1, n):
        kap = kappa[k]
        for j in range(1, k):
            tmp[j] = phi[j] - kap * phi[k - j]
        for j in range(1, k):
            phi[j] = tmp[j]
        phi[k] = kap
        for c in range(m):
            e = X[k, c]
            for j in range(1, k + 1):
                e -= phi[j] * X[k - j, c]
            E[k, c] = e
    return E


@njit(cache=True)
def _trench_inverse(a, vlast):
    """Dense T^{-1} from the order n-1 error filter a = (1, -phi_1, ..., -phi_{n-1})."""
    n = a.size
    b = np.zeros(n)
    for i in range(1, n):
        b[i] = a[n - i]
    inv = np.empty((n, n))
    for j in range(n):
        inv[0, j] = a[0] * a[j] / vlast
    for i in range(1, n):
        for j in range(i, n):
            inv[i, j] = inv[i - 1, j - 1] + (a[i] * a[j] - b[i] * b[j]) / vlast
    for i in range(n):
        for j in range(i):
            inv[i, j] = inv[j, i]
    return inv


@dataclass(frozen=True, eq=False)
class ToeplitzCov:
    """T_n(f) represented by its first column."""

    gamma: AutocovSeq

    @classmethod
    def from_spectral(cls, f: SpectralFn, n: int, tol: float = 1e-10) -> "ToeplitzCov":
        return cls(autocov(f, n, tol))

    @classmethod
    def from_array(cls, gamma) -> "ToeplitzCov":
        return cls(AutocovSeq(gamma, "given"))

    @property
    def n(self) -> int:
        return self.gamma.n

    @property
    def column(self) -> np.ndarray:
        return self.gamma.gamma

    def dense(self) -> np.ndarray:
        from scipy.linalg import toeplitz

        return toeplitz(self.column)


def _as_cov(T) -> ToeplitzCov:
    if isinstance(T, ToeplitzCov):
        return T
    if isinstance(T, AutocovSeq):
        return ToeplitzCov(T)
    return ToeplitzCov.from_array(T)


class ToeplitzSolver:
    """Factored T_n from the Durbin recursion.

    Attributes
    ----------
    reflection : ndarray
        kappa_1..kappa_{n-1} (index 0 unused, zero).
    innovations : ndarray
        v_0..v_{n-1}, all strictly positive.
    predictor : ndarray
        Final order n-1 predictor phi_1..phi_{n-1} (index 0 unused).
    logdet : float
    """

    def __init__(self, T):
        T = _as_cov(T)
        r = np.ascontiguousarray(T.column, dtype=float)
        kappa, v, phi, fail = _durbin(r, PD_FLOOR * r[0])
        if fail >= 0:
            raise NotPositiveDefinite(fail, float(v[fail]))
        self.cov = T
        self.n = r.size
        self._r = r
        self.reflection = kappa
        self.innovations = v
        self.predictor = phi
        self.logdet = float(np.sum(np.log(v)))
        for a in (kappa, v, phi):
            a.setflags(write=False)

    @property
    def min_innovation(self) -> float:
        """Smallest innovation variance; a conditioning diagnostic."""
        return float(self.innovations.min())

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"expected leading dimension {self.n}, got {b.shape[0]}")
        B = b.reshape(self.n, -1)
        Y = _levinson_solve(self._r, self.reflection, self.innovations, np.ascontiguousarray(B))
        return Y.reshape(b.shape)

    def quadform(self, x, y=None) -> float:
        """x' T^{-1} y (y defaults to x) through prediction errors."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError("dimension mismatch")
        if y is None:
            e = _innovations(self.reflection, x.reshape(-1, 1))[:, 0]
            return float(np.sum(e * e / self.innovations))
        y = np.asarray(y, dtype=float)
        E = _innovations(self.reflection, np.column_stack([x, y]))
        return float(np.sum(E[:, 0] * E[:, 1] / self.innovations))

    def inverse(self) -> np.ndarray:
        a = np.empty(self.n)
        a[0] = 1.0
        a[1:] = -self.predictor[1:]
        return _trench_inverse(a, self.innovations[-1])


def factor(T) -> ToeplitzSolver:
    return ToeplitzSolver(T)


def matvec(T, x) -> np.ndarray:
    """T_n x by circulant embedding (size 2n) and FFT."""
    T = _as_cov(T)
    x = np.asarray(x, dtype=float)
    n = T.n
    if x.shape[0] != n:
        raise ValueError(f"expected length {n}, got {x.shape[0]}")
    col = T.column
    c = np.concatenate([col, [0.0], col[:0:-1]])
    pad = np.zeros((2 * n,) + x.shape[1:])
    pad[:n] = x
    y = sfft.irfft(sfft.rfft(c)[(...,) + (None,) * (x.ndim - 1)] * sfft.rfft(pad, axis=0), 2 * n, axis=0)
    return y[:n]


def gauss_loglik(gamma, x) -> float:
    """Zero-mean Gaussian log-density of x under covariance T_n(gamma)."""
    g = gamma.gamma if isinstance(gamma, AutocovSeq) else np.asarray(gamma, dtype=float)
    x = np.ascontiguousarray(x, dtype=float)
    if g.shape != x.shape:
        raise ValueError("data and autocovariance lengths differ")
    g = np.ascontiguousarray(g)
    logdet, quad, fail = _durbin_loglik_terms(g, x, PD_FLOOR * g[0])
    if fail >= 0:
        raise NotPositiveDefinite(fail)
    return -0.5 * quad - 0.5 * logdet - 0.5 * x.size * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class TraceEstimate:
    value: float
    stderr: float
    probes: int

    def __float__(self):
        return self.value


def _cov_of(f, n) -> ToeplitzCov:
    if isinstance(f, (SpectralFn, FexpParams)):
        return ToeplitzCov.from_spectral(f, n)
    f = _as_cov(f)
    if isinstance(f, ToeplitzCov):
        if f.n != n:
            raise ValueError("order mismatch")
    return f


def trace_ratio(f, g, n: int, mode: str = "exact", probes: int = 64, seed: int = 0,
                allow_stochastic: bool = False):
    """(1/n) tr(T_n(f) T_n(g)^{-1}).

    ``mode="exact"`` forms T_n(g)^{-1} explicitly (n <= 512 unless
    ``allow_stochastic`` downgrades larger problems).  ``mode="stochastic"``
    returns a :class:`TraceEstimate` from Rademacher probes.
    """
    if mode not in ("exact", "stochastic"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "exact" and n > EXACT_TRACE_CAP:
        if not allow_stochastic:
            raise ValueError(f"exact trace limited to n <= {EXACT_TRACE_CAP}")
        mode = "stochastic"
    Tf = _cov_of(f, n)
    Sg = ToeplitzSolver(_cov_of(g, n))
    if mode == "exact":
        return float(np.sum(Tf.dense() * Sg.inverse()) / n)
    rng = np.random.default_rng(seed)
    Z = rng.choice([-1.0, 1.0], size=(n, probes))
    W = Sg.solve(Z)
    vals = np.sum(matvec(Tf, W) * Z, axis=0) / n
    return TraceEstimate(float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(probes)), probes)


def trace_product(fs: Sequence, gs: Sequence, n: int) -> float:
    """(1/n) tr(prod_i T_n(f_i) T_n(g_i)^{-1}), dense, n <= 512."""
    if len(fs) != len(gs) or not fs:
        raise ValueError("fs and gs must be non-empty and of equal length")
    if n > EXACT_TRACE_CAP:
        raise ValueError(f"exact trace limited to n <= {EXACT_TRACE_CAP}")
    prod = np.eye(n)
    for f, g in zip(fs, gs):
        prod = prod @ _cov_of(f, n).dense() @ ToeplitzSolver(_cov_of(g, n)).inverse()
    return float(np.trace(prod) / n)
