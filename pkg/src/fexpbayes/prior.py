"""FEXP priors on (K, d, theta_0..theta_K).

Two constructions are supported.

``dirichlet``
    K ~ Poisson(mu), d on [-1/2+t, 1/2-t], theta_0 ~ N(0, theta0_sd^2) and,
    for K >= 1, S_K = sum_j j|theta_j| ~ B * Beta(2, 2),
    (j|theta_j| / S_K)_j ~ Dirichlet(alpha_1..alpha_K) with
    alpha_j = alpha_scale * (1+j)^-2, and independent uniform signs.

``fexp_beta``
    K ~ Poisson(mu), d as above, eta_j = theta_j * max(j, 1)^beta for
    j = 0..K, |eta| = S_K ~ Uniform(0, A) and eta / |eta| uniform on the unit
    sphere of R^{K+1}.

A third variant, ``point``, is a point mass used to pin the sampler.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from .spectral import FexpParams

__all__ = [
    "PriorDraw",
    "PriorSpec",
    "birth_scale",
    "log_prior_density",
    "log_prior_raw",
    "sample_prior",
]

VARIANTS = ("dirichlet", "fexp_beta", "point")
_LOG2 = math.log(2.0)


@dataclass(frozen=True)
class PriorSpec:
    variant: str = "fexp_beta"
    mu: float = 2.0
    t: float = 0.05
    d_law: str = "uniform"
    d_a: float = 1.0
    d_b: float = 1.0
    # dirichlet variant
    B: float = 5.0
    alpha_scale: float = 20.0
    theta0_sd: float = 10.0
    # fexp_beta variant
    beta: float = 1.5
    A: float = 3.0
    # point variant
    point_d: float = 0.0
    point_theta: tuple = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "point_theta", tuple(float(v) for v in self.point_theta))
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown prior variant {self.variant!r}")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not 0 < self.t < 0.5:
            raise ValueError("t must lie in (0, 1/2)")
        if self.d_law not in ("uniform", "beta"):
            raise ValueError(f"unknown d_law {self.d_law!r}")
        if not (self.d_a > 0 and self.d_b > 0):
            raise ValueError("d_a, d_b must be positive")
        if self.variant == "dirichlet" and not (self.B > 0 and self.alpha_scale > 0
                                                and self.theta0_sd > 0):
            raise ValueError("B, alpha_scale and theta0_sd must be positive")
        if self.variant == "fexp_beta" and not (self.A > 0 and self.beta > 0):
            raise ValueError("A and beta must be positive")
        if self.variant == "point":
            FexpParams(self.point_d, self.point_theta)
            if not self.d_lo <= self.point_d <= self.d_hi:
                raise ValueError("point mass outside the d support")

    @classmethod
    def point_mass(cls, params: FexpParams, t: float = 0.05) -> "PriorSpec":
        return cls(variant="point", point_d=params.d, point_theta=tuple(params.theta), t=t)

    @property
    def d_lo(self) -> float:
        return -0.5 + self.t

    @property
    def d_hi(self) -> float:
        return 0.5 - self.t

    def alphas(self, K: int) -> np.ndarray:
        j = np.arange(1, K + 1)
        return self.alpha_scale * (1.0 + j) ** -2.0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["point_theta"] = list(self.point_theta)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PriorSpec":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for k, v in data.items():
            if k not in known:
                raise KeyError(f"unknown prior key {k!r}")
            kwargs[k] = v
        return cls(**kwargs)


@dataclass(frozen=True)
class PriorDraw:
    params: FexpParams
    log_density: float


def _log_d_density(spec: PriorSpec, d: float) -> float:
    lo, hi = spec.d_lo, spec.d_hi
    if not lo <= d <= hi:
        return -math.inf
    if spec.d_law == "uniform":
        return -math.log(hi - lo)
    a, b = spec.d_a, spec.d_b
    z = (d - lo) / (hi - lo)
    if z <= 0.0 or z >= 1.0:
        return -math.inf
    return ((a - 1) * math.log(z) + (b - 1) * math.log1p(-z)
            - (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)) - math.log(hi - lo))


def _log_poisson(K: int, mu: float) -> float:
    return K * math.log(mu) - mu - math.lgamma(K + 1)


def _log_sphere_area(dim: int) -> float:
    """log surface area of the unit sphere in R^dim."""
    return _LOG2 + 0.5 * dim * math.log(math.pi) - math.lgamma(0.5 * dim)


def log_prior_raw(spec: PriorSpec, d: float, theta: np.ndarray) -> float:
    """Log prior density at (d, theta) without building FexpParams."""
    K = len(theta) - 1
    if spec.variant == "point":
        if d == spec.point_d and tuple(theta) == spec.point_theta:
            return 0.0
        return -math.inf
    ld = _log_d_density(spec, d)
    if ld == -math.inf:
        return ld
    out = _log_poisson(K, spec.mu) + ld
    if spec.variant == "dirichlet":
        t0 = theta[0] / spec.theta0_sd
        out += -0.5 * t0 * t0 - math.log(spec.theta0_sd) - 0.5 * math.log(2 * math.pi)
        if K == 0:
            return out
        j = np.arange(1, K + 1)
        y = j * np.abs(theta[1:])
        if np.any(y <= 0):
            return -math.inf
        S = float(y.sum())
        if S >= spec.B:
            return -math.inf
        z = S / spec.B
        # B * Beta(2, 2): density 6 z (1 - z) / B
        out += math.log(6.0 * z * (1.0 - z) / spec.B)
        if K > 1:
            a = spec.alphas(K)
            logV = np.log(y) - math.log(S)
            out += (math.lgamma(float(a.sum())) - sum(math.lgamma(x) for x in a)
                    + float(np.dot(a - 1.0, logV)))
        out += -(K - 1) * math.log(S) + math.lgamma(K + 1) - K * _LOG2
        return out
    # fexp_beta
    w = np.ones(K + 1)
    w[1:] = np.arange(1, K + 1) ** spec.beta
    eta = theta * w
    R = math.sqrt(float(np.dot(eta, eta)))
    if not 0.0 < R < spec.A:
        return -math.inf
    out += -math.log(spec.A) - K * math.log(R) - _log_sphere_area(K + 1)
    out += spec.beta * math.lgamma(K + 1)  # sum_{j<=K} beta log j
    return out


def log_prior_density(spec: PriorSpec, params: FexpParams) -> float:
    """log p(K) + log pi(d) + log pi(theta | K); -inf off the support."""
    return log_prior_raw(spec, params.d, np.asarray(params.theta))


def _sample_d(spec: PriorSpec, rng: np.random.Generator) -> float:
    if spec.d_law == "uniform":
        z = rng.uniform()
    else:
        z = rng.beta(spec.d_a, spec.d_b)
    return spec.d_lo + (spec.d_hi - spec.d_lo) * z


def _log_dirichlet_sample(alpha: np.ndarray, rng) -> np.ndarray:
    # log Gamma(a) = log Gamma(a + 1) + log(U) / a, safe for tiny a
    lg = np.log(rng.gamma(alpha + 1.0)) + np.log(rng.uniform(size=alpha.size)) / alpha
    return lg - np.logaddexp.reduce(lg)


def sample_prior(spec: PriorSpec, rng: np.random.Generator) -> PriorDraw:
    if spec.variant == "point":
        p = FexpParams(spec.point_d, spec.point_theta)
        return PriorDraw(p, 0.0)
    while True:
        K = int(rng.poisson(spec.mu))
        d = _sample_d(spec, rng)
        if spec.variant == "dirichlet":
            theta = np.empty(K + 1)
            theta[0] = spec.theta0_sd * rng.standard_normal()
            if K:
                S = spec.B * rng.beta(2.0, 2.0)
                V = np.exp(_log_dirichlet_sample(spec.alphas(K), rng))
                signs = rng.choice([-1.0, 1.0], size=K)
                theta[1:] = signs * S * V / np.arange(1, K + 1)
        else:
            R = spec.A * rng.uniform()
            u = rng.standard_normal(K + 1)
            u /= np.linalg.norm(u)
            w = np.ones(K + 1)
            w[1:] = np.arange(1, K + 1) ** spec.beta
            theta = R * u / w
        lp = log_prior_raw(spec, d, theta)
        # an exact zero from underflow has prior probability zero; redraw
        if np.isfinite(lp):
            return PriorDraw(FexpParams(d, theta), lp)


def birth_scale(spec: PriorSpec, K_new: int) -> float:
    """Prior RMS of theta_{K_new} given order K_new (scale of a birth proposal)."""
    j = K_new
    if spec.variant == "dirichlet":
        a = spec.alphas(K_new)
        a0 = a.sum()
        ev2 = a[-1] * (a[-1] + 1.0) / (a0 * (a0 + 1.0))
        es2 = 0.3 * spec.B**2  # E[S^2] for B * Beta(2, 2)
        return math.sqrt(es2 * ev2) / j
    if spec.variant == "fexp_beta":
        return math.sqrt(spec.A**2 / 3.0 / (K_new + 1)) / j**spec.beta
    return 1.0
