"""Exact simulation of zero-mean stationary Gaussian series.

The primary method is circulant embedding (Davies-Harte / Wood-Chan):
gamma(0..m) is wrapped into a circulant of size 2m whose FFT gives its
eigenvalues; if these are (numerically) nonnegative, draws from the
circulant restricted to the first n coordinates are exact draws from
N(0, T_n).  Dense Cholesky is the fallback.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from scipy import fft as sfft

from .spectral import AutocovSeq, FexpParams, SpectralFn, as_spectral

__all__ = [
    "EmbeddingFailed",
    "SimRequest",
    "circulant_eigenvalues",
    "read_series_csv",
    "replicate_rng",
    "sample",
    "write_series_csv",
]

CHOLESKY_MAX_N = 2048
EIG_CLAMP = 1e-10


class EmbeddingFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class SimRequest:
    model: Union[SpectralFn, FexpParams, AutocovSeq]
    n: int
    replicates: int = 1
    seed: int = 0
    method: str = "auto"
    descriptor: str = ""

    def __post_init__(self):
        if self.n < 1 or self.replicates < 1:
            raise ValueError("n and replicates must be >= 1")
        if self.method not in ("auto", "circulant", "cholesky"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replicate ``index``, fixed by (seed, index) alone."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _gamma(model, m: int) -> np.ndarray:
    if isinstance(model, AutocovSeq):
        if model.n < m:
            raise EmbeddingFailed(f"need {m} autocovariances, only {model.n} supplied")
        return np.asarray(model.gamma[:m])
    return as_spectral(model).autocov(m, 1e-12).gamma


def circulant_eigenvalues(gamma_0_to_m: np.ndarray) -> np.ndarray:
    """Eigenvalues of the size-2m circulant built from gamma(0..m)."""
    g = np.asarray(gamma_0_to_m, dtype=float)
    row = np.concatenate([g, g[-2:0:-1]])
    return sfft.rfft(row).real


def _circulant_setup(model, n: int):
    m = max(n - 1, 1)
    cap = 8 * max(n, 1)
    while True:
        eig = circulant_eigenvalues(_gamma(model, m + 1))
        top = eig.max()
        if eig.min() >= -EIG_CLAMP * top:
            return m, np.clip(eig, 0.0, None)
        if 2 * m > cap:
            raise EmbeddingFailed(
                f"circulant embedding has eigenvalue {eig.min():.3g} (max {top:.3g}) at m={m}"
            )
        m *= 2


def _circulant_draw(eig: np.ndarray, m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    size = 2 * m
    # full spectrum from the half-spectrum of a real symmetric circulant
    lam = np.concatenate([eig, eig[-2:0:-1]])
    z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    y = sfft.fft(np.sqrt(lam / size) * z)
    return y.real[:n]


def sample(req: SimRequest) -> np.ndarray:
    """Draw ``req.replicates`` independent series of length ``req.n``.

    Returns an array of shape (replicates, n).  Replicate i uses the RNG
    stream :func:`replicate_rng` (seed, i), so output does not depend on the
    order replicates are generated in.
    """
    n = req.n
    method = req.method
    out = np.empty((req.replicates, n))
    if method in ("auto", "circulant"):
        try:
            m, eig = _circulant_setup(req.model, n)
        except EmbeddingFailed:
            if method == "circulant":
                raise
            method = "cholesky"
        else:
            for i in range(req.replicates):
                out[i] = _circulant_draw(eig, m, n, replicate_rng(req.seed, i))
            return out
    if n > CHOLESKY_MAX_N:
        raise ValueError(f"Cholesky fallback limited to n <= {CHOLESKY_MAX_N}")
    from scipy.linalg import toeplitz

    L = np.linalg.cholesky(toeplitz(_gamma(req.model, n)))
    for i in range(req.replicates):
        out[i] = L @ replicate_rng(req.seed, i).standard_normal(n)
    return out


def write_series_csv(path, series: np.ndarray, seed: int, descriptor: str) -> None:
    """Row-major CSV: a ``#`` header line with n, replicates, seed, model, then one row per series."""
    series = np.atleast_2d(series)
    reps, n = series.shape
    with open(path, "w", newline="") as fh:
        fh.write(f"# n={n} replicates={reps} seed={int(seed)} model={descriptor}\n")
        w = csv.writer(fh)
        for row in series:
            w.writerow([repr(float(v)) for v in row])


def read_series_csv(path):
    """Inverse of :func:`write_series_csv`; returns (series, header dict)."""
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ValueError("missing series header")
        header = {}
        body = first[1:].strip()
        head, _, model = body.partition(" model=")
        for tok in head.split():
            k, _, v = tok.partition("=")
            header[k] = int(v)
        header["model"] = model
        rows = [list(map(float, r)) for r in csv.reader(fh) if r]
    arr = np.asarray(rows, dtype=float).reshape(header["replicates"], header["n"])
    return arr, header
