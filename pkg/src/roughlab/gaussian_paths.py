"""Fractional Brownian motion on the uniform grid t_k = k/n.

Paths are synthesised exactly by circulant embedding of the stationary
increment covariance (Davies-Harte), one counter-based random stream per
(path, component) so that chunked or threaded generation reproduces the
serial result bit for bit.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterator, Union

import numpy as np
from scipy.special import binom, zeta

from .errors import DivergentSeries, EmbeddingNotPSD

__all__ = [
    "HurstParam",
    "Partition",
    "CovarianceSpec",
    "PathBatch",
    "parse_hurst",
    "fbm_rho",
    "rho_power_sum",
    "sample_fbm",
    "iter_fbm",
    "path_generator",
    "subsample",
]

Number = Union[int, float, Fraction]

# eigenvalues in (-NEG_TOL * max, 0) are rounding dust and get clamped
NEG_TOL = 1e-9


def parse_hurst(value: Number | str) -> Fraction | float:
    """Turn ``"1/4"``, ``"0.3"``, a Fraction or a float into a Hurst value.

    Strings are parsed exactly (``"0.3"`` becomes ``Fraction(3, 10)``), which
    is what makes regime comparisons like ``d == 1/(2 nu)`` exact.
    """
    if isinstance(value, str):
        try:
            nu: Fraction | float = Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"cannot parse Hurst parameter {value!r}") from exc
    elif isinstance(value, (Fraction, int)):
        nu = Fraction(value)
    else:
        nu = float(value)
    if not 0 < nu < 1:
        raise ValueError(f"Hurst parameter must lie in (0, 1), got {value!r}")
    return nu


@dataclass(frozen=True)
class HurstParam:
    """Hurst parameter, kept as a Fraction whenever it was given exactly."""

    nu: Fraction | float

    def __post_init__(self) -> None:
        object.__setattr__(self, "nu", parse_hurst(self.nu))

    @property
    def exact(self) -> Fraction:
        """Rational view; floats go through their shortest decimal repr."""
        if isinstance(self.nu, Fraction):
            return self.nu
        return Fraction(repr(self.nu))

    def __float__(self) -> float:
        return float(self.nu)


@dataclass(frozen=True)
class Partition:
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("grid size n must be >= 1")

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n


@dataclass(frozen=True)
class CovarianceSpec:
    """Variance function F(h) of the increments; only fBm is provided."""

    nu: float
    kind: str = "fbm"

    def variance(self, h):
        return np.abs(np.asarray(h, dtype=float)) ** (2 * float(self.nu))

    def increment_cov(self, a1, a2, b1, b2):
        """E[(x_a2 - x_a1)(x_b2 - x_b1)] from F by polarisation."""
        F = self.variance
        a1, a2, b1, b2 = (np.asarray(v, dtype=float) for v in (a1, a2, b1, b2))
        return 0.5 * (F(a2 - b1) + F(a1 - b2) - F(a2 - b2) - F(a1 - b1))


def fbm_rho(k, nu: float):
    """Correlation of two unit-spaced fBm increments at lag ``k``.

    rho(k) = (|k+1|^{2nu} - 2|k|^{2nu} + |k-1|^{2nu}) / 2, evaluated with
    expm1/log1p for |k| >= 2 so that the second difference keeps full
    relative precision at large lags.
    """
    nu = float(parse_hurst(nu))
    k = np.abs(np.asarray(k, dtype=float))
    h = 2.0 * nu
    if nu == 0.5:
        out = (k == 0).astype(float)
        return out if out.ndim else float(out)
    out = np.empty_like(k)
    small = k < 2
    ks = k[small]
    out[small] = 0.5 * (np.abs(ks + 1) ** h - 2 * ks**h + np.abs(ks - 1) ** h)
    kl = k[~small]
    if kl.size:
        inv = 1.0 / kl
        out[~small] = 0.5 * kl**h * (
            np.expm1(h * np.log1p(inv)) + np.expm1(h * np.log1p(-inv))
        )
    return out if out.ndim else float(out)


def _tail_coefficients(q: int, nu: float, terms: int) -> np.ndarray:
    # rho(k) = sum_{m>=1} C(2nu, 2m) k^{2nu-2m}, so rho(k)^q = k^{-a} P(1/k^2)^q
    base = np.array([binom(2 * nu, 2 * m) for m in range(1, terms + 1)])
    poly = np.array([1.0])
    for _ in range(q):
        poly = np.convolve(poly, base)[:terms]
    return poly


def rho_power_sum(q: int, nu: float, tol: float = 1e-12) -> float:
    """Sum of rho(k)^q over all integers k, to absolute accuracy ``tol``.

    Lags up to K are summed directly; the two tails are summed in closed
    form from the large-lag expansion of rho using Hurwitz zeta values, and
    K is increased until the first neglected expansion term is below tol.
    """
    nu = float(parse_hurst(nu))
    if q < 1:
        raise ValueError("q must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if nu == 0.5:
        return 1.0
    a = q * (2.0 - 2.0 * nu)
    if a <= 1.0:
        raise DivergentSeries(
            f"sum of |rho(k)|^{q} diverges for nu={nu}: need q > 1/(2-2nu)"
        )
    if q == 1:
        # telescoping: sum_{|k|<=K} rho(k) = (K+1)^{2nu} - K^{2nu} -> 0
        return 0.0
    terms = 10
    coef = _tail_coefficients(q, nu, terms + 1)
    K = 64
    while True:
        tail = sum(coef[j] * zeta(a + 2 * j, K + 1) for j in range(terms))
        err = abs(coef[terms]) * zeta(a + 2 * terms, K + 1)
        if 2 * err <= tol / 2 or K > 1 << 20:
            break
        K *= 4
    body = fbm_rho(np.arange(1, K + 1), nu) ** q
    return float(1.0 + 2.0 * (math.fsum(body) + tail))


@lru_cache(maxsize=32)
def _embedding_scales(n: int, nu: float) -> np.ndarray:
    m = 2 * n
    r = fbm_rho(np.arange(n + 1), nu)
    circ = np.concatenate([r, r[n - 1 : 0 : -1]])
    lam = np.fft.rfft(circ).real
    lo = lam.min()
    if lo < -NEG_TOL * lam.max():
        raise EmbeddingNotPSD(
            f"circulant eigenvalue {lo:.3e} for n={n}, nu={nu} is not rounding noise"
        )
    if lo < 0:
        warnings.warn(
            f"clamped circulant eigenvalues down to {lo:.3e} (n={n}, nu={nu})",
            RuntimeWarning,
            stacklevel=3,
        )
        lam = np.clip(lam, 0.0, None)
    scale = np.sqrt(lam / (2 * m))
    scale[0] = math.sqrt(lam[0] / m)
    scale[n] = math.sqrt(lam[n] / m)
    scale.setflags(write=False)
    return scale


def path_generator(seed: int, *key: int) -> np.random.Generator:
    """Philox stream keyed by ``(seed, *key)``; independent of call order."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))


def _unit_increments(n: int, nu: float, rows: list[np.random.Generator]) -> np.ndarray:
    """Stationary unit-variance increments with correlation rho, one row per stream."""
    scale = _embedding_scales(n, nu)
    m = 2 * n
    W = np.empty((len(rows), n + 1), dtype=complex)
    for i, gen in enumerate(rows):
        z = gen.standard_normal(m)
        W[i, 0] = z[0]
        W[i, n] = z[1]
        W[i, 1:n] = z[2 : n + 1] + 1j * z[n + 1 :]
    W *= scale
    return m * np.fft.irfft(W, m, axis=-1)[:, :n]


@dataclass
class PathBatch:
    """``M`` independent d-dimensional fBm paths on the grid k/n.

    ``values`` has shape (M, d, n + 1); ``start`` is the global index of the
    first path so that chunks of a large batch keep their identity.
    """

    n: int
    nu: float
    seed: int
    values: np.ndarray
    start: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=-1)

    def component(self, i: int = 0) -> np.ndarray:
        return self.values[:, i, :]

    def to_csv(self, path: str | Path, component: int = 0) -> None:
        """Rows are grid points, columns are paths; 17 significant digits."""
        np.savetxt(path, self.values[:, component, :].T, fmt="%.17g", delimiter=",")

    def to_npy(self, path: str | Path) -> None:
        np.save(path, self.values)


def sample_fbm(
    n: int,
    nu: float,
    M: int,
    d: int = 1,
    seed: int = 0,
    *,
    start: int = 0,
) -> PathBatch:
    """Sample paths ``start .. start+M-1`` of the batch identified by ``seed``.

    Path m, component i always draws from the stream keyed (seed, m, i), so
    any split of the index range into chunks yields identical values.
    """
    if n < 1 or M < 1 or d < 1:
        raise ValueError("need n >= 1, M >= 1 and d >= 1")
    nu = float(parse_hurst(nu))
    rows = [path_generator(seed, start + m, i) for m in range(M) for i in range(d)]
    inc = _unit_increments(n, nu, rows) * n ** (-nu)
    values = np.zeros((M * d, n + 1))
    np.cumsum(inc, axis=-1, out=values[:, 1:])
    return PathBatch(n=n, nu=nu, seed=seed, values=values.reshape(M, d, n + 1), start=start)


def iter_fbm(
    n: int, nu: float, M: int, d: int = 1, seed: int = 0, chunk: int | None = None
) -> Iterator[PathBatch]:
    """Yield the batch in memory-bounded chunks (about 2**22 grid values each)."""
    if chunk is None:
        chunk = max(1, (1 << 22) // (d * (n + 1)))
    for lo in range(0, M, chunk):
        yield sample_fbm(n, nu, min(chunk, M - lo), d, seed, start=lo)


def subsample(values: np.ndarray, n_fine: int, n_coarse: int) -> np.ndarray:
    """Restrict grid values on k/n_fine to the coarser grid k/n_coarse."""
    if n_fine % n_coarse:
        raise ValueError(f"{n_coarse} does not divide {n_fine}")
    return values[..., :: n_fine // n_coarse]
