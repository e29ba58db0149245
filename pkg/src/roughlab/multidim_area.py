"""Level-2 lift of d-dimensional fBm and the off-diagonal quadratic variation.

The lift over a coarse cell [t_k, t_{k+1}] is the iterated integral of the
piecewise-linear interpolation of the path on r fine steps per cell.  Its
symmetric part is exactly dX (x) dX / 2; the antisymmetric part (Levy area)
converges to the canonical lift as r grows when nu > 1/4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, RegimeMismatch
from .gaussian_paths import PathBatch, parse_hurst
from .rough_algebra import ControlledPath

__all__ = [
    "Level2Batch",
    "AreaCovariance",
    "lift_level2",
    "area_covariances",
    "area_oracle",
    "area_lag_kernel",
    "refinement_sweep",
    "quadratic_variation_statistic",
    "weighted_qv_statistic",
]


@dataclass
class Level2Batch:
    """``X2[m, k]`` is the d x d level-2 increment over coarse cell k of path m."""

    n: int
    r: int
    X2: np.ndarray
    x: np.ndarray

    @property
    def dX(self) -> np.ndarray:
        return np.diff(self.x, axis=-1)

    @property
    def d(self) -> int:
        return self.X2.shape[-1]


def lift_level2(batch: PathBatch | np.ndarray, n: int) -> Level2Batch:
    """Piecewise-linear level-2 lift on the coarse grid k/n.

    ``batch`` holds paths on the fine grid j/(n r), shape (M, d, n r + 1).
    """
    values = batch.values if isinstance(batch, PathBatch) else np.asarray(batch, dtype=float)
    N = values.shape[-1] - 1
    if n < 1 or N % n:
        raise GridMismatch(f"coarse grid {n} does not divide fine grid {N}")
    r = N // n
    M, d = values.shape[0], values.shape[1]
    e = np.diff(values, axis=-1).reshape(M, d, n, r)
    # path position relative to the cell start, taken at the midpoint of each fine step
    before = np.cumsum(e, axis=-1) - e
    mid = before + 0.5 * e
    X2 = np.einsum("mikj,mlkj->mkil", mid, e)
    coarse = values[..., ::r]
    dX = np.diff(coarse, axis=-1)
    diag = 0.5 * dX**2
    idx = np.arange(d)
    X2[:, :, idx, idx] = np.moveaxis(diag, 1, 2)
    return Level2Batch(n=n, r=r, X2=X2, x=coarse)


@dataclass(frozen=True)
class AreaCovariance:
    lam: float
    lam_se: float
    rho: float
    rho_se: float
    M: int


def _normalised_area(lvl2: Level2Batch, nu: float, i: int = 0, j: int = 1) -> np.ndarray:
    n = lvl2.n
    return float(n) ** (2 * nu - 0.5) * lvl2.X2[:, :, i, j].sum(axis=1)


def area_covariances(lvl2: Level2Batch, nu: float) -> AreaCovariance:
    """Monte Carlo (1/n) sum_{k,l} lambda^n_{kl} and the rho analogue.

    With Z^{ij} = n^{2nu - 1/2} sum_k X2^{ij}_k these are E[(Z^{12})^2] and
    E[Z^{12} Z^{21}]; the standard errors are those of a sample mean (the
    delete-one jackknife of a mean gives the same value).
    """
    if lvl2.d < 2:
        raise ValueError("area covariances need d >= 2")
    z12 = _normalised_area(lvl2, float(parse_hurst(nu)), 0, 1)
    z21 = _normalised_area(lvl2, float(parse_hurst(nu)), 1, 0)
    M = z12.shape[0]
    a = z12**2
    b = z12 * z21
    se = lambda v: float(np.std(v, ddof=1) / math.sqrt(M))  # noqa: E731
    return AreaCovariance(float(np.mean(a)), se(a), float(np.mean(b)), se(b), M)


def _inc_cov(a1, a2, b1, b2, h):
    F = lambda v: np.abs(v) ** h  # noqa: E731
    return 0.5 * (F(a2 - b1) + F(a1 - b2) - F(a2 - b2) - F(a1 - b1))


def area_lag_kernel(nu: float, lags: np.ndarray, sub: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """lambda(j), rho(j) for unit cells at lag j, lift on ``sub`` steps per cell.

    Lengths are measured in cells, which absorbs the n^{4 nu} normalisation.
    With m_a = (x_{[0, a/S]} + x_{[0, (a+1)/S]}) / 2 the in-cell midpoint
    position and e_a the a-th sub-step increment,
    lambda(j) = sum_{a,b} Cov(m_{0,a}, m_{j,b}) Cov(e_{0,a}, e_{j,b}) and
    rho(j) = sum_{a,b} Cov(m_{0,a}, e_{j,b}) Cov(e_{0,a}, m_{j,b}),
    using independence of the coordinates.
    """
    h = 2.0 * float(parse_hurst(nu))
    S = sub
    g = np.arange(S + 1) / S
    lam = np.empty(len(lags))
    rho = np.empty(len(lags))
    A0, A1 = g[:-1, None], g[1:, None]
    for idx, j in enumerate(np.asarray(lags, dtype=float)):
        B0, B1 = j + g[None, :-1], j + g[None, 1:]
        # Cov(x_{[0,u]}, x_{[j, j+v]}) for sub-grid points u, v
        P = _inc_cov(0.0, g[:, None], j, j + g[None, :], h)
        mm = 0.25 * (P[:-1, :-1] + P[1:, :-1] + P[:-1, 1:] + P[1:, 1:])
        ee = _inc_cov(A0, A1, B0, B1, h)
        # Cov(m_{0,a}, e_{j,b}) and Cov(e_{0,a}, m_{j,b})
        me = 0.5 * (
            _inc_cov(0.0, A0, B0, B1, h) + _inc_cov(0.0, A1, B0, B1, h)
        )
        Q0 = _inc_cov(A0, A1, j, j + g[None, :-1], h)
        Q1 = _inc_cov(A0, A1, j, j + g[None, 1:], h)
        em = 0.5 * (Q0 + Q1)
        lam[idx] = float(np.sum(mm * ee))
        rho[idx] = float(np.sum(me * em))
    return lam, rho


def area_oracle(nu: float, n: int, sub: int = 64, kernel=None) -> tuple[float, float]:
    """Exact (1/n) sum_{k,l} lambda^n_{kl} and rho^n_{kl} for the sub-step lift.

    Stationarity reduces the double sum to sum_{|j|<n} (1 - |j|/n) lambda(j);
    negative lags follow from lambda(-j) = lambda(j) and rho(-j) = rho(j)
    after swapping coordinates.  ``kernel`` may carry precomputed
    (lambda, rho) arrays over lags 0..n-1.
    """
    if kernel is None:
        lags = np.arange(n)
        kernel = area_lag_kernel(nu, lags, sub)
    lam_j, rho_j = kernel[0][:n], kernel[1][:n]
    j = np.arange(n)
    w = 1.0 - j / n
    lam = lam_j[0] + 2.0 * float(np.sum(w[1:] * lam_j[1:]))
    rho = rho_j[0] + 2.0 * float(np.sum(w[1:] * rho_j[1:]))
    return float(lam), float(rho)


def refinement_sweep(values: np.ndarray, n: int, rs, per_path: bool = False) -> dict:
    """L2 distance between the lifts with r and 2r fine steps per coarse cell.

    ``values`` lives on a grid fine enough for every 2r (shape (M, d, N + 1)
    with 2 r n dividing N).  Returns r -> sqrt(E sum_k |X2_k(r) - X2_k(2r)|^2),
    Frobenius norm per cell, averaged over paths; with ``per_path`` the
    squared sums are returned per path instead.
    """
    values = np.asarray(values, dtype=float)
    N = values.shape[-1] - 1
    out = {}
    for r in rs:
        if N % (2 * r * n):
            raise GridMismatch(f"fine grid {N} cannot hold r={2 * r} on n={n}")
        a = lift_level2(values[..., :: N // (r * n)], n).X2
        b = lift_level2(values[..., :: N // (2 * r * n)], n).X2
        d2 = np.sum((a - b) ** 2, axis=(1, 2, 3))
        out[int(r)] = d2 if per_path else float(np.sqrt(np.mean(d2)))
    return out


def quadratic_variation_statistic(
    lvl2: Level2Batch, nu: float, s: float = 0.0, t: float = 1.0, normalize: bool = False
) -> np.ndarray:
    """h^n_{st} = sum_{s <= t_k < t} (n^{2nu} X2_k - Id/2), one d x d matrix per path."""
    n = lvl2.n
    lo = math.ceil(s * n - 1e-12)
    hi = math.ceil(t * n - 1e-12)
    terms = float(n) ** (2 * float(parse_hurst(nu))) * lvl2.X2[:, lo:hi] - 0.5 * np.eye(lvl2.d)
    h = terms.sum(axis=1)
    return h * n**-0.5 if normalize else h


def weighted_qv_statistic(yc: ControlledPath | np.ndarray, lvl2: Level2Batch, nu: float) -> np.ndarray:
    """n^{-1/2} J_0^1(y; h^n) with the matrix increment h^n, per path."""
    if float(parse_hurst(nu)) <= 0.25:
        raise RegimeMismatch(f"the area CLT needs nu > 1/4, got {nu}")
    y = yc.y if isinstance(yc, ControlledPath) else np.asarray(yc, dtype=float)
    n = lvl2.n
    if y.shape[-1] != n + 1:
        raise GridMismatch("weight and level-2 batch live on different grids")
    terms = float(n) ** (2 * float(parse_hurst(nu))) * lvl2.X2 - 0.5 * np.eye(lvl2.d)
    return n**-0.5 * np.einsum("mk,mkij->mij", y[..., :-1], terms)
