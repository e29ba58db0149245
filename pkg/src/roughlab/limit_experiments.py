"""Weighted sums of Hermite functionals of fBm increments and their limits.

The basic object is the one-step increment h^n_{t_k t_{k+1}} = f(n^nu dx_k)
(optionally normalised) and the weighted sum J_s^t(y; h^n) = sum y_{t_k} h^n_k.
Depending on the Hermite rank d of f compared with 1/(2 nu) the sum has a
mixed Gaussian limit, a Gaussian-plus-drift limit or a deterministic limit;
``limit_law_sample`` draws exactly from each.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import InvalidRegime, RegimeMismatch
from .gaussian_paths import HurstParam, PathBatch, path_generator
from .hermite_analysis import c_p, hermite_eval
from .rough_algebra import ControlledPath, Increment2, discrete_integral, remainder

__all__ = [
    "Regime",
    "RegimeDecision",
    "StatisticSample",
    "BlockDiagnostics",
    "LIMIT_TAG",
    "classify_regime",
    "exact_hurst",
    "build_h_n",
    "weighted_statistic",
    "riemann_weighted_sum",
    "limit_law_sample",
    "limit_parameters",
    "power_variation",
    "trapezoidal_sum",
    "compensated_sum",
    "block_decomposition",
    "brick_statistic",
    "default_block_count",
]

# stream tag for the auxiliary normals of limit_law_sample ("limit" in ASCII)
LIMIT_TAG = 0x6C696D6974


class Regime(str, enum.Enum):
    CLT = "CLT"
    CRITICAL = "Critical"
    DETERMINISTIC = "Deterministic"


def exact_hurst(nu) -> Fraction:
    """Exact rational value of nu; floats are read through their repr."""
    if isinstance(nu, HurstParam):
        return nu.exact
    try:
        return HurstParam(nu).exact
    except ValueError as exc:
        raise InvalidRegime(str(exc)) from exc


@dataclass(frozen=True)
class RegimeDecision:
    """Limit regime for rank ``d`` at Hurst ``nu``.

    The normalised statistic is n^{exponent} * sum_k y_{t_k} f(n^nu dx_k).
    """

    nu: Fraction
    d: int
    ell: int
    regime: Regime
    exponent: Fraction

    def scale(self, n: int) -> float:
        return float(n) ** float(self.exponent)


def classify_regime(nu, d: int) -> RegimeDecision:
    """Compare d with 1/(2 nu) in exact rational arithmetic."""
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise InvalidRegime(f"Hermite rank must be an integer >= 1, got {d!r}")
    d = int(d)
    q = exact_hurst(nu)
    threshold = 1 / (2 * q)
    if d > threshold:
        # smallest integer ell with ell > 1/(2 nu)
        ell = math.floor(threshold) + 1
        return RegimeDecision(q, d, ell, Regime.CLT, Fraction(-1, 2))
    if d == threshold:
        return RegimeDecision(q, d, d + 1, Regime.CRITICAL, Fraction(-1, 2))
    return RegimeDecision(q, d, d + 1, Regime.DETERMINISTIC, -(1 - d * q))


def _paths(x) -> np.ndarray:
    if isinstance(x, PathBatch):
        return x.component(0)
    return np.asarray(x, dtype=float)


def _as_function(f) -> Callable:
    if isinstance(f, (int, np.integer)):
        q = int(f)
        return lambda v: hermite_eval(q, v)
    return f


def build_h_n(f, x, nu, normalization: str | float = "none") -> Increment2:
    """h^n_{st} = c_n * sum_{s <= t_k < t} f(n^nu dx_k) as an increment per path.

    ``f`` is a callable or an integer q meaning H_q.  ``normalization`` is
    ``"none"``, ``"clt"`` (c_n = n^{-1/2}), ``"deterministic"`` (c_n =
    n^{d nu - 1}, with d taken from integer ``f``) or an explicit exponent.
    """
    x = _paths(x)
    n = x.shape[-1] - 1
    nu_f = float(exact_hurst(nu))
    if normalization == "none":
        c = 1.0
    elif normalization == "clt":
        c = n**-0.5
    elif normalization == "deterministic":
        if not isinstance(f, (int, np.integer)):
            raise ValueError("deterministic normalisation needs an integer Hermite order")
        c = float(n) ** (int(f) * nu_f - 1)
    else:
        c = float(n) ** float(normalization)
    steps = c * np.asarray(_as_function(f)(n**nu_f * np.diff(x, axis=-1)), dtype=float)
    cum = np.zeros(steps.shape[:-1] + (n + 1,))
    np.cumsum(steps, axis=-1, out=cum[..., 1:])
    inc = Increment2.from_path(cum)
    inc.step_values = steps
    return inc


def _step_values(h) -> np.ndarray:
    if isinstance(h, Increment2):
        steps = getattr(h, "step_values", None)
        return h.steps() if steps is None else steps
    return np.asarray(h, dtype=float)


def riemann_weighted_sum(y: np.ndarray, h, lo: int = 0, hi: int | None = None) -> np.ndarray:
    """sum_{lo <= k < hi} y_{t_k} h_{t_k t_{k+1}} along the last axis."""
    steps = _step_values(h)
    hi = steps.shape[-1] if hi is None else hi
    return np.sum(np.asarray(y)[..., lo:hi] * steps[..., lo:hi], axis=-1)


def weighted_statistic(yc: ControlledPath | np.ndarray, h, s: float = 0.0, t: float = 1.0):
    """J_s^t(y; h) = sum_{s <= t_k < t} y_{t_k} h_{t_k t_{k+1}} per path."""
    y = yc.y if isinstance(yc, ControlledPath) else np.asarray(yc, dtype=float)
    steps = _step_values(h)
    if steps.shape[-1] != y.shape[-1] - 1:
        raise ValueError("weight and increment live on different grids")
    # the weight enters as the 1-increment (u, v) -> y_v
    point = Increment2(lambda u, v: y[..., v], y.shape[-1] - 1)
    return discrete_integral(point, steps, s, t)


@dataclass
class StatisticSample:
    """Per-path statistic together with the parameters of its limit law."""

    values: np.ndarray
    S2: np.ndarray | None = None
    D: np.ndarray | None = None
    limit: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def limit_parameters(regime, yc: ControlledPath, sigma2: float, a_d: float, d: int):
    """Conditional variance S^2 and drift D of the limit, per path.

    S^2 = sigma^2 (1/n) sum y_{t_k}^2 and D = (-1/2)^d a_d (1/n) sum y^(d)_{t_k}
    (left-endpoint Riemann sums).  S^2 is zero in the deterministic regime and
    D is zero in the CLT regime.
    """
    reg = regime.regime if isinstance(regime, RegimeDecision) else Regime(regime)
    y = yc.y
    shape = y.shape[:-1]
    S2 = np.zeros(shape)
    D = np.zeros(shape)
    if reg is not Regime.DETERMINISTIC:
        S2 = sigma2 * np.mean(y[..., :-1] ** 2, axis=-1)
    if reg is not Regime.CLT:
        if d >= yc.ell:
            raise ValueError(f"drift needs y^({d}) but the weight has order {yc.ell}")
        D = (-0.5) ** d * a_d * np.mean(yc.levels[d][..., :-1], axis=-1)
    return S2, D


def limit_law_sample(
    regime,
    yc: ControlledPath,
    sigma2: float,
    a_d: float,
    d: int,
    seed: int,
    path_index=None,
) -> StatisticSample:
    """One exact draw S*Z + D of the limit per path.

    Z comes from the auxiliary stream keyed (seed, LIMIT_TAG, path index), so
    it is independent of the path and identical however paths are chunked.
    """
    S2, D = limit_parameters(regime, yc, sigma2, a_d, d)
    count = int(np.prod(S2.shape)) if S2.shape else 1
    if path_index is None:
        path_index = np.arange(count)
    path_index = np.atleast_1d(np.asarray(path_index))
    reg = regime.regime if isinstance(regime, RegimeDecision) else Regime(regime)
    if reg is Regime.DETERMINISTIC:
        Z = np.zeros(S2.shape)
    else:
        Z = np.array(
            [path_generator(seed, LIMIT_TAG, int(i)).standard_normal() for i in path_index]
        ).reshape(S2.shape)
    return StatisticSample(values=np.sqrt(S2) * Z + D, S2=S2, D=D, limit=np.sqrt(S2) * Z + D)


def power_variation(yc: ControlledPath, x, p: float, nu, variant: str = "weighted_centered"):
    """Power variations of fBm increments.

    ``weighted_centered``: n^e sum y_{t_k}(|n^nu dx_k|^p - c_p) with e = -1/2
    for nu >= 1/4 and e = 2 nu - 1 below.  ``plain_pvar``: (1/n) sum
    |n^nu dz_k|^p for the controlled path z = yc.y.
    """
    nu_q = exact_hurst(nu)
    nu_f = float(nu_q)
    x = _paths(x)
    n = x.shape[-1] - 1
    if variant == "weighted_centered":
        if nu_q > Fraction(1, 4):
            if p < 2:
                raise RegimeMismatch(f"weighted power variation needs p >= 2 for nu > 1/4, got {p}")
            e = -0.5
        else:
            if p < 4:
                raise RegimeMismatch(f"weighted power variation needs p >= 4 for nu <= 1/4, got {p}")
            e = -0.5 if nu_q == Fraction(1, 4) else 2 * nu_f - 1
        g = np.abs(n**nu_f * np.diff(x, axis=-1)) ** p - c_p(p)
        return float(n) ** e * np.sum(yc.y[..., :-1] * g, axis=-1)
    if variant == "plain_pvar":
        if not p * 2 * nu_q > 1:
            raise RegimeMismatch(f"p-variation limit needs p > 1/(2 nu), got p={p}, nu={nu}")
        z = yc.y
        return np.mean(np.abs(n**nu_f * np.diff(z, axis=-1)) ** p, axis=-1)
    raise RegimeMismatch(f"unknown power-variation variant {variant!r}")


def trapezoidal_sum(yc: ControlledPath) -> np.ndarray:
    """sum_k (y_{t_k} + y_{t_{k+1}})/2 * dx_k."""
    y, dx = yc.y, np.diff(yc.x, axis=-1)
    return np.sum(0.5 * (y[..., :-1] + y[..., 1:]) * dx, axis=-1)


def compensated_sum(yc: ControlledPath) -> np.ndarray:
    """sum_k sum_{i<ell} y^(i)_{t_k} (dx_k)^{i+1} / (i+1)!."""
    dx = np.diff(yc.x, axis=-1)
    total = np.zeros(dx.shape[:-1])
    for i, yi in enumerate(yc.levels):
        total = total + np.sum(yi[..., :-1] * dx ** (i + 1), axis=-1) / math.factorial(i + 1)
    return total


def default_block_count(n: int) -> int:
    m = int(math.floor(n ** (1 / 3) + 1e-9))
    return max(1, m)


@dataclass
class BlockDiagnostics:
    """Big-block split of J_0^1(y; h) over blocks [j/m, (j+1)/m).

    ``phi[i]`` = sum_j y^(i)_{u_j} J_{u_j}^{u_{j+1}}(x^i; h), ``R_phi`` =
    sum_j J_{u_j}^{u_{j+1}}(r^(0); h), ``block_sums[i]`` = sum_j
    J_{u_j}^{u_{j+1}}(x^i; h) and ``total`` = J_0^1(y; h).
    """

    m: int
    phi: np.ndarray
    R_phi: np.ndarray
    block_sums: np.ndarray
    total: np.ndarray

    @property
    def defect(self) -> np.ndarray:
        """Relative gap of the identity phi-sum + R_phi = total."""
        gap = np.abs(self.phi.sum(axis=0) + self.R_phi - self.total)
        scale = np.maximum(np.abs(self.total), np.abs(self.phi).sum(axis=0) + np.abs(self.R_phi))
        return gap / np.where(scale > 0, scale, 1.0)


def block_decomposition(yc: ControlledPath, h, m: int | None = None) -> BlockDiagnostics:
    steps = _step_values(h)
    n = yc.n
    if steps.shape[-1] != n:
        raise ValueError("weight and increment live on different grids")
    m = default_block_count(n) if m is None else m
    if not 1 <= m <= n:
        raise ValueError(f"block count must be in 1..{n}, got {m}")
    # block starts ceil(j n / m) = eps(j/m) are strictly increasing because m <= n
    starts = np.array([math.ceil(j * n / m) for j in range(m)])
    k = np.arange(n)
    owner = np.searchsorted(starts, k, side="right") - 1
    lo = starts[owner]
    dx = yc.x[..., k] - yc.x[..., lo]
    phi, sums = [], []
    for i in range(yc.ell):
        J = np.add.reduceat(dx**i / math.factorial(i) * steps, starts, axis=-1)
        sums.append(J.sum(axis=-1))
        phi.append(np.sum(yc.levels[i][..., starts] * J, axis=-1))
    R = np.sum(remainder(yc, 0, lo, k) * steps, axis=-1)
    total = np.sum(yc.y[..., :-1] * steps, axis=-1)
    return BlockDiagnostics(m, np.array(phi), R, np.array(sums), total)


def brick_statistic(x, q: int, nu) -> np.ndarray:
    """n^{-(1 - q nu)} J_0^1(x^q; h^{n,q}) with x^q_{0 t_k} = x_{t_k}^q / q!."""
    x = _paths(x)
    n = x.shape[-1] - 1
    nu_f = float(exact_hurst(nu))
    hq = hermite_eval(q, n**nu_f * np.diff(x, axis=-1))
    level = (x[..., :-1] - x[..., :1]) ** q / math.factorial(q)
    return float(n) ** (-(1 - q * nu_f)) * np.sum(level * hq, axis=-1)
