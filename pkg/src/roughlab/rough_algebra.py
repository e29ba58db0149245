"""Discrete increment calculus on the grid D_n = {k/n}.

Grid points are addressed by integer index ``k`` (time ``k/n``).  Paths are
arrays whose last axis runs over the n + 1 grid points; any leading axes are
batch axes (paths, components) and are carried through every operation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DivergentSeries, NotSewable, OutOfGrid

__all__ = [
    "Increment2",
    "RoughLevel",
    "ControlledPath",
    "HolderSeminorm",
    "SewingCheck",
    "delta1",
    "delta2",
    "level",
    "chen_defect",
    "discrete_integral",
    "integral_on_grid",
    "controlled_from_function",
    "remainder",
    "holder_constant",
    "holder_seminorm",
    "sewing_constant",
    "sewing_check",
    "sewing_table",
    "epsilon_index",
    "DENSE_MAX",
]

# dense tables above this grid size would not fit comfortably in memory
DENSE_MAX = 1 << 12


def _check_grid(n: int, *points) -> None:
    for p in points:
        if isinstance(p, (int, np.integer)):
            if not 0 <= p <= n:
                raise OutOfGrid(f"grid index {p!r} outside 0..{n}")
            continue
        arr = np.asarray(p)
        if arr.size and (arr.min() < 0 or arr.max() > n):
            raise OutOfGrid(f"grid index {p!r} outside 0..{n}")


def _check_ordered(*points) -> None:
    for a, b in zip(points, points[1:]):
        if np.any(np.asarray(a) > np.asarray(b)):
            raise OutOfGrid(f"grid indices must be ordered, got {points!r}")


def epsilon_index(t: float, n: int) -> int:
    """Index of the grid point eps(t): the upper end of the cell containing t.

    eps(t) = t_k for t in (t_{k-1}, t_k]; we set eps(0) = 0.
    """
    if not 0 <= t <= 1:
        raise OutOfGrid(f"time {t} outside [0, 1]")
    k = math.ceil(t * n - 1e-12)
    return max(0, min(n, k))


def delta1(f: np.ndarray, s, t):
    """f_t - f_s for grid indices s <= t (broadcast over leading axes)."""
    f = np.asarray(f)
    n = f.shape[-1] - 1
    _check_grid(n, s, t)
    _check_ordered(s, t)
    return f[..., t] - f[..., s]


class Increment2:
    """A two-parameter increment R_{st}, s <= t on the grid.

    Evaluation is lazy through ``func(s, t)`` (vectorised over index arrays);
    ``table()`` materialises the dense (n+1) x (n+1) upper table when the
    grid is small enough.
    """

    def __init__(self, func: Callable, n: int, table: np.ndarray | None = None):
        self._func = func
        self.n = n
        self._table = table

    @classmethod
    def from_table(cls, table: np.ndarray) -> "Increment2":
        table = np.asarray(table, dtype=float)
        n = table.shape[-1] - 1

        def func(s, t):
            return table[..., s, t]

        return cls(func, n, table)

    @classmethod
    def from_path(cls, f: np.ndarray) -> "Increment2":
        """The increment (delta f)_{st} = f_t - f_s."""
        f = np.asarray(f, dtype=float)
        return cls(lambda s, t: f[..., t] - f[..., s], f.shape[-1] - 1)

    def __call__(self, s, t):
        _check_grid(self.n, s, t)
        return self._func(s, t)

    def table(self) -> np.ndarray:
        """Dense table, entries below the diagonal set to zero."""
        if self._table is not None:
            return self._table
        if self.n > DENSE_MAX:
            raise MemoryError(f"dense table refused for n={self.n} > {DENSE_MAX}")
        idx = np.arange(self.n + 1)
        S, T = np.meshgrid(idx, idx, indexing="ij")
        tab = self._func(S, T)
        self._table = np.where(S <= T, tab, 0.0)
        return self._table

    def steps(self) -> np.ndarray:
        """One-step values R_{t_k t_{k+1}}, k = 0..n-1."""
        k = np.arange(self.n)
        return self._func(k, k + 1)


def delta2(g: Increment2, s, u, t):
    """Defect g_{st} - g_{su} - g_{ut}; vanishes identically when g = delta f."""
    _check_grid(g.n, s, u, t)
    _check_ordered(s, u, t)
    return g(s, t) - g(s, u) - g(u, t)


@dataclass(frozen=True)
class RoughLevel:
    """Level i of the geometric 1-d lift: x^i_{st} = (x_t - x_s)^i / i!."""

    i: int
    base: np.ndarray

    def __call__(self, s, t):
        if self.i == 0:
            return np.ones_like(np.asarray(self.base[..., t] - self.base[..., s], dtype=float))
        return (self.base[..., t] - self.base[..., s]) ** self.i / math.factorial(self.i)

    def as_increment(self) -> Increment2:
        base = np.asarray(self.base, dtype=float)
        return Increment2(self, base.shape[-1] - 1)


def level(x: np.ndarray, i: int) -> Increment2:
    """The i-th rough-path level of the path ``x`` as an increment (x^0 = 1)."""
    if i < 0:
        raise ValueError("level index must be >= 0")
    return RoughLevel(i, np.asarray(x, dtype=float)).as_increment()


def chen_defect(x: np.ndarray, i: int, s, u, t):
    """|delta x^i_{sut} - sum_{j=1}^{i-1} x^{i-j}_{su} x^j_{ut}|."""
    if i < 1:
        raise ValueError("Chen identity is stated for levels i >= 1")
    lv = [RoughLevel(j, np.asarray(x, dtype=float)) for j in range(i + 1)]
    lhs = lv[i](s, t) - lv[i](s, u) - lv[i](u, t)
    rhs = sum(lv[i - j](s, u) * lv[j](u, t) for j in range(1, i))
    return np.abs(lhs - rhs)


def _one_step(g, n: int | None = None) -> np.ndarray:
    if isinstance(g, Increment2):
        return g.steps()
    return np.asarray(g, dtype=float)


def discrete_integral(f, g, s: float, t: float):
    """J_s^t(f; g) = sum_{s <= t_k < t} f_{eps(s) t_k} g_{t_k t_{k+1}}.

    ``f`` is a path (array over grid points, contributes delta f_{eps(s) t_k}),
    an :class:`Increment2`, or the scalar 1 for the level x^0.  ``g`` is either
    an :class:`Increment2` or the array of its one-step values.  ``s`` and
    ``t`` are real times in [0, 1].
    """
    h = _one_step(g)
    n = h.shape[-1]
    if not 0 <= s <= t <= 1:
        raise OutOfGrid(f"need 0 <= s <= t <= 1, got s={s}, t={t}")
    lo = epsilon_index(s, n)
    hi = max(lo, min(n, math.ceil(t * n - 1e-12)))
    return integral_on_grid(f, h, lo, hi)


def integral_on_grid(f, g, lo: int, hi: int):
    """J between grid indices: sum_{lo <= k < hi} f_{lo k} g_{k k+1}."""
    h = _one_step(g)
    n = h.shape[-1]
    _check_grid(n, lo, hi)
    if hi <= lo:
        return np.zeros(h.shape[:-1])
    k = np.arange(lo, hi)
    if isinstance(f, Increment2):
        w = f(lo, k)
    elif np.isscalar(f):
        w = np.full(k.shape, float(f))
    else:
        fa = np.asarray(f, dtype=float)
        w = fa[..., k] - fa[..., lo : lo + 1]
    return np.sum(w * h[..., lo:hi], axis=-1)


@dataclass
class ControlledPath:
    """Weight process (y, y', ..., y^(ell-1)) controlled by the path ``x``.

    ``levels[i]`` has the same shape as ``x``.  ``alpha`` is the control
    exponent; ``nu`` the regularity of ``x`` used for remainder exponents.
    """

    levels: tuple
    x: np.ndarray
    nu: float = 0.5
    alpha: float = 0.5

    def __post_init__(self) -> None:
        self.levels = tuple(np.asarray(v, dtype=float) for v in self.levels)
        self.x = np.asarray(self.x, dtype=float)
        if not self.levels:
            raise ValueError("a controlled path needs at least one level")
        for v in self.levels:
            if v.shape[-1] != self.x.shape[-1]:
                raise ValueError("levels and x must live on the same grid")

    @property
    def ell(self) -> int:
        return len(self.levels)

    @property
    def y(self) -> np.ndarray:
        return self.levels[0]

    @property
    def n(self) -> int:
        return self.x.shape[-1] - 1

    def restrict(self, n_coarse: int) -> "ControlledPath":
        """Same weight read on the coarser grid k/n_coarse."""
        step = self.n // n_coarse
        if step * n_coarse != self.n:
            raise ValueError(f"{n_coarse} does not divide {self.n}")
        return ControlledPath(
            tuple(v[..., ::step] for v in self.levels), self.x[..., ::step], self.nu, self.alpha
        )


def controlled_from_function(
    derivatives: Sequence[Callable], x: np.ndarray, ell: int, nu: float = 0.5, alpha: float = 0.5
) -> ControlledPath:
    """Controlled path y^(i) = f^(i)(x), with y^(0) shifted so that y_0 = 0.

    ``derivatives`` lists f, f', f'', ... and must contain at least ``ell``
    callables.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if len(derivatives) < ell:
        raise ValueError(f"need {ell} derivatives, got {len(derivatives)}")
    x = np.asarray(x, dtype=float)
    levels = [np.asarray(derivatives[i](x), dtype=float) * np.ones_like(x) for i in range(ell)]
    levels[0] = levels[0] - levels[0][..., :1]
    return ControlledPath(tuple(levels), x, nu, alpha)


def remainder(yc: ControlledPath, k: int, s, t):
    """r^(k)_{st} = delta y^(k)_{st} - sum_{j>k} y^(j)_s x^{j-k}_{st}.

    ``s`` and ``t`` are grid indices, scalars or broadcastable arrays.
    """
    if not 0 <= k < yc.ell:
        raise ValueError(f"remainder index k={k} outside 0..{yc.ell - 1}")
    _check_grid(yc.n, s, t)
    s, t = np.broadcast_arrays(np.asarray(s), np.asarray(t))
    x = yc.x
    dx = x[..., t] - x[..., s]
    r = yc.levels[k][..., t] - yc.levels[k][..., s]
    for j in range(k + 1, yc.ell):
        r = r - yc.levels[j][..., s] * dx ** (j - k) / math.factorial(j - k)
    return r


def holder_constant(yc: ControlledPath, k: int) -> np.ndarray:
    """Estimate G = sup_{s<t} |r^(k)_{st}| / (t-s)^{(ell-k) nu} over the grid."""
    n = yc.n
    mu = (yc.ell - k) * yc.nu
    best = np.zeros(yc.x.shape[:-1])
    for s in range(n):
        t = np.arange(s + 1, n + 1)
        ratio = np.abs(remainder(yc, k, s, t)) / ((t - s) / n) ** mu
        best = np.maximum(best, ratio.max(axis=-1))
    return best


@dataclass(frozen=True)
class HolderSeminorm:
    mu: float
    value: float


def holder_seminorm(R: Increment2, mu: float) -> HolderSeminorm:
    """sup over grid pairs s < t of |R_{st}| / (t - s)^mu (times k/n)."""
    tab = R.table()
    n = R.n
    idx = np.arange(n + 1)
    gap = (idx[None, :] - idx[:, None]) / n
    mask = gap > 0
    ratio = np.abs(tab[mask]) / gap[mask] ** mu
    return HolderSeminorm(mu, float(ratio.max()) if ratio.size else 0.0)


# Bernoulli numbers B_2, B_4, ..., B_12
_BERNOULLI = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730)


def _zeta(mu: float, N: int = 16) -> float:
    # Euler-Maclaurin: head sum to N-1, integral tail, boundary and Bernoulli terms
    head = math.fsum(l ** (-mu) for l in range(1, N))
    tail = N ** (1 - mu) / (mu - 1) + 0.5 * N ** (-mu)
    rising = mu
    for j, b in enumerate(_BERNOULLI, start=1):
        tail += b / math.factorial(2 * j) * rising * N ** (-mu - 2 * j + 1)
        rising *= (mu + 2 * j - 1) * (mu + 2 * j)
    return head + tail


def sewing_constant(mu: float) -> float:
    """K_mu = 2^mu * zeta(mu), the constant of the discrete sewing bound."""
    if mu <= 1:
        raise DivergentSeries(f"sewing constant diverges for mu={mu} <= 1")
    return 2.0**mu * _zeta(mu)


@dataclass(frozen=True)
class SewingCheck:
    lhs: float
    rhs: float
    ok: bool


def sewing_table(R) -> np.ndarray:
    tab = R.table() if isinstance(R, Increment2) else np.asarray(R, dtype=float)
    return tab


def sewing_check(R, mu: float) -> SewingCheck:
    """Compare |R|_mu with K_mu |delta R|_mu for R vanishing on grid steps."""
    tab = sewing_table(R)
    n = tab.shape[-1] - 1
    k = np.arange(n)
    if np.any(tab[k, k + 1] != 0):
        raise NotSewable("R must vanish on consecutive grid points")
    K = sewing_constant(mu)
    lhs = holder_seminorm(Increment2.from_table(tab), mu).value
    rhs = K * _defect_seminorm(tab, mu)
    return SewingCheck(lhs, rhs, lhs <= rhs * (1 + 1e-9))


def _defect_seminorm(tab: np.ndarray, mu: float) -> float:
    # sup over s < u < t of |R_st - R_su - R_ut| / (t - s)^mu, all triples at once
    n = tab.shape[-1] - 1
    if n < 2:
        return 0.0
    idx = np.arange(n + 1)
    S, U, T = np.meshgrid(idx, idx, idx, indexing="ij")
    mask = (S < U) & (U < T)
    d = np.abs(tab[S, T] - tab[S, U] - tab[U, T])
    gap = ((T - S) / n).astype(float)
    return float(np.max(np.where(mask, d / np.where(mask, gap, 1.0) ** mu, 0.0)))
