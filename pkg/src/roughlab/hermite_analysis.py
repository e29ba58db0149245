"""Hermite polynomials, L2(gamma) expansions and the constants built on them.

Everything here is with respect to the standard Gaussian measure gamma:
H_q are the probabilists' Hermite polynomials, E[H_q(N) H_r(N)] = q! 1{q=r},
and a function f is expanded as f = sum_q a_q H_q with a_q = E[f(N) H_q(N)]/q!.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy.special import gammaln, roots_hermitenorm, roots_legendre

from .errors import DivergentSeries, QuadratureUnstable
from .gaussian_paths import fbm_rho, parse_hurst, rho_power_sum

__all__ = [
    "HermiteExpansion",
    "AdmissibilityReport",
    "hermite_eval",
    "hermite_table",
    "gaussian_rule",
    "expand",
    "c_p",
    "a_2q",
    "power_expansion",
    "breuer_major_sigma2",
    "admissibility",
    "RANK_TOL",
]

RANK_TOL = 1e-10
STABILITY_TOL = 1e-8


def hermite_eval(q: int, x):
    """H_q(x) by the recurrence H_{q+1} = x H_q - q H_{q-1}."""
    if q < 0:
        raise ValueError("Hermite order must be >= 0")
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), x.copy()
    if q == 0:
        return prev if prev.ndim else float(prev)
    for k in range(1, q):
        prev, cur = cur, x * cur - k * prev
    return cur if cur.ndim else float(cur)


def hermite_table(Q: int, x) -> np.ndarray:
    """Array of H_0(x) .. H_Q(x) stacked on a new leading axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty((Q + 1,) + x.shape)
    out[0] = 1.0
    if Q >= 1:
        out[1] = x
    for k in range(1, Q):
        out[k + 1] = x * out[k] - k * out[k - 1]
    return out


def gaussian_rule(nodes: int, breakpoints: Sequence[float] | None = None, reach: float = 26.0):
    """Quadrature nodes and weights for integrals against gamma.

    Without breakpoints this is Gauss-Hermite (weights summing to one).  With
    breakpoints the line [-reach, reach] is cut at the breakpoints and into
    unit panels, each integrated by Gauss-Legendre against the Gaussian
    density; use this for integrands with kinks, where Gauss-Hermite only
    converges algebraically.
    """
    if breakpoints is None:
        x, w = roots_hermitenorm(nodes)
        return x, w / math.sqrt(2 * math.pi)
    cuts = set(np.linspace(-reach, reach, int(2 * reach) + 1).tolist())
    cuts.update(float(b) for b in breakpoints if -reach < b < reach)
    cuts = np.array(sorted(cuts))
    per = max(16, nodes // (len(cuts) - 1))
    gx, gw = roots_legendre(per)
    a, b = cuts[:-1, None], cuts[1:, None]
    x = (0.5 * (b - a) * gx + 0.5 * (a + b)).ravel()
    w = (0.5 * (b - a) * gw).ravel() * np.exp(-0.5 * x**2) / math.sqrt(2 * math.pi)
    return x, w


def _log_factorial(q):
    return gammaln(np.asarray(q, dtype=float) + 1.0)


@dataclass
class HermiteExpansion:
    """Coefficients a_0..a_Q of f in the Hermite basis.

    ``norm2`` is E[f(N)^2]; ``tail_bound`` bounds sum_{q>Q} a_q^2 q! and is
    the Parseval residual when ``norm2`` is known.  ``envelope = (C, m)``
    records a caller-declared decay a_q^2 q! <= C q^{-m}.
    """

    coeffs: np.ndarray
    rank: int
    tail_bound: float
    norm2: float
    nodes: int = 0
    envelope: tuple[float, float] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def Q_max(self) -> int:
        return len(self.coeffs) - 1

    @property
    def energies(self) -> np.ndarray:
        """a_q^2 q!, the L2(gamma) mass of each chaos component."""
        q = np.arange(len(self.coeffs))
        return self.coeffs**2 * np.exp(_log_factorial(q))

    @property
    def finite(self) -> bool:
        if self.envelope is not None:
            return False
        return self.tail_bound <= 1e-20 * max(self.norm2, 1e-300)

    def __call__(self, x):
        return np.tensordot(self.coeffs, hermite_table(self.Q_max, x), axes=1)

    @classmethod
    def from_coefficients(
        cls,
        coeffs: Sequence[float],
        *,
        norm2: float | None = None,
        envelope: tuple[float, float] | None = None,
    ) -> "HermiteExpansion":
        """Wrap known coefficients; without ``norm2`` the expansion is taken as exact."""
        coeffs = np.asarray(coeffs, dtype=float)
        q = np.arange(len(coeffs))
        energy = float(np.sum(coeffs**2 * np.exp(_log_factorial(q))))
        if norm2 is not None:
            tail = max(norm2 - energy, 0.0)
        elif envelope is not None:
            C, m = envelope
            tail = C * (len(coeffs) - 1) ** (1 - m) / (m - 1) if m > 1 else math.inf
        else:
            tail = 0.0
        norm2 = energy + tail if norm2 is None else norm2
        return cls(coeffs, _rank(coeffs, norm2), tail, float(norm2), 0, envelope)


def _rank(coeffs: np.ndarray, norm2: float) -> int:
    q = np.arange(len(coeffs))
    size = np.abs(coeffs) * np.exp(0.5 * _log_factorial(q))
    hits = np.nonzero(size[1:] > RANK_TOL * math.sqrt(max(norm2, 0.0)))[0]
    return int(hits[0] + 1) if hits.size else 0


def _project(f: Callable, Q: int, nodes: int, breakpoints, reach: float):
    x, w = gaussian_rule(nodes, breakpoints, reach)
    fx = np.asarray(f(x), dtype=float) * np.ones_like(x)
    H = hermite_table(Q, x)
    q = np.arange(Q + 1)
    coeffs = (H @ (w * fx)) / np.exp(_log_factorial(q))
    norm2 = float(np.dot(w, fx**2))
    return coeffs, norm2


def expand(
    f: Callable,
    Q_max: int = 64,
    nodes: int = 200,
    *,
    breakpoints: Sequence[float] | None = None,
    envelope: tuple[float, float] | None = None,
    check: bool = True,
) -> HermiteExpansion:
    """Hermite coefficients of ``f`` up to order ``Q_max``.

    The projection is repeated with twice the nodes; if any coefficient up to
    order rank + 4 moves by more than 1e-8 (measured as sqrt(q!) |a_q| against
    ||f||) the quadrature is declared unstable.  Pass ``breakpoints`` for
    functions with kinks (|x|^p has one at 0).
    """
    reach = max(12.0, 2.0 * math.sqrt(Q_max + 1) + 10.0)
    coeffs, norm2 = _project(f, Q_max, nodes, breakpoints, reach)
    rank = _rank(coeffs, norm2)
    if check:
        fine, fine_norm2 = _project(f, Q_max, 2 * nodes, breakpoints, reach)
        top = min(Q_max, rank + 4)
        q = np.arange(top + 1)
        scale = math.sqrt(max(norm2, fine_norm2, 1e-300))
        drift = np.abs(coeffs[: top + 1] - fine[: top + 1]) * np.exp(0.5 * _log_factorial(q))
        if drift.max() > STABILITY_TOL * scale:
            raise QuadratureUnstable(
                f"coefficient a_{int(drift.argmax())} moved by {drift.max() / scale:.2e} "
                f"(relative) when doubling {nodes} nodes"
            )
    q = np.arange(Q_max + 1)
    energy = float(np.sum(coeffs**2 * np.exp(_log_factorial(q))))
    tail = max(norm2 - energy, 0.0)
    if tail <= 1e-13 * norm2:
        tail = 0.0
    return HermiteExpansion(coeffs, rank, tail, norm2, nodes, envelope)


def c_p(p: float) -> float:
    """E|N|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi)."""
    if p <= -1:
        raise ValueError("E|N|^p is infinite for p <= -1")
    if float(p).is_integer() and 0 <= p < 300:
        k = int(p) // 2
        if int(p) % 2 == 0:
            return float(math.prod(range(1, 2 * k, 2)))
        return 2.0**k * math.factorial(k) * math.sqrt(2 / math.pi)
    if p < 300:
        return 2.0 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)
    return math.exp(0.5 * p * math.log(2.0) + math.lgamma((p + 1) / 2) - 0.5 * math.log(math.pi))


def _c_mp(p):
    return mpmath.power(2, p / 2) * mpmath.gamma((p + 1) / 2) / mpmath.sqrt(mpmath.pi)


def a_2q(p: float, q: int) -> float:
    """Coefficient of H_{2q} in |x|^p - c_p, from absolute moments.

    a_{2q} = sum_r (-1)^r / (2^r r! (2q-2r)!) (c_{2q-2r+p} - c_p c_{2q-2r}).
    The alternating sum cancels heavily, so it is evaluated at 60 digits.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    if p <= -0.5:
        raise ValueError("need p > -1/2")
    with mpmath.workdps(60):
        P = mpmath.mpf(p)
        cp = _c_mp(P)
        total = mpmath.mpf(0)
        for r in range(q + 1):
            j = 2 * q - 2 * r
            term = (_c_mp(j + P) - cp * _c_mp(mpmath.mpf(j))) / (
                mpmath.power(2, r) * mpmath.factorial(r) * mpmath.factorial(j)
            )
            total += term if r % 2 == 0 else -term
        return float(total)


def power_expansion(p: float, Q_max: int = 64) -> HermiteExpansion:
    """Expansion of |x|^p - c_p from the closed-form coefficients (odd ones vanish)."""
    coeffs = np.zeros(Q_max + 1)
    for q in range(1, Q_max // 2 + 1):
        coeffs[2 * q] = a_2q(p, q)
    norm2 = c_p(2 * p) - c_p(p) ** 2
    exp = HermiteExpansion.from_coefficients(coeffs, norm2=norm2)
    exp.meta["p"] = p
    return exp


def breuer_major_sigma2(exp: HermiteExpansion, nu: float, tol: float = 1e-10) -> float:
    """sigma^2 = sum_q q! a_q^2 sum_k rho(k)^q for fBm increments with Hurst nu.

    The unresolved tail (mass beyond Q_max) enters with weight S(q) ~ 1; its
    deviation is bounded by 2 sum_{k>=1} |rho(k)|^{Q_max+1}.  ``nu`` may be a
    string such as "1/4".
    """
    nu = float(parse_hurst(nu))
    d = exp.rank
    if d == 0:
        return 0.0
    if d * (2.0 - 2.0 * nu) <= 1.0:
        raise DivergentSeries(f"rank {d} is too low for summable correlations at nu={nu}")
    energies = exp.energies
    total = 0.0
    partial = 0.0
    for q in range(d, exp.Q_max + 1):
        e = energies[q]
        if e == 0.0:
            continue
        total += e * rho_power_sum(q, nu, tol=tol / 10)
        partial += e
    tail = exp.tail_bound
    if tail > 0:
        total += tail
        k = np.arange(1, 1 << 16)
        slack = tail * 2.0 * float(np.sum(np.abs(fbm_rho(k, nu)) ** (exp.Q_max + 1)))
        if slack > tol:
            warnings.warn(
                f"coefficient tail limits sigma^2 accuracy to {slack:.2e} > tol={tol:.1e}",
                RuntimeWarning,
                stacklevel=2,
            )
    return float(total)


@dataclass(frozen=True)
class AdmissibilityReport:
    ell: int
    weighted_sum: float
    tail_bound: float
    admissible: bool
    decay: float | None = None


def admissibility(exp: HermiteExpansion, ell: int) -> AdmissibilityReport:
    """Check sum_q a_q^2 q! q^{2(ell-1)} < infinity.

    Finite expansions are admissible outright.  Otherwise the decay exponent
    m of a_q^2 q! ~ C q^{-m} comes from the declared envelope, or else from a
    log-log fit over the upper half of the computed coefficients, and the
    series converges iff m - 2(ell - 1) > 1.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    q = np.arange(len(exp.coeffs))
    energies = exp.energies
    weight = q.astype(float) ** (2 * (ell - 1))
    start = max(exp.rank, 1)
    weighted = float(np.sum(energies[start:] * weight[start:]))
    if exp.finite:
        return AdmissibilityReport(ell, weighted, 0.0, True, None)
    if exp.envelope is not None:
        C, m = exp.envelope
    else:
        C, m = _fit_decay(q, energies, exp.norm2)
        if m is None:
            return AdmissibilityReport(ell, weighted, math.inf, False, None)
    s = m - 2 * (ell - 1)
    Q = exp.Q_max
    if s <= 1:
        return AdmissibilityReport(ell, weighted, math.inf, False, m)
    tail = C * Q ** (1 - s) / (s - 1)
    return AdmissibilityReport(ell, weighted, float(tail), True, m)


def _fit_decay(q: np.ndarray, energies: np.ndarray, norm2: float):
    Q = len(q) - 1
    # quadrature noise sits near 1e-32 norm2; ignore it
    sel = (q >= max(2, Q // 2)) & (energies > 1e-20 * norm2)
    if sel.sum() < 3:
        return None, None
    slope, intercept = np.polyfit(np.log(q[sel]), np.log(energies[sel]), 1)
    m = -slope
    # envelope constant covering every fitted point
    C = float(np.max(energies[sel] * q[sel] ** m))
    return C, float(m)
