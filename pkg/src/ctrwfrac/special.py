"""Mittag-Leffler function on the negative real axis and the constant b(alpha).

``E_beta(-x)`` for ``0 < beta < 1`` is evaluated with three routes:

* the power series, in double precision while the cancellation factor
  ``exp(x**(1/beta))`` is mild; between that point and the onset of the
  asymptotic regime, a cached piecewise Chebyshev interpolant of
  ``log E_beta(-x)`` whose nodes come from the series in extended precision
  (mpmath);
* the divergent asymptotic series ``-sum_k (-x)^-k / Gamma(1 - beta k)``,
  optimally truncated at its smallest term, used only when that term is
  below the requested relative error;
* the Laplace-type representation
  ``E_beta(-x) = sin(beta pi)/(beta pi) int_0^inf exp(-x^(1/beta) u^(1/beta))
  / (u^2 + 2 u cos(beta pi) + 1) du``, as a last resort.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy import integrate, special

# Largest x**(1/beta) for which the double-precision series keeps ~1e-9.
_DOUBLE_SERIES_MAX = 10.0
# Beyond this the extended-precision series gets too long to be practical.
_MP_SERIES_MAX = 2000.0
# Upper end (in x**(1/beta)) of the interpolated band; the asymptotic series
# reaches 1e-9 by x**(1/beta) ~ 30 for every beta in (0, 1).
_BAND_MAX = 64.0


@dataclass(frozen=True)
class MLEvalConfig:
    """Evaluation policy for :func:`mittag_leffler`."""

    series_cutoff: float = 5.0
    asymptotic_terms: int = 400
    target_rel_err: float = 1e-8

    def __post_init__(self) -> None:
        if not self.series_cutoff > 0:
            raise ValueError("series_cutoff must be positive")
        if self.asymptotic_terms < 1:
            raise ValueError("asymptotic_terms must be >= 1")
        if not 0 < self.target_rel_err <= 1e-6:
            raise ValueError("target_rel_err must lie in (0, 1e-6]")


DEFAULT_ML = MLEvalConfig()


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not 0 < beta <= 1:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    return beta


def ml_series(beta: float, x, extended: bool | None = None) -> np.ndarray:
    """Power series for ``E_beta(-x)``, ``x >= 0``.

    With ``extended=None`` the double-precision path is taken where it is
    accurate and mpmath elsewhere.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    s = x ** (1.0 / beta)
    use_double = s <= _DOUBLE_SERIES_MAX if extended is None else np.full(x.shape, not extended)
    if np.any(use_double):
        out[use_double] = _series_double(beta, x[use_double])
    for i in np.flatnonzero(~use_double):
        out[i] = _series_mp(beta, x[i])
    return out


def _series_double(beta: float, x: np.ndarray) -> np.ndarray:
    xmax = float(x.max()) if x.size else 0.0
    if xmax == 0.0:
        return np.ones_like(x)
    # enough terms for the largest argument; terms below 1e-18 of unity
    k = 1
    logx = math.log(xmax)
    while k * logx - special.gammaln(1 + beta * k) > -42.0 or k * beta < 2 * xmax ** (1 / beta):
        k += 1
    ks = np.arange(k + 1)
    with np.errstate(divide="ignore"):
        logt = ks * np.log(x)[:, None] - special.gammaln(1 + beta * ks)
    logt[:, 0] = 0.0
    terms = np.where(ks % 2 == 0, 1.0, -1.0) * np.exp(logt)
    return terms.sum(axis=1)


def _series_mp(beta: float, x: float) -> float:
    s = x ** (1.0 / beta)
    if s > _MP_SERIES_MAX:
        return float("nan")
    dps = 25 + int(s / math.log(10)) + 5
    with mpmath.workdps(dps):
        xm = -mpmath.mpf(x)
        b = mpmath.mpf(beta)
        eps = mpmath.mpf(10) ** (-20)
        total = mpmath.mpf(1)
        power = mpmath.mpf(1)
        k = 0
        k_peak = s / beta
        while True:
            k += 1
            power *= xm
            term = power * mpmath.rgamma(1 + b * k)
            total += term
            if k > k_peak and abs(term) < eps * abs(total):
                break
        return float(total)


def ml_asymptotic(beta: float, x, n_terms: int = 400) -> tuple[np.ndarray, np.ndarray]:
    """Optimally truncated asymptotic series for ``E_beta(-x)``, ``x > 0``.

    Returns ``(value, error_estimate)`` where the estimate is the magnitude of
    the first omitted term.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ks = np.arange(1, n_terms + 1)
    logx = np.log(x)[:, None]
    # 1/Gamma(1 - beta k) = Gamma(beta k) sin(pi beta k) / pi
    envelope = -ks * logx + special.gammaln(beta * ks) - math.log(math.pi)
    sines = np.sin(math.pi * beta * ks)
    k_star = np.argmin(envelope, axis=1)
    mask = ks[None, :] <= k_star[:, None]  # terms 1..k_star (0-based k_star excluded)
    signs = np.where(ks % 2 == 1, 1.0, -1.0)
    with np.errstate(over="ignore"):
        terms = signs * sines * np.exp(envelope)
    value = np.where(mask, terms, 0.0).sum(axis=1)
    err = np.exp(envelope[np.arange(x.size), k_star])
    return value, err


def ml_integral(beta: float, x: float) -> float:
    """``E_beta(-x)`` from its Laplace-type integral; ``0 < beta < 1``."""
    s = float(x) ** (1.0 / beta)
    c = math.cos(beta * math.pi)

    def f(u):
        return math.exp(-s * u ** (1.0 / beta)) / (u * u + 2.0 * u * c + 1.0)

    pre = math.sin(beta * math.pi) / (beta * math.pi)
    parts = [integrate.quad(f, 0.0, 1.0, epsabs=0, epsrel=1e-13, limit=200)[0],
             integrate.quad(f, 1.0, 2.0, epsabs=0, epsrel=1e-13, limit=200)[0],
             integrate.quad(f, 2.0, np.inf, epsabs=0, epsrel=1e-13, limit=200)[0]]
    return pre * math.fsum(parts)


def mittag_leffler(beta: float, z, cfg: MLEvalConfig = DEFAULT_ML):
    """One-parameter Mittag-Leffler function ``E_beta(z)`` for real ``z <= 0``.

    Accepts a scalar or an array; returns the same shape.
    """
    beta = _check_beta(beta)
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr > 0):
        raise ValueError("mittag_leffler is only implemented for z <= 0")
    if beta == 1.0:
        out = np.exp(z_arr)
        return float(out) if out.ndim == 0 else out

    x = -z_arr.ravel()
    out = np.ones_like(x)
    todo = x > 0
    if np.any(todo):
        out[todo] = _ml_negative(beta, x[todo], cfg)
    out = out.reshape(z_arr.shape)
    return float(out) if out.ndim == 0 else out


def _terms_needed(beta: float, x_min: float, n_max: int) -> int:
    """Asymptotic terms that matter for every argument ``>= x_min``.

    The envelope falls with ``x``, so the smallest argument's optimal
    truncation point (or the point where its terms drop below 1e-17 of the
    value) bounds what any larger argument needs.
    """
    ks = np.arange(1, n_max + 1)
    env = -ks * math.log(x_min) + special.gammaln(beta * ks)
    last = int(np.argmin(env)) + 2
    below = np.flatnonzero(env < math.log(1e-17) - math.log(x_min))
    if below.size:
        last = min(last, int(below[0]) + 2)
    return min(last, n_max)


@lru_cache(maxsize=256)
def _asymptotic_onset(beta: float, cfg: MLEvalConfig) -> float:
    """Smallest x beyond which the truncated asymptotic series meets the target."""
    xs = np.geomspace(0.5, 1e4, 600)
    val, err = ml_asymptotic(beta, xs, cfg.asymptotic_terms)
    ok = err <= 0.1 * cfg.target_rel_err * np.abs(val)
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return float(xs[0])
    if bad[-1] == xs.size - 1:
        return np.inf
    return float(xs[bad[-1] + 1])


@dataclass(frozen=True)
class _Band:
    lo: float
    hi: float
    edges: np.ndarray
    coefs: tuple

    def __call__(self, x: np.ndarray) -> np.ndarray:
        piece = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.coefs) - 1)
        out = np.empty_like(x)
        for i in np.unique(piece):
            m = piece == i
            a, b = self.edges[i], self.edges[i + 1]
            out[m] = np.polynomial.chebyshev.chebval((2 * x[m] - a - b) / (b - a), self.coefs[i])
        return np.exp(out)


def _fit_piece(beta: float, a: float, b: float, deg: int, tol: float):
    nodes = np.cos(np.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
    x = 0.5 * (b - a) * nodes + 0.5 * (a + b)
    logv = np.log([_series_mp(beta, xi) for xi in x])
    coefs = np.polynomial.chebyshev.chebfit(nodes, logv, deg)
    mid = np.array([a + 0.37 * (b - a), a + 0.81 * (b - a)])
    check = np.array([_series_mp(beta, xi) for xi in mid])
    approx = np.exp(np.polynomial.chebyshev.chebval((2 * mid - a - b) / (b - a), coefs))
    return coefs, float(np.max(np.abs(approx / check - 1)))


@lru_cache(maxsize=64)
def _mid_band(beta: float, lo: float, hi: float, tol: float) -> _Band:
    """Piecewise Chebyshev fit of log E_beta(-x) on [lo, hi], refined until ``tol``."""
    edges = [lo, hi]
    coefs: dict[tuple[float, float], np.ndarray] = {}
    todo = [(lo, hi)]
    while todo:
        a, b = todo.pop()
        c, err = _fit_piece(beta, a, b, 24, tol)
        if err <= tol or b - a < 1e-3:
            coefs[(a, b)] = c
        else:
            m = 0.5 * (a + b)
            edges.append(m)
            todo += [(a, m), (m, b)]
    edges = sorted(set(edges))
    ordered = tuple(coefs[(a, b)] for a, b in zip(edges[:-1], edges[1:]))
    return _Band(lo, hi, np.array(edges), ordered)


def _ml_negative(beta: float, x: np.ndarray, cfg: MLEvalConfig) -> np.ndarray:
    out = np.full_like(x, np.nan)
    x_double = _DOUBLE_SERIES_MAX ** beta
    onset = _asymptotic_onset(beta, cfg)
    # near the origin prefer the series, further out the asymptotic expansion
    band_hi = min(max(cfg.series_cutoff, onset), _BAND_MAX ** beta)
    use_double = x <= x_double
    use_asym = (x > band_hi) & (x >= onset)
    use_band = ~use_double & (x <= band_hi)
    if np.any(use_double):
        out[use_double] = _series_double(beta, x[use_double])
    if np.any(use_asym):
        xa = x[use_asym]
        n_terms = _terms_needed(beta, float(xa.min()), cfg.asymptotic_terms)
        out[use_asym] = ml_asymptotic(beta, xa, n_terms)[0]
    if np.any(use_band):
        band = _mid_band(beta, x_double, band_hi, 0.1 * cfg.target_rel_err)
        out[use_band] = band(x[use_band])
    for i in np.flatnonzero(~np.isfinite(out)):
        out[i] = ml_integral(beta, x[i])
    return out


def b_alpha(alpha, d: int = 1):
    """Normalizing constant of the hypersingular operator in dimension ``d``.

    ``alpha Gamma(alpha/2) Gamma((d+alpha)/2) sin(alpha pi/2) / (2^(2-alpha) pi^(1+d/2))``,
    which makes the operator's symbol equal to ``-|xi|^alpha``.
    """
    a = np.asarray(alpha, dtype=float)
    if np.any((a <= 0) | (a >= 2)):
        raise ValueError("alpha must lie strictly inside (0, 2)")
    if int(d) != d or d < 1:
        raise ValueError("dimension must be a positive integer")
    val = (a * special.gamma(a / 2) * special.gamma((d + a) / 2) * np.sin(a * np.pi / 2)
           / (2.0 ** (2 - a) * np.pi ** (1 + d / 2)))
    return float(val) if val.ndim == 0 else val
