"""Exact characteristic functions, densities by Fourier inversion, Laplace objects.

The solution of the space-time fractional equation started from a delta has
characteristic function ``E_beta(Psi(xi) t^beta)``. Densities are obtained by
FFT on an internal grid whose spacing equals the user grid spacing (so the
frequency cutoff is the Nyquist frequency of the user grid) and whose period
is chosen from the algebraic tail of the density to keep the periodization
error small.

For ``beta = 1`` the transform ``exp(t Psi)`` decays exponentially and the
cutoff is checked directly. For ``beta < 1`` the transform decays only like
``|xi|^-alpha``; the part above the cutoff is added back point by point with
an oscillatory (QAWF) quadrature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy import integrate, special

from .errors import AliasingError, TailError
from .kernel import lattice_norms, lattice_zeta
from .measures import SpectralMeasure, TimeMeasure
from .special import mittag_leffler

CUTOFF_TOL = 1e-12
ALIAS_TOL = 1e-8
MAX_MODES = {1: 1 << 22, 2: 1 << 11}
MIN_MODES = {1: 1 << 12, 2: 1 << 9}
NEG_FLOOR = -1e-9
NEAR_IMAGES = 4


def exact_cf_radial(rho: SpectralMeasure, beta: float, t: float, r) -> np.ndarray | float:
    """``E_beta(Psi(xi) t^beta)`` as a function of ``|xi|``; vectorized."""
    if not t > 0:
        raise ValueError("t must be positive")
    z = np.asarray(rho.psi_radial(r), dtype=float) * t ** beta
    return mittag_leffler(beta, z)


def exact_cf(rho: SpectralMeasure, beta: float, t: float, xi) -> float:
    """Characteristic function of the exact solution at one frequency vector."""
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(xi, dtype=float))))
    return float(exact_cf_radial(rho, beta, t, r))


@dataclass(frozen=True)
class SpectralSolution:
    beta: float
    rho: SpectralMeasure
    t: float
    xi_grid: np.ndarray = field(repr=False)
    cf_values: np.ndarray = field(repr=False)


def spectral_solution(rho: SpectralMeasure, beta: float, t: float, xi_grid) -> SpectralSolution:
    """Tabulate the exact characteristic function on a grid of ``|xi|`` values."""
    xi = np.asarray(xi_grid, dtype=float)
    return SpectralSolution(float(beta), rho, float(t), xi, exact_cf_radial(rho, beta, t, np.abs(xi)))


# --- Fourier inversion ------------------------------------------------------------

@dataclass(frozen=True)
class InversionResult:
    """Density on the user grid plus the internal periodic grid it was cut from."""

    x: np.ndarray
    density: np.ndarray
    xi_max: float
    period: float
    internal_x: np.ndarray = field(repr=False)
    internal_density: np.ndarray = field(repr=False)

    @property
    def internal_mass(self) -> float:
        dx = self.internal_x[1] - self.internal_x[0]
        return float(self.internal_density.sum() * dx ** self.internal_density.ndim)


def _grid_spacing(x_grid) -> tuple[np.ndarray, float, int]:
    x = np.asarray(x_grid, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("x_grid must be a 1-D array with at least two points")
    dx = float(x[1] - x[0])
    if not dx > 0 or not np.allclose(np.diff(x), dx, rtol=1e-9, atol=0):
        raise ValueError("x_grid must be uniform and increasing")
    offsets = x / dx
    idx = np.round(offsets).astype(int)
    if not np.allclose(offsets, idx, atol=1e-6):
        raise ValueError("x_grid must contain 0 on its lattice")
    return x, dx, idx


def _tail_amplitude(rho: SpectralMeasure, beta: float, t: float,
                    dim_d: int = 1) -> list[tuple[float, float]]:
    """Coefficients ``(A_i, alpha_i)`` of the density tail ``sum_i A_i |x|^-(d+alpha_i)``."""
    scale = t ** beta / special.gamma(1 + beta)
    d = dim_d
    return [(scale * w * a * 2 ** (a - 1) * special.gamma((d + a) / 2)
             / (math.pi ** (d / 2) * special.gamma(1 - a / 2)), a)
            for a, w in zip(rho.alphas, rho.weights)]


def _modes_for(rho, beta, t, dx, n_user, d) -> int:
    amp = _tail_amplitude(rho, beta, t, d)
    n = MIN_MODES[d]
    while n < 2 * n_user:
        n *= 2
    while True:
        P = n * dx
        # sum over the images m != 0 of the algebraic tail, per axis
        alias = sum(A * lattice_zeta(d + a, d) * P ** -(d + a) for A, a in amp)
        if alias <= ALIAS_TOL or n >= MAX_MODES[d]:
            return n
        n *= 2


def _image_sum(amp: list[tuple[float, float]], x: np.ndarray, period: float,
               dim_d: int = 1) -> np.ndarray:
    """Periodic images ``sum_{m != 0} sum_i A_i |x + m P|^-(d+alpha_i)`` of the tail.

    In two dimensions the images with ``|m|_inf <= NEAR_IMAGES`` are summed
    directly and the rest are taken at ``x = 0`` from the lattice zeta value.
    """
    a = x / period
    if dim_d == 1:
        out = np.zeros_like(x)
        for A, alpha in amp:
            s = 1.0 + alpha
            out += A * period ** -s * (special.zeta(s, 1.0 + a) + special.zeta(s, 1.0 - a))
        return out
    M = NEAR_IMAGES
    X, Y = np.meshgrid(a, a, indexing="ij")
    out = np.zeros_like(X)
    norms = lattice_norms(M, 2)
    for A, alpha in amp:
        s = 2.0 + alpha
        near = np.zeros_like(X)
        for mx in range(-M, M + 1):
            for my in range(-M, M + 1):
                if mx or my:
                    near += ((X + mx) ** 2 + (Y + my) ** 2) ** (-s / 2)
        far = lattice_zeta(s, 2) - float(np.sum(norms[norms > 0] ** -s))
        out += A * period ** -s * (near + far)
    return out


def _fft_density(phi_radial, dx: float, n: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    xi_axis = 2 * np.pi * np.fft.fftfreq(n, d=dx)
    if d == 1:
        vals = phi_radial(np.abs(xi_axis))
        dens = np.fft.fft(vals).real / (n * dx)
    else:
        kx, ky = np.meshgrid(xi_axis, xi_axis, indexing="ij", sparse=True)
        vals = phi_radial(np.sqrt(kx * kx + ky * ky))
        dens = np.fft.fft2(vals).real / (n * dx) ** 2
    dens = np.fft.fftshift(dens)
    x_int = (np.arange(n) - n // 2) * dx
    return x_int, dens


def _cut_to_user(x_int: np.ndarray, dens: np.ndarray, idx: np.ndarray, d: int) -> np.ndarray:
    centre = x_int.size // 2
    pos = centre + idx
    if pos.min() < 0 or pos.max() >= x_int.size:
        raise AliasingError("user grid does not fit inside the internal period")
    if d == 1:
        return dens[pos]
    return dens[np.ix_(pos, pos)]


def invert_cf(rho: SpectralMeasure, beta: float, t: float, x_grid, dim_d: int = 1,
              tail_correct: bool | None = None) -> InversionResult:
    """Density of the solution at time ``t`` on the tensor grid built from ``x_grid``."""
    if dim_d not in (1, 2):
        raise ValueError("Fourier inversion supports d = 1 and d = 2")
    x, dx, idx = _grid_spacing(x_grid)
    xi_max = math.pi / dx
    phi_cut = float(exact_cf_radial(rho, beta, t, xi_max))
    if tail_correct is None:
        tail_correct = beta < 1.0
    if not tail_correct and phi_cut > CUTOFF_TOL:
        raise AliasingError(
            f"transform is {phi_cut:.3g} at the Nyquist frequency {xi_max:.4g}; refine the grid")
    if tail_correct and dim_d != 1:
        raise AliasingError("the algebraic-tail correction is only available in one dimension")
    n = _modes_for(rho, beta, t, dx, x.size, dim_d)
    x_int, dens = _fft_density(lambda r: exact_cf_radial(rho, beta, t, r), dx, n, dim_d)
    user = np.array(_cut_to_user(x_int, dens, idx, dim_d))
    # the FFT sums the density over all periods; remove the far images of the
    # algebraic tail
    user = user - _image_sum(_tail_amplitude(rho, beta, t, dim_d), x, n * dx, dim_d)
    if tail_correct:
        user = user + _cf_tail(rho, beta, t, x, xi_max)
    if np.any(user < NEG_FLOOR):
        warnings.warn(f"density ringing down to {user.min():.3g}", RuntimeWarning, stacklevel=2)
    return InversionResult(x, user, xi_max, n * dx, x_int, dens)


def _cf_tail(rho, beta, t, x, xi_max) -> np.ndarray:
    """``(1/pi) int_{xi_max}^inf phi(xi) cos(x xi) d xi`` at each ``x``."""
    def phi(r):
        return float(exact_cf_radial(rho, beta, t, r))

    out = np.empty_like(x)
    cache: dict[float, float] = {}
    alpha_min = float(rho.alphas.min())
    for i, xv in enumerate(np.abs(x)):
        if xv in cache:
            out[i] = cache[xv]
            continue
        if xv == 0.0:
            if alpha_min <= 1.0:
                val = np.inf
            else:
                val = integrate.quad(phi, xi_max, np.inf, limit=400)[0] / math.pi
        else:
            val, err = integrate.quad(phi, xi_max, np.inf, weight="cos", wvar=xv,
                                      limlst=200, limit=400)
            val /= math.pi
        cache[xv] = val
        out[i] = val
    return out


def green_function_beta1(rho: SpectralMeasure, t: float, x_grid, dim_d: int = 1) -> np.ndarray:
    """Density of the mixed symmetric stable law with symbol ``exp(t Psi)``."""
    return invert_cf(rho, 1.0, t, x_grid, dim_d, tail_correct=False).density


def frac_density(rho: SpectralMeasure, beta: float, t: float, x_grid) -> np.ndarray:
    """Density of the time-fractional solution on a 1-D grid (``inf`` where it diverges)."""
    if beta == 1.0:
        return green_function_beta1(rho, t, x_grid)
    return invert_cf(rho, beta, t, x_grid, 1).density


def mwright(beta: float, u: float) -> float:
    """M-Wright density ``M_beta(u) = sum_k (-u)^k / (k! Gamma(1 - beta - beta k))``, ``u >= 0``.

    Its Laplace transform is ``E_beta(-z)``, which makes it the law of the
    operational time at ``t = 1``.
    """
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    if u < 0:
        raise ValueError("u must be nonnegative")
    # |term_k| <= u^k Gamma(beta (k+1)) / (pi k!) by reflection; size the
    # working precision from the largest of these bounds
    ks = np.arange(0, 4000)
    log_bound = ks * math.log(max(u, 1e-300)) + special.gammaln(beta * (ks + 1)) \
        - special.gammaln(ks + 1) - math.log(math.pi)
    peak = float(log_bound.max())
    # the sum itself is as small as exp(-decay), so the digits lost to
    # cancellation are peak + decay
    decay = (1 - beta) * beta ** (beta / (1 - beta)) * u ** (1 / (1 - beta))
    dps = 30 + int((max(peak, 0.0) + decay) / math.log(10))
    with mpmath.workdps(dps):
        um = -mpmath.mpf(u)
        b = mpmath.mpf(beta)
        total = mpmath.mpf(0)
        for k in range(ks.size):
            total += um ** k * mpmath.rgamma(1 - b - b * k) / mpmath.factorial(k)
            if k > int(np.argmax(log_bound)) and log_bound[k] < -decay - 40 * math.log(10):
                break
        return float(total)


def subordinated_cauchy_density(beta: float, t: float, x: float) -> float:
    """Density at ``x`` for ``rho = delta_1`` by mixing Cauchy laws over operational time.

    ``E_beta(-|xi| t^beta) = int_0^inf M_beta(u) exp(-|xi| t^beta u) du`` and
    ``exp(-s |xi|)`` is the Cauchy law of scale ``s``, so the density is
    ``int_0^inf M_beta(u) s / (pi (s^2 + x^2)) du`` with ``s = t^beta u``.
    """
    if beta == 1.0:
        return t / (math.pi * (t * t + x * x))
    tb = t ** beta

    def integrand(u):
        s = tb * u
        return mwright(beta, u) * s / (math.pi * (s * s + x * x))

    # M_beta(u) ~ exp(-(1-beta) beta^(beta/(1-beta)) u^(1/(1-beta))): below e^-70 past u_max
    u_max = (70.0 / ((1 - beta) * beta ** (beta / (1 - beta)))) ** (1 - beta)
    bounds = sorted({0.0, min(abs(x) / tb, u_max / 2), 1.0, u_max})
    return math.fsum(integrate.quad(integrand, lo, hi, limit=400, epsabs=1e-15, epsrel=1e-11)[0]
                     for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo)


# --- Laplace domain ------------------------------------------------------------------

def laplace_symbol(beta: float, psi_val: float, s: float) -> float:
    """Fourier-Laplace transform ``s^(beta-1) / (s^beta - Psi)`` of the solution."""
    if not s > 0:
        raise ValueError("s must be positive")
    if psi_val > 0:
        raise ValueError("psi must be nonpositive")
    return s ** (beta - 1) / (s ** beta - psi_val)


def distributed_laplace_symbol(mu: TimeMeasure, psi_val: float, s) -> complex:
    """``sum_i w_i s^(beta_i-1) / (sum_i w_i s^beta_i - Psi)``; accepts complex ``s``."""
    num = sum(w * s ** (b - 1) for b, w in zip(mu.betas, mu.weights))
    den = sum(w * s ** b for b, w in zip(mu.betas, mu.weights)) - psi_val
    return num / den


def distributed_exact_cf(mu: TimeMeasure, rho: SpectralMeasure, t: float, xi) -> float:
    """Characteristic function of the distributed-order solution by Talbot inversion."""
    psi = float(rho.psi_radial(np.linalg.norm(np.atleast_1d(xi))))
    if psi == 0.0:
        return 1.0
    with mpmath.workdps(30):
        betas = [mpmath.mpf(float(b)) for b in mu.betas]
        weights = [mpmath.mpf(float(w)) for w in mu.weights]

        def f(s):
            num = sum(w * s ** (b - 1) for b, w in zip(betas, weights))
            den = sum(w * s ** b for b, w in zip(betas, weights)) - psi
            return num / den

        return float(mpmath.invertlaplace(f, t, method="talbot"))


def discrete_laplace_cf(u_hat, tau: float, s: float, tail_tol: float = 1e-10) -> float:
    """``tau sum_{n>=0} u_hat^{n+1} exp(-s n tau)`` from the layers ``u_hat^0..u_hat^N``.

    Raises :class:`TailError` when ``exp(-s tau (N-1))`` exceeds ``tail_tol``,
    i.e. the omitted terms could still matter.
    """
    u = np.asarray(u_hat)
    if u.ndim != 1 or u.size < 2:
        raise ValueError("need at least the layers u^0 and u^1")
    if not (s > 0 and tau > 0):
        raise ValueError("s and tau must be positive")
    n_terms = u.size - 1
    if math.exp(-s * tau * (n_terms - 1)) > tail_tol:
        raise TailError(
            f"exp(-s t) = {math.exp(-s * tau * (n_terms - 1)):.3g} at the last layer; "
            "supply more layers")
    weights = np.exp(-s * tau * np.arange(n_terms))
    return float(tau * (weights @ u[1:]).real) if np.iscomplexobj(u) else float(tau * (weights @ u[1:]))


def layers_needed(tau: float, s: float, tail_tol: float = 1e-10) -> int:
    """Smallest number of steps for :func:`discrete_laplace_cf` to accept the sum."""
    return int(math.ceil(-math.log(tail_tol) / (s * tau))) + 2
