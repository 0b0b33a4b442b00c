"""Lattice jump weights of the discretized hypersingular operator.

For a spatial measure ``rho = sum_i w_i delta_{alpha_i}`` and lattice step
``h`` the off-origin weights are

    d_k = sum_i 2 w_i b(alpha_i) h^-alpha_i |k|^-(d + alpha_i),    k != 0,

``d_0 = -sum_{k != 0} d_k``, and the one-step jump weights of the walk are
``q_k = d_k / a(tau)`` with ``q_0 = c_1 - Q(h) / a(tau)`` where
``Q(h) = sum_{k != 0} d_k``.

The kernel keeps the weights on the cube ``|k|_inf <= K`` and the exact total
mass beyond it, so no probability is silently dropped: the grid scheme
counts tail jumps as leaving its window, the sampler draws them exactly.

Lattice sums ``Z_d(s) = sum_{k != 0} |k|^-s`` are closed-form in one and two
dimensions (Riemann/Hurwitz zeta); in three dimensions the sum over the cube
is completed with a midpoint-rule integral estimate of the remainder.
Characteristic functions use exact cosine sums: Hurwitz zeta in one dimension
and a Jacobi-theta integral representation in general dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np
from scipy import integrate, optimize, special

from .coefficients import CoefficientTable, mixing_weights
from .errors import StabilityViolation, TruncationTooCoarse
from .measures import SpectralMeasure, TimeMeasure
from .special import b_alpha

DEFAULT_K = {1: 64, 2: 32, 3: 16}
# q_0 above -STAB_TOL is treated as zero round-off rather than a violation.
STAB_TOL = 1e-12


def _check_dim(d: int) -> int:
    if int(d) != d or d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
    return int(d)


def lattice_norms(radius: int, d: int) -> np.ndarray:
    """Euclidean norms ``|k|`` on the cube ``|k|_inf <= radius`` (origin at the centre)."""
    r = np.arange(-radius, radius + 1, dtype=float)
    if d == 1:
        return np.abs(r)
    grids = np.meshgrid(*([r] * d), indexing="ij", sparse=True)
    return np.sqrt(sum(g * g for g in grids))


def _inv_power(norms: np.ndarray, s: float) -> np.ndarray:
    out = np.zeros_like(norms)
    nz = norms > 0
    out[nz] = norms[nz] ** -s
    return out


def _face_integral(s: float, d: int) -> float:
    """``int_{[-1,1]^(d-1)} (1 + |y|^2)^(-s/2) dy``."""
    if d == 1:
        return 1.0
    x, w = np.polynomial.legendre.leggauss(40)
    if d == 2:
        return float(w @ (1 + x * x) ** (-s / 2))
    yy = x[:, None] ** 2 + x[None, :] ** 2
    return float(w @ (1 + yy) ** (-s / 2) @ w)


def _outside_cube_integral(s: float, d: int, R: float) -> float:
    """``int_{|x|_inf > R} |x|^-s dx`` for ``s > d``."""
    return R ** (d - s) * 2 * d / (s - d) * _face_integral(s, d)


@lru_cache(maxsize=256)
def lattice_tail(s: float, d: int, K: int) -> float:
    """``sum_{|k|_inf > K} |k|^-s``."""
    d = _check_dim(d)
    if not s > d:
        raise ValueError("lattice sum diverges for s <= d")
    if d == 1:
        return 2.0 * float(special.zeta(s, K + 1))
    if d == 2:
        inner = _inv_power(lattice_norms(K, 2), s).sum()
        return lattice_zeta(s, 2) - float(inner)
    # midpoint rule on unit cells: sum f(k) ~ int f - (1/24) int Laplacian f
    R = K + 0.5
    lap = s * (s + 2 - d)
    return _outside_cube_integral(s, d, R) - lap / 24.0 * _outside_cube_integral(s + 2, d, R)


@lru_cache(maxsize=256)
def lattice_zeta(s: float, d: int) -> float:
    """``Z_d(s) = sum_{k in Z^d, k != 0} |k|^-s`` for ``s > d``."""
    d = _check_dim(d)
    if not s > d:
        raise ValueError("lattice sum diverges for s <= d")
    if d == 1:
        return 2.0 * float(special.zeta(s))
    if d == 2:
        # sum over Z^2 of (m^2+n^2)^-x = 4 zeta(x) beta(x)
        x = s / 2
        dirichlet_beta = 4.0 ** -x * (special.zeta(x, 0.25) - special.zeta(x, 0.75))
        return float(4.0 * special.zeta(x) * dirichlet_beta)
    K = 48
    inner = _inv_power(lattice_norms(K, 3), s).sum()
    return float(inner) + lattice_tail(s, 3, K)


# --- cosine sums --------------------------------------------------------------

def _cos_sum_1d(s: float, theta: float) -> float:
    """Exact ``sum_{k != 0} (cos(k theta) - 1) |k|^-s`` in one dimension."""
    a = (theta / (2 * math.pi)) % 1.0
    if a == 0.0:
        return 0.0
    with mpmath.workdps(30):
        s_m = mpmath.mpf(s)
        a_m = mpmath.mpf(a)
        # sum_{k>=1} cos(2 pi k a) k^-s via the Hurwitz functional equation
        cos_part = ((2 * mpmath.pi) ** s_m
                    * (mpmath.zeta(1 - s_m, a_m) + mpmath.zeta(1 - s_m, 1 - a_m))
                    / (4 * mpmath.gamma(s_m) * mpmath.cos(mpmath.pi * s_m / 2)))
        return float(2 * (cos_part - mpmath.zeta(s_m)))


_POISSON_M = np.arange(-3, 4)
_DIRECT_K = np.arange(1, 12)


def _theta_defect_small_t(t: float, thetas: np.ndarray) -> float:
    """``(t/pi)^(d/2) [prod_j th(t, theta_j) - prod_j th(t, 0)]`` via Poisson summation.

    ``th(t, theta) = sum_k exp(-t k^2) cos(k theta)``.
    """
    if t <= 0.0:
        # every factor with theta_j != 0 vanishes in the limit
        return -1.0
    base = np.exp(-(2 * np.pi * _POISSON_M) ** 2 / (4 * t))
    b = base.sum()
    total = 0.0
    prefix = 1.0
    d = thetas.size
    for j, th in enumerate(thetas):
        shifted = (th + 2 * np.pi * _POISSON_M) ** 2 / (4 * t)
        delta = math.expm1(-th * th / (4 * t)) + float(
            np.exp(-shifted[_POISSON_M != 0]).sum() - base[_POISSON_M != 0].sum())
        total += prefix * delta * b ** (d - 1 - j)
        prefix *= b + delta
    return total


def _theta_defect_large_t(t: float, thetas: np.ndarray) -> float:
    """``prod_j th(t, theta_j) - prod_j th(t, 0)`` from the direct sums."""
    g = np.exp(-t * _DIRECT_K ** 2)
    b = 1.0 + 2.0 * g.sum()
    total = 0.0
    prefix = 1.0
    d = thetas.size
    for j, th in enumerate(thetas):
        delta = -4.0 * float(g @ np.sin(_DIRECT_K * th / 2) ** 2)
        total += prefix * delta * b ** (d - 1 - j)
        prefix *= b + delta
    return total


def _cos_sum_theta(s: float, thetas: np.ndarray) -> float:
    """Exact ``sum_{k != 0} (cos(k.theta) - 1) |k|^-s`` in any dimension.

    Uses ``|k|^-s = Gamma(s/2)^-1 int_0^inf t^(s/2-1) exp(-t |k|^2) dt`` and
    the factorization of the Gaussian lattice sum over coordinates.
    """
    thetas = np.asarray(thetas, dtype=float)
    # reduce to (-pi, pi]
    thetas = thetas - 2 * np.pi * np.round(thetas / (2 * np.pi))
    if not np.any(thetas):
        return 0.0
    d = thetas.size
    alpha = s - d
    pre = np.pi ** (d / 2)
    opts = dict(epsabs=1e-15, epsrel=1e-12, limit=400)
    # near t=0 the integrand is pi^(d/2) t^(alpha/2-1) times a bounded factor
    t_small = min(1.0, float(np.max(thetas ** 2)) / 64.0)
    pieces = [integrate.quad(lambda t: _theta_defect_small_t(t, thetas), 0.0, t_small,
                             weight="alg", wvar=(alpha / 2 - 1, 0.0), **opts)[0]]
    edges = [t_small]
    while edges[-1] < 1.0:
        edges.append(min(1.0, edges[-1] * 16))
    for lo, hi in zip(edges[:-1], edges[1:]):
        pieces.append(integrate.quad(
            lambda t: t ** (alpha / 2 - 1) * _theta_defect_small_t(t, thetas), lo, hi, **opts)[0])
    small = pre * math.fsum(pieces)
    large = integrate.quad(lambda t: t ** (s / 2 - 1) * _theta_defect_large_t(t, thetas),
                           1.0, np.inf, **opts)[0]
    return float((small + large) / special.gamma(s / 2))


def cos_sum(s: float, thetas) -> float:
    """Exact ``sum_{k in Z^d, k != 0} (cos(k.theta) - 1) |k|^-s``."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    if thetas.size == 1:
        return _cos_sum_1d(s, float(thetas[0]))
    return _cos_sum_theta(s, thetas)


def cos_sum_truncated(s: float, thetas, K: int) -> tuple[float, float]:
    """Cosine sum over ``|k|_inf <= K`` plus the exact tail of the ``-1`` part.

    Returns ``(value, bound)`` where ``bound`` estimates the neglected
    oscillatory tail ``|sum_{|k|_inf > K} cos(k.theta) |k|^-s|``.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    d = thetas.size
    if not np.any(thetas):
        return 0.0, 0.0
    r = np.arange(-K, K + 1, dtype=float)
    w = _inv_power(lattice_norms(K, d), s)
    grids = np.meshgrid(*([r] * d), indexing="ij", sparse=True)
    phase = np.cos(sum(g * th for g, th in zip(grids, thetas)))
    tail = lattice_tail(s, d, K)
    value = float(((phase - 1.0) * w).sum()) - tail
    sin_max = float(np.max(np.abs(np.sin(thetas / 2))))
    if d == 1:
        abel = 2 * (K + 1) ** -s / sin_max if sin_max > 0 else np.inf
    else:
        abel = 2.0 ** (d + 1) * K ** (d - 1 - s) / sin_max if sin_max > 0 else np.inf
    return value, float(min(abel, tail))


# --- characteristic functions of the jump kernel ----------------------------

def _xi_vector(xi, d: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(xi, dtype=float))
    if v.size != d:
        raise ValueError(f"xi has {v.size} components, dimension is {d}")
    return v


def p_hat(alpha: float, dim_d: int, h: float, xi, trunc_K: int | None = None,
          rtol: float = 1e-8) -> float:
    """Characteristic function ``sum_k p_k e^(i k h xi)`` of the single-order sequence.

    ``p_k = h^-alpha b(alpha) |k|^-(d+alpha)`` off the origin and the
    balancing weight at the origin; tends to ``-|xi|^alpha / 2`` as ``h -> 0``.

    With ``trunc_K=None`` the lattice sum is evaluated exactly. With a
    finite ``trunc_K`` the cosine sum is cut at ``|k|_inf <= trunc_K`` and
    :class:`TruncationTooCoarse` is raised if the neglected oscillatory tail
    may exceed ``rtol`` times the result.
    """
    d = _check_dim(dim_d)
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    if not h > 0:
        raise ValueError("h must be positive")
    theta = h * _xi_vector(xi, d)
    s = d + alpha
    scale = b_alpha(alpha, d) * h ** -alpha
    if trunc_K is None:
        return scale * cos_sum(s, theta)
    value, bound = cos_sum_truncated(s, theta, int(trunc_K))
    if bound > rtol * max(abs(value), np.finfo(float).tiny):
        raise TruncationTooCoarse(
            f"tail of the cosine sum may reach {bound:.3g} against value {value:.3g}; "
            f"increase trunc_K={trunc_K}")
    return scale * value


def lattice_Q(rho: SpectralMeasure, dim_d: int, h: float) -> float:
    """``Q(h) = sum_{k != 0} d_k`` without truncation."""
    d = _check_dim(dim_d)
    return float(sum(2 * w * b_alpha(a, d) * h ** -a * lattice_zeta(d + a, d)
                     for a, w in zip(rho.alphas, rho.weights)))


def tau_max_from_Q(Q: float, beta: float, variant: str = "GL") -> float:
    """Largest time step keeping ``q_0 >= 0`` for a single order ``beta``."""
    if not Q > 0:
        raise ValueError("Q must be positive")
    if variant == "GL":
        return (beta / Q) ** (1.0 / beta)
    if variant == "Liu":
        return ((2.0 - 2.0 ** (1.0 - beta)) / (special.gamma(2.0 - beta) * Q)) ** (1.0 / beta)
    raise ValueError(f"unknown variant {variant!r}")


def _tau_max_measure(Q: float, mu: TimeMeasure, variant: str, weighting: str) -> float:
    from .coefficients import gl_coefficients, liu_coefficients

    single = gl_coefficients if variant == "GL" else liu_coefficients

    def c1_of(tau):
        omega, a_tau = mixing_weights(mu, variant, tau, weighting)
        c1 = float(sum(w * single(float(b), 1, tau).c1 for w, b in zip(omega, mu.betas)))
        return c1, a_tau

    def margin(log_tau):
        c1, a_tau = c1_of(math.exp(log_tau))
        return c1 - Q / a_tau

    lo, hi = -1.0, 1.0
    while margin(lo) < 0:
        lo *= 2
    while margin(hi) > 0:
        hi *= 2
    return math.exp(optimize.brentq(margin, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def stability_bound(rho: SpectralMeasure, dim_d: int, h: float,
                    beta: float | TimeMeasure, variant: str = "GL",
                    weighting: str = "measure") -> float:
    """Largest ``tau`` with ``q_0 >= 0``.

    For a single order this is ``(beta / Q(h))^(1/beta)`` (Grunwald-Letnikov)
    or ``((2 - 2^(1-beta)) / (Gamma(2-beta) Q(h)))^(1/beta)`` (L1 quadrature);
    for a time measure the condition ``c_1^* = Q(h) / a^*(tau)`` is solved numerically.
    """
    Q = lattice_Q(rho, dim_d, h)
    if isinstance(beta, TimeMeasure):
        if beta.single_order is not None:
            # a single atom of mass w scales a(tau) by w and leaves c_1 alone
            return tau_max_from_Q(Q / beta.total_mass, beta.single_order, variant)
        return _tau_max_measure(Q, beta, variant, weighting)
    return tau_max_from_Q(Q, float(beta), variant)


# --- the kernel -----------------------------------------------------------------

@dataclass(frozen=True)
class JumpLaw:
    """Dense one-step jump weights on ``|k|_inf <= radius`` plus the mass beyond."""

    p: np.ndarray
    tail_mass: float

    @property
    def radius(self) -> int:
        return (self.p.shape[0] - 1) // 2

    @property
    def total(self) -> float:
        return float(self.p.sum()) + self.tail_mass


@dataclass(frozen=True)
class LatticeKernel:
    """Jump weights ``q_k`` of the lattice walk (see module docstring).

    ``q`` is the dense array over ``|k|_inf <= trunc_K`` with the origin at
    the centre and ``q[centre] = q0``; ``tail_mass`` is the exact total of
    ``q_k`` outside the cube, split per atom in ``tail_by_atom``.
    """

    rho: SpectralMeasure
    dim_d: int
    h: float
    tau: float
    beta: float | TimeMeasure
    trunc_K: int
    c1: float
    jump_scale: float
    q: np.ndarray = field(repr=False)
    q0: float
    Q_total: float
    tail_mass: float
    tail_by_atom: np.ndarray = field(repr=False)
    atom_scale: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        for arr in (self.q, self.tail_by_atom, self.atom_scale):
            arr.setflags(write=False)

    @property
    def stable(self) -> bool:
        return self.q0 >= -STAB_TOL

    def check_stability(self) -> None:
        if not self.stable:
            raise StabilityViolation(
                f"q0 = {self.q0:.6g} < 0: tau = {self.tau:.6g} exceeds the stability bound")

    @property
    def q0_clipped(self) -> float:
        return max(self.q0, 0.0)

    @property
    def total_weight(self) -> float:
        """``sum_k q_k`` over the whole lattice (equals ``c1``)."""
        return float(self.q.sum()) + self.tail_mass

    def weights_to(self, radius: int) -> JumpLaw:
        """Jump weights on ``|k|_inf <= radius`` with ``q0`` clipped, and the mass beyond."""
        radius = int(radius)
        K, d = self.trunc_K, self.dim_d
        if radius <= K:
            p = np.array(self.q[(slice(K - radius, K + radius + 1),) * d])
        else:
            p = _off_origin_weights(self.atom_scale, self.rho.alphas, d, radius)
        centre = (radius,) * d
        p[centre] = 0.0
        tail = (self.c1 - self.q0) - float(p.sum())
        p[centre] = self.q0_clipped
        return JumpLaw(p, max(tail, 0.0))


def _off_origin_weights(atom_scale: np.ndarray, alphas: np.ndarray, d: int,
                        radius: int) -> np.ndarray:
    norms = lattice_norms(radius, d)
    out = np.zeros(norms.shape)
    for sc, a in zip(atom_scale, alphas):
        out += sc * _inv_power(norms, d + a)
    return out


def build_kernel(rho: SpectralMeasure, dim_d: int, h: float, tau: float | None = None,
                 beta: float | TimeMeasure | None = None, trunc_K: int | None = None,
                 *, coeffs: CoefficientTable | None = None) -> LatticeKernel:
    """Assemble the jump weights for the walk.

    Pass either ``coeffs`` (whose ``a(tau)`` and ``c_1`` are used) or
    ``tau`` and a single ``beta``, which selects the Grunwald-Letnikov values
    ``a(tau) = tau^-beta`` and ``c_1 = beta``. The kernel is built even when
    ``q0 < 0``; consumers call :meth:`LatticeKernel.check_stability`.
    """
    d = _check_dim(dim_d)
    if not isinstance(rho, SpectralMeasure):
        raise TypeError("rho must be a SpectralMeasure")
    if not h > 0:
        raise ValueError("h must be positive")
    K = DEFAULT_K[d] if trunc_K is None else int(trunc_K)
    if K < 1:
        raise ValueError("trunc_K must be positive")
    if coeffs is not None:
        tau = coeffs.tau
        beta = coeffs.order
        jump_scale = coeffs.jump_scale
        c1 = coeffs.c1
    else:
        if tau is None or beta is None:
            raise ValueError("give coeffs or both tau and beta")
        if isinstance(beta, TimeMeasure):
            raise ValueError("a time measure needs an explicit coefficient table")
        beta = float(beta)
        if not 0 < beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if not tau > 0:
            raise ValueError("tau must be positive")
        jump_scale = tau ** beta
        c1 = beta
    alphas = rho.alphas
    atom_scale = np.array([jump_scale * 2 * w * b_alpha(a, d) * h ** -a
                           for a, w in zip(alphas, rho.weights)])
    q = _off_origin_weights(atom_scale, alphas, d, K)
    tails = np.array([sc * lattice_tail(d + a, d, K) for sc, a in zip(atom_scale, alphas)])
    Q = lattice_Q(rho, d, h)
    q0 = c1 - jump_scale * Q
    # defined by difference so the weights add up to c1 to round-off; agrees
    # with tails.sum() up to the accuracy of the lattice sums
    tail_mass = (c1 - q0) - float(q.sum())
    centre = (K,) * d
    q[centre] = q0
    return LatticeKernel(rho, d, float(h), float(tau), beta, K, float(c1), float(jump_scale),
                         q, float(q0), float(Q), float(tail_mass), tails, atom_scale)


def kernel_cf(kernel: LatticeKernel, xi) -> float:
    """``d_hat(h xi) = sum_k d_k e^(i k h xi)``; tends to the Levy symbol as ``h -> 0``."""
    return float(sum(2 * w * p_hat(a, kernel.dim_d, kernel.h, xi)
                     for a, w in zip(kernel.rho.alphas, kernel.rho.weights)))


def jump_cf(kernel: LatticeKernel, xi) -> float:
    """Characteristic function ``sum_k q_k e^(i k h xi) = c_1 + d_hat(h xi) / a(tau)``."""
    return kernel.c1 + kernel.jump_scale * kernel_cf(kernel, xi)


def markov_probabilities(kernel: LatticeKernel) -> JumpLaw:
    """Markovian transition probabilities ``p_0 = c_1 - Q(h)/a(tau)``, ``p_k = q_k``."""
    kernel.check_stability()
    return kernel.weights_to(kernel.trunc_K)
