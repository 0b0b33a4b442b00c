"""Memory coefficients of the explicit time discretizations.

Every table is written in the common form

    D u(t_{n+1}) ~ a(tau) * (u^{n+1} - c_1 u^n - sum_{m=2}^{n} c_m u^{n+1-m} - gamma_n u^0)

with nonnegative ``c_m`` (``c_m = |binom(beta, m)|`` for Grunwald-Letnikov).
Arrays are indexed by lag: ``c[m]`` multiplies ``u^{n+1-m}`` and ``c[0]`` is
unused. ``gamma[0] = 1`` by the summation formula; the first step of the
recursion uses ``1 - c_1`` as its origin weight, see
:meth:`CoefficientTable.origin_weight`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import HistoryMissing
from .measures import TimeMeasure

SCHEME_KINDS = ("GL", "Liu", "DistributedGL", "DistributedLiu")


@dataclass(frozen=True)
class CoefficientTable:
    scheme_kind: str
    order: float | TimeMeasure
    horizon_n: int
    tau: float
    a_tau: float
    c: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.scheme_kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.scheme_kind!r}")
        for arr in (self.c, self.gamma):
            arr.setflags(write=False)
        if self.c.shape != (self.horizon_n + 1,) or self.gamma.shape != (self.horizon_n + 1,):
            raise ValueError("coefficient arrays must have length horizon_n + 1")

    @property
    def c1(self) -> float:
        return float(self.c[1])

    @property
    def jump_scale(self) -> float:
        """Factor ``1/a(tau)`` turning the spatial operator into jump weights."""
        return 1.0 / self.a_tau

    def origin_weight(self, n: int) -> float:
        """Weight of ``u^0`` in the update producing layer ``n + 1``."""
        self.require(n)
        return float(self.gamma[n]) if n >= 1 else 1.0 - self.c1

    def require(self, n: int) -> None:
        if n > self.horizon_n:
            raise HistoryMissing(
                f"coefficients cover {self.horizon_n} steps, step {n} requested")

    def branch_weights(self, n: int) -> np.ndarray:
        """Concatenated update weights ``[origin, c_2..c_n, c_1]`` for step ``n``.

        They sum to one; the last entry is the total weight of the jump part.
        """
        return np.concatenate(([self.origin_weight(n)], self.c[2:n + 1], [self.c1]))

    def to_dict(self) -> dict:
        order = self.order.to_dict() if isinstance(self.order, TimeMeasure) else self.order
        return {"scheme_kind": self.scheme_kind, "order": order,
                "horizon_n": self.horizon_n, "tau": self.tau, "a_tau": self.a_tau,
                "c": self.c.tolist(), "gamma": self.gamma.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> CoefficientTable:
        order = data["order"]
        if isinstance(order, dict):
            order = TimeMeasure.from_dict(order)
        return cls(data["scheme_kind"], order, int(data["horizon_n"]), float(data["tau"]),
                   float(data["a_tau"]), np.asarray(data["c"], dtype=float),
                   np.asarray(data["gamma"], dtype=float))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["l", "c_l", "gamma_l"])
        for ell in range(self.horizon_n + 1):
            writer.writerow([ell, repr(float(self.c[ell])), repr(float(self.gamma[ell]))])
        return buf.getvalue()


def _check_common(n: int, tau: float) -> None:
    if int(n) != n or n < 1:
        raise ValueError(f"horizon must be a positive integer, got {n}")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")


def _gl_arrays(beta: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    ell = np.arange(1, n)
    c = np.zeros(n + 1)
    c[1] = beta
    # c_{l+1} = c_l (l - beta) / (l + 1)
    c[2:] = beta * np.cumprod((ell - beta) / (ell + 1))
    gamma = np.ones(n + 1)
    # gamma_n = prod_{l<=n} (1 - beta/l), the alternating binomial partial sum
    gamma[1:] = np.cumprod(1.0 - beta / np.arange(1, n + 1))
    return c, gamma


def gl_coefficients(beta: float, n: int, tau: float) -> CoefficientTable:
    """Grunwald-Letnikov weights ``c_l = |binom(beta, l)|`` with ``a(tau) = tau^-beta``."""
    beta = float(beta)
    if not 0 < beta <= 1:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    _check_common(n, tau)
    c, gamma = _gl_arrays(beta, int(n))
    return CoefficientTable("GL", beta, int(n), float(tau), tau ** -beta, c, gamma)


def _liu_arrays(beta: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    p = 1.0 - beta
    m = np.arange(1, n + 1, dtype=float)
    gamma = np.empty(n + 1)
    gamma[0] = 1.0
    # (m+1)^p - m^p without cancellation
    gamma[1:] = m ** p * np.expm1(p * np.log1p(1.0 / m))
    c = np.zeros(n + 1)
    c[1] = 1.0 - gamma[1]
    if n >= 2:
        k = m[1:]
        # gamma_{k-1} - gamma_k = -k^p [(1+1/k)^p - 2 + (1-1/k)^p]
        c[2:] = -k ** p * (np.expm1(p * np.log1p(1.0 / k)) + np.expm1(p * np.log1p(-1.0 / k)))
    return c, gamma


def liu_coefficients(beta: float, n: int, tau: float) -> CoefficientTable:
    """L1-quadrature weights ``gamma_m = (m+1)^(1-beta) - m^(1-beta)``, ``c_k = gamma_{k-1} - gamma_k``."""
    beta = float(beta)
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1) for the quadrature scheme, got {beta}")
    _check_common(n, tau)
    c, gamma = _liu_arrays(beta, int(n))
    a_tau = 1.0 / (tau ** beta * gamma_fn(2.0 - beta))
    return CoefficientTable("Liu", beta, int(n), float(tau), a_tau, c, gamma)


def _single(beta: float, variant: str, n: int, tau: float) -> CoefficientTable:
    return gl_coefficients(beta, n, tau) if variant == "GL" else liu_coefficients(beta, n, tau)


def prefactor(beta: float, variant: str, tau: float) -> float:
    """``a(tau, beta)`` of a single-order scheme."""
    if variant == "GL":
        return tau ** -beta
    return 1.0 / (tau ** beta * gamma_fn(2.0 - beta))


def mixing_weights(mu: TimeMeasure, variant: str, tau: float,
                   weighting: str = "measure") -> tuple[np.ndarray, float]:
    """Per-node weights used to average c and gamma, and the total prefactor.

    ``weighting="measure"`` averages the coefficients against the normalized
    measure; ``"prefactor"`` weights node ``i`` by ``w_i a(tau, beta_i)``.
    """
    a_nodes = np.array([prefactor(b, variant, tau) for b in mu.betas])
    a_tau = float(mu.weights @ a_nodes)
    if weighting == "measure":
        omega = mu.weights / mu.total_mass
    elif weighting == "prefactor":
        omega = mu.weights * a_nodes / a_tau
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    return omega, a_tau


def distributed_coefficients(mu: TimeMeasure, variant: str, n: int, tau: float,
                             weighting: str = "measure") -> CoefficientTable:
    """Distributed-order table: coefficients averaged over ``mu``.

    ``a(tau)`` is the ``mu``-integral of the single-order prefactors; ``c`` and
    ``gamma`` are averaged with weights that sum to one so the update weights
    remain a probability vector.
    """
    if not isinstance(mu, TimeMeasure):
        raise TypeError("mu must be a TimeMeasure")
    if variant not in ("GL", "Liu"):
        raise ValueError(f"variant must be 'GL' or 'Liu', got {variant!r}")
    if variant == "Liu" and np.any(mu.betas >= 1.0):
        raise ValueError("the quadrature scheme needs supp(mu) inside (0, 1)")
    _check_common(n, tau)
    omega, a_tau = mixing_weights(mu, variant, tau, weighting)
    c = np.zeros(int(n) + 1)
    gamma = np.zeros(int(n) + 1)
    for w, beta in zip(omega, mu.betas):
        table = _single(float(beta), variant, int(n), tau)
        c += w * table.c
        gamma += w * table.gamma
    return CoefficientTable("Distributed" + variant, mu, int(n), float(tau), a_tau, c, gamma)


def make_coefficients(order: float | TimeMeasure, variant: str, n: int, tau: float,
                      weighting: str = "measure") -> CoefficientTable:
    """Dispatch on the type of ``order``."""
    if isinstance(order, TimeMeasure):
        return distributed_coefficients(order, variant, n, tau, weighting)
    if variant not in ("GL", "Liu"):
        raise ValueError(f"variant must be 'GL' or 'Liu', got {variant!r}")
    return _single(float(order), variant, n, tau)


def caputo_apply(table: CoefficientTable, samples, tau: float | None = None) -> float:
    """Approximate the Caputo derivative at ``t_n`` from samples ``f(t_0..t_n)``.

    Uses the table's own weights,
    ``a(tau) [(f_n - f_0) - sum_{m=1}^{n-1} c_m (f_{n-m} - f_0)]``,
    which for Grunwald-Letnikov coefficients equals
    ``tau^-beta sum_{m=0}^n (-1)^m binom(beta, m) (f_{n-m} - f_0)``.
    """
    f = np.asarray(samples, dtype=float)
    n = f.size - 1
    if n < 1:
        raise ValueError("need at least two samples")
    table.require(n)
    if tau is not None and not math.isclose(tau, table.tau, rel_tol=1e-12):
        raise ValueError("sample spacing does not match the table's tau")
    diff = f - f[0]
    memory = table.c[1:n] @ diff[n - 1:0:-1]
    return float(table.a_tau * (diff[n] - memory))
