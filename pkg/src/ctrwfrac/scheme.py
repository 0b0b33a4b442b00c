"""Explicit non-Markovian master equation on a bounded lattice window.

One step produces

    u^{n+1} = w_n delta_0 + sum_{m=2}^{n} c_m u^{n+1-m} + q * u^n

with origin weight ``w_n`` (``gamma_n`` for ``n >= 1``, ``1 - c_1`` at the
first step), memory weights ``c_m`` and jump weights ``q``. All weights are
nonnegative and sum to one, so each layer is a probability vector on the
lattice. The window ``|j|_inf <= J`` is finite: jumps that leave it are
accumulated as lost mass, and because the memory terms are linear in past
layers the loss obeys the same recursion as the layers themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .coefficients import CoefficientTable
from .errors import ConfigError, HistoryMissing, NumericGuardError
from .kernel import JumpLaw, LatticeKernel, jump_cf
from .measures import SpectralMeasure

# conservation must hold to this absolute accuracy at every layer
MASS_TOL = 1e-12
DEFAULT_BUDGET = 1 << 29  # bytes for the layer history


def default_window(rho: SpectralMeasure, n_steps: int, dim_d: int = 1,
                   budget_bytes: int = DEFAULT_BUDGET) -> int:
    """``max(200, 20 n^(1/alpha_min))`` in one dimension, capped by the memory budget."""
    alpha_min = float(rho.alphas.min())
    wanted = max(200, int(math.ceil(20 * max(n_steps, 1) ** (1.0 / alpha_min))))
    if dim_d > 1:
        wanted = max(20, int(math.ceil(4 * max(n_steps, 1) ** (1.0 / alpha_min))))
    cells = budget_bytes / (8 * (n_steps + 1))
    cap = int((cells ** (1.0 / dim_d) - 1) // 2)
    return max(1, min(wanted, cap))


@dataclass
class GridLayerHistory:
    """All probability layers ``u^0..u^n`` on the window ``|j|_inf <= J``.

    ``lost[n]`` is the mass of layer ``n`` that lies outside the window, so
    ``layer(n).sum() + lost[n] == 1``.
    """

    dim_d: int
    h: float
    tau: float
    window_J: int
    _buf: np.ndarray = field(repr=False)
    n_layers: int = 1
    lost: list[float] = field(default_factory=lambda: [0.0])
    max_mass_drift: float = 0.0
    _law: tuple | None = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return (2 * self.window_J + 1,) * self.dim_d

    @property
    def current_step(self) -> int:
        return self.n_layers - 1

    @property
    def layers(self) -> np.ndarray:
        """Read-only view of shape ``(n + 1, *shape)``."""
        view = self._buf[:self.n_layers]
        view.flags.writeable = False
        return view

    def layer(self, n: int = -1) -> np.ndarray:
        if n < 0:
            n += self.n_layers
        if not 0 <= n < self.n_layers:
            raise IndexError(f"layer {n} not available")
        return self.layers[n]

    @property
    def boundary_mass_lost(self) -> float:
        return self.lost[-1]

    def mass(self, n: int = -1) -> float:
        return float(self.layer(n).sum())

    def sites(self) -> np.ndarray:
        """Lattice indices along one axis."""
        return np.arange(-self.window_J, self.window_J + 1)

    def _reserve(self, n_layers: int) -> None:
        if n_layers <= self._buf.shape[0]:
            return
        cap = max(n_layers, 2 * self._buf.shape[0])
        buf = np.zeros((cap,) + self.shape)
        buf[:self.n_layers] = self._buf[:self.n_layers]
        self._buf = buf


def init_grid(dim_d: int, h: float, tau: float, window_J: int,
              capacity: int = 1) -> GridLayerHistory:
    """History holding only the discrete delta at the origin."""
    if int(window_J) != window_J or window_J < 1:
        raise ConfigError("window_J must be a positive integer")
    if dim_d not in (1, 2, 3):
        raise ConfigError("dimension must be 1, 2 or 3")
    shape = (2 * int(window_J) + 1,) * dim_d
    buf = np.zeros((max(1, capacity),) + shape)
    buf[(0,) + (int(window_J),) * dim_d] = 1.0
    return GridLayerHistory(int(dim_d), float(h), float(tau), int(window_J), buf)


def _check_pair(state: GridLayerHistory, coeffs: CoefficientTable,
                kernel: LatticeKernel) -> None:
    if kernel.dim_d != state.dim_d:
        raise ConfigError("kernel and grid dimensions differ")
    if not math.isclose(kernel.h, state.h, rel_tol=1e-12):
        raise ConfigError("kernel and grid lattice steps differ")
    if not (math.isclose(kernel.c1, coeffs.c1, rel_tol=1e-12)
            and math.isclose(kernel.jump_scale, coeffs.jump_scale, rel_tol=1e-12)):
        raise ConfigError("kernel was built for a different time discretization")


def _jump_law(state: GridLayerHistory, kernel: LatticeKernel) -> JumpLaw:
    # any jump longer than 2J leaves the window wherever it starts
    if state._law is None or state._law[0] is not kernel:
        state._law = (kernel, kernel.weights_to(2 * state.window_J))
    return state._law[1]


def step(state: GridLayerHistory, coeffs: CoefficientTable,
         kernel: LatticeKernel) -> GridLayerHistory:
    """Append layer ``n + 1``; modifies ``state`` in place and returns it."""
    kernel.check_stability()
    _check_pair(state, coeffs, kernel)
    n = state.current_step
    if n > coeffs.horizon_n:
        raise HistoryMissing(f"coefficients cover {coeffs.horizon_n} steps, step {n} requested")
    law = _jump_law(state, kernel)
    J, d = state.window_J, state.dim_d
    state._reserve(n + 2)
    H = state._buf
    u_n = H[n]

    full = signal.convolve(u_n, law.p, mode="full")
    centre = (slice(2 * J, 4 * J + 1),) * d
    new = full[centre]
    jumped_in = float(new.sum())
    if n >= 2:
        new = new + np.tensordot(coeffs.c[n:1:-1], H[1:n], axes=1)
    new[(J,) * d] += coeffs.origin_weight(n)
    # the FFT path of the convolution can leave round-off below zero
    np.maximum(new, 0.0, out=new)

    c = coeffs.c
    lost = state.lost
    leaked = coeffs.c1 * float(u_n.sum()) - jumped_in
    memory_lost = math.fsum(c[m] * lost[n + 1 - m] for m in range(2, n + 1))
    lost_next = memory_lost + coeffs.c1 * lost[n] + leaked

    H[n + 1] = new
    state.n_layers = n + 2
    lost.append(lost_next)
    drift = abs(float(new.sum()) + lost_next - 1.0)
    state.max_mass_drift = max(state.max_mass_drift, drift)
    if drift > MASS_TOL:
        raise NumericGuardError(f"mass drift {drift:.3g} at layer {n + 1}")
    return state


def run(state: GridLayerHistory, coeffs: CoefficientTable, kernel: LatticeKernel,
        n_steps: int) -> GridLayerHistory:
    """Apply :func:`step` ``n_steps`` times."""
    if n_steps < 0:
        raise ConfigError("n_steps must be nonnegative")
    if n_steps == 0:
        return state
    kernel.check_stability()
    state._reserve(state.n_layers + n_steps)
    for _ in range(n_steps):
        step(state, coeffs, kernel)
    return state


def grid_cf(state: GridLayerHistory, xi, n: int = -1) -> complex:
    """``sum_j u_j^n exp(i j h xi)`` of one layer."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.size != state.dim_d:
        raise ValueError("xi dimension does not match the grid")
    u = state.layer(n).astype(complex)
    sites = state.sites()
    for x in xi:
        # contract the leading axis each time
        u = np.tensordot(np.exp(1j * sites * state.h * x), u, axes=1)
    return complex(u)


def cf_recursion(coeffs: CoefficientTable, kernel: LatticeKernel, xi,
                 n_steps: int) -> np.ndarray:
    """Characteristic functions ``u_hat^0..u_hat^n`` of the unbounded-lattice recursion.

    ``u_hat^{n+1} = w_n + sum_{m=2}^n c_m u_hat^{n+1-m} + q_hat u_hat^n`` with
    ``q_hat = c_1 + d_hat(h xi) / a(tau)``; no window, no loss.
    """
    coeffs.require(max(n_steps - 1, 0))
    q_hat = jump_cf(kernel, xi)
    u = np.empty(n_steps + 1)
    u[0] = 1.0
    c = coeffs.c
    for n in range(n_steps):
        memory = c[n:1:-1] @ u[1:n] if n >= 2 else 0.0
        u[n + 1] = coeffs.origin_weight(n) + memory + q_hat * u[n]
    return u


def solve(rho: SpectralMeasure, coeffs: CoefficientTable, kernel: LatticeKernel,
          n_steps: int, window_J: int | None = None) -> GridLayerHistory:
    """Convenience wrapper: initialize a grid and run ``n_steps``."""
    kernel.check_stability()
    J = default_window(rho, n_steps, kernel.dim_d) if window_J is None else int(window_J)
    state = init_grid(kernel.dim_d, kernel.h, coeffs.tau, J, capacity=n_steps + 1)
    return run(state, coeffs, kernel, n_steps)
