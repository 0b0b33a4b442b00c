"""Monte Carlo walkers whose step-n law is exactly the grid recursion.

The update weights ``[w_n, c_2..c_n, c_1]`` sum to one, so the recursion is a
mixture: with probability ``w_n`` the walker returns to the origin, with
probability ``c_m`` it goes back to the site it occupied at step
``n + 1 - m``, and with probability ``c_1`` it jumps by ``k`` drawn from
``q_k / c_1``. Jumps within the kernel's cube come from an alias table; jumps
beyond it are drawn exactly by rejection from a discretized Pareto proposal.

Randomness is organised in fixed blocks of walkers, each with its own
counter-based stream derived from ``(master_seed, block index)``, so an
ensemble depends only on the seed and the walker count, not on the number
of worker threads.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.stats.sampling import DiscreteAliasUrn

from .coefficients import CoefficientTable
from .errors import ConfigError
from .kernel import LatticeKernel

BLOCK = 4096
POSITION_CAP = 2 ** 50
BRANCHES = ("origin", "memory", "jump", "tail_jump")


def _block_rng(master_seed: int, block: int) -> np.random.Generator:
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(seq))


class TailSampler:
    """Exact draws of ``k`` with ``|k|_inf > K``, ``P(k) ~ sum_i t_i |k|^-(d+alpha_i)``."""

    def __init__(self, kernel: LatticeKernel):
        self.d = kernel.dim_d
        self.K = kernel.trunc_K
        self.alphas = np.asarray(kernel.rho.alphas, dtype=float)
        tails = np.asarray(kernel.tail_by_atom, dtype=float)
        self.atom_p = tails / tails.sum()

    def _envelope(self, alpha: float) -> float:
        d, K1 = self.d, self.K + 1
        return (2 * d * 2 ** (d - 1) * (1 + 1 / (2 * K1)) ** (d - 1)
                * (1 + 1 / K1) ** (1 + alpha) / alpha)

    def _radii(self, alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
        """Max-norm radii ``r >= K+1`` with law ``~ N_shell(r) r^-(d+alpha)``."""
        d, K1 = self.d, self.K + 1
        M = self._envelope(alpha)
        out = np.empty(size)
        todo = np.arange(size)
        while todo.size:
            u = rng.random(todo.size)
            r = np.floor(K1 * (1.0 - u) ** (-1.0 / alpha))
            r = np.minimum(r, float(POSITION_CAP))
            n_shell = (2 * r + 1) ** d - (2 * r - 1) ** d
            # P(floor R = r) for the continuous Pareto proposal, scaled by (K+1)^-alpha
            prop = r ** -alpha * -np.expm1(-alpha * np.log1p(1.0 / r))
            accept_p = n_shell * r ** -(d + alpha) / (M * prop)
            ok = rng.random(todo.size) < accept_p
            out[todo[ok]] = r[ok]
            todo = todo[~ok]
        return out

    def _shell_points(self, r: np.ndarray, alpha: float,
                      rng: np.random.Generator) -> np.ndarray:
        """Points on ``|k|_inf = r`` with law ``~ |k|^-(d+alpha)``, given the radii."""
        d = self.d
        s = d + alpha
        out = np.empty((r.size, d))
        todo = np.arange(r.size)
        while todo.size:
            rr = r[todo]
            if d == 1:
                k = (rr * np.where(rng.random(todo.size) < 0.5, -1.0, 1.0))[:, None]
                ok = np.ones(todo.size, dtype=bool)
            else:
                k = np.floor(rng.random((todo.size, d)) * (2 * rr[:, None] + 1)) - rr[:, None]
                face = rng.integers(0, d, todo.size)
                sign = np.where(rng.random(todo.size) < 0.5, -1.0, 1.0)
                k[np.arange(todo.size), face] = sign * rr
                on_faces = (np.abs(k) == rr[:, None]).sum(axis=1)
                norm = np.sqrt((k * k).sum(axis=1))
                ok = rng.random(todo.size) < (rr / norm) ** s / on_faces
            out[todo[ok]] = k[ok]
            todo = todo[~ok]
        return out

    def draw(self, size: int, rng: np.random.Generator) -> np.ndarray:
        out = np.empty((size, self.d), dtype=np.int64)
        if size == 0:
            return out
        atom = rng.choice(self.alphas.size, size=size, p=self.atom_p)
        for i, alpha in enumerate(self.alphas):
            idx = np.flatnonzero(atom == i)
            if idx.size:
                r = self._radii(alpha, idx.size, rng)
                out[idx] = self._shell_points(r, alpha, rng).astype(np.int64)
        return out


class JumpSampler:
    """Draws jumps ``k`` from ``q_k / c_1`` over the whole lattice."""

    def __init__(self, kernel: LatticeKernel):
        kernel.check_stability()
        d, K = kernel.dim_d, kernel.trunc_K
        p = np.array(kernel.q, dtype=float)
        p[(K,) * d] = kernel.q0_clipped
        flat = p.ravel()
        self.offsets = np.stack(np.unravel_index(np.arange(flat.size), p.shape),
                                axis=1).astype(np.int64) - K
        self.tail_index = flat.size
        pv = np.append(flat, max(kernel.tail_mass, 0.0))
        self.urn = DiscreteAliasUrn(pv / pv.sum())
        self.tail = TailSampler(kernel) if kernel.tail_mass > 0 else None
        self.d = d

    def draw(self, size: int, rng: np.random.Generator) -> tuple[np.ndarray, int]:
        """Return ``(jumps, number of tail jumps)``."""
        if size == 0:
            return np.empty((0, self.d), dtype=np.int64), 0
        idx = np.atleast_1d(self.urn.rvs(size, random_state=rng))
        is_tail = idx == self.tail_index
        jumps = np.empty((size, self.d), dtype=np.int64)
        jumps[~is_tail] = self.offsets[idx[~is_tail]]
        n_tail = int(is_tail.sum())
        if n_tail:
            jumps[is_tail] = self.tail.draw(n_tail, rng)
        return jumps, n_tail


@dataclass(frozen=True)
class WalkerEnsemble:
    """Full paths of ``n_walkers`` walkers; ``paths[w, n]`` is the site at step ``n``."""

    n_walkers: int
    master_seed: int
    paths: np.ndarray = field(repr=False)
    branch_counts: dict = field(default_factory=dict)
    runtime: float = 0.0

    def __post_init__(self) -> None:
        self.paths.setflags(write=False)

    @property
    def dim_d(self) -> int:
        return self.paths.shape[2]

    @property
    def current_step(self) -> int:
        return self.paths.shape[1] - 1

    def positions(self, n: int = -1) -> np.ndarray:
        """Sites at step ``n``, shape ``(n_walkers, d)``."""
        return self.paths[:, n, :]

    def summary(self) -> dict:
        return {"n_walkers": self.n_walkers, "master_seed": self.master_seed,
                "steps": self.current_step, "branch_counts": dict(self.branch_counts),
                "runtime_s": self.runtime}


def _advance_block(paths: np.ndarray, n: int, coeffs: CoefficientTable,
                   jumps: JumpSampler, rng: np.random.Generator,
                   counts: np.ndarray) -> None:
    """Fill ``paths[:, n + 1]`` from the mixture at step ``n``."""
    w = coeffs.branch_weights(n)
    cum = np.cumsum(w)
    branch = np.searchsorted(cum, rng.random(paths.shape[0]) * cum[-1], side="right")
    branch = np.minimum(branch, w.size - 1)
    jump_b = w.size - 1
    is_jump = branch == jump_b
    is_origin = branch == 0
    is_memory = ~is_jump & ~is_origin
    nxt = np.zeros(paths.shape[::2], dtype=np.int64)
    # branch i in 1..n-1 carries c_{i+1}: back to the site at step n - i
    mem = np.flatnonzero(is_memory)
    nxt[mem] = paths[mem, n - branch[mem]]
    jmp = np.flatnonzero(is_jump)
    steps, n_tail = jumps.draw(jmp.size, rng)
    nxt[jmp] = np.clip(paths[jmp, n] + steps, -POSITION_CAP, POSITION_CAP)
    paths[:, n + 1] = nxt
    counts += (int(is_origin.sum()), mem.size, jmp.size - n_tail, n_tail)


def advance_walker(path, step_n: int, coeffs: CoefficientTable, kernel: LatticeKernel,
                   rng: np.random.Generator, jumps: JumpSampler | None = None) -> np.ndarray:
    """Draw the site at step ``step_n + 1`` for one walker and append it to ``path``.

    ``path`` holds the sites at steps ``0..step_n`` (shape ``(step_n + 1, d)``
    or ``(step_n + 1,)`` in one dimension). Returns the extended path.
    """
    kernel.check_stability()
    arr = np.asarray(path, dtype=np.int64)
    flat = arr.ndim == 1
    arr = arr.reshape(arr.shape[0], -1)
    if arr.shape[0] != step_n + 1:
        raise ValueError("path length must be step_n + 1")
    buf = np.zeros((1, step_n + 2, arr.shape[1]), dtype=np.int64)
    buf[0, :step_n + 1] = arr
    _advance_block(buf, step_n, coeffs, jumps or JumpSampler(kernel), rng, np.zeros(4, int))
    out = buf[0]
    return out[:, 0] if flat else out


def _simulate_block(block: int, size: int, n_steps: int, master_seed: int,
                    coeffs: CoefficientTable, jumps: JumpSampler, d: int):
    rng = _block_rng(master_seed, block)
    paths = np.zeros((size, n_steps + 1, d), dtype=np.int64)
    counts = np.zeros(4, dtype=np.int64)
    for n in range(n_steps):
        _advance_block(paths, n, coeffs, jumps, rng, counts)
    return paths, counts


def sample_ensemble(n_walkers: int, n_steps: int, coeffs: CoefficientTable,
                    kernel: LatticeKernel, master_seed: int, n_jobs: int = 1) -> WalkerEnsemble:
    """Simulate ``n_walkers`` independent paths of ``n_steps`` steps from the origin."""
    if n_walkers < 1:
        raise ConfigError("n_walkers must be positive")
    if n_steps < 0:
        raise ConfigError("n_steps must be nonnegative")
    kernel.check_stability()
    if n_steps:
        coeffs.require(n_steps - 1)
    if not (math.isclose(kernel.c1, coeffs.c1, rel_tol=1e-12)
            and math.isclose(kernel.jump_scale, coeffs.jump_scale, rel_tol=1e-12)):
        raise ConfigError("kernel was built for a different time discretization")
    t0 = time.perf_counter()
    jumps = JumpSampler(kernel)
    sizes = [min(BLOCK, n_walkers - b * BLOCK) for b in range(-(-n_walkers // BLOCK))]
    d = kernel.dim_d

    def work(b):
        return _simulate_block(b, sizes[b], n_steps, master_seed, coeffs, jumps, d)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(work, range(len(sizes))))
    else:
        results = [work(b) for b in range(len(sizes))]
    paths = np.concatenate([r[0] for r in results])
    counts = np.sum([r[1] for r in results], axis=0)
    return WalkerEnsemble(int(n_walkers), int(master_seed), paths,
                          {k: int(v) for k, v in zip(BRANCHES, counts)},
                          time.perf_counter() - t0)


def empirical_cf(ensemble: WalkerEnsemble, h: float, xi, n: int = -1) -> complex:
    """``mean_w exp(i h S_n^(w) . xi)``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.size != ensemble.dim_d:
        raise ValueError("xi dimension does not match the ensemble")
    phase = (ensemble.positions(n).astype(float) * h) @ xi
    return complex(np.exp(1j * phase).mean())


def histogram(ensemble: WalkerEnsemble, window_J: int, n: int = -1) -> tuple[np.ndarray, int]:
    """Counts on ``|j|_inf <= window_J`` and the number of walkers outside."""
    pos = ensemble.positions(n)
    inside = np.all(np.abs(pos) <= window_J, axis=1)
    shape = (2 * window_J + 1,) * ensemble.dim_d
    flat = np.ravel_multi_index(tuple((pos[inside] + window_J).T), shape)
    counts = np.bincount(flat, minlength=int(np.prod(shape))).reshape(shape)
    return counts, int((~inside).sum())


def chi_square_vs_layer(ensemble: WalkerEnsemble, layer: np.ndarray, lost: float,
                        n: int = -1, min_expected: float = 5.0):
    """Pearson test of the ensemble's step-``n`` sites against a grid layer.

    Sites with expected count below ``min_expected`` are pooled with the mass
    outside the window into one bin. Returns ``scipy.stats`` power-divergence result.
    """
    J = (layer.shape[0] - 1) // 2
    counts, outside = histogram(ensemble, J, n)
    N = ensemble.n_walkers
    expected = layer.ravel() * N
    observed = counts.ravel().astype(float)
    keep = expected >= min_expected
    pooled_exp = expected[~keep].sum() + lost * N
    pooled_obs = observed[~keep].sum() + outside
    f_exp = np.append(expected[keep], pooled_exp)
    f_obs = np.append(observed[keep], pooled_obs)
    # the layer and the loss sum to one; rescale away the 1e-12 round-off
    f_exp *= f_obs.sum() / f_exp.sum()
    return stats.chisquare(f_obs, f_exp)
