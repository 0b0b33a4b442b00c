"""Refinement studies: scheme and walkers against the exact solution.

Each study walks down a list of lattice steps ``h``. At every level the time
step is tied to ``h`` (by default a fixed fraction of the largest stable
step), the grid recursion is run to the final time, and the characteristic
function of the last layer is compared with the exact one at a few probe
frequencies. Optional Monte Carlo rows compare a walker ensemble with the
same recursion. Reports have a fixed, versioned column set and are written
as CSV (tables) plus JSON (metadata).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import reference as ref
from .coefficients import make_coefficients
from .errors import ConfigError, StabilityViolation
from .kernel import build_kernel, lattice_Q, stability_bound
from .measures import SpectralMeasure, TimeMeasure, load_measure
from .sampler import chi_square_vs_layer, empirical_cf, histogram, sample_ensemble
from .scheme import cf_recursion, default_window, grid_cf, solve
from .special import mittag_leffler

SCHEMA_VERSION = "1.0"
ROW_COLUMNS = ("h", "tau", "tau_bound", "n_steps", "t_final", "sup_cf_error",
               "sup_density_error", "l1_density_error", "mass_drift", "boundary_loss",
               "runtime_s")
MC_COLUMNS = ("h", "n_walkers", "n_steps", "ecf_error_vs_scheme", "ecf_error_vs_exact",
              "ecf_bound", "chi2_pvalue", "sup_density_error", "runtime_s")
# walker paths are kept in full; skip Monte Carlo levels that would not fit
MC_BUDGET = 1 << 30
OUTPUT_ENV = "CTRW_OUTPUT_DIR"


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "ctrw_output"))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a refinement study needs.

    Exactly one of ``beta`` and ``mu`` is set. The time step follows
    ``tau_rule``: ``("fraction_of_bound", f)`` takes ``tau <= f`` times the
    largest admissible step at each ``h`` (shrunk so that ``t_final`` is a
    whole number of steps), ``("explicit", tau)`` uses ``tau`` as given.
    """

    rho: SpectralMeasure
    beta: float | None = None
    mu: TimeMeasure | None = None
    variant: str = "GL"
    weighting: str = "measure"
    dim_d: int = 1
    h_list: tuple[float, ...] = (0.2, 0.1, 0.05)
    tau_rule: tuple[str, float] = ("fraction_of_bound", 0.9)
    t_final: float | None = 1.0
    n_steps: int | None = None
    xi_probes: tuple[float, ...] = (0.5, 1.0, 2.0)
    n_walkers: int = 0
    master_seed: int = 0
    window_J: int | None = None
    trunc_K: int | None = None
    x_window: float = 10.0
    n_jobs: int = 1
    output_dir: str | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.rho, SpectralMeasure):
            raise ConfigError("rho must be a SpectralMeasure")
        if (self.beta is None) == (self.mu is None):
            raise ConfigError("give exactly one of beta and mu")
        if self.beta is not None and not 0 < self.beta <= 1:
            raise ConfigError("beta must lie in (0, 1]")
        if self.mu is not None and not isinstance(self.mu, TimeMeasure):
            raise ConfigError("mu must be a TimeMeasure")
        if self.variant not in ("GL", "Liu"):
            raise ConfigError(f"variant must be GL or Liu, got {self.variant!r}")
        if self.weighting not in ("measure", "prefactor"):
            raise ConfigError(f"unknown weighting {self.weighting!r}")
        if self.variant == "Liu" and max(self.orders) >= 1.0:
            raise ConfigError("the quadrature variant needs every time order below 1")
        if self.dim_d not in (1, 2, 3):
            raise ConfigError("dim_d must be 1, 2 or 3")
        h = np.asarray(self.h_list, dtype=float)
        if h.size == 0 or np.any(h <= 0) or np.any(np.diff(h) >= 0):
            raise ConfigError("h_list must be positive and strictly decreasing")
        rule, value = self.tau_rule
        if rule == "fraction_of_bound":
            if not 0 < value <= 1:
                raise ConfigError("fraction_of_bound must lie in (0, 1]")
        elif rule == "explicit":
            if not value > 0:
                raise ConfigError("explicit tau must be positive")
        else:
            raise ConfigError(f"unknown tau rule {rule!r}")
        if (self.t_final is None) == (self.n_steps is None):
            raise ConfigError("give exactly one of t_final and n_steps")
        if self.t_final is not None and not self.t_final > 0:
            raise ConfigError("t_final must be positive")
        if self.n_steps is not None and self.n_steps < 1:
            raise ConfigError("n_steps must be positive")
        if len(self.xi_probes) == 0:
            raise ConfigError("xi_probes must not be empty")
        if self.n_walkers < 0:
            raise ConfigError("n_walkers must be nonnegative")

    @property
    def orders(self) -> tuple[float, ...]:
        if self.beta is not None:
            return (float(self.beta),)
        return tuple(float(b) for b in self.mu.betas)

    @property
    def time_order(self) -> float | TimeMeasure:
        return float(self.beta) if self.beta is not None else self.mu

    def probes(self) -> list[np.ndarray]:
        """Probe frequencies as vectors; a scalar probe lies on the first axis."""
        out = []
        for p in self.xi_probes:
            v = np.atleast_1d(np.asarray(p, dtype=float))
            if v.size == 1:
                v = np.concatenate([v, np.zeros(self.dim_d - 1)])
            if v.size != self.dim_d:
                raise ConfigError("probe dimension does not match dim_d")
            out.append(v)
        return out

    def to_dict(self) -> dict:
        return {"rho": self.rho.to_dict(), "beta": self.beta,
                "mu": None if self.mu is None else self.mu.to_dict(),
                "variant": self.variant, "weighting": self.weighting, "dim_d": self.dim_d,
                "h_list": list(self.h_list),
                "tau_rule": {self.tau_rule[0]: self.tau_rule[1]},
                "t_final": self.t_final, "n_steps": self.n_steps,
                "xi_probes": [np.asarray(p).tolist() for p in self.xi_probes],
                "n_walkers": self.n_walkers, "master_seed": self.master_seed,
                "window_J": self.window_J, "trunc_K": self.trunc_K,
                "x_window": self.x_window, "n_jobs": self.n_jobs,
                "output_dir": self.output_dir}

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "rho" not in data:
            raise ConfigError("config needs rho")
        try:
            data["rho"] = load_measure(data["rho"], SpectralMeasure)
            if data.get("mu") is not None:
                data["mu"] = load_measure(data["mu"], TimeMeasure)
        except (OSError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"cannot read measure: {exc}") from exc
        rule = data.get("tau_rule")
        if isinstance(rule, dict):
            if len(rule) != 1:
                raise ConfigError("tau_rule must have a single entry")
            ((name, value),) = rule.items()
            data["tau_rule"] = (name, float(value))
        elif rule is not None:
            data["tau_rule"] = (str(rule[0]), float(rule[1]))
        if data.get("n_steps") is not None and "t_final" not in data:
            data["t_final"] = None
        for key in ("h_list", "xi_probes"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-level rows, Monte Carlo rows and run metadata."""

    study: str
    config: dict
    rows: tuple[dict, ...]
    mc_rows: tuple[dict, ...] = ()
    monotone: bool = True
    violations: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()
    schema_version: str = SCHEMA_VERSION
    meta: dict = field(default_factory=dict)

    def column(self, name: str, mc: bool = False) -> np.ndarray:
        rows = self.mc_rows if mc else self.rows
        return np.array([np.nan if r[name] is None else r[name] for r in rows], dtype=float)

    def to_dict(self, with_runtime: bool = True) -> dict:
        def strip(rows):
            if with_runtime:
                return [dict(r) for r in rows]
            return [{k: v for k, v in r.items() if k != "runtime_s"} for r in rows]

        return {"schema_version": self.schema_version, "study": self.study,
                "columns": list(ROW_COLUMNS), "mc_columns": list(MC_COLUMNS),
                "config": self.config, "rows": strip(self.rows), "mc_rows": strip(self.mc_rows),
                "monotone": self.monotone, "violations": list(self.violations),
                "notes": list(self.notes), "meta": self.meta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def fingerprint(self) -> str:
        """Canonical JSON of everything except wall-clock times."""
        return json.dumps(self.to_dict(with_runtime=False), sort_keys=True)

    @staticmethod
    def _csv(rows, columns) -> str:
        buf = io.StringIO()
        buf.write(f"# schema_version={SCHEMA_VERSION}\n")
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: "" if r[k] is None else repr(r[k]) for k in columns})
        return buf.getvalue()

    def rows_csv(self) -> str:
        return self._csv(self.rows, ROW_COLUMNS)

    def mc_csv(self) -> str:
        return self._csv(self.mc_rows, MC_COLUMNS)

    def write(self, output_dir: str | os.PathLike | None = None) -> list[Path]:
        out = Path(output_dir) if output_dir is not None else default_output_dir()
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{self.study}_rows.csv", out / f"{self.study}_mc.csv",
                 out / f"{self.study}_report.json"]
        paths[0].write_text(self.rows_csv())
        paths[1].write_text(self.mc_csv())
        paths[2].write_text(self.to_json())
        return paths


# --- shared pieces --------------------------------------------------------------------

@dataclass(frozen=True)
class _Level:
    h: float
    tau: float
    tau_bound: float
    n_steps: int
    t_final: float


def _time_grid(config: ExperimentConfig, tau_bound: float) -> tuple[float, int, float]:
    rule, value = config.tau_rule
    if rule == "explicit":
        tau = float(value)
        if config.t_final is not None:
            ratio = config.t_final / tau
            n = int(round(ratio))
            if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
                raise ConfigError("explicit tau must divide t_final")
        else:
            n = int(config.n_steps)
        return tau, n, n * tau
    cap = value * tau_bound
    if config.t_final is not None:
        n = max(1, math.ceil(config.t_final / cap * (1 - 1e-12)))
        return config.t_final / n, n, config.t_final
    n = int(config.n_steps)
    return cap, n, n * cap


def _levels(config: ExperimentConfig, bound_fn) -> list[_Level]:
    out = []
    for h in config.h_list:
        bound = bound_fn(float(h))
        tau, n, t = _time_grid(config, bound)
        out.append(_Level(float(h), tau, bound, n, t))
    return out


def _exact_cf(config: ExperimentConfig, t: float, xi: np.ndarray) -> float | None:
    """Exact characteristic function, or None when no closed form applies."""
    psi = float(config.rho.psi_radial(float(np.linalg.norm(xi))))
    if config.beta is not None:
        return float(mittag_leffler(config.beta, psi * t ** config.beta))
    mu = config.mu
    if mu.single_order is not None:
        # an atom of mass w divides the symbol by w
        b = mu.single_order
        return float(mittag_leffler(b, psi * t ** b / mu.total_mass))
    if config.weighting == "prefactor":
        return ref.distributed_exact_cf(mu, config.rho, t, xi)
    return None


def _pipeline(config: ExperimentConfig, level: _Level):
    coeffs = make_coefficients(config.time_order, config.variant, level.n_steps, level.tau,
                               config.weighting)
    kernel = build_kernel(config.rho, config.dim_d, level.h, trunc_K=config.trunc_K,
                          coeffs=coeffs)
    kernel.check_stability()
    return coeffs, kernel


def _lattice_density_oracle(rho: SpectralMeasure, beta: float, t: float, h: float,
                            J: int) -> np.ndarray:
    """Exact density at ``x = j h``, ``|j| <= J``, from a finer inversion grid."""
    m = 1
    while float(ref.exact_cf_radial(rho, beta, t, math.pi * m / h)) > ref.CUTOFF_TOL \
            and beta == 1.0 and m < 1 << 12:
        m *= 2
    x = np.arange(-J * m, J * m + 1) * (h / m)
    dens = ref.frac_density(rho, beta, t, x)
    return dens[::m]


def _density_errors(u: np.ndarray, h: float, oracle: np.ndarray) -> tuple[float, float]:
    diff = u / h - oracle
    return float(np.max(np.abs(diff))), float(np.sum(np.abs(diff)) * h)


def _mc_row(config, level, coeffs, kernel, state, probes, exact, density_oracle=None):
    N = config.n_walkers
    if N * (level.n_steps + 1) * config.dim_d * 8 > MC_BUDGET:
        return None
    t0 = time.perf_counter()
    ens = sample_ensemble(N, level.n_steps, coeffs, kernel, config.master_seed, config.n_jobs)
    vs_scheme, vs_exact = 0.0, 0.0
    for xi, ex in zip(probes, exact):
        ecf = empirical_cf(ens, level.h, xi)
        law = cf_recursion(coeffs, kernel, xi, level.n_steps)[-1]
        vs_scheme = max(vs_scheme, abs(ecf - law))
        if ex is not None:
            vs_exact = max(vs_exact, abs(ecf - ex))
    pvalue = None
    if state is not None:
        pvalue = float(chi_square_vs_layer(ens, state.layer(), state.boundary_mass_lost).pvalue)
    sup_dens = None
    if density_oracle is not None:
        J = (density_oracle.size - 1) // 2
        counts, _ = histogram(ens, J)
        sup_dens = _density_errors(counts / N, level.h, density_oracle)[0]
    return {"h": level.h, "n_walkers": N, "n_steps": level.n_steps,
            "ecf_error_vs_scheme": float(vs_scheme),
            "ecf_error_vs_exact": None if any(e is None for e in exact) else float(vs_exact),
            "ecf_bound": 4.0 / math.sqrt(N), "chi2_pvalue": pvalue,
            "sup_density_error": sup_dens, "runtime_s": time.perf_counter() - t0}


def _monotone(values: list[float | None], label: str) -> tuple[bool, list[str]]:
    vals = [v for v in values if v is not None]
    bad = [f"{label} did not decrease from level {i} to {i + 1}: {a:.3g} -> {b:.3g}"
           for i, (a, b) in enumerate(zip(vals[:-1], vals[1:])) if not b < a]
    return not bad, bad


def _run_levels(config: ExperimentConfig, levels: list[_Level], study: str,
                with_density: bool, notes: list[str]) -> ConvergenceReport:
    probes = config.probes()
    rows, mc_rows = [], []
    for level in levels:
        t0 = time.perf_counter()
        coeffs, kernel = _pipeline(config, level)
        J = config.window_J or default_window(config.rho, level.n_steps, config.dim_d)
        state = solve(config.rho, coeffs, kernel, level.n_steps, J)
        exact = [_exact_cf(config, level.t_final, xi) for xi in probes]
        cf_err = None
        if all(e is not None for e in exact):
            cf_err = max(abs(grid_cf(state, xi) - e) for xi, e in zip(probes, exact))
        sup_d = l1_d = None
        dens_oracle = None
        if with_density:
            Jx = min(J, int(math.floor(config.x_window / level.h)))
            dens_oracle = _lattice_density_oracle(config.rho, config.orders[0],
                                                  level.t_final, level.h, Jx)
            u = state.layer()[J - Jx:J + Jx + 1]
            sup_d, l1_d = _density_errors(u, level.h, dens_oracle)
        rows.append({"h": level.h, "tau": level.tau, "tau_bound": level.tau_bound,
                     "n_steps": level.n_steps, "t_final": level.t_final,
                     "sup_cf_error": None if cf_err is None else float(cf_err),
                     "sup_density_error": sup_d, "l1_density_error": l1_d,
                     "mass_drift": state.max_mass_drift,
                     "boundary_loss": state.boundary_mass_lost,
                     "runtime_s": time.perf_counter() - t0})
        if config.n_walkers > 0:
            row = _mc_row(config, level, coeffs, kernel, state, probes, exact, dens_oracle)
            if row is None:
                notes.append(f"Monte Carlo skipped at h={level.h}: paths exceed the memory budget")
            else:
                mc_rows.append(row)
    metric = "sup_density_error" if with_density else "sup_cf_error"
    ok, bad = _monotone([r[metric] for r in rows], metric)
    return ConvergenceReport(study, config.to_dict(), tuple(rows), tuple(mc_rows), ok,
                             tuple(bad), tuple(notes))


# --- studies ----------------------------------------------------------------------------

def run_convergence(config: ExperimentConfig) -> ConvergenceReport:
    """Refinement study of the characteristic-function error of the grid scheme."""
    def bound(h):
        return stability_bound(config.rho, config.dim_d, h, config.time_order,
                               config.variant, config.weighting)

    levels = _levels(config, bound)
    for lv in levels:
        if lv.tau > lv.tau_bound * (1 + 1e-12):
            raise StabilityViolation(
                f"tau = {lv.tau:.6g} exceeds the stability bound {lv.tau_bound:.6g} at h = {lv.h}")
    notes = []
    if config.mu is not None and _exact_cf(config, 1.0, config.probes()[0]) is None:
        notes.append("no closed-form transform for a mixed time measure under measure "
                     "weighting; validated by scheme versus Monte Carlo only")
    return _run_levels(config, levels, "convergence", False, notes)


def sigma(rho: SpectralMeasure, dim_d: int, h: float, tau: float) -> float:
    """``2 tau Q(h)``: the step condition of the memoryless walk (must be <= 1)."""
    return 2.0 * tau * lattice_Q(rho, dim_d, h)


def run_memoryless(config: ExperimentConfig) -> ConvergenceReport:
    """Memoryless walk (``beta = 1``) against the stable density and its transform.

    The time step is tied to ``sigma = 2 tau Q(h) <= 1``: a fraction rule is
    taken relative to ``tau = 1 / (2 Q(h))`` and any level with ``sigma > 1``
    is rejected.
    """
    if config.beta is None or config.beta != 1.0:
        raise ConfigError("the memoryless study needs beta = 1")

    def bound(h):
        return 1.0 / (2.0 * lattice_Q(config.rho, config.dim_d, h))

    levels = _levels(config, bound)
    for lv in levels:
        s = sigma(config.rho, config.dim_d, lv.h, lv.tau)
        if s > 1.0 + 1e-12:
            raise StabilityViolation(f"sigma(tau, h) = {s:.4g} > 1 at h = {lv.h}")
    notes = []
    with_density = config.dim_d == 1
    if not with_density:
        notes.append("density errors are only computed in one dimension")
    return _run_levels(config, levels, "memoryless", with_density, notes)


def run_distributed_order(config: ExperimentConfig) -> ConvergenceReport:
    """Same refinement with coefficients averaged over a time measure ``mu``.

    A single atom has the exact Mittag-Leffler oracle. A genuine mixture is
    checked against walkers driven by the same coefficients; under
    ``weighting="prefactor"`` it is also compared with a numerically inverted
    Laplace transform.
    """
    if config.mu is None:
        raise ConfigError("the distributed-order study needs mu")
    if config.mu.single_order is None and config.n_walkers < 1:
        raise ConfigError("a mixed time measure needs n_walkers > 0 for cross-validation")
    report = run_convergence(config)
    return ConvergenceReport("distributed_order", report.config, report.rows, report.mc_rows,
                             report.monotone, report.violations, report.notes)


STUDIES = {"converge": run_convergence, "memoryless": run_memoryless,
           "distorder": run_distributed_order}
