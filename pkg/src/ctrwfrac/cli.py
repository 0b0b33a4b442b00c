"""Command-line driver.

Subcommands: coeffs, kernel, solve, sample, reference, converge, memoryless,
distorder. Outputs go to ``--output-dir``, else ``$CTRW_OUTPUT_DIR``, else
``./ctrw_output``. Exit codes: 0 success, 2 configuration error, 3 stability
violation, 4 numeric guard (aliasing, Laplace tail, truncation).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import reference as ref
from .coefficients import make_coefficients
from .errors import ConfigError, HistoryMissing, NumericGuardError, StabilityViolation
from .kernel import build_kernel, lattice_Q, stability_bound
from .measures import SpectralMeasure, TimeMeasure, load_measure
from .sampler import histogram, sample_ensemble
from .scheme import default_window, solve

log = logging.getLogger("ctrwfrac")

EXIT_OK, EXIT_CONFIG, EXIT_STABILITY, EXIT_NUMERIC = 0, 2, 3, 4
AUTO_FRACTION = 0.9


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 already; keep the message short
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# --- argument helpers -----------------------------------------------------------------

def _rho(args) -> SpectralMeasure:
    if getattr(args, "rho", None):
        return load_measure(args.rho, SpectralMeasure)
    if getattr(args, "alpha", None) is not None:
        return SpectralMeasure.atomic([(args.alpha, 1.0)])
    raise ConfigError("give --rho or --alpha")


def _order(args) -> float | TimeMeasure:
    if getattr(args, "mu", None):
        if args.beta is not None:
            raise ConfigError("give only one of --beta and --mu")
        return load_measure(args.mu, TimeMeasure)
    if args.beta is None:
        raise ConfigError("give --beta or --mu")
    return float(args.beta)


def _tau(args, rho, order) -> tuple[float, float]:
    """Resolve ``--tau`` (a number or ``auto``) and return it with the stability bound."""
    bound = stability_bound(rho, args.dim, args.h, order, args.variant, args.weighting)
    if args.tau is None or args.tau == "auto":
        return AUTO_FRACTION * bound, bound
    try:
        tau = float(args.tau)
    except ValueError as exc:
        raise ConfigError(f"--tau must be a number or 'auto', got {args.tau!r}") from exc
    return tau, bound


def _out_dir(args) -> Path:
    out = Path(args.output_dir) if args.output_dir else ex.default_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=2))
    return path


def _report(paths) -> None:
    for p in paths:
        print(p)


def _add_measure_args(p, time=True):
    p.add_argument("--rho", help="spatial measure: JSON file or inline JSON")
    p.add_argument("--alpha", type=float, help="shortcut for rho = delta_alpha")
    if time:
        p.add_argument("--beta", type=float, help="single time order in (0, 1]")
        p.add_argument("--mu", help="time measure: JSON file or inline JSON")
        p.add_argument("--variant", choices=("GL", "Liu"), default="GL")
        p.add_argument("--weighting", choices=("measure", "prefactor"), default="measure")


def _add_grid_args(p):
    p.add_argument("--dim", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--h", type=float, required=True, help="lattice step")
    p.add_argument("--tau", default="auto", help="time step or 'auto' (0.9 of the bound)")
    p.add_argument("--trunc-K", type=int, default=None, help="dense kernel radius")


# --- subcommands -----------------------------------------------------------------------

def cmd_coeffs(args) -> int:
    order = _order(args)
    table = make_coefficients(order, args.variant, args.n, args.tau_value, args.weighting)
    out = _out_dir(args)
    paths = [out / "coeffs.json", out / "coeffs.csv"]
    paths[0].write_text(table.to_json())
    paths[1].write_text(table.to_csv())
    log.info("a(tau) = %.12g, c_1 = %.12g", table.a_tau, table.c1)
    _report(paths)
    return EXIT_OK


def cmd_kernel(args) -> int:
    rho = _rho(args)
    order = _order(args)
    tau, _ = _tau(args, rho, order)
    coeffs = make_coefficients(order, args.variant, 1, tau, args.weighting)
    kernel = build_kernel(rho, args.dim, args.h, trunc_K=args.trunc_K, coeffs=coeffs)
    K = kernel.trunc_K
    idx = np.indices(kernel.q.shape).reshape(args.dim, -1).T - K
    rows = [[*k, repr(float(q))] for k, q in zip(idx.tolist(), kernel.q.ravel())]
    header = [f"k{i + 1}" for i in range(args.dim)] + ["q_k"]
    out = _out_dir(args)
    bounds = {}
    for variant in ("GL", "Liu"):
        if variant == "Liu" and (isinstance(order, float) and order >= 1.0 or
                                 isinstance(order, TimeMeasure) and order.betas.max() >= 1.0):
            bounds[variant] = None
            continue
        bounds[variant] = stability_bound(rho, args.dim, args.h, order, variant, args.weighting)
    meta = {"h": args.h, "tau": tau, "dim_d": args.dim, "trunc_K": K, "q0": kernel.q0,
            "Q": lattice_Q(rho, args.dim, args.h), "tail_mass": kernel.tail_mass,
            "stable": kernel.stable, "tau_max": bounds}
    paths = [_write_csv(out / "kernel.csv", header, rows), _write_json(out / "kernel.json", meta)]
    print(f"tau_max GL = {bounds['GL']}, Liu = {bounds['Liu']}")
    _report(paths)
    return EXIT_OK


def _solve_setup(args):
    rho = _rho(args)
    order = _order(args)
    tau, bound = _tau(args, rho, order)
    coeffs = make_coefficients(order, args.variant, args.steps, tau, args.weighting)
    kernel = build_kernel(rho, args.dim, args.h, trunc_K=args.trunc_K, coeffs=coeffs)
    kernel.check_stability()
    return rho, order, tau, bound, coeffs, kernel


def cmd_solve(args) -> int:
    rho, order, tau, bound, coeffs, kernel = _solve_setup(args)
    J = args.window or default_window(rho, args.steps, args.dim)
    state = solve(rho, coeffs, kernel, args.steps, J)
    layer = state.layer()
    idx = np.indices(layer.shape).reshape(args.dim, -1).T - J
    rows = [[*j, *(np.asarray(j) * args.h).tolist(), repr(float(u))]
            for j, u in zip(idx.tolist(), layer.ravel())]
    header = ([f"j{i + 1}" for i in range(args.dim)] + [f"x{i + 1}" for i in range(args.dim)]
              + ["u"])
    out = _out_dir(args)
    meta = {"h": args.h, "tau": tau, "tau_max": bound, "steps": args.steps, "window_J": J,
            "variant": args.variant, "mass_drift": state.max_mass_drift,
            "boundary_loss": state.boundary_mass_lost, "mass": state.mass(),
            "order": order.to_dict() if isinstance(order, TimeMeasure) else order,
            "rho": rho.to_dict()}
    paths = [_write_csv(out / "layer.csv", header, rows), _write_json(out / "solve.json", meta)]
    _report(paths)
    return EXIT_OK


def cmd_sample(args) -> int:
    rho, order, tau, bound, coeffs, kernel = _solve_setup(args)
    ens = sample_ensemble(args.walkers, args.steps, coeffs, kernel, args.seed, args.jobs)
    J = args.window or default_window(rho, args.steps, args.dim)
    counts, outside = histogram(ens, J)
    idx = np.indices(counts.shape).reshape(args.dim, -1).T - J
    rows = [[*j, int(c)] for j, c in zip(idx.tolist(), counts.ravel()) if c]
    header = [f"j{i + 1}" for i in range(args.dim)] + ["count"]
    out = _out_dir(args)
    meta = ens.summary() | {"h": args.h, "tau": tau, "tau_max": bound, "window_J": J,
                            "outside_window": outside}
    paths = [_write_csv(out / "histogram.csv", header, rows),
             _write_json(out / "ensemble.json", meta)]
    _report(paths)
    return EXIT_OK


def cmd_reference(args) -> int:
    rho = _rho(args)
    out = _out_dir(args)
    xi = np.linspace(0.0, args.xi_max, args.n_xi)
    cf = ref.exact_cf_radial(rho, args.beta, args.t, xi)
    paths = [_write_csv(out / "reference_cf.csv", ["xi", "cf"],
                        [[repr(float(a)), repr(float(b))] for a, b in zip(xi, cf)])]
    if args.dx:
        n = int(round(args.x_max / args.dx))
        x = np.arange(-n, n + 1) * args.dx
        dens = ref.frac_density(rho, args.beta, args.t, x)
        paths.append(_write_csv(out / "reference_density.csv", ["x", "density"],
                                [[repr(float(a)), repr(float(b))] for a, b in zip(x, dens)]))
    _report(paths)
    return EXIT_OK


_STUDY_FLAGS = {"beta": "beta", "variant": "variant", "weighting": "weighting",
                "dim": "dim_d", "h_list": "h_list", "t_final": "t_final", "steps": "n_steps",
                "probes": "xi_probes", "walkers": "n_walkers", "seed": "master_seed",
                "window": "window_J", "trunc_K": "trunc_K", "x_window": "x_window",
                "jobs": "n_jobs", "output_dir": "output_dir"}


def _study_config(args) -> ex.ExperimentConfig:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    # flags win over the file
    for flag, key in _STUDY_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    if args.rho or args.alpha is not None:
        data["rho"] = _rho(args).to_dict()
    if args.mu:
        data["mu"] = load_measure(args.mu, TimeMeasure).to_dict()
        if args.beta is None:
            data.pop("beta", None)
    elif args.beta is not None:
        data.pop("mu", None)
    if args.steps is not None and args.t_final is None:
        data["t_final"] = None
    if args.t_final is not None and args.steps is None:
        data["n_steps"] = None
    if args.tau_fraction is not None:
        data["tau_rule"] = {"fraction_of_bound": args.tau_fraction}
    if args.tau is not None:
        data["tau_rule"] = {"explicit": args.tau}
    if args.study == "memoryless":
        data.setdefault("beta", 1.0)
    return ex.ExperimentConfig.from_dict(data)


def cmd_study(args) -> int:
    config = _study_config(args)
    report = ex.STUDIES[args.study](config)
    out = Path(args.output_dir) if args.output_dir else (
        Path(config.output_dir) if config.output_dir else ex.default_output_dir())
    paths = report.write(out)
    for row in report.rows:
        err = row["sup_density_error"] if args.study == "memoryless" else row["sup_cf_error"]
        print(f"h={row['h']:<8g} tau={row['tau']:<12.6g} n={row['n_steps']:<6d} "
              f"error={'n/a' if err is None else format(err, '.3e')}")
    for row in report.mc_rows:
        print(f"MC h={row['h']:<8g} N={row['n_walkers']} "
              f"|ECF - scheme|={row['ecf_error_vs_scheme']:.3e} (bound {row['ecf_bound']:.3e})")
    for note in report.violations + report.notes:
        print(f"note: {note}")
    _report(paths)
    return EXIT_OK


# --- parser -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ctrwfrac", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--output-dir", default=None,
                       help=f"output directory (default ${ex.OUTPUT_ENV} or ./ctrw_output)")

    p = sub.add_parser("coeffs", help="memory coefficient table")
    p.add_argument("--beta", type=float)
    p.add_argument("--mu")
    p.add_argument("--variant", choices=("GL", "Liu"), default="GL")
    p.add_argument("--weighting", choices=("measure", "prefactor"), default="measure")
    p.add_argument("--n", type=int, required=True, help="horizon")
    p.add_argument("--tau", dest="tau_value", type=float, required=True)
    common(p)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("kernel", help="jump weights q_k and stability bounds")
    _add_measure_args(p)
    _add_grid_args(p)
    common(p)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("solve", help="run the grid recursion")
    _add_measure_args(p)
    _add_grid_args(p)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--window", type=int, default=None, help="half-width J of the grid")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sample", help="simulate walkers")
    _add_measure_args(p)
    _add_grid_args(p)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--walkers", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--window", type=int, default=None, help="histogram half-width")
    common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("reference", help="exact characteristic function and density")
    _add_measure_args(p, time=False)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--xi-max", type=float, default=10.0)
    p.add_argument("--n-xi", type=int, default=201)
    p.add_argument("--x-max", type=float, default=10.0)
    p.add_argument("--dx", type=float, default=None, help="density grid spacing (omit to skip)")
    common(p)
    p.set_defaults(func=cmd_reference)

    for name, help_text in (("converge", "refinement study against the exact transform"),
                            ("memoryless", "memoryless walk against the stable density"),
                            ("distorder", "distributed-order time refinement study")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON experiment config; flags override it")
        _add_measure_args(p)
        for action in p._actions:
            if action.dest in ("variant", "weighting"):
                action.default = None
        p.add_argument("--dim", type=int, choices=(1, 2, 3))
        p.add_argument("--h-list", type=float, nargs="+")
        p.add_argument("--tau-fraction", type=float, help="tau as a fraction of the bound")
        p.add_argument("--tau", type=float, help="explicit tau for every level")
        p.add_argument("--t-final", type=float)
        p.add_argument("--steps", type=int)
        p.add_argument("--probes", type=float, nargs="+")
        p.add_argument("--walkers", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--window", type=int)
        p.add_argument("--trunc-K", type=int)
        p.add_argument("--x-window", type=float)
        p.add_argument("--jobs", type=int)
        common(p)
        p.set_defaults(func=cmd_study, study=name)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except StabilityViolation as exc:
        print(f"stability violation: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except NumericGuardError as exc:
        print(f"numeric guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, HistoryMissing, ValueError, TypeError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
