"""Command-line runner: parse a TOML config, dispatch one experiment,
write CSV outputs plus a run manifest.

Exit codes: 0 success, 2 config error (message lists key paths), 3
numerical failure.  Data files are byte-stable for a fixed (config,
seed); wall-clock timestamps go to a separate *_times.json so reruns
diff clean.  Thread count of the underlying BLAS/FFT pools follows
OMP_NUM_THREADS.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import cellproblem as cp
from . import experiments as xp
from .config import (
    SUBCOMMAND_SECTION,
    build_kernel,
    build_potential,
    build_solver_config,
    load_config,
)
from .energy import energy_total
from .errors import ConfigError, NumericalError, ParameterError
from .fields import InterfaceSpec, line_grid, mollified_interface, save_field_csv
from .kernels import discrete_stencil
from .solver import ConstraintSpec, minimize, tanh_profile

__all__ = ["main"]


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return v


def _write_gnuplot(path: Path, pairs):
    with open(path, "w") as fh:
        for x, y in pairs:
            fh.write(f"{_fmt(float(x))} {_fmt(float(y))}\n")


def dump_profile_csv(cell, values, path: Path):
    """Profile dump in the field CSV format (x[,y],value)."""
    if isinstance(cell, cp.ShearCell):
        ii = np.arange(cell.ni)[:, None] * np.ones((1, cell.nj))
        jj = np.ones((cell.ni, 1)) * (cell.j_lo + np.arange(cell.nj))[None, :]
        rows = zip(
            (ii * cell.h).ravel(), (jj * cell.h).ravel(), np.ravel(values)
        )
        _write_csv(path, ["x", "y", "value"],
                   [[float(a), float(b), float(c)] for a, b, c in rows])
    else:
        xs = cell.grid.axis_coords(0)
        _write_csv(path, ["x", "value"],
                   [[float(a), float(b)] for a, b in zip(xs, values)])


class Runner:
    def __init__(self, args):
        self.args = args
        section = SUBCOMMAND_SECTION.get(args.command)
        self.cfg = load_config(args.config, require_section=section)
        if args.out_dir is not None:
            self.cfg["run"]["out_dir"] = args.out_dir
        if args.seed is not None:
            self.cfg["run"]["seed"] = args.seed
        if getattr(args, "samples", None) is not None:
            self.cfg["slice_check"]["samples"] = args.samples
        if args.gnuplot:
            self.cfg["run"]["gnuplot"] = True
        self.out = Path(self.cfg["run"]["out_dir"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs = []
        self.t_start = time.time()

    def path(self, name: str) -> Path:
        p = self.out / name
        self.outputs.append(str(p))
        return p

    def finish(self, tag: str):
        manifest = {
            "tool": "nlphase",
            "version": __version__,
            "command": self.args.command,
            "config": self.cfg,
            "seed": self.cfg["run"]["seed"],
            "outputs": sorted(self.outputs),
        }
        with open(self.out / f"{tag}_manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        with open(self.out / f"{tag}_times.json", "w") as fh:
            json.dump(
                {"start_unix": self.t_start, "end_unix": time.time()}, fh, indent=2
            )
        for p in self.outputs:
            if not Path(p).exists():
                raise NumericalError(f"declared output missing: {p}")


def _line_setup(self_cfg, section):
    c = self_cfg[section]
    grid = line_grid(c["lo"], c["hi"], c["nodes"])
    return c, grid


def cmd_energy(r: Runner) -> int:
    cfg = r.cfg
    c, grid = _line_setup(cfg, "energy")
    kern = build_kernel(cfg)
    if kern.dim != 1:
        raise ConfigError("energy subcommand evaluates a 1d reference field")
    pot = build_potential(cfg)
    eps = c["epsilon"]
    st = discrete_stencil(kern, eps, grid.spacing, max_radius=c["hi"] - c["lo"])
    f = mollified_interface(grid, InterfaceSpec((1.0,), 0.0, c["interface_sigma"]))
    rep = energy_total(f, pot, st, eps)
    _write_csv(r.path("energy.csv"),
               ["epsilon", "w_term", "j_term", "total", "region"],
               [rep.csv_row()])
    save_field_csv(f, r.path("energy_field.csv"))
    r.finish("energy")
    return 0


def cmd_minimize(r: Runner) -> int:
    cfg = r.cfg
    c, grid = _line_setup(cfg, "minimize")
    kern = build_kernel(cfg)
    if kern.dim != 1:
        raise ConfigError("minimize subcommand runs the 1d profile problem")
    pot = build_potential(cfg)
    eps = c["epsilon"]
    st = discrete_stencil(kern, eps, grid.spacing, max_radius=c["hi"] - c["lo"])
    f0 = tanh_profile(grid, (1.0,), eps)
    cons = ConstraintSpec.profile((1.0,), c["pin_halfwidth"])
    res = minimize(f0, pot, st, eps, cons, build_solver_config(cfg))
    _write_csv(r.path("minimize_trace.csv"),
               ["iter", "energy", "grad_norm", "step"],
               [list(row) for row in res.trace])
    _write_csv(r.path("minimize_summary.csv"),
               ["epsilon", "w_term", "j_term", "total", "converged",
                "iterations"],
               [[eps, res.report.w_term, res.report.j_term, res.report.total,
                 int(res.converged), res.iterations]])
    save_field_csv(res.field, r.path("minimize_field.csv"))
    if not res.converged:
        raise NumericalError("minimization did not converge within max_iters")
    r.finish("minimize")
    return 0


def _psi_run(cfg, direction, eps_grid, resolution, refine=False):
    kern = build_kernel(cfg)
    pot = build_potential(cfg)
    return cp.surface_density(
        direction, pot, kern, eps_grid, resolution,
        build_solver_config(cfg), refine=refine,
    )


def cmd_psi(r: Runner) -> int:
    cfg = r.cfg
    c = cfg["psi"]
    direction = c["direction"]
    kern = build_kernel(cfg)
    if kern.dim != len(direction):
        raise ConfigError("psi.direction length must match kernel.dim")
    res = _psi_run(cfg, direction, c["eps_grid"], c["resolution"], c["refine"])
    nu = (list(res.nu) + [0.0])[:2]
    rows = [[nu[0], nu[1], e, v, int(cv)]
            for e, v, cv in zip(res.eps_grid, res.energies, res.converged)]
    rows.append([nu[0], nu[1], "psi", res.psi, int(all(res.converged))])
    _write_csv(r.path("psi.csv"),
               ["nu_x", "nu_y", "epsilon", "cell_energy", "converged"], rows)
    dump_profile_csv(res.profile_cell, res.profile, r.path("psi_profile.csv"))
    if cfg["run"]["gnuplot"]:
        _write_gnuplot(r.path("psi.dat"),
                       list(zip(res.eps_grid, res.energies)))
    r.finish("psi")
    return 0


def cmd_gamma_scan(r: Runner) -> int:
    cfg = r.cfg
    c = cfg["gamma_scan"]
    kern = build_kernel(cfg)
    if kern.dim != 1:
        raise ConfigError("gamma-scan runs the 1d study")
    pot = build_potential(cfg)
    scfg = build_solver_config(cfg)
    psi = cp.surface_density(1.0, pot, kern, c["psi_eps_grid"],
                             c["psi_resolution"], scfg)
    rows = xp.gamma_scan_1d(pot, kern, c["eps_list"], psi.psi, c["nodes"],
                            tuple(c["positions"]), cfg=scfg)
    _write_csv(r.path("gamma_scan.csv"),
               ["epsilon", "energy", "predicted", "ratio", "transitions",
                "converged"],
               [[x.epsilon, x.energy, x.predicted, x.ratio, x.transitions,
                 int(x.converged)] for x in rows])
    if cfg["run"]["gnuplot"]:
        _write_gnuplot(r.path("gamma_scan.dat"),
                       [(x.epsilon, x.ratio) for x in rows])
    r.finish("gamma_scan")
    return 0


def cmd_slice_check(r: Runner) -> int:
    cfg = r.cfg
    c = cfg["slice_check"]
    dim = 1 if c["shape"] == "interval" else 2
    lhs, rhs, se = xp.slicing_check(
        c["shape"] if dim == 2 else "interval",
        c["integrand"], c["samples"], cfg["run"]["seed"], dim=dim,
    )
    _write_csv(r.path("slice_check.csv"),
               ["shape", "integrand", "samples", "seed", "lhs", "rhs",
                "mc_stderr"],
               [[c["shape"], c["integrand"], c["samples"], cfg["run"]["seed"],
                 lhs, rhs, se]])
    r.finish("slice_check")
    return 0


def cmd_interp_check(r: Runner) -> int:
    cfg = r.cfg
    c = cfg["interp_check"]
    kern = build_kernel(cfg)
    if kern.dim != 1:
        raise ConfigError("interp-check runs the 1d study")
    pot = build_potential(cfg)
    from .kernels import nondegeneracy_constants

    nd = nondegeneracy_constants(kern)
    suites = [
        xp.interpolation_check(pot, kern, nd, seed=s, n_fields=c["n_fields"],
                               eps_choices=tuple(c["eps_choices"]),
                               nodes=c["nodes"])
        for s in c["seeds"]
    ]
    rows = [[s, c["n_fields"], suite.max_ratio, suite.n_skipped]
            for s, suite in zip(c["seeds"], suites)]
    calibrated = 1.25 * max(s.max_ratio for s in suites[:2])
    rows.append(["calibrated", "", calibrated, ""])
    _write_csv(r.path("interp_check.csv"),
               ["seed", "n_fields", "max_ratio", "n_skipped"], rows)
    r.finish("interp_check")
    return 0


def cmd_compact_check(r: Runner) -> int:
    cfg = r.cfg
    c = cfg["compact_check"]
    kern = build_kernel(cfg)
    if kern.dim != 1:
        raise ConfigError("compact-check runs the 1d study")
    pot = build_potential(cfg)
    rows = xp.compactness_diagnostic(pot, kern, tuple(c["eps_list"]),
                                     nodes=c["nodes"],
                                     seed=cfg["run"]["seed"],
                                     cfg=build_solver_config(cfg))
    _write_csv(r.path("compact_check.csv"),
               ["family", "pinned_k", "epsilon", "energy", "transitions",
                "converged"],
               [[x.family, x.pinned_k, x.epsilon, x.energy, x.transitions,
                 int(x.converged)] for x in rows])
    r.finish("compact_check")
    return 0


def cmd_limsup_check(r: Runner) -> int:
    cfg = r.cfg
    c = cfg["limsup_check"]
    kern = build_kernel(cfg)
    if kern.dim != 2:
        raise ConfigError("limsup-check needs a 2d kernel")
    pot = build_potential(cfg)
    psi = _psi_run(cfg, [0, 1], c["psi_eps_grid"], c["psi_resolution"])
    rows = xp.limsup_check(pot, kern, psi, tuple(c["eps_factors"]),
                           c["tangential_length"], c["prism_thickness"])
    _write_csv(r.path("limsup_check.csv"),
               ["construction", "epsilon", "energy", "predicted", "ratio"],
               [[x.construction, x.epsilon, x.energy, x.predicted, x.ratio]
                for x in rows])
    if cfg["run"]["gnuplot"]:
        _write_gnuplot(r.path("limsup_check.dat"),
                       [(x.epsilon, x.ratio) for x in rows
                        if x.construction == "optimal-profile"])
    r.finish("limsup_check")
    return 0


def cmd_selftest(args) -> int:
    """Fast invariants: kernel evenness and closed forms, clamp and
    transition counting, energy identities, solver descent."""
    from . import fields as F
    from . import kernels as K
    from . import potentials as P
    from .energy import energy_j
    from .fields import Field, count_transitions

    rng = np.random.default_rng(0)
    checks = []

    b = K.band(1.0, 2.0, 1.0, dim=1)
    xs = rng.uniform(-3, 3, size=1000)
    even = all(K.kernel_eval(b, (x,)) == K.kernel_eval(b, (-x,)) for x in xs)
    checks.append(("kernel evenness", even))
    checks.append(("band moment", abs(K.kernel_moment(b) - 3.0) < 1e-12))

    q = P.quartic()
    checks.append(("well bottoms", P.potential_eval(q, 1.0) == 0.0
                   and P.potential_eval(q, -1.0) == 0.0))

    g = F.line_grid(-1.0, 1.0, 257)
    f = Field(g, np.clip(rng.standard_normal(g.shape), -2, 2),
              F.default_boundary(g))
    clamped = F.clamp_unit(f)
    checks.append(("clamp idempotent",
                   np.array_equal(F.clamp_unit(clamped).values, clamped.values)))

    t = np.linspace(-1, 1, 400)
    checks.append(("transition count", count_transitions(np.tanh(t / 0.05)) == 1
                   and count_transitions(np.ones(50)) == 0))

    g2 = F.Grid((24, 24), (0.0, 0.0), (1.0, 1.0), (True, True))
    k2 = K.band(1.0, 2.0, 1.0, dim=2)
    st = K.discrete_stencil(k2, 0.1, g2.spacing)
    u = Field(g2, rng.standard_normal(g2.shape))
    ma = rng.random(g2.shape) < 0.4
    mb = (~ma) & (rng.random(g2.shape) < 0.5)
    jab = energy_j(u, st, 0.1, ma, mb)
    jba = energy_j(u, st, 0.1, mb, ma)
    checks.append(("nonlocal symmetry", abs(jab - jba) <= 1e-12 * abs(jab)))

    grid = F.line_grid(-2.0, 2.0, 513)
    st1 = K.discrete_stencil(b, 0.1, grid.spacing)
    f0 = tanh_profile(grid, (1.0,), 0.1)
    res = minimize(f0, q, st1, 0.1, ConstraintSpec.profile((1.0,), 1.5),
                   build_solver_config({"solver": {
                       "max_iters": 400, "grad_tol": 1e-5,
                       "step_rule": "barzilai_borwein", "fixed_step": 1e-3,
                       "clamp": 0.0}, "run": {"seed": 0}}))
    energies = res.trace[:, 1]
    checks.append(("descent monotone", bool(np.all(np.diff(energies) <= 1e-12))))

    failed = [name for name, ok in checks if not ok]
    for name, ok in checks:
        print(f"{'ok  ' if ok else 'FAIL'} {name}")
    if failed:
        print(f"selftest: {len(failed)} failure(s)", file=sys.stderr)
        return 3
    print(f"selftest: all {len(checks)} checks passed")
    return 0


COMMANDS = {
    "energy": cmd_energy,
    "minimize": cmd_minimize,
    "psi": cmd_psi,
    "gamma-scan": cmd_gamma_scan,
    "slice-check": cmd_slice_check,
    "interp-check": cmd_interp_check,
    "compact-check": cmd_compact_check,
    "limsup-check": cmd_limsup_check,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nlphase",
        description="Nonlocal phase-field energies: experiments runner",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="TOML config file")
        p.add_argument("--out-dir", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--gnuplot", action="store_true")
        if name == "slice-check":
            p.add_argument("--samples", type=int, default=None)
    sub.add_parser("selftest")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return cmd_selftest(args)
    try:
        runner = Runner(args)
        return COMMANDS[args.command](runner)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
