"""Strict TOML config parsing for the command-line runner.

Every key is declared below; unknown sections or keys fail validation,
and all problems are reported at once with dotted key paths.  Each
experiment subcommand requires its own section plus the shared
[kernel] / [potential] blocks.
"""

from __future__ import annotations

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .errors import ConfigError
from .kernels import KernelSpec
from .potentials import Potential
from .solver import SolverConfig

__all__ = ["validate_config", "load_config", "build_kernel", "build_potential",
           "build_solver_config"]


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _num_list(v):
    return isinstance(v, list) and len(v) > 0 and all(_is_num(x) for x in v)


# section -> key -> (predicate, description, default or REQUIRED)
REQUIRED = object()

SCHEMA = {
    "run": {
        "out_dir": (lambda v: isinstance(v, str), "string", "out"),
        "seed": (lambda v: isinstance(v, int), "integer", 0),
        "gnuplot": (lambda v: isinstance(v, bool), "boolean", False),
    },
    "kernel": {
        "variant": (lambda v: v in ("band", "smooth_bump", "gagliardo"),
                    "one of band/smooth_bump/gagliardo", REQUIRED),
        "dim": (lambda v: v in (1, 2), "1 or 2", REQUIRED),
        "r": (lambda v: _is_num(v) and v > 0, "positive number", 1.0),
        "R": (lambda v: _is_num(v) and v > 0, "positive number", 2.0),
        "a": (lambda v: _is_num(v) and v > 0, "positive number", 1.0),
        "s": (lambda v: _is_num(v) and 0.5 < v < 1.0,
              "number in (1/2, 1)", 0.75),
    },
    "potential": {
        "variant": (lambda v: v in ("quartic", "custom_piecewise"),
                    "quartic or custom_piecewise", "quartic"),
        "scale": (lambda v: _is_num(v) and v > 0, "positive number", 1.0),
        "knots": (_num_list, "number list", [-1.0, 1.0]),
        "values": (lambda v: isinstance(v, list), "number list", [0.0, 0.0]),
    },
    "solver": {
        "max_iters": (lambda v: isinstance(v, int) and v > 0,
                      "positive integer", 4000),
        "grad_tol": (lambda v: _is_num(v) and v > 0, "positive number", 1e-6),
        "step_rule": (lambda v: v in ("barzilai_borwein", "fixed"),
                      "barzilai_borwein or fixed", "barzilai_borwein"),
        "fixed_step": (lambda v: _is_num(v) and v > 0, "positive number", 1e-3),
        "clamp": (lambda v: _is_num(v) and v >= 0, "nonneg number (0 = off)", 0.0),
    },
    "energy": {
        "epsilon": (lambda v: _is_num(v) and v > 0, "positive number", REQUIRED),
        "nodes": (lambda v: isinstance(v, int) and v > 8, "integer > 8", 1024),
        "lo": (_is_num, "number", -2.0),
        "hi": (_is_num, "number", 2.0),
        "interface_sigma": (lambda v: _is_num(v) and v > 0,
                            "positive number", 0.1),
    },
    "minimize": {
        "epsilon": (lambda v: _is_num(v) and v > 0, "positive number", REQUIRED),
        "nodes": (lambda v: isinstance(v, int) and v > 8, "integer > 8", 2048),
        "lo": (_is_num, "number", -2.0),
        "hi": (_is_num, "number", 2.0),
        "pin_halfwidth": (lambda v: _is_num(v) and v > 0,
                          "positive number", 1.5),
    },
    "psi": {
        "direction": (lambda v: isinstance(v, list) and len(v) in (1, 2)
                      and all(_is_num(x) for x in v),
                      "direction list [p] or [p, q]", REQUIRED),
        "eps_grid": (lambda v: _num_list(v) and all(0 < x < 1 for x in v),
                     "list of numbers in (0,1)", REQUIRED),
        "resolution": (lambda v: isinstance(v, int) and v >= 8,
                       "integer >= 8", 48),
        "refine": (lambda v: isinstance(v, bool), "boolean", False),
        "halfwidth": (lambda v: _is_num(v) and v >= 1.0, "number >= 1", 2.0),
    },
    "gamma_scan": {
        "eps_list": (lambda v: _num_list(v) and all(x > 0 for x in v),
                     "positive number list", REQUIRED),
        "nodes": (lambda v: isinstance(v, int) and v > 64, "integer > 64", 4096),
        "positions": (_num_list, "number list", [0.0]),
        "psi_eps_grid": (lambda v: _num_list(v) and all(0 < x < 1 for x in v),
                         "list of numbers in (0,1)", [0.2, 0.1, 0.05, 0.025]),
        "psi_resolution": (lambda v: isinstance(v, int) and v >= 8,
                           "integer >= 8", 1024),
    },
    "slice_check": {
        "shape": (lambda v: v in ("square", "disk", "interval"),
                  "square/disk/interval", REQUIRED),
        "integrand": (lambda v: v in ("one", "gauss", "separable"),
                      "one/gauss/separable", "one"),
        "samples": (lambda v: isinstance(v, int) and v > 0,
                    "positive integer", 1_000_000),
    },
    "interp_check": {
        "n_fields": (lambda v: isinstance(v, int) and v >= 10,
                     "integer >= 10", 200),
        "seeds": (lambda v: isinstance(v, list) and len(v) >= 2
                  and all(isinstance(x, int) for x in v),
                  "list of >= 2 integers", [1, 2, 3]),
        "eps_choices": (lambda v: _num_list(v) and all(x > 0 for x in v),
                        "positive number list", [0.05, 0.1]),
        "nodes": (lambda v: isinstance(v, int) and v > 64, "integer > 64", 1025),
    },
    "compact_check": {
        "eps_list": (lambda v: _num_list(v) and all(x > 0 for x in v),
                     "positive number list", [0.2, 0.1, 0.05]),
        "nodes": (lambda v: isinstance(v, int) and v > 64, "integer > 64", 2048),
    },
    "limsup_check": {
        "psi_eps_grid": (lambda v: _num_list(v) and all(0 < x < 1 for x in v),
                         "list of numbers in (0,1)", [0.3, 0.2, 0.15]),
        "psi_resolution": (lambda v: isinstance(v, int) and v >= 8,
                           "integer >= 8", 48),
        "eps_factors": (lambda v: _num_list(v) and all(x >= 1.0 for x in v),
                        "number list, each >= 1", [2.0, 1.6, 1.3, 1.0]),
        "tangential_length": (lambda v: _is_num(v) and v > 0,
                              "positive number", 2.0),
        "prism_thickness": (lambda v: _is_num(v) and v > 0,
                            "positive number", 2.5),
    },
}

# Sections every subcommand may use.
COMMON_SECTIONS = ("run", "kernel", "potential", "solver")

SUBCOMMAND_SECTION = {
    "energy": "energy",
    "minimize": "minimize",
    "psi": "psi",
    "gamma-scan": "gamma_scan",
    "slice-check": "slice_check",
    "interp-check": "interp_check",
    "compact-check": "compact_check",
    "limsup-check": "limsup_check",
}


def validate_config(raw: dict, require_section: str | None = None) -> dict:
    """Validate a parsed TOML mapping against the schema.

    Returns the config with defaults filled in; raises ConfigError whose
    message lists every problem with its dotted key path.
    """
    errors = []
    out = {}
    for section in raw:
        if section not in SCHEMA:
            errors.append(f"{section}: unknown section")
    for section, keys in SCHEMA.items():
        given = raw.get(section, {})
        if not isinstance(given, dict):
            errors.append(f"{section}: must be a table")
            continue
        result = {}
        for key in given:
            if key not in keys:
                errors.append(f"{section}.{key}: unknown key")
        for key, (check, desc, default) in keys.items():
            if key in given:
                val = given[key]
                if not check(val):
                    errors.append(f"{section}.{key}: expected {desc}, got {val!r}")
                else:
                    result[key] = val
            elif default is REQUIRED:
                if section in COMMON_SECTIONS or section == require_section:
                    errors.append(f"{section}.{key}: required key missing")
            else:
                result[key] = default
        out[section] = result
    if require_section is not None and require_section not in raw:
        errors.append(f"{require_section}: section required for this subcommand")
    # Cross-key checks.
    kern = raw.get("kernel", {})
    if isinstance(kern, dict) and kern.get("variant") == "band":
        r, R = kern.get("r", 1.0), kern.get("R", 2.0)
        if _is_num(r) and _is_num(R) and not r < R:
            errors.append("kernel.R: band needs r < R")
    if errors:
        raise ConfigError("; ".join(errors))
    return out


def load_config(path, require_section: str | None = None) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:  # message carries line/column
        raise ConfigError(f"{path}: {exc}")
    return validate_config(raw, require_section)


def build_kernel(cfg: dict) -> KernelSpec:
    k = cfg["kernel"]
    if k["variant"] == "band":
        return KernelSpec("band", k["dim"], r=k["r"], R=k["R"], a=k["a"])
    if k["variant"] == "smooth_bump":
        return KernelSpec("smooth_bump", k["dim"], R=k["R"], a=k["a"])
    return KernelSpec("gagliardo", k["dim"], s=k["s"])


def build_potential(cfg: dict) -> Potential:
    p = cfg["potential"]
    if p["variant"] == "quartic":
        return Potential("quartic", scale=p["scale"])
    return Potential("custom_piecewise", knots=tuple(p["knots"]),
                     knot_values=tuple(p["values"]))


def build_solver_config(cfg: dict, seed: int | None = None) -> SolverConfig:
    s = cfg["solver"]
    return SolverConfig(
        max_iters=s["max_iters"],
        grad_tol=s["grad_tol"],
        step_rule=s["step_rule"],
        fixed_step=s["fixed_step"],
        clamp_range=(s["clamp"] if s["clamp"] > 0 else None),
        seed=cfg["run"]["seed"] if seed is None else seed,
    )
