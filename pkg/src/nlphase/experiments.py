"""Numerical studies confronting the sharp-interface limit predictions.

Five studies, each deterministic given (config, seed):

  gamma_scan            -- pinned-interface minimization vs the cell
                           prediction surface_density * interface measure
  slicing_check         -- Monte Carlo verification of the line-slicing
                           identity for double integrals
  interpolation_check   -- empirical constant in
                           eps int |grad u|^2 <= C * energy(enlarged set)
  compactness_diagnostic-- transition counts of bounded-energy families
  limsup_check          -- rescaled optimal-profile recovery fields vs
                           the predicted upper bound
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage, special

from .cellproblem import PsiResult, surface_density
from .energy import energy_j, energy_j_strip, energy_total, energy_w
from .errors import NumericalError, ParameterError
from .fields import (
    Field,
    Grid,
    InterfaceSpec,
    box_grid,
    count_transitions,
    default_boundary,
    gradient,
    line_grid,
    mollified_interface,
)
from .kernels import KernelSpec, NondegeneracyConstants, discrete_stencil
from .potentials import Potential
from .solver import ConstraintSpec, MinimizeResult, SolverConfig, minimize, tanh_profile

__all__ = [
    "gamma_scan_1d",
    "multi_transition_run",
    "slicing_check",
    "interpolation_check",
    "compactness_diagnostic",
    "limsup_check",
    "smooth_random_field",
    "random_test_field",
    "transition_constraint",
]


# ---------------------------------------------------------------------------
# Shared field generators
# ---------------------------------------------------------------------------


def smooth_random_field(grid: Grid, rng, amplitude: float = 1.0,
                        corr_cells: float = 4.0, offset: float = 0.0) -> Field:
    """Gaussian-filtered white noise, renormalized to the target amplitude."""
    noise = rng.standard_normal(grid.shape)
    sm = ndimage.gaussian_filter(
        noise, sigma=corr_cells,
        mode=tuple("wrap" if p else "nearest" for p in grid.periodic),
    )
    peak = np.abs(sm).max()
    vals = offset + amplitude * sm / max(peak, 1e-30)
    return Field(grid, vals, default_boundary(grid))


def _interface_field(grid: Grid, rng, span: float) -> Field:
    k = int(rng.integers(1, 5))
    pos = np.sort(rng.uniform(-span, span, size=k))
    width = float(rng.uniform(2.5 * max(grid.spacing), 0.3))
    x = grid.axis_coords(0)
    vals = np.full(grid.shape, (-1.0) ** (k + 1))
    for t in pos:
        vals = vals * np.tanh((x - t) / width)
    return Field(grid, vals, default_boundary(grid))


def random_test_field(grid: Grid, rng, span: float = 1.2) -> Field:
    """Mixture family for the interpolation suite: smoothed noise, sharp
    multi-interface profiles, and noisy interfaces."""
    kind = int(rng.integers(0, 3))
    if kind == 0:
        return smooth_random_field(
            grid, rng,
            amplitude=float(rng.uniform(0.3, 2.0)),
            corr_cells=float(rng.uniform(2.0, 20.0)),
            offset=float(rng.uniform(-1.2, 1.2)),
        )
    if kind == 1:
        return _interface_field(grid, rng, span)
    base = _interface_field(grid, rng, span)
    bump = smooth_random_field(grid, rng, amplitude=float(rng.uniform(0.05, 0.4)),
                               corr_cells=float(rng.uniform(2.0, 10.0)))
    return Field(grid, base.values + bump.values, base.boundary_values)


# ---------------------------------------------------------------------------
# gamma scan: pinned interfaces vs the cell prediction
# ---------------------------------------------------------------------------


def transition_constraint(grid: Grid, positions, margin: float) -> ConstraintSpec:
    """Pin the phase pattern with transitions at the given 1d positions:
    nodes farther than margin from every transition are pinned to the
    alternating segment sign (leftmost segment is -1)."""
    x = grid.axis_coords(0)
    positions = np.sort(np.asarray(positions, dtype=float))
    seg = np.searchsorted(positions, x)  # 0 left of all transitions
    signs = np.where(seg % 2 == 0, -1.0, 1.0)
    dist = np.min(np.abs(x[:, None] - positions[None, :]), axis=1)
    mask = dist >= margin
    return ConstraintSpec.pinned(mask, np.where(mask, signs, 0.0))


def multi_transition_initial(grid: Grid, positions, epsilon: float) -> Field:
    x = grid.axis_coords(0)
    positions = np.sort(np.asarray(positions, dtype=float))
    vals = np.full(grid.shape, (-1.0) ** (len(positions) + 1))
    for t in positions:
        vals = vals * np.tanh((x - t) / epsilon)
    return Field(grid, vals, default_boundary(grid))


@dataclass
class GammaScanRow:
    epsilon: float
    energy: float
    predicted: float
    ratio: float
    converged: bool
    transitions: int


def multi_transition_run(
    potential: Potential,
    kspec: KernelSpec,
    epsilon: float,
    positions,
    nodes: int = 4096,
    lo: float = -2.0,
    hi: float = 2.0,
    margin: float | None = None,
    cfg: SolverConfig | None = None,
    mass_tol: float = 1e-6,
) -> MinimizeResult:
    """Minimize on [lo, hi] with the transition pattern pinned."""
    grid = line_grid(lo, hi, nodes)
    st = discrete_stencil(kspec, epsilon, grid.spacing, mass_tol,
                          max_radius=hi - lo)
    if margin is None:
        # Pin only what fixes the topology: pads at 45% of the smallest
        # gap leave the transition tails as free as the pattern allows.
        pts = np.sort(np.asarray(positions, dtype=float))
        gaps = np.diff(np.concatenate([[lo], pts, [hi]]))
        margin = 0.45 * float(gaps.min())
        if margin < 5.0 * max(grid.spacing):
            raise ParameterError("transitions too close for this grid")
    cons = transition_constraint(grid, positions, margin)
    f0 = multi_transition_initial(grid, positions, epsilon)
    return minimize(f0, potential, st, epsilon, cons, cfg or SolverConfig())


def gamma_scan_1d(
    potential: Potential,
    kspec: KernelSpec,
    eps_list,
    psi_value: float,
    nodes: int = 4096,
    positions=(0.0,),
    lo: float = -2.0,
    hi: float = 2.0,
    cfg: SolverConfig | None = None,
):
    """Minimize with pinned transitions per epsilon, compare against
    len(positions) * psi_value."""
    rows = []
    k = len(tuple(positions))
    predicted = k * psi_value
    for eps in eps_list:
        try:
            res = multi_transition_run(
                potential, kspec, float(eps), positions, nodes, lo, hi, cfg=cfg
            )
            rows.append(GammaScanRow(
                epsilon=float(eps),
                energy=res.report.total,
                predicted=predicted,
                ratio=res.report.total / predicted,
                converged=res.converged,
                transitions=count_transitions(res.field.values),
            ))
        except NumericalError:  # record the failure, do not abort the scan
            rows.append(GammaScanRow(float(eps), math.nan, predicted,
                                     math.nan, False, -1))
    return rows


# ---------------------------------------------------------------------------
# slicing identity, Monte Carlo
# ---------------------------------------------------------------------------


def _chord(shape: str, tau: np.ndarray, cos_t: np.ndarray, sin_t: np.ndarray):
    """Chord [t0, t1] of the line {tau * xi_perp + t * xi} inside E.

    xi = (cos_t, sin_t), xi_perp = (-sin_t, cos_t).  Empty chords return
    t0 > t1.
    """
    if shape == "disk":
        inside = np.abs(tau) < 1.0
        half = np.sqrt(np.clip(1.0 - tau * tau, 0.0, None))
        t0 = np.where(inside, -half, 1.0)
        t1 = np.where(inside, half, 0.0)
        return t0, t1
    if shape == "square":
        zx = -tau * sin_t
        zy = tau * cos_t
        t0 = np.full_like(tau, -np.inf)
        t1 = np.full_like(tau, np.inf)
        for zc, d in ((zx, cos_t), (zy, sin_t)):
            with np.errstate(divide="ignore", invalid="ignore"):
                a = (0.0 - zc) / d
                b = (1.0 - zc) / d
            lo = np.minimum(a, b)
            hi = np.maximum(a, b)
            parallel = np.abs(d) < 1e-14
            miss = parallel & ((zc < 0.0) | (zc > 1.0))
            lo = np.where(parallel, -np.inf, lo)
            hi = np.where(parallel, np.inf, hi)
            hi = np.where(miss, -np.inf, hi)
            t0 = np.maximum(t0, lo)
            t1 = np.minimum(t1, hi)
        return t0, t1
    raise ParameterError(f"unknown shape {shape!r}")


def _pair_quadrature(shape: str, m: int = 48):
    """2d quadrature nodes and weights covering E."""
    x, w = np.polynomial.legendre.leggauss(m)
    if shape == "square":
        xs = 0.5 * (x + 1.0)
        ws = 0.5 * w
        px, py = np.meshgrid(xs, xs, indexing="ij")
        pw = np.outer(ws, ws)
        return np.column_stack([px.ravel(), py.ravel()]), pw.ravel()
    if shape == "disk":
        rr = 0.5 * (x + 1.0)
        wr = 0.5 * w
        th = np.linspace(0.0, 2.0 * math.pi, 2 * m, endpoint=False)
        wt = 2.0 * math.pi / (2 * m)
        R, T = np.meshgrid(rr, th, indexing="ij")
        pts = np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
        wgt = (np.outer(wr * rr, np.full(th.size, wt))).ravel()
        return pts, wgt
    raise ParameterError(f"unknown shape {shape!r}")


def _integrand(name: str):
    if name == "one":
        return lambda x, y: np.ones(np.broadcast_shapes(x.shape, y.shape)[:-1])
    if name == "gauss":
        return lambda x, y: np.exp(-np.sum((x - y) ** 2, axis=-1))
    if name == "separable":
        f = lambda x: np.exp(-np.sum(x * x, axis=-1))
        return lambda x, y: f(x) * f(y)
    raise ParameterError(f"unknown integrand {name!r}")


def _lhs_value(shape: str, gname: str) -> float:
    if gname == "one":
        area = {"square": 1.0, "disk": math.pi}[shape]
        return area * area
    pts, wgt = _pair_quadrature(shape)
    g = _integrand(gname)
    vals = g(pts[:, None, :], pts[None, :, :])
    return float(np.einsum("i,j,ij->", wgt, wgt, vals))


def _inner_one(t0, t1):
    ell = np.clip(t1 - t0, 0.0, None)
    return ell**3 / 3.0


def _inner_gauss_factor(t0, t1):
    # int int over [0,L]^2 of exp(-(t-s)^2)|t-s|  =  L - sqrt(pi)/2 erf(L)
    L = np.clip(t1 - t0, 0.0, None)
    return L - (math.sqrt(math.pi) / 2.0) * special.erf(L)


_GL24 = np.polynomial.legendre.leggauss(24)


def _inner_separable(t0, t1, tau):
    """int int over chord^2 of f(z+s xi) f(z+t xi) |t-s| for the built-in
    gaussian f: reduces through the kink to the smooth 1d integral
    2 int F(t) (t G(t) - H(t)) dt with F = exp(-t^2), G = int_a F,
    H = int_a s F(s) ds, all in closed erf/exp form."""
    a = np.minimum(t0, t1)
    b = np.maximum(t1, t0)
    ell = np.clip(t1 - t0, 0.0, None)
    x, w = _GL24
    t = a[:, None] + 0.5 * (x + 1.0)[None, :] * ell[:, None]
    F = np.exp(-t * t)
    G = (math.sqrt(math.pi) / 2.0) * (special.erf(t) - special.erf(a)[:, None])
    H = 0.5 * (np.exp(-a * a)[:, None] - F)
    integ = F * (t * G - H)
    K = 2.0 * np.sum((0.5 * ell)[:, None] * w[None, :] * integ, axis=1)
    return np.exp(-2.0 * tau * tau) * K


def slicing_check(
    shape: str,
    integrand: str = "one",
    samples: int = 1_000_000,
    seed: int = 0,
    dim: int = 2,
    chunk: int = 200_000,
):
    """Check that the double integral over E x E equals its slicing form
    (half the sphere-and-hyperplane average of weighted line integrals).

    Returns (lhs, rhs, mc_stderr).  In 1d the slicing form collapses and
    is evaluated exactly (stderr 0).
    """
    g = _integrand(integrand)
    if dim == 1:
        # E = (0,1); both directions give the same line integral.
        x, w = np.polynomial.legendre.leggauss(64)
        xs = 0.5 * (x + 1.0)
        ws = 0.5 * w
        X = np.column_stack([xs])
        vals = g(X[:, None, :], X[None, :, :])
        lhs = float(np.einsum("i,j,ij->", ws, ws, vals))
        return lhs, lhs, 0.0

    lhs = _lhs_value(shape, integrand)
    rho = {"square": math.sqrt(2.0), "disk": 1.0}[shape]
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    count = 0
    while count < samples:
        m = min(chunk, samples - count)
        gauss = rng.standard_normal((m, 2))
        norms = np.linalg.norm(gauss, axis=1)
        norms = np.where(norms < 1e-12, 1.0, norms)
        cos_t = gauss[:, 0] / norms
        sin_t = gauss[:, 1] / norms
        tau = rng.uniform(-rho, rho, size=m)
        t0, t1 = _chord(shape, tau, cos_t, sin_t)
        if integrand == "one":
            inner = _inner_one(t0, t1)
        elif integrand == "gauss":
            inner = _inner_gauss_factor(t0, t1)
        else:
            inner = _inner_separable(t0, t1, tau)
        y = 0.5 * (2.0 * math.pi) * (2.0 * rho) * inner
        total += float(y.sum())
        total_sq += float((y * y).sum())
        count += m
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0)
    stderr = math.sqrt(var / count)
    return lhs, mean, stderr


# ---------------------------------------------------------------------------
# interpolation constant calibration
# ---------------------------------------------------------------------------


@dataclass
class InterpolationSuite:
    max_ratio: float
    ratios: np.ndarray
    worst_index: int
    n_skipped: int


def interpolation_check(
    potential: Potential,
    kspec: KernelSpec,
    nondeg: NondegeneracyConstants,
    seed: int,
    n_fields: int = 200,
    eps_choices=(0.05, 0.1),
    nodes: int = 1025,
    inner_halfwidth: float = 1.0,
    method: str = "fft",
) -> InterpolationSuite:
    """Max over random fields of  eps int_A |u'|^2  /  F_eps(u, B)  with
    B the 2*eps*gamma enlargement of A.  The enlarged set must fit in
    the grid; the grid is sized accordingly."""
    gamma = nondeg.gamma
    pad = 2.0 * max(eps_choices) * gamma + 0.1
    grid = line_grid(-inner_halfwidth - pad, inner_halfwidth + pad, nodes)
    x = grid.axis_coords(0)
    rng = np.random.default_rng(seed)
    stencils = {
        e: discrete_stencil(kspec, e, grid.spacing, max_radius=2 * inner_halfwidth)
        for e in eps_choices
    }
    ratios = np.empty(n_fields)
    skipped = 0
    for i in range(n_fields):
        eps = float(eps_choices[int(rng.integers(0, len(eps_choices)))])
        f = random_test_field(grid, rng, span=inner_halfwidth)
        mask_a = (np.abs(x) < inner_halfwidth).astype(float)
        mask_b = (np.abs(x) < inner_halfwidth + 2.0 * eps * gamma).astype(float)
        g = gradient(f)[0]
        num = eps * float(np.sum(mask_a * g * g)) * grid.cell_volume
        den = energy_w(f, potential, eps, mask_b) + energy_j(
            f, stencils[eps], eps, mask_b, mask_b, method
        )
        if den < 1e-12:
            ratios[i] = 0.0
            skipped += 1
            continue
        ratios[i] = num / den
    worst = int(np.argmax(ratios))
    return InterpolationSuite(
        max_ratio=float(ratios[worst]),
        ratios=ratios,
        worst_index=worst,
        n_skipped=skipped,
    )


# ---------------------------------------------------------------------------
# compactness diagnostic
# ---------------------------------------------------------------------------


@dataclass
class CompactnessRow:
    family: str
    pinned_k: int
    epsilon: float
    energy: float
    transitions: int
    converged: bool


def compactness_diagnostic(
    potential: Potential,
    kspec: KernelSpec,
    eps_list=(0.2, 0.1, 0.05),
    k_positions=((0.0,), (-1.0, 0.0, 1.0)),
    nodes: int = 4096,
    seed: int = 0,
    cfg: SolverConfig | None = None,
):
    """Transition counts along bounded-energy minimizing families, plus a
    free minimization of a random bounded-energy start."""
    rows = []
    for positions in k_positions:
        k = len(positions)
        for eps in eps_list:
            res = multi_transition_run(potential, kspec, float(eps), positions,
                                       nodes, cfg=cfg)
            rows.append(CompactnessRow(
                family=f"pinned{k}",
                pinned_k=k,
                epsilon=float(eps),
                energy=res.report.total,
                transitions=count_transitions(res.field.values),
                converged=res.converged,
            ))
    # Free relaxation of a rough bounded-energy field.
    rng = np.random.default_rng(seed)
    grid = line_grid(-2.0, 2.0, nodes)
    eps = float(min(eps_list))
    st = discrete_stencil(kspec, eps, grid.spacing, max_radius=4.0)
    rough = _interface_field(grid, rng, span=1.2)
    before = count_transitions(rough.values)
    res = minimize(rough, potential, st, eps, ConstraintSpec.free(),
                   cfg or SolverConfig())
    rows.append(CompactnessRow(
        family="free-random",
        pinned_k=before,
        epsilon=eps,
        energy=res.report.total,
        transitions=count_transitions(res.field.values),
        converged=res.converged,
    ))
    return rows


# ---------------------------------------------------------------------------
# recovery upper bound
# ---------------------------------------------------------------------------


@dataclass
class LimsupRow:
    epsilon: float
    construction: str
    energy: float
    predicted: float
    ratio: float


def limsup_check(
    potential: Potential,
    kspec: KernelSpec,
    psi: PsiResult,
    eps_factors=(2.0, 1.6, 1.3, 1.0),
    tangential_length: float = 2.0,
    prism_thickness: float = 2.5,
    resolution: int | None = None,
    mass_tol: float = 1e-6,
):
    """Evaluate rescaled cell minimizers tiled over a flat-interface prism.

    The cell profile solved at its sweep-optimal epsilon is rescaled to
    u(eps_best/eps * x) and its energy (well term over the prism plus
    nonlocal term against all of R^n) is compared with
    surface_density * interface length.  The prism must contain the
    stretched saturation slab: prism_thickness > max(eps_factors).  The
    prism grid deliberately differs from the cell grid so the comparison
    crosses two discretizations.  A plain mollified step at the matched
    scale is recorded for comparison.
    """
    cell = psi.profile_cell
    if not hasattr(cell, "interpolate"):
        raise ParameterError("limsup check needs a stored 2d axis cell profile")
    cell.profile_values = psi.profile
    eps_star = psi.best_epsilon
    if prism_thickness <= max(eps_factors) * 1.05:
        raise ParameterError("prism too thin for the largest rescaling factor")
    if resolution is None:
        resolution = int(round(1.25 * psi.resolution))
    nx = max(16, int(round(tangential_length * resolution)))
    ny = max(17, int(round(prism_thickness * resolution)) + 1)
    grid = box_grid(
        (0.0, -0.5 * prism_thickness),
        (tangential_length, 0.5 * prism_thickness),
        (nx, ny),
        (True, False),
    )
    xs, ys = grid.coords()
    predicted = psi.psi * tangential_length
    rows = []
    for fac in eps_factors:
        eps = float(fac) * eps_star
        scale = eps_star / eps
        vals = cell.interpolate(scale * xs, scale * ys)
        f = Field(grid, vals, default_boundary(grid))
        st = discrete_stencil(kspec, eps, grid.spacing, mass_tol,
                              max_radius=prism_thickness)
        en = energy_w(f, potential, eps) + energy_j_strip(f, st, eps)
        rows.append(LimsupRow(eps, "optimal-profile", en, predicted,
                              en / predicted))
    # Cruder recovery: mollified step at the matched scale.
    eps = eps_star
    st = discrete_stencil(kspec, eps, grid.spacing, mass_tol,
                          max_radius=prism_thickness)
    step = mollified_interface(grid, InterfaceSpec((0.0, 1.0), 0.0, max(
        eps, 2.5 * max(grid.spacing))))
    en = energy_w(step, potential, eps) + energy_j_strip(step, st, eps)
    rows.append(LimsupRow(eps, "mollified-step", en, predicted, en / predicted))
    return rows
