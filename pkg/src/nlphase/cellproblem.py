"""Anisotropic surface density via the periodic-strip cell problem.

The surface density of a flat interface with unit normal nu is

    surface_density(nu) = inf over 0 < eps < 1 and admissible profiles v
        of (1/eps) int_{unit cell} W(v)
           + eps int_{strip} int_{R^n} J_eps(x-y) |grad v(x) - grad v(y)|^2,

where admissible profiles are +-1 beyond a slab of normal halfwidth 1/2
and periodic with period 1 in the tangential directions.

In 1d the strip is an interval and the main grid machinery applies.  In
2d, tangential periodicity is only lattice-exact for rational normals
nu ~ (p, q): on a square lattice with spacing 1/(M sqrt(p^2+q^2)) the
unit tangential translation equals the integer lattice vector
(-qM, pM), so the strip quotients to a (qM x NJ) index array with a
sheared wrap in the first index (wrapping adds pM to the second index).
Gradients, stencil sums, and the energy all act on that quotient; the
normal direction is clipped far beyond the pinning slab where the
profile is exactly constant, making the zero-gradient extension exact.
Irrational normals must be approximated by rational neighbors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import signal

from .energy import DiscreteEnergyModel, EnergyReport
from .errors import NumericalError, ParameterError
from .fields import Field, default_boundary, line_grid
from .kernels import DiscreteStencil, KernelSpec, discrete_stencil
from .potentials import Potential, potential_deriv, potential_eval
from .solver import ConstraintSpec, SolverConfig, minimize_problem

__all__ = [
    "PsiResult",
    "ShearCell",
    "make_cell",
    "cell_energy",
    "solve_profile",
    "surface_density",
    "anisotropy_table",
    "normalize_direction",
]

DEFAULT_STRIP_HALFWIDTH = 2.0


def normalize_direction(nu):
    """Reduce a direction to coprime integers (p, q).

    Accepts an integer pair or a unit vector lying along a rational
    direction with small denominator.  (1, 0) is mapped to (0, 1): the
    square lattice is symmetric under coordinate swap, so both axis
    problems produce identical discrete energies.
    """
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    if nu.size == 1:
        return (int(math.copysign(1, nu[0])),)
    best = None
    for q in range(0, 9):
        for p in range(-8, 9):
            if p == 0 and q == 0:
                continue
            vec = np.array([p, q], dtype=float)
            vec /= np.linalg.norm(vec)
            if np.allclose(vec, nu / np.linalg.norm(nu), atol=1e-9):
                cand = (p, q)
                if best is None or abs(p) + abs(q) < abs(best[0]) + abs(best[1]):
                    best = cand
    if best is None:
        raise ParameterError(
            f"direction {tuple(nu)} is not a small rational direction; "
            "approximate it by a rational neighbor first"
        )
    p, q = best
    g = math.gcd(abs(p), abs(q))
    p, q = p // g, q // g
    if q < 0 or (q == 0 and p < 0):
        p, q = -p, -q
    if q == 0:  # (1, 0) -> (0, 1) by lattice symmetry
        p, q = 0, 1
    return p, q


class ShearCell:
    """Tangentially periodic strip for normal (p, q)/sqrt(p^2+q^2) on a
    square lattice, stored as a quotient index array with sheared wrap."""

    def __init__(
        self,
        p: int,
        q: int,
        resolution: int,
        halfwidth: float = DEFAULT_STRIP_HALFWIDTH,
        reach_cells: int = 0,
    ):
        if q < 1 or math.gcd(abs(p), q) != 1:
            raise ParameterError("need coprime (p, q) with q >= 1")
        self.p, self.q = int(p), int(q)
        c = self.p * self.p + self.q * self.q
        self.c = c
        # Lattice spacing 1/(M sqrt(c)) makes the unit tangential period
        # the lattice vector (-qM, pM).
        self.M = max(2, round(resolution / math.sqrt(c)))
        self.h = 1.0 / (self.M * math.sqrt(c))
        self.halfwidth = halfwidth
        self.ni = self.q * self.M
        self.wrap_jump = self.p * self.M

        pad = reach_cells + 3
        Mc = self.M * c
        j_lo = math.floor((-halfwidth * Mc - self.p * (self.ni - 1)) / self.q) - pad
        j_hi = math.ceil(halfwidth * Mc / self.q) + pad
        self.j_lo = j_lo
        self.nj = j_hi - j_lo + 1
        self.shape = (self.ni, self.nj)

        ii = np.arange(self.ni)[:, None]
        jj = (self.j_lo + np.arange(self.nj))[None, :]
        # Signed distance to the interface plane along the normal.
        self.r = (self.p * ii + self.q * jj) / float(Mc)
        self.cell_volume = self.h * self.h
        self.q_mask = np.abs(self.r) < 0.5
        self.pin_mask = ~self.q_mask
        self.pin_values = np.where(self.r >= 0.5, 1.0, -1.0)
        self.pin_values[self.q_mask] = 0.0

    # -- lattice shifts -----------------------------------------------------

    def shift(self, arr: np.ndarray, di: int, dj: int, fill: str = "zero"):
        """arr at (i + di, j + dj) under the sheared wrap; beyond the
        normal window either zero (gradients) or edge values (pinned)."""
        ni = self.ni
        if abs(di) >= ni:
            raise ParameterError("shift beyond one tangential period")
        out = np.empty_like(arr)
        if di >= 0:
            main = ni - di
            self._take_j(out[:main], arr[di:], dj, fill)
            if di:
                self._take_j(out[main:], arr[:di], dj + self.wrap_jump, fill)
        else:
            k = -di
            self._take_j(out[k:], arr[: ni - k], dj, fill)
            self._take_j(out[:k], arr[ni - k:], dj - self.wrap_jump, fill)
        return out

    def _take_j(self, dst, src, dj, fill):
        nj = self.nj
        if fill == "edge":
            idx = np.clip(np.arange(nj) + dj, 0, nj - 1)
            dst[:] = src[:, idx]
            return
        dst[:] = 0.0
        if dj >= 0:
            if dj < nj:
                dst[:, : nj - dj] = src[:, dj:]
        else:
            if -dj < nj:
                dst[:, -dj:] = src[:, : nj + dj]

    # -- differential operators ----------------------------------------------

    def gradient(self, v: np.ndarray) -> np.ndarray:
        g = np.empty((2,) + self.shape)
        g[0] = (self.shift(v, 1, 0, "edge") - self.shift(v, -1, 0, "edge")) / (
            2.0 * self.h
        )
        g[1] = (self.shift(v, 0, 1, "edge") - self.shift(v, 0, -1, "edge")) / (
            2.0 * self.h
        )
        return g

    def gradient_adjoint(self, q: np.ndarray) -> np.ndarray:
        # Sheared i-shifts are permutations of the quotient, so central
        # differences are skew-adjoint there; the j ends sit deep in the
        # pinned zone where the adjoint defect never reaches free nodes.
        out = -(self.shift(q[0], 1, 0, "edge") - self.shift(q[0], -1, 0, "edge"))
        out -= self.shift(q[1], 0, 1, "edge") - self.shift(q[1], 0, -1, "edge")
        return out / (2.0 * self.h)

    # -- stencil correlation ---------------------------------------------------

    def attach_stencil(self, stencil: DiscreteStencil) -> None:
        hw = stencil.halfwidths
        if hw[0] >= self.ni:
            raise ParameterError(
                "stencil reach exceeds one tangential period; refine the grid"
            )
        self.stencil = stencil
        self.total_mass = stencil.weight_sum
        ki, kj = hw
        self._ki = ki
        kern = np.zeros((2 * ki + 1, 2 * kj + 1))
        for d, w in zip(stencil.offsets, stencil.weights):
            kern[d[0] + ki, d[1] + kj] += w
        self._kern = kern
        self._inside_mass = None

    def conv(self, arr: np.ndarray) -> np.ndarray:
        """sum_d w_d arr(x + d) with zero fill beyond the normal window,
        via plain correlation on the unrolled (sheared copies) strip."""
        ki = self._ki
        ext = np.empty((self.ni + 2 * ki, self.nj))
        ext[ki : ki + self.ni] = arr
        self._take_j(ext[ki + self.ni :], arr[:ki], self.wrap_jump, "zero")
        self._take_j(ext[:ki], arr[self.ni - ki :], -self.wrap_jump, "zero")
        # Even kernel: correlation equals convolution.
        out = signal.fftconvolve(ext, self._kern, mode="same")
        return out[ki : ki + self.ni]

    def inside_mass(self) -> np.ndarray:
        if self._inside_mass is None:
            self._inside_mass = self.conv(np.ones(self.shape))
        return self._inside_mass

    # -- energy ----------------------------------------------------------------

    def report(self, v: np.ndarray, potential: Potential, eps: float) -> EnergyReport:
        w_term = float(
            np.sum(potential_eval(potential, v)[self.q_mask])
        ) * self.cell_volume / eps
        g = self.gradient(v)
        g2 = g[0] * g[0] + g[1] * g[1]
        t = 2.0 * self.total_mass * float(g2.sum())
        t -= 2.0 * float(np.sum(g[0] * self.conv(g[0])))
        t -= 2.0 * float(np.sum(g[1] * self.conv(g[1])))
        return EnergyReport(eps, w_term, eps * self.cell_volume * t, "cell")

    def energy(self, v: np.ndarray, potential: Potential, eps: float) -> float:
        return self.report(v, potential, eps).total

    def energy_gradient(self, v: np.ndarray, potential: Potential, eps: float):
        g = self.gradient(v)
        q = np.empty_like(g)
        q[0] = 4.0 * (self.total_mass * g[0] - self.conv(g[0]))
        q[1] = 4.0 * (self.total_mass * g[1] - self.conv(g[1]))
        out = eps * self.cell_volume * self.gradient_adjoint(q)
        wgrad = potential_deriv(potential, v) * self.cell_volume / eps
        out += np.where(self.q_mask, wgrad, 0.0)
        return out

    def initial_profile(self, eps: float) -> np.ndarray:
        v = np.tanh(self.r / eps)
        v[self.pin_mask] = self.pin_values[self.pin_mask]
        return v

    def interpolate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Bilinear sample of the stored profile at physical points;
        tangentially periodic.  Axis-aligned cells only (p = 0)."""
        if self.p != 0:
            raise ParameterError("interpolation implemented for axis cells only")
        if not hasattr(self, "profile_values"):
            raise ParameterError("no profile stored on this cell yet")
        vals = self.profile_values
        xi = np.mod(x / self.h, self.ni)
        base_i = np.floor(xi).astype(int) % self.ni
        wi = xi - np.floor(xi)
        i1 = (base_i + 1) % self.ni
        yj = y / self.h - self.j_lo
        yj = np.clip(yj, 0.0, self.nj - 1.0)
        base_j = np.clip(np.floor(yj).astype(int), 0, self.nj - 2)
        wj = yj - base_j
        j1 = base_j + 1
        return (
            (1 - wi) * (1 - wj) * vals[base_i, base_j]
            + (1 - wi) * wj * vals[base_i, j1]
            + wi * (1 - wj) * vals[i1, base_j]
            + wi * wj * vals[i1, j1]
        )


@dataclass
class LineCell:
    """1d strip: interval [-halfwidth, halfwidth] with pinning at 1/2."""

    grid: object
    model: DiscreteEnergyModel
    pin_mask: np.ndarray
    pin_values: np.ndarray
    r: np.ndarray
    q_mask: np.ndarray
    stencil: DiscreteStencil

    def initial_profile(self, eps: float) -> np.ndarray:
        v = np.tanh(self.r / eps)
        v[self.pin_mask] = self.pin_values[self.pin_mask]
        return v


def make_cell(
    nu,
    epsilon: float,
    potential: Potential,
    kspec: KernelSpec,
    resolution: int,
    halfwidth: float = DEFAULT_STRIP_HALFWIDTH,
    mass_tol: float = 1e-6,
):
    """Build the discrete cell for a direction: LineCell in 1d, ShearCell
    in 2d.  resolution is the target node count per unit length."""
    direction = normalize_direction(nu)
    if len(direction) == 1:
        n_nodes = int(round(2 * halfwidth * resolution)) + 1
        grid = line_grid(-halfwidth, halfwidth, n_nodes)
        h = grid.spacing[0]
        st = discrete_stencil(kspec, epsilon, (h,), mass_tol,
                              max_radius=halfwidth)
        r = grid.axis_coords(0) * float(direction[0])
        q_mask = np.abs(r) < 0.5
        pin_mask = ~q_mask
        pin_values = np.where(r >= 0.5, 1.0, -1.0)
        model = DiscreteEnergyModel(
            grid, potential, st, epsilon, w_region=q_mask.astype(float),
            j_mode="strip",
        )
        return LineCell(grid, model, pin_mask, np.where(pin_mask, pin_values, 0.0),
                        r, q_mask, st)

    p, q = direction
    if kspec.dim != 2:
        raise ParameterError("2d direction needs a 2d kernel")
    # Two-stage sizing: reach depends on h which depends on resolution only.
    probe = ShearCell(p, q, resolution, halfwidth, reach_cells=0)
    st = discrete_stencil(kspec, epsilon, (probe.h, probe.h), mass_tol,
                          max_radius=halfwidth)
    reach = max(st.halfwidths)
    cell = ShearCell(p, q, resolution, halfwidth, reach_cells=reach)
    cell.attach_stencil(st)
    return cell


def cell_energy(cell, values: np.ndarray, potential: Potential, epsilon: float,
                check_admissible: bool = True) -> float:
    """Cell energy of a profile; rejects profiles violating the +-1
    far-field admissibility."""
    if check_admissible:
        want = cell.pin_values[cell.pin_mask]
        got = np.asarray(values)[cell.pin_mask]
        if not np.allclose(got, want, atol=1e-9):
            raise ParameterError("profile is not +-1 beyond the pinning slab")
    if isinstance(cell, ShearCell):
        return cell.energy(values, potential, epsilon)
    return cell.model.value(values)


def solve_profile(
    nu,
    epsilon: float,
    potential: Potential,
    kspec: KernelSpec,
    resolution: int,
    cfg: SolverConfig | None = None,
    halfwidth: float = DEFAULT_STRIP_HALFWIDTH,
    x0: np.ndarray | None = None,
):
    """Minimize the cell energy at one epsilon.

    Returns (cell, values, energy, converged).  The minimizer satisfies
    the pinning constraints node-exactly.
    """
    if not (0.0 < epsilon < 1.0):
        raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon}")
    cfg = cfg or SolverConfig()
    cell = make_cell(nu, epsilon, potential, kspec, resolution, halfwidth)
    if x0 is None:
        x0 = cell.initial_profile(epsilon)
    if isinstance(cell, ShearCell):
        value_fn = lambda v: cell.energy(v, potential, epsilon)
        grad_fn = lambda v: cell.energy_gradient(v, potential, epsilon)
    else:
        value_fn = cell.model.value
        grad_fn = cell.model.gradient
    x, trace, converged, _ = minimize_problem(
        x0, value_fn, grad_fn, cfg, pin=(cell.pin_mask, cell.pin_values),
        clamp=cfg.clamp_range,
    )
    return cell, x, float(value_fn(x)), converged


@dataclass
class PsiResult:
    """Record of a direction's epsilon sweep and the resulting density."""

    nu: tuple
    eps_grid: list
    energies: list
    converged: list
    psi: float
    profile: np.ndarray = dc_field(repr=False)
    profile_cell: object = dc_field(repr=False)
    strip_halfwidth: float = DEFAULT_STRIP_HALFWIDTH
    tangential_period: float = 1.0
    best_epsilon: float = 0.0
    resolution: int = 0


def surface_density(
    nu,
    potential: Potential,
    kspec: KernelSpec,
    eps_grid,
    resolution: int,
    cfg: SolverConfig | None = None,
    halfwidth: float = DEFAULT_STRIP_HALFWIDTH,
    refine: bool = False,
) -> PsiResult:
    """Sweep epsilon, minimize per value, and take the minimum.

    The sweep is an upper estimate of the infimum over (0, 1); with
    refine=True four extra epsilons are inserted around the argmin.
    """
    eps_grid = sorted(float(e) for e in eps_grid)
    if not eps_grid or not all(0.0 < e < 1.0 for e in eps_grid):
        raise ParameterError("eps grid must lie inside (0, 1)")
    rows = []
    for e in eps_grid:
        cell, x, val, conv = solve_profile(
            nu, e, potential, kspec, resolution, cfg, halfwidth
        )
        rows.append((e, val, conv, x, cell))
    if refine and len(eps_grid) > 1:
        vals = [r[1] for r in rows]
        k = int(np.argmin(vals))
        lo = rows[max(k - 1, 0)][0]
        hi = rows[min(k + 1, len(rows) - 1)][0]
        extra = np.exp(np.linspace(math.log(lo), math.log(hi), 6))[1:-1]
        for e in extra:
            if any(math.isclose(e, r[0], rel_tol=1e-9) for r in rows):
                continue
            cell, x, val, conv = solve_profile(
                nu, float(e), potential, kspec, resolution, cfg, halfwidth
            )
            rows.append((float(e), val, conv, x, cell))
        rows.sort(key=lambda r: r[0])
    if not any(r[2] for r in rows):
        raise NumericalError("no epsilon in the sweep converged")
    k = int(np.argmin([r[1] for r in rows]))
    best = rows[k]
    if isinstance(best[4], ShearCell):
        best[4].profile_values = best[3]
    return PsiResult(
        nu=tuple(np.atleast_1d(nu).tolist()),
        eps_grid=[r[0] for r in rows],
        energies=[r[1] for r in rows],
        converged=[r[2] for r in rows],
        psi=best[1],
        profile=best[3],
        profile_cell=best[4],
        strip_halfwidth=halfwidth,
        best_epsilon=best[0],
        resolution=resolution,
    )


def anisotropy_table(
    directions,
    potential: Potential,
    kspec: KernelSpec,
    eps_grid,
    resolution: int,
    cfg: SolverConfig | None = None,
    refine: bool = False,
):
    """surface_density for each direction; list of PsiResult."""
    return [
        surface_density(nu, potential, kspec, eps_grid, resolution, cfg,
                        refine=refine)
        for nu in directions
    ]
