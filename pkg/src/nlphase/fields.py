"""Scalar fields on uniform rectangular grids.

Provides the grid/field value types, discrete gradients with an exact
adjoint, line slicing, band-transition counting, mollified step
interfaces, boundary blending, and CSV dump/load.  All operations are
pure; fields are cheap value objects wrapping an ndarray.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import ParameterError

__all__ = [
    "Grid",
    "Field",
    "InterfaceSpec",
    "SliceSamples",
    "gradient",
    "gradient_adjoint",
    "extract_slice",
    "count_transitions",
    "mollified_interface",
    "mollifier_profile",
    "smoothstep",
    "blend",
    "clamp_unit",
    "save_field_csv",
    "load_field_csv",
]


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular grid, periodic or fixed per axis.

    Periodic axes sample [lo, hi) at spacing extent/nodes; fixed axes
    include both endpoints at spacing extent/(nodes-1).
    """

    shape: tuple
    lo: tuple
    hi: tuple
    periodic: tuple

    def __post_init__(self):
        n = len(self.shape)
        if n not in (1, 2):
            raise ParameterError("only 1d and 2d grids are supported")
        if not (len(self.lo) == len(self.hi) == len(self.periodic) == n):
            raise ParameterError("grid descriptors must agree in length")
        for ax in range(n):
            if self.hi[ax] <= self.lo[ax]:
                raise ParameterError(f"axis {ax}: extent must be positive")
            if self.shape[ax] < (2 if self.periodic[ax] else 3):
                raise ParameterError(f"axis {ax}: too few nodes")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> tuple:
        out = []
        for ax in range(self.dim):
            extent = self.hi[ax] - self.lo[ax]
            div = self.shape[ax] if self.periodic[ax] else self.shape[ax] - 1
            out.append(extent / div)
        return tuple(out)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_coords(self, ax: int) -> np.ndarray:
        h = self.spacing[ax]
        return self.lo[ax] + h * np.arange(self.shape[ax])

    def coords(self):
        """Meshgrid of node coordinates, one array per axis."""
        axes = [self.axis_coords(ax) for ax in range(self.dim)]
        if self.dim == 1:
            return (axes[0],)
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def quad_weights(self) -> np.ndarray:
        """Integration weights: cell volume, halved at fixed-axis ends."""
        w = np.ones(self.shape)
        for ax in range(self.dim):
            if not self.periodic[ax]:
                sl = [slice(None)] * self.dim
                sl[ax] = 0
                w[tuple(sl)] *= 0.5
                sl[ax] = -1
                w[tuple(sl)] *= 0.5
        return w * self.cell_volume


def line_grid(lo: float, hi: float, nodes: int, periodic: bool = False) -> Grid:
    return Grid((nodes,), (lo,), (hi,), (periodic,))


def box_grid(lo, hi, nodes, periodic) -> Grid:
    return Grid(tuple(nodes), tuple(lo), tuple(hi), tuple(periodic))


@dataclass
class Field:
    """Grid plus node values; boundary_values records the constants the
    field saturates to beyond each fixed axis (None on all-periodic
    grids, required otherwise)."""

    grid: Grid
    values: np.ndarray
    boundary_values: dict | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ParameterError(
                f"values shape {self.values.shape} != grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("field values must be finite")
        fixed_axes = {ax for ax in range(self.grid.dim) if not self.grid.periodic[ax]}
        if fixed_axes and self.boundary_values is None:
            raise ParameterError("boundary_values required when an axis is fixed")
        if not fixed_axes and self.boundary_values:
            raise ParameterError("boundary_values given but all axes are periodic")
        if self.boundary_values is not None and set(self.boundary_values) != fixed_axes:
            raise ParameterError("boundary_values keys must be the fixed axes")

    def copy_with(self, values: np.ndarray) -> "Field":
        return Field(self.grid, np.array(values, dtype=float), self.boundary_values)


def default_boundary(grid: Grid, lo_val: float = -1.0, hi_val: float = 1.0):
    """Saturation pair for each fixed axis, None if fully periodic."""
    fixed = [ax for ax in range(grid.dim) if not grid.periodic[ax]]
    if not fixed:
        return None
    return {ax: (lo_val, hi_val) for ax in fixed}


@dataclass(frozen=True)
class InterfaceSpec:
    """Flat interface: unit normal, signed offset, mollification width."""

    normal: tuple
    offset: float = 0.0
    sigma: float = 0.1

    def __post_init__(self):
        nu = np.asarray(self.normal, dtype=float)
        if not math.isclose(float(np.linalg.norm(nu)), 1.0, rel_tol=1e-12):
            raise ParameterError("interface normal must be a unit vector")
        if self.sigma <= 0.0:
            raise ParameterError("mollification width must be positive")


# ---------------------------------------------------------------------------
# Discrete gradient and its exact adjoint
# ---------------------------------------------------------------------------


def _diff_axis(v: np.ndarray, ax: int, h: float, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(v, -1, axis=ax) - np.roll(v, 1, axis=ax)) / (2.0 * h)
    out = np.empty_like(v)
    mid = [slice(None)] * v.ndim

    def sl(i):
        s = list(mid)
        s[ax] = i
        return tuple(s)

    out[sl(slice(1, -1))] = (v[sl(slice(2, None))] - v[sl(slice(0, -2))]) / (2.0 * h)
    # Grouped as differences so constants map to exact zero.
    out[sl(0)] = (4.0 * (v[sl(1)] - v[sl(0)]) - (v[sl(2)] - v[sl(0)])) / (2.0 * h)
    out[sl(-1)] = (4.0 * (v[sl(-1)] - v[sl(-2)]) - (v[sl(-1)] - v[sl(-3)])) / (
        2.0 * h
    )
    return out


def _diff_axis_adjoint(q: np.ndarray, ax: int, h: float, periodic: bool) -> np.ndarray:
    if periodic:  # central difference is skew-adjoint
        return -(np.roll(q, -1, axis=ax) - np.roll(q, 1, axis=ax)) / (2.0 * h)
    out = np.zeros_like(q)

    def sl(i):
        s = [slice(None)] * q.ndim
        s[ax] = i
        return tuple(s)

    # Transpose of: interior central rows plus one-sided end rows.
    out[sl(slice(0, -2))] -= q[sl(slice(1, -1))]
    out[sl(slice(2, None))] += q[sl(slice(1, -1))]
    out[sl(0)] += -3.0 * q[sl(0)]
    out[sl(1)] += 4.0 * q[sl(0)]
    out[sl(2)] += -1.0 * q[sl(0)]
    out[sl(-1)] += 3.0 * q[sl(-1)]
    out[sl(-2)] += -4.0 * q[sl(-1)]
    out[sl(-3)] += 1.0 * q[sl(-1)]
    return out / (2.0 * h)


def gradient(f: Field) -> np.ndarray:
    """Discrete gradient, shape (dim, *grid.shape).

    Central differences inside and on periodic axes; second-order
    one-sided stencils at fixed-axis boundaries.
    """
    g = np.empty((f.grid.dim,) + f.grid.shape)
    for ax in range(f.grid.dim):
        g[ax] = _diff_axis(f.values, ax, f.grid.spacing[ax], f.grid.periodic[ax])
    return g


def gradient_adjoint(grid: Grid, q: np.ndarray) -> np.ndarray:
    """Exact transpose of gradient: <grad u, q> = <u, gradient_adjoint q>
    with plain (unweighted) node inner products."""
    if q.shape != (grid.dim,) + grid.shape:
        raise ParameterError("adjoint input must have shape (dim, *grid.shape)")
    out = np.zeros(grid.shape)
    for ax in range(grid.dim):
        out += _diff_axis_adjoint(q[ax], ax, grid.spacing[ax], grid.periodic[ax])
    return out


# ---------------------------------------------------------------------------
# Slicing and transition counting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SliceSamples:
    """1d samples of a field along a line z + t*xi."""

    t0: float
    dt: float
    values: np.ndarray
    exact: bool

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)


def _bilinear(f: Field, pts: np.ndarray) -> np.ndarray:
    """Bilinear interpolation at points (k, dim), clamped on fixed axes,
    wrapped on periodic axes."""
    g = f.grid
    vals = f.values
    idx = []
    frac = []
    for ax in range(g.dim):
        h = g.spacing[ax]
        x = (pts[:, ax] - g.lo[ax]) / h
        if g.periodic[ax]:
            x = np.mod(x, g.shape[ax])
            base = np.floor(x)
            i0 = base.astype(int) % g.shape[ax]
            i1 = (i0 + 1) % g.shape[ax]
        else:
            x = np.clip(x, 0.0, g.shape[ax] - 1.0)
            base = np.clip(np.floor(x), 0, g.shape[ax] - 2)
            i0 = base.astype(int)
            i1 = i0 + 1
        idx.append((i0, i1))
        frac.append(x - base)
    if g.dim == 1:
        (i0, i1), w = idx[0], frac[0]
        return (1 - w) * vals[i0] + w * vals[i1]
    (i0, i1), (j0, j1) = idx
    wx, wy = frac
    return (
        (1 - wx) * (1 - wy) * vals[i0, j0]
        + (1 - wx) * wy * vals[i0, j1]
        + wx * (1 - wy) * vals[i1, j0]
        + wx * wy * vals[i1, j1]
    )


def extract_slice(f: Field, xi, z) -> SliceSamples:
    """Sample the field along the line {z + t xi}.

    Axis-aligned directions through grid nodes are exact; the 45-degree
    diagonal on an equal-spacing 2d grid is exact as well; anything else
    falls back to bilinear interpolation and is flagged approximate.
    Returns an empty sequence when the line misses the domain.
    """
    g = f.grid
    xi = np.asarray(xi, dtype=float)
    xi = xi / np.linalg.norm(xi)
    z = np.atleast_1d(np.asarray(z, dtype=float))

    if g.dim == 1:
        sgn = float(np.sign(xi[0]) or 1.0)
        vals = f.values if sgn > 0 else f.values[::-1]
        x0 = g.axis_coords(0)[0 if sgn > 0 else -1]
        return SliceSamples(t0=sgn * (x0 - z[0]), dt=g.spacing[0], values=vals.copy(),
                            exact=True)

    # Parameter range where the line stays inside the closed box.
    t_lo, t_hi = -np.inf, np.inf
    for ax in range(2):
        lo_ax = g.lo[ax]
        hi_ax = g.hi[ax] if not g.periodic[ax] else g.lo[ax] + (
            g.hi[ax] - g.lo[ax]
        ) * (1.0 - 1.0 / g.shape[ax])
        if abs(xi[ax]) < 1e-15:
            if not (lo_ax - 1e-12 <= z[ax] <= hi_ax + 1e-12):
                return SliceSamples(0.0, 1.0, np.empty(0), True)
        else:
            a = (lo_ax - z[ax]) / xi[ax]
            b = (hi_ax - z[ax]) / xi[ax]
            t_lo = max(t_lo, min(a, b))
            t_hi = min(t_hi, max(a, b))
    if not (t_hi > t_lo):
        return SliceSamples(0.0, 1.0, np.empty(0), True)

    hx, hy = g.spacing
    aligned = abs(abs(xi[0]) - 1.0) < 1e-12 or abs(abs(xi[1]) - 1.0) < 1e-12
    diagonal = (
        abs(hx - hy) < 1e-12 * max(hx, hy)
        and abs(abs(xi[0]) - abs(xi[1])) < 1e-12
    )
    if aligned:
        dt = hx if abs(xi[0]) > 0.5 else hy
    elif diagonal:
        dt = hx * math.sqrt(2.0)
    else:
        dt = min(hx, hy)
    k = int(math.floor((t_hi - t_lo) / dt)) + 1
    ts = t_lo + dt * np.arange(k)
    pts = z[None, :] + ts[:, None] * xi[None, :]
    on_lattice = True
    for ax in range(2):
        rel = (pts[:, ax] - g.lo[ax]) / g.spacing[ax]
        if not np.allclose(rel, np.round(rel), atol=1e-9):
            on_lattice = False
    vals = _bilinear(f, pts)
    return SliceSamples(t0=float(t_lo), dt=float(dt), values=vals,
                        exact=(aligned or diagonal) and on_lattice)


def count_transitions(samples) -> int:
    """Count full crossings of the band (-1/2, 1/2).

    A transition is a maximal parameter interval on which the
    piecewise-linear interpolant runs from one of the levels -+1/2 to
    the other while staying strictly inside the band in between.  On the
    interpolant this equals the number of sign changes in the sequence
    of band exits, so it reduces to compressing the per-sample region
    labels (-1 below, +1 above, 0 inside) and counting flips.
    """
    v = np.asarray(samples, dtype=float)
    if v.ndim != 1:
        raise ParameterError("count_transitions expects a 1d sample sequence")
    region = np.zeros(v.shape, dtype=int)
    region[v >= 0.5] = 1
    region[v <= -0.5] = -1
    nz = region[region != 0]
    if nz.size < 2:
        return 0
    return int(np.count_nonzero(np.diff(nz) != 0))


# ---------------------------------------------------------------------------
# Mollified interfaces and blending
# ---------------------------------------------------------------------------


def _bump_radial(t):
    """Unnormalized C_c^inf bump exp(-1/(1-t^2)) on |t| < 1."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        vals = np.exp(-1.0 / np.maximum(1.0 - t * t, 1e-300))
    return np.where(inside, vals, 0.0)


@lru_cache(maxsize=8)
def _step_profile_table(dim: int):
    """Profile of (sign step * mollifier) along the normal, for unit
    mollifier radius: returns (tau grid on [-1, 1], profile values).

    The mollifier is the standard radial bump normalized to unit mass;
    the step profile is 2 * CDF(marginal) - 1.
    """
    taus = np.linspace(-1.0, 1.0, 4097)
    if dim == 1:
        marg = _bump_radial(taus)
    else:
        marg = np.empty_like(taus)
        for i, r in enumerate(taus):
            m = 1.0 - r * r
            if m <= 0.0:
                marg[i] = 0.0
                continue
            zmax = math.sqrt(m)
            zs = np.linspace(-zmax, zmax, 257)
            marg[i] = np.trapezoid(_bump_radial(np.hypot(r, zs)), zs)
    cdf = integrate.cumulative_trapezoid(marg, taus, initial=0.0)
    cdf /= cdf[-1]  # exact unit mass, so the far field saturates exactly
    return taus, 2.0 * cdf - 1.0


def mollifier_profile(dim: int, sigma: float):
    """Callable tau -> (step * mollifier_sigma)(tau nu), exactly -+1
    beyond |tau| >= sigma."""
    taus, prof = _step_profile_table(dim)

    def f(tau):
        tau = np.asarray(tau, dtype=float)
        out = np.interp(tau / sigma, taus, prof)
        return np.where(tau >= sigma, 1.0, np.where(tau <= -sigma, -1.0, out))

    return f


def mollified_interface(grid: Grid, spec: InterfaceSpec) -> Field:
    """Mollified step across the flat interface x . nu = offset.

    Values are exactly -+1 once |x . nu - offset| >= sigma, so the
    discrete gradient vanishes outside a slab two nodes wider.  Requires
    sigma > 2h so the transition is resolved.
    """
    hmax = max(grid.spacing)
    if spec.sigma <= 2.0 * hmax:
        raise ParameterError(
            f"sigma={spec.sigma} unresolvable: need sigma > 2h = {2*hmax}"
        )
    prof = mollifier_profile(grid.dim, spec.sigma)
    nu = np.asarray(spec.normal, dtype=float)
    xs = grid.coords()
    tau = sum(nu[ax] * xs[ax] for ax in range(grid.dim)) - spec.offset
    vals = prof(tau)
    return Field(grid, vals, default_boundary(grid))


@lru_cache(maxsize=2)
def _smoothstep_table():
    """CDF of the 1d bump: smooth 0 -> 1 transition on [-1, 1]."""
    ts = np.linspace(-1.0, 1.0, 2049)
    pdf = _bump_radial(ts)
    cdf = integrate.cumulative_trapezoid(pdf, ts, initial=0.0)
    cdf /= cdf[-1]
    return ts, cdf


def smoothstep(x) -> np.ndarray:
    """C^inf monotone step: exactly 0 for x <= -1, 1 for x >= 1."""
    ts, cdf = _smoothstep_table()
    x = np.asarray(x, dtype=float)
    return np.where(x <= -1.0, 0.0, np.where(x >= 1.0, 1.0, np.interp(x, ts, cdf)))


def boundary_distance(grid: Grid) -> np.ndarray:
    """Distance of each node to the nearest fixed-axis boundary face.

    Periodic axes have no boundary; a fully periodic grid has none at
    all and the distance is +inf everywhere.
    """
    d = np.full(grid.shape, np.inf)
    xs = grid.coords()
    for ax in range(grid.dim):
        if grid.periodic[ax]:
            continue
        dist = np.minimum(xs[ax] - grid.lo[ax], grid.hi[ax] - xs[ax])
        d = np.minimum(d, dist)
    return d


def blend(inner: Field, outer: Field, margin: float) -> Field:
    """Interpolate from inner (away from the boundary) to outer (near it).

    result = phi * inner + (1 - phi) * outer with a smooth cutoff phi
    that is exactly 1 where dist(x, boundary) >= 2*margin and exactly 0
    where dist <= margin; |grad phi| = O(1/margin).
    """
    if inner.grid != outer.grid:
        raise ParameterError("blend requires fields on the same grid")
    g = inner.grid
    if all(g.periodic):
        raise ParameterError("blend needs at least one fixed axis")
    min_extent = min(g.hi[ax] - g.lo[ax] for ax in range(g.dim) if not g.periodic[ax])
    if not (0.0 < 2.0 * margin < 0.5 * min_extent):
        raise ParameterError(f"margin {margin} infeasible for extent {min_extent}")
    d = boundary_distance(g)
    phi = smoothstep((d - 1.5 * margin) / (0.5 * margin))
    vals = phi * inner.values + (1.0 - phi) * outer.values
    return Field(g, vals, outer.boundary_values)


def blend_cutoff(grid: Grid, margin: float) -> np.ndarray:
    """The cutoff phi used by blend, for direct inspection."""
    d = boundary_distance(grid)
    return smoothstep((d - 1.5 * margin) / (0.5 * margin))


def clamp_unit(f: Field) -> Field:
    """Node-wise clamp of the values to [-1, 1]."""
    bv = f.boundary_values
    if bv is not None:
        bv = {ax: (max(-1.0, min(1.0, lo)), max(-1.0, min(1.0, hi)))
              for ax, (lo, hi) in bv.items()}
    return Field(f.grid, np.clip(f.values, -1.0, 1.0), bv)


# ---------------------------------------------------------------------------
# CSV dump format: header "x[,y],value", row-major
# ---------------------------------------------------------------------------


def save_field_csv(f: Field, path) -> None:
    xs = f.grid.coords()
    header = ["x", "y"][: f.grid.dim] + ["value"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        flat = [np.ravel(c) for c in xs] + [np.ravel(f.values)]
        for row in zip(*flat):
            w.writerow([f"{v:.17g}" for v in row])


def load_field_csv(path, grid: Grid, boundary_values=None) -> Field:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        vals = np.array([float(row[-1]) for row in rd])
    if vals.size != int(np.prod(grid.shape)):
        raise ParameterError("CSV node count does not match the grid")
    if boundary_values is None:
        boundary_values = default_boundary(grid)
    return Field(grid, vals.reshape(grid.shape), boundary_values)
