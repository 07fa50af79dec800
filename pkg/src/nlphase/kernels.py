"""Interaction kernels and their discrete stencils.

A kernel is an even, nonnegative, radial weight J on R^n (n = 1 or 2).
Supported families:

  band(r, R, a)      -- a on the annulus r <= |x| <= R, zero elsewhere
  smooth_bump(R, a)  -- a * exp(1 - 1/(1 - (|x|/R)^2)) inside |x| < R
  gagliardo(s)       -- |x|^(-n-2s) with 1/2 < s < 1 (fractional seminorm)

The rescaling at interaction range eps is J_eps(x) = eps^(-n) J(x/eps).
Besides pointwise evaluation the module provides the first/second moment
integral M_J = int J(x) (|x| ^ |x|^2) dx, a non-degeneracy certificate
(a window along every direction on which 1/J is integrable), directional
restrictions J(t*xi)|t|^(n-1), and cell-integrated stencil weights used
by the grid energies.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import KernelDegenerateError, KernelError, NumericalError, ParameterError

__all__ = [
    "KernelSpec",
    "band",
    "smooth_bump",
    "gagliardo",
    "NondegeneracyConstants",
    "DiscreteStencil",
    "kernel_eval",
    "kernel_rescale_eval",
    "kernel_moment",
    "nondegeneracy_constants",
    "directional_kernel",
    "directional_kernel_rescaled",
    "discrete_stencil",
    "directional_stencil",
]

# Surface measure of S^(n-1): two points in 1d, unit circle in 2d.
SPHERE_MEASURE = {1: 2.0, 2: 2.0 * math.pi}


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of a radial interaction kernel."""

    variant: str
    dim: int
    r: float = 0.0
    R: float = 0.0
    a: float = 0.0
    s: float = 0.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise KernelError(f"dimension must be 1 or 2, got {self.dim}")
        if self.variant == "band":
            if not (0.0 < self.r < self.R):
                raise KernelError(f"band needs 0 < r < R, got r={self.r}, R={self.R}")
            if self.a <= 0.0:
                raise KernelError(f"band amplitude must be positive, got {self.a}")
        elif self.variant == "smooth_bump":
            if self.R <= 0.0 or self.a <= 0.0:
                raise KernelError("smooth_bump needs R > 0 and a > 0")
        elif self.variant == "gagliardo":
            if not (0.5 < self.s < 1.0):
                raise KernelError(
                    f"gagliardo exponent must lie in (1/2, 1), got s={self.s}"
                )
        else:
            raise KernelError(f"unknown kernel variant {self.variant!r}")

    @property
    def singular(self) -> bool:
        return self.variant == "gagliardo"

    @property
    def support_radius(self) -> float:
        """Radius beyond which the kernel vanishes; inf for gagliardo."""
        if self.variant in ("band", "smooth_bump"):
            return self.R
        return math.inf

    def radial(self, t):
        """Kernel profile as a function of |x|; vectorized over t >= 0."""
        t = np.asarray(t, dtype=float)
        if self.variant == "band":
            return np.where((t >= self.r) & (t <= self.R), self.a, 0.0)
        if self.variant == "smooth_bump":
            u2 = np.clip((t / self.R) ** 2, 0.0, None)
            with np.errstate(divide="ignore", over="ignore"):
                vals = self.a * np.exp(1.0 - 1.0 / np.maximum(1.0 - u2, 1e-300))
            return np.where(u2 < 1.0, vals, 0.0)
        # gagliardo
        if np.any(t == 0.0):
            raise KernelError("gagliardo kernel is singular at x = 0")
        return t ** (-self.dim - 2.0 * self.s)


def band(r: float, R: float, a: float = 1.0, dim: int = 1) -> KernelSpec:
    return KernelSpec("band", dim, r=r, R=R, a=a)


def smooth_bump(R: float, a: float = 1.0, dim: int = 1) -> KernelSpec:
    return KernelSpec("smooth_bump", dim, R=R, a=a)


def gagliardo(s: float, dim: int = 1) -> KernelSpec:
    return KernelSpec("gagliardo", dim, s=s)


def kernel_eval(spec: KernelSpec, x) -> float:
    """J(x) for a point x (scalar in 1d, pair in 2d)."""
    t = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))
    return float(spec.radial(t))


def kernel_rescale_eval(spec: KernelSpec, epsilon: float, x) -> float:
    """J_eps(x) = eps^(-n) J(x/eps)."""
    if epsilon <= 0.0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    return float(spec.radial(np.linalg.norm(xa) / epsilon)) / epsilon**spec.dim


def _moment_integrand(spec: KernelSpec):
    n = spec.dim

    def f(t):
        return spec.radial(t) * min(t, t * t) * t ** (n - 1)

    return f


def kernel_moment(spec: KernelSpec) -> float:
    """First/second moment integral int J(x) (|x| ^ |x|^2) dx over R^n.

    Computed by adaptive radial quadrature split at |x| = 1 where the
    integrand changes branch.  Finite for every supported variant.
    """
    f = _moment_integrand(spec)
    sphere = SPHERE_MEASURE[spec.dim]
    pieces = []
    if spec.support_radius < math.inf:
        R = spec.support_radius
        cuts = sorted({0.0, min(1.0, R), R})
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            if hi > lo:
                pieces.append(integrate.quad(f, lo, hi, limit=200))
    else:
        pieces.append(integrate.quad(f, 0.0, 1.0, limit=200))
        pieces.append(integrate.quad(f, 1.0, np.inf, limit=200))
    total = sum(v for v, _ in pieces)
    err = sum(e for _, e in pieces)
    if not math.isfinite(total) or (total > 0 and err > 1e-8 * total):
        raise NumericalError(
            f"moment quadrature did not converge: value={total}, abserr={err}"
        )
    return sphere * total


def kernel_tail_radius(spec: KernelSpec, tail_fraction: float) -> float:
    """Radius u such that the moment integral beyond u is below
    tail_fraction times the full moment (in unrescaled units)."""
    if spec.support_radius < math.inf:
        return spec.support_radius
    total = kernel_moment(spec)
    target = tail_fraction * total
    f = _moment_integrand(spec)
    sphere = SPHERE_MEASURE[spec.dim]

    def tail(u):
        val, _ = integrate.quad(f, u, np.inf, limit=200)
        return sphere * val

    lo, hi = 1.0, 2.0
    while tail(hi) > target:
        lo, hi = hi, hi * 2.0
        if hi > 1e16:
            raise NumericalError("tail radius search diverged")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if tail(mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


def directional_kernel(spec: KernelSpec, xi, t: float) -> float:
    """Restriction along a direction: J(t*xi) |t|^(n-1)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    tt = abs(float(t))
    return float(spec.radial(tt * np.linalg.norm(xi))) * tt ** (spec.dim - 1)


def directional_kernel_rescaled(spec: KernelSpec, xi, epsilon: float, t: float) -> float:
    """Rescaled directional restriction, equal to J_eps(t*xi)|t|^(n-1)."""
    if epsilon <= 0.0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    return directional_kernel(spec, xi, t / epsilon) / epsilon


@dataclass(frozen=True)
class NondegeneracyConstants:
    """Certificate that 1/J is integrable on a directional window.

    For every unit direction xi the window [alpha(xi), beta(xi)] sits in
    [-gamma, gamma], has width at least delta, and
    int_alpha^beta dt / (J(t xi) |t|^(n-1)) <= c.  The kernels here are
    radial, so the window does not actually depend on the direction.
    """

    gamma: float
    delta: float
    c: float
    alpha_value: float
    beta_value: float

    def alpha(self, xi) -> float:
        return self.alpha_value

    def beta(self, xi) -> float:
        return self.beta_value

    def verify(self, spec: KernelSpec, xi_samples) -> bool:
        """Re-check the window inequalities by independent quadrature."""
        for xi in xi_samples:
            a, b = self.alpha(xi), self.beta(xi)
            chain = -self.gamma <= a <= a + self.delta <= b <= self.gamma
            if not chain:
                return False
            val, _ = integrate.quad(
                lambda t: 1.0 / directional_kernel(spec, xi, t), a, b, limit=200
            )
            if val > self.c * (1.0 + 1e-9):
                return False
        return True


def _window_integral(spec: KernelSpec, a: float, b: float) -> float:
    e = np.zeros(spec.dim)
    e[0] = 1.0
    val, _ = integrate.quad(
        lambda t: 1.0 / directional_kernel(spec, e, t), a, b, limit=200
    )
    return val


def nondegeneracy_constants(
    spec: KernelSpec, xi_samples=None
) -> NondegeneracyConstants:
    """Produce window constants satisfying the non-degeneracy inequalities.

    band kernels use the closed-form window [r, R]; gagliardo uses [1, 2];
    smooth_bump searches for the widest interval on which the directional
    profile stays above half its peak.  The result is re-verified by
    quadrature on the supplied directions (default: 16 on the circle,
    both signs in 1d).
    """
    n = spec.dim
    if spec.variant == "band":
        a0, b0 = spec.r, spec.R
        gamma = spec.R
        delta = spec.R - spec.r
        # Tight closed form of int_r^R dt/(a t^(n-1)).
        if n == 1:
            c = (spec.R - spec.r) / spec.a
        else:
            c = math.log(spec.R / spec.r) / spec.a
        c *= 1.0 + 1e-9
    elif spec.variant == "gagliardo":
        a0, b0 = 1.0, 2.0
        gamma, delta = b0, b0 - a0
        c = _window_integral(spec, a0, b0) * (1.0 + 1e-9)
    else:  # smooth_bump: numeric window search
        ts = np.linspace(spec.R * 1e-3, spec.R * (1.0 - 1e-6), 4001)
        prof = spec.radial(ts) * ts ** (n - 1)
        peak = prof.max()
        if peak <= 0.0:
            raise KernelDegenerateError("kernel profile vanishes identically")
        above = prof >= 0.5 * peak
        idx = np.flatnonzero(above)
        runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
        best = max(runs, key=len)
        lo, hi = ts[best[0]], ts[best[-1]]
        width = hi - lo
        if width <= 0.0:
            raise KernelDegenerateError("no window with the profile bounded below")
        a0, b0 = lo + 0.05 * width, hi - 0.05 * width
        gamma, delta = b0, b0 - a0
        c = _window_integral(spec, a0, b0) * (1.0 + 1e-6)

    consts = NondegeneracyConstants(
        gamma=gamma, delta=delta, c=c, alpha_value=a0, beta_value=b0
    )
    if xi_samples is None:
        if n == 1:
            xi_samples = [np.array([1.0]), np.array([-1.0])]
        else:
            angles = np.linspace(0.0, 2.0 * math.pi, 16, endpoint=False)
            xi_samples = [np.array([math.cos(t), math.sin(t)]) for t in angles]
    if not consts.verify(spec, xi_samples):
        raise KernelDegenerateError(
            f"window [{a0}, {b0}] failed verification for {spec.variant}"
        )
    return consts


# ---------------------------------------------------------------------------
# Discrete stencils: cell-integrated weights of J_eps on a uniform grid.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteStencil:
    """Cell-integrated weights of J_eps over grid cells.

    offsets[k] is an integer lattice vector d (never zero: the energy
    integrand vanishes identically on the diagonal), weights[k] is the
    integral of J_eps over the cell centered at d * spacing.  Weights sum
    to approximately int J (independent of eps at fixed eps/spacing).
    """

    epsilon: float
    spacing: tuple
    offsets: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    truncation_radius: float
    captured_mass_fraction: float

    @property
    def dim(self) -> int:
        return self.offsets.shape[1]

    @property
    def halfwidths(self) -> tuple:
        """Max |offset| per axis; bounds the reach in cells."""
        return tuple(int(m) for m in np.abs(self.offsets).max(axis=0))

    @property
    def weight_sum(self) -> float:
        return float(self.weights.sum())


def _circle_quadrant_area(R: float, x: float, y: float) -> float:
    """Area of the disk |z| <= R intersected with [0,x] x [0,y], x,y >= 0."""
    if R <= 0.0 or x <= 0.0 or y <= 0.0:
        return 0.0
    x = min(x, R)
    if x * x + y * y <= R * R:
        return x * y
    y = min(y, R)

    def anti(u):
        u = min(max(u, -R), R)
        return 0.5 * (u * math.sqrt(max(R * R - u * u, 0.0)) + R * R * math.asin(u / R))

    u0 = math.sqrt(max(R * R - y * y, 0.0))
    u0 = min(u0, x)
    return y * u0 + (anti(x) - anti(u0))


def circle_rect_area(R: float, x0: float, x1: float, y0: float, y1: float) -> float:
    """Area of the origin-centered disk of radius R within a rectangle."""

    def F(x, y):
        s = math.copysign(1.0, x) * math.copysign(1.0, y)
        return s * _circle_quadrant_area(R, abs(x), abs(y))

    return F(x1, y1) - F(x0, y1) - F(x1, y0) + F(x0, y0)


def _band_cell_integral(spec: KernelSpec, eps: float, lo, hi) -> float:
    """Exact integral of J_eps over a cell for the band kernel."""
    ri, ro = spec.r * eps, spec.R * eps
    amp = spec.a / eps**spec.dim
    if spec.dim == 1:
        inner = max(0.0, min(hi[0], ro) - max(lo[0], ri)) + max(
            0.0, min(hi[0], -ri) - max(lo[0], -ro)
        )
        return amp * inner
    outer = circle_rect_area(ro, lo[0], hi[0], lo[1], hi[1])
    inner = circle_rect_area(ri, lo[0], hi[0], lo[1], hi[1])
    return amp * (outer - inner)


_GL_CACHE: dict = {}


def _gl(k: int):
    if k not in _GL_CACHE:
        _GL_CACHE[k] = np.polynomial.legendre.leggauss(k)
    return _GL_CACHE[k]


def _cells_gl_2d(fn_batch, centers: np.ndarray, h, order: int) -> np.ndarray:
    """Tensor Gauss-Legendre integrals of fn over equal cells, vectorized
    across cells.  fn_batch maps points (m, 2) -> values (m,)."""
    x, w = _gl(order)
    px = 0.5 * h[0] * x
    py = 0.5 * h[1] * x
    X, Y = np.meshgrid(px, py, indexing="ij")
    offs = np.column_stack([X.ravel(), Y.ravel()])  # (k^2, 2)
    wts = np.outer(w, w).ravel() * (0.25 * h[0] * h[1])
    pts = centers[:, None, :] + offs[None, :, :]
    vals = fn_batch(pts.reshape(-1, 2)).reshape(len(centers), -1)
    return vals @ wts


def _cell_integrals_2d(fn_batch, centers: np.ndarray, h, rel_tol=1e-4) -> np.ndarray:
    """Escalating-order quadrature: refine cells until the value is stable
    to rel_tol (orders 4, 8, then 16 where still moving)."""
    v4 = _cells_gl_2d(fn_batch, centers, h, 4)
    v8 = _cells_gl_2d(fn_batch, centers, h, 8)
    out = v8.copy()
    unstable = np.abs(v8 - v4) > rel_tol * (np.abs(v8) + 1e-300)
    if np.any(unstable):
        out[unstable] = _cells_gl_2d(fn_batch, centers[unstable], h, 16)
    return out


def _cell_integrals_1d(fn_batch, centers: np.ndarray, h: float,
                       points: int = 1024) -> np.ndarray:
    """Dense midpoint rule, robust for discontinuous profiles."""
    offs = (np.arange(points) + 0.5) / points * h - 0.5 * h
    pts = centers[:, None] + offs[None, :]
    vals = fn_batch(pts.reshape(-1, 1)).reshape(len(centers), points)
    return vals.mean(axis=1) * h


def _gagliardo_interval_integral(spec: KernelSpec, eps: float, a: float,
                                 b: float) -> float:
    """Closed form of int eps^(2s) |z|^(-1-2s) over [a, b] away from 0."""
    p = 2.0 * spec.s
    if a < 0.0 < b:
        raise KernelError("cell integral crosses the singularity")
    if b <= 0.0:
        a, b = -b, -a
    return eps**p * (a ** (-p) - b ** (-p)) / p


def _cell_weights(spec: KernelSpec, eps: float, centers: np.ndarray,
                  h: np.ndarray) -> np.ndarray:
    """Integrals of J_eps over equal cells centered at the given points."""
    if spec.variant == "band":
        return np.array([
            _band_cell_integral(spec, eps, c - 0.5 * h, c + 0.5 * h)
            for c in centers
        ])
    if spec.variant == "gagliardo" and spec.dim == 1:
        return np.array([
            _gagliardo_interval_integral(spec, eps, c[0] - 0.5 * h[0],
                                         c[0] + 0.5 * h[0])
            for c in centers
        ])

    def fn_batch(pts):
        t = np.linalg.norm(pts, axis=1) / eps
        return spec.radial(t) / eps**spec.dim

    if spec.dim == 1:
        return _cell_integrals_1d(fn_batch, centers[:, 0], float(h[0]))
    return _cell_integrals_2d(fn_batch, centers, h)


def discrete_stencil(
    spec: KernelSpec,
    epsilon: float,
    spacing,
    mass_tol: float = 1e-6,
    max_radius: float | None = None,
) -> DiscreteStencil:
    """Build cell-integrated weights of J_eps truncated by moment mass.

    The truncation radius is eps times the radius beyond which the tail
    of the moment integral falls below mass_tol * M_J (the exact support
    radius for compactly supported kernels).  If max_radius is given and
    smaller, the stencil is clipped there with a warning.  The zero
    offset is always excluded.
    """
    if epsilon <= 0.0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    h = np.atleast_1d(np.asarray(spacing, dtype=float))
    if h.size == 1 and spec.dim == 2:
        h = np.array([h[0], h[0]])
    if h.size != spec.dim or np.any(h <= 0.0):
        raise ParameterError(f"spacing must be {spec.dim} positive lengths")

    radius = epsilon * kernel_tail_radius(spec, mass_tol)
    captured = 1.0 - mass_tol if spec.support_radius == math.inf else 1.0
    if max_radius is not None and radius > max_radius:
        warnings.warn(
            f"stencil radius {radius:.3g} exceeds cap {max_radius:.3g}; clipping",
            stacklevel=2,
        )
        radius = max_radius
        if spec.support_radius == math.inf:
            f = _moment_integrand(spec)
            tail, _ = integrate.quad(f, radius / epsilon, np.inf, limit=200)
            captured = 1.0 - SPHERE_MEASURE[spec.dim] * tail / kernel_moment(spec)

    halfdiag = 0.5 * float(np.linalg.norm(h))
    kmax = [int(math.ceil((radius + halfdiag) / h[ax])) for ax in range(spec.dim)]

    # Enumerate a symmetric half of the offsets and mirror, so weights are
    # exactly even under negation.
    if spec.dim == 1:
        half = [(d,) for d in range(1, kmax[0] + 1)]
    else:
        half = [
            (dx, dy)
            for dx in range(0, kmax[0] + 1)
            for dy in range(-kmax[1], kmax[1] + 1)
            if dx > 0 or dy > 0
        ]
    half = [
        d for d in half
        if np.linalg.norm(np.array(d, dtype=float) * h) - halfdiag <= radius
    ]
    centers = np.array(half, dtype=float) * h[None, :]
    wvals = _cell_weights(spec, epsilon, centers, h) if half else np.empty(0)
    offsets = []
    weights = []
    for d, w in zip(half, wvals):
        if w <= 0.0:
            continue
        offsets.append(d)
        weights.append(float(w))
        offsets.append(tuple(-c for c in d))
        weights.append(float(w))
    if not offsets:
        raise NumericalError("stencil is empty; spacing too coarse for epsilon")
    order = np.lexsort(np.array(offsets).T[::-1])
    return DiscreteStencil(
        epsilon=epsilon,
        spacing=tuple(float(v) for v in h),
        offsets=np.array(offsets, dtype=np.int64)[order],
        weights=np.array(weights, dtype=float)[order],
        truncation_radius=radius,
        captured_mass_fraction=captured,
    )


def directional_stencil(
    spec: KernelSpec,
    xi,
    epsilon: float,
    dt: float,
    mass_tol: float = 1e-6,
    max_radius: float | None = None,
):
    """1d cell-integrated weights of the rescaled directional kernel.

    Used by the sliced energy: weights[k-1] integrates
    J_eps(t xi)|t|^(n-1) over the cell ((k-1/2) dt, (k+1/2) dt), k >= 1;
    negative offsets mirror by evenness.  Returns (offsets, weights).
    """
    if epsilon <= 0.0 or dt <= 0.0:
        raise ParameterError("epsilon and dt must be positive")
    radius = epsilon * kernel_tail_radius(spec, mass_tol)
    if max_radius is not None and radius > max_radius:
        radius = max_radius
    kmax = int(math.ceil((radius + 0.5 * dt) / dt))

    def fn_batch(pts):
        t = np.abs(pts[:, 0])
        return (spec.radial(t * np.linalg.norm(xi) / epsilon)
                * t ** (spec.dim - 1) / epsilon**spec.dim)

    centers = dt * np.arange(1, kmax + 1, dtype=float)
    wvals = _cell_integrals_1d(fn_batch, centers, dt)
    keep = wvals > 0.0
    return (np.arange(1, kmax + 1, dtype=np.int64)[keep],
            wvals[keep].astype(float))
