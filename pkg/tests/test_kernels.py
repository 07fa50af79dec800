import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nlphase import kernels as K
from nlphase.errors import KernelError, ParameterError


# ---------------------------------------------------------------------------
# pointwise evaluation
# ---------------------------------------------------------------------------


def test_band_eval_inside_outside(band1):
    assert K.kernel_eval(band1, (1.5,)) == 1.0
    assert K.kernel_eval(band1, (0.5,)) == 0.0
    assert K.kernel_eval(band1, (2.5,)) == 0.0


def test_gagliardo_eval_closed_form():
    g = K.gagliardo(0.75, dim=1)
    # |x|^(-1-2s) at x=2
    assert K.kernel_eval(g, (2.0,)) == pytest.approx(2.0 ** (-2.5), rel=1e-14)


def test_gagliardo_singular_at_zero():
    g = K.gagliardo(0.75, dim=1)
    with pytest.raises(KernelError):
        K.kernel_eval(g, (0.0,))


def test_gagliardo_admissible_range():
    with pytest.raises(KernelError):
        K.gagliardo(0.5, dim=1)
    with pytest.raises(KernelError):
        K.gagliardo(1.0, dim=1)
    with pytest.raises(KernelError):
        K.gagliardo(1.2, dim=1)


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=-10, max_value=10, allow_nan=False),
       st.floats(min_value=-10, max_value=10, allow_nan=False))
def test_evenness_2d(x, y):
    spec = K.band(1.0, 2.0, 1.0, dim=2)
    assert K.kernel_eval(spec, (x, y)) == K.kernel_eval(spec, (-x, -y))


def test_evenness_random_thousand(rng, band1, band2):
    for spec in (band1, band2, K.smooth_bump(1.5, 0.7, dim=2),
                 K.gagliardo(0.6, dim=2)):
        xs = rng.uniform(-4, 4, size=(1000, spec.dim))
        xs[np.all(xs == 0.0, axis=1)] = 1.0
        for x in xs:
            assert K.kernel_eval(spec, x) == K.kernel_eval(spec, -x)


# ---------------------------------------------------------------------------
# rescaling
# ---------------------------------------------------------------------------


def test_rescale_band(band1):
    # (1/eps) J(x/eps) at eps=0.5, x=0.75 -> 2 * J(1.5) = 2
    assert K.kernel_rescale_eval(band1, 0.5, (0.75,)) == pytest.approx(2.0)


def test_rescale_identity(band1, band2):
    for spec in (band1, band2):
        x = np.full(spec.dim, 1.3)
        assert K.kernel_rescale_eval(spec, 1.0, x) == K.kernel_eval(spec, x)


def test_rescale_gagliardo_closed_form():
    g = K.gagliardo(0.75, dim=1)
    # eps^{2s} |x|^{-1-2s} with x=1
    assert K.kernel_rescale_eval(g, 0.1, (1.0,)) == pytest.approx(
        0.1**1.5, rel=1e-12
    )


def test_rescale_rejects_bad_epsilon(band1):
    with pytest.raises(ParameterError):
        K.kernel_rescale_eval(band1, 0.0, (1.0,))


# ---------------------------------------------------------------------------
# moment integral
# ---------------------------------------------------------------------------


def test_band_moment_closed_form(band1):
    # 2 * int_1^2 t dt = 3 since min(t, t^2) = t beyond 1
    assert K.kernel_moment(band1) == pytest.approx(3.0, rel=1e-12)


def test_band_moment_amplitude_linearity():
    for c in (0.5, 2.0, 7.0):
        spec = K.band(1.0, 2.0, c, dim=1)
        assert K.kernel_moment(spec) == pytest.approx(3.0 * c, rel=1e-12)


def test_gagliardo_moment_closed_form():
    # 2 [ 1/(2-2s) + 1/(2s-1) ] in 1d
    for s in (0.55, 0.65, 0.75, 0.85, 0.95):
        spec = K.gagliardo(s, dim=1)
        closed = 2.0 * (1.0 / (2.0 - 2.0 * s) + 1.0 / (2.0 * s - 1.0))
        assert K.kernel_moment(spec) == pytest.approx(closed, rel=1e-6)


def test_smooth_bump_moment_matches_quadrature():
    spec = K.smooth_bump(1.5, 0.8, dim=2)
    ref, _ = integrate.quad(
        lambda t: spec.radial(t) * min(t, t * t) * t, 0.0, 1.5
    )
    assert K.kernel_moment(spec) == pytest.approx(2.0 * math.pi * ref, rel=1e-8)


# ---------------------------------------------------------------------------
# non-degeneracy window
# ---------------------------------------------------------------------------


def test_band_window_constants(band1):
    c = K.nondegeneracy_constants(band1)
    assert c.gamma == 2.0
    assert c.delta == 1.0
    assert c.alpha((1.0,)) == 1.0
    assert c.beta((1.0,)) == 2.0
    # Tight bound of int_r^R dt/(a t^(n-1)) in 1d is (R - r)/a.
    assert c.c == pytest.approx(1.0, rel=1e-6)


def test_band_window_constants_2d(band2):
    c = K.nondegeneracy_constants(band2)
    assert c.c == pytest.approx(math.log(2.0), rel=1e-6)


def test_window_chain_inequalities(band1, band2):
    for spec in (band1, band2, K.gagliardo(0.75, dim=1),
                 K.smooth_bump(1.0, 1.0, dim=2)):
        c = K.nondegeneracy_constants(spec)
        a, b = c.alpha(None), c.beta(None)
        assert -c.gamma <= a <= a + c.delta <= b <= c.gamma


def test_window_reverified_on_random_directions(rng, band2):
    angles = rng.uniform(0, 2 * math.pi, size=16)
    dirs = [np.array([math.cos(t), math.sin(t)]) for t in angles]
    for spec in (band2, K.gagliardo(0.8, dim=2), K.smooth_bump(2.0, 0.5, dim=2)):
        c = K.nondegeneracy_constants(spec)
        assert c.verify(spec, dirs)


def test_gagliardo_window_quadrature_oracle():
    # Window [1, 2]: int_1^2 t^(1+2s) dt must not exceed the certificate.
    s = 0.75
    spec = K.gagliardo(s, dim=1)
    c = K.nondegeneracy_constants(spec)
    val, _ = integrate.quad(lambda t: t ** (1 + 2 * s), c.alpha(None), c.beta(None))
    assert val <= c.c


# ---------------------------------------------------------------------------
# directional restriction
# ---------------------------------------------------------------------------


def test_directional_band_2d(band2):
    # radial kernel: J^xi(t) = J(t) * |t| in 2d
    for xi in ((1.0, 0.0), (0.6, 0.8)):
        assert K.directional_kernel(band2, xi, 1.5) == pytest.approx(1.5)


def test_directional_1d_trivial(band1):
    for t in (0.3, 1.2, 1.9, 2.5):
        assert K.directional_kernel(band1, (1.0,), t) == K.kernel_eval(band1, (t,))


def test_directional_gagliardo_2d():
    g = K.gagliardo(0.75, dim=2)
    # 2^{-2-2s} * 2 = 2^{-2.5} at t=2
    assert K.directional_kernel(g, (0.0, 1.0), 2.0) == pytest.approx(2.0**-2.5)


def test_directional_rescaled_identity(rng, band2):
    # J_eps^xi(t) = J_eps(t xi) |t|^{n-1}
    xi = np.array([3.0, 4.0]) / 5.0
    for _ in range(20):
        t = float(rng.uniform(0.05, 3.0))
        eps = float(rng.uniform(0.05, 1.0))
        lhs = K.directional_kernel_rescaled(band2, xi, eps, t)
        rhs = K.kernel_rescale_eval(band2, eps, t * xi) * abs(t)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14)


# ---------------------------------------------------------------------------
# discrete stencils
# ---------------------------------------------------------------------------


def test_stencil_band_one_cell(band1):
    h = 0.1
    st = K.discrete_stencil(band1, h, (h,))
    assert np.abs(st.offsets).max() <= 2
    # cell-integrated weights sum to int J = 2a(R - r) = 2 in 1d
    assert st.weight_sum == pytest.approx(2.0, rel=1e-3)
    assert 0 not in st.offsets[:, 0]


def test_stencil_band_sum_exact_2d(band2):
    # Closed-form circle-cell areas make the sum exactly the annulus mass.
    st = K.discrete_stencil(band2, 0.1, (0.0125, 0.0125))
    assert st.weight_sum == pytest.approx(3.0 * math.pi, rel=1e-12)


def test_stencil_eps_invariance(band1):
    # weights depend only on eps/spacing
    a = K.discrete_stencil(band1, 0.1, (0.02,))
    b = K.discrete_stencil(band1, 0.05, (0.01,))
    assert np.array_equal(a.offsets, b.offsets)
    assert np.allclose(a.weights, b.weights, rtol=1e-13)


def test_stencil_symmetric_under_negation(band2):
    st = K.discrete_stencil(band2, 0.15, (0.03, 0.03))
    table = {tuple(d): w for d, w in zip(st.offsets, st.weights)}
    for d, w in table.items():
        assert table[(-d[0], -d[1])] == w


def test_stencil_mass_trend_smooth_bump():
    spec = K.smooth_bump(2.0, 1.0, dim=2)
    total, _ = integrate.quad(lambda t: spec.radial(t) * t, 0.0, 2.0)
    total *= 2.0 * math.pi
    errs = []
    for ratio in (2.0, 4.0, 8.0, 16.0):
        st = K.discrete_stencil(spec, 0.2, (0.2 / ratio, 0.2 / ratio))
        errs.append(abs(st.weight_sum - total))
    for a, b in zip(errs[:-1], errs[1:]):
        assert b <= a + 1e-6
    assert errs[-1] < 1e-3 * total


def test_stencil_gagliardo_near_diagonal_weight():
    # Neighbor-cell weight is finite and matches a 16x reference grid.
    spec = K.gagliardo(0.75, dim=2)
    eps, h = 0.2, 0.05
    with pytest.warns(UserWarning, match="clipping"):
        st = K.discrete_stencil(spec, eps, (h, h), mass_tol=1e-2, max_radius=0.8)
    w_adj = dict(zip(map(tuple, st.offsets), st.weights))[(1, 0)]
    assert math.isfinite(w_adj) and w_adj > 0
    # dense midpoint reference on a 64 x 64 subgrid
    n = 64
    u = (np.arange(n) + 0.5) / n * h + 0.5 * h
    v = (np.arange(n) + 0.5) / n * h - 0.5 * h
    U, V = np.meshgrid(u, v, indexing="ij")
    ref = np.sum(eps ** (2 * 0.75) * (U * U + V * V) ** (-1 - 0.75)) * (h / n) ** 2
    assert w_adj == pytest.approx(ref, rel=1e-3)


def test_stencil_radius_clipped_with_warning():
    spec = K.gagliardo(0.75, dim=1)
    with pytest.warns(UserWarning):
        st = K.discrete_stencil(spec, 0.1, (0.02,), mass_tol=1e-6, max_radius=1.0)
    assert st.truncation_radius == 1.0
    assert st.captured_mass_fraction < 1.0


def test_stencil_captured_mass_full_for_compact(band2):
    st = K.discrete_stencil(band2, 0.1, (0.02, 0.02))
    assert st.captured_mass_fraction == 1.0
    assert st.truncation_radius == pytest.approx(0.2)


def test_circle_rect_area_against_mc(rng):
    for _ in range(5):
        R = float(rng.uniform(0.3, 2.0))
        x0, y0 = rng.uniform(-2, 1, size=2)
        x1 = x0 + rng.uniform(0.2, 2.0)
        y1 = y0 + rng.uniform(0.2, 2.0)
        pts = rng.uniform((x0, y0), (x1, y1), size=(200_000, 2))
        mc = np.mean(np.sum(pts * pts, axis=1) <= R * R) * (x1 - x0) * (y1 - y0)
        exact = K.circle_rect_area(R, x0, x1, y0, y1)
        assert exact == pytest.approx(mc, abs=4 * 0.002 * (x1 - x0) * (y1 - y0) + 1e-4)


def test_directional_stencil_matches_kernel_stencil_1d(band1):
    # In 1d the directional restriction equals the kernel itself.
    h, eps = 0.01, 0.1
    offs, wts = K.directional_stencil(band1, (1.0,), eps, h)
    st = K.discrete_stencil(band1, eps, (h,))
    pos = st.offsets[:, 0] > 0
    assert np.array_equal(offs, st.offsets[pos, 0])
    assert np.allclose(wts, st.weights[pos], rtol=2e-3)
