import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from nlphase import fields as F
from nlphase.errors import ParameterError


# ---------------------------------------------------------------------------
# oracle: event-walk transition counter on an analytic function
# ---------------------------------------------------------------------------


def oracle_count(fun, t0, t1, probes=2_000_001):
    """Independent transition counter: locate all +-1/2 level crossings
    of fun by dense bracketing + bisection, then walk the event list and
    count maximal runs from one level to the other that stay inside the
    open band in between."""
    ts = np.linspace(t0, t1, probes)
    vs = fun(ts)
    events = []  # (t, level, direction)
    for level in (-0.5, 0.5):
        s = np.sign(vs - level)
        s[s == 0] = 1
        for i in np.flatnonzero(np.diff(s) != 0):
            a, b = ts[i], ts[i + 1]
            for _ in range(60):
                m = 0.5 * (a + b)
                if np.sign(fun(m) - level) == s[i]:
                    a = m
                else:
                    b = m
            events.append((0.5 * (a + b), level, s[i + 1]))
    events.sort()
    count = 0
    pending = None  # level we last left the band from
    for _, level, direction in events:
        entering = (level == 0.5 and direction < 0) or (
            level == -0.5 and direction > 0
        )
        if entering:
            pending = level
        else:
            if pending is not None and pending != level:
                count += 1
            pending = None
    return count


def test_count_transitions_tanh():
    t = np.linspace(-1, 1, 400)
    f = lambda x: np.tanh(x / 0.05)
    assert oracle_count(f, -1, 1) == 1
    assert F.count_transitions(f(t)) == 1


def test_count_transitions_constant():
    assert F.count_transitions(np.ones(100)) == 0
    assert F.count_transitions(np.zeros(100)) == 0


def test_count_transitions_sine_frozen_oracle():
    # Brute-force event oracle on sin(2 pi t) over [0, 2): three maximal
    # full band crossings (the final ascent never exits above 1/2).
    f = lambda x: np.sin(2 * math.pi * x)
    expected = oracle_count(f, 0.0, 2.0 - 1e-12)
    assert expected == 3
    t = np.arange(400) / 200.0
    assert F.count_transitions(f(t)) == expected


def test_count_transitions_matches_oracle_random(rng):
    for _ in range(20):
        k = rng.integers(1, 5)
        pos = np.sort(rng.uniform(-0.8, 0.8, size=k))
        width = rng.uniform(0.02, 0.2)

        def f(x, pos=pos, width=width, k=k):
            out = np.full_like(np.asarray(x, dtype=float), (-1.0) ** (k + 1))
            for p in pos:
                out = out * np.tanh((x - p) / width)
            return out

        t = np.linspace(-1, 1, 1500)
        assert F.count_transitions(f(t)) == oracle_count(f, -1, 1, 400_001)


@settings(max_examples=100, deadline=None)
@given(hnp.arrays(np.float64, st.integers(2, 60),
                  elements=st.floats(-3, 3, allow_nan=False)))
def test_count_invariant_under_clamp(v):
    clamped = np.clip(v, -1.0, 1.0)
    assert F.count_transitions(clamped) == F.count_transitions(v)


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------


def test_gradient_constant_zero():
    g = F.line_grid(-1.0, 1.0, 65)
    f = F.Field(g, np.full(g.shape, 0.7), F.default_boundary(g))
    assert np.all(F.gradient(f) == 0.0)
    g2 = F.Grid((16, 16), (0.0, 0.0), (1.0, 1.0), (True, True))
    f2 = F.Field(g2, np.full(g2.shape, -0.2))
    assert np.all(F.gradient(f2) == 0.0)


def test_gradient_linear_periodic_interior():
    g = F.Grid((64,), (0.0,), (1.0,), (True,))
    x = g.axis_coords(0)
    f = F.Field(g, 3.0 * x)
    grad = F.gradient(f)[0]
    interior = slice(1, -1)  # wrap cells excluded
    assert np.allclose(grad[interior], 3.0, atol=1e-12)


def test_gradient_sine_accuracy():
    g = F.Grid((256,), (0.0,), (1.0,), (True,))
    x = g.axis_coords(0)
    f = F.Field(g, np.sin(2 * math.pi * x))
    grad = F.gradient(f)[0]
    exact = 2 * math.pi * np.cos(2 * math.pi * x)
    assert np.abs(grad - exact).max() < 1e-3


def test_gradient_fixed_boundary_second_order():
    errs = []
    for n in (65, 129, 257):
        g = F.line_grid(0.0, 1.0, n)
        x = g.axis_coords(0)
        f = F.Field(g, np.exp(x), F.default_boundary(g))
        errs.append(np.abs(F.gradient(f)[0] - np.exp(x)).max())
    order = math.log2(errs[0] / errs[2]) / 2
    assert order > 1.8


def test_gradient_adjoint_exact(rng):
    for shape, periodic in (((33,), (False,)), ((32,), (True,)),
                            ((17, 23), (False, True)),
                            ((12, 15), (False, False))):
        g = F.Grid(shape, (0.0,) * len(shape), (1.0,) * len(shape), periodic)
        u = rng.standard_normal(shape)
        q = rng.standard_normal((len(shape),) + shape)
        f = F.Field(g, u, F.default_boundary(g))
        lhs = float(np.sum(F.gradient(f) * q))
        rhs = float(np.sum(u * F.gradient_adjoint(g, q)))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


# ---------------------------------------------------------------------------
# slicing
# ---------------------------------------------------------------------------


def test_slice_constant_2d():
    g = F.Grid((32, 32), (0.0, 0.0), (1.0, 1.0), (True, True))
    f = F.Field(g, np.ones(g.shape))
    s = F.extract_slice(f, (1.0, 0.0), (0.0, 0.25))
    assert s.values.size > 0
    assert np.allclose(s.values, 1.0)


def test_slice_linear_along_axis():
    g = F.Grid((33, 33), (0.0, 0.0), (1.0, 1.0), (False, False))
    xs, _ = g.coords()
    f = F.Field(g, xs, F.default_boundary(g))
    s = F.extract_slice(f, (1.0, 0.0), (0.0, 0.5))
    # u(z + t e1) = t here since z has x = 0
    assert np.allclose(s.values, s.t, atol=1e-12)
    assert s.exact


def test_slice_diagonal_slope():
    g = F.Grid((65, 65), (0.0, 0.0), (1.0, 1.0), (False, False))
    xs, ys = g.coords()
    f = F.Field(g, xs + ys, F.default_boundary(g))
    xi = np.array([1.0, 1.0]) / math.sqrt(2.0)
    s = F.extract_slice(f, xi, (0.0, 0.0))
    slopes = np.diff(s.values) / s.dt
    assert np.allclose(slopes, math.sqrt(2.0), atol=1e-9)


def test_slice_missing_line_empty():
    g = F.Grid((16, 16), (0.0, 0.0), (1.0, 1.0), (False, False))
    f = F.Field(g, np.zeros(g.shape), F.default_boundary(g))
    s = F.extract_slice(f, (0.0, 1.0), (5.0, 0.0))
    assert s.values.size == 0


def test_slice_oblique_flagged_approximate():
    g = F.Grid((32, 32), (0.0, 0.0), (1.0, 1.0), (False, False))
    xs, ys = g.coords()
    f = F.Field(g, xs + 2 * ys, F.default_boundary(g))
    xi = np.array([1.0, 2.0]) / math.sqrt(5.0)
    s = F.extract_slice(f, xi, (0.2, 0.1))
    assert not s.exact
    slopes = np.diff(s.values) / s.dt
    assert np.allclose(slopes, math.sqrt(5.0), atol=1e-6)


def test_slice_1d_field():
    g = F.line_grid(-1.0, 1.0, 21)
    f = F.Field(g, g.axis_coords(0) ** 2, F.default_boundary(g))
    s = F.extract_slice(f, (-1.0,), (0.0,))
    assert np.allclose(s.values, (-(s.t)) ** 2)


# ---------------------------------------------------------------------------
# mollified interfaces
# ---------------------------------------------------------------------------


def test_mollified_far_field_exact():
    g = F.Grid((128, 64), (-1.0, 0.0), (1.0, 1.0), (False, True))
    spec = F.InterfaceSpec((1.0, 0.0), 0.0, 0.1)
    f = F.mollified_interface(g, spec)
    xs, _ = g.coords()
    assert np.all(f.values[xs > 0.1] == 1.0)
    assert np.all(f.values[xs < -0.1] == -1.0)


def test_mollified_midplane_zero():
    g = F.line_grid(-1.0, 1.0, 257)
    f = F.mollified_interface(g, F.InterfaceSpec((1.0,), 0.0, 0.1))
    mid = np.argmin(np.abs(g.axis_coords(0)))
    assert abs(f.values[mid]) < 1e-9


def test_mollified_gradient_supported_in_slab():
    g = F.Grid((256,), (-1.0,), (1.0,), (False,))
    sigma = 0.15
    f = F.mollified_interface(g, F.InterfaceSpec((1.0,), 0.0, sigma))
    grad = F.gradient(f)[0]
    x = g.axis_coords(0)
    outside = np.abs(x) > sigma + 2 * g.spacing[0]
    assert np.all(grad[outside] == 0.0)


def test_mollified_gradient_scale_invariance():
    # sup |grad| * sigma is a constant of the profile shape.
    vals = []
    for sigma in (0.05, 0.1, 0.2):
        g = F.line_grid(-1.0, 1.0, 4097)
        f = F.mollified_interface(g, F.InterfaceSpec((1.0,), 0.0, sigma))
        vals.append(np.abs(F.gradient(f)[0]).max() * sigma)
    assert max(vals) / min(vals) < 1.05


def test_mollified_second_derivative_scale():
    vals = []
    for sigma in (0.1, 0.2):
        g = F.line_grid(-1.0, 1.0, 4097)
        f = F.mollified_interface(g, F.InterfaceSpec((1.0,), 0.0, sigma))
        grad = F.gradient(f)
        hess = F.gradient(F.Field(g, grad[0], f.boundary_values))[0]
        vals.append(np.abs(hess).max() * sigma**2)
    assert max(vals) / min(vals) < 1.1


def test_mollified_unresolvable_sigma_raises():
    g = F.line_grid(-1.0, 1.0, 33)
    with pytest.raises(ParameterError):
        F.mollified_interface(g, F.InterfaceSpec((1.0,), 0.0, 0.05))


# ---------------------------------------------------------------------------
# blending
# ---------------------------------------------------------------------------


def _two_fields(rng):
    g = F.Grid((48, 48), (0.0, 0.0), (1.0, 1.0), (False, False))
    a = F.Field(g, rng.standard_normal(g.shape), F.default_boundary(g))
    b = F.Field(g, rng.standard_normal(g.shape), F.default_boundary(g))
    return g, a, b


def test_blend_equal_fields_identity(rng):
    g, a, _ = _two_fields(rng)
    out = F.blend(a, a, 0.1)
    assert np.array_equal(out.values, a.values)


def test_blend_region_identities(rng):
    g, a, b = _two_fields(rng)
    margin = 0.1
    out = F.blend(a, b, margin)
    d = F.boundary_distance(g)
    assert np.array_equal(out.values[d >= 2 * margin], a.values[d >= 2 * margin])
    assert np.array_equal(out.values[d <= margin], b.values[d <= margin])


def test_blend_cutoff_bounds_and_gradient():
    consts = []
    for margin in (0.1, 0.2):
        g = F.Grid((128, 128), (0.0, 0.0), (1.0, 1.0), (False, False))
        phi = F.blend_cutoff(g, margin)
        assert phi.min() >= 0.0 and phi.max() <= 1.0
        gphi = F.gradient(F.Field(g, phi, F.default_boundary(g)))
        consts.append(np.abs(gphi).max() * margin)
    assert max(consts) / min(consts) < 1.2


def test_blend_margin_infeasible(rng):
    g, a, b = _two_fields(rng)
    with pytest.raises(ParameterError):
        F.blend(a, b, 0.3)


# ---------------------------------------------------------------------------
# clamp, field plumbing, CSV
# ---------------------------------------------------------------------------


def test_clamp_examples():
    g = F.line_grid(0.0, 1.0, 11)
    f = F.Field(g, np.linspace(-2, 2, 11), F.default_boundary(g))
    out = F.clamp_unit(f)
    assert out.values.max() == 1.0 and out.values.min() == -1.0
    assert F.clamp_unit(out).values is not out.values
    assert np.array_equal(F.clamp_unit(out).values, out.values)
    inside = F.Field(g, np.linspace(-0.3, 0.9, 11), F.default_boundary(g))
    assert np.array_equal(F.clamp_unit(inside).values, inside.values)


def test_boundary_values_invariant():
    g = F.line_grid(0.0, 1.0, 11)
    with pytest.raises(ParameterError):
        F.Field(g, np.zeros(11))  # fixed axis needs boundary_values
    gp = F.Grid((11,), (0.0,), (1.0,), (True,))
    with pytest.raises(ParameterError):
        F.Field(gp, np.zeros(11), {0: (-1.0, 1.0)})


def test_field_csv_roundtrip(tmp_path, rng):
    g = F.Grid((8, 6), (0.0, -1.0), (1.0, 1.0), (True, False))
    f = F.Field(g, rng.standard_normal(g.shape), F.default_boundary(g))
    path = tmp_path / "f.csv"
    F.save_field_csv(f, path)
    back = F.load_field_csv(path, g)
    assert np.array_equal(back.values, f.values)
    header = path.read_text().splitlines()[0]
    assert header == "x,y,value"
