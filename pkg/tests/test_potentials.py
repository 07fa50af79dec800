import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlphase import potentials as P
from nlphase.errors import InvalidPotentialError


def test_eval_examples(quartic):
    assert P.potential_eval(quartic, 1.0) == 0.0
    assert P.potential_eval(quartic, -1.0) == 0.0
    assert P.potential_eval(quartic, 0.0) == 1.0
    assert P.potential_eval(quartic, 2.0) == 9.0


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-50, max_value=50, allow_nan=False))
def test_nonnegative_everywhere(s):
    assert P.potential_eval(P.quartic(), s) >= 0.0


def test_deriv_examples(quartic):
    assert P.potential_deriv(quartic, 1.0) == 0.0
    assert P.potential_deriv(quartic, 0.0) == 0.0
    # 4 s (s^2 - 1) at s = 1/2
    assert P.potential_deriv(quartic, 0.5) == pytest.approx(-1.5)


def test_deriv_matches_central_differences(quartic, rng):
    pts = rng.uniform(-3, 3, size=100)
    h = 1e-5
    for s in pts:
        fd = (P.potential_eval(quartic, s + h) - P.potential_eval(quartic, s - h)) / (
            2 * h
        )
        an = P.potential_deriv(quartic, s)
        assert an == pytest.approx(fd, rel=1e-8, abs=1e-8)


def test_growth_constants_quartic(quartic):
    gc = P.growth_constants(quartic)
    # Scanned sup of (|s|-1)^2 / W(s) is 1 (at s=0), times the 1.1 guard.
    assert gc.c_w == pytest.approx(1.1, rel=1e-9)
    # min of W over ||s|-1| >= 1/2 sits at s = +-1/2: (1/4 - 1)^2 = 9/16
    assert gc.m_w == pytest.approx(9.0 / 16.0, rel=1e-12)
    assert gc.hat_c_w == pytest.approx(2 * gc.c_w + 4 / gc.m_w, rel=1e-12)
    assert gc.big_m_w == pytest.approx(1.0, rel=1e-12)
    # (s0^2 - 1)^2 = 1 with s0 < -1  ->  s0 = -sqrt(2)
    assert gc.s0 == pytest.approx(-np.sqrt(2.0), abs=1e-9)
    assert 0.0 < gc.a_w < 1.0


def test_coercivity_bound_dense_grid(quartic):
    gc = P.growth_constants(quartic)
    s = np.linspace(-5, 5, 10_001)
    w = P.potential_eval(quartic, s)
    assert np.all((np.abs(s) - 1.0) ** 2 <= gc.c_w * w + 1e-12)


def test_one_sided_well_bounds(quartic):
    # (s -+ 1)^2 <= hat_c W(s) away from the opposite well.
    gc = P.growth_constants(quartic)
    s = np.linspace(-5, 5, 10_001)
    w = P.potential_eval(quartic, s)
    right = np.abs(s + 1.0) >= 0.5
    assert np.all((s[right] - 1.0) ** 2 <= gc.hat_c_w * w[right] + 1e-12)
    left = np.abs(s - 1.0) >= 0.5
    assert np.all((s[left] + 1.0) ** 2 <= gc.hat_c_w * w[left] + 1e-12)


def test_monotone_approach_to_wells(quartic):
    gc = P.growth_constants(quartic)
    up = np.linspace(1.0, 5.0, 2001)
    assert np.all(np.diff(P.potential_eval(quartic, up)) >= 0.0)
    down = np.linspace(-5.0, -1.0, 2001)
    assert np.all(np.diff(P.potential_eval(quartic, down)) <= 0.0)
    inner = np.linspace(1.0 - gc.a_w, 1.0, 2001)
    assert np.all(np.diff(P.potential_eval(quartic, inner)) <= 1e-12)


def test_clamp_compatibility(quartic):
    # W(clamped s) never exceeds W(s) + max over [-1, 1].
    gc = P.growth_constants(quartic)
    s = np.linspace(-5, 5, 4001)
    clamped = np.clip(s, -1.0, 1.0)
    assert np.all(
        P.potential_eval(quartic, clamped)
        <= P.potential_eval(quartic, s) + gc.big_m_w + 1e-12
    )


def test_scale_parameter():
    p = P.quartic(3.0)
    assert P.potential_eval(p, 0.0) == 3.0
    assert P.potential_deriv(p, 0.5) == pytest.approx(-4.5)


def test_piecewise_requires_wells_at_pm_one():
    with pytest.raises(InvalidPotentialError):
        P.custom_piecewise([-2.0, 0.0, 2.0], [0.0, 1.0, 0.0])


def test_piecewise_eval_and_flagged_deriv():
    p = P.custom_piecewise([-2.0, -1.0, 0.0, 1.0, 2.0],
                           [1.0, 0.0, 0.5, 0.0, 1.0])
    assert P.potential_eval(p, -1.0) == 0.0
    assert P.potential_eval(p, 0.5) == pytest.approx(0.25)
    val, flag = P.potential_deriv(p, 0.0, return_flag=True)
    assert flag  # kink
    val, flag = P.potential_deriv(p, 0.5, return_flag=True)
    assert not flag and val == pytest.approx(-0.5)


def test_piecewise_growth_constants():
    p = P.custom_piecewise([-2.0, -1.0, 0.0, 1.0, 2.0],
                           [1.0, 0.0, 0.5, 0.0, 1.0])
    gc = P.growth_constants(p)
    s = np.linspace(-5, 5, 5001)
    w = P.potential_eval(p, s)
    assert np.all((np.abs(s) - 1.0) ** 2 <= gc.c_w * w + 1e-9)
    assert gc.m_w > 0.0
