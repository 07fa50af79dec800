"""Double-well potentials and their growth constants.

A potential W is continuous, nonnegative, and vanishes exactly at the
pure phases -1 and +1.  The quartic well W(s) = scale * (s^2 - 1)^2 is
the workhorse; custom piecewise-linear wells exist to probe the merely
continuous case.  growth_constants extracts the constants used by the
inequality checks elsewhere:

  c_w     : (|s| - 1)^2 <= c_w W(s) everywhere
  a_w     : W monotone on [1 - a_w, 1] and [-1, -1 + a_w]
  m_w     : min of W where ||s| - 1| >= 1/2
  hat_c_w : 2 c_w + 4 / m_w, giving (s -+ 1)^2 <= hat_c_w W(s) away from
            the opposite well
  big_m_w : max of W on [-1, 1], attained again at some s0 < -1
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidPotentialError, ParameterError

__all__ = [
    "Potential",
    "GrowthConstants",
    "quartic",
    "custom_piecewise",
    "potential_eval",
    "potential_deriv",
    "growth_constants",
]


@dataclass(frozen=True)
class Potential:
    """Immutable double-well potential."""

    variant: str
    scale: float = 1.0
    knots: tuple = ()
    knot_values: tuple = ()

    def __post_init__(self):
        if self.variant == "quartic":
            if self.scale <= 0.0:
                raise ParameterError(f"scale must be positive, got {self.scale}")
        elif self.variant == "custom_piecewise":
            k = np.asarray(self.knots, dtype=float)
            v = np.asarray(self.knot_values, dtype=float)
            if k.size < 2 or k.size != v.size or np.any(np.diff(k) <= 0):
                raise InvalidPotentialError("knots must be strictly increasing")
            if np.any(v < 0.0):
                raise InvalidPotentialError("potential values must be nonnegative")
            zeros = k[v == 0.0]
            if set(np.round(zeros, 12)) != {-1.0, 1.0}:
                raise InvalidPotentialError("well must vanish exactly at -1 and 1")
        else:
            raise ParameterError(f"unknown potential variant {self.variant!r}")

    def __call__(self, s):
        return potential_eval(self, s)


def quartic(scale: float = 1.0) -> Potential:
    return Potential("quartic", scale=scale)


def custom_piecewise(knots, values) -> Potential:
    """Piecewise-linear well through (knots, values).  Outside the knot
    range it grows quadratically on top of the edge slope, keeping the
    coercivity bound (|s|-1)^2 <= c W(s) valid on all of R."""
    return Potential(
        "custom_piecewise",
        knots=tuple(float(k) for k in knots),
        knot_values=tuple(float(v) for v in values),
    )


def potential_eval(p: Potential, s):
    """W(s); vectorized."""
    s = np.asarray(s, dtype=float)
    if p.variant == "quartic":
        out = p.scale * (s * s - 1.0) ** 2
    else:
        k = np.asarray(p.knots)
        v = np.asarray(p.knot_values)
        dl = k[0] - s
        dr = s - k[-1]
        left = v[0] + max((v[0] - v[1]) / (k[1] - k[0]), 0.0) * dl + dl * dl
        right = v[-1] + max((v[-1] - v[-2]) / (k[-1] - k[-2]), 0.0) * dr + dr * dr
        out = np.interp(s, k, v)
        out = np.where(s < k[0], left, out)
        out = np.where(s > k[-1], right, out)
        out = np.maximum(out, 0.0)
    return out if out.ndim else float(out)


def potential_deriv(p: Potential, s, return_flag: bool = False):
    """W'(s); matches central differences of potential_eval.

    Piecewise wells are not differentiable at knots; there the right
    derivative is returned and, with return_flag, a one-sided marker.
    """
    s = np.asarray(s, dtype=float)
    if p.variant == "quartic":
        out = p.scale * 4.0 * s * (s * s - 1.0)
        flag = np.zeros_like(out, dtype=bool)
    else:
        k = np.asarray(p.knots)
        v = np.asarray(p.knot_values)
        slopes = np.diff(v) / np.diff(k)
        idx = np.clip(np.searchsorted(k, s, side="right") - 1, 0, slopes.size - 1)
        out = np.asarray(slopes[idx], dtype=float)
        sl_l = max((v[0] - v[1]) / (k[1] - k[0]), 0.0)
        sl_r = max((v[-1] - v[-2]) / (k[-1] - k[-2]), 0.0)
        out = np.where(s < k[0], -(sl_l + 2.0 * (k[0] - s)), out)
        out = np.where(s > k[-1], sl_r + 2.0 * (s - k[-1]), out)
        # Right derivative at interior knots; flag them as one-sided.
        flag = np.isin(s, k[1:-1])
    if not out.ndim:
        out = float(out)
        flag = bool(flag)
    if return_flag:
        return out, flag
    return out


@dataclass(frozen=True)
class GrowthConstants:
    c_w: float
    a_w: float
    m_w: float
    hat_c_w: float
    big_m_w: float
    s0: float


def growth_constants(
    p: Potential, scan_range: float = 5.0, scan_points: int = 100_001
) -> GrowthConstants:
    """Extract growth constants by dense scan on [-scan_range, scan_range].

    c_w carries a 1.1 safety factor on the scanned supremum (these
    constants feed inequality checks, not the energy).  Beyond the scan
    range W grows at least quadratically for both variants, so the scan
    captures the suprema.
    """
    s = np.linspace(-scan_range, scan_range, scan_points)
    # Make sure the exact corner points of each piecewise bound are hit.
    s = np.union1d(s, [-1.5, -0.5, 0.5, 1.5, -1.0, 1.0, 0.0])
    w = potential_eval(p, s)

    mask = w > 1e-12
    ratios = (np.abs(s[mask]) - 1.0) ** 2 / w[mask]
    sup = float(ratios.max())
    if not np.isfinite(sup) or sup <= 0.0:
        raise InvalidPotentialError("coercivity bound (|s|-1)^2 <= c W(s) fails")
    # Check there is no blow-up hiding at the scan edge.
    edge = (abs(s[-1]) - 1.0) ** 2 / potential_eval(p, s[-1])
    if edge > sup:
        raise InvalidPotentialError("coercivity ratio still growing at scan edge")
    c_w = 1.1 * sup

    outer = np.abs(np.abs(s) - 1.0) >= 0.5
    m_w = float(w[outer].min())
    if m_w <= 0.0:
        raise InvalidPotentialError("well vanishes away from the pure phases")
    hat_c_w = 2.0 * c_w + 4.0 / m_w

    inner = np.abs(s) <= 1.0
    big_m_w = float(w[inner].max())

    # s0 < -1 with W(s0) = max over [-1, 1]; W decreases toward -1 there.
    lo, hi = -scan_range, -1.0
    if potential_eval(p, lo) < big_m_w:
        raise InvalidPotentialError("potential too shallow left of the well")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if potential_eval(p, mid) > big_m_w:
            lo = mid
        else:
            hi = mid
    s0 = 0.5 * (lo + hi)

    if p.variant == "quartic":
        a_w = 0.999  # W' = 4s(s^2-1) keeps one sign on (0, 1)
    else:
        # Largest a with W nonincreasing on [1-a, 1] and mirrored on the
        # left well, found by direct scan.
        a_w = 0.0
        for cand in np.linspace(0.999, 0.001, 500):
            right = potential_eval(p, np.linspace(1.0 - cand, 1.0, 256))
            left = potential_eval(p, np.linspace(-1.0, -1.0 + cand, 256))
            if np.all(np.diff(right) <= 1e-12) and np.all(np.diff(left) >= -1e-12):
                a_w = float(cand)
                break
        if a_w == 0.0:
            raise InvalidPotentialError("no monotone approach to the wells")

    return GrowthConstants(
        c_w=c_w, a_w=a_w, m_w=m_w, hat_c_w=hat_c_w, big_m_w=big_m_w, s0=s0
    )
