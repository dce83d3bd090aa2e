"""Gain structure of the prediction problem: G, h, conversions."""

from __future__ import annotations

import math

import pytest

from lastzero.levy_model import BrownianDrift, CramerLundberg, JumpDiffusion
from lastzero.stopping_core import (
    GainSpec,
    c0_constant,
    gain,
    h_curve,
    threshold_T,
    u_b_residual,
    u_h_star,
    v0_on_negatives,
    value_conversion,
)

BD = BrownianDrift(0.5, 1.0)
JD = JumpDiffusion(3.0, 1.0, 1.0, 1.0)
CL = CramerLundberg(1.5, 1.0, 1.0)


@pytest.fixture(scope="module")
def specs():
    return {m: GainSpec(m, 2.0) for m in (BD, JD, CL)}


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def test_rejected_model_raises():
    with pytest.raises(ValueError, match="model rejected"):
        GainSpec(BrownianDrift(-0.5, 1.0), 2.0)


def test_bad_exponent_raises():
    with pytest.raises(ValueError):
        GainSpec(BD, 1.0)


# ---------------------------------------------------------------------------
# Sign-change level h and the gain G
# ---------------------------------------------------------------------------


def test_gain_changes_sign_exactly_at_h(specs):
    for spec in specs.values():
        for u in (0.05, 1.0, 5.0):
            h = h_curve(spec, u)
            if h == 0.0:
                continue
            assert gain(spec, u, 0.5 * h) < 0.0
            assert gain(spec, u, h) == pytest.approx(0.0, abs=1e-10)
            assert gain(spec, u, 2.0 * h) > 0.0


def test_h_decreasing_in_the_clock(specs):
    for spec in specs.values():
        values = [h_curve(spec, u) for u in (0.01, 0.1, 1.0, 10.0)]
        assert all(a >= b for a, b in zip(values, values[1:]))


def test_h_inverts_threshold(specs):
    spec = specs[BD]
    for x in (0.3, 1.0, 2.5):
        assert h_curve(spec, float(threshold_T(spec, x))) == pytest.approx(
            x, rel=1e-8
        )


def test_h_frozen_values(specs):
    # T(x) = u^{p-1} pinned against independently derived points.
    assert h_curve(specs[JD], 1.0) == pytest.approx(0.342247, abs=1e-5)
    assert h_curve(specs[BD], 50.0) == pytest.approx(0.079917, abs=1e-5)


def test_h_extinction_clock(specs):
    # Infinite-variation families keep h > 0 forever; finite variation
    # kills it at the finite clock u_h^* with T(0+) = (u_h^*)^{p-1}.
    assert math.isinf(u_h_star(specs[BD]))
    assert math.isinf(u_h_star(specs[JD]))
    star = u_h_star(specs[CL])
    assert star == pytest.approx(24.0, rel=1e-9)
    assert h_curve(specs[CL], star * 1.01) == 0.0
    assert h_curve(specs[CL], star * 0.99) > 0.0


# ---------------------------------------------------------------------------
# Value conversions and the negative half-line
# ---------------------------------------------------------------------------


def test_value_conversion_is_affine(specs):
    # Realised optimal loss: E|tau - g|^p = p * V(0,0) + E_0(g^p).
    spec = specs[BD]
    assert value_conversion(spec, -16.4867) == pytest.approx(
        2.0 * (-16.4867) + 48.0, rel=1e-9
    )
    assert value_conversion(spec, 0.0) == pytest.approx(48.0, rel=1e-6)


def test_v0_on_negatives_anchors_at_origin(specs):
    for spec in specs.values():
        assert v0_on_negatives(spec, 0.0, -3.0) == pytest.approx(-3.0)


def test_v0_on_negatives_decreases_below_zero(specs):
    spec = specs[BD]
    vals = [float(v0_on_negatives(spec, x, -16.4867)) for x in (0.0, -0.5, -1.0, -2.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_jump_overshoot_constant(specs):
    # C0 integrates V(0, .) against the jump measure on (-inf, 0):
    # zero without jumps, strictly negative with them (V < 0 below 0).
    assert c0_constant(specs[BD], -16.4867) == 0.0
    assert c0_constant(specs[JD], -0.5856) < 0.0
    assert c0_constant(specs[CL], -68.0391) < 0.0


def test_extinction_clock_residual_root(specs):
    # For the finite-variation family the boundary extinction clock
    # solves a scalar equation linear in v00: u_b = 3 (36 - v00) at the
    # standard parameters.  The residual changes sign across the root.
    spec = specs[CL]
    v00 = -68.039062
    u_b = 3.0 * (36.0 - v00)
    assert u_b_residual(spec, u_b, v00) == pytest.approx(0.0, abs=1e-9)
    assert u_b_residual(spec, 0.9 * u_b, v00) * u_b_residual(
        spec, 1.1 * u_b, v00
    ) < 0.0
