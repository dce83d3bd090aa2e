"""Scale functions and fluctuation identities against closed forms."""

from __future__ import annotations

import math

import numpy as np
import pytest

from lastzero.levy_model import (
    BrownianDrift,
    CramerLundberg,
    JumpDiffusion,
    phi,
)
from lastzero.scale_kit import (
    ScaleFamily,
    exg_moment,
    g_laplace,
    laplace_transform_check,
    potential_density,
    scale_w,
    scale_w_prime,
    scale_wq,
    scale_zq,
    w_convolution2,
)

BD = BrownianDrift(0.5, 1.0)
JD = JumpDiffusion(3.0, 1.0, 1.0, 1.0)
CL = CramerLundberg(1.5, 1.0, 1.0)


@pytest.fixture(scope="module")
def fams():
    return {m: ScaleFamily(m) for m in (BD, JD, CL)}


# ---------------------------------------------------------------------------
# W and W^{(q)}
# ---------------------------------------------------------------------------


def test_brownian_scale_function_closed_form(fams):
    # BD(0.5, 1): W(x) = (2/ (sigma^2 theta)) (1 - e^{-theta x}) with
    # theta = 2 mu / sigma^2 = 1, i.e. W(x) = 2 (1 - e^{-x}).
    x = np.array([0.0, 0.5, 1.0, 3.0])
    expected = 2.0 * (1.0 - np.exp(-x))
    assert scale_w(fams[BD], x) == pytest.approx(expected, rel=1e-12)
    assert scale_w_prime(fams[BD], 1.0) == pytest.approx(2.0 * math.exp(-1.0))


def test_cramer_lundberg_scale_function_closed_form(fams):
    # CL(1.5, 1, 1): W(x) = 2 - (4/3) e^{-x/3}; atom W(0) = 1/c = 2/3.
    x = np.array([0.0, 1.0, 5.0])
    expected = 2.0 - (4.0 / 3.0) * np.exp(-x / 3.0)
    assert scale_w(fams[CL], x) == pytest.approx(expected, rel=1e-12)
    assert fams[CL].w_at_zero == pytest.approx(2.0 / 3.0)


def test_scale_function_vanishes_on_negatives(fams):
    for fam in fams.values():
        assert scale_w(fam, -0.5) == 0.0


def test_scale_function_mass_and_monotonicity(fams):
    x = np.linspace(0.0, 40.0, 400)
    for model, fam in fams.items():
        w = scale_w(fam, x)
        assert np.all(np.diff(w) >= -1e-12)
        # W(+inf) = 1/psi'(0+).
        assert w[-1] == pytest.approx(fam.mass, rel=1e-4)


@pytest.mark.parametrize("q", [0.0, 1.0])
@pytest.mark.parametrize("model", [BD, JD, CL])
def test_wq_laplace_transform_identity(fams, model, q):
    # integral_0^inf e^{-beta x} W^{(q)}(x) dx = 1/(psi(beta) - q)
    # for beta > Phi(q); checked at Phi(q) + 0.5 and Phi(q) + 2.
    fam = fams[model]
    for offset in (0.5, 2.0):
        beta = phi(model, q) + offset
        numeric, exact = laplace_transform_check(fam, q, beta)
        assert numeric == pytest.approx(exact, abs=1e-6)


def test_wq_reduces_to_w_at_q_zero(fams):
    for fam in fams.values():
        for x in (0.3, 1.0, 4.0):
            assert scale_wq(fam, 0.0, x) == pytest.approx(
                float(scale_w(fam, x)), rel=1e-10
            )


def test_zq_normalisation_and_growth(fams):
    for fam in fams.values():
        assert scale_zq(fam, 1.0, 0.0) == pytest.approx(1.0)
        # Z^{(q)}(x) = 1 + q int_0^x W^{(q)}; increasing in x for q > 0.
        assert scale_zq(fam, 1.0, 2.0) > scale_zq(fam, 1.0, 1.0) > 1.0


# ---------------------------------------------------------------------------
# Law of the last zero g
# ---------------------------------------------------------------------------


def test_g_laplace_at_origin(fams):
    # BD(0.5, 1), q = 1: E_0[e^{-g}] = 1/3 (rational because Phi(1) = 1).
    assert g_laplace(fams[BD], 1.0, 0.0) == pytest.approx(1.0 / 3.0, rel=1e-10)
    # q -> 0 recovers total mass 1.
    for fam in fams.values():
        assert g_laplace(fam, 1e-10, 0.0) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize(
    "model, mean", [(BD, 4.0), (JD, 0.75), (CL, 8.0)]
)
def test_mean_last_zero(fams, model, mean):
    # E_0(g) = -psi'(0+) Phi''(0).
    assert fams[model].e0g == pytest.approx(mean, rel=1e-9)
    assert exg_moment(fams[model], 0.0, 1) == pytest.approx(mean, rel=1e-6)


@pytest.mark.parametrize(
    "model, second", [(BD, 48.0), (JD, 2.4375), (CL, 240.0)]
)
def test_second_moment_last_zero(fams, model, second):
    assert exg_moment(fams[model], 0.0, 2) == pytest.approx(second, rel=1e-3)


def test_moments_increase_from_positive_starts(fams):
    # Started above the origin the last zero can only be stochastically
    # smaller, never larger: E_x(g) decreases in x.
    fam = fams[BD]
    values = [exg_moment(fam, x, 1) for x in (0.0, 0.5, 2.0)]
    assert values[0] > values[1] > values[2] > 0.0


# ---------------------------------------------------------------------------
# Convolution and potential densities
# ---------------------------------------------------------------------------


def test_w_convolution_square_small_argument(fams):
    # (W * W)(x) -> x W(x)^2 / ... is family specific; pin positivity,
    # monotonicity and the quadratic small-x order instead.
    fam = fams[BD]
    small = float(w_convolution2(fam, 1e-3))
    assert 0.0 < small < 1e-4
    assert w_convolution2(fam, 2.0) > w_convolution2(fam, 1.0) > 0.0


def test_halfline_potential_matches_scale_function(fams):
    # Potential of the process killed above level a, evaluated at the
    # diagonal origin: e^{-Phi(q)(a)} W^{(q)}(a) - W^{(q)}(0); at q = 0
    # and x = y = 0 this is exactly W(a) - W(0).
    fam = fams[BD]
    a = 2.0
    value = potential_density(fam, "halfline", 0.0, 0.0, 0.0, a=a)
    assert value == pytest.approx(float(scale_w(fam, a)), rel=1e-12)


def test_free_potential_positive_above(fams):
    fam = fams[BD]
    value = potential_density(fam, "free", 1.0, 0.0, 1.5)
    assert value > 0.0


def test_potential_kind_rejected(fams):
    with pytest.raises(ValueError):
        potential_density(fams[BD], "resolvent", 0.0, 0.0, 0.0, a=1.0)
