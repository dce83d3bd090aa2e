"""Model definitions: Laplace exponents, right inverse, validation."""

from __future__ import annotations

import math

import pytest

from lastzero.levy_model import (
    BrownianDrift,
    CramerLundberg,
    JumpDiffusion,
    has_gaussian_part,
    is_infinite_variation,
    jump_parameters,
    laplace_exponent,
    phi,
    phi_derivatives_at_zero,
    psi_derivative,
    psi_prime,
    validate,
)

BD = BrownianDrift(0.5, 1.0)
JD = JumpDiffusion(3.0, 1.0, 1.0, 1.0)
CL = CramerLundberg(1.5, 1.0, 1.0)


# ---------------------------------------------------------------------------
# Construction and parameter validation
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "builder",
    [
        lambda: BrownianDrift(0.5, 0.0),
        lambda: BrownianDrift(0.5, -1.0),
        lambda: JumpDiffusion(3.0, 0.0, 1.0, 1.0),
        lambda: JumpDiffusion(3.0, 1.0, -1.0, 1.0),
        lambda: JumpDiffusion(3.0, 1.0, 1.0, 0.0),
        lambda: CramerLundberg(0.0, 1.0, 1.0),
        lambda: CramerLundberg(1.5, 0.0, 1.0),
        lambda: CramerLundberg(1.5, 1.0, -2.0),
    ],
)
def test_invalid_parameters_raise(builder):
    with pytest.raises(ValueError):
        builder()


def test_models_are_frozen():
    with pytest.raises(Exception):
        BD.mu = 1.0  # type: ignore[misc]


# ---------------------------------------------------------------------------
# Laplace exponent psi and its derivatives
# ---------------------------------------------------------------------------


def test_laplace_exponent_closed_forms():
    # BD: psi(beta) = mu beta + sigma^2 beta^2 / 2.
    assert laplace_exponent(BD, 1.0) == pytest.approx(0.5 + 0.5)
    # JD: adds lam * (rho/(rho+beta) - 1) = -lam beta/(rho+beta).
    beta = 2.0
    expected = 3.0 * beta + 0.5 * beta**2 - beta / (1.0 + beta)
    assert laplace_exponent(JD, beta) == pytest.approx(expected)
    # CL: c beta - lam beta/(rho+beta), no Gaussian part.
    expected = 1.5 * beta - beta / (1.0 + beta)
    assert laplace_exponent(CL, beta) == pytest.approx(expected)


def test_psi_vanishes_at_zero():
    for model in (BD, JD, CL):
        assert laplace_exponent(model, 0.0) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize(
    "model, drift", [(BD, 0.5), (JD, 2.0), (CL, 0.5)]
)
def test_long_run_drift(model, drift):
    # psi'(0+) = mu - lam/rho for the jump families.
    assert psi_prime(model, 0.0) == pytest.approx(drift)


@pytest.mark.parametrize("model", [BD, JD, CL])
@pytest.mark.parametrize("beta", [0.0, 0.3, 1.7])
def test_psi_derivatives_match_finite_differences(model, beta):
    eps = 1e-5
    fd1 = (
        laplace_exponent(model, beta + eps) - laplace_exponent(model, max(beta - eps, 0.0))
    ) / (eps + min(beta, eps))
    assert psi_prime(model, beta) == pytest.approx(fd1, rel=1e-4)
    fd2 = (
        psi_prime(model, beta + eps) - psi_prime(model, max(beta - eps, 0.0))
    ) / (eps + min(beta, eps))
    assert psi_derivative(model, beta, 2) == pytest.approx(fd2, rel=1e-4)


# ---------------------------------------------------------------------------
# Right inverse Phi
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("model", [BD, JD, CL])
@pytest.mark.parametrize("q", [0.0, 0.5, 1.0, 4.0])
def test_phi_is_right_inverse(model, q):
    root = phi(model, q)
    assert root >= 0.0
    assert laplace_exponent(model, root) == pytest.approx(q, abs=1e-10)


def test_phi_zero_is_zero_for_drifting_models():
    for model in (BD, JD, CL):
        assert phi(model, 0.0) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize(
    "model, d1, d2",
    [
        # Phi'(0) = 1/psi'(0+); Phi''(0) = -psi''(0+)/psi'(0+)^3.
        (BD, 2.0, -8.0),
        (JD, 0.5, -0.375),
        (CL, 2.0, -16.0),
    ],
)
def test_phi_derivatives_at_zero(model, d1, d2):
    phi1, phi2 = phi_derivatives_at_zero(model)
    assert phi1 == pytest.approx(d1, rel=1e-9)
    assert phi2 == pytest.approx(d2, rel=1e-9)


# ---------------------------------------------------------------------------
# Path-class predicates and jump data
# ---------------------------------------------------------------------------


def test_variation_classes():
    assert has_gaussian_part(BD) and has_gaussian_part(JD)
    assert not has_gaussian_part(CL)
    assert is_infinite_variation(BD) and is_infinite_variation(JD)
    assert not is_infinite_variation(CL)


def test_jump_parameters():
    lam, rho = jump_parameters(BD)
    assert lam == 0.0 and math.isnan(rho)
    assert jump_parameters(JD) == (1.0, 1.0)
    assert jump_parameters(CL) == (1.0, 1.0)


# ---------------------------------------------------------------------------
# Standing-assumption validation
# ---------------------------------------------------------------------------


def test_standard_models_accepted():
    for model in (BD, JD, CL):
        verdict = validate(model, p=2.0)
        assert verdict.accepted, verdict.reason
        assert "drifts to +infinity" in verdict.reason


@pytest.mark.parametrize(
    "model",
    [
        BrownianDrift(-0.5, 1.0),
        BrownianDrift(0.0, 1.0),
        JumpDiffusion(1.0, 1.0, 2.0, 1.0),  # mu*rho = 1 < lam = 2
        CramerLundberg(1.0, 2.0, 1.0),  # c*rho = 1 < lam = 2
    ],
)
def test_non_drifting_models_rejected(model):
    verdict = validate(model, p=2.0)
    assert not verdict.accepted
    assert "drift" in verdict.reason


def test_bad_exponent_rejected():
    verdict = validate(BD, p=1.0)
    assert not verdict.accepted
    assert "p > 1" in verdict.reason
