"""Spectrally negative Levy models drifting to +infinity.

Three parametric families, each specified through its Laplace exponent
``psi(beta) = log E[exp(beta * X_1)]`` for ``beta >= 0``:

* ``BrownianDrift``:   X_t = mu*t + sigma*B_t,
  psi(beta) = mu*beta + sigma^2 beta^2 / 2.
* ``JumpDiffusion``:   X_t = mu*t + sigma*B_t - sum_{i<=N_t} Y_i,
  psi(beta) = mu*beta + sigma^2 beta^2 / 2 - lam*beta/(rho + beta).
* ``CramerLundberg``:  X_t = c*t - sum_{i<=N_t} Y_i,
  psi(beta) = c*beta - lam*beta/(rho + beta).

Here ``N`` is a Poisson process with rate ``lam`` and the ``Y_i`` are
i.i.d. Exp(rho) downward jumps, independent of everything else.  All
jumps are negative, so the right-inverse ``Phi`` of ``psi`` is well
defined on [0, infinity) and the process drifts to +infinity exactly
when ``psi'(0+) > 0``.

The jump term folds the compensator into the drift analytically: with
finite activity, E[exp(-beta * sum Y_i)] integrates in closed form and
no cutoff convention is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

__all__ = [
    "BrownianDrift",
    "JumpDiffusion",
    "CramerLundberg",
    "LevyModel",
    "ValidationResult",
    "laplace_exponent",
    "psi_prime",
    "psi_derivative",
    "phi",
    "phi_derivatives_at_zero",
    "validate",
    "has_gaussian_part",
    "is_infinite_variation",
    "jump_parameters",
]


@dataclass(frozen=True)
class BrownianDrift:
    """Brownian motion with drift: X_t = mu*t + sigma*B_t.

    Parameters
    ----------
    mu : float
        Drift rate.  Must be positive for the process to drift to
        +infinity (checked by :func:`validate`, not at construction).
    sigma : float
        Volatility, strictly positive.
    """

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not (self.sigma > 0.0) or not math.isfinite(self.sigma):
            raise ValueError(f"sigma must be a positive real, got {self.sigma!r}")
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu!r}")


@dataclass(frozen=True)
class JumpDiffusion:
    """Brownian motion with drift and downward exponential jumps.

    Parameters
    ----------
    mu : float
        Drift rate of the continuous part.
    sigma : float
        Volatility, strictly positive.
    lam : float
        Poisson jump intensity, strictly positive.
    rho : float
        Rate of the Exp(rho) jump sizes, strictly positive.
    """

    mu: float
    sigma: float
    lam: float
    rho: float

    def __post_init__(self) -> None:
        if not (self.sigma > 0.0) or not math.isfinite(self.sigma):
            raise ValueError(f"sigma must be a positive real, got {self.sigma!r}")
        if not (self.lam > 0.0) or not math.isfinite(self.lam):
            raise ValueError(f"lam must be a positive real, got {self.lam!r}")
        if not (self.rho > 0.0) or not math.isfinite(self.rho):
            raise ValueError(f"rho must be a positive real, got {self.rho!r}")
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu!r}")


@dataclass(frozen=True)
class CramerLundberg:
    """Cramer-Lundberg risk process: X_t = c*t - compound Poisson.

    Finite variation: upward linear drift ``c`` interrupted by downward
    Exp(rho) jumps arriving at rate ``lam``.

    Parameters
    ----------
    c : float
        Premium (drift) rate, strictly positive.
    lam : float
        Poisson jump intensity, strictly positive.
    rho : float
        Rate of the Exp(rho) jump sizes, strictly positive.
    """

    c: float
    lam: float
    rho: float

    def __post_init__(self) -> None:
        if not (self.c > 0.0) or not math.isfinite(self.c):
            raise ValueError(f"c must be a positive real, got {self.c!r}")
        if not (self.lam > 0.0) or not math.isfinite(self.lam):
            raise ValueError(f"lam must be a positive real, got {self.lam!r}")
        if not (self.rho > 0.0) or not math.isfinite(self.rho):
            raise ValueError(f"rho must be a positive real, got {self.rho!r}")


LevyModel = Union[BrownianDrift, JumpDiffusion, CramerLundberg]


@dataclass(frozen=True)
class ValidationResult:
    """Outcome of :func:`validate`: acceptance flag plus a reason string."""

    accepted: bool
    reason: str


# ---------------------------------------------------------------------------
# Structural queries
# ---------------------------------------------------------------------------


def has_gaussian_part(model: LevyModel) -> bool:
    """True when the model carries a Brownian component (sigma > 0)."""
    return isinstance(model, (BrownianDrift, JumpDiffusion))


def is_infinite_variation(model: LevyModel) -> bool:
    """True when paths have infinite variation (equivalently sigma > 0 here)."""
    return has_gaussian_part(model)


def jump_parameters(model: LevyModel) -> tuple[float, float]:
    """Return ``(lam, rho)`` of the exponential jump component, (0, nan) if none."""
    if isinstance(model, (JumpDiffusion, CramerLundberg)):
        return model.lam, model.rho
    return 0.0, math.nan


def _gaussian_coefficients(model: LevyModel) -> tuple[float, float]:
    """Return ``(drift, sigma)`` of the continuous part; sigma = 0 for CL."""
    if isinstance(model, BrownianDrift):
        return model.mu, model.sigma
    if isinstance(model, JumpDiffusion):
        return model.mu, model.sigma
    return model.c, 0.0


# ---------------------------------------------------------------------------
# Laplace exponent and derivatives
# ---------------------------------------------------------------------------


def laplace_exponent(model: LevyModel, beta: float) -> float:
    """Evaluate psi(beta) = log E[exp(beta X_1)] for beta > -rho (all beta for BD)."""
    mu, sigma = _gaussian_coefficients(model)
    lam, rho = jump_parameters(model)
    value = mu * beta + 0.5 * sigma * sigma * beta * beta
    if lam > 0.0:
        if beta == -rho:
            raise ValueError("laplace exponent has a pole at beta = -rho")
        value -= lam * beta / (rho + beta)
    return value


def psi_derivative(model: LevyModel, beta: float, order: int = 1) -> float:
    """Evaluate the ``order``-th derivative of psi at ``beta`` (order in 1..4).

    Closed forms: the jump part ``-lam*beta/(rho+beta)`` differentiates to
    ``-lam*rho/(rho+beta)^2``, then alternating factorial powers.
    """
    if order not in (1, 2, 3, 4):
        raise ValueError(f"order must be in 1..4, got {order}")
    mu, sigma = _gaussian_coefficients(model)
    lam, rho = jump_parameters(model)
    if order == 1:
        value = mu + sigma * sigma * beta
    elif order == 2:
        value = sigma * sigma
    else:
        value = 0.0
    if lam > 0.0:
        if beta == -rho:
            raise ValueError("laplace exponent has a pole at beta = -rho")
        s = rho + beta
        if order == 1:
            value -= lam * rho / s**2
        elif order == 2:
            value += 2.0 * lam * rho / s**3
        elif order == 3:
            value -= 6.0 * lam * rho / s**4
        else:
            value += 24.0 * lam * rho / s**5
    return value


def psi_prime(model: LevyModel, beta: float) -> float:
    """Evaluate psi'(beta); ``psi_prime(model, 0.0)`` is the long-run drift."""
    return psi_derivative(model, beta, order=1)


# ---------------------------------------------------------------------------
# Right inverse Phi
# ---------------------------------------------------------------------------


def phi(model: LevyModel, q: float) -> float:
    """Largest solution beta >= 0 of psi(beta) = q, for q >= 0.

    psi is strictly convex and increasing on [0, inf) when the process
    drifts to +infinity, so the root is unique there.  Solved by a
    safeguarded Newton iteration inside a bracket grown geometrically
    until it straddles the root.
    """
    if q < 0.0:
        raise ValueError(f"q must be nonnegative, got {q}")
    drift = psi_prime(model, 0.0)
    if drift <= 0.0:
        raise ValueError(
            f"model does not drift to +infinity (psi'(0+) = {drift:.6g}); "
            "run validate() first"
        )
    if q == 0.0:
        return 0.0
    lo = 0.0
    hi = max(q / drift, 1.0)
    while laplace_exponent(model, hi) < q:
        lo = hi
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("bracket growth failed for phi(q)")
    beta = 0.5 * (lo + hi)
    for _ in range(100):
        f = laplace_exponent(model, beta) - q
        if f > 0.0:
            hi = beta
        else:
            lo = beta
        step = f / psi_prime(model, beta)
        candidate = beta - step
        if not (lo < candidate < hi):
            candidate = 0.5 * (lo + hi)
        if abs(candidate - beta) <= 1e-15 * max(1.0, abs(beta)):
            beta = candidate
            break
        beta = candidate
    return beta


def phi_derivatives_at_zero(model: LevyModel) -> tuple[float, float]:
    """Return (Phi'(0+), Phi''(0+)) by implicit differentiation of psi(Phi(q)) = q.

    Phi'(0) = 1/psi'(0+) and Phi''(0) = -psi''(0+)/psi'(0+)^3.
    """
    d1 = psi_derivative(model, 0.0, 1)
    if d1 <= 0.0:
        raise ValueError(
            f"model does not drift to +infinity (psi'(0+) = {d1:.6g})"
        )
    d2 = psi_derivative(model, 0.0, 2)
    return 1.0 / d1, -d2 / d1**3


def _phi_third_at_zero(model: LevyModel) -> float:
    """Phi'''(0+) = (3 psi''^2 - psi' psi''') / psi'^5 at beta = 0."""
    d1 = psi_derivative(model, 0.0, 1)
    d2 = psi_derivative(model, 0.0, 2)
    d3 = psi_derivative(model, 0.0, 3)
    return (3.0 * d2 * d2 - d1 * d3) / d1**5


def _phi_fourth_at_zero(model: LevyModel) -> float:
    """Phi''''(0+) = (10 psi' psi'' psi''' - psi'^2 psi'''' - 15 psi''^3) / psi'^7."""
    d1 = psi_derivative(model, 0.0, 1)
    d2 = psi_derivative(model, 0.0, 2)
    d3 = psi_derivative(model, 0.0, 3)
    d4 = psi_derivative(model, 0.0, 4)
    return (10.0 * d1 * d2 * d3 - d1 * d1 * d4 - 15.0 * d2**3) / d1**7


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate(model: LevyModel, p: float = 2.0) -> ValidationResult:
    """Check the standing assumptions for prediction exponent ``p``.

    Accepts iff the process drifts to +infinity (psi'(0+) > 0) and the
    jump measure integrates |y|^(p+1) on (-inf, -1).  Exponential jump
    tails satisfy the moment clause for every p, so the second check
    can only fail through a non-finite ``p``.
    """
    if not math.isfinite(p) or p <= 1.0:
        return ValidationResult(False, f"prediction exponent must satisfy p > 1, got {p!r}")
    drift = psi_prime(model, 0.0)
    if drift <= 0.0:
        if isinstance(model, BrownianDrift):
            detail = f"mu = {model.mu:.6g} <= 0"
        elif isinstance(model, JumpDiffusion):
            detail = (
                f"mu*rho = {model.mu * model.rho:.6g} does not exceed lam = {model.lam:.6g}"
            )
        else:
            detail = (
                f"c*rho = {model.c * model.rho:.6g} does not exceed lam = {model.lam:.6g}"
            )
        return ValidationResult(
            False,
            f"does not drift to +infinity: psi'(0+) = {drift:.6g} ({detail})",
        )
    lam, rho = jump_parameters(model)
    if lam > 0.0:
        # Exponential tails: integral_(-inf,-1) |y|^(p+1) lam rho e^(rho y) dy
        # is finite for every finite p; record the clause explicitly.
        reason = (
            f"drifts to +infinity (psi'(0+) = {drift:.6g}); exponential jump tails "
            f"integrate |y|^{p + 1:g} on (-inf, -1)"
        )
    else:
        reason = f"drifts to +infinity (psi'(0+) = {drift:.6g}); no jump component"
    return ValidationResult(True, reason)
