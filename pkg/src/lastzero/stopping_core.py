"""Reduction of last-zero prediction to an excursion-clock stopping problem.

Minimising E|tau - g|^p over stopping times is equivalent, after the
pathwise identity |tau - g|^p = g^p + p int_0^tau |s - g|^{p-1} sgn(s - g) ds,
to minimising E int_0^tau G(U_s, X_s) ds, where U is the excursion clock
(time elapsed since the process was last at or below zero) and

    G(u, x) = u^{p-1} psi'(0+) W(x) - E_x(g^{p-1}).

The conditional expectation uses only that {g <= s} = {the process never
returns below zero}, an event of probability psi'(0+) W(x) given X_s = x.
The normalised value V = inf_tau E int_0^tau G relates back through
E|tau - g|^p = p V + E(g^p).

This module owns the gain, the sign-change threshold curve h (below which
stopping can never be optimal), the map between normalised and raw
prediction losses, and the closed/quadrature forms of the value on the
negative half-line where the clock is frozen at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .levy_model import (
    CramerLundberg,
    LevyModel,
    is_infinite_variation,
    jump_parameters,
    validate,
)
from .scale_kit import ScaleFamily, UnsupportedMomentError, exg_moment, g_pth_moment

__all__ = [
    "GainSpec",
    "gain",
    "threshold_T",
    "h_curve",
    "u_h_star",
    "value_conversion",
    "v0_on_negatives",
    "c0_constant",
    "u_b_residual",
]


@dataclass(frozen=True)
class GainSpec:
    """Prediction problem: model plus the loss exponent p > 1.

    Bundles the validated model with its scale-function data; all
    stopping-layer operations take a ``GainSpec`` so the moment order
    p - 1 travels with the model.
    """

    model: LevyModel
    p: float = 2.0
    fam: ScaleFamily = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        result = validate(self.model, self.p)
        if not result.accepted:
            raise ValueError(f"model rejected: {result.reason}")
        object.__setattr__(self, "fam", ScaleFamily(self.model))

    @property
    def moment_order(self) -> float:
        """Order p - 1 of the conditional moment inside the gain."""
        return self.p - 1.0


def _exg_pm1(spec: GainSpec, x) -> np.ndarray:
    """E_x(g^{p-1}) vectorised; closed for p = 2, stencil route for p = 3."""
    r = spec.moment_order
    if r == 1.0:
        return spec.fam.exg1(x)
    if r == 2.0:
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        return np.array([exg_moment(spec.fam, float(xi), 2) for xi in xa])
    raise UnsupportedMomentError(
        f"gain needs E_x(g^{{p-1}}) with p - 1 = {r}; only p in {{2, 3}} supported"
    )


def gain(spec: GainSpec, u: float, x) -> float | np.ndarray:
    """Excursion-clock gain G(u, x) = u^{p-1} psi'(0+) W(x) - E_x(g^{p-1}).

    Negative everywhere for x <= 0; changes sign in x exactly once on
    (0, inf) once u > 0, at the threshold curve level.
    """
    if u < 0.0:
        raise ValueError(f"clock value u must be nonnegative, got {u}")
    xa = np.asarray(x, dtype=float)
    out = u**spec.moment_order * spec.fam.psi_prime0 * spec.fam.w(xa) - _exg_pm1(
        spec, xa
    )
    if np.isscalar(x) or getattr(x, "ndim", 1) == 0:
        return float(np.asarray(out).reshape(-1)[0])
    return out


def threshold_T(spec: GainSpec, x) -> float | np.ndarray:
    """T(x) = E_x(g^{p-1}) / (psi'(0+) W(x)), the clock level (to power p-1)
    at which the gain changes sign at x.

    Defined for x > 0, and at x = 0 too when W has an atom there
    (finite-variation models).  Strictly decreasing to 0.
    """
    xa = np.asarray(x, dtype=float)
    watom = spec.fam.w_at_zero
    bad = (xa < 0.0) | ((xa == 0.0) & (watom == 0.0))
    if np.any(bad):
        raise ValueError(f"threshold curve needs x > 0 (x >= 0 with an atom), got {x}")
    out = _exg_pm1(spec, xa) / (spec.fam.psi_prime0 * spec.fam.w(xa))
    if np.isscalar(x) or getattr(x, "ndim", 1) == 0:
        return float(np.asarray(out).reshape(-1)[0])
    return out


def u_h_star(spec: GainSpec) -> float:
    """Clock level above which even x = 0+ has positive gain.

    Equals (E(g^{p-1}) / (psi'(0+) W(0)))^{1/(p-1)}; infinite for models
    of infinite variation, where W(0) = 0.
    """
    if spec.fam.w_at_zero == 0.0:
        return math.inf
    t0 = float(np.asarray(_exg_pm1(spec, 0.0)).reshape(-1)[0])
    return (t0 / (spec.fam.psi_prime0 * spec.fam.w_at_zero)) ** (
        1.0 / spec.moment_order
    )


def h_curve(spec: GainSpec, u: float) -> float:
    """Sign-change level h(u): the unique x > 0 with T(x) = u^{p-1}.

    Non-increasing in u; equals 0 for u >= u_h^* under finite variation.
    Stopping strictly below h(u) is never optimal, so h lower-bounds any
    admissible stopping boundary.
    """
    if u <= 0.0:
        raise ValueError(f"h is defined for clock values u > 0, got {u}")
    target = u**spec.moment_order

    def f(x: float) -> float:
        return float(threshold_T(spec, x)) - target

    lo = 1e-12
    if f(lo) <= 0.0:
        # Finite-variation models: T(0+) is finite and already below the
        # target once u >= u_h^*, where the curve sits at zero.
        return 0.0
    hi = 1.0
    for _ in range(200):
        if f(hi) < 0.0:
            break
        hi *= 2.0
    else:  # pragma: no cover - T decays to zero, so a bracket always exists
        raise RuntimeError("failed to bracket the threshold-curve inverse")
    return float(brentq(f, lo, hi, xtol=1e-12, rtol=1e-14))


def value_conversion(spec: GainSpec, v) -> float | np.ndarray:
    """Map a normalised value V to the raw prediction loss p V + E(g^p)."""
    if spec.p == 2.0:
        moment = g_pth_moment(spec.fam, 2)
    elif spec.p == 3.0:
        moment = g_pth_moment(spec.fam, 3)
    else:
        raise UnsupportedMomentError(
            f"closed E(g^p) available for p in {{2, 3}}, got p = {spec.p}"
        )
    out = spec.p * np.asarray(v, dtype=float) + moment
    if np.isscalar(v) or getattr(v, "ndim", 1) == 0:
        return float(np.asarray(out).reshape(-1)[0])
    return out


# ---------------------------------------------------------------------------
# Value on the negative half-line
# ---------------------------------------------------------------------------


def _q_negative_closed_coefficients(spec: GainSpec) -> tuple[float, float]:
    """Coefficients (c1, c2) with V(0, x) - V(0, 0) = c1 x + c2 x^2 for x <= 0.

    Quadratic-loss case only.  Integrating -E_y(g) against the occupation
    density of the process killed on first passage above zero gives an
    exact quadratic in the starting point:
        c1 = E(g) M0 + M1 / psi'(0+),    c2 = -M0 / (2 psi'(0+)),
    where M0, M1 are the mass and first moment of the measure W(du).
    """
    fam = spec.fam
    c1 = fam.e0g * fam.mass + fam.m1 / fam.psi_prime0
    c2 = -fam.mass / (2.0 * fam.psi_prime0)
    return c1, c2


def _q_negative_quadrature(spec: GainSpec, x: float) -> float:
    """V(0, x) - V(0, 0) for x <= 0 by occupation-density quadrature.

    Q(x) = - int_0^inf [W(z) - W(z + x)] E_{-z}(g^{p-1}) dz, the kernel
    being the potential density of the process killed on first passage
    above zero.  Split at the kink z = -x; exponential tail truncated
    where the surviving scale-function modes fall below 1e-13.
    """
    if x == 0.0:
        return 0.0
    fam = spec.fam
    decay = float(np.max(fam.thetas[fam.thetas < 0.0]))  # slowest negative mode
    z_star = -x + 60.0 / abs(decay)
    nodes1, weights1 = np.polynomial.legendre.leggauss(48)
    total = 0.0
    for a, b in (((0.0, -x)), ((-x, z_star))):
        zz = 0.5 * (b - a) * nodes1 + 0.5 * (a + b)
        ww = 0.5 * (b - a) * weights1
        kern = fam.w(zz) - fam.w(zz + x)
        moments = np.asarray(_exg_pm1(spec, -zz), dtype=float)
        total += float(np.sum(ww * kern * moments))
    return -total


def v0_on_negatives(
    spec: GainSpec, x, v00: float = 0.0, *, method: str = "auto"
) -> float | np.ndarray:
    """Value V(0, x) for x <= 0, as v00 plus the start-below-zero premium.

    The excursion clock is frozen at zero below the axis, and the process
    creeps upward, so V(0, x) = V(0, 0) + Q(x) with Q the integral of
    -E_y(g^{p-1}) against the upward-passage occupation density.  Closed
    quadratic for p = 2 (``method="closed"``); direct quadrature for any
    supported p (``method="quadrature"``); ``"auto"`` prefers closed.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa > 0.0):
        raise ValueError(f"negative-half-line value needs x <= 0, got {x}")
    if method not in ("auto", "closed", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    use_closed = spec.p == 2.0 and method in ("auto", "closed")
    if method == "closed" and spec.p != 2.0:
        raise UnsupportedMomentError("closed negative-half-line value needs p = 2")
    if use_closed:
        c1, c2 = _q_negative_closed_coefficients(spec)
        out = v00 + c1 * xa + c2 * xa * xa
    else:
        flat = np.atleast_1d(xa)
        out = v00 + np.array([_q_negative_quadrature(spec, float(xi)) for xi in flat])
        out = out.reshape(xa.shape)
    if np.isscalar(x) or getattr(x, "ndim", 1) == 0:
        return float(np.asarray(out).reshape(-1)[0])
    return out


def c0_constant(spec: GainSpec, v00: float) -> float:
    """Jump-overshoot constant C0 = int_{(-inf,0)} V(0, y) Pi(dy).

    For the exponential jump measure Pi(dy) = lam rho e^{rho y} dy (y < 0)
    this is lam [v00 - c1/rho + 2 c2/rho^2] for p = 2, and a quadrature
    against the negative-half-line value otherwise.  Zero when the model
    has no jumps.  Appears wherever a jump can overshoot zero: the value
    of landing at z + y < 0 integrates to C0 e^{-rho z}.
    """
    lam, rho = jump_parameters(spec.model)
    if lam == 0.0:
        return 0.0
    if spec.p == 2.0:
        c1, c2 = _q_negative_closed_coefficients(spec)
        # int_{-inf}^0 rho e^{rho y} (v00 + c1 y + c2 y^2) dy
        return lam * (v00 - c1 / rho + 2.0 * c2 / rho**2)
    nodes, weights = np.polynomial.legendre.leggauss(64)
    y_max = 60.0 / rho
    yy = -0.5 * y_max * (nodes + 1.0)  # map to (-y_max, 0)
    ww = 0.5 * y_max * weights
    vals = np.array([_q_negative_quadrature(spec, float(y)) for y in yy]) + v00
    return float(lam * np.sum(ww * rho * np.exp(rho * yy) * vals))


def u_b_residual(spec: GainSpec, u: float, v00: float) -> float:
    """Residual of the boundary-extinction equation G(u, 0) + C0(v00).

    For finite-variation models its root in u is the clock level u_b at
    which the stopping boundary reaches zero; beyond it, stopping is
    immediate on the axis.  For infinite variation W(0) = 0 kills the
    first term's u-dependence and the residual stays negative for every
    u — the boundary never touches zero and u_b = +inf.
    """
    if u < 0.0:
        raise ValueError(f"clock value u must be nonnegative, got {u}")
    g0 = u**spec.moment_order * spec.fam.psi_prime0 * spec.fam.w_at_zero - float(
        np.asarray(_exg_pm1(spec, 0.0)).reshape(-1)[0]
    )
    return g0 + c0_constant(spec, v00)
