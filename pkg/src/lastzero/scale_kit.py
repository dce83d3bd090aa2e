"""Scale functions and last-zero distributional formulas.

For each model the q-scale function has an exponential-sum form obtained
by partial fractions of the Laplace transform

    integral_0^inf exp(-beta x) W^(q)(x) dx = 1 / (psi(beta) - q),

valid here because psi(beta) - q has simple real zeros for every q >= 0
in all three families (quadratic for Brownian-with-drift, cubic for the
jump diffusion after clearing the pole at -rho, quadratic for
Cramer-Lundberg).  W^(q)(x) = sum_i exp(beta_i x) / psi'(beta_i).

An independent route — the convolution series
W^(q) = sum_k q^k W^{*(k+1)} with exact symbolic convolutions of
exponential polynomials — is kept alongside as a cross-check and as the
fallback contract for parameter corners where partial fractions would
degenerate.

Everything about the last zero

    g = sup { t >= 0 : X_t <= 0 }

reduces to scale-function expressions:

* Laplace transform:  E_x(exp(-q g)) = exp(Phi(q) x) Phi'(q) psi'(0+)
  + psi'(0+) (W(x) - W^(q)(x)),
* distribution:       P_x(g <= t) = E_x[psi'(0+) W(X_t)], with an atom
  psi'(0+) W(x) at zero,
* first moment:       E_x(g) = -psi'(0+)[Phi''(0) + x Phi'(0)^2]
  + psi'(0+) W^{*2}(x),
* higher moments at the origin: E(g^p) = (-1)^p psi'(0+) Phi^(p+1)(0).
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np
from scipy import integrate
from scipy.special import log_ndtr, ndtr

from .levy_model import (
    CramerLundberg,
    JumpDiffusion,
    BrownianDrift,
    LevyModel,
    _phi_fourth_at_zero,
    _phi_third_at_zero,
    has_gaussian_part,
    jump_parameters,
    laplace_exponent,
    phi,
    phi_derivatives_at_zero,
    psi_derivative,
    psi_prime,
)

__all__ = [
    "ScaleFamily",
    "UnsupportedMomentError",
    "scale_w",
    "scale_w_prime",
    "scale_wq",
    "scale_zq",
    "wq_series",
    "w_convolution2",
    "g_laplace",
    "g_cdf",
    "exg_moment",
    "g_pth_moment",
    "potential_density",
    "laplace_transform_check",
]

# Divided-difference steps used for Laplace-transform moment extraction.
_RICHARDSON_STEPS = (1e-2, 5e-3, 2.5e-3)


class UnsupportedMomentError(ValueError):
    """Raised when a moment order has no implemented route."""


class ScaleFamily:
    """Precomputed scale-function data for one validated model.

    Parameters
    ----------
    model : LevyModel
        Model with psi'(0+) > 0.  Construction solves the q = 0 root
        configuration once and caches per-q roots on demand.
    """

    def __init__(self, model: LevyModel):
        drift = psi_prime(model, 0.0)
        if drift <= 0.0:
            raise ValueError(
                f"scale functions need psi'(0+) > 0, got {drift:.6g}; validate() first"
            )
        self.model = model
        self.psi_prime0 = drift
        #: total mass of the Stieltjes measure W(du), equal to W(+inf).
        self.mass = 1.0 / drift
        d2 = psi_derivative(model, 0.0, 2)
        #: first moment of W(du): integral u W(du) = psi''(0+)/(2 psi'(0+)^2).
        self.m1 = d2 / (2.0 * drift * drift)
        self.phi1, self.phi2 = phi_derivatives_at_zero(model)
        #: E(g) started from the origin.
        self.e0g = -drift * self.phi2
        self._root_cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
        self.thetas, self.weights = self._roots_weights(0.0)
        #: atom of W at zero: 1/c for finite variation, else 0.
        self.w_at_zero = float(np.sum(self.weights)) if isinstance(
            model, CramerLundberg
        ) else 0.0

    # -- root machinery ----------------------------------------------------

    def _roots_weights(self, q: float) -> tuple[np.ndarray, np.ndarray]:
        """Real zeros of psi(beta) - q (descending) and weights 1/psi'(beta_i)."""
        if q < 0.0:
            raise ValueError(f"q must be nonnegative, got {q}")
        cached = self._root_cache.get(q)
        if cached is not None:
            return cached
        m = self.model
        if isinstance(m, BrownianDrift):
            disc = math.sqrt(m.mu * m.mu + 2.0 * m.sigma * m.sigma * q)
            roots = np.array([(-m.mu + disc), (-m.mu - disc)]) / m.sigma**2
        elif isinstance(m, JumpDiffusion):
            coeffs = [
                0.5 * m.sigma**2,
                m.mu + 0.5 * m.sigma**2 * m.rho,
                m.mu * m.rho - m.lam - q,
                -q * m.rho,
            ]
            raw = np.roots(coeffs)
            if np.max(np.abs(raw.imag)) > 1e-7 * max(1.0, np.max(np.abs(raw))):
                raise RuntimeError(
                    f"complex roots encountered for psi(beta) = {q}: {raw}"
                )
            roots = np.sort(raw.real)[::-1]
        else:
            a, b, c = m.c, m.c * m.rho - m.lam - q, -q * m.rho
            disc = math.sqrt(b * b - 4.0 * a * c)
            r1 = (-b + disc) / (2.0 * a)
            r2 = (-b - disc) / (2.0 * a)
            roots = np.array([max(r1, r2), min(r1, r2)])
        # Newton polish (cheap insurance on the cubic eigenvalue solve).
        for _ in range(2):
            vals = np.array([laplace_exponent(m, b) - q for b in roots])
            ders = np.array([psi_prime(m, b) for b in roots])
            roots = roots - vals / ders
        gaps = np.abs(np.subtract.outer(roots, roots))
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() < 1e-8:
            raise RuntimeError(
                "confluent scale-function roots; use the convolution series route"
            )
        weights = np.array([1.0 / psi_prime(m, b) for b in roots])
        out = (roots, weights)
        self._root_cache[q] = out
        return out

    # -- exponential-sum evaluation -----------------------------------------

    def _exp_sum(
        self, x: np.ndarray, thetas: np.ndarray, coefs: np.ndarray, order: int = 0
    ) -> np.ndarray:
        """Evaluate sum_i coefs_i theta_i^order exp(theta_i x) on x >= 0, 0 below."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x >= 0.0
        if np.any(pos):
            xp = x[pos]
            acc = np.zeros_like(xp)
            for theta, c in zip(thetas, coefs):
                acc += c * theta**order * np.exp(theta * xp)
            out[pos] = acc
        return out

    def w(self, x) -> np.ndarray:
        """W(x) = W^(0)(x); zero on the negative half-line."""
        return self._exp_sum(x, self.thetas, self.weights)

    def w_prime(self, x) -> np.ndarray:
        """Right derivative W'(x) for x >= 0 (0 below)."""
        return self._exp_sum(x, self.thetas, self.weights, order=1)

    def wq(self, q: float, x) -> np.ndarray:
        """W^(q)(x) by partial fractions."""
        thetas, weights = self._roots_weights(q)
        return self._exp_sum(x, thetas, weights)

    def w2(self, x) -> np.ndarray:
        """Convolution square W^{*2}(x) = integral_0^x W(y) W(x-y) dy, closed form.

        For W = sum w_i exp(theta_i x) with distinct exponents,
        W^{*2} = sum_i w_i^2 x exp(theta_i x)
               + 2 sum_{i<j} w_i w_j (exp(theta_i x) - exp(theta_j x))/(theta_i - theta_j).
        """
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x >= 0.0
        if not np.any(pos):
            return out
        xp = x[pos]
        th, ws = self.thetas, self.weights
        exps = [np.exp(t * xp) for t in th]
        acc = np.zeros_like(xp)
        for i in range(len(th)):
            acc += ws[i] * ws[i] * xp * exps[i]
            for j in range(i + 1, len(th)):
                acc += 2.0 * ws[i] * ws[j] * (exps[i] - exps[j]) / (th[i] - th[j])
        out[pos] = acc
        return out

    def exg1(self, x) -> np.ndarray:
        """E_x(g), vectorised over x of any sign."""
        x = np.asarray(x, dtype=float)
        affine = -self.psi_prime0 * (self.phi2 + x * self.phi1 * self.phi1)
        return affine + self.psi_prime0 * self.w2(x)


def _match_scalar(value: np.ndarray, template) -> float | np.ndarray:
    """Return a float when the caller passed a scalar, else the array."""
    if np.isscalar(template) or getattr(template, "ndim", 1) == 0:
        return float(np.asarray(value).reshape(-1)[0])
    return value


# ---------------------------------------------------------------------------
# Scale-function operations
# ---------------------------------------------------------------------------


def scale_w(fam: ScaleFamily, x) -> float | np.ndarray:
    """Scale function W(x); identically 0 for x < 0, W(0) = atom for finite variation."""
    return _match_scalar(fam.w(x), x)


def scale_w_prime(fam: ScaleFamily, x) -> float | np.ndarray:
    """Right derivative W'(x); equals 2/sigma^2 at 0+ for models with sigma > 0."""
    return _match_scalar(fam.w_prime(x), x)


def scale_wq(fam: ScaleFamily, q: float, x) -> float | np.ndarray:
    """q-scale function W^(q)(x) via partial fractions of 1/(psi - q)."""
    return _match_scalar(fam.wq(q, x), x)


def scale_zq(fam: ScaleFamily, q: float, x) -> float | np.ndarray:
    """Second scale function Z^(q)(x) = 1 + q integral_0^x W^(q)(y) dy (1 for x <= 0)."""
    xa = np.asarray(x, dtype=float)
    out = np.ones_like(xa)
    pos = xa > 0.0
    if q != 0.0 and np.any(pos):
        thetas, weights = fam._roots_weights(q)
        xp = xa[pos]
        acc = np.zeros_like(xp)
        for theta, w in zip(thetas, weights):
            # no zero roots once q > 0 since psi(0) = 0 < q
            acc += w * (np.exp(theta * xp) - 1.0) / theta
        out[pos] = 1.0 + q * acc
    return _match_scalar(out, x)


def w_convolution2(fam: ScaleFamily, x) -> float | np.ndarray:
    """Convolution square W^{*2}(x) in closed form (0 for x < 0)."""
    return _match_scalar(fam.w2(x), x)


# ---------------------------------------------------------------------------
# Convolution-series route (independent of partial fractions)
# ---------------------------------------------------------------------------


def _exppoly_eval(terms: dict, x) -> "object":
    """Evaluate sum_theta exp(theta x) * poly_theta(x) (ascending coefficients)."""
    from mpmath import exp as mexp

    total = 0
    for theta, coefs in terms.items():
        poly = 0
        for c in reversed(coefs):
            poly = poly * x + c
        total += mexp(theta * x) * poly
    return total


def _exppoly_conv(f: dict, g: dict) -> dict:
    """Exact convolution on [0, x] of two exponential polynomials.

    Uses B(a+1, b+1) x^{a+b+1} for equal exponents and the incomplete
    integral recursion I_m = (x^m e^{dx} - m I_{m-1})/d for distinct
    ones.  Convolution of exponential polynomials stays in the class, so
    the result is again a {theta: coefficients} table.  Coefficients are
    mpmath numbers: the expansion cancels heavily and needs the guard
    digits.
    """
    from mpmath import mpf

    def add(table: dict, theta, deg: int, val) -> None:
        poly = table.setdefault(theta, [])
        while len(poly) <= deg:
            poly.append(mpf(0))
        poly[deg] += val

    out: dict = {}
    for theta, pf in f.items():
        for eta, pg in g.items():
            for a_pow, ca in enumerate(pf):
                if ca == 0:
                    continue
                for b_pow, cb in enumerate(pg):
                    if cb == 0:
                        continue
                    c = ca * cb
                    if theta == eta:
                        # t^a e^{theta t} * t^b e^{theta t}
                        #   = a! b! / (a+b+1)! * x^{a+b+1} e^{theta x}
                        val = c * mpf(
                            math.factorial(a_pow) * math.factorial(b_pow)
                        ) / math.factorial(a_pow + b_pow + 1)
                        add(out, theta, a_pow + b_pow + 1, val)
                    else:
                        delta = theta - eta
                        # I_m(x) = int_0^x t^m e^{delta t} dt
                        #        = e^{delta x} * A_m(x) + B_m  (A poly, B const)
                        # recursion I_m = (x^m e^{delta x} - m I_{m-1}) / delta
                        a_polys: list[list] = []
                        b_consts: list = []
                        a_cur = [1 / delta]
                        b_cur = -1 / delta
                        a_polys.append(a_cur)
                        b_consts.append(b_cur)
                        for mN in range(1, a_pow + b_pow + 1):
                            nxt = [mpf(0)] * (mN + 1)
                            nxt[mN] = 1 / delta
                            for k, ak in enumerate(a_cur):
                                nxt[k] -= mN * ak / delta
                            b_cur = -mN * b_cur / delta
                            a_cur = nxt
                            a_polys.append(a_cur)
                            b_consts.append(b_cur)
                        # (x-t)^b expansion: sum_j C(b,j) (-1)^j x^{b-j} t^{a+j}
                        for jpw in range(b_pow + 1):
                            w = c * math.comb(b_pow, jpw) * (-1) ** jpw
                            m_idx = a_pow + jpw
                            shift = b_pow - jpw
                            for k, ak in enumerate(a_polys[m_idx]):
                                add(out, theta, k + shift, w * ak)
                            add(out, eta, shift, w * b_consts[m_idx])
    return out


def wq_series(
    fam: ScaleFamily,
    q: float,
    x: float,
    rel_tol: float = 1e-12,
    max_terms: int = 120,
    dps: int = 80,
) -> float:
    """W^(q)(x) through the convolution series sum_k q^k W^{*(k+1)}(x).

    Exact symbolic convolutions in ``dps``-digit arithmetic (the
    exponential-polynomial coefficients cancel catastrophically in
    doubles); the series is truncated once the next term falls below
    ``rel_tol`` of the running sum.  Raises ``RuntimeError`` if the term
    budget is exhausted first.  Deliberately independent of the
    partial-fraction route: only the q = 0 configuration is shared.
    """
    if x < 0.0:
        return 0.0
    import mpmath

    with mpmath.workdps(dps):
        xm = mpmath.mpf(x)
        base = {
            mpmath.mpf(float(t)): [mpmath.mpf(float(w))]
            for t, w in zip(fam.thetas, fam.weights)
        }
        term = {t: list(p) for t, p in base.items()}
        total = _exppoly_eval(term, xm)
        if q == 0.0:
            return float(total)
        qm = mpmath.mpf(q)
        qk = mpmath.mpf(1)
        for _ in range(max_terms):
            term = _exppoly_conv(term, base)
            qk *= qm
            inc = qk * _exppoly_eval(term, xm)
            total += inc
            if abs(inc) < rel_tol * max(abs(total), mpmath.mpf("1e-300")):
                return float(total)
    raise RuntimeError(
        f"convolution series did not converge in {max_terms} terms at (q, x) = ({q}, {x})"
    )


# ---------------------------------------------------------------------------
# Last-zero functionals
# ---------------------------------------------------------------------------


def g_laplace(fam: ScaleFamily, q: float, x) -> float | np.ndarray:
    """E_x(exp(-q g)) where g is the last zero of X started at x.

    Equals exp(Phi(q) x) Phi'(q) psi'(0+) + psi'(0+)(W(x) - W^(q)(x));
    the two W terms vanish for x <= 0.
    """
    if q < 0.0:
        raise ValueError(f"q must be nonnegative, got {q}")
    xa = np.asarray(x, dtype=float)
    if q == 0.0:
        return _match_scalar(np.ones_like(xa), x)
    phi_q = phi(fam.model, q)
    phi_prime_q = 1.0 / psi_prime(fam.model, phi_q)
    out = np.exp(phi_q * xa) * phi_prime_q * fam.psi_prime0
    out = out + fam.psi_prime0 * (fam.w(xa) - fam.wq(q, xa))
    return _match_scalar(out, x)


def g_cdf(
    fam: ScaleFamily,
    x,
    gamma: float,
    *,
    n_paths: int = 200_000,
    seed: int = 0,
):
    """P_x(g <= gamma) = E_x[psi'(0+) W(X_gamma)].

    Closed form for ``BrownianDrift``.  Jump families delegate to exact
    single-time sampling of X_gamma (Gaussian part plus a compound
    Poisson sum needs no path grid) and return an :class:`MCEstimate`
    carrying the Monte Carlo uncertainty.
    """
    if gamma < 0.0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    model = fam.model
    if gamma == 0.0:
        return _match_scalar(fam.psi_prime0 * fam.w(x), x)
    if isinstance(model, BrownianDrift):
        xa = np.asarray(x, dtype=float)
        theta = 2.0 * model.mu / model.sigma**2
        m = xa + model.mu * gamma
        s = model.sigma * math.sqrt(gamma)
        # exp(-theta m + theta^2 s^2 / 2) = exp(-theta x) exactly
        # (exp(-theta X) is a martingale), evaluated in log space for x < 0.
        out = ndtr(m / s) - np.exp(-theta * xa + log_ndtr(m / s - theta * s))
        return _match_scalar(out, x)

    from .path_sim import MCEstimate  # local import to avoid a cycle

    lam, rho = jump_parameters(model)
    mu, sigma = (model.mu, model.sigma) if isinstance(model, JumpDiffusion) else (
        model.c,
        0.0,
    )
    rng = np.random.Generator(np.random.Philox(key=np.uint64([seed, 0])))
    n_jumps = rng.poisson(lam * gamma, size=n_paths)
    jump_sums = np.where(
        n_jumps > 0, rng.standard_gamma(np.maximum(n_jumps, 1)) / rho, 0.0
    )
    x_gamma = mu * gamma - jump_sums
    if sigma > 0.0:
        x_gamma = x_gamma + sigma * math.sqrt(gamma) * rng.standard_normal(n_paths)
    values = fam.psi_prime0 * fam.w(float(x) + x_gamma)
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(n_paths))
    return MCEstimate(
        mean=mean,
        stderr=stderr,
        n_paths=n_paths,
        master_seed=seed,
        censored_fraction=0.0,
    )


def _laplace_qderiv_at_zero(fam: ScaleFamily, x: float, r: int) -> float:
    """(d/dq)^r E_x(exp(-q g)) at q = 0+ by one-sided stencils plus Richardson.

    Forward stencils of consistency order h^2, extrapolated twice over
    the step ladder; one-sided because the transform lives on q >= 0.
    """
    if r == 2:
        stencil = np.array([2.0, -5.0, 4.0, -1.0])
        power = 2
    elif r == 3:
        stencil = np.array([-2.5, 9.0, -12.0, 7.0, -1.5])
        power = 3
    else:  # pragma: no cover - guarded by exg_moment
        raise UnsupportedMomentError(f"no stencil for derivative order {r}")
    # Scale-aware ladder: truncation error grows with powers of h * E_x(g),
    # so shrink the base steps once the mean of g exceeds a few units.
    scale = 1.0 / max(1.0, float(fam.exg1(x)) / 2.0)
    estimates = []
    for h in (scale * np.asarray(_RICHARDSON_STEPS)):
        nodes = h * np.arange(len(stencil))
        vals = np.array([g_laplace(fam, float(qn), x) for qn in nodes])
        estimates.append(float(stencil @ vals) / h**power)
    # two Richardson levels for an O(h^2) leading error, halving steps
    d01 = (4.0 * estimates[1] - estimates[0]) / 3.0
    d12 = (4.0 * estimates[2] - estimates[1]) / 3.0
    return (8.0 * d12 - d01) / 7.0


def exg_moment(fam: ScaleFamily, x, r: float = 1) -> float | np.ndarray:
    """E_x(g^r) for moment orders r in {1, 2, 3}.

    r = 1 is closed form; r in {2, 3} differentiates the Laplace
    transform of g at q = 0+ numerically.  Other orders raise
    :class:`UnsupportedMomentError`.
    """
    if r == 1:
        return _match_scalar(fam.exg1(x), x)
    if r in (2, 3):
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        sign = -1.0 if int(r) % 2 else 1.0
        vals = np.array(
            [sign * _laplace_qderiv_at_zero(fam, float(xi), int(r)) for xi in xa]
        )
        return _match_scalar(vals, x)
    raise UnsupportedMomentError(
        f"moment order r = {r!r} not supported; integer r in 1..3 only"
    )


def g_pth_moment(
    fam: ScaleFamily,
    p: float,
    *,
    n_paths: int = 100_000,
    seed: int = 0,
    horizon: float | None = None,
    dt: float = 1e-2,
):
    """E(g^p) from the origin.

    Integer p in {1, 2, 3} comes from derivatives of Phi at 0:
    E(g^p) = (-1)^p psi'(0+) Phi^(p+1)(0).  Non-integer p delegates to
    Monte Carlo (losses of the immediate-stopping rule are exactly g^p)
    and returns an :class:`MCEstimate`.
    """
    if p == 1:
        return fam.e0g
    if p == 2:
        return fam.psi_prime0 * _phi_third_at_zero(fam.model)
    if p == 3:
        return -fam.psi_prime0 * _phi_fourth_at_zero(fam.model)
    if p <= 1:
        raise ValueError(f"moment order must exceed 1, got {p}")

    from .path_sim import ImmediateRule, default_horizon, estimate_prediction_error

    if horizon is None:
        horizon = default_horizon(fam.model)
    return estimate_prediction_error(
        fam.model,
        ImmediateRule(),
        p,
        n_paths=n_paths,
        horizon=horizon,
        dt=dt,
        master_seed=seed,
    )


# ---------------------------------------------------------------------------
# Potential densities
# ---------------------------------------------------------------------------


def potential_density(
    fam: ScaleFamily,
    kind: str,
    q: float,
    x: float,
    y: float,
    a: float | None = None,
) -> float:
    """q-potential density u^(q)(x, y) of X under three killing regimes.

    kind = "interval":  killed on exiting (0, a); 0 <= x, y <= a.
    kind = "halfline":  killed on exiting (-inf, a]; x, y <= a.
    kind = "free":      no killing (q = 0 allowed thanks to the drift).
    """
    if q < 0.0:
        raise ValueError(f"q must be nonnegative, got {q}")
    if kind == "interval":
        if a is None or a <= 0.0:
            raise ValueError("interval potential needs a > 0")
        if not (0.0 <= x <= a and 0.0 <= y <= a):
            raise ValueError(f"(x, y) = ({x}, {y}) outside [0, {a}]^2")
        wq_a = float(fam.wq(q, a))
        return float(fam.wq(q, x)) * float(fam.wq(q, a - y)) / wq_a - float(
            fam.wq(q, x - y)
        )
    if kind == "halfline":
        if a is None:
            raise ValueError("halfline potential needs the upper level a")
        if x > a or y > a:
            raise ValueError(f"(x, y) = ({x}, {y}) not in (-inf, {a}]^2")
        phi_q = phi(fam.model, q)
        return math.exp(-phi_q * (a - x)) * float(fam.wq(q, a - y)) - float(
            fam.wq(q, x - y)
        )
    if kind == "free":
        phi_q = phi(fam.model, q)
        phi_prime_q = 1.0 / psi_prime(fam.model, phi_q)
        return phi_prime_q * math.exp(-phi_q * (y - x)) - float(fam.wq(q, x - y))
    raise ValueError(f"unknown potential kind {kind!r}")


# ---------------------------------------------------------------------------
# Transform identity check (shared by tests and the validation battery)
# ---------------------------------------------------------------------------


def laplace_transform_check(
    fam: ScaleFamily, q: float, beta: float
) -> tuple[float, float]:
    """Return (numeric, exact) for integral_0^inf e^{-beta x} W^(q)(x) dx.

    ``beta`` must exceed Phi(q).  The integral is truncated where the
    certified tail bound sum_i |w_i| e^{-(beta - Phi(q)) X}/(beta - Phi(q))
    drops below 1e-10, and evaluated by adaptive quadrature.
    """
    phi_q = phi(fam.model, q)
    gap = beta - phi_q
    if gap <= 0.0:
        raise ValueError(f"beta = {beta} must exceed Phi(q) = {phi_q}")
    thetas, weights = fam._roots_weights(q)
    bound = float(np.sum(np.abs(weights)))
    x_max = max(1.0, math.log(bound / (1e-10 * gap)) / gap)

    def integrand(t: float) -> float:
        return math.exp(-beta * t) * float(fam.wq(q, t))

    numeric, _ = integrate.quad(
        integrand, 0.0, x_max, epsabs=1e-12, epsrel=1e-12, limit=400
    )
    exact = 1.0 / (laplace_exponent(fam.model, beta) - q)
    return numeric, exact
