"""Path simulation, last-zero extraction, stopping rules, MC estimators.

Skeletons sample the exact law of the three families at their epochs:
jump epochs from the Poisson clock merged with a regular dt grid,
Gaussian increments between epochs (deterministic lines for the
finite-variation family).  The continuous-time infimum between epochs is
recovered by sampling the Brownian-bridge minimum per segment and
inserting zero-crossing epochs, because last-zero detection and the
killing indicators are infimum functionals that naive grid checks bias.

Randomness is splittable and counter-based: path i of a run with master
seed s draws from ``Philox(key=[s, i])`` in a fixed canonical order, so
every estimate is bit-reproducible and independent of chunking.  All
reductions accumulate in path-index order.

The last zero g is not a stopping time, so horizon truncation is
certified rather than assumed: every path reports the analytic bound
P(g > T | X_T) = 1 - psi'(0+) W(X_T), and estimators aggregate it as the
censored fraction.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .levy_model import (
    BrownianDrift,
    CramerLundberg,
    JumpDiffusion,
    LevyModel,
    jump_parameters,
    laplace_exponent,
    psi_prime,
)
from .scale_kit import ScaleFamily, g_cdf
from .stopping_core import GainSpec

__all__ = [
    "PathSkeleton",
    "StoppingOutcome",
    "MCEstimate",
    "ImmediateRule",
    "OracleRule",
    "BarrierRule",
    "BoundaryRule",
    "Rule",
    "LaplaceG",
    "ExitUpBeforeDown",
    "RuinProb",
    "Functional",
    "simulate_skeleton",
    "detect_zero_crossings",
    "last_zero",
    "apply_rule",
    "default_horizon",
    "estimate_prediction_error",
    "estimate_functional",
    "estimate_gain_integral",
]

_FIRE_TOL = 1e-9  # slack in "X >= b(U)" checks, matching the firing contract

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@functools.lru_cache(maxsize=16)
def _fam(model: LevyModel) -> ScaleFamily:
    return ScaleFamily(model)


def _path_rng(master_seed: int, path_index: int) -> np.random.Generator:
    """Canonical per-path generator: Philox keyed by (master seed, path index)."""
    key = np.array([master_seed, path_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathSkeleton:
    """One simulated path: exact values at jump epochs merged with a dt grid.

    ``values[i]`` is the post-jump (cadlag) value at ``times[i]``;
    ``jump_sizes[i] > 0`` records the magnitude subtracted at a jump
    epoch, so the pre-jump value is ``values[i] + jump_sizes[i]``.
    Between epochs the increment is Gaussian (mean mu*dt, variance
    sigma^2*dt), or an exact line of slope c for ``CramerLundberg``.
    After :func:`detect_zero_crossings`, ``seg_min``/``seg_max`` bound the
    continuous motion on each inter-epoch segment and sign changes have
    their own epochs.
    """

    model: LevyModel
    x0: float
    horizon: float
    dt: float
    master_seed: int
    path_index: int
    times: np.ndarray
    values: np.ndarray
    jump_flags: np.ndarray
    jump_sizes: np.ndarray
    min_uniforms: np.ndarray | None = None
    max_uniforms: np.ndarray | None = None
    seg_min: np.ndarray | None = None
    seg_max: np.ndarray | None = None
    augmented: bool = False


@dataclass(frozen=True)
class StoppingOutcome:
    """Result of applying one stopping rule to one augmented skeleton."""

    tau: float
    fired: bool
    g_hat: float
    u_at_tau: float
    x_at_tau: float
    censor_prob_bound: float


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo estimate with deterministic provenance."""

    mean: float
    stderr: float
    n_paths: int
    master_seed: int
    censored_fraction: float
    extra: dict = field(default_factory=dict, compare=False)


# -- stopping rules ---------------------------------------------------------


@dataclass(frozen=True)
class ImmediateRule:
    """Stop at time zero (loss is exactly g^p)."""


@dataclass(frozen=True)
class OracleRule:
    """Stop at the realised last zero itself (clairvoyant comparator)."""


@dataclass(frozen=True)
class BarrierRule:
    """Stop the first time the path is at or above a constant level."""

    level: float

    def __post_init__(self):
        if not self.level > 0.0:
            raise ValueError(f"barrier level must be positive, got {self.level}")


@dataclass(frozen=True)
class BoundaryRule:
    """Stop the first time X_t >= b(U_t) for a clock-dependent level b.

    ``curve`` must map (arrays of) excursion ages to levels; decreasing
    curves make the rule monotone in the clock.
    """

    curve: Callable[[np.ndarray], np.ndarray]


Rule = Union[ImmediateRule, OracleRule, BarrierRule, BoundaryRule]


# -- estimable functionals ---------------------------------------------------


@dataclass(frozen=True)
class LaplaceG:
    """E_{x0}(exp(-q g)), cross-checking the transform of the last zero."""

    q: float
    x0: float = 0.0


@dataclass(frozen=True)
class ExitUpBeforeDown:
    """P_x(tau_a^+ < tau_0^-): reach level a before going at or below 0."""

    x: float
    a: float

    def __post_init__(self):
        if not 0.0 < self.x < self.a:
            raise ValueError(f"need 0 < x < a, got x={self.x}, a={self.a}")


@dataclass(frozen=True)
class RuinProb:
    """P_x(tau_0^- < infinity), estimated on a certified finite horizon."""

    x: float


Functional = Union[LaplaceG, ExitUpBeforeDown, RuinProb]


# ---------------------------------------------------------------------------
# Skeleton simulation
# ---------------------------------------------------------------------------


def _grid_times(horizon: float, dt: float) -> np.ndarray:
    n_full = int(math.ceil(horizon / dt - 1e-12))
    times = np.empty(n_full + 1)
    times[:n_full] = np.arange(n_full) * dt
    times[n_full] = horizon
    return times


def simulate_skeleton(
    model: LevyModel,
    x0: float,
    horizon: float,
    dt: float,
    seed: int,
    path_index: int = 0,
) -> PathSkeleton:
    """Sample one path skeleton with exact-law values at its epochs.

    Epochs are the dt grid merged with the path's own jump epochs.  The
    draw order per path is canonical (jump count, jump times, jump
    sizes, then per-segment normals and bridge uniforms), making the
    skeleton a pure function of (model, x0, horizon, dt, seed,
    path_index).  Callers should keep dt <= 0.05; the horizon for
    g-functionals should cover the default-horizon floor so truncation
    stays certified.
    """
    if horizon <= 0.0 or dt <= 0.0:
        raise ValueError(f"horizon and dt must be positive, got {horizon}, {dt}")
    rng = _path_rng(seed, path_index)
    grid = _grid_times(horizon, dt)
    lam, rho = jump_parameters(model)

    if isinstance(model, BrownianDrift):
        times = grid
        n_seg = len(times) - 1
        jump_flags = np.zeros(len(times), dtype=bool)
        jump_sizes = np.zeros(len(times))
        deltas = np.diff(times)
        normals = rng.standard_normal(n_seg)
        min_u = rng.random(n_seg)
        max_u = rng.random(n_seg)
        increments = model.mu * deltas + model.sigma * np.sqrt(deltas) * normals
        values = np.empty(len(times))
        values[0] = x0
        np.cumsum(increments, out=values[1:])
        values[1:] += x0
        return PathSkeleton(
            model, x0, horizon, dt, seed, path_index,
            times, values, jump_flags, jump_sizes, min_u, max_u,
        )

    n_jumps = int(rng.poisson(lam * horizon))
    # keep jump epochs strictly inside (0, horizon) against float corner draws
    jump_times = np.clip(np.sort(rng.random(n_jumps)) * horizon, 1e-12, horizon)
    sizes = rng.exponential(1.0 / rho, size=n_jumps)
    insert_at = np.searchsorted(grid, jump_times)
    times = np.insert(grid, insert_at, jump_times)
    jump_flags = np.zeros(len(times), dtype=bool)
    jump_positions = insert_at + np.arange(n_jumps)
    jump_flags[jump_positions] = True
    jump_sizes = np.zeros(len(times))
    jump_sizes[jump_positions] = sizes
    n_seg = len(times) - 1
    deltas = np.diff(times)

    if isinstance(model, JumpDiffusion):
        normals = rng.standard_normal(n_seg)
        min_u = rng.random(n_seg)
        max_u = rng.random(n_seg)
        increments = model.mu * deltas + model.sigma * np.sqrt(deltas) * normals
    else:  # CramerLundberg: deterministic lines between jumps
        min_u = None
        max_u = None
        increments = model.c * deltas
    increments = increments - jump_sizes[1:]
    values = np.empty(len(times))
    values[0] = x0
    np.cumsum(increments, out=values[1:])
    values[1:] += x0
    return PathSkeleton(
        model, x0, horizon, dt, seed, path_index,
        times, values, jump_flags, jump_sizes, min_u, max_u,
    )


# ---------------------------------------------------------------------------
# Zero-crossing augmentation
# ---------------------------------------------------------------------------


def _bridge_extremes(
    a: np.ndarray, w: np.ndarray, deltas: np.ndarray, sigma: float,
    min_u: np.ndarray, max_u: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample per-segment bridge minima and maxima.

    Inverse CDF of the Brownian-bridge extreme between endpoints a -> w
    over duration delta.  Minimum and maximum are drawn independently —
    their joint law is not needed at the precision the dt-robustness
    invariant certifies.
    """
    var2 = 2.0 * sigma * sigma * deltas
    gap2 = (a - w) ** 2
    mins = 0.5 * (a + w - np.sqrt(gap2 - var2 * np.log(np.maximum(min_u, 1e-16))))
    maxs = 0.5 * (a + w + np.sqrt(gap2 - var2 * np.log(np.maximum(max_u, 1e-16))))
    np.minimum(mins, np.minimum(a, w), out=mins)
    np.maximum(maxs, np.maximum(a, w), out=maxs)
    return mins, maxs


def detect_zero_crossings(skel: PathSkeleton) -> PathSkeleton:
    """Insert sign-change epochs and per-segment continuous extremes.

    Gaussian segments whose endpoints straddle zero get a linear
    crossing epoch; segments positive at both ends but whose sampled
    bridge minimum dips below zero get three epochs (down-crossing, the
    minimum itself, up-crossing) so the excursion clock resets exactly
    where the continuous path visited the negative half-line.
    ``CramerLundberg`` segments are rising lines, so only exact linear
    up-crossings occur between jumps.
    """
    times, values = skel.times, skel.values
    n_seg = len(times) - 1
    deltas = np.diff(times)
    a = values[:-1]
    # continuous motion ends at the pre-jump value; the jump is atomic
    w = values[1:] + skel.jump_sizes[1:]

    sigma = 0.0 if isinstance(skel.model, CramerLundberg) else skel.model.sigma
    if sigma > 0.0:
        seg_min, seg_max = _bridge_extremes(
            a, w, deltas, sigma, skel.min_uniforms, skel.max_uniforms
        )
    else:
        seg_min, seg_max = np.minimum(a, w), np.maximum(a, w)

    down = (a > 0.0) & (w <= 0.0)
    up = (a < 0.0) & (w > 0.0)  # a == 0 already sits on the axis
    dip = (a > 0.0) & (w > 0.0) & (seg_min < 0.0)
    split_mask = down | up | dip

    i_dn = np.flatnonzero(down)
    i_up = np.flatnonzero(up)
    i_dip = np.flatnonzero(dip)
    t0d, t1d = times[i_dn], times[i_dn + 1]
    tc_down = t0d + (t1d - t0d) * a[i_dn] / (a[i_dn] - w[i_dn])
    t0u, t1u = times[i_up], times[i_up + 1]
    tc_up = t0u + (t1u - t0u) * (-a[i_up]) / (w[i_up] - a[i_up])
    t0p, t1p = times[i_dip], times[i_dip + 1]
    ap, wp, mp = a[i_dip], w[i_dip], seg_min[i_dip]
    t_min = t0p + (t1p - t0p) * (ap - mp) / ((ap - mp) + (wp - mp))
    t_dn = t0p + (t_min - t0p) * ap / (ap - mp)
    t_up = t_min + (t1p - t_min) * (-mp) / (wp - mp)

    pos = np.concatenate((i_dn + 1, i_up + 1, i_dip + 1, i_dip + 1, i_dip + 1))
    ins_t = np.concatenate((tc_down, tc_up, t_dn, t_min, t_up))
    ins_v = np.concatenate(
        (np.zeros(len(i_dn) + len(i_up) + len(i_dip)), mp, np.zeros(len(i_dip)))
    )
    order = np.lexsort((ins_t, pos))
    pos, ins_t, ins_v = pos[order], ins_t[order], ins_v[order]

    if len(pos) == 0:
        return PathSkeleton(
            skel.model, skel.x0, skel.horizon, skel.dt,
            skel.master_seed, skel.path_index,
            times, values, skel.jump_flags, skel.jump_sizes,
            None, None, seg_min, seg_max, augmented=True,
        )

    new_times = np.insert(times, pos, ins_t)
    new_values = np.insert(values, pos, ins_v)
    new_jump_flags = np.insert(skel.jump_flags, pos, False)
    new_jump_sizes = np.insert(skel.jump_sizes, pos, 0.0)

    # Per-augmented-segment extremes: endpoint-based defaults everywhere,
    # then restore the sampled bridge extremes on unsplit segments (split
    # pieces have the sampled minimum present as an inserted endpoint; the
    # chance of the lost bridge maximum mattering within one dt is
    # negligible at the certified tolerances).
    a2 = new_values[:-1]
    w2 = new_values[1:] + new_jump_sizes[1:]
    new_seg_min = np.minimum(a2, w2)
    new_seg_max = np.maximum(a2, w2)
    n_ins_per_seg = np.bincount(pos - 1, minlength=n_seg)
    offsets = np.concatenate(([0], np.cumsum(n_ins_per_seg)[:-1]))
    unsplit = ~split_mask
    target = np.flatnonzero(unsplit) + offsets[unsplit]
    new_seg_min[target] = seg_min[unsplit]
    new_seg_max[target] = seg_max[unsplit]

    return PathSkeleton(
        skel.model, skel.x0, skel.horizon, skel.dt,
        skel.master_seed, skel.path_index,
        new_times, new_values, new_jump_flags, new_jump_sizes,
        None, None, new_seg_min, new_seg_max, augmented=True,
    )


# ---------------------------------------------------------------------------
# Last zero and rule application
# ---------------------------------------------------------------------------


def last_zero(skel: PathSkeleton) -> tuple[float, float]:
    """(g_hat, tail_bound): last epoch at or below zero, and P(g > T | X_T).

    Returns g_hat = 0 when the path never visits (-inf, 0] (sup of the
    empty set), which carries the atom of g at zero.  The tail bound is
    1 - psi'(0+) W(X_T), the exact conditional probability that the true
    last zero lies beyond the horizon.
    """
    if not skel.augmented:
        raise ValueError("skeleton must pass detect_zero_crossings first")
    below = skel.values <= 0.0
    g_hat = float(skel.times[np.flatnonzero(below)[-1]]) if below.any() else 0.0
    fam = _fam(skel.model)
    tail = 1.0 - fam.psi_prime0 * float(fam.w(skel.values[-1]))
    return g_hat, float(min(max(tail, 0.0), 1.0))


def _last_below_times(skel: PathSkeleton) -> np.ndarray:
    """Running last time at or below zero as of each epoch (0 if none yet)."""
    marks = np.where(skel.values <= 0.0, skel.times, 0.0)
    return np.maximum.accumulate(marks)


def _fire_barrier(skel: PathSkeleton, level: float) -> tuple[float, bool]:
    """First time the continuous path reaches ``level`` (creeping: exact hit)."""
    values, times = skel.values, skel.times
    if values[0] >= level - _FIRE_TOL:
        return 0.0, True
    pre_right = values[1:] + skel.jump_sizes[1:]
    hits = skel.seg_max >= level - _FIRE_TOL
    idx = np.flatnonzero(hits)
    if idx.size == 0:
        return skel.horizon, False
    i = int(idx[0])
    t0, t1 = times[i], times[i + 1]
    ai, wi, mx = values[i], pre_right[i], skel.seg_max[i]
    if wi >= level - _FIRE_TOL:
        if wi > ai:
            return float(t0 + (t1 - t0) * (level - ai) / (wi - ai)), True
        return float(t1), True
    # interior bridge maximum exceeds the level although endpoints do not
    t_max = t0 + (t1 - t0) * (mx - ai) / ((mx - ai) + (mx - wi))
    frac = (level - ai) / (mx - ai) if mx > ai else 0.0
    return float(t0 + (t_max - t0) * frac), True


def _fire_boundary(
    skel: PathSkeleton, curve: Callable, g_hat: float
) -> tuple[float, bool, float, float]:
    """First time X_t >= b(U_t); returns (tau, fired, u_at_tau, x_at_tau).

    Epoch-level scan with 16-point sub-grid refinement inside candidate
    Gaussian segments: the threshold b(U) moves deterministically
    between epochs (the clock resets only at inserted sign-change
    epochs), while X is linearly interpolated.
    """
    times, values = skel.times, skel.values
    lb = _last_below_times(skel)
    u_epochs = times - lb
    b_epochs = np.asarray(curve(u_epochs), dtype=float)
    fires_at_epoch = values >= b_epochs - _FIRE_TOL
    # within segment (i, i+1): clock runs, b decreases; possible only if the
    # segment's continuous max reaches the smallest threshold on the segment
    pre_right = values[1:] + skel.jump_sizes[1:]
    u_right = times[1:] - lb[:-1]
    b_right = np.asarray(curve(u_right), dtype=float)
    seg_possible = skel.seg_max >= b_right - _FIRE_TOL

    start = 0
    n_seg = len(times) - 1
    while True:
        epoch_idx = np.flatnonzero(fires_at_epoch[start:])
        seg_idx = np.flatnonzero(seg_possible[start:])
        e = int(epoch_idx[0]) + start if epoch_idx.size else None
        s = int(seg_idx[0]) + start if seg_idx.size else None
        if e is None and s is None:
            u_end = float(times[-1] - lb[-1])
            return float(skel.horizon), False, u_end, float(values[-1])
        if s is None or (e is not None and e <= s):
            return float(times[e]), True, float(u_epochs[e]), float(values[e])
        # refine segment s on a 16-point sub-grid (linear X, exact clock)
        t0, t1 = times[s], times[s + 1]
        sub = t0 + (t1 - t0) * (np.arange(1, 17) / 16.0)
        x_sub = values[s] + (pre_right[s] - values[s]) * (sub - t0) / (t1 - t0)
        b_sub = np.asarray(curve(sub - lb[s]), dtype=float)
        hit = np.flatnonzero(x_sub >= b_sub - _FIRE_TOL)
        if hit.size:
            j = int(hit[0])
            return float(sub[j]), True, float(sub[j] - lb[s]), float(x_sub[j])
        start = s + 1
        if start >= n_seg:
            u_end = float(times[-1] - lb[-1])
            return float(skel.horizon), False, u_end, float(values[-1])


def apply_rule(skel: PathSkeleton, rule: Rule) -> StoppingOutcome:
    """Apply one stopping rule to one augmented skeleton.

    Scans epochs in order; censored outcomes carry tau = horizon and
    fired = False.  The excursion age at tau follows the convention
    U_t = t - sup{s <= t : X_s <= 0} with sup of the empty set = 0.
    """
    if not skel.augmented:
        raise ValueError("skeleton must pass detect_zero_crossings first")
    g_hat, tail = last_zero(skel)

    if isinstance(rule, ImmediateRule):
        return StoppingOutcome(0.0, True, g_hat, 0.0, skel.x0, tail)
    if isinstance(rule, OracleRule):
        x_at = 0.0 if g_hat > 0.0 else skel.x0
        return StoppingOutcome(g_hat, True, g_hat, 0.0, x_at, tail)
    if isinstance(rule, BarrierRule):
        tau, fired = _fire_barrier(skel, rule.level)
        lb = _last_below_times(skel)
        i = int(np.searchsorted(skel.times, tau, side="right") - 1)
        u_at = tau - float(lb[i])
        x_at = rule.level if fired else float(skel.values[-1])
        return StoppingOutcome(tau, fired, g_hat, u_at, x_at, tail)
    if isinstance(rule, BoundaryRule):
        tau, fired, u_at, x_at = _fire_boundary(skel, rule.curve, g_hat)
        return StoppingOutcome(tau, fired, g_hat, u_at, x_at, tail)
    raise TypeError(f"unknown rule {rule!r}")


# ---------------------------------------------------------------------------
# Horizon selection
# ---------------------------------------------------------------------------


def _chernoff_tail_time(model: LevyModel, target: float) -> float:
    """Smallest T with the exponential-moment bound P(g > T) <= target.

    Uses P(g > T) <= E(e^{theta g}) e^{-theta T} with
    E(e^{theta g}) = psi'(0+) Phi'(-theta), valid for theta below the
    abscissa -psi(beta_0) set by the minimum of psi.
    """
    from scipy.optimize import brentq

    lam, rho = jump_parameters(model)
    lo = -rho + 1e-9
    beta0 = brentq(lambda b: psi_prime(model, b), lo, -1e-12, xtol=1e-13)
    q_star = -laplace_exponent(model, beta0)
    theta = 0.8 * q_star
    root = brentq(
        lambda b: laplace_exponent(model, b) + theta, beta0, -1e-14, xtol=1e-14
    )
    moment = psi_prime(model, 0.0) / psi_prime(model, root)
    return math.log(moment / target) / theta


def default_horizon(model: LevyModel, tail: float = 1e-3) -> float:
    """Horizon with certified tail: max(10 E(g), smallest T with P(g>T) < tail).

    Closed form for ``BrownianDrift`` (the last-zero distribution is
    explicit); exponential Chernoff bound for the jump families.
    """
    fam = _fam(model)
    floor = 10.0 * fam.e0g
    if isinstance(model, BrownianDrift):
        from scipy.optimize import brentq

        def excess(t: float) -> float:
            return (1.0 - float(g_cdf(fam, 0.0, t))) - tail

        hi = 1.0
        while excess(hi) > 0.0:
            hi *= 2.0
        t_tail = brentq(excess, hi / 2.0, hi, xtol=1e-6) if hi > 1.0 else 1.0
        return max(floor, float(t_tail))
    return max(floor, _chernoff_tail_time(model, tail))


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def _finalize(
    values: np.ndarray, master_seed: int, censored_fraction: float, extra: dict
) -> MCEstimate:
    n = len(values)
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return MCEstimate(mean, stderr, n, master_seed, censored_fraction, extra)


def _estimate_losses_multi(
    model: LevyModel,
    rules: list[Rule],
    p: float,
    n_paths: int,
    horizon: float,
    dt: float,
    master_seed: int,
) -> list[MCEstimate]:
    """Loss estimates for several rules on one common skeleton ensemble."""
    n_rules = len(rules)
    losses = np.empty((n_rules, n_paths))
    unfired = np.zeros(n_rules, dtype=np.int64)
    tails = np.empty(n_paths)
    for i in range(n_paths):
        skel = detect_zero_crossings(
            simulate_skeleton(model, 0.0, horizon, dt, master_seed, i)
        )
        for k, rule in enumerate(rules):
            out = apply_rule(skel, rule)
            losses[k, i] = abs(out.tau - out.g_hat) ** p
            if not out.fired:
                unfired[k] += 1
        tails[i] = out.censor_prob_bound
    mean_tail = float(np.mean(tails))
    results = []
    for k in range(n_rules):
        censored = unfired[k] / n_paths
        est = _finalize(
            losses[k],
            master_seed,
            float(censored),
            {
                "mean_tail_bound": mean_tail,
                "unreliable": bool(
                    censored * horizon**p > 0.01 * max(np.mean(losses[k]), 1e-300)
                ),
            },
        )
        results.append(est)
    return results


def estimate_prediction_error(
    model: LevyModel,
    rule: Rule,
    p: float,
    n_paths: int,
    horizon: float | None = None,
    dt: float = 1e-2,
    master_seed: int = 0,
) -> MCEstimate:
    """MC estimate of E|tau - g|^p for one stopping rule, started at 0.

    Censored paths (rule unfired by the horizon) contribute with tau =
    horizon and the truncated g_hat, inflating ``censored_fraction``;
    the estimate is flagged unreliable in ``extra`` when
    censored_fraction * horizon^p exceeds 1% of the mean.
    """
    if p <= 1.0:
        raise ValueError(f"loss exponent must exceed 1, got {p}")
    if horizon is None:
        horizon = default_horizon(model)
    return _estimate_losses_multi(
        model, [rule], p, n_paths, horizon, dt, master_seed
    )[0]


def _eval_exit(skel: PathSkeleton, a: float) -> tuple[float, bool, float]:
    """(indicator up-first, resolved, exit time) for the two-sided exit."""
    t_up, fired_up = _fire_barrier(skel, a)
    below = np.flatnonzero(skel.values <= 0.0)
    t_dn = float(skel.times[below[0]]) if below.size else math.inf
    if fired_up and t_up < t_dn:
        return 1.0, True, t_up
    if t_dn < math.inf:
        return 0.0, True, t_dn
    # unresolved by the horizon: the drift points up, count as up-exit
    return 1.0, False, skel.horizon


def _cl_last_zero(skel: PathSkeleton, fam: ScaleFamily) -> tuple[float, float]:
    """Exact last zero for a bare finite-variation skeleton.

    Between jumps the path is a rising line of slope c, so every
    down-crossing happens at a jump epoch (already an epoch) and the
    final up-crossing time is the last below-axis epoch plus the exact
    linear recovery time.
    """
    values = skel.values
    x_end = float(values[-1])
    tail = min(max(1.0 - fam.psi_prime0 * fam.w(max(x_end, 0.0)), 0.0), 1.0)
    below = np.flatnonzero(values <= 0.0)
    if len(below) == 0:
        return 0.0, tail
    idx = int(below[-1])
    if idx == len(values) - 1:
        # still below the axis at the horizon: hard censor at the end
        return float(skel.times[idx]), 1.0
    c = skel.model.c
    return float(skel.times[idx] - values[idx] / c), tail


def _cl_eval_exit(skel: PathSkeleton, a: float) -> tuple[float, bool, float]:
    """Exact two-sided exit for a bare finite-variation skeleton."""
    values, times = skel.values, skel.times
    below = np.flatnonzero(values <= 0.0)
    t_down = float(times[below[0]]) if len(below) else math.inf
    c = skel.model.c
    w = values[1:] + skel.jump_sizes[1:]
    hit = np.flatnonzero((values[:-1] < a) & (w >= a))
    t_up = math.inf
    for s in hit:
        t = float(times[s] + (a - values[s]) / c)
        if t < t_down:
            t_up = t
            break
        if float(times[s]) > t_down:
            break
    if math.isinf(t_up) and math.isinf(t_down):
        return 1.0, False, skel.horizon  # unresolved: count as up, flag censored
    if t_up < t_down:
        return 1.0, True, t_up
    return 0.0, True, t_down


def _estimate_functionals(
    model: LevyModel,
    functionals: list[Functional],
    x0: float,
    n_paths: int,
    horizon: float,
    dt: float,
    master_seed: int,
) -> list[MCEstimate]:
    """Estimates for several functionals sharing one skeleton ensemble at x0."""
    for f in functionals:
        fx = getattr(f, "x", getattr(f, "x0", 0.0))
        if fx != x0:
            raise ValueError(f"functional {f} starts at {fx}, ensemble at {x0}")
    k = len(functionals)
    finite_variation = isinstance(model, CramerLundberg)
    fam = _fam(model)
    vals = np.empty((k, n_paths))
    unresolved = np.zeros(k, dtype=np.int64)
    surv_tails = np.zeros((k, n_paths))
    exit_times = np.zeros(n_paths)
    for i in range(n_paths):
        if finite_variation:
            # rising lines between jumps: every crossing is exact on the
            # bare skeleton, no augmentation needed
            skel = simulate_skeleton(model, x0, horizon, dt, master_seed, i)
            g_hat, tail = _cl_last_zero(skel, fam)
        else:
            skel = detect_zero_crossings(
                simulate_skeleton(model, x0, horizon, dt, master_seed, i)
            )
            g_hat, tail = last_zero(skel)
        for j, f in enumerate(functionals):
            if isinstance(f, LaplaceG):
                vals[j, i] = math.exp(-f.q * g_hat)
                surv_tails[j, i] = tail
            elif isinstance(f, ExitUpBeforeDown):
                if finite_variation:
                    ind, resolved, t_exit = _cl_eval_exit(skel, f.a)
                else:
                    ind, resolved, t_exit = _eval_exit(skel, f.a)
                vals[j, i] = ind
                exit_times[i] = t_exit
                if not resolved:
                    unresolved[j] += 1
            elif isinstance(f, RuinProb):
                ruined = bool(np.any(skel.values <= 0.0)) if x0 > 0 else True
                vals[j, i] = 1.0 if ruined else 0.0
                surv_tails[j, i] = 0.0 if ruined else tail
            else:
                raise TypeError(f"unknown functional {f!r}")
    out = []
    for j, f in enumerate(functionals):
        extra: dict = {}
        if isinstance(f, ExitUpBeforeDown):
            censored = float(unresolved[j] / n_paths)
            extra["mean_exit_time"] = float(np.mean(exit_times))
        else:
            censored = float(np.mean(surv_tails[j]))
        out.append(_finalize(vals[j], master_seed, censored, extra))
    return out


def estimate_functional(
    model: LevyModel,
    functional: Functional,
    n_paths: int,
    horizon: float | None = None,
    dt: float = 1e-2,
    master_seed: int = 0,
) -> MCEstimate:
    """MC estimate of a named fluctuation functional for cross-checks.

    ``censored_fraction`` reports the analytic truncation exposure: the
    mean surviving tail bound for g- and ruin-functionals, the fraction
    of unresolved paths for the two-sided exit.
    """
    x0 = getattr(functional, "x", getattr(functional, "x0", 0.0))
    if horizon is None:
        horizon = default_horizon(model)
    return _estimate_functionals(
        model, [functional], x0, n_paths, horizon, dt, master_seed
    )[0]


def estimate_gain_integral(
    spec: GainSpec,
    x0: float,
    n_paths: int,
    horizon: float | None = None,
    dt: float = 1e-2,
    master_seed: int = 0,
) -> MCEstimate:
    """MC estimate of E_x [ int_0^{tau_0^+} G(0, X_s) ds ] for x0 <= 0.

    The clock is frozen at zero below the axis, so the integrand is
    -E_{X_s}(g^{p-1}) up to the (creeping) first passage above zero.
    Cross-checks the closed/quadrature forms of the negative-half-line
    value premium.
    """
    if x0 > 0.0:
        raise ValueError(f"gain integral starts at or below zero, got x0 = {x0}")
    model = spec.model
    if horizon is None:
        horizon = default_horizon(model)
    vals = np.empty(n_paths)
    n_censored = 0
    for i in range(n_paths):
        skel = detect_zero_crossings(
            simulate_skeleton(model, x0, horizon, dt, master_seed, i)
        )
        above = np.flatnonzero(skel.values >= 0.0)
        if above.size == 0:
            end = len(skel.values) - 1
            n_censored += 1
        else:
            end = int(above[0])
        tt = skel.times[: end + 1]
        moments = -np.asarray(spec.fam.exg1(skel.values[: end + 1]), dtype=float)
        if spec.p == 3.0:
            from .scale_kit import exg_moment

            moments = -np.array(
                [exg_moment(spec.fam, float(v), 2) for v in skel.values[: end + 1]]
            )
        elif spec.p != 2.0:
            raise ValueError(f"gain integral supports p in {{2, 3}}, got {spec.p}")
        vals[i] = float(_trapezoid(moments, tt))
    return _finalize(
        vals, master_seed, n_censored / n_paths, {"mean_tail_bound": 0.0}
    )
