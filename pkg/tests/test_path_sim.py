"""Exact-skeleton Monte Carlo: paths, last zeros, rules, estimators."""

from __future__ import annotations

import math

import numpy as np
import pytest

from lastzero.levy_model import BrownianDrift, CramerLundberg, JumpDiffusion
from lastzero.path_sim import (
    BarrierRule,
    BoundaryRule,
    ExitUpBeforeDown,
    ImmediateRule,
    LaplaceG,
    OracleRule,
    RuinProb,
    apply_rule,
    default_horizon,
    detect_zero_crossings,
    estimate_functional,
    estimate_gain_integral,
    estimate_prediction_error,
    last_zero,
    simulate_skeleton,
)
from lastzero.stopping_core import GainSpec

BD = BrownianDrift(0.5, 1.0)
JD = JumpDiffusion(3.0, 1.0, 1.0, 1.0)
CL = CramerLundberg(1.5, 1.0, 1.0)


# ---------------------------------------------------------------------------
# Skeleton construction
# ---------------------------------------------------------------------------


def test_skeleton_shape_and_determinism():
    sk = simulate_skeleton(BD, 0.0, 30.0, 0.01, seed=5, path_index=3)
    assert sk.times[0] == 0.0
    assert sk.times[-1] == pytest.approx(30.0)
    assert sk.values[0] == 0.0
    assert sk.times.size == sk.values.size
    again = simulate_skeleton(BD, 0.0, 30.0, 0.01, seed=5, path_index=3)
    assert np.array_equal(sk.values, again.values)
    other = simulate_skeleton(BD, 0.0, 30.0, 0.01, seed=5, path_index=4)
    assert not np.array_equal(sk.values, other.values)


def test_skeleton_jump_bookkeeping():
    sk = simulate_skeleton(JD, 0.0, 20.0, 0.01, seed=9)
    assert sk.jump_flags.dtype == bool
    # Jumps are downward; sizes record the subtracted magnitude.
    assert np.all(sk.jump_sizes[sk.jump_flags] > 0.0)
    assert np.all(sk.jump_sizes[~sk.jump_flags] == 0.0)
    # At rate lam = 1 over 20 time units, some jumps must appear.
    assert int(sk.jump_flags.sum()) > 5


def test_finite_variation_paths_piecewise_drift():
    sk = simulate_skeleton(CL, 0.0, 10.0, 0.01, seed=2)
    increments = np.diff(sk.values)
    deltas = np.diff(sk.times)
    no_jump = ~sk.jump_flags[1:]
    # Between jump epochs the path climbs deterministically at rate c
    # (epochs are placed exactly, so segment lengths vary).
    assert increments[no_jump] == pytest.approx(1.5 * deltas[no_jump], abs=1e-12)


# ---------------------------------------------------------------------------
# Last zero and stopping rules
# ---------------------------------------------------------------------------


def test_last_zero_is_final_crossing():
    sk = detect_zero_crossings(simulate_skeleton(BD, 0.0, 30.0, 0.01, seed=5))
    g_hat, tail_bound = last_zero(sk)
    assert g_hat >= 0.0
    assert 0.0 <= tail_bound < 1.0
    after = sk.values[sk.times > g_hat]
    assert after.size and float(after.min()) > 0.0


def test_rules_on_one_path():
    sk = detect_zero_crossings(simulate_skeleton(BD, 0.0, 30.0, 0.01, seed=5))
    g_hat, _ = last_zero(sk)

    out = apply_rule(sk, ImmediateRule())
    assert out.tau == 0.0 and out.fired and out.g_hat == pytest.approx(g_hat)

    out = apply_rule(sk, OracleRule())
    assert out.tau == pytest.approx(g_hat)

    out = apply_rule(sk, BarrierRule(2.0))
    assert out.fired and out.tau > 0.0
    assert out.x_at_tau == pytest.approx(2.0, abs=1e-6)

    # A boundary rule with an enormous flat level never fires.
    out = apply_rule(sk, BoundaryRule(lambda u: np.full_like(np.asarray(u), 50.0)))
    assert not out.fired


def test_barrier_rule_validates_level():
    with pytest.raises(ValueError):
        BarrierRule(0.0)


def test_default_horizon_certifies_tail():
    for model, mean in ((BD, 4.0), (JD, 0.75), (CL, 8.0)):
        assert default_horizon(model) >= 10.0 * mean


# ---------------------------------------------------------------------------
# Loss estimation
# ---------------------------------------------------------------------------


def test_oracle_rule_has_zero_loss():
    est = estimate_prediction_error(BD, OracleRule(), 2.0, 500, 20.0, 0.01, 3)
    assert est.mean == 0.0 and est.stderr == 0.0


def test_immediate_rule_recovers_second_moment():
    # E|0 - g|^2 = E g^2 = 48 for the standard Brownian model.
    est = estimate_prediction_error(BD, ImmediateRule(), 2.0, 6000, 45.0, 0.01, 17)
    assert abs(est.mean - 48.0) < 4.0 * est.stderr
    assert est.censored_fraction == 0.0


def test_loss_estimates_are_deterministic():
    a = estimate_prediction_error(BD, BarrierRule(1.0), 2.0, 400, 20.0, 0.01, 11)
    b = estimate_prediction_error(BD, BarrierRule(1.0), 2.0, 400, 20.0, 0.01, 11)
    assert a == b
    c = estimate_prediction_error(BD, BarrierRule(1.0), 2.0, 400, 20.0, 0.01, 12)
    assert a.mean != c.mean


def test_censoring_is_flagged():
    # A barrier far above anything reachable by the horizon censors
    # every path and must be flagged unreliable.
    est = estimate_prediction_error(BD, BarrierRule(40.0), 2.0, 200, 5.0, 0.01, 1)
    assert est.censored_fraction > 0.5
    assert est.extra.get("unreliable") is True


def test_bad_exponent_rejected():
    with pytest.raises(ValueError):
        estimate_prediction_error(BD, ImmediateRule(), 1.0, 10, 5.0, 0.01, 0)


# ---------------------------------------------------------------------------
# Functional estimation (fluctuation cross-checks in miniature)
# ---------------------------------------------------------------------------


def test_ruin_probability_matches_scale_function():
    # P_1(ruin) = 1 - psi'(0+) W(1) = e^{-1} for BD(0.5, 1).
    est = estimate_functional(BD, RuinProb(1.0), 6000, 45.0, 0.01, 23)
    assert abs(est.mean - math.exp(-1.0)) < 3.5 * est.stderr


def test_two_sided_exit_matches_scale_ratio():
    # P_1(hit 2 before 0) = W(1)/W(2) for BD(0.5, 1).
    target = (1.0 - math.exp(-1.0)) / (1.0 - math.exp(-2.0))
    est = estimate_functional(BD, ExitUpBeforeDown(1.0, 2.0), 6000, 45.0, 0.01, 29)
    assert abs(est.mean - target) < 3.5 * est.stderr


def test_laplace_transform_of_last_zero():
    # E_0[e^{-g}] = 1/3 for BD(0.5, 1).
    est = estimate_functional(BD, LaplaceG(1.0, 0.0), 6000, 45.0, 0.01, 31)
    assert abs(est.mean - 1.0 / 3.0) < 3.5 * est.stderr


def test_gain_integral_estimator_runs():
    spec = GainSpec(BD, 2.0)
    est = estimate_gain_integral(spec, 0.0, 400, 30.0, 0.01, 7)
    assert math.isfinite(est.mean) and est.stderr > 0.0
    assert est.n_paths == 400
