"""Shared fixtures: solved reference families and the policy-loss panel.

The three standard models are solved once per session at their tuned
production budgets; every test that needs a boundary curve or value
surface shares the same solve.  The Monte Carlo policy panel (optimal
rule versus barrier and immediate comparators) is likewise computed
once and reused by the equivalence and dominance checks.
"""

from __future__ import annotations

import pytest

from lastzero import validation


@pytest.fixture(scope="session")
def bd_solved() -> validation.SolvedFamily:
    """Brownian drift mu = 0.5, sigma = 1 solved at production budget."""
    return validation.solve_family("brownian")


@pytest.fixture(scope="session")
def jd_solved() -> validation.SolvedFamily:
    """Jump diffusion mu = 3, sigma = 1, lam = 1, rho = 1."""
    return validation.solve_family("jump")


@pytest.fixture(scope="session")
def cl_solved() -> validation.SolvedFamily:
    """Cramer-Lundberg c = 1.5, lam = 1, rho = 1 (finite variation)."""
    return validation.solve_family("cramer")


@pytest.fixture(scope="session")
def policy_panel(bd_solved):
    """Loss estimates for boundary/barrier/immediate rules, one ensemble."""
    return validation.policy_loss_panel(bd_solved)
