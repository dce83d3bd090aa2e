"""Acceptance battery: the package's end-to-end validation checks.

Every check is a standalone function returning a :class:`CheckResult`;
budgets (path counts, horizons, tolerances) default to the pinned
acceptance values so the command line and the test battery exercise
identical evidence.  Checks that share expensive Monte Carlo evidence
(the policy-loss panel) accept it as an argument so it is produced once.
"""

from __future__ import annotations

import filecmp
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .boundary_solver import (
    SolverConfig,
    ValueSurface,
    default_config,
    displaced_surface,
    lambda_positivity_check,
    smooth_fit_residual,
    solve,
)
from .levy_model import (
    BrownianDrift,
    CramerLundberg,
    JumpDiffusion,
    LevyModel,
    phi,
    psi_prime,
)
from .path_sim import (
    BarrierRule,
    BoundaryRule,
    ExitUpBeforeDown,
    ImmediateRule,
    LaplaceG,
    MCEstimate,
    RuinProb,
    _estimate_functionals,
    _estimate_losses_multi,
    estimate_gain_integral,
    estimate_prediction_error,
)
from .scale_kit import (
    ScaleFamily,
    g_laplace,
    g_pth_moment,
    laplace_transform_check,
    scale_w,
)
from .stopping_core import GainSpec, h_curve, u_b_residual, v0_on_negatives

__all__ = [
    "CheckResult",
    "SolvedFamily",
    "FAMILY_KEYS",
    "standard_model",
    "solve_family",
    "policy_loss_panel",
    "check_scale_transform",
    "check_fluctuation_crosschecks",
    "check_equivalence_identity",
    "check_policy_dominance",
    "check_boundary_shape",
    "check_smooth_fit",
    "check_anchor_bounds",
    "check_negative_half_line",
    "check_jump_lambda_positivity",
    "check_extinction_cutoff",
    "check_determinism",
    "run_acceptance",
]


# ---------------------------------------------------------------------------
# Result plumbing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one acceptance check."""

    name: str
    passed: bool
    detail: str
    elapsed: float

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: {self.detail} [{self.elapsed:.1f}s]"


@dataclass(frozen=True)
class SolvedFamily:
    """One worked example solved end to end."""

    spec: GainSpec
    curve: object
    surface: ValueSurface
    diagnostics: dict

    @property
    def v00(self) -> float:
        return float(self.diagnostics["v00"])


FAMILY_KEYS = ("brownian", "jump", "cramer")

#: Monte Carlo horizons per family for the fluctuation cross-checks:
#: (start at 1: two-sided exit and ruin, start at 0: Laplace of g).
_FLUCT_HORIZONS = {
    BrownianDrift: (45.0, 30.0),
    JumpDiffusion: (22.0, 18.0),
    CramerLundberg: (170.0, 60.0),
}


def standard_model(key: str) -> LevyModel:
    """The worked-example parameterisation for a family key."""
    if key == "brownian":
        return BrownianDrift(mu=0.5, sigma=1.0)
    if key == "jump":
        return JumpDiffusion(mu=3.0, sigma=1.0, lam=1.0, rho=1.0)
    if key == "cramer":
        return CramerLundberg(c=1.5, lam=1.0, rho=1.0)
    raise ValueError(f"unknown family key {key!r}; expected one of {FAMILY_KEYS}")


def solve_family(
    key: str, p: float = 2.0, cfg: SolverConfig | None = None
) -> SolvedFamily:
    """Solve one worked example and bundle the artefacts."""
    spec = GainSpec(standard_model(key), p)
    curve, surface, diagnostics = solve(spec, cfg)
    return SolvedFamily(spec, curve, surface, diagnostics)


# ---------------------------------------------------------------------------
# Closed-form versus quadrature
# ---------------------------------------------------------------------------


def check_scale_transform(
    models: list[LevyModel] | None = None,
    tol: float = 1e-6,
    time_budget: float = 1.0,
) -> CheckResult:
    """Laplace transform of W^(q) against 1/(psi(beta) - q).

    For each family, q in {0, 1} and beta at Phi(q) + {0.5, 2}, the
    truncated quadrature of the transform must match the closed form to
    ``tol`` within the time budget.
    """
    if models is None:
        models = [standard_model(k) for k in FAMILY_KEYS]
    t0 = time.time()
    worst = 0.0
    worst_at = ""
    for model in models:
        fam = ScaleFamily(model)
        for q in (0.0, 1.0):
            for bump in (0.5, 2.0):
                beta = phi(model, q) + bump
                numeric, exact = laplace_transform_check(fam, q, beta)
                err = abs(numeric - exact)
                if err > worst:
                    worst = err
                    worst_at = (
                        f"{type(model).__name__}, q={q:g}, beta=Phi+{bump:g}"
                    )
    elapsed = time.time() - t0
    passed = worst < tol and elapsed < time_budget
    detail = f"max |transform error| = {worst:.2e} < {tol:.0e} ({worst_at})"
    if elapsed >= time_budget:
        detail += f"; over time budget {time_budget:.0f}s"
    return CheckResult("scale-transform identity", passed, detail, elapsed)


# ---------------------------------------------------------------------------
# Fluctuation Monte Carlo cross-checks
# ---------------------------------------------------------------------------


def check_fluctuation_crosschecks(
    models: list[LevyModel] | None = None,
    n_exit: int = 60_000,
    n_laplace: int = 40_000,
    dt: float = 1e-2,
    master_seed: int = 21,
    time_budget: float = 120.0,
) -> CheckResult:
    """Path simulation against the fluctuation identities, per family.

    Two ensembles per family share skeletons: the two-sided exit
    P_1(reach 2 before 0) = W(1)/W(2) and the ruin probability
    1 - psi'(0+) W(1) run from x0 = 1; the Laplace transform
    E_0(e^{-g}) = g_laplace(1, 0) runs from the origin.  Each estimate
    must sit within three standard errors of its closed form.
    """
    if models is None:
        models = [standard_model(k) for k in FAMILY_KEYS]
    t0 = time.time()
    rows = []
    all_ok = True
    for model in models:
        fam = ScaleFamily(model)
        h_exit, h_lap = _FLUCT_HORIZONS[type(model)]
        exit_est, ruin_est = _estimate_functionals(
            model,
            [ExitUpBeforeDown(x=1.0, a=2.0), RuinProb(x=1.0)],
            1.0,
            n_exit,
            h_exit,
            dt,
            master_seed,
        )
        (lap_est,) = _estimate_functionals(
            model,
            [LaplaceG(q=1.0, x0=0.0)],
            0.0,
            n_laplace,
            h_lap,
            dt,
            master_seed + 1,
        )
        targets = (
            float(scale_w(fam, 1.0) / scale_w(fam, 2.0)),
            1.0 - fam.psi_prime0 * float(scale_w(fam, 1.0)),
            float(g_laplace(fam, 1.0, 0.0)),
        )
        tags = ("exit", "ruin", "laplace")
        for tag, est, target in zip(tags, (exit_est, ruin_est, lap_est), targets):
            z = abs(est.mean - target) / est.stderr
            ok = z <= 3.0
            all_ok = all_ok and ok
            rows.append(f"{type(model).__name__}.{tag} z={z:.2f}")
    elapsed = time.time() - t0
    passed = all_ok and elapsed < time_budget
    detail = "; ".join(rows) + " (each needs z <= 3)"
    if elapsed >= time_budget:
        detail += f"; over time budget {time_budget:.0f}s"
    return CheckResult("fluctuation cross-checks", passed, detail, elapsed)


# ---------------------------------------------------------------------------
# Policy-loss panel (shared Monte Carlo evidence)
# ---------------------------------------------------------------------------

_BARRIER_LEVELS = (0.5, 1.0, 1.5, 2.0, 3.0, 4.0)


def policy_loss_panel(
    bd: SolvedFamily,
    n_paths: int = 100_000,
    horizon: float = 70.0,
    dt: float = 1e-2,
    master_seed: int = 11,
) -> tuple[list[MCEstimate], float]:
    """Losses of the solved rule, six barriers, and stopping at once.

    One common skeleton ensemble prices every rule, so comparisons ride
    on common random numbers.  Returns (estimates, elapsed); order is
    [boundary, barriers..., immediate].
    """
    rules = [BoundaryRule(bd.curve)]
    rules += [BarrierRule(a) for a in _BARRIER_LEVELS]
    rules.append(ImmediateRule())
    t0 = time.time()
    estimates = _estimate_losses_multi(
        bd.spec.model, rules, bd.spec.p, n_paths, horizon, dt, master_seed
    )
    return estimates, time.time() - t0


def check_equivalence_identity(
    bd: SolvedFamily,
    panel: tuple[list[MCEstimate], float] | None = None,
    time_budget: float = 300.0,
    **panel_kwargs,
) -> CheckResult:
    """Simulated loss of the solved rule against 2 V(0,0) + E(g^2).

    The excursion formulation and the plain loss differ by an affine
    map, so the Monte Carlo loss of the solved rule must sit within
    three standard errors of 2 V00 + E(g^2).
    """
    if panel is None:
        panel = policy_loss_panel(bd, **panel_kwargs)
    estimates, elapsed = panel
    est = estimates[0]
    g2 = float(g_pth_moment(bd.spec.fam, bd.spec.p))
    target = bd.spec.p * bd.v00 + g2
    z = abs(est.mean - target) / est.stderr
    passed = z <= 3.0 and elapsed < time_budget
    detail = (
        f"loss {est.mean:.4f} +- {est.stderr:.4f} vs 2*V00+E(g^2) = "
        f"{target:.4f} (z={z:.2f}, censored={est.censored_fraction:.1e})"
    )
    if elapsed >= time_budget:
        detail += f"; over time budget {time_budget:.0f}s"
    return CheckResult("loss equivalence identity", passed, detail, elapsed)


def check_policy_dominance(
    bd: SolvedFamily,
    panel: tuple[list[MCEstimate], float] | None = None,
    time_budget: float = 600.0,
    **panel_kwargs,
) -> CheckResult:
    """Solved rule beats every constant barrier and stopping at once.

    Dominance within two combined standard errors, on common random
    numbers; stopping at once has loss exactly E(g^2).
    """
    if panel is None:
        panel = policy_loss_panel(bd, **panel_kwargs)
    estimates, elapsed = panel
    sol = estimates[0]
    comparators = list(zip(_BARRIER_LEVELS, estimates[1:-1]))
    rows = []
    all_ok = True
    for level, est in comparators:
        slack = 2.0 * math.hypot(sol.stderr, est.stderr)
        ok = sol.mean <= est.mean + slack
        all_ok = all_ok and ok
        rows.append(f"a={level:g}: {est.mean:.2f}")
    imm = estimates[-1]
    g2 = float(g_pth_moment(bd.spec.fam, bd.spec.p))
    ok_imm = sol.mean <= g2 + 2.0 * sol.stderr
    all_ok = all_ok and ok_imm
    passed = all_ok and elapsed < time_budget
    detail = (
        f"solved {sol.mean:.2f} <= barriers {{" + ", ".join(rows)
        + f"}} and at-once {imm.mean:.2f} (exact {g2:g})"
    )
    if elapsed >= time_budget:
        detail += f"; over time budget {time_budget:.0f}s"
    return CheckResult("policy dominance", passed, detail, elapsed)


# ---------------------------------------------------------------------------
# Boundary geometry and smooth fit
# ---------------------------------------------------------------------------


def check_boundary_shape(
    bd: SolvedFamily,
    u_report: float = 50.0,
    tail_gap_tol: float = 5e-2,
) -> CheckResult:
    """Monotonicity, domination of h, early steepness, and the far gap.

    The final clause compares b and h at the reporting edge at the
    pinned tolerance.  The two curves share their limit but not their
    decay rate (b falls like u^{-1/3} against h's 1/u), so the gap at
    u = 50 is structural; the clause is kept at its stated tolerance
    and reports the measured gap honestly.
    """
    t0 = time.time()
    curve = bd.curve
    u = curve.u_grid
    b = curve.b_values
    in_range = u <= u_report
    non_increasing = bool(np.all(np.diff(b) <= 1e-12))
    h_vals = np.array([h_curve(bd.spec, float(ui)) for ui in u[in_range]])
    dominates_h = bool(np.all(b[in_range] >= h_vals - 1e-9))
    b_small = float(curve(1e-2))
    b_one = float(curve(1.0))
    steep = b_small >= 2.0 * b_one
    gap = abs(float(curve(u_report)) - h_curve(bd.spec, u_report))
    tail_ok = gap < tail_gap_tol
    passed = non_increasing and dominates_h and steep and tail_ok
    parts = [
        f"non-increasing: {'ok' if non_increasing else 'VIOLATED'}",
        f"b >= h: {'ok' if dominates_h else 'VIOLATED'}",
        f"b(0.01)={b_small:.3f} >= 2 b(1)={2 * b_one:.3f}: "
        f"{'ok' if steep else 'VIOLATED'}",
        f"|b({u_report:g})-h({u_report:g})|={gap:.4f} < {tail_gap_tol:g}: "
        + (
            "ok"
            if tail_ok
            else "VIOLATED (limits agree, rates differ: u^-1/3 vs 1/u)"
        ),
    ]
    return CheckResult(
        "boundary shape", passed, "; ".join(parts), time.time() - t0
    )


def check_smooth_fit(
    bd: SolvedFamily,
    tol: float = 1e-2,
    shift: float = 0.3,
    inflation_min: float = 5.0,
    u_report: float = 50.0,
) -> CheckResult:
    """First-order contact of the value at the boundary, and its sharpness.

    The normalised one-sided slope must stay below ``tol`` at every
    clock node in the reporting range, and displacing the whole curve
    upward by ``shift`` must inflate the worst residual by at least
    ``inflation_min``, showing the measure actually discriminates.
    """
    t0 = time.time()
    curve = bd.curve
    u = curve.u_grid
    mask = (u <= u_report) & (curve.b_values > 0.0)
    sf = np.asarray(bd.diagnostics["smooth_fit_residuals"], dtype=float)
    base = float(np.nanmax(np.abs(sf[mask])))
    moved = displaced_surface(bd.surface, shift)
    worst_moved = 0.0
    for ui in u[mask]:
        worst_moved = max(
            worst_moved, abs(smooth_fit_residual(moved, float(ui)))
        )
    inflation = worst_moved / base if base > 0.0 else math.inf
    passed = base < tol and inflation >= inflation_min
    detail = (
        f"max |residual| = {base:.2e} < {tol:.0e}; +{shift:g} displacement "
        f"inflates to {worst_moved:.2e} ({inflation:.1f}x >= "
        f"{inflation_min:g}x)"
    )
    return CheckResult("smooth fit", passed, detail, time.time() - t0)


# ---------------------------------------------------------------------------
# Anchor values and the negative half-line
# ---------------------------------------------------------------------------


def check_anchor_bounds(solved: list[SolvedFamily]) -> CheckResult:
    """-E(g^p)/p <= V(0,0) < 0 for every solved configuration."""
    t0 = time.time()
    rows = []
    all_ok = True
    for fam_solved in solved:
        g_p = float(g_pth_moment(fam_solved.spec.fam, fam_solved.spec.p))
        lo = -g_p / fam_solved.spec.p
        v00 = fam_solved.v00
        ok = lo <= v00 < 0.0
        all_ok = all_ok and ok
        rows.append(
            f"{type(fam_solved.spec.model).__name__}: {v00:.4f} in "
            f"[{lo:.4f}, 0)" + ("" if ok else " VIOLATED")
        )
    return CheckResult(
        "anchor bounds", all_ok, "; ".join(rows), time.time() - t0
    )


def check_negative_half_line(
    bd: SolvedFamily,
    x0: float = -1.0,
    n_paths: int = 30_000,
    horizon: float = 30.0,
    dt: float = 1e-2,
    master_seed: int = 31,
) -> CheckResult:
    """Closed form below the axis against the simulated gain integral.

    Below zero the clock is frozen, so V(0, x) - V(0,0) equals the
    expected gain collected up to the first passage above the axis;
    the closed form must match the Monte Carlo within three standard
    errors.
    """
    t0 = time.time()
    est = estimate_gain_integral(
        bd.spec, x0, n_paths, horizon, dt, master_seed
    )
    target = float(v0_on_negatives(bd.spec, x0, bd.v00))
    z = abs(target - (est.mean + bd.v00)) / est.stderr
    passed = z <= 3.0
    detail = (
        f"closed form {target:.4f} vs MC {est.mean + bd.v00:.4f} "
        f"+- {est.stderr:.4f} at x={x0:g} (z={z:.2f})"
    )
    return CheckResult(
        "negative half-line value", passed, detail, time.time() - t0
    )


# ---------------------------------------------------------------------------
# Jump-family structure
# ---------------------------------------------------------------------------


def check_jump_lambda_positivity(
    jd: SolvedFamily,
    floor: float = -1e-3,
) -> CheckResult:
    """Supermartingale margin of the gain above the solved boundary.

    Samples G(u,x) + jump-compensation integral on a 10 x 10 grid with
    x strictly above b(u).  The x offsets are multiplicative
    (x = b(u) (1 + 0.2 j)) because the reported boundary carries
    placement noise of order a fifth of its level at the clock
    extremes; inside that skin the stop/continue classification is
    below the kernel resolution.
    """
    t0 = time.time()
    u_probes = np.geomspace(0.02, 40.0, 10)
    worst = math.inf
    worst_at = (math.nan, math.nan)
    for uu in u_probes:
        b = float(jd.curve(float(uu)))
        for j in range(1, 11):
            x = b * (1.0 + 0.2 * j)
            val = lambda_positivity_check(jd.surface, float(uu), float(x))
            if val < worst:
                worst = val
                worst_at = (float(uu), float(x))
    passed = worst > floor
    detail = (
        f"min margin {worst:+.2e} at (u={worst_at[0]:.3g}, "
        f"x={worst_at[1]:.3g}) > {floor:g}"
    )
    return CheckResult(
        "jump supermartingale margin", passed, detail, time.time() - t0
    )


def check_extinction_cutoff(cl: SolvedFamily) -> CheckResult:
    """Finite extinction clock with the right sign structure around it.

    The clock u_b must be finite, the extinction residual must change
    sign across it, and the solved boundary must vanish at grid nodes
    past u_b while staying positive below.
    """
    t0 = time.time()
    curve = cl.curve
    u_b = curve.u_b
    finite = math.isfinite(u_b)
    rows = [f"u_b = {u_b:.4f}"]
    if finite:
        res_lo = u_b_residual(cl.spec, 0.9 * u_b, cl.v00)
        res_hi = u_b_residual(cl.spec, 1.1 * u_b, cl.v00)
        sign_change = res_lo < 0.0 < res_hi
        above = curve.u_grid >= u_b
        zero_above = bool(np.all(curve.b_values[above] == 0.0))
        positive_below = bool(np.all(curve.b_values[~above] > 0.0))
        rows += [
            f"residual {res_lo:+.3f} -> {res_hi:+.3f} across u_b",
            f"b = 0 on {int(above.sum())} nodes past u_b: "
            f"{'ok' if zero_above else 'VIOLATED'}",
            f"b > 0 on {int((~above).sum())} nodes below: "
            f"{'ok' if positive_below else 'VIOLATED'}",
        ]
        passed = sign_change and zero_above and positive_below
    else:
        rows.append("u_b not finite: VIOLATED")
        passed = False
    return CheckResult(
        "extinction cutoff", passed, "; ".join(rows), time.time() - t0
    )


# ---------------------------------------------------------------------------
# Determinism
# ---------------------------------------------------------------------------

_DETERMINISM_CONFIG = """\
model.family = brownian_drift
model.mu = 0.5
model.sigma = 1.0
p = 2.0
solver.u_max = 50.0
solver.n_u = 40
sim.n_paths = 4000
sim.horizon = 30.0
sim.dt = 0.01
sim.master_seed = 7
"""


def check_determinism(
    n_paths: int = 4000,
    horizon: float = 30.0,
    dt: float = 1e-2,
) -> CheckResult:
    """Byte-reproducible outputs and seed-independent estimates.

    Runs the solve and simulate commands twice into separate
    directories and compares the emitted files byte for byte, then
    checks that loss estimates from two disjoint master seeds agree
    within three combined standard errors.
    """
    from . import cli  # deferred: the command layer imports this module

    t0 = time.time()
    rows = []
    all_ok = True
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        config = root / "run.cfg"
        config.write_text(_DETERMINISM_CONFIG, encoding="ascii")
        for cmd, extra, names in (
            ("solve", [], ("boundary.csv", "value.csv")),
            ("simulate", ["--rule", "barrier:1.0"], ("sim.csv",)),
        ):
            dirs = [root / f"{cmd}_{k}" for k in "ab"]
            for d in dirs:
                code = cli.main(
                    [cmd, "--config", str(config), "--out", str(d)] + extra
                )
                if code != 0:
                    return CheckResult(
                        "determinism",
                        False,
                        f"{cmd} exited {code}",
                        time.time() - t0,
                    )
            for name in names:
                same = filecmp.cmp(dirs[0] / name, dirs[1] / name, shallow=False)
                all_ok = all_ok and same
                rows.append(
                    f"{name} {'identical' if same else 'DIFFERS'}"
                )
    model = standard_model("brownian")
    est_a = estimate_prediction_error(
        model, BarrierRule(1.0), 2.0, n_paths, horizon, dt, master_seed=1
    )
    est_b = estimate_prediction_error(
        model, BarrierRule(1.0), 2.0, n_paths, horizon, dt, master_seed=2
    )
    gap = abs(est_a.mean - est_b.mean)
    slack = 3.0 * math.hypot(est_a.stderr, est_b.stderr)
    seeds_ok = gap <= slack
    all_ok = all_ok and seeds_ok
    rows.append(
        f"disjoint seeds: |{est_a.mean:.3f} - {est_b.mean:.3f}| = "
        f"{gap:.3f} <= {slack:.3f}"
    )
    return CheckResult(
        "determinism", all_ok, "; ".join(rows), time.time() - t0
    )


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


def run_acceptance(
    family: str | None = None,
    solved: dict[str, SolvedFamily] | None = None,
) -> list[CheckResult]:
    """Run the acceptance checks applicable to one family, or all.

    ``family`` of None runs the complete battery.  Pre-solved artefacts
    can be passed in ``solved`` keyed by family; anything missing is
    solved here at default configuration.
    """
    if family is not None and family not in FAMILY_KEYS:
        raise ValueError(
            f"unknown family key {family!r}; expected one of {FAMILY_KEYS}"
        )
    keys = FAMILY_KEYS if family is None else (family,)
    solved = dict(solved or {})
    for key in keys:
        if key not in solved:
            solved[key] = solve_family(key)
    models = [solved[key].spec.model for key in keys]

    results = [
        check_scale_transform(models),
        check_fluctuation_crosschecks(models),
    ]
    if "brownian" in keys:
        bd = solved["brownian"]
        panel = policy_loss_panel(bd)
        results.append(check_equivalence_identity(bd, panel))
        results.append(check_policy_dominance(bd, panel))
        results.append(check_boundary_shape(bd))
        results.append(check_smooth_fit(bd))
    results.append(check_anchor_bounds([solved[key] for key in keys]))
    if "brownian" in keys:
        results.append(check_negative_half_line(solved["brownian"]))
    if "jump" in keys:
        results.append(check_jump_lambda_positivity(solved["jump"]))
    if "cramer" in keys:
        results.append(check_extinction_cutoff(solved["cramer"]))
    if "brownian" in keys:
        results.append(check_determinism())
    return results
