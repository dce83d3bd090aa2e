"""Command-line front end: model checks, solving, evaluation, simulation.

Subcommands
-----------
``model-check``
    Parse and validate the configured model; print its fluctuation
    summary (drift, right-inverse derivatives, variation class).
``solve``
    Solve the prediction problem; write ``boundary.csv`` (u, b, h) and
    ``value.csv`` (u, x, V) plus a diagnostics report.
``value``
    Solve, then tabulate the value surface on the configured grid.
``simulate``
    Estimate E|tau - g|^p for one or more stopping rules; write
    ``sim.csv``.
``validate``
    Run the acceptance battery applicable to the configured family.

Configuration is flat ``key = value`` text with section prefixes
(``model.mu = 0.5``); unknown keys are rejected.  All emitted CSV is
locale-independent, 12 significant digits, ``\\n`` line endings, with
``inf`` as the infinity sentinel; NaN anywhere in an output is a hard
error.

Exit codes: 0 success; 1 malformed configuration or arguments; 2 model
rejected; 3 solver failure (or invalid solver output); 4 unreliable
censoring under ``--strict``; 5 validation failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boundary_solver import (
    SolverConfig,
    SolverError,
    default_config,
    solve,
)
from .levy_model import (
    BrownianDrift,
    CramerLundberg,
    JumpDiffusion,
    LevyModel,
    has_gaussian_part,
    is_infinite_variation,
    phi_derivatives_at_zero,
    psi_prime,
    validate,
)
from .path_sim import (
    BarrierRule,
    BoundaryRule,
    ImmediateRule,
    OracleRule,
    Rule,
    default_horizon,
    estimate_prediction_error,
)
from .stopping_core import GainSpec, h_curve
from . import validation

__all__ = [
    "CliError",
    "RunConfig",
    "parse_config",
    "parse_rule",
    "main",
]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MODEL = 2
EXIT_SOLVER = 3
EXIT_CENSORING = 4
EXIT_VALIDATION = 5


class CliError(Exception):
    """Fatal command error carrying its process exit code."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_MODEL_BUILDERS = {
    "brownian_drift": (BrownianDrift, ("mu", "sigma")),
    "jump_diffusion": (JumpDiffusion, ("mu", "sigma", "lam", "rho")),
    "cramer_lundberg": (CramerLundberg, ("c", "lam", "rho")),
}

_FAMILY_KEY = {
    BrownianDrift: "brownian",
    JumpDiffusion: "jump",
    CramerLundberg: "cramer",
}

_SOLVER_INT_FIELDS = {
    "n_u", "n_r", "max_outer", "max_inner", "mc_kernel_paths",
    "n_s", "n_x", "n_c", "kernel_seed",
}
_SOLVER_FIELDS = {f.name for f in dataclasses.fields(SolverConfig)}

_SIM_DEFAULTS = {
    "n_paths": 10_000,
    "horizon": None,
    "dt": 1e-2,
    "master_seed": 0,
}

_VALUE_U_DEFAULT = (0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0)
_VALUE_X_DEFAULT = (0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0)


@dataclass(frozen=True)
class RunConfig:
    """Parsed, typed run configuration."""

    model: LevyModel
    p: float = 2.0
    solver_overrides: dict = field(default_factory=dict)
    n_paths: int = 10_000
    horizon: float | None = None
    dt: float = 1e-2
    master_seed: int = 0
    out_dir: str | None = None
    value_u: tuple = _VALUE_U_DEFAULT
    value_x: tuple = _VALUE_X_DEFAULT


def _parse_float(key: str, raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise CliError(EXIT_USAGE, f"key {key!r}: not a number: {raw!r}")
    if math.isnan(value):
        raise CliError(EXIT_USAGE, f"key {key!r}: NaN is not a valid value")
    return value


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise CliError(EXIT_USAGE, f"key {key!r}: not an integer: {raw!r}")


def _parse_float_list(key: str, raw: str) -> tuple:
    return tuple(_parse_float(key, part) for part in raw.split(",") if part.strip())


def parse_config(path: str | Path) -> RunConfig:
    """Parse a flat ``key = value`` configuration file.

    Sections are dotted prefixes (``model.``, ``solver.``, ``sim.``,
    ``value.``, ``output.``); ``#`` starts a comment.  Unknown keys are
    rejected so typos cannot silently fall back to defaults.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_USAGE, f"cannot read config {path}: {exc}")
    entries: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise CliError(
                EXIT_USAGE, f"{path}:{lineno}: expected key = value, got {body!r}"
            )
        key, raw = (part.strip() for part in body.split("=", 1))
        if not key or not raw:
            raise CliError(
                EXIT_USAGE, f"{path}:{lineno}: empty key or value in {body!r}"
            )
        if key in entries:
            raise CliError(EXIT_USAGE, f"{path}:{lineno}: duplicate key {key!r}")
        entries[key] = raw

    family = entries.pop("model.family", None)
    if family is None:
        raise CliError(EXIT_USAGE, "config is missing model.family")
    if family not in _MODEL_BUILDERS:
        raise CliError(
            EXIT_USAGE,
            f"unknown model.family {family!r}; expected one of "
            f"{sorted(_MODEL_BUILDERS)}",
        )
    builder, param_names = _MODEL_BUILDERS[family]
    params = {}
    for name in param_names:
        raw = entries.pop(f"model.{name}", None)
        if raw is None:
            raise CliError(EXIT_USAGE, f"config is missing model.{name}")
        params[name] = _parse_float(f"model.{name}", raw)
    try:
        model = builder(**params)
    except ValueError as exc:
        raise CliError(EXIT_MODEL, f"model rejected: {exc}")

    p = _parse_float("p", entries.pop("p", "2.0"))

    solver_overrides: dict = {}
    for key in [k for k in entries if k.startswith("solver.")]:
        name = key[len("solver."):]
        if name not in _SOLVER_FIELDS:
            raise CliError(EXIT_USAGE, f"unknown solver key {key!r}")
        raw = entries.pop(key)
        solver_overrides[name] = (
            _parse_int(key, raw) if name in _SOLVER_INT_FIELDS
            else _parse_float(key, raw)
        )

    sim = dict(_SIM_DEFAULTS)
    for name in ("n_paths", "master_seed"):
        raw = entries.pop(f"sim.{name}", None)
        if raw is not None:
            sim[name] = _parse_int(f"sim.{name}", raw)
    for name in ("horizon", "dt"):
        raw = entries.pop(f"sim.{name}", None)
        if raw is not None:
            sim[name] = _parse_float(f"sim.{name}", raw)

    out_dir = entries.pop("output.dir", None)
    value_u = _VALUE_U_DEFAULT
    value_x = _VALUE_X_DEFAULT
    raw = entries.pop("value.u", None)
    if raw is not None:
        value_u = _parse_float_list("value.u", raw)
    raw = entries.pop("value.x", None)
    if raw is not None:
        value_x = _parse_float_list("value.x", raw)

    if entries:
        raise CliError(
            EXIT_USAGE,
            "unknown config keys: " + ", ".join(sorted(entries)),
        )
    return RunConfig(
        model=model,
        p=p,
        solver_overrides=solver_overrides,
        n_paths=int(sim["n_paths"]),
        horizon=sim["horizon"],
        dt=float(sim["dt"]),
        master_seed=int(sim["master_seed"]),
        out_dir=out_dir,
        value_u=value_u,
        value_x=value_x,
    )


def _build_spec(config: RunConfig) -> GainSpec:
    try:
        return GainSpec(config.model, config.p)
    except ValueError as exc:
        raise CliError(EXIT_MODEL, str(exc))


def _solver_config(
    spec: GainSpec, config: RunConfig, seed: int | None
) -> SolverConfig:
    overrides = dict(config.solver_overrides)
    if seed is not None:
        overrides["kernel_seed"] = seed
    return dataclasses.replace(default_config(spec), **overrides)


def _out_dir(config: RunConfig, flag: str | None) -> Path:
    target = flag or config.out_dir or "."
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# Output formatting
# ---------------------------------------------------------------------------


def _fmt(value: float) -> str:
    """12-significant-digit decimal; ``inf`` sentinel; NaN is fatal."""
    v = float(value)
    if math.isnan(v):
        raise CliError(EXIT_SOLVER, "NaN reached an output table")
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.12g}"


def _write_csv(path: Path, header: str, rows: list[tuple]) -> None:
    lines = [header]
    lines += [",".join(_fmt(cell) if not isinstance(cell, str) else cell
                       for cell in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_model_check(config: RunConfig) -> int:
    """Print the model's fluctuation summary; exit 2 on rejection."""
    model = config.model
    verdict = validate(model, config.p)
    print(f"model: {model!r}")
    if not verdict.accepted:
        print(f"rejected: {verdict.reason}")
        return EXIT_MODEL
    phi1, phi2 = phi_derivatives_at_zero(model)
    print(f"psi'(0+) = {_fmt(psi_prime(model, 0.0))} (closed form)")
    print(f"Phi'(0)  = {_fmt(phi1)} (closed form)")
    print(f"Phi''(0) = {_fmt(phi2)} (closed form)")
    gaussian = "with" if has_gaussian_part(model) else "without"
    variation = "infinite" if is_infinite_variation(model) else "finite"
    print(f"variation: {variation} ({gaussian} Gaussian part)")
    print(f"accepted: {verdict.reason}")
    return EXIT_OK


def _solve_configured(config: RunConfig, seed: int | None):
    spec = _build_spec(config)
    cfg = _solver_config(spec, config, seed)
    try:
        curve, surface, diagnostics = solve(spec, cfg)
    except SolverError as exc:
        raise CliError(EXIT_SOLVER, f"solver failed: {exc}")
    return spec, curve, surface, diagnostics


def _write_boundary(path: Path, spec: GainSpec, curve) -> None:
    rows = [
        (float(u), float(b), h_curve(spec, float(u)))
        for u, b in zip(curve.u_grid, curve.b_values)
    ]
    _write_csv(path, "u,b,h", rows)


def _write_values(path: Path, surface, u_points, x_points) -> None:
    rows = [
        (float(u), float(x), surface.value(float(u), float(x)))
        for u in u_points
        for x in x_points
    ]
    _write_csv(path, "u,x,V", rows)


def cmd_solve(config: RunConfig, out_flag: str | None, seed: int | None) -> int:
    """Solve and write boundary.csv, value.csv, and a report."""
    spec, curve, surface, diagnostics = _solve_configured(config, seed)
    out = _out_dir(config, out_flag)
    _write_boundary(out / "boundary.csv", spec, curve)
    _write_values(out / "value.csv", surface, config.value_u, config.value_x)
    sf = np.asarray(diagnostics["smooth_fit_residuals"], dtype=float)
    sf_max = float(np.nanmax(np.abs(sf))) if np.any(np.isfinite(sf)) else math.nan
    print(f"V00 = {_fmt(diagnostics['v00'])} (fixed point)")
    print(f"u_b = {_fmt(curve.u_b)}" + (
        " (no finite extinction)" if math.isinf(curve.u_b) else " (extinction clock)"
    ))
    audit = diagnostics.get("boundary_residual_audit_max")
    if audit is not None:
        print(f"max boundary-equation residual = {_fmt(audit)} (audit)")
    if math.isfinite(sf_max):
        print(f"max smooth-fit residual = {_fmt(sf_max)} (normalised slope)")
    print(f"closure residual = {_fmt(diagnostics['closure_residual'])}")
    print(f"wrote {out / 'boundary.csv'} and {out / 'value.csv'}")
    return EXIT_OK


def cmd_value(config: RunConfig, out_flag: str | None, seed: int | None) -> int:
    """Solve and tabulate V on the configured (u, x) grid."""
    _, _, surface, _ = _solve_configured(config, seed)
    out = _out_dir(config, out_flag)
    _write_values(out / "value.csv", surface, config.value_u, config.value_x)
    print(f"wrote {out / 'value.csv'}")
    return EXIT_OK


def parse_rule(raw: str, config: RunConfig) -> Rule:
    """Parse a rule spec: immediate, oracle, barrier:<a>, boundary:<csv>."""
    if raw == "immediate":
        return ImmediateRule()
    if raw == "oracle":
        return OracleRule()
    if raw.startswith("barrier:"):
        level = _parse_float("--rule barrier", raw.split(":", 1)[1])
        try:
            return BarrierRule(level)
        except ValueError as exc:
            raise CliError(EXIT_USAGE, f"bad rule {raw!r}: {exc}")
    if raw.startswith("boundary:"):
        path = raw.split(":", 1)[1]
        try:
            text = Path(path).read_text(encoding="ascii")
        except OSError as exc:
            raise CliError(EXIT_USAGE, f"cannot read boundary file {path}: {exc}")
        lines = text.strip().splitlines()
        if not lines or lines[0] != "u,b,h":
            raise CliError(
                EXIT_USAGE, f"{path}: expected header 'u,b,h' in boundary file"
            )
        try:
            table = np.array(
                [[float(cell) for cell in line.split(",")] for line in lines[1:]]
            )
        except ValueError as exc:
            raise CliError(EXIT_USAGE, f"{path}: bad row in boundary file: {exc}")
        if table.ndim != 2 or table.shape[1] != 3 or table.shape[0] < 2:
            raise CliError(EXIT_USAGE, f"{path}: need at least two u,b,h rows")
        us, bs = table[:, 0], table[:, 1]
        if np.any(np.diff(us) <= 0):
            raise CliError(EXIT_USAGE, f"{path}: u column must increase")

        def curve(u):
            return np.interp(u, us, bs)

        return BoundaryRule(curve)
    raise CliError(
        EXIT_USAGE,
        f"unknown rule {raw!r}; expected immediate, oracle, barrier:<a>, "
        "or boundary:<boundary.csv>",
    )


def cmd_simulate(
    config: RunConfig,
    out_flag: str | None,
    rule_specs: list[str],
    seed: int | None,
    strict: bool,
) -> int:
    """Estimate the prediction loss per rule and write sim.csv."""
    if not rule_specs:
        raise CliError(EXIT_USAGE, "simulate needs at least one --rule")
    rules = [(raw, parse_rule(raw, config)) for raw in rule_specs]
    master_seed = config.master_seed if seed is None else seed
    horizon = config.horizon
    if horizon is None:
        horizon = default_horizon(config.model)
    rows = []
    any_unreliable = False
    for raw, rule in rules:
        est = estimate_prediction_error(
            config.model,
            rule,
            config.p,
            config.n_paths,
            horizon,
            config.dt,
            master_seed,
        )
        unreliable = bool(est.extra.get("unreliable", False))
        any_unreliable = any_unreliable or unreliable
        rows.append(
            (raw, est.n_paths, est.mean, est.stderr,
             est.censored_fraction, est.master_seed)
        )
        flag = " [censoring unreliable]" if unreliable else ""
        print(
            f"{raw}: loss = {est.mean:.6g} +- {est.stderr:.3g} "
            f"(n = {est.n_paths}, censored = {est.censored_fraction:.3g})"
            + flag
        )
    out = _out_dir(config, out_flag)
    _write_csv(
        out / "sim.csv",
        "rule,n_paths,mean,stderr,censored_fraction,seed",
        rows,
    )
    print(f"wrote {out / 'sim.csv'}")
    if strict and any_unreliable:
        print("strict mode: censoring flagged unreliable", file=sys.stderr)
        return EXIT_CENSORING
    return EXIT_OK


def cmd_validate(config: RunConfig, seed: int | None) -> int:
    """Run the acceptance battery for the configured family."""
    spec = _build_spec(config)
    key = _FAMILY_KEY[type(config.model)]
    cfg = _solver_config(spec, config, seed)
    try:
        curve, surface, diagnostics = solve(spec, cfg)
    except SolverError as exc:
        raise CliError(EXIT_SOLVER, f"solver failed: {exc}")
    solved = {key: validation.SolvedFamily(spec, curve, surface, diagnostics)}
    results = validation.run_acceptance(key, solved)
    for result in results:
        print(result.line())
    n_pass = sum(r.passed for r in results)
    print(f"passed {n_pass}/{len(results)}")
    return EXIT_OK if n_pass == len(results) else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lastzero",
        description=(
            "Optimal L^p prediction of the last zero of a spectrally "
            "negative Levy process drifting to +infinity."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "model-check": "validate the configured model and print its summary",
        "solve": "solve the stopping problem; write boundary.csv and value.csv",
        "value": "solve and tabulate the value surface on the configured grid",
        "simulate": "Monte Carlo loss of stopping rules; write sim.csv",
        "validate": "run the acceptance battery for the configured family",
    }
    for name, help_text in specs.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument(
            "--config", required=True, help="path to flat key=value config"
        )
        cmd.add_argument(
            "--out", default=None, help="output directory (default: config or .)"
        )
        cmd.add_argument(
            "--seed",
            type=int,
            default=None,
            help="override sim.master_seed (simulate) / solver.kernel_seed (solve)",
        )
        if name == "simulate":
            cmd.add_argument(
                "--rule",
                action="append",
                default=[],
                help=(
                    "stopping rule: immediate, oracle, barrier:<a>, or "
                    "boundary:<boundary.csv>; repeat for several rows"
                ),
            )
            cmd.add_argument(
                "--strict",
                action="store_true",
                help="exit 4 when any estimate's censoring is unreliable",
            )
    return parser


def main(argv: list[str] | None = None) -> int:
    """Dispatch one subcommand; return the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        config = parse_config(args.config)
        if args.command == "model-check":
            return cmd_model_check(config)
        if args.command == "solve":
            return cmd_solve(config, args.out, args.seed)
        if args.command == "value":
            return cmd_value(config, args.out, args.seed)
        if args.command == "simulate":
            return cmd_simulate(
                config, args.out, args.rule, args.seed, args.strict
            )
        return cmd_validate(config, args.seed)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
