"""
Command-line interface

Each subcommand reads one JSON run document, computes one family of
datasets and writes them as CSV tables with JSON sidecars. Re-running the
same document (same seed) reproduces every file byte for byte.

Exit codes: 0 success, 1 usage or configuration error, 2 physics validation
failure, 3 numerical failure.
"""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.datasets import DatasetWriter, config_hash
from core.server import add_server_arguments, apply_cli_args_to_environment, configure_logging
from hscaler import __version__
from hscaler.config import ENV_PREFIX, AppConfig, RunConfig, SweepConfig, load_config, load_run_config
from hscaler.csim import ensemble_moments, propagate_exact, propagate_verlet, sample_gaussian
from hscaler.errors import ConfigurationError, HScalerError, ProtocolValidationFailed, SingularIntegrand
from hscaler.moments import (
    MomentState,
    fundamental_matrices,
    fundamental_matrix,
    integral_from_propagator,
    invariant_expectations,
    max_position_excursion,
    propagate_second_moments,
    quadrature_integrals,
    relative_drift,
)
from hscaler.protocol import ScalingMode, ScalingSpec, build_protocol, validate_protocol
from hscaler.qsim import gaussian_state, level_set_area, measure_moments, propagate, wigner
from hscaler.scaling_service import ScalingService
from hscaler.units import CODE_UNITS_NOTE, code_units_spec, momentum_to_code, position_to_code

logger = logging.getLogger(__name__)

Command = Callable[[RunConfig, AppConfig, DatasetWriter], None]

MOMENT_COLUMNS = ["t", "q_mean", "p_mean", "var_q", "var_p", "cov_qp", "G_mean", "I_mean", "kinetic_energy"]
DIMENSIONAL_UNITS = "dimensional: t, q, p in the units of t_f, mass and hbar of the run document"


def _provenance(run: RunConfig, command: str) -> Dict[str, object]:
    hashed = run.model_dump(mode="json", exclude={"outputs": {"directory"}})
    return {
        "command": command,
        "config_hash": config_hash(hashed),
        "hscaler_version": __version__,
    }


def _snapshot_times(t_f: float, snapshots: int) -> np.ndarray:
    return np.linspace(0.0, t_f, snapshots + 1)


def _fit_slope(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """log-log slope, or None when fewer than two usable points"""
    pairs = [(a, abs(b)) for a, b in zip(x, y) if a > 0 and math.isfinite(b) and b != 0]
    if len({a for a, _ in pairs}) < 2:
        return None
    xs, ys = zip(*pairs)
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


# ============================================================================
# design / validate
# ============================================================================

def cmd_design(run: RunConfig, app: AppConfig, writer: DatasetWriter) -> None:
    """protocol.csv (s, t, u, udot, omega2) with the validation report in its sidecar"""
    spec = run.spec
    traj, program = build_protocol(spec)
    initial = run.initial_state.to_moments(spec.hbar) if run.validation.excursion else None
    report = validate_protocol(traj, program, initial)

    table = program.tabulate(run.outputs.samples)
    columns = ["s", "t", "u", "udot", "omega2"]
    rows = zip(*(table[c] for c in columns))
    writer.write_csv(
        "protocol.csv",
        columns,
        rows,
        metadata={
            "units": DIMENSIONAL_UNITS,
            "spec": spec.model_dump(mode="json"),
            "coefficients": list(traj.coeffs),
            "peak_abs_omega2": program.peak_abs_omega2,
            "peak_time": program.peak_location,
            "validation": report.model_dump(mode="json"),
        },
    )
    if not report.passed:
        raise ProtocolValidationFailed(
            "Designed protocol failed validation",
            details=report.model_dump(mode="json"),
        )


def cmd_validate(run: RunConfig, app: AppConfig, writer: DatasetWriter) -> None:
    """validation.json: protocol checks plus the state-independent scaling check at t_f"""
    spec = run.spec
    traj, program = build_protocol(spec)
    initial = run.initial_state.to_moments(spec.hbar)
    report = validate_protocol(traj, program, initial if run.validation.excursion else None)

    final = propagate_second_moments(fundamental_matrix(program, spec.t_f, spec.mass), initial)
    if spec.mode is ScalingMode.MOMENTUM:
        quantity, before, after = "p_mean", initial.p_mean, final.p_mean
    else:
        quantity, before, after = "q_mean", initial.q_mean, final.q_mean
    expected = spec.scale_factor * before
    error = abs(after - expected) / max(abs(before), 1e-12)
    scaling_ok = error <= 1e-8

    payload = dict(writer.provenance)
    payload.update({
        "spec": spec.model_dump(mode="json"),
        "report": report.model_dump(mode="json"),
        "scaling": {
            "quantity": quantity,
            "initial": before,
            "final": after,
            "expected": expected,
            "relative_error": error,
            "passed": scaling_ok,
        },
        "passed": report.passed and scaling_ok,
    })
    writer.write_json("validation.json", payload)
    if not payload["passed"]:
        raise ProtocolValidationFailed("Protocol validation failed", details={"scaling_error": error})
    logger.info(f"Validation passed: {quantity} ratio error {error:.2e}")


# ============================================================================
# moments
# ============================================================================

def cmd_moments(run: RunConfig, app: AppConfig, writer: DatasetWriter) -> None:
    """moments.csv with invariant and kinetic-energy columns"""
    spec = run.spec
    _, program = build_protocol(spec)
    initial = run.initial_state.to_moments(spec.hbar)
    times = np.linspace(0.0, spec.t_f, run.outputs.samples)

    service = ScalingService(threads=app.compute.threads)
    rows = service.moment_rows(program, initial, times, spec.mass)
    check = service.scaling_check(spec, rows)
    writer.write_csv(
        "moments.csv",
        MOMENT_COLUMNS,
        ([getattr(r, c) for c in MOMENT_COLUMNS] for r in rows),
        metadata={
            "units": DIMENSIONAL_UNITS,
            "spec": spec.model_dump(mode="json"),
            "scaling": check.model_dump(mode="json"),
            "kinetic_energy_ratio": rows[-1].kinetic_energy / rows[0].kinetic_energy,
            "variance_ratio_p": rows[-1].var_p / rows[0].var_p,
        },
    )


# ============================================================================
# qsim / wigner
# ============================================================================

def _wave_packet_initial(run: RunConfig) -> Tuple[float, float, float]:
    """
    <Q>, <P> and σ_Q of the run's initial state in code units

    Raises:
        ConfigurationError: If the state is not a minimum-uncertainty Gaussian
    """
    spec = run.spec
    state = run.initial_state
    minimal_sigma_p = spec.hbar / (2 * state.sigma_q)
    if state.cov_qp != 0.0 or (
        state.sigma_p is not None and not math.isclose(state.sigma_p, minimal_sigma_p, rel_tol=1e-9)
    ):
        raise ConfigurationError(
            "Wave-packet commands need a minimum-uncertainty initial state "
            f"(sigma_p = hbar/(2 sigma_q) = {minimal_sigma_p:g}, cov_qp = 0)",
            details={"sigma_p": state.sigma_p, "cov_qp": state.cov_qp},
        )
    units = (spec.t_f, spec.mass, spec.hbar)
    return (
        position_to_code(state.q_mean, *units),
        momentum_to_code(state.p_mean, *units),
        position_to_code(state.sigma_q, *units),
    )


def _run_wave_packet(run: RunConfig, app: AppConfig):
    q_mean, p_mean, sigma_q = _wave_packet_initial(run)
    traj, program = build_protocol(code_units_spec(run.spec))
    wf = gaussian_state(run.grid, q_mean, p_mean, sigma_q)
    snapshots = propagate(wf, program, snapshots=run.outputs.snapshots, dt=run.grid.dt, workers=app.compute.threads)
    return traj, program, snapshots


def cmd_qsim(run: RunConfig, app: AppConfig, writer: DatasetWriter) -> None:
    """Wave-function snapshots plus measured moments against the exact moment dynamics"""
    traj, program, snapshots = _run_wave_packet(run, app)
    for k, snap in enumerate(snapshots):
        psi = snap.amplitudes
        writer.write_csv(
            f"snapshots/psi_{k:02d}.csv",
            ["Q", "re_psi", "im_psi", "abs2"],
            zip(snap.grid.q, psi.real, psi.imag, np.abs(psi) ** 2),
            metadata={"units": CODE_UNITS_NOTE, "s": snap.time},
        )

    measured = [measure_moments(s) for s in snapshots]
    initial = measured[0].model_copy(update={"time": 0.0})
    exact = [propagate_second_moments(M, initial) for M in fundamental_matrices(program, [s.time for s in snapshots])]
    invariants = [invariant_expectations(traj, m) for m in measured]

    columns = ["s", "q_mean", "p_mean", "var_q", "var_p", "cov_qp", "G_mean", "I_mean", "norm",
               "q_mean_exact", "p_mean_exact"]
    rows = [
        [m.time, m.q_mean, m.p_mean, m.var_q, m.var_p, m.cov_qp, inv.G_mean, inv.I_mean, snap.norm(),
         e.q_mean, e.p_mean]
        for m, inv, snap, e in zip(measured, invariants, snapshots, exact)
    ]
    deviation = max(max(abs(m.q_mean - e.q_mean), abs(m.p_mean - e.p_mean)) for m, e in zip(measured, exact))
    writer.write_csv(
        "qsim_moments.csv",
        columns,
        rows,
        metadata={
            "units": CODE_UNITS_NOTE,
            "grid": run.grid.model_dump(mode="json"),
            "max_mean_deviation": deviation,
            "G_drift": relative_drift([inv.G_mean for inv in invariants]),
            "I_drift": relative_drift([inv.I_mean for inv in invariants]),
            "norm_drift": abs(snapshots[-1].norm() - snapshots[0].norm()),
        },
    )
    logger.info(f"qsim: max |<Q>,<P> - exact| = {deviation:.2e}")


def _wigner_window(state: MomentState, run: RunConfig) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    q_window = run.outputs.q_window
    p_window = run.outputs.p_window
    if q_window is None:
        reach = 8 * math.sqrt(state.var_q)
        q_window = (state.q_mean - reach, state.q_mean + reach)
    if p_window is None:
        reach = 8 * math.sqrt(state.var_p)
        p_window = (state.p_mean - reach, state.p_mean + reach)
    return q_window, p_window


def cmd_wigner(run: RunConfig, app: AppConfig, writer: DatasetWriter) -> None:
    """Wigner grids per snapshot; the contour level is 1/e of the initial peak"""
    _, _, snapshots = _run_wave_packet(run, app)
    level = None
    summary = []
    for k, snap in enumerate(snapshots):
        state = measure_moments(snap)
        q_window, p_window = _wigner_window(state, run)
        grid = wigner(
            snap,
            oversample=run.outputs.wigner_oversample,
            q_window=q_window,
            p_window=p_window,
            workers=app.compute.threads,
        )
        if level is None:
            level = float(grid.W.max()) / math.e
        area = level_set_area(grid, level)
        Q, P = np.meshgrid(grid.q, grid.p, indexing="ij")
        writer.write_csv(
            f"wigner/wigner_{k:02d}.csv",
            ["Q", "P", "W"],
            zip(Q.ravel(), P.ravel(), grid.W.ravel()),
            metadata={
                "units": CODE_UNITS_NOTE,
                "s": snap.time,
                "contour_level": level,
                "contour_area": area,
                "center": [state.q_mean, state.p_mean],
                "shape": list(grid.W.shape),
            },
        )
        summary.append([snap.time, level, area, float(grid.W.max()), state.q_mean, state.p_mean])

    writer.write_csv(
        "wigner_summary.csv",
        ["s", "level", "area", "W_max", "q_mean", "p_mean"],
        summary,
        metadata={"units": CODE_UNITS_NOTE, "area_drift": relative_drift([row[2] for row in summary])},
    )


# ============================================================================
# csim
# ============================================================================

def cmd_csim(run: RunConfig, app: AppConfig, writer: DatasetWriter) -> None:
    """Ensemble snapshots and their moments against the exact moment dynamics"""
    spec = run.spec
    traj, program = build_protocol(spec)
    initial = run.initial_state.to_moments(spec.hbar)
    settings = run.ensemble
    ensemble = sample_gaussian(initial, settings.n, settings.seed, hbar=spec.hbar, workers=app.compute.threads)

    # moments.csv columns first, then the comparison against the exact dynamics
    columns = MOMENT_COLUMNS + ["se_q_mean", "se_p_mean", "q_mean_exact", "p_mean_exact", "z_q", "z_p"]
    rows = []
    final = ensemble
    for k, t in enumerate(_snapshot_times(spec.t_f, run.outputs.snapshots)):
        M = fundamental_matrix(program, float(t), spec.mass)
        moved = propagate_exact(ensemble, program, float(t), spec.mass)
        summary = ensemble_moments(moved)
        exact = propagate_second_moments(M, initial)
        s = summary.state
        invariants = invariant_expectations(traj, s, spec.mass)
        rows.append([
            t, s.q_mean, s.p_mean, s.var_q, s.var_p, s.cov_qp, invariants.G_mean, invariants.I_mean,
            s.kinetic_energy(spec.mass), summary.se_q_mean, summary.se_p_mean,
            exact.q_mean, exact.p_mean,
            (s.q_mean - exact.q_mean) / summary.se_q_mean if summary.se_q_mean else 0.0,
            (s.p_mean - exact.p_mean) / summary.se_p_mean if summary.se_p_mean else 0.0,
        ])
        if run.outputs.write_ensembles:
            writer.write_csv(
                f"ensembles/ensemble_{k:02d}.csv",
                ["q", "p", "weight"],
                zip(moved.q, moved.p, moved.weight),
                metadata={"units": DIMENSIONAL_UNITS, "t": float(t), "seed": settings.seed},
            )
        final = moved

    if spec.mode is ScalingMode.MOMENTUM:
        scaled = np.abs(final.p - spec.scale_factor * ensemble.p) / np.maximum(np.abs(ensemble.p), 1e-12)
    else:
        scaled = np.abs(final.q - spec.scale_factor * ensemble.q) / np.maximum(np.abs(ensemble.q), 1e-12)
    metadata = {
        "units": DIMENSIONAL_UNITS,
        "n": settings.n,
        "seed": settings.seed,
        "max_elementwise_scaling_error": float(np.max(scaled)),
        "max_abs_z": float(max(max(abs(r[-2]), abs(r[-1])) for r in rows)),
    }
    if settings.verlet_dt is not None:
        verlet = propagate_verlet(ensemble, program, settings.verlet_dt, mass=spec.mass, workers=app.compute.threads)
        metadata["verlet_dt"] = settings.verlet_dt
        metadata["verlet_max_point_error"] = float(
            max(np.max(np.abs(verlet.q - final.q)), np.max(np.abs(verlet.p - final.p)))
        )
    writer.write_csv("csim_moments.csv", columns, rows, metadata=metadata)


# ============================================================================
# sweep
# ============================================================================

def _final_integral(spec: ScalingSpec, traj, program) -> float:
    if spec.mode is not ScalingMode.MOMENTUM:
        return float("nan")
    try:
        return quadrature_integrals(traj, spec.t_f).I
    except SingularIntegrand:
        return integral_from_propagator(fundamental_matrix(program, spec.t_f, spec.mass), traj)


def cmd_sweep(run: RunConfig, app: AppConfig, writer: DatasetWriter) -> None:
    """sweep.csv over t_f (and optionally scale factors) with log-log slopes in the sidecar"""
    sweep = run.sweep or SweepConfig()
    factors = sweep.scale_factors or [run.spec.scale_factor]
    if not sweep.t_f or not factors:
        raise ConfigurationError("Sweep is empty: give at least one t_f and one scale factor")

    initial = run.initial_state.to_moments(run.spec.hbar)
    rows: List[list] = []
    slopes: Dict[str, Dict[str, object]] = {}
    for factor in factors:
        peaks, integrals, times = [], [], []
        for t_f in sweep.t_f:
            try:
                spec = ScalingSpec(**{**run.spec.model_dump(), "scale_factor": factor, "t_f": t_f})
            except ValueError as exc:
                raise ConfigurationError(f"Invalid sweep point scale_factor={factor}, t_f={t_f}: {exc}") from exc
            traj, program = build_protocol(spec)
            peak = program.peak_abs_omega2
            integral = _final_integral(spec, traj, program)
            excursion = max_position_excursion(program, initial, spec.mass)
            rows.append([factor, t_f, peak, integral, excursion])
            times.append(t_f)
            peaks.append(peak)
            integrals.append(integral)

        slope_peak = _fit_slope(times, peaks)
        slope_integral = _fit_slope(times, integrals)
        slopes[f"{factor:.17g}"] = {
            "peak_abs_omega2": "n/a" if slope_peak is None else slope_peak,
            "I_f": "n/a" if slope_integral is None else slope_integral,
        }
        logger.info(f"Sweep scale_factor={factor:g}: slopes peak={slope_peak}, I_f={slope_integral}")

    writer.write_csv(
        "sweep.csv",
        ["scale_factor", "t_f", "peak_abs_omega2", "I_f", "max_abs_q_mean"],
        rows,
        metadata={"units": DIMENSIONAL_UNITS, "slopes": slopes},
    )


COMMANDS: Dict[str, Command] = {
    "design": cmd_design,
    "moments": cmd_moments,
    "qsim": cmd_qsim,
    "csim": cmd_csim,
    "wigner": cmd_wigner,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


# ============================================================================
# Entry point
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    """Parser with one subcommand per dataset family plus `serve`"""
    parser = argparse.ArgumentParser(
        prog="hscaler",
        description="Design and verify harmonic-trap protocols for momentum and position scaling",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  hscaler design   --config configs/momentum_fifth.json --out out/momentum_fifth
  hscaler qsim     --config configs/momentum_fifth.json --out out/momentum_fifth
  hscaler sweep    --config configs/sweep_fifth.json
  hscaler serve    --mode rest --port 3000

Environment Variables:
  HSCALER_THREADS     Cap on worker threads (FFTs, ensemble chunks)
  HSCALER_OUTPUT_DIR  Default output directory (default: ./out)
  LOG_LEVEL           Logging level (default: INFO)
        """
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    common.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default=None,
        help="Set logging level (default: LOG_LEVEL or INFO)"
    )

    run_options = argparse.ArgumentParser(add_help=False)
    run_options.add_argument("--config", type=Path, required=True, help="JSON run document")
    run_options.add_argument("--out", type=Path, default=None, help="Output directory (overrides the document)")
    run_options.add_argument("--seed", type=int, default=None, help="Ensemble seed (overrides the document)")

    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, func in COMMANDS.items():
        subparsers.add_parser(name, parents=[common, run_options], help=(func.__doc__ or "").strip().splitlines()[0])
    serve = subparsers.add_parser("serve", parents=[common], help="Expose protocol design and moments over MCP/REST")
    add_server_arguments(serve)
    return parser


def _run_command(args: argparse.Namespace) -> int:
    app = load_config(validate=False)
    run = load_run_config(args.config).with_overrides(args.out, args.seed)
    directory = run.outputs.directory or app.output.directory
    writer = DatasetWriter(
        directory,
        provenance=_provenance(run, args.command),
        float_format=app.output.float_format,
    )
    logger.info(f"Running {args.command} for {args.config} -> {directory}")
    COMMANDS[args.command](run, app, writer)
    logger.info(f"{args.command}: wrote {len(writer.written)} files")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Main entry point

    Returns:
        Process exit code
    """
    from core.config import log_level_from_env

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 is reserved for failed validation
        return 0 if exc.code in (0, None) else 1

    level = "WARNING" if args.quiet else (args.log_level or log_level_from_env())
    stdio = args.command == "serve" and args.mode == "stdio"
    configure_logging(level, stream=sys.stderr if stdio else None)
    logging.captureWarnings(True)

    try:
        if args.command == "serve":
            apply_cli_args_to_environment(args, env_prefix=ENV_PREFIX)
            from hscaler.server import serve
            return serve(load_config(validate=True))
        return _run_command(args)
    except HScalerError as exc:
        logger.error(f"{exc.error_code}: {exc.message}")
        return exc.exit_code
    except KeyboardInterrupt:
        logger.info("Interrupted")
        return 1


if __name__ == "__main__":
    sys.exit(main())
