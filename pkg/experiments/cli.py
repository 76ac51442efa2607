"""Command line for distortion estimation, pre-distortion and pulse optimization."""
from __future__ import annotations

import functools
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import click

from config_loading import (load_command_config, load_optimizer_config, load_reproduce_config,
                            rydberg_system_from_dict)
from control import optimize_excitation, predistort
from distortion_presets import DISTORTION_PRESETS, make_preset_kernel
from estimation import METHODS, estimate, kernel_mase
from logging_utils import (configure_logging, serialize_predistortion, serialize_report,
                           serialize_result)
from models import NumericalError, ValidationError
from parameters import OptimizerConfig, ReproduceConfig, RydbergSystem
from pulses import (INPUT_SUFFIX, OUTPUT_SUFFIX, add_measurement_noise, read_pulse,
                    read_training_set, write_pulse)
from reproduce import FIGURES, reproduce, write_panels
from results import (format_optimization_result, format_panel, format_predistortion,
                     print_estimate_report)
from utils import atomic_write_text, child_seeds
from volterra import apply, read_kernel, write_kernel

logger = logging.getLogger(__name__)

CONFIG_KEYS = {"seed", "out", "precision", "system", "optimizer", "reproduce"}

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

optimizer_config_option = click.option(
    "--optimizer-config", "optimizer_file", type=click.Path(dir_okay=False, path_type=Path),
    default=None, help="OptimizerConfig JSON (replaces the config's 'optimizer' section)")


@dataclass
class CliContext:
    seed: int = 0
    out: Path = Path("out")
    precision: int = 17
    config: Dict[str, Any] = field(default_factory=dict)

    def system(self) -> RydbergSystem:
        return rydberg_system_from_dict(self.config.get("system", {}), "config 'system'")

    def optimizer(self, config_file: Optional[Path] = None, **overrides: Any) -> OptimizerConfig:
        """Settings from `config_file` (else the config's 'optimizer' section), then overrides."""
        if config_file is not None:
            values = asdict(load_optimizer_config(config_file))
        else:
            values = dict(self.config.get("optimizer", {}))
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return OptimizerConfig.from_dict(values)
        except TypeError as e:
            raise ValidationError(f"invalid optimizer config: {e}") from e

    def reproduce_config(self, config_file: Optional[Path] = None) -> ReproduceConfig:
        if config_file is not None:
            return load_reproduce_config(config_file)
        try:
            return ReproduceConfig.from_dict(self.config.get("reproduce", {}))
        except TypeError as e:
            raise ValidationError(f"invalid reproduce config: {e}") from e


def _write_json(path: Path, data: Dict[str, Any]) -> Path:
    return atomic_write_text(path, json.dumps(data, indent=2) + "\n")


def handle_errors(command):
    """Map library errors to exit codes with a one-line diagnostic."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return command(*args, **kwargs)
        except (ValidationError, FileNotFoundError) as e:
            click.echo(f"error: {e}", err=True)
            ctx.exit(EXIT_VALIDATION)
        except NumericalError as e:
            click.echo(f"numerical failure: {e}", err=True)
            ctx.exit(EXIT_NUMERICAL)
    return wrapper


@click.group()
@click.option("--seed", type=int, default=None, help="Global seed (default 0)")
@click.option("--out", "out", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Output directory (default ./out)")
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path),
              default=None, help="JSON file with seed, out, precision, system, optimizer, reproduce")
@click.option("--precision", type=click.IntRange(1, 17), default=None,
              help="Digits after the decimal point of emitted floats (default 17)")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
@click.pass_context
def main(ctx: click.Context, seed: Optional[int], out: Optional[Path],
         config_path: Optional[Path], precision: Optional[int], verbose: bool):
    """Estimate, invert and compensate quadratic pulse distortions."""
    configure_logging(verbose)
    config: Dict[str, Any] = {}
    if config_path is not None:
        try:
            config = load_command_config(config_path, CONFIG_KEYS, path_keys=("out",))
        except ValidationError as e:
            click.echo(f"error: {e}", err=True)
            ctx.exit(EXIT_VALIDATION)
    logger.debug("config %s: %s", config_path, sorted(config))
    ctx.obj = CliContext(
        seed=seed if seed is not None else int(config.get("seed", 0)),
        out=out if out is not None else Path(config.get("out", "out")),
        precision=precision if precision is not None else int(config.get("precision", 17)),
        config=config,
    )


# ==========================================================================
# KERNELS AND PULSES
# ==========================================================================

@main.command("make-kernel")
@click.option("--preset", type=str, default=None,
              help=f"Named distortion ({', '.join(DISTORTION_PRESETS)})")
@click.option("--R", "R", type=int, default=None, help="Memory length")
@click.option("--sigma1", type=float, default=None, help="Linear Gaussian width (samples)")
@click.option("--sigma2", type=float, default=None, help="Quadratic Gaussian width (samples)")
@click.option("--J", "J", type=float, default=None, help="Quadratic amplitude")
@click.option("--h0", type=float, default=None, help="Constant offset")
@click.option("--name", type=str, default=None, help="Output file name (default <preset>.json)")
@click.pass_obj
@handle_errors
def make_kernel(obj: CliContext, preset, R, sigma1, sigma2, J, h0, name):
    """Write a Gaussian distortion kernel to a JSON file."""
    overrides = {k: v for k, v in {"R": R, "sigma1": sigma1, "sigma2": sigma2,
                                   "J": J, "h0": h0}.items() if v is not None}
    if preset is None and not overrides:
        raise ValidationError(f"give --preset ({', '.join(DISTORTION_PRESETS)}) or explicit parameters")
    kernel = make_preset_kernel(preset, **overrides)
    path = write_kernel(obj.out / (name or f"{preset or 'kernel'}.json"), kernel)
    click.echo(f"kernel R={kernel.memory_length} M={kernel.coefficient_count} -> {path}")


def _output_name(path: Path) -> str:
    if path.name.endswith(INPUT_SUFFIX):
        return path.name[:-len(INPUT_SUFFIX)] + OUTPUT_SUFFIX
    return f"{path.stem}{OUTPUT_SUFFIX}"


@main.command()
@click.argument("kernel_file", type=click.Path(path_type=Path))
@click.argument("pulse_files", nargs=-1, required=True, type=click.Path(path_type=Path))
@click.option("--noise-sigma", type=float, default=0.0, show_default=True,
              help="Std of Gaussian measurement noise added to each output")
@click.pass_obj
@handle_errors
def distort(obj: CliContext, kernel_file: Path, pulse_files: Tuple[Path, ...], noise_sigma: float):
    """Pass pulses through a kernel; writes <name>.out.csv per input."""
    if noise_sigma < 0:
        raise ValidationError(f"noise sigma must be non-negative, got {noise_sigma}")
    kernel = read_kernel(kernel_file)
    names = [_output_name(p) for p in pulse_files]
    if len(set(names)) != len(names):
        raise ValidationError("input pulse files map to duplicate output names")
    inputs = [read_pulse(p) for p in pulse_files]
    for name, x, seed in zip(names, inputs, child_seeds(obj.seed, len(inputs))):
        y = apply(kernel, x)
        if noise_sigma > 0:
            y = add_measurement_noise(y, noise_sigma, seed)
        path = write_pulse(obj.out / name, y, obj.precision)
        click.echo(f"{len(x)} -> {len(y)} samples ({y.duration:.6g} us) -> {path}")


# ==========================================================================
# ESTIMATION
# ==========================================================================

@main.command("estimate")
@click.argument("training_dir", type=click.Path(path_type=Path))
@click.option("--R", "-R", "R", type=int, required=True, help="Memory length to estimate")
@click.option("--method", type=click.Choice(METHODS), default="qr", show_default=True)
@click.option("--truth", type=click.Path(path_type=Path), default=None,
              help="Reference kernel for per-order MASE")
@click.option("--strict", is_flag=True, help="Reject outputs whose length is not L + R - 1")
@click.pass_obj
@handle_errors
def estimate_command(obj: CliContext, training_dir: Path, R: int, method: str,
                     truth: Optional[Path], strict: bool):
    """Estimate a kernel from <name>.in.csv / <name>.out.csv pairs."""
    reference = read_kernel(truth) if truth is not None else None
    pairs = read_training_set(training_dir)
    report = estimate(pairs, R, method, strict=strict)
    errors = kernel_mase(reference, report.kernel) if reference is not None else None
    kernel_path = write_kernel(obj.out / "kernel.json", report.kernel)
    _write_json(obj.out / "report.json", serialize_report(report, errors))
    print_estimate_report(report, errors)
    click.echo(f"kernel -> {kernel_path}")


@main.command("predistort")
@click.argument("kernel_file", type=click.Path(path_type=Path))
@click.argument("target_file", type=click.Path(path_type=Path))
@click.option("--max-iterations", type=int, default=None, help="Solver iteration budget")
@optimizer_config_option
@click.pass_obj
@handle_errors
def predistort_command(obj: CliContext, kernel_file: Path, target_file: Path,
                       max_iterations: Optional[int], optimizer_file: Optional[Path]):
    """Find the input whose distorted output matches a target pulse."""
    kernel = read_kernel(kernel_file)
    target = read_pulse(target_file)
    result = predistort(kernel, target, obj.optimizer(optimizer_file, max_iterations=max_iterations))
    stem = target_file.name[:-4] if target_file.name.endswith(".csv") else target_file.name
    path = write_pulse(obj.out / f"{stem}.predistorted.csv", result.pulse, obj.precision)
    _write_json(obj.out / "predistortion.json", serialize_predistortion(result))
    click.echo(format_predistortion(result))
    click.echo(f"input pulse -> {path}")


# ==========================================================================
# CONTROL
# ==========================================================================

@main.command("optimize")
@click.option("--duration", type=float, required=True, help="Pulse duration T in us")
@click.option("--steps", type=int, default=None, help="Control steps (default T / 0.002 us)")
@click.option("--kernel", "kernel_file", type=click.Path(path_type=Path), default=None,
              help="Distortion to optimize through")
@click.option("--mode", type=click.Choice(["box-qn", "penalty-pg"]), default=None)
@click.option("--max-iterations", type=int, default=None)
@optimizer_config_option
@click.pass_obj
@handle_errors
def optimize_command(obj: CliContext, duration: float, steps: Optional[int],
                     kernel_file: Optional[Path], mode: Optional[str], max_iterations: Optional[int],
                     optimizer_file: Optional[Path]):
    """Optimize |g> -> |r> excitation controls, optionally through a kernel."""
    system = obj.system()
    cfg = obj.optimizer(optimizer_file, mode=mode, max_iterations=max_iterations, seed=obj.seed)
    kernel = read_kernel(kernel_file) if kernel_file is not None else None
    L_c = steps if steps is not None else ReproduceConfig().control_steps(duration)
    result = optimize_excitation(system, duration, L_c, kernel, cfg)

    controls = result.controls
    write_pulse(obj.out / "omega_b.csv", controls.omega_b, obj.precision)
    write_pulse(obj.out / "omega_r.csv", controls.omega_r, obj.precision)
    if kernel is not None:
        write_pulse(obj.out / "omega_b.distorted.csv", result.distorted_controls.omega_b, obj.precision)
        write_pulse(obj.out / "omega_r.distorted.csv", result.distorted_controls.omega_r, obj.precision)
    path = _write_json(obj.out / "result.json", serialize_result(result))
    click.echo(format_optimization_result(result))
    click.echo(f"result -> {path}")


@main.command("reproduce")
@click.argument("figure_id", type=str)
@click.option("--grid-config", "grid_file", type=click.Path(dir_okay=False, path_type=Path),
              default=None, help="ReproduceConfig JSON (replaces the config's 'reproduce' section)")
@optimizer_config_option
@click.pass_obj
@handle_errors
def reproduce_command(obj: CliContext, figure_id: str, grid_file: Optional[Path],
                      optimizer_file: Optional[Path]):
    """Run a figure-level sweep (fig1, fig3 .. fig9) and write one CSV per panel."""
    if figure_id not in FIGURES:
        raise ValidationError(f"unknown figure '{figure_id}', valid figures: {', '.join(FIGURES)}")
    cfg = obj.reproduce_config(grid_file)
    opt = obj.optimizer(optimizer_file, seed=obj.seed)
    panels = reproduce(figure_id, cfg, obj.seed, obj.system(), opt)
    paths = write_panels(panels, obj.out / figure_id, obj.precision)
    for name, panel in panels.items():
        click.echo(format_panel(name, panel.table))
    click.echo(f"\n{len(paths)} panel tables -> {obj.out / figure_id}")


if __name__ == "__main__":
    main()
