"""Figure-level sweeps emitting one table per panel.

Every figure function takes the sweep grids, the global seed, the Rydberg
system and the optimizer settings, and returns {panel name: Panel}. Panels
carry a pandas table plus header notes (grid coarsening, dt choices) that end
up as `#` comment lines above the CSV.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from control import evaluate_distorted, optimize_excitation, predistort
from distortion_presets import NAMED_DISTORTIONS, make_preset_kernel
from estimation import (estimate, kernel_mase, make_training_pairs, mase, prediction_errors)
from models import (ControlSchedule, Pulse, TrainingPair, ValidationError, VolterraKernel,
                    coefficient_count)
from parameters import OptimizerConfig, ReproduceConfig, RydbergSystem
from pulses import (generate_cosine, generate_gaussian_pulse, generate_random_noise,
                    generate_spline, spectral_content)
from runner import run_sweep
from statistical_validation import mean_confidence_interval, paired_comparison
from utils import atomic_write_text, child_seeds, make_rng
from volterra import apply, estimate_memory_length

logger = logging.getLogger(__name__)


@dataclass
class Panel:
    table: pd.DataFrame
    notes: List[str] = field(default_factory=list)


def format_panel_csv(panel: Panel, precision: int = 17) -> str:
    header = "".join(f"# {note}\n" for note in panel.notes)
    return header + panel.table.to_csv(index=False, float_format=f"%.{precision}e",
                                       lineterminator="\n")


def write_panels(panels: Dict[str, Panel], out_dir: Path, precision: int = 17) -> List[Path]:
    """Write one CSV per panel, each atomically."""
    written = []
    for name, panel in panels.items():
        written.append(atomic_write_text(Path(out_dir) / f"{name}.csv",
                                         format_panel_csv(panel, precision)))
    return written


def _summary(errors: Sequence[float]) -> Dict[str, float]:
    interval = mean_confidence_interval(errors)
    return {"mean_error": interval["mean"], "ci_low": interval["ci_low"],
            "ci_high": interval["ci_high"]}


# ==========================================================================
# PULSE FAMILIES
# ==========================================================================

def spline_test_pulses(cfg: ReproduceConfig, seed: int) -> List[Pulse]:
    """Held-out spline pulses with random knot counts (5 to 50)."""
    rng = make_rng(seed)
    knots = rng.integers(5, 51, size=cfg.test_pulses)
    seeds = child_seeds(seed, cfg.test_pulses)
    return [generate_spline(cfg.pulse_steps, int(k), s) for k, s in zip(knots, seeds)]


def spline_training_pulses(cfg: ReproduceConfig, count: int, seed: int) -> List[Pulse]:
    """Spline pulses with distinct knot counts, one frequency per pulse."""
    seeds = child_seeds(seed, count)
    return [generate_spline(cfg.pulse_steps, min(5 + 4 * i, cfg.pulse_steps), s)
            for i, s in enumerate(seeds)]


def frequency_family(kind: str, level: int, cfg: ReproduceConfig, seed: int,
                     knots: Optional[int] = None) -> List[Pulse]:
    """Training pulses of one type at a given richness level.

    gaussian/cosine/noise add one pulse per level; spline keeps a single
    pulse per slot and adds knots.
    """
    steps = cfg.pulse_steps
    seeds = child_seeds(seed, level)
    if kind == "gaussian":
        return [generate_gaussian_pulse(steps, steps / 2 + 20 * i, 15.0 + 10.0 * i) for i in range(level)]
    if kind == "cosine":
        phases = make_rng(seed).uniform(0, 2 * np.pi, size=level)
        return [generate_cosine(steps, 2.5 + 3.7 * i, 1.0, phases[i]) for i in range(level)]
    if kind == "spline":
        if knots is not None:
            return [generate_spline(steps, min(knots, steps), s) for s in seeds]
        return [generate_spline(steps, min(steps, 8 * 3 ** (level - 1)), seeds[0])]
    if kind == "noise":
        return [generate_random_noise(steps, 1.0, s) for s in seeds]
    raise ValidationError(f"unknown pulse family '{kind}'")


FREQUENCY_KINDS = ("gaussian", "cosine", "spline", "noise")


def _recovery_pairs(kernel: VolterraKernel, cfg: ReproduceConfig, seed: int,
                    memory_length: Optional[int] = None):
    dt = cfg.training_dt(kernel.memory_length)
    x = generate_random_noise(cfg.recovery_steps, cfg.recovery_amplitude, seed, dt=dt)
    return make_training_pairs(kernel, [x], cfg.recovery_noise, seed=seed + 1,
                               memory_length=memory_length), dt


def _longest_memory(cfg: ReproduceConfig) -> int:
    return max(max(cfg.memory_grid), cfg.fixed_memory)


def _random_tests(count: int, steps: int, amplitude: float, dt: float, seed: int) -> List[Pulse]:
    return [generate_random_noise(steps, amplitude, s, dt=dt) for s in child_seeds(seed, count)]


# ==========================================================================
# ESTIMATION FIGURES
# ==========================================================================

def fig1(cfg: ReproduceConfig, seed: int, sys: RydbergSystem, opt: OptimizerConfig) -> Dict[str, Panel]:
    """Linear versus quadratic estimation for distortions A-F."""
    seeds = child_seeds(seed, len(NAMED_DISTORTIONS) + 1)

    def run(item):
        name, point_seed = item
        kernel = make_preset_kernel(name)
        pairs, dt = _recovery_pairs(kernel, cfg, point_seed)
        tests = _random_tests(cfg.comparison_test_pulses, int(round(0.4 / dt)),
                              cfg.recovery_amplitude, dt, seeds[-1])
        quadratic = estimate(pairs, kernel.memory_length, "qr").kernel
        linear = estimate(pairs, kernel.memory_length, "linear").kernel
        return name, kernel, dt, tests, linear, quadratic

    rows, example, example_dt = [], None, None
    for name, kernel, dt, tests, linear, quadratic in run_sweep(run, zip(NAMED_DISTORTIONS, seeds)):
        rows.append({
            "distortion": name,
            "linear_mase": float(np.mean(prediction_errors(kernel, linear, tests))),
            "quadratic_mase": float(np.mean(prediction_errors(kernel, quadratic, tests))),
        })
        if name == "C":
            x = tests[0]
            y = apply(kernel, x)
            inputs = np.full(len(y), np.nan)
            inputs[:len(x)] = x.samples
            example = pd.DataFrame({
                "t_us": y.times, "input": inputs, "true_output": y.samples,
                "linear_estimate": apply(linear, x).samples,
                "quadratic_estimate": apply(quadratic, x).samples,
            })
            example_dt = dt
    notes = [f"training: one {cfg.recovery_steps}-step random pulse, amplitude "
             f"{cfg.recovery_amplitude}, noise sigma {cfg.recovery_noise}",
             f"test: {cfg.comparison_test_pulses} random pulses of 0.4 us"]
    panels = {}
    if example is not None:
        panels["fig1a"] = Panel(example, notes + [f"distortion C, dt={example_dt!r} us"])
    panels["fig1b"] = Panel(pd.DataFrame(rows), notes)
    return panels


def fig3(cfg: ReproduceConfig, seed: int, sys: RydbergSystem, opt: OptimizerConfig) -> Dict[str, Panel]:
    """Kernel recovery with an over-long memory estimate."""
    R_est = cfg.recovery_memory

    def run(item):
        name, point_seed = item
        kernel = make_preset_kernel(name)
        pairs, _ = _recovery_pairs(kernel, cfg, point_seed, memory_length=R_est)
        report = estimate(pairs, R_est, "qr")
        return name, kernel, report

    rows, panels = [], {}
    for name, kernel, report in run_sweep(run, zip(NAMED_DISTORTIONS, child_seeds(seed, len(NAMED_DISTORTIONS)))):
        est = report.kernel
        errors = kernel_mase(kernel, est)
        coefficients = np.concatenate([[est.h0], est.h1, est.h2.ravel()])
        tail = max(np.max(np.abs(est.h1[kernel.memory_length:]), initial=0.0),
                   np.max(np.abs(est.h2[kernel.memory_length:, :]), initial=0.0))
        rows.append({
            "distortion": name, "R_true": kernel.memory_length, "R_est": R_est,
            "h1_mase": errors["h1"], "h2_mase": errors["h2"],
            "tail_ratio": float(tail / np.max(np.abs(coefficients))),
            "memory_estimate": estimate_memory_length(est),
        })
        if name == "C":
            R = kernel.memory_length
            lags = np.arange(R_est)
            true_h1 = np.zeros(R_est)
            true_h1[:R] = kernel.h1
            panels["fig3a"] = Panel(pd.DataFrame({"lag": lags, "h1_true": true_h1, "h1_est": est.h1}),
                                    ["distortion C"])
            a, b = np.triu_indices(R_est)
            true_h2 = np.zeros((R_est, R_est))
            true_h2[:R, :R] = kernel.h2
            panels["fig3b"] = Panel(pd.DataFrame({"a": a, "b": b, "h2_true": true_h2[a, b],
                                                  "h2_est": est.h2[a, b]}),
                                    ["distortion C, upper triangle of the symmetric kernel"])
    panels["fig3c"] = Panel(pd.DataFrame(rows),
                            [f"one {cfg.recovery_steps}-step random pulse per distortion, amplitude "
                             f"{cfg.recovery_amplitude}, noise sigma {cfg.recovery_noise}, R_est={R_est}"])
    return panels


def _recorded_for(pairs: Sequence[TrainingPair], R: int) -> List[TrainingPair]:
    """Outputs cut to L + R - 1 samples; sweep data are recorded at the longest memory."""
    return [TrainingPair(p.input, p.output.with_samples(p.output.samples[:len(p.input) + R - 1]), p.name)
            for p in pairs]


def _estimation_errors(pairs, R: int, method: str, truth: VolterraKernel,
                       tests: Sequence[Pulse]) -> np.ndarray:
    return prediction_errors(truth, estimate(_recorded_for(pairs, R), R, method).kernel, tests)


def fig5(cfg: ReproduceConfig, seed: int, sys: RydbergSystem, opt: OptimizerConfig) -> Dict[str, Panel]:
    """QR versus normal equations on the small kernel with spline training data."""
    truth = make_preset_kernel("small")
    test_seed, train_seed, noise_seed = child_seeds(seed, 3)
    tests = spline_test_pulses(cfg, test_seed)
    training = spline_training_pulses(cfg, max(max(cfg.pulse_count_grid), cfg.fixed_pulses), train_seed)
    notes = [f"{cfg.test_pulses} spline test pulses, {cfg.pulse_steps} steps, 95% normal CI",
             f"coarsened grids: R in {list(cfg.memory_grid)}, pulses in {list(cfg.pulse_count_grid)}"]
    panels = {}
    letters = iter("abcdefgh")
    for noise in cfg.noise_levels:
        pairs = make_training_pairs(truth, training, noise, seed=noise_seed,
                                    memory_length=_longest_memory(cfg))

        def by_memory(item):
            R, method = item
            return _estimation_errors(pairs[:cfg.fixed_pulses], R, method, truth, tests)

        items = [(R, method) for R in cfg.memory_grid for method in ("qr", "normal")]
        errors = dict(zip(items, run_sweep(by_memory, items)))
        rows = [{"M": coefficient_count(R), **_summary(errors[(R, method)]), "method": method}
                for R, method in items]
        for R in cfg.memory_grid:
            paired = paired_comparison(errors[(R, "qr")], errors[(R, "normal")])
            logger.info("noise %g, R=%d: qr - normal = %.3e [%.3e, %.3e]", noise, R,
                        paired["mean_diff"], paired["ci_lower"], paired["ci_upper"])
        panels[f"fig5{next(letters)}"] = Panel(
            pd.DataFrame(rows), notes + [f"noise sigma {noise}, {cfg.fixed_pulses} training pulses"])

        def by_count(item):
            count, method = item
            per_memory = [_estimation_errors(pairs[:count], R, method, truth, tests)
                          for R in cfg.memory_grid]
            return np.mean(per_memory, axis=0)

        items = [(count, method) for count in cfg.pulse_count_grid for method in ("qr", "normal")]
        rows = [{"pulses": count, **_summary(err), "method": method}
                for (count, method), err in zip(items, run_sweep(by_count, items))]
        panels[f"fig5{next(letters)}"] = Panel(
            pd.DataFrame(rows), notes + [f"noise sigma {noise}, error averaged over all M"])
    return panels


def fig6(cfg: ReproduceConfig, seed: int, sys: RydbergSystem, opt: OptimizerConfig) -> Dict[str, Panel]:
    """Estimation error against training-pulse type and frequency content."""
    truth = make_preset_kernel("small")
    test_seed, train_seed, noise_seed = child_seeds(seed, 3)
    tests = spline_test_pulses(cfg, test_seed)
    kind_seeds = dict(zip(FREQUENCY_KINDS, child_seeds(train_seed, len(FREQUENCY_KINDS))))
    notes = [f"{cfg.test_pulses} spline test pulses, {cfg.pulse_steps} steps, 95% normal CI"]
    panels = {}
    letters = iter("abcdefgh")
    longest = _longest_memory(cfg)
    for noise in cfg.noise_levels:
        budget = {kind: make_training_pairs(
            truth, frequency_family(kind, cfg.frequency_budget, cfg, kind_seeds[kind],
                                    knots=cfg.spline_knots if kind == "spline" else None),
            noise, seed=noise_seed, memory_length=longest) for kind in FREQUENCY_KINDS}

        def by_memory(item):
            kind, R = item
            return _estimation_errors(budget[kind], R, "qr", truth, tests)

        items = [(kind, R) for kind in FREQUENCY_KINDS for R in cfg.memory_grid]
        rows = [{"pulse_type": kind, "M": coefficient_count(R), **_summary(err)}
                for (kind, R), err in zip(items, run_sweep(by_memory, items))]
        panels[f"fig6{next(letters)}"] = Panel(
            pd.DataFrame(rows), notes + [f"noise sigma {noise}, {cfg.frequency_budget} pulses per type, "
                                         f"spline knots {cfg.spline_knots}"])

        def by_level(item):
            kind, level = item
            inputs = frequency_family(kind, level, cfg, kind_seeds[kind])
            pairs = make_training_pairs(truth, inputs, noise, seed=noise_seed,
                                        memory_length=cfg.fixed_memory)
            content = float(np.mean([spectral_content(x) for x in inputs]))
            return content, _estimation_errors(pairs, cfg.fixed_memory, "qr", truth, tests)

        items = [(kind, level) for kind in FREQUENCY_KINDS for level in range(1, 5)]
        rows = [{"pulse_type": kind, "level": level, "content": content, **_summary(err)}
                for (kind, level), (content, err) in zip(items, run_sweep(by_level, items))]
        panels[f"fig6{next(letters)}"] = Panel(
            pd.DataFrame(rows), notes + [f"noise sigma {noise}, R={cfg.fixed_memory}, content = mean "
                                         "Hann-windowed DFT magnitude above steps/4"])
    return panels


# ==========================================================================
# CONTROL FIGURES
# ==========================================================================

def _ideal_sweep(cfg: ReproduceConfig, sys: RydbergSystem, opt: OptimizerConfig):
    def run(T):
        return optimize_excitation(sys, T, cfg.control_steps(T), None, opt)
    return dict(zip(cfg.durations, run_sweep(run, cfg.durations)))


def _control_notes(cfg: ReproduceConfig, opt: OptimizerConfig) -> List[str]:
    return [f"control dt {cfg.control_dt} us, mode {opt.mode}, max_iterations {opt.max_iterations}",
            f"box bounds {list(opt.box_bounds)} rad/us"]


def fig4(cfg: ReproduceConfig, seed: int, sys: RydbergSystem, opt: OptimizerConfig) -> Dict[str, Panel]:
    """Ideal pulses and the same pulses through distortions A-F."""
    ideal = _ideal_sweep(cfg, sys, opt)
    kernels = {name: make_preset_kernel(name) for name in NAMED_DISTORTIONS}
    rows = [{"distortion": "ideal", "duration_us": T, "excitation_error": result.final_cost}
            for T, result in ideal.items()]

    def run(item):
        name, T = item
        return evaluate_distorted(sys, ideal[T].controls, kernels[name])

    items = [(name, T) for name in NAMED_DISTORTIONS for T in cfg.durations]
    rows += [{"distortion": name, "duration_us": T, "excitation_error": error}
             for (name, T), error in zip(items, run_sweep(run, items))]
    return {"fig4": Panel(pd.DataFrame(rows), _control_notes(cfg, opt))}


def _correction_table(cfg: ReproduceConfig, sys: RydbergSystem, opt: OptimizerConfig) -> pd.DataFrame:
    ideal = _ideal_sweep(cfg, sys, opt)

    def run(item):
        name, T = item
        kernel = make_preset_kernel(name)
        uncorrected = evaluate_distorted(sys, ideal[T].controls, kernel)
        corrected = optimize_excitation(sys, T, cfg.control_steps(T), kernel, opt,
                                        initial=ideal[T].controls)
        return {"distortion": name, "duration_us": T, "ideal_error": ideal[T].final_cost,
                "uncorrected_error": uncorrected, "corrected_error": corrected.final_cost,
                "mode": opt.mode}

    items = [(name, T) for name in cfg.corrected_presets for T in cfg.durations]
    return pd.DataFrame(run_sweep(run, items))


def _with_mode(opt: OptimizerConfig, mode: str) -> OptimizerConfig:
    return OptimizerConfig.from_dict({**opt.__dict__, "mode": mode})


def fig8(cfg: ReproduceConfig, seed: int, sys: RydbergSystem, opt: OptimizerConfig) -> Dict[str, Panel]:
    """Distortion-aware correction with projected gradient and rise-speed penalty."""
    opt = _with_mode(opt, "penalty-pg")
    return {"fig8": Panel(_correction_table(cfg, sys, opt), _control_notes(cfg, opt))}


def fig9(cfg: ReproduceConfig, seed: int, sys: RydbergSystem, opt: OptimizerConfig) -> Dict[str, Panel]:
    """Distortion-aware correction with the box-constrained quasi-Newton mode."""
    opt = _with_mode(opt, "box-qn")
    return {"fig9": Panel(_correction_table(cfg, sys, opt), _control_notes(cfg, opt))}


def fig7(cfg: ReproduceConfig, seed: int, sys: RydbergSystem, opt: OptimizerConfig) -> Dict[str, Panel]:
    """Pre-distortion of a Gaussian and of optimized controls through distortion C."""
    kernel = make_preset_kernel("C")
    R = kernel.memory_length
    steps = cfg.predistort_steps
    width = cfg.predistort_width_fraction * steps
    target = generate_gaussian_pulse(steps, steps / 2, width, cfg.predistort_amplitude)
    gauss = predistort(kernel, target, opt)
    output = apply(kernel, gauss.pulse)
    inputs = np.full(steps, np.nan)
    inputs[:len(gauss.pulse)] = gauss.pulse.samples
    panels = {"fig7a": Panel(pd.DataFrame({
        "sample": np.arange(steps), "target": target.samples, "predistorted": inputs,
        "output": output.samples}), [
            f"Gaussian target: {steps} steps, centre {steps / 2:g}, width {width:g}, "
            f"amplitude {cfg.predistort_amplitude}",
            f"MASE {mase(target, output):.3e}"])}

    T = max(cfg.durations)
    L_c = cfg.control_steps(T)
    ideal = optimize_excitation(sys, T, L_c, None, opt)
    corrected = optimize_excitation(sys, T, L_c, kernel, opt, initial=ideal.controls)
    predistorted, mismatch = [], []
    for control in (ideal.controls.omega_b, ideal.controls.omega_r):
        padded = control.with_samples(np.concatenate([control.samples, np.zeros(R - 1)]))
        x = predistort(kernel, padded, opt).pulse
        predistorted.append(x)
        mismatch.append(mase(padded, apply(kernel, x)))
    lo_hi = opt.box_bounds
    clipped = [np.clip(x.samples, lo, hi) for x, (lo, hi) in zip(predistorted, lo_hi)]
    schedule = ControlSchedule.from_arrays(clipped[0], clipped[1], ideal.controls.dt)
    distorted_b = apply(kernel, predistorted[0])
    panels["fig7b"] = Panel(pd.DataFrame({
        "t_us": distorted_b.times,
        "ideal_blue": np.concatenate([ideal.controls.omega_b.samples, np.zeros(R - 1)]),
        "predistorted_blue": np.concatenate([predistorted[0].samples, np.full(R - 1, np.nan)]),
        "output_blue": distorted_b.samples,
    }), [f"optimized controls, T={T} us, blue-control MASE {mismatch[0]:.3e}"])
    panels["fig7c"] = Panel(pd.DataFrame([
        {"method": "ideal", "excitation_error": ideal.final_cost, "pulse_mase": 0.0},
        {"method": "uncorrected", "excitation_error": evaluate_distorted(sys, ideal.controls, kernel),
         "pulse_mase": np.nan},
        {"method": "predistorted", "excitation_error": evaluate_distorted(sys, schedule, kernel),
         "pulse_mase": float(np.mean(mismatch))},
        {"method": "corrected", "excitation_error": corrected.final_cost, "pulse_mase": np.nan},
    ]), ["predistorted controls clipped to the box before simulation"])
    return panels


FIGURES: Dict[str, Callable[..., Dict[str, Panel]]] = {
    "fig1": fig1, "fig3": fig3, "fig4": fig4, "fig5": fig5,
    "fig6": fig6, "fig7": fig7, "fig8": fig8, "fig9": fig9,
}


def reproduce(figure_id: str, cfg: ReproduceConfig = None, seed: int = 0,
              sys: RydbergSystem = None, opt: OptimizerConfig = None) -> Dict[str, Panel]:
    if figure_id not in FIGURES:
        raise ValidationError(f"unknown figure '{figure_id}', valid figures: {', '.join(FIGURES)}")
    cfg = cfg or ReproduceConfig()
    panels = FIGURES[figure_id](cfg, seed, sys or RydbergSystem(), opt or OptimizerConfig())
    for panel in panels.values():
        panel.notes.insert(0, f"{figure_id} seed={seed}")
    return panels
