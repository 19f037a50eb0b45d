"""Named property suites run by `lego-qml check`."""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import ArgumentError
from ..models import AnsatzSpec, EvalMode, NoiseModel, TrainConfig
from ..utils import task_rng
from .blocks import IdentityBlock
from .datasets import Dataset
from .encoding import encode_tpe, fit_normalizer
from .executor import CircuitExecutor
from .noise import apply_readout_expectation, inject_measurement_noise, trajectory_expectations
from .statevector import init_zero, rx, ry
from .theory import (
    bound_sanity_experiment,
    build_bound_report,
    cumulative_noise_experiment,
    loss_monotonicity_experiment,
    opt_bounds,
    shot_scaling_experiment,
)
from .training import Assembly, batch_loss_grad, theorem3_lr, train
from .vqc import grad_finite_difference, grad_parameter_shift, init_theta

logger = logging.getLogger(__name__)

SUITES = ("gradients", "channels", "scaling", "bounds")

PASS, FAIL, WARN = "pass", "fail", "warn"


@dataclass
class CheckResult:
    suite: str
    name: str
    status: str
    detail: str = ""
    seconds: float = 0.0


@dataclass
class CheckReport:
    results: list[CheckResult] = field(default_factory=list)

    @property
    def failures(self) -> list[CheckResult]:
        return [r for r in self.results if r.status == FAIL]

    @property
    def warnings(self) -> list[CheckResult]:
        return [r for r in self.results if r.status == WARN]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def first_failure(self) -> CheckResult | None:
        return self.failures[0] if self.failures else None


class CheckRunner:
    """Runs property suites; soft properties report warn instead of fail."""

    def __init__(self, seed: int = 0, circuits: int = 20, trajectories: int = 20000):
        self.seed = seed
        self.circuits = circuits
        self.trajectories = trajectories

    def run(self, suite: str = "all") -> CheckReport:
        if suite != "all" and suite not in SUITES:
            raise ArgumentError(f"unknown suite {suite!r}; expected one of {', '.join(SUITES)} or all")
        report = CheckReport()
        for name in SUITES if suite == "all" else (suite,):
            for prop, fn, soft in getattr(self, f"_{name}")():
                report.results.append(self._execute(name, prop, fn, soft))
        return report

    @staticmethod
    def _execute(suite: str, name: str, fn: Callable[[], tuple[bool, str]], soft: bool) -> CheckResult:
        start = time.perf_counter()
        ok, detail = fn()
        status = PASS if ok else (WARN if soft else FAIL)
        result = CheckResult(suite, name, status, detail, time.perf_counter() - start)
        log = logger.info if ok else logger.warning
        log(f"[{suite}] {name}: {status} ({detail})")
        return result

    # -----------------------------------------------------------------------
    # gradients
    # -----------------------------------------------------------------------

    def _toy_assembly(self, stream: int) -> tuple[Assembly, Dataset]:
        rng = task_rng(self.seed, stream)
        data = Dataset(rng.normal(size=(12, 2)), np.arange(12) % 2)
        spec = AnsatzSpec(num_qubits=2, depth=2, measure_qubits=2)
        assembly = Assembly(IdentityBlock(2), fit_normalizer(data.features), 2, ansatz=spec,
                            theta=rng.uniform(-np.pi, np.pi, size=spec.param_count))
        return assembly, data

    def _random_cases(self):
        for case in range(self.circuits):
            rng = task_rng(self.seed, 1, case)
            spec = AnsatzSpec(
                num_qubits=int(rng.integers(1, 7)), depth=int(rng.integers(1, 4)),
                entangler="ring" if case % 2 else "linear-chain", measure_qubits=1,
            )
            theta = rng.uniform(-np.pi, np.pi, size=spec.param_count)
            yield spec, theta, encode_tpe(rng.uniform(-1.0, 1.0, size=spec.num_qubits))

    def _gradients(self):
        def shift_agreement() -> tuple[bool, str]:
            worst = 0.0
            for spec, theta, state in self._random_cases():
                exact = grad_parameter_shift(spec, theta, state, EvalMode.analytic())
                approx = grad_finite_difference(spec, theta, state, step=1e-4)
                worst = max(worst, float(np.max(np.abs(exact - approx))))
            return worst <= 1e-6, f"max |shift - finite difference| = {worst:.2e} over {self.circuits} circuits"

        def execution_count() -> tuple[bool, str]:
            spec = AnsatzSpec(num_qubits=3, depth=2, measure_qubits=1)
            executor = CircuitExecutor(spec)
            grad_parameter_shift(spec, init_theta(spec, task_rng(self.seed, 2)), init_zero(3),
                                 EvalMode.analytic(), executor=executor)
            return executor.executions == 2 * spec.param_count, \
                f"{executor.executions} executions for {spec.param_count} parameters"

        def shot_unbiasedness() -> tuple[bool, str]:
            spec = AnsatzSpec(num_qubits=2, depth=1, measure_qubits=2)
            theta = init_theta(spec, task_rng(self.seed, 6), 1.0)
            state = encode_tpe(np.array([0.3, -0.6]))
            exact = grad_parameter_shift(spec, theta, state, EvalMode.analytic())
            draws = np.stack([
                grad_parameter_shift(spec, theta, state, EvalMode.with_shots(100), task_rng(self.seed, 6, run))
                for run in range(200)
            ])
            se = np.maximum(draws.std(axis=0, ddof=1) / np.sqrt(draws.shape[0]), 1e-9)
            worst = float(np.max(np.abs(draws.mean(axis=0) - exact) / se))
            return worst <= 4.0, f"shot-averaged gradient within {worst:.2f} standard errors of the exact one"

        def loss_chain() -> tuple[bool, str]:
            assembly, data = self._toy_assembly(7)
            encoded = assembly.encode(data)
            theta = assembly.theta.copy()
            _, grad, _ = batch_loss_grad(assembly, encoded, data.labels, EvalMode.analytic(), theta)
            step = 1e-5
            approx = np.empty_like(theta)
            for i in range(theta.size):
                shift = np.zeros_like(theta)
                shift[i] = step
                up = batch_loss_grad(assembly, encoded, data.labels, EvalMode.analytic(), theta + shift)[0]
                down = batch_loss_grad(assembly, encoded, data.labels, EvalMode.analytic(), theta - shift)[0]
                approx[i] = (up - down) / (2 * step)
            error = float(np.max(np.abs(grad - approx)))
            return error <= 1e-7, f"max |loss gradient - finite difference| = {error:.2e}"

        return [("parameter-shift agreement", shift_agreement, False),
                ("parameter-shift execution count", execution_count, False),
                ("shot-gradient unbiasedness", shot_unbiasedness, False),
                ("loss-chain gradient", loss_chain, False)]

    # -----------------------------------------------------------------------
    # channels
    # -----------------------------------------------------------------------

    def _channels(self):
        def depolarizing_contraction() -> tuple[bool, str]:
            worst = 0.0
            for p in (0.05, 0.2):
                model = NoiseModel(p_depol_1q=p, n_trajectories=self.trajectories)
                for k in (1, 2, 3):
                    circuit = [rx(0, 0.0) for _ in range(k)]
                    values = trajectory_expectations(circuit, init_zero(1), model, task_rng(self.seed, 3, k))[:, 0]
                    se = max(float(values.std(ddof=1) / np.sqrt(values.size)), 1e-12)
                    worst = max(worst, abs(float(values.mean()) - (1.0 - p) ** k) / se)
            return worst <= 3.0, f"largest deviation {worst:.2f} standard errors"

        def executor_contraction() -> tuple[bool, str]:
            p = 0.2
            spec = AnsatzSpec(num_qubits=1, depth=1, measure_qubits=1)
            model = NoiseModel(p_depol_1q=p, n_trajectories=self.trajectories)
            executor = CircuitExecutor(spec)
            amps = executor.final_amplitudes(
                np.zeros((self.trajectories, 3)), np.tile(init_zero(1).amplitudes, (self.trajectories, 1)),
                model, task_rng(self.seed, 4),
            )
            values = np.abs(amps[:, 0]) ** 2 - np.abs(amps[:, 1]) ** 2
            se = float(values.std(ddof=1) / np.sqrt(values.size))
            deviation = abs(float(values.mean()) - (1.0 - p) ** 3) / max(se, 1e-12)
            return deviation <= 3.0, f"batched trajectories deviate {deviation:.2f} standard errors from (1-p)^3"

        def readout_scaling() -> tuple[bool, str]:
            q = 0.1
            spec = AnsatzSpec(num_qubits=2, depth=1, measure_qubits=2)
            executor = CircuitExecutor(spec)
            theta = init_theta(spec, task_rng(self.seed, 5), 1.0)[None, :]
            state = init_zero(2).amplitudes[None, :]
            clean = executor.expectations(theta, state, EvalMode.analytic())
            flipped = executor.expectations(theta, state, EvalMode.analytic(NoiseModel(p_readout_flip=q)))
            error = float(np.max(np.abs(flipped - apply_readout_expectation(clean, q))))
            return error <= 1e-12, f"max |noisy - (1-2q) clean| = {error:.1e}"

        def measurement_noise_unbiasedness() -> tuple[bool, str]:
            tau = 0.5
            z = np.tile([0.3, -0.2, 0.9], (self.trajectories, 1))
            xi = inject_measurement_noise(z, tau, task_rng(self.seed, 8)) - z
            se = xi.std(axis=0, ddof=1) / np.sqrt(xi.shape[0])
            worst = float(np.max(np.abs(xi.mean(axis=0)) / se))
            energy = np.sum(xi * xi, axis=1)
            energy_dev = abs(float(energy.mean()) - tau ** 2) / float(energy.std(ddof=1) / np.sqrt(energy.size))
            return worst <= 4.0 and energy_dev <= 4.0, \
                f"mean within {worst:.2f} SE of zero, E||xi||^2 within {energy_dev:.2f} SE of tau^2"

        return [("depolarizing contraction", depolarizing_contraction, False),
                ("batched depolarizing contraction", executor_contraction, False),
                ("readout (1-2q) scaling", readout_scaling, False),
                ("measurement-noise unbiasedness", measurement_noise_unbiasedness, False)]

    # -----------------------------------------------------------------------
    # scaling
    # -----------------------------------------------------------------------

    def _scaling(self):
        def shot_slope() -> tuple[bool, str]:
            result = shot_scaling_experiment([ry(0, np.pi / 3)], 1, seed=self.seed)
            if result.degenerate:
                return False, "fixture produced zero variance"
            ratios_ok = all(1.6 <= r <= 2.4 for r in result.ratios)
            ratios = ", ".join(f"{r:.2f}" for r in result.ratios)
            return -0.6 <= result.slope <= -0.4 and ratios_ok, f"slope {result.slope:.3f}, ratios {ratios}"

        def cumulative_noise() -> tuple[bool, str]:
            eta = theorem3_lr(1.0, 1.0, 1.0, 100)
            result = cumulative_noise_experiment(0.5, 100, eta, 16, seeds=50, seed=self.seed)
            return 0.8 <= result.ratio <= 1.2, f"empirical / predicted = {result.ratio:.3f}"

        return [("shot-noise 1/sqrt(M) scaling", shot_slope, False),
                ("cumulative-noise law", cumulative_noise, False)]

    # -----------------------------------------------------------------------
    # bounds
    # -----------------------------------------------------------------------

    def _bounds(self):
        def formula_values() -> tuple[bool, str]:
            eta = theorem3_lr(1.0, 1.0, 1.0, 100)
            clean, noisy = opt_bounds(1.0, 1.0, 1.0, 100, eta, 0.5)
            ok = abs(eta - 0.0070711) <= 1e-6 and abs(noisy - 1.04950) <= 1e-5 \
                and abs(clean - (1.0 + np.sqrt(2.0) / 100)) <= 1e-12
            return ok, f"eta {eta:.7f}, bound {clean:.6f}, noisy bound {noisy:.6f}"

        def noise_ordering() -> tuple[bool, str]:
            eta = theorem3_lr(1.0, 1.0, 1.0, 100)
            values = [opt_bounds(1.0, 1.0, 1.0, 100, eta, tau)[1] for tau in (0.0, 0.1, 0.5, 1.0, 2.0)]
            return bool(np.all(np.diff(values) > 0)), "noisy bound over tau " + ", ".join(f"{v:.5f}" for v in values)

        def bound_sanity() -> tuple[bool, str]:
            summary = bound_sanity_experiment(seed=self.seed)
            return summary.passed, f"{summary.passed_fraction:.0%} of runs within the bound"

        def monotonicity() -> tuple[bool, str]:
            summary = loss_monotonicity_experiment(seed=self.seed)
            return summary.passed, f"{summary.passed_fraction:.0%} of runs with non-increasing smoothed loss"

        def noiseless_reduction() -> tuple[bool, str]:
            config = TrainConfig(epochs=2, batch_size=4, optimizer="sgd", lr=0.05)
            clean, data = self._toy_assembly(9)
            zero_noise, _ = self._toy_assembly(9)
            clean_run = train(clean, data, data.subset(np.arange(0)), config, EvalMode.analytic(), self.seed)
            noisy_run = train(zero_noise, data, data.subset(np.arange(0)), config,
                              EvalMode.analytic(NoiseModel(tau_meas=0.0)), self.seed)
            same_path = np.array_equal(clean.theta, zero_noise.theta)
            report = build_bound_report(zero_noise, data, noisy_run, "", self.seed, 0.0, n_samples=8, n_probes=2)
            reference = build_bound_report(clean, data, clean_run, "", self.seed, 0.0, n_samples=8, n_probes=2)
            ok = same_path and report.eps_opt_noise_bound == report.eps_opt_bound == reference.eps_opt_bound
            return ok, f"identical training path: {same_path}, bounds {report.eps_opt_bound:.6f} " \
                       f"/ {report.eps_opt_noise_bound:.6f} at tau=0"

        return [("bound formulas", formula_values, False),
                ("noise penalty ordering", noise_ordering, False),
                ("noiseless reduction", noiseless_reduction, False),
                ("cosine-toy bound sanity", bound_sanity, False),
                ("smoothed loss monotonicity", monotonicity, True)]
