"""Theory lab: empirical constants, optimization-error bounds and scaling experiments."""

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ArgumentError, DataError, ScaleError
from ..models import AnsatzSpec, BoundReport, EvalMode, MetricsRow
from ..utils import ordered_map, task_rng
from .datasets import Dataset
from .encoding import product_amplitudes
from .executor import CircuitExecutor
from .losses import cross_entropy_grad, softmax_probs
from .noise import inject_measurement_noise
from .optim import SGD, Adam
from .statevector import Gate, apply_circuit, init_zero, sample_counts, z_signs
from .training import Assembly, TrainResult, theorem3_lr
from .vqc import jacobians

logger = logging.getLogger(__name__)

HVP_STEP = 1e-3
POWER_ITERATIONS = 20
POWER_MAX_ITERATIONS = 50
POWER_TOLERANCE = 1e-2
SHOT_GRID = (100, 400, 1600, 6400)
RADEMACHER_MAX_SAMPLES = 64
RADEMACHER_MAX_WIDTH = 6

_ANALYTIC = EvalMode.analytic()


# ---------------------------------------------------------------------------
# Empirical constants
# ---------------------------------------------------------------------------


def _sample_jacobian(assembly: Assembly, encoded: np.ndarray, label: int, theta: np.ndarray,
                     target: str) -> np.ndarray:
    """(m, P) gradient rows of one sample: m = 1 for the loss, m = U for the outputs."""
    z, jac = jacobians(assembly.executor, theta, product_amplitudes(encoded[None, :]), _ANALYTIC)
    if target == "output":
        return jac[0]
    readout = assembly.readout_matrix()
    probs = softmax_probs(z @ readout.T, assembly.num_classes)
    delta = cross_entropy_grad(probs, np.array([label])) @ readout
    return delta @ jac[0]


def _pick(dataset: Dataset, count: int, seed: int) -> np.ndarray:
    if len(dataset) == 0 or count < 1:
        raise DataError("need at least one sample to estimate a constant")
    if count >= len(dataset):
        return np.arange(len(dataset))
    return np.sort(task_rng(seed).choice(len(dataset), size=count, replace=False))


def estimate_L(assembly: Assembly, dataset: Dataset, theta: np.ndarray, n_samples: int,
               target: str = "loss", seed: int = 0, workers: int = 1) -> float:
    """sqrt of the mean squared per-sample gradient norm (analytic mode).

    The default target differentiates the cross-entropy loss of each sample;
    "output" takes the Frobenius norm of the expectation Jacobian instead.
    """
    idx = _pick(dataset, n_samples, seed)
    encoded = assembly.encode(dataset.subset(idx))
    labels = dataset.labels[idx]
    norms = ordered_map(
        lambda i: float(np.sum(_sample_jacobian(assembly, encoded[i], labels[i], theta, target) ** 2)),
        range(len(idx)), workers,
    )
    return float(np.sqrt(np.mean(norms)))


@dataclass
class BetaEstimate:
    value: float
    converged: bool
    per_sample: list[float] = field(default_factory=list)


def _power_iteration(hvp, dim: int, rng: np.random.Generator) -> tuple[float, bool]:
    v = rng.normal(size=dim)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for iteration in range(1, POWER_MAX_ITERATIONS + 1):
        w = hvp(v)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0, True
        change = abs(norm - estimate) / norm
        estimate = norm
        v = w / norm
        if iteration >= POWER_ITERATIONS and change <= POWER_TOLERANCE:
            return estimate, True
    return estimate, False


def estimate_beta(assembly: Assembly, dataset: Dataset, theta: np.ndarray, n_probes: int,
                  target: str = "loss", seed: int = 0) -> BetaEstimate:
    """Largest Hessian singular value, by power iteration on finite-difference
    Hessian-vector products of parameter-shift gradients, averaged over samples.

    The default target is the per-sample loss. For target "output" each
    measured expectation is a separate scalar and the largest norm across them
    is kept.
    """
    idx = _pick(dataset, n_probes, seed)
    encoded = assembly.encode(dataset.subset(idx))
    labels = dataset.labels[idx]
    theta = np.asarray(theta, dtype=np.float64)
    dim = theta.shape[0]
    values, converged = [], True
    for k in range(len(idx)):
        def rows(t: np.ndarray) -> np.ndarray:
            return _sample_jacobian(assembly, encoded[k], labels[k], t, target)

        best = 0.0
        for component in range(rows(theta).shape[0]):
            def hvp(v: np.ndarray) -> np.ndarray:
                plus = rows(theta + HVP_STEP * v)[component]
                minus = rows(theta - HVP_STEP * v)[component]
                return (plus - minus) / (2.0 * HVP_STEP)

            value, ok = _power_iteration(hvp, dim, task_rng(seed, component))
            converged = converged and ok
            best = max(best, value)
        values.append(best)
    if not converged:
        logger.warning("power iteration did not converge for every sample; beta is reported as a lower estimate")
    return BetaEstimate(float(np.mean(values)), converged, values)


def track_R(history: Sequence[MetricsRow]) -> float:
    """Largest squared mean gradient norm seen in the history."""
    return max((row.mean_grad_norm ** 2 for row in history), default=0.0)


def opt_bounds(l_bound: float, beta: float, r_bound: float, steps: int, eta: float,
               tau: float) -> tuple[float, float]:
    """(beta R^2 + R sqrt(L^2 + beta^2 R^2) / T, same + eta R tau sqrt(T))."""
    values = {"L": l_bound, "beta": beta, "R": r_bound, "eta": eta, "tau": tau}
    for name, value in values.items():
        if not np.isfinite(value) or value < 0:
            raise ArgumentError(f"{name} must be finite and >= 0, got {value}")
    if steps < 1:
        raise ArgumentError(f"T must be >= 1, got {steps}")
    base = beta * r_bound ** 2 + r_bound * np.sqrt(l_bound ** 2 + beta ** 2 * r_bound ** 2) / steps
    return float(base), float(base + eta * r_bound * tau * np.sqrt(steps))


# ---------------------------------------------------------------------------
# Scaling experiments
# ---------------------------------------------------------------------------


@dataclass
class ShotScalingResult:
    shots: list[int]
    stds: list[float]
    slope: float | None
    degenerate: bool

    @property
    def ratios(self) -> list[float]:
        """std(M_i) / std(M_{i+1}) for adjacent grid points."""
        return [a / b if b > 0 else float("inf") for a, b in zip(self.stds, self.stds[1:])]

    def rows(self) -> list[list]:
        return [[m, s] for m, s in zip(self.shots, self.stds)]


def shot_scaling_experiment(circuit: Sequence[Gate], num_qubits: int, shot_grid: Sequence[int] = SHOT_GRID,
                            repeats: int = 200, seed: int = 0, qubit: int = 0) -> ShotScalingResult:
    """Std of the shot estimator of <sigma_z> on `qubit` per M, and the log-log slope."""
    probs = apply_circuit(init_zero(num_qubits), circuit).probabilities
    return shot_scaling_from_probabilities(probs, num_qubits, shot_grid, repeats, seed, qubit)


def shot_scaling_from_probabilities(probs: np.ndarray, num_qubits: int, shot_grid: Sequence[int] = SHOT_GRID,
                                    repeats: int = 200, seed: int = 0, qubit: int = 0) -> ShotScalingResult:
    signs = z_signs(num_qubits)[:, qubit]
    stds = []
    for i, shots in enumerate(shot_grid):
        counts = sample_counts(np.tile(probs, (repeats, 1)), shots, task_rng(seed, i))
        stds.append(float(np.std(counts @ signs / shots, ddof=1)))
    if min(stds) <= 0.0:
        logger.info("shot estimator has zero variance on this fixture; slope is undefined")
        return ShotScalingResult(list(shot_grid), stds, None, True)
    slope = float(np.polyfit(np.log(shot_grid), np.log(stds), 1)[0])
    return ShotScalingResult(list(shot_grid), stds, slope, False)


@dataclass
class CumulativeNoiseResult:
    empirical: float
    predicted: float

    @property
    def ratio(self) -> float | None:
        return self.empirical / self.predicted if self.predicted > 0 else None


def cumulative_noise_experiment(tau: float, steps: int, eta: float, width: int, seeds: int = 50,
                                seed: int = 0) -> CumulativeNoiseResult:
    """Mean of ||sum_t eta xi_t||^2 across seeds against eta^2 T tau^2."""
    totals = []
    for s in range(seeds):
        xi = inject_measurement_noise(np.zeros((steps, width)), tau, task_rng(seed, s))
        totals.append(float(np.sum((eta * xi.sum(axis=0)) ** 2)))
    return CumulativeNoiseResult(float(np.mean(totals)), eta ** 2 * steps * tau ** 2)


# ---------------------------------------------------------------------------
# Empirical Rademacher complexity
# ---------------------------------------------------------------------------


class FunctionClass:
    """Real-valued function class with a seeded inner maximizer of (1/n) sum sigma_i f(x_i)."""

    def sup_correlation(self, features: np.ndarray, sigma: np.ndarray, steps: int,
                        rng: np.random.Generator) -> float:
        raise NotImplementedError


@dataclass
class ConstantClass(FunctionClass):
    value: float = 0.5

    def sup_correlation(self, features, sigma, steps, rng) -> float:
        return float(np.mean(sigma * self.value))


@dataclass
class FcClass(FunctionClass):
    """Linear scores w . x with ||w|| <= weight_cap, maximized by projected gradient ascent."""
    weight_cap: float = 1.0
    lr: float = 1.0

    def sup_correlation(self, features, sigma, steps, rng) -> float:
        w = rng.normal(size=features.shape[1])
        w *= self.weight_cap / max(np.linalg.norm(w), 1e-300)
        grad = (sigma[:, None] * features).mean(axis=0)
        for _ in range(steps):
            w = w + self.lr * grad
            norm = np.linalg.norm(w)
            if norm > self.weight_cap:
                w *= self.weight_cap / norm
        return float(np.mean(sigma * (features @ w)))


@dataclass
class VqcClass(FunctionClass):
    """<sigma_z> of qubit 0 after the ansatz, maximized over theta by Adam ascent."""
    spec: AnsatzSpec
    lr: float = 0.1

    def sup_correlation(self, features, sigma, steps, rng) -> float:
        executor = CircuitExecutor(self.spec)
        states = product_amplitudes(features)
        params = {"theta": rng.uniform(-np.pi, np.pi, size=self.spec.param_count)}
        optimizer = Adam(self.lr)
        best = -np.inf
        for _ in range(steps):
            z, jac = jacobians(executor, params["theta"], states, _ANALYTIC)
            best = max(best, float(np.mean(sigma * z[:, 0])))
            optimizer.step(params, {"theta": -(sigma[:, None] * jac[:, 0, :]).mean(axis=0)})
        z = executor.expectations(np.tile(params["theta"], (states.shape[0], 1)), states, _ANALYTIC)
        return max(best, float(np.mean(sigma * z[:, 0])))


@dataclass
class RademacherEstimate:
    value: float
    standard_error: float
    n_sigma: int


def rademacher_estimate(head_class: FunctionClass, features: np.ndarray, n_sigma: int = 32,
                        inner_steps: int = 50, seed: int = 0, workers: int = 1) -> RademacherEstimate:
    """Monte-Carlo mean over sigma of the inner supremum, clipped at 0, with its standard error."""
    features = np.asarray(features, dtype=np.float64)
    n, width = features.shape
    if n > RADEMACHER_MAX_SAMPLES or width > RADEMACHER_MAX_WIDTH:
        raise ScaleError(
            f"Rademacher estimate is limited to n <= {RADEMACHER_MAX_SAMPLES} and U <= {RADEMACHER_MAX_WIDTH}, "
            f"got n={n}, U={width}"
        )

    def one_draw(draw: int) -> float:
        rng = task_rng(seed, draw)
        sigma = rng.choice([-1.0, 1.0], size=n)
        return head_class.sup_correlation(features, sigma, inner_steps, rng)

    sups = np.array(ordered_map(one_draw, range(n_sigma), workers))
    value = max(float(sups.mean()), 0.0)
    se = float(sups.std(ddof=1) / np.sqrt(n_sigma)) if n_sigma > 1 else 0.0
    return RademacherEstimate(value, se, n_sigma)


# ---------------------------------------------------------------------------
# Single-qubit cosine toy
# ---------------------------------------------------------------------------

COSINE_SPEC = AnsatzSpec(num_qubits=1, depth=1, measure_qubits=1)


class CosineToy:
    """Loss (1 + <sigma_z>) / 2 of RX, RY, RZ on |0>; its minimum 0 sits at beta = pi."""

    def __init__(self):
        self.executor = CircuitExecutor(COSINE_SPEC)
        self.state = init_zero(1).amplitudes[None, :]

    def loss_and_grad(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        z, jac = jacobians(self.executor, theta, self.state, _ANALYTIC)
        return float((1.0 + z[0, 0]) / 2.0), jac[0, 0] / 2.0

    def run_sgd(self, theta0: np.ndarray, steps: int, lr: float) -> tuple[np.ndarray, list[float]]:
        params = {"theta": np.array(theta0, dtype=np.float64)}
        optimizer = SGD(lr)
        losses = []
        for _ in range(steps):
            loss, grad = self.loss_and_grad(params["theta"])
            losses.append(loss)
            optimizer.step(params, {"theta": grad})
        losses.append(self.loss_and_grad(params["theta"])[0])
        return params["theta"], losses


@dataclass
class ExperimentSummary:
    passed_fraction: float
    values: list[float]
    threshold: float

    @property
    def passed(self) -> bool:
        return self.passed_fraction >= self.threshold


def _toy_start(seed: int, run: int) -> np.ndarray:
    return np.array([0.0, task_rng(seed, run).uniform(-np.pi, np.pi), 0.0])


def bound_sanity_experiment(runs: int = 20, steps: int = 100, seed: int = 0, r_bound: float = 1.0,
                            l_bound: float = 1.0, beta: float = 1.0, threshold: float = 0.9) -> ExperimentSummary:
    """Fraction of SGD runs whose final loss minus the known minimum stays within the step-count bound."""
    eta = theorem3_lr(r_bound, l_bound, beta, steps)
    bound, _ = opt_bounds(l_bound, beta, r_bound, steps, eta, 0.0)
    toy = CosineToy()
    gaps = [toy.run_sgd(_toy_start(seed, run), steps, eta)[1][-1] for run in range(runs)]
    violations = [g for g in gaps if g > bound]
    if violations:
        logger.warning(f"{len(violations)}/{runs} cosine-toy runs exceeded the bound {bound:.6g}")
    return ExperimentSummary(1.0 - len(violations) / runs, gaps, threshold)


def smoothed(values: Sequence[float], window: int = 5) -> np.ndarray:
    return np.convolve(np.asarray(values, dtype=np.float64), np.ones(window) / window, mode="valid")


def loss_monotonicity_experiment(runs: int = 20, steps: int = 100, seed: int = 0, window: int = 5,
                                 threshold: float = 0.9) -> ExperimentSummary:
    """Fraction of theorem3-schedule SGD runs whose smoothed loss never increases."""
    eta = theorem3_lr(1.0, 1.0, 1.0, steps)
    toy = CosineToy()
    flags = []
    for run in range(runs):
        _, losses = toy.run_sgd(_toy_start(seed, run), steps, eta)
        flags.append(float(np.all(np.diff(smoothed(losses, window)) <= 1e-12)))
    return ExperimentSummary(float(np.mean(flags)), flags, threshold)


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


def build_bound_report(assembly: Assembly, train_set: Dataset, result: TrainResult, config_hash: str, seed: int,
                       tau: float, n_samples: int = 32, n_probes: int = 4, target: str = "loss",
                       workers: int = 1) -> BoundReport:
    """Estimate L, beta and R for a trained VQC assembly and evaluate both bounds."""
    theta = assembly.theta
    notes = [
        "epsOptNoiseBound treats the cumulative-noise variance as tau^2",
        f"L and beta are estimated on the {'measured outputs' if target == 'output' else 'per-sample loss'}",
    ]
    l_hat = estimate_L(assembly, train_set, theta, n_samples, target, seed, workers)
    beta = estimate_beta(assembly, train_set, theta, n_probes, target, seed)
    if not beta.converged:
        notes.append("beta power iteration did not converge; betaHat is a lower estimate")
    r_hat = track_R(result.history)
    bound, noise_bound = opt_bounds(l_hat, beta.value, r_hat, result.steps, result.lr, tau)
    losses = [row.train_loss for row in result.history]
    final = result.history[-1]

    rademacher = None
    encoded = assembly.encode(train_set)
    if encoded.shape[1] <= RADEMACHER_MAX_WIDTH:
        sample = encoded[_pick(train_set, min(len(train_set), n_samples, RADEMACHER_MAX_SAMPLES), seed)]
        rademacher = rademacher_estimate(VqcClass(assembly.ansatz), sample, seed=seed, workers=workers)
    else:
        notes.append(f"rademacherHat skipped: U={encoded.shape[1]} exceeds {RADEMACHER_MAX_WIDTH}")

    state = product_amplitudes(encoded[:1])
    probe = CircuitExecutor(assembly.ansatz).probabilities(theta[None, :], state)[0]
    shots = shot_scaling_from_probabilities(probe, assembly.ansatz.num_qubits, seed=seed)

    approximation = assembly.block.metadata.get("probe_accuracy") if hasattr(assembly.block, "metadata") else None
    if approximation is not None:
        notes.append("approximationProxy is the source-task probe accuracy of the pretrained block")
    notes.append("estimationProxy is final train accuracy minus test accuracy")
    return BoundReport(
        source_config_hash=config_hash, seed=seed, l_hat=l_hat, beta_hat=beta.value, beta_converged=beta.converged,
        r_hat=r_hat, tau=tau, t_steps=result.steps, eta=result.lr, eps_opt_bound=bound,
        eps_opt_noise_bound=noise_bound, observed_gap=max(losses[-1] - min(losses), 0.0),
        rademacher_hat=None if rademacher is None else rademacher.value,
        rademacher_se=None if rademacher is None else rademacher.standard_error,
        shot_scaling_exponent=shots.slope, approximation_proxy=approximation,
        estimation_proxy=final.train_accuracy - final.test_accuracy, notes=notes,
    )
