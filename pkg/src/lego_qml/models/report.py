"""Theory-lab configuration and report models."""

from typing import Literal, Optional

from pydantic import Field

from .base import BaseConfigModel


class TheoryConfig(BaseConfigModel):
    """Which theory-lab estimates a run produces."""
    report: bool = Field(default=False, description="Write bound_report.json after training")
    n_samples: int = Field(default=32, ge=1, description="Samples for L and beta estimates", alias="nSamples")
    n_probes: int = Field(default=4, ge=1, description="Samples probed by power iteration", alias="nProbes")
    target: Literal["loss", "output"] = Field(
        default="loss",
        description="Differentiate the per-sample loss or each measured output"
    )


class BoundReport(BaseConfigModel):
    """Empirical constants and optimization-error bounds for one run."""
    source_config_hash: str = Field(alias="configHash")
    seed: int
    l_hat: float = Field(ge=0, alias="LHat")
    beta_hat: float = Field(ge=0, alias="betaHat")
    beta_converged: bool = Field(default=True, alias="betaConverged")
    r_hat: float = Field(ge=0, alias="RHat")
    tau: float = Field(ge=0)
    t_steps: int = Field(ge=1, alias="T")
    eta: float = Field(ge=0)
    eps_opt_bound: float = Field(ge=0, alias="epsOptBound")
    eps_opt_noise_bound: float = Field(ge=0, alias="epsOptNoiseBound")
    observed_gap: float = Field(ge=0, alias="observedGap")
    rademacher_hat: Optional[float] = Field(default=None, ge=0, alias="rademacherHat")
    rademacher_se: Optional[float] = Field(default=None, ge=0, alias="rademacherSe")
    shot_scaling_exponent: Optional[float] = Field(default=None, alias="shotScalingExponent")
    approximation_proxy: Optional[float] = Field(
        default=None,
        description="Proxy for eps_app: source-probe accuracy of a pretrained block",
        alias="approximationProxy"
    )
    estimation_proxy: Optional[float] = Field(
        default=None,
        description="Proxy for eps_est: final train accuracy minus test accuracy",
        alias="estimationProxy"
    )
    notes: list[str] = Field(default_factory=list)
