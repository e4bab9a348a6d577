"""Marginal structural models and interventional effect arithmetic.

The outcome model is a weighted Poisson regression of the end-of-study
outcome on cumulative treatment and cumulative mediator exposure (one row
per person, log link, HC0 robust errors), the mediator model a weighted
pooled linear regression of the wave mediator on the running post-baseline
treatment average. For a contrast that switches every analysis wave from
untreated to treated, the direct effect on the log scale is T * theta1 and
the indirect effect T * beta1 * theta2, with T the number of analysis
waves. Inference resamples whole persons and reruns the entire pipeline,
weight fitting included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BootstrapError, ConfigError, MedflowError
from .glm import DesignMatrix, GlmFit, fit_linear, fit_poisson_robust
from .panel import LongData, PanelDataset, build_long
from .weights import WeightModelSpec, WeightSet, compute_weights, default_weight_spec

_BOOT_TAG = 0x424F4F54


@dataclass
class MsmEstimates:
    theta0: float
    theta1: float
    theta2: float
    se_theta0: float
    se_theta1: float
    se_theta2: float
    beta0: float
    beta1: float
    se_beta0: float
    se_beta1: float
    n_persons: int
    n_analysis_waves: int
    outcome_coef: np.ndarray | None = None  # full vector, for warm starts

    def as_dict(self) -> dict:
        return {
            "theta0": self.theta0,
            "theta1": self.theta1,
            "theta2": self.theta2,
            "beta0": self.beta0,
            "beta1": self.beta1,
            "robust_se": {
                "theta0": self.se_theta0,
                "theta1": self.se_theta1,
                "theta2": self.se_theta2,
            },
            "se": {"beta0": self.se_beta0, "beta1": self.se_beta1},
            "n_persons": self.n_persons,
            "n_analysis_waves": self.n_analysis_waves,
        }


@dataclass
class InterventionalEffects:
    ide_log: float
    iie_log: float
    total_log: float
    ide_rr: float
    iie_rr: float
    proportion_mediated: float
    T: int

    def as_dict(self) -> dict:
        return {
            "ide_log": self.ide_log,
            "iie_log": self.iie_log,
            "total_log": self.total_log,
            "ide_rr": self.ide_rr,
            "iie_rr": self.iie_rr,
            "proportion_mediated": self.proportion_mediated,
            "T": self.T,
        }


def fit_outcome_msm(
    panel: PanelDataset, w_y: np.ndarray, start: np.ndarray | None = None
) -> GlmFit:
    """Poisson MSM of the outcome on cumulative treatment and mediator.

    The baseline-wave treatment and mediator enter as covariates: the
    stabilized-weight numerators condition on them at the first analysis
    wave, and weighted regressions stay consistent only when the marginal
    model carries every numerator covariate.
    """
    X = DesignMatrix.from_columns(
        {
            "cum_a": panel.cum_a(),
            "cum_m": panel.cum_m(),
            "a_base": panel.a[:, 0].astype(np.float64),
            "m_base": panel.m[:, 0],
        }
    )
    return fit_poisson_robust(X, panel.y.astype(np.float64), case_weights=w_y, start=start)


def fit_mediator_msm(
    panel_or_long: PanelDataset | LongData, w_m: np.ndarray
) -> GlmFit:
    """Pooled linear MSM of the wave mediator on the running treatment
    average, with wave-specific intercepts and a common slope; each
    person's rows share that person's product weight."""
    long = (
        build_long(panel_or_long)
        if isinstance(panel_or_long, PanelDataset)
        else panel_or_long
    )
    row_w = np.repeat(w_m, long.waves_per_person)
    # wave intercepts plus the baseline values the weight numerators use
    cols = {"avg_a": long.columns["avg_a"]}
    waves = np.unique(long.columns["wave"])
    for w in waves[1:]:
        cols[f"wave_{int(w)}"] = (long.columns["wave"] == w).astype(np.float64)
    cols["a_base"] = long.columns["a_base"]
    cols["m_base"] = long.columns["m_base"]
    X = DesignMatrix.from_columns(cols)
    return fit_linear(X, long.columns["m"], case_weights=row_w)


def msm_estimates(
    panel: PanelDataset,
    weight_set: WeightSet,
    long: LongData | None = None,
    outcome_start: np.ndarray | None = None,
) -> MsmEstimates:
    outcome = fit_outcome_msm(panel, weight_set.w_y, start=outcome_start)
    mediator = fit_mediator_msm(long if long is not None else panel, weight_set.w_m)
    if not outcome.converged:
        raise MedflowError("outcome MSM did not converge")
    i_a, i_m = outcome.names.index("cum_a"), outcome.names.index("cum_m")
    j_a = mediator.names.index("avg_a")
    return MsmEstimates(
        theta0=float(outcome.coef[0]),
        theta1=float(outcome.coef[i_a]),
        theta2=float(outcome.coef[i_m]),
        se_theta0=float(outcome.robust_se[0]),
        se_theta1=float(outcome.robust_se[i_a]),
        se_theta2=float(outcome.robust_se[i_m]),
        beta0=float(mediator.coef[0]),
        beta1=float(mediator.coef[j_a]),
        se_beta0=float(mediator.se[0]),
        se_beta1=float(mediator.se[j_a]),
        n_persons=panel.n_persons,
        n_analysis_waves=panel.n_analysis_waves,
        outcome_coef=outcome.coef,
    )


def interventional_effects(
    theta1: float, theta2: float, beta1: float, T: int
) -> InterventionalEffects:
    """Pure arithmetic for the always-treated vs never-treated contrast."""
    if T < 1:
        raise ConfigError("T must be >= 1")
    ide_log = T * theta1
    iie_log = T * beta1 * theta2
    total_log = ide_log + iie_log
    return InterventionalEffects(
        ide_log=ide_log,
        iie_log=iie_log,
        total_log=total_log,
        ide_rr=math.exp(ide_log),
        iie_rr=math.exp(iie_log),
        proportion_mediated=iie_log / total_log if total_log != 0.0 else float("nan"),
        T=T,
    )


def estimate_effects(
    panel: PanelDataset,
    spec: WeightModelSpec | None = None,
    T: int | None = None,
    long: LongData | None = None,
) -> tuple[MsmEstimates, InterventionalEffects]:
    """One full pass: weights, both MSMs, effect arithmetic."""
    spec = spec or default_weight_spec(panel)
    long = long or build_long(panel)
    weight_set = compute_weights(long, spec)
    est = msm_estimates(panel, weight_set, long=long)
    T_eff = T if T is not None else panel.n_analysis_waves
    return est, interventional_effects(est.theta1, est.theta2, est.beta1, T_eff)


EFFECT_KEYS = (
    "ide_log",
    "iie_log",
    "total_log",
    "proportion_mediated",
    "theta1",
    "theta2",
    "beta1",
)


@dataclass
class BootstrapResult:
    point: InterventionalEffects
    estimates: MsmEstimates
    ci: dict[str, tuple[float, float]]
    se: dict[str, float]
    replicates: dict[str, np.ndarray]
    B: int
    seed: int
    n_failed: int
    failures: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        out = {
            "coefficients": self.estimates.as_dict(),
            **self.point.as_dict(),
            "ci": {k: [float(v[0]), float(v[1])] for k, v in self.ci.items()},
            "bootstrap_se": {k: float(v) for k, v in self.se.items()},
            "B": self.B,
            "seed": self.seed,
            "n_failed": self.n_failed,
        }
        out["ide_rr_ci"] = [math.exp(v) for v in out["ci"]["ide_log"]]
        out["iie_rr_ci"] = [math.exp(v) for v in out["ci"]["iie_log"]]
        return out


def bootstrap_effects(
    panel: PanelDataset,
    spec: WeightModelSpec | None = None,
    B: int = 500,
    seed: int = 0,
    T: int | None = None,
) -> BootstrapResult:
    """Person-level bootstrap of the full pipeline with percentile CIs.

    Replicate seeds derive from (seed, replicate index), so any execution
    order reproduces the same intervals. Replicates whose fits fail are
    skipped and counted; more than 5 percent failures is an error.
    """
    if B < 2:
        raise ConfigError("B must be >= 2")
    spec = spec or default_weight_spec(panel)
    long = build_long(panel)
    # full-sample pass also fills the warm-start map used by every replicate
    starts: dict = {}
    weight_full = compute_weights(long, spec, starts=starts)
    est = msm_estimates(panel, weight_full, long=long)
    T_eff = T if T is not None else panel.n_analysis_waves
    point = interventional_effects(est.theta1, est.theta2, est.beta1, T_eff)
    outcome_start = est.outcome_coef
    n = panel.n_persons
    draws = {k: [] for k in EFFECT_KEYS}
    failures: list[str] = []
    for b in range(B):
        rng = np.random.Generator(
            np.random.PCG64(
                np.random.SeedSequence(entropy=seed, spawn_key=(_BOOT_TAG, b))
            )
        )
        idx = rng.integers(0, n, size=n)
        try:
            rep_long = long.gather(idx)
            rep_panel = panel.subset(idx)
            weight_set = compute_weights(rep_long, spec, starts=starts)
            rep_est = msm_estimates(
                rep_panel, weight_set, long=rep_long, outcome_start=outcome_start
            )
            rep_eff = interventional_effects(
                rep_est.theta1, rep_est.theta2, rep_est.beta1, T_eff
            )
        except MedflowError as exc:
            failures.append(f"replicate {b}: {exc}")
            continue
        draws["ide_log"].append(rep_eff.ide_log)
        draws["iie_log"].append(rep_eff.iie_log)
        draws["total_log"].append(rep_eff.total_log)
        draws["proportion_mediated"].append(rep_eff.proportion_mediated)
        draws["theta1"].append(rep_est.theta1)
        draws["theta2"].append(rep_est.theta2)
        draws["beta1"].append(rep_est.beta1)
    n_failed = len(failures)
    if n_failed > 0.05 * B:
        raise BootstrapError(
            f"{n_failed} of {B} bootstrap replicates failed; first: {failures[0]}"
        )
    reps = {k: np.asarray(v) for k, v in draws.items()}
    ci = {
        k: tuple(np.percentile(v, [2.5, 97.5])) for k, v in reps.items() if v.size
    }
    se = {
        k: float(v.std(ddof=1)) if v.size > 1 else float("nan")
        for k, v in reps.items()
    }
    return BootstrapResult(
        point=point,
        estimates=est,
        ci=ci,
        se=se,
        replicates=reps,
        B=B,
        seed=seed,
        n_failed=n_failed,
        failures=failures,
    )
