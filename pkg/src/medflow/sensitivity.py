"""Simulation-based sensitivity analysis for unmeasured confounding.

Artificial confounders are generated per person as linear functions of the
observed variables they are assumed to confound plus Gaussian noise, then
added to the denominator covariates of the one weight family they target:

* treatment-mediator -> the treatment weight of the mediator model,
* treatment-outcome  -> the treatment weight of the outcome model,
* mediator-outcome   -> the mediator weight of the outcome model.

The pipeline is rerun per simulation and the drift of the interventional
estimates away from the confounder-free baseline is reported per grid
value of the association strength. Treatment and mediator values entering
the confounder equations are the baseline wave-1 values; the outcome is
the end-of-study indicator; the generated column is treated as a
pretreatment covariate.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import ConfigError, MedflowError, ScenarioError
from .effects import (
    InterventionalEffects,
    MsmEstimates,
    estimate_effects,
    fit_mediator_msm,
    fit_outcome_msm,
    interventional_effects,
)
from .panel import LongData, PanelDataset, build_long
from .weights import (
    WeightModelSpec,
    cumulate_and_truncate,
    default_weight_spec,
    mediator_weights_outcome,
    treatment_weights_mediator,
    treatment_weights_outcome,
)

TARGETS = ("treatment_mediator", "treatment_outcome", "mediator_outcome")
DEFAULT_GRID = (0.0, 0.1, 0.3, 0.5, 1.0)
_SENS_TAG = 0x53454E53
CONFOUNDER_COLUMN = "u_conf"


@dataclass(frozen=True)
class SensitivityScenario:
    """One synthetic-confounder setting."""

    target: str
    beta1: float
    beta2: float
    noise_sd: float = 1.0
    n_sims: int = 500
    seed: int = 0

    def validate(self) -> None:
        if self.target not in TARGETS:
            raise ConfigError(f"unknown target {self.target!r}; choose from {TARGETS}")
        if self.noise_sd <= 0:
            raise ConfigError("noise_sd must be > 0")
        if self.n_sims < 1:
            raise ConfigError("n_sims must be >= 1")


def simulate_confounder(
    panel: PanelDataset, scenario: SensitivityScenario, rng: np.random.Generator
) -> np.ndarray:
    """One per-person confounder column for the scenario's target pair."""
    scenario.validate()
    a1 = panel.a[:, 0].astype(np.float64)
    m1 = panel.m[:, 0]
    y = panel.y.astype(np.float64)
    eps = scenario.noise_sd * rng.standard_normal(panel.n_persons)
    if scenario.target == "treatment_mediator":
        col = scenario.beta1 * a1 + scenario.beta2 * m1 + eps
    elif scenario.target == "treatment_outcome":
        col = scenario.beta1 * a1 + scenario.beta2 * y + eps
    else:
        col = scenario.beta1 * y + scenario.beta2 * m1 + eps
    if not np.all(np.isfinite(col)):
        raise MedflowError("generated confounder contains non-finite values")
    return col


def _augment(long: LongData, column: np.ndarray) -> LongData:
    cols = dict(long.columns)
    cols[CONFOUNDER_COLUMN] = np.repeat(column, long.waves_per_person)
    return LongData(long.n_persons, long.waves_per_person, cols)


def _amended_spec(spec: WeightModelSpec, target: str) -> WeightModelSpec:
    if target == "treatment_mediator":
        return dataclasses.replace(
            spec, m_t_denominator=tuple(spec.m_t_denominator) + (CONFOUNDER_COLUMN,)
        )
    if target == "treatment_outcome":
        return dataclasses.replace(
            spec, y_t_denominator=tuple(spec.y_t_denominator) + (CONFOUNDER_COLUMN,)
        )
    return dataclasses.replace(
        spec, y_m_denominator=tuple(spec.y_m_denominator) + (CONFOUNDER_COLUMN,)
    )


@dataclass
class _BaselineParts:
    long: LongData
    sw_yt: np.ndarray
    sw_ym: np.ndarray
    sw_mt: np.ndarray
    estimates: MsmEstimates
    effects: InterventionalEffects


@dataclass
class ScenarioResults:
    """Per-simulation draws plus per-point aggregates and baselines."""

    rows: pd.DataFrame
    summary: dict
    baseline: InterventionalEffects

    def series(self, target: str) -> list[dict]:
        return self.summary["targets"][target]


def _rerun_with_confounder(
    panel: PanelDataset,
    parts: _BaselineParts,
    spec: WeightModelSpec,
    target: str,
    column: np.ndarray,
    T_eff: int,
) -> tuple[float, float]:
    """Refit only the weight family and structural model the target touches."""
    long = _augment(parts.long, column)
    amended = _amended_spec(spec, target)
    sw_yt, sw_ym, sw_mt = parts.sw_yt, parts.sw_ym, parts.sw_mt
    if target == "treatment_outcome":
        sw_yt = treatment_weights_outcome(long, amended)
    elif target == "mediator_outcome":
        sw_ym = mediator_weights_outcome(long, amended)
    else:
        sw_mt = treatment_weights_mediator(long, amended)
    ws = cumulate_and_truncate(long, sw_yt, sw_ym, sw_mt, amended)
    if target == "treatment_mediator":
        med = fit_mediator_msm(long, ws.w_m)
        beta1 = float(med.coef[med.names.index("avg_a")])
        theta1, theta2 = parts.estimates.theta1, parts.estimates.theta2
    else:
        out = fit_outcome_msm(panel, ws.w_y, start=parts.estimates.outcome_coef)
        if not out.converged:
            raise MedflowError("outcome MSM did not converge")
        theta1 = float(out.coef[out.names.index("cum_a")])
        theta2 = float(out.coef[out.names.index("cum_m")])
        beta1 = parts.estimates.beta1
    eff = interventional_effects(theta1, theta2, beta1, T_eff)
    return eff.ide_log, eff.iie_log


def run_scenarios(
    panel: PanelDataset,
    spec: WeightModelSpec | None = None,
    grid: tuple[float, ...] = DEFAULT_GRID,
    n_sims: int = 500,
    seed: int = 0,
    noise_sd: float = 1.0,
    targets: tuple[str, ...] = TARGETS,
    T: int | None = None,
) -> ScenarioResults:
    """Sweep all targets over the association grid (beta1 = beta2 = value).

    Per point, ``n_sims`` fresh confounder draws are pushed through the
    pipeline; failures are skipped and more than 5 percent of them raise.
    Deterministic for a fixed (seed, grid, targets).
    """
    if not grid:
        raise ConfigError("grid must be nonempty")
    for t in targets:
        if t not in TARGETS:
            raise ConfigError(f"unknown target {t!r}")
    spec = spec or default_weight_spec(panel)
    long = build_long(panel)
    est, base_eff = estimate_effects(panel, spec, T=T, long=long)
    T_eff = T if T is not None else panel.n_analysis_waves
    parts = _BaselineParts(
        long=long,
        sw_yt=treatment_weights_outcome(long, spec),
        sw_ym=mediator_weights_outcome(long, spec),
        sw_mt=treatment_weights_mediator(long, spec),
        estimates=est,
        effects=base_eff,
    )
    records = []
    summary: dict = {
        "baseline": base_eff.as_dict(),
        "grid": list(grid),
        "n_sims": n_sims,
        "seed": seed,
        "targets": {},
    }
    for ti, target in enumerate(targets):
        series = []
        for gi, value in enumerate(grid):
            ide_draws, iie_draws = [], []
            failed = 0
            scenario = SensitivityScenario(
                target=target,
                beta1=float(value),
                beta2=float(value),
                noise_sd=noise_sd,
                n_sims=n_sims,
                seed=seed,
            )
            for s in range(n_sims):
                rng = np.random.Generator(
                    np.random.PCG64(
                        np.random.SeedSequence(
                            entropy=seed, spawn_key=(_SENS_TAG, ti, gi, s)
                        )
                    )
                )
                try:
                    column = simulate_confounder(panel, scenario, rng)
                    ide, iie = _rerun_with_confounder(
                        panel, parts, spec, target, column, T_eff
                    )
                except MedflowError:
                    failed += 1
                    continue
                ide_draws.append(ide)
                iie_draws.append(iie)
                records.append(
                    {
                        "target": target,
                        "grid_value": float(value),
                        "sim_index": s,
                        "ide_log": ide,
                        "iie_log": iie,
                    }
                )
            if failed > 0.05 * n_sims:
                raise ScenarioError(
                    f"{failed} of {n_sims} simulations failed at "
                    f"target={target} value={value}"
                )
            ide_arr, iie_arr = np.asarray(ide_draws), np.asarray(iie_draws)
            point = {
                "grid_value": float(value),
                "n_completed": int(ide_arr.size),
                "n_failed": failed,
                "ide_mean": float(ide_arr.mean()),
                "ide_sd": float(ide_arr.std(ddof=1)) if ide_arr.size > 1 else 0.0,
                "iie_mean": float(iie_arr.mean()),
                "iie_sd": float(iie_arr.std(ddof=1)) if iie_arr.size > 1 else 0.0,
            }
            point["drift"] = abs(point["ide_mean"] - base_eff.ide_log) + abs(
                point["iie_mean"] - base_eff.iie_log
            )
            series.append(point)
        summary["targets"][target] = series
    return ScenarioResults(
        rows=pd.DataFrame(
            records, columns=["target", "grid_value", "sim_index", "ide_log", "iie_log"]
        ),
        summary=summary,
        baseline=base_eff,
    )
