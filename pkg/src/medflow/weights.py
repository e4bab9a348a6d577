"""Stabilized inverse-probability weights over the analysis waves.

Three weight families are computed per (person, wave): treatment and
mediator weights for the outcome model and a treatment weight for the
mediator model. Numerators condition on recent history only, denominators
add the baseline covariates and lagged time-varying confounders, so each
ratio is a stabilized weight with mean near 1 under correct specification.
Per-person products over waves feed the structural models after percentile
winsorization.

Covariate lists name columns of the long format (see
:func:`medflow.panel.build_long`); ``a:b`` denotes a product term.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateDensityError, PositivityWarning
from .glm import DesignMatrix, fit_linear, fit_logistic, gaussian_density
from .panel import LongData, PanelDataset, build_long

MIN_DENSITY_SD = 1e-10


@dataclass(frozen=True)
class WeightModelSpec:
    """Covariate lists per weight family plus truncation and pooling knobs."""

    y_t_numerator: tuple[str, ...]
    y_t_denominator: tuple[str, ...]
    y_m_numerator: tuple[str, ...]
    y_m_denominator: tuple[str, ...]
    m_t_numerator: tuple[str, ...]
    m_t_denominator: tuple[str, ...]
    lower_pct: float = 1.0
    upper_pct: float = 99.0
    pooled: bool = True
    wave_fixed_effects: bool = True
    positivity_floor: float = 1e-6

    def validate(self) -> None:
        pairs = (
            ("y_t", self.y_t_numerator, self.y_t_denominator),
            ("y_m", self.y_m_numerator, self.y_m_denominator),
            ("m_t", self.m_t_numerator, self.m_t_denominator),
        )
        for name, num, den in pairs:
            if not set(num) <= set(den):
                raise ConfigError(
                    f"{name}: denominator covariates must be a superset of the numerator"
                )
        if not (0.0 <= self.lower_pct < self.upper_pct <= 100.0):
            raise ConfigError("need 0 <= lower_pct < upper_pct <= 100")


def default_weight_spec(panel: PanelDataset) -> WeightModelSpec:
    """History-conditional numerators; denominators add C and lagged L.

    Baseline wave-1 treatment/mediator columns join the denominators only
    when there are at least two analysis waves; at a single analysis wave
    they would duplicate the lag columns exactly.
    """
    recent = ("a_prev", "m_prev")
    c_and_l = tuple(panel.c_names) + tuple(f"{n}_prev" for n in panel.l_names)
    bases = ("a_base", "m_base") if panel.n_waves >= 3 else ()
    return WeightModelSpec(
        y_t_numerator=recent,
        y_t_denominator=recent + c_and_l + bases,
        y_m_numerator=("m_prev", "a"),
        y_m_denominator=("m_prev", "a") + c_and_l + bases,
        m_t_numerator=("a_prev",),
        m_t_denominator=recent + c_and_l + bases,
    )


def _column(long: LongData, name: str) -> np.ndarray:
    if ":" in name:
        parts = name.split(":")
        out = np.ones(long.n_rows)
        for part in parts:
            out = out * _column(long, part)
        return out
    try:
        return long.columns[name]
    except KeyError as exc:
        raise ConfigError(f"unknown covariate column {name!r}") from exc


def _design(long: LongData, covariates, wave_fe: bool) -> DesignMatrix:
    cols = {name: _column(long, name) for name in covariates}
    if wave_fe:
        waves = np.unique(long.columns["wave"])
        for w in waves[1:]:
            cols[f"wave_{int(w)}"] = (long.columns["wave"] == w).astype(np.float64)
    if not cols:  # intercept-only model (e.g. a marginal weight numerator)
        return DesignMatrix(np.ones((long.n_rows, 1)), ["intercept"])
    return DesignMatrix.from_columns(cols)


def _binary_prob_at_observed(
    long, response, covariates, spec, starts=None, cache=None
) -> np.ndarray:
    """Fitted P(response = observed value | covariates) per row.

    ``starts`` is a read-only warm-start map keyed like ``cache``; the
    optimum is unaffected, only the iteration count. ``cache`` deduplicates
    identical model fits within one weight pass (the outcome- and
    mediator-model treatment denominators usually coincide).
    """
    key = ("binary", response, tuple(covariates), spec.pooled)
    if cache is not None and key in cache:
        return cache[key]
    y = long.columns[response]
    out = np.empty(long.n_rows)
    if spec.pooled:
        X = _design(long, covariates, spec.wave_fixed_effects)
        fit = fit_logistic(
            X, y, start=None if starts is None else starts.get(key), compute_se=False
        )
        p1 = fit.predict_mean(X.values)
        out[:] = np.where(y == 1.0, p1, 1.0 - p1)
        if starts is not None and key not in starts:
            starts[key] = fit.coef
    else:
        waves = long.columns["wave"]
        for w in np.unique(waves):
            rows = waves == w
            sub = LongData(
                n_persons=int(rows.sum()),
                waves_per_person=1,
                columns={k: v[rows] for k, v in long.columns.items()},
            )
            wkey = key + (int(w),)
            X = _design(sub, covariates, wave_fe=False)
            fit = fit_logistic(
                X,
                sub.columns[response],
                start=None if starts is None else starts.get(wkey),
                compute_se=False,
            )
            p1 = fit.predict_mean(X.values)
            out[rows] = np.where(sub.columns[response] == 1.0, p1, 1.0 - p1)
            if starts is not None and wkey not in starts:
                starts[wkey] = fit.coef
    if cache is not None:
        cache[key] = out
    return out


def _gaussian_density_at_observed(long, response, covariates, spec) -> np.ndarray:
    """Fitted normal density of the observed response per row."""
    y = long.columns[response]
    out = np.empty(long.n_rows)
    if spec.pooled:
        X = _design(long, covariates, spec.wave_fixed_effects)
        fit = fit_linear(X, y, compute_se=False)
        if fit.residual_sd is None or fit.residual_sd < MIN_DENSITY_SD:
            raise DegenerateDensityError(
                f"residual SD {fit.residual_sd} below {MIN_DENSITY_SD}; "
                "mediator density is degenerate"
            )
        out[:] = gaussian_density(y, fit.linear_predictor(X.values), fit.residual_sd)
    else:
        waves = long.columns["wave"]
        for w in np.unique(waves):
            rows = waves == w
            sub = LongData(
                n_persons=int(rows.sum()),
                waves_per_person=1,
                columns={k: v[rows] for k, v in long.columns.items()},
            )
            X = _design(sub, covariates, wave_fe=False)
            fit = fit_linear(X, sub.columns[response], compute_se=False)
            if fit.residual_sd is None or fit.residual_sd < MIN_DENSITY_SD:
                raise DegenerateDensityError(
                    f"wave {int(w)}: residual SD below {MIN_DENSITY_SD}"
                )
            out[rows] = gaussian_density(
                sub.columns[response], fit.linear_predictor(X.values), fit.residual_sd
            )
    return out


def _check_positivity(long, denom_probs, spec, family: str) -> int:
    low = np.flatnonzero(denom_probs < spec.positivity_floor)
    if low.size:
        pairs = [
            (int(long.columns["person_id"][i]), int(long.columns["wave"][i]))
            for i in low[:10]
        ]
        warnings.warn(
            f"{family}: {low.size} fitted denominator probabilities below "
            f"{spec.positivity_floor}; first offenders (person, wave): {pairs}",
            PositivityWarning,
            stacklevel=3,
        )
    return int(low.size)


def treatment_weights_outcome(
    long: LongData, spec: WeightModelSpec, starts=None, cache=None
) -> np.ndarray:
    """Stabilized treatment weight for the outcome model, per row."""
    num = _binary_prob_at_observed(long, "a", spec.y_t_numerator, spec, starts, cache)
    den = _binary_prob_at_observed(long, "a", spec.y_t_denominator, spec, starts, cache)
    _check_positivity(long, den, spec, "treatment-outcome weight")
    return num / den


def mediator_weights_outcome(long: LongData, spec: WeightModelSpec) -> np.ndarray:
    """Stabilized mediator weight for the outcome model (density ratio)."""
    num = _gaussian_density_at_observed(long, "m", spec.y_m_numerator, spec)
    den = _gaussian_density_at_observed(long, "m", spec.y_m_denominator, spec)
    _check_positivity(long, den, spec, "mediator-outcome weight")
    return num / den


def treatment_weights_mediator(
    long: LongData, spec: WeightModelSpec, starts=None, cache=None
) -> np.ndarray:
    """Stabilized treatment weight for the mediator model, per row."""
    num = _binary_prob_at_observed(long, "a", spec.m_t_numerator, spec, starts, cache)
    den = _binary_prob_at_observed(long, "a", spec.m_t_denominator, spec, starts, cache)
    _check_positivity(long, den, spec, "treatment-mediator weight")
    return num / den


@dataclass
class WeightSet:
    """Per-row components plus per-person products, raw and truncated."""

    person_id: np.ndarray
    wave: np.ndarray
    sw_yt: np.ndarray
    sw_ym: np.ndarray
    sw_mt: np.ndarray
    w_y_raw: np.ndarray
    w_m_raw: np.ndarray
    w_y: np.ndarray
    w_m: np.ndarray
    bounds: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def _summary(x: np.ndarray) -> dict:
    return {
        "mean": float(x.mean()),
        "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0,
        "min": float(x.min()),
        "max": float(x.max()),
    }


def _winsorize(x: np.ndarray, lower_pct: float, upper_pct: float):
    lo, hi = np.percentile(x, [lower_pct, upper_pct])
    return np.clip(x, lo, hi), (float(lo), float(hi))


def cumulate_and_truncate(
    long: LongData,
    sw_yt: np.ndarray,
    sw_ym: np.ndarray,
    sw_mt: np.ndarray,
    spec: WeightModelSpec,
) -> WeightSet:
    """Per-person products over waves, winsorized at the spec percentiles."""
    n, k = long.n_persons, long.waves_per_person
    w_y_raw = (sw_yt * sw_ym).reshape(n, k).prod(axis=1)
    w_m_raw = sw_mt.reshape(n, k).prod(axis=1)
    w_y, y_bounds = _winsorize(w_y_raw, spec.lower_pct, spec.upper_pct)
    w_m, m_bounds = _winsorize(w_m_raw, spec.lower_pct, spec.upper_pct)
    diagnostics = {
        "sw_yt": _summary(sw_yt),
        "sw_ym": _summary(sw_ym),
        "sw_mt": _summary(sw_mt),
        "w_y_raw": _summary(w_y_raw),
        "w_m_raw": _summary(w_m_raw),
        "w_y": _summary(w_y),
        "w_m": _summary(w_m),
    }
    return WeightSet(
        person_id=long.columns["person_id"],
        wave=long.columns["wave"],
        sw_yt=sw_yt,
        sw_ym=sw_ym,
        sw_mt=sw_mt,
        w_y_raw=w_y_raw,
        w_m_raw=w_m_raw,
        w_y=w_y,
        w_m=w_m,
        bounds={"w_y": y_bounds, "w_m": m_bounds},
        diagnostics=diagnostics,
    )


def compute_weights(
    panel_or_long: PanelDataset | LongData,
    spec: WeightModelSpec | None = None,
    starts: dict | None = None,
) -> WeightSet:
    """All three families plus products and truncation in one pass.

    ``starts`` (optional) is a warm-start map shared across repeated calls
    on resampled data; it is only written for keys it does not yet hold, so
    a map filled once from a full-sample pass stays read-only afterwards.
    """
    if isinstance(panel_or_long, PanelDataset):
        long = build_long(panel_or_long)
        spec = spec or default_weight_spec(panel_or_long)
    else:
        long = panel_or_long
        if spec is None:
            raise ConfigError("a WeightModelSpec is required with long-format input")
    spec.validate()
    cache: dict = {}
    sw_yt = treatment_weights_outcome(long, spec, starts, cache)
    sw_ym = mediator_weights_outcome(long, spec)
    sw_mt = treatment_weights_mediator(long, spec, starts, cache)
    return cumulate_and_truncate(long, sw_yt, sw_ym, sw_mt, spec)
