import dataclasses as dc
import math

import numpy as np
import pytest

from medflow import synthdata as sd
from medflow.effects import (
    bootstrap_effects,
    estimate_effects,
    fit_mediator_msm,
    fit_outcome_msm,
    interventional_effects,
)
from medflow.errors import BootstrapError, ConfigError
from medflow.panel import PanelDataset


def _panel(a, m, y, l=None, c=None):
    n, T = a.shape
    l = np.zeros((n, T, 0)) if l is None else l
    return PanelDataset(
        person_id=np.arange(n, dtype=np.int64),
        c_names=[] if c is None else [f"c{i}" for i in range(c.shape[1])],
        c_values=np.zeros((n, 0)) if c is None else c,
        a=a.astype(np.int8),
        m=m.astype(np.float64),
        l_names=[f"l{i}" for i in range(l.shape[2])],
        l=l,
        y=y.astype(np.int8),
    )


class TestCalculator:
    def test_null_direct_path(self):
        eff = interventional_effects(0.0, 0.3, 0.2, T=10)
        assert eff.ide_log == 0.0
        assert eff.ide_rr == 1.0

    def test_exp_log_consistency(self):
        eff = interventional_effects(0.13, 0.27, 0.08, T=7)
        assert eff.ide_rr == math.exp(eff.ide_log)
        assert eff.iie_rr == math.exp(eff.iie_log)

    def test_decomposition_identity(self):
        eff = interventional_effects(0.21, -0.05, 0.3, T=9)
        assert eff.total_log == eff.ide_log + eff.iie_log

    def test_doubling_horizon_doubles_log_effects(self):
        one = interventional_effects(0.11, 0.22, 0.33, T=6)
        two = interventional_effects(0.11, 0.22, 0.33, T=12)
        assert two.ide_log == pytest.approx(2 * one.ide_log, rel=1e-15)
        assert two.iie_log == pytest.approx(2 * one.iie_log, rel=1e-15)

    def test_zero_total_yields_nan_proportion(self):
        eff = interventional_effects(0.0, 0.5, 0.0, T=3)
        assert math.isnan(eff.proportion_mediated)

    def test_horizon_validated(self):
        with pytest.raises(ConfigError):
            interventional_effects(0.1, 0.1, 0.1, T=0)


class TestOutcomeMsm:
    def test_pure_noise_outcome_recovers_null(self):
        r = np.random.default_rng(14)
        n = 20000
        a = r.integers(0, 2, size=(n, 3))
        m = r.normal(0.4, 0.1, size=(n, 3))
        y = r.integers(0, 2, size=n) * (r.random(n) < 0.6)
        fit = fit_outcome_msm(_panel(a, m, y), np.ones(n))
        for name in ("cum_a", "cum_m"):
            i = fit.names.index(name)
            assert abs(fit.coef[i]) < 3 * fit.robust_se[i]

    def test_recovers_known_log_link_coefficients(self):
        # L confounds treatment and mediator but is untouched by treatment,
        # so the marginal log-link coefficients equal the structural ones
        cfg = sd.default_config(n_persons=100_000, n_waves=3, seed=44)
        cfg = dc.replace(
            cfg,
            confounders=tuple(dc.replace(eq, a=0.0) for eq in cfg.confounders),
            outcome=sd.OutcomeEq(-3.2, cum_a=0.2, cum_m=0.1, l_mean=(0.3, -0.2)),
        )
        panel, _ = sd.generate_population(cfg)
        est, _ = estimate_effects(panel)
        assert abs(est.theta1 - 0.2) < 3 * est.se_theta1
        assert abs(est.theta2 - 0.1) < 3 * est.se_theta2


class TestMediatorMsm:
    def test_recovers_running_average_slope(self):
        r = np.random.default_rng(5)
        n, T = 100_000, 4
        a = (r.random((n, T)) < 0.4).astype(int)
        running = np.cumsum(a[:, 1:], axis=1) / np.arange(1, T)
        m = np.zeros((n, T))
        m[:, 0] = r.normal(0.0, 0.05, n)
        m[:, 1:] = 0.5 * running + r.normal(0.0, 0.05, (n, T - 1))
        fit = fit_mediator_msm(_panel(a, m, np.zeros(n)), np.ones(n))
        j = fit.names.index("avg_a")
        assert abs(fit.coef[j] - 0.5) < 3 * fit.se[j]

    def test_null_slope_when_mediator_ignores_treatment(self):
        r = np.random.default_rng(6)
        n, T = 50_000, 3
        a = (r.random((n, T)) < 0.3).astype(int)
        m = r.normal(0.4, 0.1, size=(n, T))
        fit = fit_mediator_msm(_panel(a, m, np.zeros(n)), np.ones(n))
        j = fit.names.index("avg_a")
        assert abs(fit.coef[j]) < 3 * fit.se[j]


class TestBootstrap:
    def test_minimal_replicates_give_degenerate_interval(self):
        cfg = sd.default_config(n_persons=300, n_waves=3, seed=10)
        panel, _ = sd.generate_population(cfg)
        res = bootstrap_effects(panel, B=2, seed=4)
        lo, hi = res.ci["ide_log"]
        assert lo <= hi
        assert res.replicates["ide_log"].size == 2

    def test_deterministic_for_fixed_seed(self):
        cfg = sd.default_config(n_persons=400, n_waves=3, seed=10)
        panel, _ = sd.generate_population(cfg)
        r1 = bootstrap_effects(panel, B=12, seed=99)
        r2 = bootstrap_effects(panel, B=12, seed=99)
        np.testing.assert_array_equal(r1.replicates["iie_log"], r2.replicates["iie_log"])
        assert r1.ci == r2.ci

    @pytest.mark.filterwarnings("ignore::medflow.errors.SeparationWarning")
    def test_excess_failures_raise(self):
        # outcome so rare that many resamples carry zero events
        r = np.random.default_rng(2)
        n = 12
        a = r.integers(0, 2, size=(n, 2))
        m = r.normal(0.3, 0.1, size=(n, 2))
        y = np.zeros(n, dtype=int)
        y[0] = 1
        panel = _panel(a, m, y)
        with pytest.raises(BootstrapError):
            bootstrap_effects(panel, B=40, seed=0)

    def test_b_must_be_at_least_two(self):
        cfg = sd.default_config(n_persons=50, n_waves=2, seed=1)
        panel, _ = sd.generate_population(cfg)
        with pytest.raises(ConfigError):
            bootstrap_effects(panel, B=1, seed=0)

    def test_severed_paths_pipeline_covers_zero(self):
        from conftest import severed_config

        panel, _ = sd.generate_population(severed_config(n=8000, seed=40))
        res = bootstrap_effects(panel, B=100, seed=41)
        for key in ("ide_log", "iie_log"):
            lo, hi = res.ci[key]
            assert lo <= 0.0 <= hi, (key, lo, hi)

    def test_point_estimates_match_single_pass(self):
        cfg = sd.default_config(n_persons=600, n_waves=3, seed=20)
        panel, _ = sd.generate_population(cfg)
        est, eff = estimate_effects(panel)
        res = bootstrap_effects(panel, B=4, seed=1)
        assert res.point.ide_log == pytest.approx(eff.ide_log, rel=1e-12)
        assert res.estimates.beta1 == pytest.approx(est.beta1, rel=1e-12)
