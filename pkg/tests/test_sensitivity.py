import math

import numpy as np
import pytest

from medflow import synthdata as sd
from medflow.errors import ConfigError
from medflow.sensitivity import (
    CONFOUNDER_COLUMN,
    SensitivityScenario,
    TARGETS,
    _amended_spec,
    run_scenarios,
    simulate_confounder,
)
from medflow.weights import default_weight_spec


@pytest.fixture(scope="module")
def panel_50k():
    cfg = sd.default_config(n_persons=50_000, n_waves=3, seed=33)
    return sd.generate_population(cfg)[0]


@pytest.fixture(scope="module")
def panel_small():
    cfg = sd.default_config(n_persons=4000, n_waves=3, seed=34)
    return sd.generate_population(cfg)[0]


def test_null_scenario_is_pure_noise(panel_50k):
    scenario = SensitivityScenario("treatment_outcome", 0.0, 0.0)
    col = simulate_confounder(panel_50k, scenario, np.random.default_rng(1))
    n = panel_50k.n_persons
    for other in (panel_50k.a[:, 0], panel_50k.m[:, 0], panel_50k.y):
        assert abs(np.corrcoef(col, other)[0, 1]) < 3 / math.sqrt(n)
    assert abs(col.std() - 1.0) < 0.02


def test_vanishing_noise_recovers_linear_part(panel_small):
    scenario = SensitivityScenario("treatment_mediator", 1.0, 0.0, noise_sd=1e-6)
    col = simulate_confounder(panel_small, scenario, np.random.default_rng(2))
    np.testing.assert_allclose(col, panel_small.a[:, 0].astype(float), atol=1e-4)


def test_correlations_match_linear_combination_algebra(panel_50k):
    scenario = SensitivityScenario("treatment_outcome", 0.5, 0.5, noise_sd=1.0)
    col = simulate_confounder(panel_50k, scenario, np.random.default_rng(3))
    a = panel_50k.a[:, 0].astype(float)
    y = panel_50k.y.astype(float)
    va, vy = a.var(), y.var()
    cov_ay = np.cov(a, y)[0, 1]
    var_u = 0.25 * va + 0.25 * vy + 2 * 0.25 * cov_ay + 1.0
    rho_a = (0.5 * va + 0.5 * cov_ay) / math.sqrt(var_u * va)
    rho_y = (0.5 * vy + 0.5 * cov_ay) / math.sqrt(var_u * vy)
    tol = 3.0 / math.sqrt(panel_50k.n_persons)
    assert abs(np.corrcoef(col, a)[0, 1] - rho_a) < tol
    assert abs(np.corrcoef(col, y)[0, 1] - rho_y) < tol


def test_generated_confounders_conditionally_independent(panel_50k):
    cols = {}
    for i, target in enumerate(TARGETS):
        scenario = SensitivityScenario(target, 0.5, 0.5)
        cols[target] = simulate_confounder(
            panel_50k, scenario, np.random.default_rng(100 + i)
        )
    design = np.column_stack(
        [
            np.ones(panel_50k.n_persons),
            panel_50k.a[:, 0],
            panel_50k.m[:, 0],
            panel_50k.y,
        ]
    )
    resid = {}
    for target, col in cols.items():
        beta, *_ = np.linalg.lstsq(design, col, rcond=None)
        resid[target] = col - design @ beta
    names = list(TARGETS)
    tol = 3.0 / math.sqrt(panel_50k.n_persons)
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            r = np.corrcoef(resid[names[i]], resid[names[j]])[0, 1]
            assert abs(r) < tol


def test_target_maps_to_one_denominator(panel_small):
    spec = default_weight_spec(panel_small)
    amended = _amended_spec(spec, "treatment_outcome")
    assert CONFOUNDER_COLUMN in amended.y_t_denominator
    assert CONFOUNDER_COLUMN not in amended.y_m_denominator
    assert CONFOUNDER_COLUMN not in amended.m_t_denominator
    amended = _amended_spec(spec, "mediator_outcome")
    assert CONFOUNDER_COLUMN in amended.y_m_denominator
    assert CONFOUNDER_COLUMN not in amended.y_t_denominator
    amended = _amended_spec(spec, "treatment_mediator")
    assert CONFOUNDER_COLUMN in amended.m_t_denominator


def test_run_scenarios_deterministic(panel_small):
    kw = dict(grid=(0.0, 0.5), n_sims=5, seed=11, targets=("treatment_outcome",))
    r1 = run_scenarios(panel_small, **kw)
    r2 = run_scenarios(panel_small, **kw)
    assert r1.rows.equals(r2.rows)
    assert r1.summary == r2.summary


def test_grid_zero_recovers_baseline(panel_small):
    res = run_scenarios(
        panel_small, grid=(0.0,), n_sims=25, seed=5, targets=("treatment_outcome",)
    )
    pt = res.series("treatment_outcome")[0]
    se_ide = pt["ide_sd"] / math.sqrt(pt["n_completed"])
    se_iie = pt["iie_sd"] / math.sqrt(pt["n_completed"])
    assert abs(pt["ide_mean"] - res.baseline.ide_log) <= 3 * se_ide
    assert abs(pt["iie_mean"] - res.baseline.iie_log) <= 3 * se_iie


def test_rows_schema(panel_small):
    res = run_scenarios(
        panel_small, grid=(0.1,), n_sims=3, seed=2, targets=("mediator_outcome",)
    )
    assert list(res.rows.columns) == [
        "target",
        "grid_value",
        "sim_index",
        "ide_log",
        "iie_log",
    ]
    assert len(res.rows) == 3


def test_excess_simulation_failures_raise(panel_small, monkeypatch):
    from medflow import sensitivity as sens
    from medflow.errors import MedflowError, ScenarioError

    def always_fail(*args, **kwargs):
        raise MedflowError("forced failure")

    monkeypatch.setattr(sens, "_rerun_with_confounder", always_fail)
    with pytest.raises(ScenarioError, match="failed"):
        run_scenarios(
            panel_small, grid=(0.3,), n_sims=10, seed=1, targets=("treatment_outcome",)
        )


def test_input_validation(panel_small):
    with pytest.raises(ConfigError):
        run_scenarios(panel_small, grid=())
    with pytest.raises(ConfigError):
        run_scenarios(panel_small, grid=(0.1,), targets=("bogus",))
    with pytest.raises(ConfigError):
        SensitivityScenario("treatment_outcome", 0.1, 0.1, noise_sd=0.0).validate()
    with pytest.raises(ConfigError):
        SensitivityScenario("nope", 0.1, 0.1).validate()
