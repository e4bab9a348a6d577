import dataclasses as dc
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from medflow import synthdata as sd
from medflow.errors import (
    ConfigError,
    DegenerateDataError,
    DegenerateDensityError,
    PositivityWarning,
)
from medflow.panel import PanelDataset, build_long
from medflow.weights import (
    WeightModelSpec,
    compute_weights,
    cumulate_and_truncate,
    default_weight_spec,
    mediator_weights_outcome,
    treatment_weights_mediator,
    treatment_weights_outcome,
)


def _panel_from_arrays(a, m, l=None, c=None, y=None):
    n, T = a.shape
    l = np.zeros((n, T, 0)) if l is None else l
    c_names = [] if c is None else [f"c{i}" for i in range(c.shape[1])]
    return PanelDataset(
        person_id=np.arange(n, dtype=np.int64),
        c_names=c_names,
        c_values=np.zeros((n, 0)) if c is None else c,
        a=a.astype(np.int8),
        m=m.astype(np.float64),
        l_names=[f"l{i}" for i in range(l.shape[2])],
        l=l,
        y=np.zeros(n, dtype=np.int8) if y is None else y.astype(np.int8),
    )


def test_identical_covariate_sets_give_unit_weights():
    cfg = sd.default_config(n_persons=800, n_waves=4, seed=6)
    panel, _ = sd.generate_population(cfg)
    base = default_weight_spec(panel)
    spec = dc.replace(
        base,
        y_t_numerator=base.y_t_denominator,
        y_m_numerator=base.y_m_denominator,
        m_t_numerator=base.m_t_denominator,
    )
    ws = compute_weights(panel, spec)
    np.testing.assert_array_equal(ws.sw_yt, np.ones(ws.sw_yt.size))
    np.testing.assert_array_equal(ws.sw_ym, np.ones(ws.sw_ym.size))
    np.testing.assert_array_equal(ws.sw_mt, np.ones(ws.sw_mt.size))
    assert ws.diagnostics["w_y"]["mean"] == 1.0
    assert ws.diagnostics["w_y"]["sd"] == 0.0
    np.testing.assert_array_equal(ws.w_m, ws.w_m_raw)


class TestToyStratumOracle:
    """Two-wave, all-binary panel with 8 baseline strata sized so the
    empirical treatment log-odds are exactly additive; saturated weight
    models must reproduce hand-computed stratum probability ratios."""

    def build(self):
        b = math.log(3.0)
        rows_a1, rows_m1, rows_c, rows_a2 = [], [], [], []
        self.p_den = {}
        for a1 in (0, 1):
            for m1 in (0, 1):
                for c in (0, 1):
                    k = a1 + m1 + c
                    p = 1.0 / (1.0 + math.exp(-b * k))  # 1/2, 3/4, 9/10, 27/28
                    n_stratum = 140
                    n_treat = round(p * n_stratum)
                    self.p_den[(a1, m1, c)] = n_treat / n_stratum
                    rows_a1 += [a1] * n_stratum
                    rows_m1 += [m1] * n_stratum
                    rows_c += [c] * n_stratum
                    rows_a2 += [1] * n_treat + [0] * (n_stratum - n_treat)
        a = np.column_stack([rows_a1, rows_a2])
        m = np.column_stack([rows_m1, np.full(len(rows_m1), 0.5)])
        c = np.array(rows_c, dtype=float).reshape(-1, 1)
        self.panel = _panel_from_arrays(a, m, c=c)
        # empirical numerators by direct aggregation
        self.p_num_yt = {}
        self.p_num_mt = {}
        for a1 in (0, 1):
            for m1 in (0, 1):
                rows = (a[:, 0] == a1) & (m[:, 0] == m1)
                self.p_num_yt[(a1, m1)] = a[rows, 1].mean()
            rows = a[:, 0] == a1
            self.p_num_mt[a1] = a[rows, 1].mean()
        saturated_den = (
            "a_prev", "m_prev", "c0",
            "a_prev:m_prev", "a_prev:c0", "m_prev:c0", "a_prev:m_prev:c0",
        )
        return WeightModelSpec(
            y_t_numerator=("a_prev", "m_prev", "a_prev:m_prev"),
            y_t_denominator=saturated_den,
            y_m_numerator=("m_prev", "a"),
            y_m_denominator=("m_prev", "a", "c0"),
            m_t_numerator=("a_prev",),
            m_t_denominator=saturated_den,
        )

    def test_outcome_treatment_weights_match_hand_ratios(self):
        spec = self.build()
        long = build_long(self.panel)
        sw = treatment_weights_outcome(long, spec)
        a1 = long.columns["a_prev"]
        m1 = long.columns["m_prev"]
        c = long.columns["c0"]
        a2 = long.columns["a"]
        for i in range(0, long.n_rows, 35):
            num = self.p_num_yt[(int(a1[i]), int(m1[i]))]
            den = self.p_den[(int(a1[i]), int(m1[i]), int(c[i]))]
            expected = (num if a2[i] == 1 else 1 - num) / (
                den if a2[i] == 1 else 1 - den
            )
            assert sw[i] == pytest.approx(expected, abs=1e-6)

    def test_mediator_treatment_weights_match_hand_ratios(self):
        spec = self.build()
        long = build_long(self.panel)
        sw = treatment_weights_mediator(long, spec)
        a1 = long.columns["a_prev"]
        m1 = long.columns["m_prev"]
        c = long.columns["c0"]
        a2 = long.columns["a"]
        for i in range(0, long.n_rows, 35):
            num = self.p_num_mt[int(a1[i])]
            den = self.p_den[(int(a1[i]), int(m1[i]), int(c[i]))]
            expected = (num if a2[i] == 1 else 1 - num) / (
                den if a2[i] == 1 else 1 - den
            )
            assert sw[i] == pytest.approx(expected, abs=1e-6)


def test_stabilized_means_near_one_on_assumption_satisfying_data():
    cfg = sd.default_config(n_persons=20000, n_waves=4, seed=12)
    panel, _ = sd.generate_population(cfg)
    ws = compute_weights(panel)
    for family in ("sw_yt", "sw_ym", "sw_mt"):
        assert 0.9 <= ws.diagnostics[family]["mean"] <= 1.1, family


def test_treatment_weights_collapse_without_confounding():
    # treatment ignores C and L, so numerator and denominator estimate the
    # same law and the ratio degenerates to 1
    cfg = sd.default_config(n_persons=30000, n_waves=3, seed=18)
    cfg = dc.replace(
        cfg,
        baseline_treatment=sd.BaselineTreatmentEq(-2.0, c=(0.0, 0.0, 0.0)),
        treatment=sd.TreatmentEq(
            -2.2, a_prev=1.1, m_prev=0.9, l_prev=(0.0, 0.0), c=(0.0, 0.0, 0.0)
        ),
    )
    panel, _ = sd.generate_population(cfg)
    sw = treatment_weights_outcome(build_long(panel), default_weight_spec(panel))
    assert abs(sw.mean() - 1.0) < 0.01
    assert sw.std() < 0.05


def test_mediator_weights_near_one_when_mediator_unconfounded():
    cfg = sd.default_config(n_persons=50000, n_waves=3, seed=19)
    cfg = dc.replace(
        cfg,
        mediator=dc.replace(cfg.mediator, l_prev=(0.0, 0.0), c=(0.0, 0.0, 0.0)),
    )
    panel, _ = sd.generate_population(cfg)
    long = build_long(panel)
    sw = mediator_weights_outcome(long, default_weight_spec(panel))
    assert abs(sw.mean() - 1.0) < 0.05


def test_truncation_clamps_at_interpolated_percentiles():
    values = np.array([0.5] * 98 + [0.01, 100.0])
    k = 1
    long = build_long(
        _panel_from_arrays(
            np.zeros((100, 2)), np.column_stack([np.linspace(0, 1, 100), values])
        )
    )
    spec = WeightModelSpec(
        y_t_numerator=(), y_t_denominator=(),
        y_m_numerator=(), y_m_denominator=(),
        m_t_numerator=(), m_t_denominator=(),
    )
    ws = cumulate_and_truncate(long, values, np.ones(100), np.ones(100), spec)
    # linear-interpolation percentiles computed by hand from the sorted values
    v = np.sort(values)
    lo = v[0] + 0.99 * (v[1] - v[0])
    hi = v[98] + 0.01 * (v[99] - v[98])
    assert ws.bounds["w_y"] == (pytest.approx(lo), pytest.approx(hi))
    assert ws.w_y.min() == pytest.approx(lo)
    assert ws.w_y.max() == pytest.approx(hi)
    untouched = (values > lo) & (values < hi)
    np.testing.assert_array_equal(ws.w_y[untouched], values[untouched])


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_truncation_never_increases_spread(seed):
    r = np.random.default_rng(seed)
    w = np.exp(r.normal(0, r.uniform(0.1, 1.5), size=300))
    long = build_long(
        _panel_from_arrays(np.zeros((300, 2)), np.zeros((300, 2)))
    )
    spec = WeightModelSpec(
        y_t_numerator=(), y_t_denominator=(),
        y_m_numerator=(), y_m_denominator=(),
        m_t_numerator=(), m_t_denominator=(),
    )
    ws = cumulate_and_truncate(long, w, np.ones(300), w, spec)
    assert ws.diagnostics["w_y"]["sd"] <= ws.diagnostics["w_y_raw"]["sd"]
    assert ws.diagnostics["w_m"]["sd"] <= ws.diagnostics["w_m_raw"]["sd"]


def test_positivity_warning_lists_offenders():
    cfg = sd.default_config(n_persons=400, n_waves=3, seed=3)
    panel, _ = sd.generate_population(cfg)
    spec = dc.replace(default_weight_spec(panel), positivity_floor=0.9)
    with pytest.warns(PositivityWarning, match=r"\(person, wave\)"):
        treatment_weights_outcome(build_long(panel), spec)


def test_constant_mediator_wave_is_degenerate_density():
    a = np.random.default_rng(1).integers(0, 2, size=(200, 2))
    m = np.column_stack([np.random.default_rng(2).normal(size=200), np.full(200, 0.3)])
    panel = _panel_from_arrays(a, m)
    with pytest.raises(DegenerateDensityError):
        mediator_weights_outcome(build_long(panel), default_weight_spec(panel))


def test_constant_treatment_surfaces_glm_error():
    a = np.column_stack([np.zeros(150), np.ones(150)])
    m = np.random.default_rng(3).normal(size=(150, 2))
    panel = _panel_from_arrays(a, m)
    with pytest.raises(DegenerateDataError):
        treatment_weights_mediator(build_long(panel), default_weight_spec(panel))


def test_spec_validation():
    with pytest.raises(ConfigError, match="superset"):
        WeightModelSpec(
            y_t_numerator=("a_prev", "m_prev"),
            y_t_denominator=("a_prev",),
            y_m_numerator=(), y_m_denominator=(),
            m_t_numerator=(), m_t_denominator=(),
        ).validate()
    with pytest.raises(ConfigError, match="pct"):
        WeightModelSpec(
            y_t_numerator=(), y_t_denominator=(),
            y_m_numerator=(), y_m_denominator=(),
            m_t_numerator=(), m_t_denominator=(),
            lower_pct=99.0, upper_pct=1.0,
        ).validate()


def test_intercept_only_numerator_supported():
    cfg = sd.default_config(n_persons=2000, n_waves=2, seed=22)
    panel, _ = sd.generate_population(cfg)
    spec = dc.replace(default_weight_spec(panel), m_t_numerator=())
    long = build_long(panel)
    sw = treatment_weights_mediator(long, spec)
    # marginal numerator is the overall treated share
    p = long.columns["a"].mean()
    a = long.columns["a"]
    num = np.where(a == 1.0, p, 1 - p)
    den = num / sw
    assert np.all((den > 0) & (den < 1))
    assert abs(sw.mean() - 1.0) < 0.1


def test_per_wave_fitting_matches_pooled_on_single_wave():
    cfg = sd.default_config(n_persons=3000, n_waves=2, seed=8)
    panel, _ = sd.generate_population(cfg)
    long = build_long(panel)
    spec = default_weight_spec(panel)
    pooled = treatment_weights_outcome(long, spec)
    perwave = treatment_weights_outcome(long, dc.replace(spec, pooled=False))
    np.testing.assert_allclose(pooled, perwave, atol=1e-10)
