import dataclasses as dc
import math

import numpy as np
import pytest
from scipy.special import expit

from conftest import severed_config
from medflow import synthdata as sd
from medflow.errors import ConfigError, ModelSpecificationError
from medflow.oracle import dgp_from_config, exact_interventional_effects


def discrete_config(n=20_000, seed=11, n_waves=3):
    return sd.DgpConfig(
        n_persons=n, n_waves=n_waves, seed=seed,
        c_binary_probs=(0.5,), include_ses=False, l_kinds=("binary",),
        mediator_family="binomial", mediator_levels=2,
        baseline_treatment=sd.BaselineTreatmentEq(-1.0, c=(0.5,)),
        baseline_mediator=sd.BaselineMediatorEq(-0.8, a=0.6, c=(0.5,)),
        baseline_confounders=(sd.BaselineConfounderEq(-0.5, a=0.7, c=(0.8,)),),
        treatment=sd.TreatmentEq(-1.2, a_prev=0.9, m_prev=0.7, l_prev=(0.8,), c=(0.6,)),
        mediator=sd.MediatorEq(-0.9, a=0.8, m_prev=0.9, l_prev=(0.0,), c=(0.0,)),
        confounders=(sd.ConfounderEq(-0.6, a=0.0, self_prev=0.9, c=(0.7,)),),
        outcome=sd.OutcomeEq(-2.2, cum_a=0.45, cum_m=0.5, l_mean=(0.0,)),
    )


class TestConfigValidation:
    def test_empty_population_rejected(self):
        with pytest.raises(ConfigError):
            sd.default_config(n_persons=0).validate()

    def test_single_wave_rejected(self):
        with pytest.raises(ConfigError):
            sd.default_config(n_waves=1).validate()

    def test_non_finite_coefficient_rejected(self):
        cfg = sd.default_config()
        bad = dc.replace(cfg, treatment=dc.replace(cfg.treatment, c=(0.1, float("nan"), 0.2)))
        with pytest.raises(ConfigError, match="non-finite"):
            bad.validate()

    def test_coefficient_block_length_checked(self):
        cfg = sd.default_config()
        bad = dc.replace(cfg, mediator=dc.replace(cfg.mediator, l_prev=(0.1,)))
        with pytest.raises(ConfigError, match="mediator.l_prev"):
            bad.validate()


class TestGeneration:
    def test_same_seed_is_byte_identical(self):
        cfg = sd.default_config(n_persons=500, n_waves=3, seed=9)
        p1, r1 = sd.generate_population(cfg)
        p2, r2 = sd.generate_population(cfg)
        np.testing.assert_array_equal(p1.a, p2.a)
        np.testing.assert_array_equal(p1.m, p2.m)
        np.testing.assert_array_equal(p1.l, p2.l)
        np.testing.assert_array_equal(p1.y, p2.y)
        assert r1.equals(r2)

    def test_person_trajectories_do_not_depend_on_cohort_size(self):
        small = sd.generate_population(sd.default_config(n_persons=50, n_waves=3, seed=4))[0]
        large = sd.generate_population(sd.default_config(n_persons=200, n_waves=3, seed=4))[0]
        np.testing.assert_array_equal(small.a, large.a[:50])
        np.testing.assert_array_equal(small.m, large.m[:50])

    def test_wave1_prevalence_matches_link_transformed_intercept(self):
        # wave-1 treatment is intercept-only in the default config, so the
        # binomial oracle applies exactly
        cfg = sd.default_config(n_persons=50_000, n_waves=3, seed=7)
        panel, _ = sd.generate_population(cfg)
        p = expit(cfg.baseline_treatment.intercept)
        se = math.sqrt(p * (1 - p) / cfg.n_persons)
        assert abs(panel.a[:, 0].mean() - p) < 3 * se

    def test_severed_paths_decorrelate_treatment_and_outcome(self):
        panel, _ = sd.generate_population(severed_config())
        corr = np.corrcoef(panel.cum_a(), panel.y)[0, 1]
        assert abs(corr) < 3.0 / math.sqrt(panel.n_persons)

    def test_prevalence_monotone_in_treatment_intercept(self):
        means = []
        for intercept in (-2.5, -1.5, -0.5):
            cfg = sd.default_config(n_persons=8000, n_waves=3, seed=13)
            cfg = dc.replace(cfg, treatment=dc.replace(cfg.treatment, intercept=intercept))
            panel, _ = sd.generate_population(cfg)
            means.append(panel.a[:, 1:].mean())
        assert means[0] < means[1] < means[2]

    def test_residences_cover_every_person_wave(self):
        cfg = sd.default_config(n_persons=300, n_waves=3, seed=5)
        panel, res = sd.generate_population(cfg)
        assert len(res) == 300 * 3
        assert set(res["person_id"]) == set(panel.person_id)
        assert (res["adult"] == 1).all()
        assert res.groupby("person_id")[["grid_x", "grid_y"]].nunique().eq(1).all().all()

    def test_sorting_strength_concentrates_disadvantage(self):
        def mean_abs_square_ses(strength):
            cfg = sd.default_config(n_persons=4000, n_waves=2, seed=21)
            cfg = dc.replace(cfg, grid=dc.replace(cfg.grid, sorting_strength=strength))
            panel, res = sd.generate_population(cfg)
            ses = panel.c_values[:, panel.c_names.index("ses")]
            one_wave = res[res["wave"] == 1].reset_index(drop=True)
            frame = one_wave.assign(ses=ses)
            sq = frame.groupby(["grid_x", "grid_y"])["ses"].mean()
            return np.abs(sq).mean()

        assert mean_abs_square_ses(0.95) > mean_abs_square_ses(0.0) + 0.1


class TestGroundTruth:
    def test_no_mediated_path_gives_zero_iie(self):
        cfg = sd.default_config(n_persons=20_000, n_waves=3, seed=3)
        cfg = dc.replace(
            cfg,
            mediator=dc.replace(cfg.mediator, a=0.0),
            confounders=tuple(dc.replace(eq, a=0.0) for eq in cfg.confounders),
        )
        gt = sd.ground_truth_effects(cfg, mc_replicates=20)
        assert abs(gt.iie_log) < 3 * gt.se_iie_log
        assert gt.ide_log > 0.2

    def test_no_direct_path_gives_zero_ide(self):
        cfg = sd.default_config(n_persons=20_000, n_waves=3, seed=3)
        cfg = dc.replace(
            cfg,
            mediator=dc.replace(cfg.mediator, a=0.1),
            confounders=tuple(dc.replace(eq, a=0.0) for eq in cfg.confounders),
            outcome=dc.replace(cfg.outcome, cum_a=0.0, cum_m=0.5),
        )
        gt = sd.ground_truth_effects(cfg, mc_replicates=20)
        assert abs(gt.ide_log) < 3 * gt.se_ide_log
        assert gt.iie_log > 0.01

    def test_discrete_config_matches_exact_enumeration(self):
        cfg = discrete_config()
        gt = sd.ground_truth_effects(cfg, mc_replicates=30)
        exact = exact_interventional_effects(dgp_from_config(cfg))
        assert abs(gt.ide_log - exact.ide_log) <= max(3 * gt.se_ide_log, 1e-9)
        assert abs(gt.iie_log - exact.iie_log) <= max(3 * gt.se_iie_log, 1e-9)

    def test_probability_overflow_raises(self):
        cfg = sd.default_config(n_persons=500, n_waves=3, seed=1)
        cfg = dc.replace(cfg, outcome=dc.replace(cfg.outcome, intercept=2.0))
        with pytest.raises(ModelSpecificationError):
            sd.ground_truth_effects(cfg, mc_replicates=2)

    def test_replicate_count_validated(self):
        with pytest.raises(ConfigError):
            sd.ground_truth_effects(sd.default_config(n_persons=10), mc_replicates=0)

    def test_mc_standard_error_positive_for_multiple_replicates(self):
        cfg = sd.default_config(n_persons=2000, n_waves=3, seed=8)
        gt = sd.ground_truth_effects(cfg, mc_replicates=4)
        assert gt.mc_standard_error > 0
        assert gt.mc_replicates == 4
