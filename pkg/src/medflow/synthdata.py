"""Register-style synthetic cohorts with known interventional ground truth.

The generator follows a longitudinal DAG: exogenous baseline covariates C
(a few binaries plus an optional latent SES score), a baseline wave of
treatment / mediator / confounders, then analysis waves in causal order
A_t -> M_t -> L_t, and one end-of-study binary outcome driven by the
cumulative treatment and mediator history through a log link. Optional
latent confounders U (treatment-outcome), V (treatment-mediator) and Z
(mediator-outcome) act on the analysis waves only, so the baseline wave
stays clean and interventional ground truth remains simulable exactly.

Randomness contract: every person consumes a fixed-size noise block drawn
from a stream derived from (seed, person_id), so regeneration is
byte-identical for any worker partitioning, and person i's trajectory does
not depend on n_persons.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd
from scipy.special import expit

from .errors import ConfigError, ModelSpecificationError
from .geo import INDICATORS
from .panel import PanelDataset

_GRID_TAG = 0x47524944
_GT_TAG = 0x47545255

Y_CLIP_EPS = 1e-6


@dataclass(frozen=True)
class BaselineTreatmentEq:
    intercept: float
    c: tuple[float, ...] = ()


@dataclass(frozen=True)
class BaselineMediatorEq:
    intercept: float
    a: float = 0.0
    c: tuple[float, ...] = ()
    sd: float = 0.1


@dataclass(frozen=True)
class BaselineConfounderEq:
    intercept: float
    a: float = 0.0
    c: tuple[float, ...] = ()
    sd: float = 1.0


@dataclass(frozen=True)
class TreatmentEq:
    intercept: float
    a_prev: float = 0.0
    m_prev: float = 0.0
    l_prev: tuple[float, ...] = ()
    c: tuple[float, ...] = ()


@dataclass(frozen=True)
class MediatorEq:
    intercept: float
    a: float = 0.0
    m_prev: float = 0.0
    l_prev: tuple[float, ...] = ()
    c: tuple[float, ...] = ()
    sd: float = 0.1


@dataclass(frozen=True)
class ConfounderEq:
    intercept: float
    a: float = 0.0
    self_prev: float = 0.0
    c: tuple[float, ...] = ()
    sd: float = 1.0


@dataclass(frozen=True)
class OutcomeEq:
    intercept: float
    cum_a: float = 0.0
    cum_m: float = 0.0
    l_mean: tuple[float, ...] = ()


@dataclass(frozen=True)
class LatentEffects:
    u_to_a: float = 0.0
    u_to_y: float = 0.0
    v_to_a: float = 0.0
    v_to_m: float = 0.0
    z_to_m: float = 0.0
    z_to_y: float = 0.0

    def any_active(self) -> bool:
        return any(v != 0.0 for v in asdict(self).values())


@dataclass(frozen=True)
class GridConfig:
    side: int = 30
    sorting_strength: float = 0.65
    occupancy_sigma: float = 0.5


@dataclass(frozen=True)
class DgpConfig:
    n_persons: int
    n_waves: int                      # total waves; wave 1 is baseline
    seed: int
    c_binary_probs: tuple[float, ...] = (0.5, 0.15)
    include_ses: bool = True
    l_kinds: tuple[str, ...] = ("binary", "continuous")
    baseline_treatment: BaselineTreatmentEq = BaselineTreatmentEq(-2.0)
    baseline_mediator: BaselineMediatorEq = BaselineMediatorEq(0.35)
    baseline_confounders: tuple[BaselineConfounderEq, ...] = ()
    treatment: TreatmentEq = TreatmentEq(-2.2)
    mediator: MediatorEq = MediatorEq(0.08)
    confounders: tuple[ConfounderEq, ...] = ()
    outcome: OutcomeEq = OutcomeEq(-2.5)
    latent: LatentEffects = LatentEffects()
    grid: GridConfig = GridConfig()
    mediator_family: str = "gaussian"  # "gaussian" | "binomial"
    mediator_levels: int = 2           # binomial levels, values j/(levels-1)

    @property
    def dim_c(self) -> int:
        return len(self.c_binary_probs) + (1 if self.include_ses else 0)

    @property
    def c_names(self) -> list[str]:
        names = [f"c{i}" for i in range(len(self.c_binary_probs))]
        if self.include_ses:
            names.append("ses")
        return names

    @property
    def l_names(self) -> list[str]:
        return [f"l{i}" for i in range(len(self.l_kinds))]

    def validate(self) -> None:
        if self.n_persons < 1:
            raise ConfigError("n_persons must be >= 1")
        if self.n_waves < 2:
            raise ConfigError("n_waves must be >= 2 (wave 1 is baseline)")
        if any(not (0.0 < p < 1.0) for p in self.c_binary_probs):
            raise ConfigError("c_binary_probs must lie in (0, 1)")
        if any(k not in ("binary", "continuous") for k in self.l_kinds):
            raise ConfigError(f"unknown confounder kind in {self.l_kinds}")
        if len(self.baseline_confounders) != len(self.l_kinds):
            raise ConfigError("one baseline confounder equation per L component")
        if len(self.confounders) != len(self.l_kinds):
            raise ConfigError("one confounder equation per L component")
        if self.mediator_family not in ("gaussian", "binomial"):
            raise ConfigError(f"unknown mediator family {self.mediator_family!r}")
        if self.mediator_family == "binomial" and self.mediator_levels < 2:
            raise ConfigError("binomial mediator needs at least 2 levels")
        if self.mediator_family == "gaussian":
            for eq in (self.baseline_mediator, self.mediator):
                if eq.sd <= 0:
                    raise ConfigError("gaussian mediator needs sd > 0")
        dc, dl = self.dim_c, len(self.l_kinds)
        blocks = [
            ("baseline_treatment.c", self.baseline_treatment.c, dc),
            ("baseline_mediator.c", self.baseline_mediator.c, dc),
            ("treatment.c", self.treatment.c, dc),
            ("treatment.l_prev", self.treatment.l_prev, dl),
            ("mediator.c", self.mediator.c, dc),
            ("mediator.l_prev", self.mediator.l_prev, dl),
            ("outcome.l_mean", self.outcome.l_mean, dl),
        ]
        for i, eq in enumerate(self.baseline_confounders):
            blocks.append((f"baseline_confounders[{i}].c", eq.c, dc))
        for i, eq in enumerate(self.confounders):
            blocks.append((f"confounders[{i}].c", eq.c, dc))
            if self.l_kinds[i] == "continuous" and eq.sd <= 0:
                raise ConfigError(f"confounders[{i}] needs sd > 0")
        for name, block, want in blocks:
            if len(block) != want:
                raise ConfigError(f"{name} has {len(block)} coefficients, needs {want}")
            if any(not math.isfinite(v) for v in block):
                raise ConfigError(f"{name} contains non-finite coefficients")
        for name, value in (
            ("baseline_treatment.intercept", self.baseline_treatment.intercept),
            ("treatment.intercept", self.treatment.intercept),
            ("mediator.intercept", self.mediator.intercept),
            ("outcome.intercept", self.outcome.intercept),
        ):
            if not math.isfinite(value):
                raise ConfigError(f"{name} is non-finite")
        if not (0.0 <= self.grid.sorting_strength <= 1.0):
            raise ConfigError("grid.sorting_strength must lie in [0, 1]")
        if self.grid.side < 1 or self.grid.occupancy_sigma < 0:
            raise ConfigError("grid.side must be >= 1 and occupancy_sigma >= 0")


@dataclass
class GroundTruth:
    ide_log: float
    iie_log: float
    mc_replicates: int
    mc_standard_error: float
    se_ide_log: float = float("nan")
    se_iie_log: float = float("nan")


# ---------------------------------------------------------------------------
# noise layout: fixed per config so person streams are reusable bit-for-bit


def _noise_layout(config: DgpConfig) -> dict:
    nb = len(config.c_binary_probs)
    n_lbin = sum(1 for k in config.l_kinds if k == "binary")
    n_lcont = len(config.l_kinds) - n_lbin
    binom = config.mediator_family == "binomial"
    k = config.n_waves - 1
    u_stride = 1 + (1 if binom else 0) + n_lbin
    z_stride = (0 if binom else 1) + n_lcont
    layout = {
        "u_c": 0,
        "u_a1": nb,
        "u_m1": nb + 1 if binom else None,
        "u_l1": nb + 1 + (1 if binom else 0),
        "u_waves": nb + 1 + (1 if binom else 0) + n_lbin,
        "u_stride": u_stride,
        "n_uniform": nb + 1 + (1 if binom else 0) + n_lbin + k * u_stride + 1,
        "z_ses": 0 if config.include_ses else None,
        "z_uvz": 1 if config.include_ses else 0,
    }
    z0 = layout["z_uvz"] + 3
    layout["z_m1"] = None if binom else z0
    layout["z_l1"] = z0 + (0 if binom else 1)
    layout["z_waves"] = layout["z_l1"] + n_lcont
    layout["z_stride"] = z_stride
    layout["n_normal"] = layout["z_waves"] + k * z_stride + 1
    layout["n_lbin"] = n_lbin
    layout["n_lcont"] = n_lcont
    return layout


def _fill_noise(config: DgpConfig, n: int, layout: dict):
    un = np.empty((n, layout["n_uniform"]))
    zn = np.empty((n, layout["n_normal"]))
    for pid in range(n):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=config.seed, spawn_key=(pid,)))
        )
        un[pid] = rng.random(layout["n_uniform"])
        zn[pid] = rng.standard_normal(layout["n_normal"])
    return un, zn


def _binomial_from_uniform(u: np.ndarray, p: np.ndarray, levels: int) -> np.ndarray:
    """Inverse-CDF binomial(levels-1, p) draw from one uniform per row."""
    kmax = levels - 1
    j = np.arange(levels)
    pmf = (
        np.array([math.comb(kmax, int(jj)) for jj in j])[None, :]
        * np.power(p[:, None], j[None, :])
        * np.power(1.0 - p[:, None], kmax - j[None, :])
    )
    cdf = np.cumsum(pmf, axis=1)
    idx = (u[:, None] > cdf).sum(axis=1)
    return np.minimum(idx, kmax) / kmax


def _simulate_trajectories(config: DgpConfig, C: np.ndarray, un, zn, layout,
                           a_regime: np.ndarray | None = None,
                           baseline: tuple | None = None):
    """Run the structural recursion for all persons at once.

    With ``a_regime`` set (length T-1), analysis-wave treatments are forced
    to the regime instead of drawn. ``baseline`` optionally supplies
    (a1, m1, l1) so interventional legs can share one baseline draw.
    """
    n = C.shape[0]
    T = config.n_waves
    dl = len(config.l_kinds)
    a = np.zeros((n, T), dtype=np.int8)
    m = np.zeros((n, T))
    l = np.zeros((n, T, dl))
    lat = config.latent
    U = zn[:, layout["z_uvz"]]
    V = zn[:, layout["z_uvz"] + 1]
    Z = zn[:, layout["z_uvz"] + 2]

    if baseline is None:
        bt = config.baseline_treatment
        a[:, 0] = un[:, layout["u_a1"]] < expit(bt.intercept + C @ np.asarray(bt.c))
        bm = config.baseline_mediator
        eta_m1 = bm.intercept + bm.a * a[:, 0] + C @ np.asarray(bm.c)
        if config.mediator_family == "gaussian":
            m[:, 0] = eta_m1 + bm.sd * zn[:, layout["z_m1"]]
        else:
            m[:, 0] = _binomial_from_uniform(
                un[:, layout["u_m1"]], expit(eta_m1), config.mediator_levels
            )
        ub, zb = layout["u_l1"], layout["z_l1"]
        for j, kind in enumerate(config.l_kinds):
            eq = config.baseline_confounders[j]
            eta = eq.intercept + eq.a * a[:, 0] + C @ np.asarray(eq.c)
            if kind == "binary":
                l[:, 0, j] = (un[:, ub] < expit(eta)).astype(np.float64)
                ub += 1
            else:
                l[:, 0, j] = eta + eq.sd * zn[:, zb]
                zb += 1
    else:
        a[:, 0], m[:, 0], l[:, 0, :] = baseline

    te, me = config.treatment, config.mediator
    for t in range(1, T):
        uoff = layout["u_waves"] + (t - 1) * layout["u_stride"]
        zoff = layout["z_waves"] + (t - 1) * layout["z_stride"]
        if a_regime is not None:
            a[:, t] = a_regime[t - 1]
        else:
            eta_a = (
                te.intercept
                + te.a_prev * a[:, t - 1]
                + te.m_prev * m[:, t - 1]
                + l[:, t - 1, :] @ np.asarray(te.l_prev)
                + C @ np.asarray(te.c)
                + lat.u_to_a * U
                + lat.v_to_a * V
            )
            a[:, t] = un[:, uoff] < expit(eta_a)
        uoff += 1
        eta_m = (
            me.intercept
            + me.a * a[:, t]
            + me.m_prev * m[:, t - 1]
            + l[:, t - 1, :] @ np.asarray(me.l_prev)
            + C @ np.asarray(me.c)
            + lat.v_to_m * V
            + lat.z_to_m * Z
        )
        if config.mediator_family == "gaussian":
            m[:, t] = eta_m + me.sd * zn[:, zoff]
            zoff += 1
        else:
            m[:, t] = _binomial_from_uniform(
                un[:, uoff], expit(eta_m), config.mediator_levels
            )
            uoff += 1
        for j, kind in enumerate(config.l_kinds):
            eq = config.confounders[j]
            eta = (
                eq.intercept
                + eq.a * a[:, t]
                + eq.self_prev * l[:, t - 1, j]
                + C @ np.asarray(eq.c)
            )
            if kind == "binary":
                l[:, t, j] = (un[:, uoff] < expit(eta)).astype(np.float64)
                uoff += 1
            else:
                l[:, t, j] = eta + eq.sd * zn[:, zoff]
                zoff += 1
    return a, m, l, U, Z


def _outcome_probability(config: DgpConfig, cum_a, cum_m, l_mean, U, Z, strict: bool):
    oe = config.outcome
    eta = (
        oe.intercept
        + oe.cum_a * cum_a
        + oe.cum_m * cum_m
        + l_mean @ np.asarray(oe.l_mean)
        + config.latent.u_to_y * U
        + config.latent.z_to_y * Z
    )
    p = np.exp(eta)
    if strict and np.any(p >= 1.0):
        raise ModelSpecificationError(
            f"outcome probability reached {float(p.max()):.4f} >= 1; "
            "lower the outcome intercept or effect sizes"
        )
    return np.clip(p, Y_CLIP_EPS, 1.0 - Y_CLIP_EPS)


def _draw_c(config: DgpConfig, un, zn, layout) -> np.ndarray:
    cols = []
    for i, p in enumerate(config.c_binary_probs):
        cols.append((un[:, layout["u_c"] + i] < p).astype(np.float64))
    if config.include_ses:
        cols.append(zn[:, layout["z_ses"]])
    return np.column_stack(cols) if cols else np.zeros((un.shape[0], 0))


# ---------------------------------------------------------------------------
# public operations


def generate_population(config: DgpConfig) -> tuple[PanelDataset, pd.DataFrame]:
    """Simulate a full cohort plus its residence table."""
    config.validate()
    layout = _noise_layout(config)
    n = config.n_persons
    un, zn = _fill_noise(config, n, layout)
    C = _draw_c(config, un, zn, layout)
    a, m, l, U, Z = _simulate_trajectories(config, C, un, zn, layout)
    cum_a = a[:, 1:].sum(axis=1).astype(np.float64)
    cum_m = m[:, 1:].sum(axis=1)
    l_mean = l[:, 1:, :].mean(axis=1)
    p_y = _outcome_probability(config, cum_a, cum_m, l_mean, U, Z, strict=False)
    y = (un[:, layout["n_uniform"] - 1] < p_y).astype(np.int8)
    panel = PanelDataset(
        person_id=np.arange(n, dtype=np.int64),
        c_names=config.c_names,
        c_values=C,
        a=a,
        m=m,
        l_names=config.l_names,
        l=l,
        y=y,
    )
    residences = _assign_residences(config, panel, zn, layout)
    return panel, residences


def _assign_residences(config, panel, zn, layout) -> pd.DataFrame:
    """Place persons on the grid, most disadvantaged into the most
    disadvantaged squares, with configurable sorting strength."""
    n = panel.n_persons
    grid_rng = np.random.Generator(
        np.random.PCG64(
            np.random.SeedSequence(entropy=config.seed, spawn_key=(_GRID_TAG,))
        )
    )
    side = config.grid.side
    n_squares = side * side
    coords = np.stack(np.divmod(np.arange(n_squares), side), axis=1)
    disadvantage_order = grid_rng.permutation(n_squares)
    raw_w = np.exp(config.grid.occupancy_sigma * grid_rng.standard_normal(n_squares))
    share = raw_w / raw_w.sum()
    capacity = np.floor(share * n).astype(np.int64)
    remainder = share * n - capacity
    short = n - int(capacity.sum())
    if short > 0:
        top_up = np.argsort(-remainder, kind="stable")[:short]
        capacity[top_up] += 1

    if config.include_ses:
        disadvantage = -panel.c_values[:, panel.c_names.index("ses")]
    elif panel.c_values.shape[1] > 0:
        disadvantage = panel.c_values[:, 0].astype(np.float64)
    else:
        disadvantage = np.zeros(n)
    sd = disadvantage.std()
    d_std = (disadvantage - disadvantage.mean()) / sd if sd > 0 else np.zeros(n)
    rho = config.grid.sorting_strength
    score = rho * d_std + (1.0 - rho) * zn[:, layout["n_normal"] - 1]
    person_order = np.argsort(-score, kind="stable")

    square_of = np.empty(n, dtype=np.int64)
    cursor = 0
    for sq in disadvantage_order:
        take = int(capacity[sq])
        if take == 0:
            continue
        square_of[person_order[cursor : cursor + take]] = sq
        cursor += take

    T = panel.n_waves
    ses = (
        panel.c_values[:, panel.c_names.index("ses")]
        if config.include_ses
        else None
    )
    if ses is not None:
        low_edu = (ses < -0.4).astype(np.int8)
        low_skill = (ses < -0.9).astype(np.int8)
    else:
        low_edu = panel.c_values[:, 0].astype(np.int8) if panel.c_values.shape[1] else np.zeros(n, np.int8)
        low_skill = panel.c_values[:, -1].astype(np.int8) if panel.c_values.shape[1] else np.zeros(n, np.int8)
    cont_idx = [i for i, k in enumerate(config.l_kinds) if k == "continuous"]
    bin_idx = [i for i, k in enumerate(config.l_kinds) if k == "binary"]
    rows = {
        "person_id": np.repeat(panel.person_id, T),
        "wave": np.tile(np.arange(1, T + 1), n),
        "grid_x": np.repeat(coords[square_of, 0], T),
        "grid_y": np.repeat(coords[square_of, 1], T),
        "adult": np.ones(n * T, dtype=np.int8),
        "low_edu": np.repeat(low_edu, T),
        "low_income": (
            (panel.l[:, :, cont_idx[0]] < -0.6).astype(np.int8).ravel()
            if cont_idx
            else np.repeat(low_edu, T)
        ),
        "social_assistance": panel.a.ravel(),
        "unemployed": (
            panel.l[:, :, bin_idx[0]].astype(np.int8).ravel()
            if bin_idx
            else np.zeros(n * T, np.int8)
        ),
        "low_skill": np.repeat(low_skill, T),
    }
    return pd.DataFrame(rows)[
        ["person_id", "wave", "grid_x", "grid_y", "adult", *INDICATORS]
    ]


def ground_truth_effects(
    config: DgpConfig,
    mc_replicates: int,
    regime: tuple[int, ...] | None = None,
    reference: tuple[int, ...] | None = None,
    n_persons: int | None = None,
) -> GroundTruth:
    """Monte Carlo interventional contrasts under the configured DGP.

    Per replicate: draw baselines, draw mediator trajectories under the
    reference regime conditional on each person's baseline, then average
    outcome probabilities under (regime, reference-law), (reference,
    reference-law) and (regime, regime-law) legs with independent noise.
    """
    config.validate()
    if mc_replicates < 1:
        raise ConfigError("mc_replicates must be >= 1")
    k = config.n_waves - 1
    regime = tuple([1] * k) if regime is None else tuple(regime)
    reference = tuple([0] * k) if reference is None else tuple(reference)
    if len(regime) != k or len(reference) != k:
        raise ConfigError(f"regimes must cover the {k} analysis waves")
    n = n_persons or config.n_persons
    layout = _noise_layout(config)
    ide = np.empty(mc_replicates)
    iie = np.empty(mc_replicates)
    for r in range(mc_replicates):
        rng = np.random.Generator(
            np.random.PCG64(
                np.random.SeedSequence(entropy=config.seed, spawn_key=(_GT_TAG, r))
            )
        )

        def fresh():
            return rng.random((n, layout["n_uniform"])), rng.standard_normal(
                (n, layout["n_normal"])
            )

        un0, zn0 = fresh()
        C = _draw_c(config, un0, zn0, layout)
        a0, m0, l0, _, _ = _simulate_trajectories(config, C, un0, zn0, layout)
        baseline = (a0[:, 0], m0[:, 0], l0[:, 0, :])

        def mediator_leg(reg):
            u, z = fresh()
            _, m_traj, _, _, _ = _simulate_trajectories(
                config, C, u, z, layout, a_regime=np.asarray(reg), baseline=baseline
            )
            return m_traj[:, 1:]

        def outcome_leg(reg, m_analysis):
            u, z = fresh()
            _, _, l_traj, U, Z = _simulate_trajectories(
                config, C, u, z, layout, a_regime=np.asarray(reg), baseline=baseline
            )
            cum_a = float(sum(reg)) * np.ones(n)
            cum_m = m_analysis.sum(axis=1)
            l_mean = l_traj[:, 1:, :].mean(axis=1)
            return _outcome_probability(config, cum_a, cum_m, l_mean, U, Z, strict=True)

        m_ref = mediator_leg(reference)
        m_reg = mediator_leg(regime)
        e_treat_reflaw = float(outcome_leg(regime, m_ref).mean())
        e_ref_reflaw = float(outcome_leg(reference, m_ref).mean())
        e_treat_reglaw = float(outcome_leg(regime, m_reg).mean())
        ide[r] = math.log(e_treat_reflaw) - math.log(e_ref_reflaw)
        iie[r] = math.log(e_treat_reglaw) - math.log(e_treat_reflaw)
    if mc_replicates > 1:
        se_ide = float(ide.std(ddof=1) / math.sqrt(mc_replicates))
        se_iie = float(iie.std(ddof=1) / math.sqrt(mc_replicates))
    else:
        se_ide = se_iie = float("nan")
    return GroundTruth(
        ide_log=float(ide.mean()),
        iie_log=float(iie.mean()),
        mc_replicates=mc_replicates,
        mc_standard_error=max(se_ide, se_iie) if mc_replicates > 1 else float("nan"),
        se_ide_log=se_ide,
        se_iie_log=se_iie,
    )


def default_config(n_persons: int = 20000, n_waves: int = 6, seed: int = 7) -> DgpConfig:
    """A moderately confounded cohort with realistic-looking scales."""
    return DgpConfig(
        n_persons=n_persons,
        n_waves=n_waves,
        seed=seed,
        c_binary_probs=(0.5, 0.15),
        include_ses=True,
        l_kinds=("binary", "continuous"),
        baseline_treatment=BaselineTreatmentEq(intercept=-2.0, c=(0.0, 0.0, 0.0)),
        baseline_mediator=BaselineMediatorEq(
            intercept=0.35, a=0.05, c=(0.0, 0.03, -0.05), sd=0.07
        ),
        baseline_confounders=(
            BaselineConfounderEq(intercept=-1.6, a=0.5, c=(0.05, 0.4, -0.45)),
            BaselineConfounderEq(intercept=0.0, a=-0.3, c=(-0.05, -0.15, 0.55), sd=0.7),
        ),
        treatment=TreatmentEq(
            intercept=-2.7,
            a_prev=1.3,
            m_prev=1.0,
            l_prev=(0.55, -0.4),
            c=(0.1, 0.45, -0.5),
        ),
        mediator=MediatorEq(
            intercept=0.08,
            a=0.035,
            m_prev=0.72,
            l_prev=(0.012, -0.01),
            c=(0.002, 0.012, -0.018),
            sd=0.05,
        ),
        confounders=(
            ConfounderEq(intercept=-1.9, a=0.8, self_prev=1.2, c=(0.05, 0.35, -0.5)),
            ConfounderEq(intercept=0.0, a=-0.25, self_prev=0.75, c=(0.0, -0.1, 0.3), sd=0.5),
        ),
        outcome=OutcomeEq(
            intercept=-3.6, cum_a=0.18, cum_m=0.25, l_mean=(0.25, -0.15)
        ),
        grid=GridConfig(side=30, sorting_strength=0.65, occupancy_sigma=0.5),
    )
