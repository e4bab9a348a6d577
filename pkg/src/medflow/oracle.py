"""Brute-force evaluation of interventional contrasts on discrete DGPs.

Everything here is exact summation: a discrete DGP carries full conditional
probability tables for a baseline wave (index 0) and T analysis waves, the
interventional mediator law is obtained by marginalizing confounder paths
under a forced treatment regime within each baseline stratum, and outcome
expectations enumerate confounder trajectories. Results are log-ratio
contrasts so a pipeline estimate can be compared without transformation.

Baseline strata are full wave-0 states (c, a_0, m_0, l_0); regimes are 0/1
tuples over the T analysis waves.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import ConfigError, CptValidationError, LogDomainError, OracleSizeError

STATE_SPACE_CAP = 1_000_000
_NORM_TOL = 1e-12


@dataclass
class DiscreteDgp:
    """Discrete structural model over waves 0..T (wave 0 is baseline)."""

    n_waves: int                      # analysis waves T >= 1
    c_probs: np.ndarray               # (n_c,)
    m_values: np.ndarray              # (n_m,) numeric value per mediator level
    l_state_values: np.ndarray        # (n_l, dl) component values per L state
    a0_probs: np.ndarray              # (n_c,)
    m0_probs: np.ndarray              # (n_c, 2, n_m)
    l0_probs: np.ndarray              # (n_c, 2, n_l)
    a_probs: np.ndarray               # (n_c, 2, n_m, n_l)
    m_probs: np.ndarray               # (n_c, 2, n_m, n_l, n_m)
    l_probs: np.ndarray               # (n_c, 2, n_l, n_l)
    y_prob: Callable[[int, tuple, tuple, tuple], float]

    @property
    def n_c(self) -> int:
        return len(self.c_probs)

    @property
    def n_m(self) -> int:
        return len(self.m_values)

    @property
    def n_l(self) -> int:
        return self.l_state_values.shape[0]

    def state_space_size(self) -> int:
        t = self.n_waves + 1
        return self.n_c * 2**t * self.n_m**t * self.n_l**t

    def validate(self) -> None:
        if self.n_waves < 1:
            raise CptValidationError("need at least one analysis wave")
        if self.state_space_size() > STATE_SPACE_CAP:
            raise OracleSizeError(
                f"state space {self.state_space_size()} exceeds cap {STATE_SPACE_CAP}"
            )
        def check_dist(name, arr, axis=-1):
            arr = np.asarray(arr, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise CptValidationError(f"{name} has non-finite entries")
            if np.any(arr <= 0.0) or np.any(arr >= 1.0):
                raise CptValidationError(f"{name} violates positivity (entries in (0,1))")
            sums = arr.sum(axis=axis)
            if np.any(np.abs(sums - 1.0) > _NORM_TOL):
                raise CptValidationError(f"{name} rows do not sum to 1 within {_NORM_TOL}")

        for name, arr in (("c_probs", self.c_probs),):
            check_dist(name, arr)
        for name, arr in (("a0_probs", self.a0_probs), ("a_probs", self.a_probs)):
            a = np.asarray(arr, dtype=np.float64)
            if np.any(a <= 0.0) or np.any(a >= 1.0) or not np.all(np.isfinite(a)):
                raise CptValidationError(f"{name} violates positivity")
        check_dist("m0_probs", self.m0_probs)
        check_dist("l0_probs", self.l0_probs)
        check_dist("m_probs", self.m_probs)
        check_dist("l_probs", self.l_probs)
        for state in self._enumerate_full_space():
            p = self.y_prob(*state)
            if not (0.0 < p < 1.0):
                raise CptValidationError(
                    f"outcome probability {p} outside (0,1) at state {state}"
                )

    def _enumerate_full_space(self):
        t = self.n_waves + 1
        for c in range(self.n_c):
            for a in itertools.product((0, 1), repeat=t):
                for m in itertools.product(range(self.n_m), repeat=t):
                    for l in itertools.product(range(self.n_l), repeat=t):
                        yield c, a, m, l

    def baseline_states(self) -> tuple[np.ndarray, np.ndarray]:
        """All wave-0 states (c, a0, m0, l0) and their probabilities."""
        states = []
        probs = []
        for c in range(self.n_c):
            for a0 in (0, 1):
                pa = self.a0_probs[c] if a0 == 1 else 1.0 - self.a0_probs[c]
                for m0 in range(self.n_m):
                    for l0 in range(self.n_l):
                        states.append((c, a0, m0, l0))
                        probs.append(
                            self.c_probs[c]
                            * pa
                            * self.m0_probs[c, a0, m0]
                            * self.l0_probs[c, a0, l0]
                        )
        return np.array(states, dtype=np.int64), np.array(probs)


@dataclass
class MediatorLaw:
    """Joint law of analysis-wave mediator trajectories per baseline stratum."""

    regime: tuple[int, ...]
    states: np.ndarray                # (S, 4) rows (c, a0, m0, l0)
    state_probs: np.ndarray           # (S,)
    trajectories: np.ndarray          # (n_traj, T) mediator level indices
    probs: np.ndarray                 # (S, n_traj)


def compute_mediator_law(dgp: DiscreteDgp, regime) -> MediatorLaw:
    """Exact G(.|stratum) under the forced regime, marginalizing L paths."""
    regime = tuple(int(a) for a in regime)
    if len(regime) != dgp.n_waves:
        raise ConfigError(f"regime must cover {dgp.n_waves} analysis waves")
    dgp.validate()
    states, state_probs = dgp.baseline_states()
    trajectories = np.array(
        list(itertools.product(range(dgp.n_m), repeat=dgp.n_waves)), dtype=np.int64
    )
    law = np.zeros((len(states), len(trajectories)))
    for si, (c, _a0, m0, l0) in enumerate(states):
        # joint over (trajectory prefix, current L state), advanced per wave
        frontier: dict[tuple, np.ndarray] = {(): _unit_l(dgp.n_l, l0)}
        for t, a_t in enumerate(regime):
            new_frontier: dict[tuple, np.ndarray] = {}
            for prefix, l_dist in frontier.items():
                m_prev = prefix[-1] if prefix else m0
                for l_prev in range(dgp.n_l):
                    mass = l_dist[l_prev]
                    if mass == 0.0:
                        continue
                    pm = dgp.m_probs[c, a_t, m_prev, l_prev]
                    pl = dgp.l_probs[c, a_t, l_prev]
                    for m_t in range(dgp.n_m):
                        key = prefix + (m_t,)
                        acc = new_frontier.get(key)
                        if acc is None:
                            acc = np.zeros(dgp.n_l)
                            new_frontier[key] = acc
                        acc += mass * pm[m_t] * pl
            frontier = new_frontier
        for ti, traj in enumerate(map(tuple, trajectories)):
            law[si, ti] = frontier.get(traj, np.zeros(dgp.n_l)).sum()
    norm_err = np.abs(law.sum(axis=1) - 1.0).max()
    if norm_err > 1e-9:
        raise CptValidationError(f"mediator law normalization error {norm_err}")
    return MediatorLaw(
        regime=regime,
        states=states,
        state_probs=state_probs,
        trajectories=trajectories,
        probs=law,
    )


def _unit_l(n_l: int, l0: int) -> np.ndarray:
    out = np.zeros(n_l)
    out[l0] = 1.0
    return out


def _outcome_given(dgp: DiscreteDgp, state, regime, m_traj) -> float:
    """E[Y | do(regime, mediator trajectory), baseline state]."""
    c, a0, m0, l0 = (int(v) for v in state)
    total = 0.0
    a_full = (a0, *regime)
    m_full = (m0, *map(int, m_traj))
    for l_path in itertools.product(range(dgp.n_l), repeat=dgp.n_waves):
        prob = 1.0
        l_prev = l0
        for t, a_t in enumerate(regime):
            prob *= dgp.l_probs[c, a_t, l_prev, l_path[t]]
            l_prev = l_path[t]
        total += prob * dgp.y_prob(c, a_full, m_full, (l0, *l_path))
    return total


def expected_outcome(dgp: DiscreteDgp, regime, law: MediatorLaw) -> float:
    """E[Y] when treatment follows ``regime`` and mediators are drawn from
    ``law`` within each baseline stratum."""
    regime = tuple(int(a) for a in regime)
    total = 0.0
    for si in range(len(law.states)):
        inner = 0.0
        for ti, traj in enumerate(law.trajectories):
            w = law.probs[si, ti]
            if w == 0.0:
                continue
            inner += w * _outcome_given(dgp, law.states[si], regime, traj)
        total += law.state_probs[si] * inner
    return float(total)


@dataclass
class OracleEffects:
    ide_log: float
    iie_log: float
    e_regime_reflaw: float
    e_reference_reflaw: float
    e_regime_reglaw: float


def exact_interventional_effects(
    dgp: DiscreteDgp, regime=None, reference=None
) -> OracleEffects:
    """Exact log-ratio interventional direct and indirect contrasts."""
    regime = tuple([1] * dgp.n_waves) if regime is None else tuple(regime)
    reference = tuple([0] * dgp.n_waves) if reference is None else tuple(reference)
    law_ref = compute_mediator_law(dgp, reference)
    law_reg = compute_mediator_law(dgp, regime)
    e_treat_ref = expected_outcome(dgp, regime, law_ref)
    e_ref_ref = expected_outcome(dgp, reference, law_ref)
    e_treat_reg = expected_outcome(dgp, regime, law_reg)
    for name, val in (
        ("E[Y(regime, reference-law)]", e_treat_ref),
        ("E[Y(reference, reference-law)]", e_ref_ref),
        ("E[Y(regime, regime-law)]", e_treat_reg),
    ):
        if val <= 0.0:
            raise LogDomainError(f"{name} = {val}; log contrast undefined")
    return OracleEffects(
        ide_log=math.log(e_treat_ref) - math.log(e_ref_ref),
        iie_log=math.log(e_treat_reg) - math.log(e_treat_ref),
        e_regime_reflaw=e_treat_ref,
        e_reference_reflaw=e_ref_ref,
        e_regime_reglaw=e_treat_reg,
    )


# ---------------------------------------------------------------------------
# bridge from the parametric generator


def dgp_from_config(config) -> DiscreteDgp:
    """Tabulate a fully discrete generator config into exact CPTs.

    Requires binary baseline covariates (no latent SES), all-binary
    time-varying confounders, a binomial mediator family and inactive
    latent confounders, so that the tabulated law matches the sampling law
    of :func:`medflow.synthdata.generate_population` exactly.
    """
    from . import synthdata as sd

    config.validate()
    if config.include_ses:
        raise ConfigError("discrete oracle requires include_ses=False")
    if config.mediator_family != "binomial":
        raise ConfigError("discrete oracle requires the binomial mediator family")
    if any(k != "binary" for k in config.l_kinds):
        raise ConfigError("discrete oracle requires all-binary confounders")
    if config.latent.any_active():
        raise ConfigError("discrete oracle requires inactive latent confounders")

    nb = len(config.c_binary_probs)
    dl = len(config.l_kinds)
    n_c, n_l = 2**nb, 2**dl
    n_m = config.mediator_levels
    m_values = np.arange(n_m) / (n_m - 1)

    def bits(idx: int, width: int) -> np.ndarray:
        return np.array([(idx >> i) & 1 for i in range(width)], dtype=np.float64)

    c_vals = np.stack([bits(i, nb) for i in range(n_c)]) if nb else np.zeros((1, 0))
    l_vals = np.stack([bits(i, dl) for i in range(n_l)]) if dl else np.zeros((1, 0))
    c_probs = np.array(
        [
            np.prod(
                [
                    p if b else 1.0 - p
                    for p, b in zip(config.c_binary_probs, c_vals[i])
                ]
            )
            for i in range(n_c)
        ]
    )

    def binom_pmf(p: float) -> np.ndarray:
        kmax = n_m - 1
        j = np.arange(n_m)
        return (
            np.array([math.comb(kmax, int(x)) for x in j])
            * p**j
            * (1.0 - p) ** (kmax - j)
        )

    def l_state_pmf(component_probs: np.ndarray) -> np.ndarray:
        out = np.empty(n_l)
        for s in range(n_l):
            b = l_vals[s]
            out[s] = np.prod(component_probs * b + (1.0 - component_probs) * (1.0 - b))
        return out

    bt, bm = config.baseline_treatment, config.baseline_mediator
    te, me = config.treatment, config.mediator
    a0 = np.array([expit(bt.intercept + c_vals[c] @ np.asarray(bt.c)) for c in range(n_c)])
    m0 = np.zeros((n_c, 2, n_m))
    l0 = np.zeros((n_c, 2, n_l))
    for c in range(n_c):
        for a in (0, 1):
            m0[c, a] = binom_pmf(
                float(expit(bm.intercept + bm.a * a + c_vals[c] @ np.asarray(bm.c)))
            )
            comp = np.array(
                [
                    expit(eq.intercept + eq.a * a + c_vals[c] @ np.asarray(eq.c))
                    for eq in config.baseline_confounders
                ]
            )
            l0[c, a] = l_state_pmf(comp)
    a_probs = np.zeros((n_c, 2, n_m, n_l))
    m_probs = np.zeros((n_c, 2, n_m, n_l, n_m))
    l_probs = np.zeros((n_c, 2, n_l, n_l))
    for c in range(n_c):
        for a in (0, 1):
            for lp in range(n_l):
                comp = np.array(
                    [
                        expit(
                            eq.intercept
                            + eq.a * a
                            + eq.self_prev * l_vals[lp][j]
                            + c_vals[c] @ np.asarray(eq.c)
                        )
                        for j, eq in enumerate(config.confounders)
                    ]
                )
                l_probs[c, a, lp] = l_state_pmf(comp)
                for mp in range(n_m):
                    a_probs[c, a, mp, lp] = expit(
                        te.intercept
                        + te.a_prev * a
                        + te.m_prev * m_values[mp]
                        + l_vals[lp] @ np.asarray(te.l_prev)
                        + c_vals[c] @ np.asarray(te.c)
                    )
                    m_probs[c, a, mp, lp] = binom_pmf(
                        float(
                            expit(
                                me.intercept
                                + me.a * a
                                + me.m_prev * m_values[mp]
                                + l_vals[lp] @ np.asarray(me.l_prev)
                                + c_vals[c] @ np.asarray(me.c)
                            )
                        )
                    )

    oe = config.outcome

    def y_prob(c: int, a_traj, m_traj, l_traj) -> float:
        cum_a = float(sum(a_traj[1:]))
        cum_m = float(sum(m_values[i] for i in m_traj[1:]))
        l_mean = np.mean([l_vals[i] for i in l_traj[1:]], axis=0)
        eta = (
            oe.intercept
            + oe.cum_a * cum_a
            + oe.cum_m * cum_m
            + float(l_mean @ np.asarray(oe.l_mean))
        )
        return float(np.clip(math.exp(eta), sd.Y_CLIP_EPS, 1.0 - sd.Y_CLIP_EPS))

    dgp = DiscreteDgp(
        n_waves=config.n_waves - 1,
        c_probs=c_probs,
        m_values=m_values,
        l_state_values=l_vals,
        a0_probs=a0,
        m0_probs=m0,
        l0_probs=l0,
        a_probs=a_probs,
        m_probs=m_probs,
        l_probs=l_probs,
        y_prob=y_prob,
    )
    dgp.validate()
    return dgp
