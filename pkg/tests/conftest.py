"""Shared test helpers."""

import dataclasses as dc

from medflow import synthdata as sd


def severed_config(n=40_000, seed=1):
    """Treatment cut off from everything: no parents besides its own past,
    no arrows out of it."""
    base = sd.default_config(n_persons=n, n_waves=4, seed=seed)
    return dc.replace(
        base,
        baseline_treatment=sd.BaselineTreatmentEq(-2.0, c=(0.0, 0.0, 0.0)),
        baseline_mediator=dc.replace(base.baseline_mediator, a=0.0),
        baseline_confounders=tuple(
            dc.replace(eq, a=0.0) for eq in base.baseline_confounders
        ),
        treatment=sd.TreatmentEq(
            -2.0, a_prev=1.0, m_prev=0.0, l_prev=(0.0, 0.0), c=(0.0, 0.0, 0.0)
        ),
        mediator=dc.replace(base.mediator, a=0.0),
        confounders=tuple(dc.replace(eq, a=0.0) for eq in base.confounders),
        outcome=dc.replace(base.outcome, cum_a=0.0),
    )
