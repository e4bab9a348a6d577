"""Structured pipeline configuration: JSON loading, validation, hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .synthdata import (
    BaselineConfounderEq,
    BaselineMediatorEq,
    BaselineTreatmentEq,
    ConfounderEq,
    DgpConfig,
    GridConfig,
    LatentEffects,
    MediatorEq,
    OutcomeEq,
    TreatmentEq,
)

STAGES = (
    "simulate",
    "neighborhoods",
    "weights",
    "fit",
    "effects",
    "sensitivity",
    "oracle",
    "report",
)
DEFAULT_STAGES = {
    "simulate": True,
    "neighborhoods": True,
    "weights": True,
    "fit": True,
    "effects": True,
    "sensitivity": False,
    "oracle": False,
    "report": True,
}


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def _tuple(x):
    return tuple(x) if x is not None else ()


def dgp_config_from_dict(d: dict) -> DgpConfig:
    try:
        return DgpConfig(
            n_persons=int(d["n_persons"]),
            n_waves=int(d["n_waves"]),
            seed=int(d["seed"]),
            c_binary_probs=_tuple(d.get("c_binary_probs", (0.5, 0.15))),
            include_ses=bool(d.get("include_ses", True)),
            l_kinds=_tuple(d.get("l_kinds", ("binary", "continuous"))),
            baseline_treatment=BaselineTreatmentEq(**d["baseline_treatment"])
            if "baseline_treatment" in d
            else BaselineTreatmentEq(-2.0),
            baseline_mediator=BaselineMediatorEq(**d["baseline_mediator"])
            if "baseline_mediator" in d
            else BaselineMediatorEq(0.35),
            baseline_confounders=tuple(
                BaselineConfounderEq(**e) for e in d.get("baseline_confounders", ())
            ),
            treatment=TreatmentEq(**d["treatment"]) if "treatment" in d else TreatmentEq(-2.2),
            mediator=MediatorEq(**d["mediator"]) if "mediator" in d else MediatorEq(0.08),
            confounders=tuple(ConfounderEq(**e) for e in d.get("confounders", ())),
            outcome=OutcomeEq(**d["outcome"]) if "outcome" in d else OutcomeEq(-2.5),
            latent=LatentEffects(**d.get("latent", {})),
            grid=GridConfig(**d.get("grid", {})),
            mediator_family=d.get("mediator_family", "gaussian"),
            mediator_levels=int(d.get("mediator_levels", 2)),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad dgp block: {exc}") from exc


def dgp_config_to_dict(cfg: DgpConfig) -> dict:
    d = dataclasses.asdict(cfg)
    def listify(x):
        if isinstance(x, tuple):
            return [listify(v) for v in x]
        if isinstance(x, dict):
            return {k: listify(v) for k, v in x.items()}
        return x
    return listify(d)


@dataclass
class PipelineConfig:
    """Everything one run needs; all randomness flows from explicit seeds."""

    raw: dict
    out_dir: str
    workers: int
    stages: dict[str, bool]
    dgp: DgpConfig | None
    geo_k: int
    weights_lower_pct: float
    weights_upper_pct: float
    weights_pooled: bool
    weights_covariates: dict | None
    effects_T: int | None
    effects_B: int
    effects_seed: int
    effects_published: dict | None
    sensitivity_grid: tuple[float, ...]
    sensitivity_n_sims: int
    sensitivity_seed: int
    sensitivity_noise_sd: float
    sensitivity_targets: tuple[str, ...]
    oracle_regime: tuple[int, ...] | None
    oracle_reference: tuple[int, ...] | None
    mediator_source: str = "panel"

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.raw).encode("utf-8")).hexdigest()


def load_config(path, seed_override: int | None = None) -> PipelineConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from exc
    return parse_config(raw, seed_override=seed_override)


def parse_config(raw: dict, seed_override: int | None = None) -> PipelineConfig:
    raw = json.loads(json.dumps(raw))  # deep copy, JSON-typed
    if seed_override is not None:
        if "dgp" in raw:
            raw["dgp"]["seed"] = seed_override
        raw.setdefault("effects", {})["seed"] = seed_override
        raw.setdefault("sensitivity", {})["seed"] = seed_override
    stages = dict(DEFAULT_STAGES)
    stages.update(raw.get("stages", {}))
    unknown = set(stages) - set(STAGES)
    if unknown:
        raise ConfigError(f"unknown stages {sorted(unknown)}")

    dgp = dgp_config_from_dict(raw["dgp"]) if "dgp" in raw else None
    if dgp is not None:
        dgp.validate()
    eff = raw.get("effects", {})
    sens = raw.get("sensitivity", {})
    geo = raw.get("geo", {})
    wts = raw.get("weights", {})
    orc = raw.get("oracle", {})
    published = eff.get("published")
    if published is not None:
        for key in ("theta1", "theta2", "beta1", "T"):
            if key not in published:
                raise ConfigError(f"effects.published needs key {key!r}")
    for seed_key, block, bname in (
        ("seed", eff, "effects"),
        ("seed", sens, "sensitivity"),
    ):
        if block and seed_key not in block:
            raise ConfigError(f"{bname}.seed must be explicit")
    cfg = PipelineConfig(
        raw=raw,
        out_dir=raw.get("out_dir", "out"),
        workers=int(raw.get("workers", 1)),
        stages=stages,
        dgp=dgp,
        geo_k=int(geo.get("k", 50)),
        weights_lower_pct=float(wts.get("lower_pct", 1.0)),
        weights_upper_pct=float(wts.get("upper_pct", 99.0)),
        weights_pooled=bool(wts.get("pooled", True)),
        weights_covariates=wts.get("covariates"),
        effects_T=int(eff["T"]) if eff.get("T") is not None else None,
        effects_B=int(eff.get("B", 500)),
        effects_seed=int(eff.get("seed", 0)),
        effects_published=published,
        sensitivity_grid=tuple(float(v) for v in sens.get("grid", (0.0, 0.1, 0.3, 0.5, 1.0))),
        sensitivity_n_sims=int(sens.get("n_sims", 500)),
        sensitivity_seed=int(sens.get("seed", 0)),
        sensitivity_noise_sd=float(sens.get("noise_sd", 1.0)),
        sensitivity_targets=tuple(sens.get("targets", ("treatment_mediator", "treatment_outcome", "mediator_outcome"))),
        oracle_regime=tuple(int(v) for v in orc["regime"]) if orc.get("regime") else None,
        oracle_reference=tuple(int(v) for v in orc["reference"]) if orc.get("reference") else None,
        mediator_source=raw.get("mediator_source", "panel"),
    )
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.mediator_source not in ("panel", "neighborhoods"):
        raise ConfigError("mediator_source must be 'panel' or 'neighborhoods'")
    return cfg
