"""Command line pipeline: simulate, neighborhoods, weights, fit, effects,
sensitivity, oracle, report, or all of them in sequence.

Every stage reads and writes only declared files under the output
directory, records input/output digests in manifest.json, and derives all
randomness from explicit config seeds, so reruns reproduce data artifacts
byte for byte (the manifest carries wall-clock timestamps and is the one
file exempt from that guarantee). MEDFLOW_LOG controls verbosity only.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .config import PipelineConfig, canonical_json, load_config
from .effects import bootstrap_effects, interventional_effects, msm_estimates
from .errors import ConfigError, IngestionError, MedflowError
from .geo import neighborhoods_from_residences
from .oracle import dgp_from_config, exact_interventional_effects
from .panel import (
    PanelDataset,
    build_long,
    read_panel_csv,
    validate_panel_files,
    validate_shares_frame,
    write_panel_csv,
)
from .sensitivity import run_scenarios
from .synthdata import generate_population
from .weights import (
    WeightModelSpec,
    compute_weights,
    cumulate_and_truncate,
    default_weight_spec,
)

log = logging.getLogger("medflow")


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def _write_json(path: Path, obj) -> None:
    path.write_text(canonical_json(obj), encoding="utf-8")


def _write_csv(path: Path, frame: pd.DataFrame) -> None:
    frame.to_csv(path, index=False, lineterminator="\n")


class Manifest:
    """Read-modify-write run manifest with per-stage digests and warnings."""

    def __init__(self, out_dir: Path, cfg: PipelineConfig):
        self.path = out_dir / "manifest.json"
        if self.path.exists():
            self.data = json.loads(self.path.read_text(encoding="utf-8"))
        else:
            self.data = {"artifact_version": __version__, "stages": {}}
        self.data["config_hash"] = cfg.config_hash()

    def record(self, stage, inputs, outputs, started, warnings_seen):
        self.data["stages"][stage] = {
            "inputs": {p.name: _digest(p) for p in inputs if p.exists()},
            "outputs": {p.name: _digest(p) for p in outputs if p.exists()},
            "started_utc": started,
            "finished_utc": _utc_now(),
            "warnings": warnings_seen,
        }
        _write_json(self.path, self.data)


def _weight_spec(cfg: PipelineConfig, panel: PanelDataset) -> WeightModelSpec:
    spec = default_weight_spec(panel)
    spec = dataclasses.replace(
        spec,
        lower_pct=cfg.weights_lower_pct,
        upper_pct=cfg.weights_upper_pct,
        pooled=cfg.weights_pooled,
    )
    if cfg.weights_covariates:
        fields = {
            k: tuple(v)
            for k, v in cfg.weights_covariates.items()
            if k.endswith("_numerator") or k.endswith("_denominator")
        }
        spec = dataclasses.replace(spec, **fields)
    spec.validate()
    return spec


def _check_horizon(cfg: PipelineConfig, panel: PanelDataset) -> None:
    if cfg.effects_T is not None and not (1 <= cfg.effects_T <= panel.n_analysis_waves):
        raise ConfigError(
            f"effects.T = {cfg.effects_T} inconsistent with the panel's "
            f"{panel.n_analysis_waves} analysis waves"
        )


def _load_panel(cfg: PipelineConfig, out: Path) -> PanelDataset:
    panel = read_panel_csv(out)
    if cfg.mediator_source == "neighborhoods":
        scores_path = out / "neighborhoods.csv"
        if not scores_path.exists():
            raise IngestionError(
                "mediator_source is 'neighborhoods' but neighborhoods.csv is missing"
            )
        scores = pd.read_csv(scores_path)
        pivot = scores.pivot(index="person_id", columns="wave", values="score")
        pivot = pivot.reindex(panel.person_id)
        if pivot.isna().to_numpy().any():
            raise IngestionError("neighborhoods.csv does not cover every (person, wave)")
        panel = dataclasses.replace(panel, m=pivot.to_numpy(dtype=np.float64))
    return panel


# ---------------------------------------------------------------------------
# stages


def stage_simulate(cfg: PipelineConfig, out: Path) -> tuple[list[Path], list[Path]]:
    if cfg.dgp is None:
        raise ConfigError("simulate stage needs a dgp block")
    panel, residences = generate_population(cfg.dgp)
    write_panel_csv(panel, out)
    _write_csv(out / "residences.csv", residences)
    return [], [out / f for f in ("panel.csv", "baseline.csv", "outcome.csv", "residences.csv")]


def stage_neighborhoods(cfg: PipelineConfig, out: Path):
    res_path = out / "residences.csv"
    if not res_path.exists():
        raise IngestionError("residences.csv not found; run simulate or provide it")
    residences = pd.read_csv(res_path)
    table, diagnostics = neighborhoods_from_residences(residences, k=cfg.geo_k)
    report = validate_shares_frame(table)
    if not report.clean:
        raise IngestionError(report.render())
    _write_csv(out / "neighborhoods.csv", table)
    _write_json(
        out / "pca_diagnostics.json",
        {"k": cfg.geo_k, "per_wave": [d.as_dict() for d in diagnostics]},
    )
    return [res_path], [out / "neighborhoods.csv", out / "pca_diagnostics.json"]


def stage_weights(cfg: PipelineConfig, out: Path):
    panel = _load_panel(cfg, out)
    spec = _weight_spec(cfg, panel)
    ws = compute_weights(panel, spec)
    frame = pd.DataFrame(
        {
            "person_id": ws.person_id.astype(np.int64),
            "wave": ws.wave.astype(np.int64),
            "sw_yt": ws.sw_yt,
            "sw_ym": ws.sw_ym,
            "sw_mt": ws.sw_mt,
        }
    )
    _write_csv(out / "weights.csv", frame)
    _write_json(
        out / "weight_diagnostics.json",
        {
            "families": ws.diagnostics,
            "truncation_bounds": ws.bounds,
            "lower_pct": spec.lower_pct,
            "upper_pct": spec.upper_pct,
        },
    )
    inputs = [out / f for f in ("panel.csv", "baseline.csv", "outcome.csv")]
    return inputs, [out / "weights.csv", out / "weight_diagnostics.json"]


def stage_fit(cfg: PipelineConfig, out: Path):
    panel = _load_panel(cfg, out)
    wpath = out / "weights.csv"
    if not wpath.exists():
        raise IngestionError("weights.csv not found; run the weights stage first")
    wframe = pd.read_csv(wpath).sort_values(["person_id", "wave"])
    long = build_long(panel)
    if len(wframe) != long.n_rows:
        raise IngestionError(
            f"weights.csv has {len(wframe)} rows, panel implies {long.n_rows}"
        )
    if not (
        np.array_equal(wframe["person_id"].to_numpy(), long.columns["person_id"])
        and np.array_equal(wframe["wave"].to_numpy(), long.columns["wave"])
    ):
        raise IngestionError("weights.csv rows do not line up with the panel")
    spec = _weight_spec(cfg, panel)
    ws = cumulate_and_truncate(
        long,
        wframe["sw_yt"].to_numpy(),
        wframe["sw_ym"].to_numpy(),
        wframe["sw_mt"].to_numpy(),
        spec,
    )
    est = msm_estimates(panel, ws, long=long)
    _write_json(out / "msm.json", est.as_dict())
    inputs = [out / f for f in ("panel.csv", "baseline.csv", "outcome.csv", "weights.csv")]
    return inputs, [out / "msm.json"]


def stage_effects(cfg: PipelineConfig, out: Path):
    if cfg.effects_published is not None:
        pub = cfg.effects_published
        eff = interventional_effects(
            float(pub["theta1"]), float(pub["theta2"]), float(pub["beta1"]), int(pub["T"])
        )
        payload = {
            "mode": "published-coefficients",
            "coefficients": {
                "theta1": float(pub["theta1"]),
                "theta2": float(pub["theta2"]),
                "beta1": float(pub["beta1"]),
            },
            **eff.as_dict(),
            "B": 0,
            "seed": cfg.effects_seed,
        }
        _write_json(out / "effects.json", payload)
        return [], [out / "effects.json"]
    panel = _load_panel(cfg, out)
    _check_horizon(cfg, panel)
    spec = _weight_spec(cfg, panel)
    result = bootstrap_effects(
        panel, spec, B=cfg.effects_B, seed=cfg.effects_seed, T=cfg.effects_T
    )
    payload = {"mode": "fitted", **result.as_dict()}
    _write_json(out / "effects.json", payload)
    inputs = [out / f for f in ("panel.csv", "baseline.csv", "outcome.csv")]
    return inputs, [out / "effects.json"]


def stage_sensitivity(cfg: PipelineConfig, out: Path):
    panel = _load_panel(cfg, out)
    _check_horizon(cfg, panel)
    spec = _weight_spec(cfg, panel)
    results = run_scenarios(
        panel,
        spec,
        grid=cfg.sensitivity_grid,
        n_sims=cfg.sensitivity_n_sims,
        seed=cfg.sensitivity_seed,
        noise_sd=cfg.sensitivity_noise_sd,
        targets=cfg.sensitivity_targets,
        T=cfg.effects_T,
    )
    _write_csv(out / "sensitivity.csv", results.rows)
    _write_json(out / "sensitivity_summary.json", results.summary)
    inputs = [out / f for f in ("panel.csv", "baseline.csv", "outcome.csv")]
    return inputs, [out / "sensitivity.csv", out / "sensitivity_summary.json"]


def stage_oracle(cfg: PipelineConfig, out: Path):
    if cfg.dgp is None:
        raise ConfigError("oracle stage needs a dgp block")
    dgp = dgp_from_config(cfg.dgp)
    effects = exact_interventional_effects(
        dgp, regime=cfg.oracle_regime, reference=cfg.oracle_reference
    )
    _write_json(
        out / "oracle_results.json",
        {
            "ide_log": effects.ide_log,
            "iie_log": effects.iie_log,
            "e_regime_reflaw": effects.e_regime_reflaw,
            "e_reference_reflaw": effects.e_reference_reflaw,
            "e_regime_reglaw": effects.e_regime_reglaw,
            "n_analysis_waves": dgp.n_waves,
        },
    )
    return [], [out / "oracle_results.json"]


def stage_report(cfg: PipelineConfig, out: Path):
    eff_path = out / "effects.json"
    if not eff_path.exists():
        raise IngestionError("effects.json not found; run the effects stage first")
    eff = json.loads(eff_path.read_text(encoding="utf-8"))
    ci = eff.get("ci", {})
    rows = []

    def row(quantity, log_value, ci_key):
        bounds = ci.get(ci_key, [float("nan"), float("nan")])
        rows.append(
            {
                "quantity": quantity,
                "log_scale": log_value,
                "rr_scale": math.exp(log_value),
                "ci_log_low": bounds[0],
                "ci_log_high": bounds[1],
            }
        )

    row("interventional_direct_effect", eff["ide_log"], "ide_log")
    row("interventional_indirect_effect", eff["iie_log"], "iie_log")
    row("total_effect", eff["total_log"], "total_log")
    report_frame = pd.DataFrame(rows)
    report_frame["proportion_mediated"] = eff["proportion_mediated"]
    _write_csv(out / "report.csv", report_frame)
    payload = {"effects": eff}
    sens_path = out / "sensitivity_summary.json"
    inputs = [eff_path]
    if sens_path.exists():
        payload["sensitivity"] = json.loads(sens_path.read_text(encoding="utf-8"))
        inputs.append(sens_path)
    wd_path = out / "weight_diagnostics.json"
    if wd_path.exists():
        payload["weight_diagnostics"] = json.loads(wd_path.read_text(encoding="utf-8"))
        inputs.append(wd_path)
    _write_json(out / "report.json", payload)
    return inputs, [out / "report.csv", out / "report.json"]


STAGE_FUNCS = {
    "simulate": stage_simulate,
    "neighborhoods": stage_neighborhoods,
    "weights": stage_weights,
    "fit": stage_fit,
    "effects": stage_effects,
    "sensitivity": stage_sensitivity,
    "oracle": stage_oracle,
    "report": stage_report,
}


def run_stage(name: str, cfg: PipelineConfig, out: Path, manifest: Manifest) -> None:
    log.info("stage %s starting", name)
    started = _utc_now()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        inputs, outputs = STAGE_FUNCS[name](cfg, out)
    manifest.record(
        name,
        inputs,
        outputs,
        started,
        [str(w.message) for w in caught],
    )
    log.info("stage %s finished", name)


def run(subcommand: str, cfg: PipelineConfig, out_dir: str | None = None) -> int:
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out, cfg)
    if subcommand == "all":
        names = [s for s in STAGE_FUNCS if cfg.stages.get(s, False)]
    else:
        names = [subcommand]
    for name in names:
        run_stage(name, cfg, out, manifest)
    return 0


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("MEDFLOW_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = argparse.ArgumentParser(
        prog="medflow",
        description="Longitudinal mediation pipeline on register-style panels",
    )
    parser.add_argument("subcommand", choices=[*STAGE_FUNCS, "all", "validate"])
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--seed", type=int, default=None, help="seed override for all stages")
    parser.add_argument(
        "--workers",
        type=int,
        default=None,
        help="worker count (scheduling only; never affects results)",
    )
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, seed_override=args.seed)
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            cfg = dataclasses.replace(cfg, workers=args.workers)
        if args.subcommand == "validate":
            out = Path(args.out or cfg.out_dir)
            report = validate_panel_files(out)
            print(report.render())
            return 0 if report.clean else 1
        return run(args.subcommand, cfg, out_dir=args.out)
    except ConfigError as exc:
        print(f"error[type=ConfigError]: {exc}", file=sys.stderr)
        return 2
    except MedflowError as exc:
        print(f"error[type={type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
