"""Panel data container, long-format views, CSV round trips, validation.

A panel holds, per person, the baseline covariate vector, a treatment /
mediator / time-varying-confounder trajectory over waves 1..T, and one
end-of-study binary outcome. Wave 1 is the baseline wave: its treatment and
mediator values act as baseline covariates in all downstream models, and
waves 2..T are the analysis waves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import IngestionError

PANEL_FILES = ("panel.csv", "baseline.csv", "outcome.csv")


@dataclass
class PanelDataset:
    """Complete longitudinal cohort; arrays are immutable by convention."""

    person_id: np.ndarray          # (n,) int64
    c_names: list[str]
    c_values: np.ndarray           # (n, dc) float64, exogenous baseline covariates
    a: np.ndarray                  # (n, T) int8, treatment per wave
    m: np.ndarray                  # (n, T) float64, mediator per wave
    l_names: list[str]
    l: np.ndarray                  # (n, T, dl) float64
    y: np.ndarray                  # (n,) int8, end-of-study outcome

    @property
    def n_persons(self) -> int:
        return self.a.shape[0]

    @property
    def n_waves(self) -> int:
        return self.a.shape[1]

    @property
    def n_analysis_waves(self) -> int:
        return self.n_waves - 1

    def cum_a(self) -> np.ndarray:
        """Per person, treated-wave count over the analysis waves 2..T."""
        return self.a[:, 1:].sum(axis=1).astype(np.float64)

    def cum_m(self) -> np.ndarray:
        """Per person, mediator sum over the analysis waves 2..T."""
        return self.m[:, 1:].sum(axis=1)

    def subset(self, person_index: np.ndarray) -> "PanelDataset":
        """Row-resample persons (with repeats); duplicates get fresh ids."""
        idx = np.asarray(person_index)
        return PanelDataset(
            person_id=np.arange(idx.size, dtype=np.int64),
            c_names=self.c_names,
            c_values=self.c_values[idx],
            a=self.a[idx],
            m=self.m[idx],
            l_names=self.l_names,
            l=self.l[idx],
            y=self.y[idx],
        )


@dataclass
class LongData:
    """Analysis-wave long format: one row per (person, wave), waves 2..T.

    Rows are grouped by person in consecutive blocks of T-1 waves, which
    lets the bootstrap gather person blocks with pure index arithmetic.
    """

    n_persons: int
    waves_per_person: int
    columns: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return self.n_persons * self.waves_per_person

    def rows_for_persons(self, person_index: np.ndarray) -> np.ndarray:
        base = np.asarray(person_index)[:, None] * self.waves_per_person
        return (base + np.arange(self.waves_per_person)[None, :]).ravel()

    def gather(self, person_index: np.ndarray) -> "LongData":
        rows = self.rows_for_persons(person_index)
        return LongData(
            n_persons=len(person_index),
            waves_per_person=self.waves_per_person,
            columns={k: v[rows] for k, v in self.columns.items()},
        )


def build_long(panel: PanelDataset) -> LongData:
    """Flatten a panel into the analysis-wave long format.

    Derived columns: lagged treatment/mediator, baseline wave-1 values
    (``a_base``/``m_base``), lagged confounders ``<name>_prev``, the running
    post-baseline treatment average ``avg_a`` used by the mediator model,
    and a 2-based ``wave`` index.
    """
    n, T = panel.a.shape
    k = T - 1
    if k < 1:
        raise IngestionError("panel needs at least 2 waves (wave 1 is baseline)")
    cols: dict[str, np.ndarray] = {}
    cols["person_id"] = np.repeat(panel.person_id, k)
    cols["wave"] = np.tile(np.arange(2, T + 1), n).astype(np.float64)
    cols["a"] = panel.a[:, 1:].astype(np.float64).ravel()
    cols["m"] = panel.m[:, 1:].ravel()
    cols["a_prev"] = panel.a[:, :-1].astype(np.float64).ravel()
    cols["m_prev"] = panel.m[:, :-1].ravel()
    cols["a_base"] = np.repeat(panel.a[:, 0].astype(np.float64), k)
    cols["m_base"] = np.repeat(panel.m[:, 0], k)
    for j, name in enumerate(panel.c_names):
        cols[name] = np.repeat(panel.c_values[:, j], k)
    for j, name in enumerate(panel.l_names):
        cols[f"{name}_prev"] = panel.l[:, :-1, j].ravel()
        cols[name] = panel.l[:, 1:, j].ravel()
    running = np.cumsum(panel.a[:, 1:], axis=1).astype(np.float64)
    cols["avg_a"] = (running / np.arange(1, k + 1)[None, :]).ravel()
    return LongData(n_persons=n, waves_per_person=k, columns=cols)


# ---------------------------------------------------------------------------
# CSV round trips


def write_panel_csv(panel: PanelDataset, out_dir) -> list[str]:
    """Write panel.csv, baseline.csv, outcome.csv; returns the file names."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n, T = panel.a.shape
    rows = {
        "person_id": np.repeat(panel.person_id, T),
        "wave": np.tile(np.arange(1, T + 1), n),
        "treatment": panel.a.ravel(),
        "mediator": panel.m.ravel(),
    }
    for j, name in enumerate(panel.l_names):
        rows[name] = panel.l[:, :, j].ravel()
    pd.DataFrame(rows).to_csv(out / "panel.csv", index=False, lineterminator="\n")
    base = {"person_id": panel.person_id}
    for j, name in enumerate(panel.c_names):
        base[name] = panel.c_values[:, j]
    pd.DataFrame(base).to_csv(out / "baseline.csv", index=False, lineterminator="\n")
    pd.DataFrame({"person_id": panel.person_id, "outcome": panel.y}).to_csv(
        out / "outcome.csv", index=False, lineterminator="\n"
    )
    return list(PANEL_FILES)


def _read_csv(path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise IngestionError(f"{path}: not valid UTF-8") from exc
    except FileNotFoundError as exc:
        raise IngestionError(f"{path}: file not found") from exc
    except pd.errors.ParserError as exc:
        raise IngestionError(f"{path}: unparseable CSV ({exc})") from exc


def read_panel_csv(data_dir) -> PanelDataset:
    """Strict loader: raises :class:`IngestionError` on any defect."""
    from pathlib import Path

    d = Path(data_dir)
    findings = validate_panel_files(d)
    if findings.findings:
        first = findings.findings[0]
        raise IngestionError(first.render())
    panel_df = _read_csv(d / "panel.csv")
    base_df = _read_csv(d / "baseline.csv").sort_values("person_id")
    out_df = _read_csv(d / "outcome.csv").sort_values("person_id")
    panel_df = panel_df.sort_values(["person_id", "wave"])
    persons = base_df["person_id"].to_numpy(dtype=np.int64)
    n = len(persons)
    T = int(panel_df["wave"].max())
    l_names = [
        c
        for c in panel_df.columns
        if c not in ("person_id", "wave", "treatment", "mediator")
    ]
    c_names = [c for c in base_df.columns if c != "person_id"]
    a = panel_df["treatment"].to_numpy(dtype=np.int8).reshape(n, T)
    m = panel_df["mediator"].to_numpy(dtype=np.float64).reshape(n, T)
    l = np.stack(
        [panel_df[name].to_numpy(dtype=np.float64).reshape(n, T) for name in l_names],
        axis=2,
    ) if l_names else np.zeros((n, T, 0))
    return PanelDataset(
        person_id=persons,
        c_names=c_names,
        c_values=base_df[c_names].to_numpy(dtype=np.float64)
        if c_names
        else np.zeros((n, 0)),
        a=a,
        m=m,
        l_names=l_names,
        l=l,
        y=out_df["outcome"].to_numpy(dtype=np.int8),
    )


# ---------------------------------------------------------------------------
# Validation


@dataclass
class Finding:
    file: str
    message: str
    column: str | None = None
    person_id: int | None = None
    wave: int | None = None
    row: int | None = None

    def render(self) -> str:
        parts = [self.file]
        if self.column is not None:
            parts.append(f"column {self.column}")
        if self.person_id is not None:
            parts.append(f"person {self.person_id}")
        if self.wave is not None:
            parts.append(f"wave {self.wave}")
        if self.row is not None:
            parts.append(f"row {self.row}")
        return f"{': '.join(parts)}: {self.message}"


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.findings

    def add(self, **kw) -> None:
        self.findings.append(Finding(**kw))

    def render(self) -> str:
        if self.clean:
            return "clean"
        return "\n".join(f.render() for f in self.findings)


def validate_panel_files(data_dir) -> ValidationReport:
    """Schema, completeness, domain and cross-file checks; never raises
    unless a file is unreadable."""
    from pathlib import Path

    d = Path(data_dir)
    report = ValidationReport()
    frames = {}
    for fname in PANEL_FILES:
        path = d / fname
        if not path.exists():
            report.add(file=fname, message="file missing")
            continue
        frames[fname] = _read_csv(path)
    if len(frames) < len(PANEL_FILES):
        return report

    panel_df, base_df, out_df = (
        frames["panel.csv"],
        frames["baseline.csv"],
        frames["outcome.csv"],
    )
    for col in ("person_id", "wave", "treatment", "mediator"):
        if col not in panel_df.columns:
            report.add(file="panel.csv", column=col, message="required column missing")
    for fname, df, col in (
        ("baseline.csv", base_df, "person_id"),
        ("outcome.csv", out_df, "person_id"),
        ("outcome.csv", out_df, "outcome"),
    ):
        if col not in df.columns:
            report.add(file=fname, column=col, message="required column missing")
    if report.findings:
        return report

    for fname, df in frames.items():
        for col in df.columns:
            vals = pd.to_numeric(df[col], errors="coerce")
            bad = np.flatnonzero(~np.isfinite(vals.to_numpy(dtype=np.float64)))
            if bad.size:
                row = int(bad[0])
                report.add(
                    file=fname,
                    column=col,
                    row=row,
                    person_id=int(df["person_id"].iloc[row])
                    if "person_id" in df
                    else None,
                    message="non-finite or non-numeric value",
                )
    if report.findings:
        return report

    bad_a = ~panel_df["treatment"].isin((0, 1))
    if bad_a.any():
        row = int(np.flatnonzero(bad_a.to_numpy())[0])
        report.add(
            file="panel.csv",
            column="treatment",
            person_id=int(panel_df["person_id"].iloc[row]),
            wave=int(panel_df["wave"].iloc[row]),
            message="treatment must be 0 or 1",
        )
    bad_y = ~out_df["outcome"].isin((0, 1))
    if bad_y.any():
        row = int(np.flatnonzero(bad_y.to_numpy())[0])
        report.add(
            file="outcome.csv",
            column="outcome",
            person_id=int(out_df["person_id"].iloc[row]),
            message="outcome must be 0 or 1",
        )

    waves = np.sort(panel_df["wave"].unique())
    T = int(waves.max()) if len(waves) else 0
    if T < 2 or not np.array_equal(waves, np.arange(1, T + 1)):
        report.add(
            file="panel.csv",
            column="wave",
            message=f"waves must cover 1..T with T >= 2, found {list(waves)}",
        )
        return report
    counts = panel_df.groupby("person_id")["wave"].agg(["size", "nunique"])
    incomplete = counts[(counts["size"] != T) | (counts["nunique"] != T)]
    for pid in incomplete.index[:20]:
        have = set(panel_df.loc[panel_df["person_id"] == pid, "wave"])
        missing = sorted(set(range(1, T + 1)) - have)
        report.add(
            file="panel.csv",
            person_id=int(pid),
            wave=int(missing[0]) if missing else None,
            message=(
                f"person has waves {sorted(have)}, missing {missing}"
                if missing
                else "person has duplicated waves"
            ),
        )

    pids_panel = set(panel_df["person_id"].unique())
    pids_base = set(base_df["person_id"])
    pids_out = set(out_df["person_id"])
    for fname, pids in (("baseline.csv", pids_base), ("outcome.csv", pids_out)):
        only_panel = sorted(pids_panel - pids)
        only_other = sorted(pids - pids_panel)
        for pid in only_panel[:5]:
            report.add(
                file=fname,
                person_id=int(pid),
                message="person present in panel.csv but absent here",
            )
        for pid in only_other[:5]:
            report.add(
                file=fname,
                person_id=int(pid),
                message="person present here but absent from panel.csv",
            )
    if base_df["person_id"].duplicated().any():
        report.add(file="baseline.csv", column="person_id", message="duplicate ids")
    if out_df["person_id"].duplicated().any():
        report.add(file="outcome.csv", column="person_id", message="duplicate ids")
    return report


def validate_shares_frame(df: pd.DataFrame, fname: str = "neighborhoods.csv") -> ValidationReport:
    """Domain checks for neighborhood share columns (all must be in [0, 1])."""
    report = ValidationReport()
    share_cols = [c for c in df.columns if c.startswith("share_")] + (
        ["score"] if "score" in df.columns else []
    )
    for col in share_cols:
        vals = df[col].to_numpy(dtype=np.float64)
        bad = np.flatnonzero(~((vals >= 0.0) & (vals <= 1.0)))
        if bad.size:
            row = int(bad[0])
            report.add(
                file=fname,
                column=col,
                row=row,
                person_id=int(df["person_id"].iloc[row]) if "person_id" in df else None,
                message="share outside [0, 1]",
            )
    return report
