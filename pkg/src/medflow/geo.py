"""Individualized neighborhoods on a 100m grid.

Builds a population index over integer square coordinates, expands rings of
squares around an ego in order of centroid-to-centroid Euclidean distance
until at least k neighbors have been accumulated (the final ring is taken
whole, ties share a ring), computes five disadvantage shares over the
accumulated neighbors, and reduces the shares to a single score per wave
with a first principal component.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import (
    DataError,
    DegenerateInputError,
    InsufficientDataError,
    InsufficientPopulationError,
)

INDICATORS = (
    "low_edu",
    "low_income",
    "social_assistance",
    "unemployed",
    "low_skill",
)
SHARE_COLUMNS = tuple(f"share_{name}" for name in INDICATORS)
# sign convention anchor: higher score must mean more disadvantage
_SIGN_ANCHOR = SHARE_COLUMNS.index("share_social_assistance")


@dataclass
class GridIndex:
    """Population and indicator counts per occupied square."""

    coords: np.ndarray            # (S, 2) int64
    counts: np.ndarray            # (S, 6): population then the five indicators
    index_of: dict[tuple[int, int], int] = field(default_factory=dict)

    @property
    def total_population(self) -> int:
        return int(self.counts[:, 0].sum())

    def counts_at(self, square: tuple[int, int]) -> np.ndarray:
        i = self.index_of.get((int(square[0]), int(square[1])))
        if i is None:
            return np.zeros(6, dtype=np.int64)
        return self.counts[i]


def build_grid_index(records: pd.DataFrame) -> GridIndex:
    """Tally adult residents and indicator flags per square.

    ``records`` needs columns grid_x, grid_y, adult and the five indicator
    flags. A flagged record with adult == 0 is a data error; unflagged
    non-adult records are skipped.
    """
    required = ["grid_x", "grid_y", "adult", *INDICATORS]
    missing = [c for c in required if c not in records.columns]
    if missing:
        raise DataError(f"residence records missing columns {missing}")
    if len(records) == 0:
        return GridIndex(
            coords=np.zeros((0, 2), dtype=np.int64),
            counts=np.zeros((0, 6), dtype=np.int64),
        )
    xy = records[["grid_x", "grid_y"]].to_numpy()
    if np.any(xy < 0) or not np.array_equal(xy, xy.astype(np.int64)):
        raise DataError("grid coordinates must be non-negative integers")
    xy = xy.astype(np.int64)
    flags = records[list(INDICATORS)].to_numpy(dtype=np.int64)
    adult = records["adult"].to_numpy(dtype=np.int64)
    if not np.all((flags == 0) | (flags == 1)) or not np.all(
        (adult == 0) | (adult == 1)
    ):
        raise DataError("adult and indicator flags must be 0/1")
    bad = (adult == 0) & (flags.sum(axis=1) > 0)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise DataError(
            f"record {row} has an indicator flag but zero adult weight"
        )
    keep = adult > 0
    xy, flags = xy[keep], flags[keep]
    squares, inverse = np.unique(xy, axis=0, return_inverse=True)
    counts = np.zeros((len(squares), 6), dtype=np.int64)
    np.add.at(counts[:, 0], inverse, 1)
    for j in range(5):
        np.add.at(counts[:, j + 1], inverse, flags[:, j])
    return GridIndex(
        coords=squares,
        counts=counts,
        index_of={(int(x), int(y)): i for i, (x, y) in enumerate(squares)},
    )


@dataclass
class NeighborhoodShares:
    person_id: int | None
    neighbor_count: int
    shares: np.ndarray            # (5,) aligned with INDICATORS

    def as_dict(self) -> dict[str, float]:
        out = {"neighbor_count": self.neighbor_count}
        out.update({c: float(s) for c, s in zip(SHARE_COLUMNS, self.shares)})
        return out


def _ring_order(index: GridIndex, ego_square: tuple[int, int]):
    """Squares grouped into rings of equal squared distance, nearest first."""
    dx = index.coords[:, 0] - int(ego_square[0])
    dy = index.coords[:, 1] - int(ego_square[1])
    d2 = dx * dx + dy * dy
    order = np.argsort(d2, kind="stable")
    return order, d2[order]


def accumulate_rings(
    index: GridIndex, ego_square: tuple[int, int], target: int
) -> tuple[np.ndarray, list[int]]:
    """Accumulate whole rings until population >= target.

    Returns the summed (6,) counts and the list of square row indices taken.
    """
    order, d2 = _ring_order(index, ego_square)
    total = np.zeros(6, dtype=np.int64)
    taken: list[int] = []
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and d2[j] == d2[i]:
            j += 1
        ring = order[i:j]
        total += index.counts[ring].sum(axis=0)
        taken.extend(int(r) for r in ring)
        if total[0] >= target:
            return total, taken
        i = j
    raise InsufficientPopulationError(
        f"indexed population {int(total[0])} cannot reach k={target} "
        f"(shortfall {target - int(total[0])})"
    )


def k_nearest_aggregate(
    index: GridIndex,
    ego_square: tuple[int, int],
    k: int,
    exclude: np.ndarray | None = None,
    person_id: int | None = None,
) -> NeighborhoodShares:
    """Shares over the k-nearest accumulated neighbors of one ego square.

    ``exclude`` is an optional (6,) count vector for the ego's own record;
    when given, the ego is removed from the accumulated counts and the
    stopping rule targets k neighbors net of the ego.
    """
    if k < 1:
        raise DegenerateInputError("k must be >= 1")
    excl = np.zeros(6, dtype=np.int64) if exclude is None else np.asarray(exclude)
    target = k + int(excl[0])
    total, _ = accumulate_rings(index, ego_square, target)
    total = total - excl
    if total[0] <= 0:
        raise InsufficientPopulationError("no neighbors left after ego exclusion")
    return NeighborhoodShares(
        person_id=person_id,
        neighbor_count=int(total[0]),
        shares=total[1:] / total[0],
    )


def neighborhood_shares_table(
    index: GridIndex, egos: pd.DataFrame, k: int
) -> pd.DataFrame:
    """Batch shares for a frame of egos; the ego's own record is excluded.

    ``egos`` carries person_id, grid_x, grid_y, adult and the indicator
    flags (the same rows the index was built from). Ring expansion is
    cached per occupied square.
    """
    cache: dict[tuple[int, int, int], np.ndarray] = {}
    rows = []
    xs = egos["grid_x"].to_numpy(dtype=np.int64)
    ys = egos["grid_y"].to_numpy(dtype=np.int64)
    adult = egos["adult"].to_numpy(dtype=np.int64)
    flags = egos[list(INDICATORS)].to_numpy(dtype=np.int64)
    pids = egos["person_id"].to_numpy(dtype=np.int64)
    for i in range(len(egos)):
        # an indexed (adult) ego inflates the target by one, then nets out
        target = k + int(adult[i] > 0)
        key = (int(xs[i]), int(ys[i]), target)
        total = cache.get(key)
        if total is None:
            total, _ = accumulate_rings(index, key[:2], target)
            cache[key] = total
        own = np.concatenate(([adult[i]], flags[i] * adult[i]))
        net = total - own
        rows.append(
            {
                "person_id": int(pids[i]),
                "neighbor_count": int(net[0]),
                **{c: net[j + 1] / net[0] for j, c in enumerate(SHARE_COLUMNS)},
            }
        )
    return pd.DataFrame(rows)


@dataclass
class PcaDiagnostics:
    wave: int
    loadings: np.ndarray          # (5,)
    variance_explained: float
    flipped: bool
    score_min: float              # raw PC score range used for the rescale
    score_max: float

    def as_dict(self) -> dict:
        return {
            "wave": self.wave,
            "loadings": {c: float(v) for c, v in zip(SHARE_COLUMNS, self.loadings)},
            "variance_explained": self.variance_explained,
            "sign_flipped": self.flipped,
            "score_min": self.score_min,
            "score_max": self.score_max,
        }


def disadvantage_scores(
    shares: np.ndarray, wave: int = 0
) -> tuple[np.ndarray, PcaDiagnostics]:
    """First-PC disadvantage score for one wave of shares.

    Columns are standardized, the first principal component is extracted
    from an SVD of the standardized matrix, the loading vector is flipped
    if needed so that the social-assistance share loads positively, and
    scores are min-max rescaled to [0, 1] within the wave.
    """
    shares = np.asarray(shares, dtype=np.float64)
    if shares.ndim != 2 or shares.shape[1] != 5:
        raise DegenerateInputError("expected an (n, 5) share matrix")
    n = shares.shape[0]
    if n < 2:
        raise InsufficientDataError("PCA needs at least 2 egos")
    mean = shares.mean(axis=0)
    sd = shares.std(axis=0, ddof=1)
    dead = np.flatnonzero(sd <= 1e-12)
    if dead.size:
        raise DegenerateInputError(
            f"zero-variance share column {SHARE_COLUMNS[int(dead[0])]}"
        )
    z = (shares - mean) / sd
    _, svals, vt = np.linalg.svd(z / np.sqrt(n - 1), full_matrices=False)
    loading = vt[0]
    flipped = loading[_SIGN_ANCHOR] < 0
    if flipped:
        loading = -loading
    explained = float(svals[0] ** 2 / np.sum(svals**2))
    raw = z @ loading
    lo, hi = float(raw.min()), float(raw.max())
    if hi - lo <= 0:
        raise DegenerateInputError("all egos share one PC score; cannot rescale")
    scores = (raw - lo) / (hi - lo)
    return scores, PcaDiagnostics(
        wave=wave,
        loadings=loading,
        variance_explained=explained,
        flipped=bool(flipped),
        score_min=lo,
        score_max=hi,
    )


def neighborhoods_from_residences(
    residences: pd.DataFrame, k: int
) -> tuple[pd.DataFrame, list[PcaDiagnostics]]:
    """Full per-wave pipeline: index, k-NN shares, PCA score.

    Returns the neighborhoods table (person_id, wave, neighbor_count, five
    shares, score) and per-wave PCA diagnostics.
    """
    out = []
    diagnostics = []
    for wave in sorted(residences["wave"].unique()):
        sub = residences[residences["wave"] == wave]
        index = build_grid_index(sub)
        table = neighborhood_shares_table(index, sub, k)
        scores, diag = disadvantage_scores(
            table[list(SHARE_COLUMNS)].to_numpy(), wave=int(wave)
        )
        table.insert(1, "wave", int(wave))
        table["score"] = scores
        out.append(table)
        diagnostics.append(diag)
    return pd.concat(out, ignore_index=True), diagnostics
