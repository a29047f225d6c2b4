"""Human-assessment ingestion and correlation validation.

Human judgments arrive either as 5-point ratings or as rank positions
within a 5-option set. Per-sketch scores reduce to one value (mean
rating, or the frequency-weighted Average Rank Score), which is then
correlated against a metric's scores with Spearman's rho and Kendall's
tau to measure how well the metric tracks people.

Both coefficients are implemented directly (average ranks for rho,
tau-b for tau) so their tie handling is pinned and testable against
brute-force definitions rather than inherited from a library version.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from sketchref.core import LoadError, SketchRefError

#: Responses required per sketch before its score is trusted.
MIN_RESPONSES_PER_SKETCH = 3

#: Options per ranking question; weights run from RANK_OPTIONS down to 1.
RANK_OPTIONS = 5


class ResponseMode(str, Enum):
    RATING = "rating"
    RANKING = "ranking"


@dataclass(frozen=True)
class HumanResponse:
    """One participant's judgment of one sketch."""

    sketch_id: str
    mode: ResponseMode
    value: int

    def __post_init__(self) -> None:
        if not self.sketch_id:
            raise SketchRefError("response sketch_id must be non-empty")
        if not 1 <= self.value <= RANK_OPTIONS:
            raise SketchRefError(
                f"response value must be in [1, {RANK_OPTIONS}], got {self.value}"
            )

    @property
    def rating(self) -> int:
        if self.mode is not ResponseMode.RATING:
            raise SketchRefError("not a rating response")
        return self.value

    @property
    def rank_position(self) -> int:
        if self.mode is not ResponseMode.RANKING:
            raise SketchRefError("not a ranking response")
        return self.value


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    tau: float
    n: int

    def __post_init__(self) -> None:
        if self.n < 2:
            raise SketchRefError("correlation needs at least 2 samples")
        if abs(self.rho) > 1 + 1e-12 or abs(self.tau) > 1 + 1e-12:
            raise SketchRefError("coefficients must lie in [-1, 1]")


def average_rank_score(responses: Sequence[HumanResponse]) -> float:
    """Frequency-weighted rank score: position p carries weight 6 - p.

    All first-place votes give 5.0; all last-place votes give 1.0.
    """
    if not responses:
        raise SketchRefError("average_rank_score requires at least one response")
    ids = {r.sketch_id for r in responses}
    if len(ids) > 1:
        raise SketchRefError(
            f"responses must target a single sketch, got ids {sorted(ids)}"
        )
    if any(r.mode is not ResponseMode.RANKING for r in responses):
        raise SketchRefError("average_rank_score requires ranking-mode responses")
    total = sum(RANK_OPTIONS + 1 - r.value for r in responses)
    return total / len(responses)


# ---------------------------------------------------------------------------
# Rank correlation coefficients
# ---------------------------------------------------------------------------


def _average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank span."""
    a = np.asarray(values, dtype=np.float64)
    order = np.argsort(a, kind="stable")
    ranks = np.empty(len(a), dtype=np.float64)
    i = 0
    while i < len(a):
        j = i
        while j + 1 < len(a) and a[order[j + 1]] == a[order[i]]:
            j += 1
        # positions i..j (0-based) share rank mean of (i+1)..(j+1)
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of the average-rank vectors."""
    if len(x) != len(y):
        raise SketchRefError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise SketchRefError("spearman_rho needs at least 2 samples")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sx = float(dx @ dx)
    sy = float(dy @ dy)
    if sx == 0.0 or sy == 0.0:
        raise SketchRefError("zero rank variance (all values tied)")
    value = float(dx @ dy) / np.sqrt(sx * sy)
    return float(min(1.0, max(-1.0, value)))


def kendall_tau(x: Sequence[float], y: Sequence[float]) -> float:
    """Tau-b: tie-corrected concordant/discordant pair statistic."""
    if len(x) != len(y):
        raise SketchRefError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 2:
        raise SketchRefError("kendall_tau needs at least 2 samples")
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    # O(n^2) pair enumeration; n here is a handful of methods or a few
    # hundred sketches, never large enough to need the merge-sort form.
    dx = np.sign(xa[:, None] - xa[None, :])
    dy = np.sign(ya[:, None] - ya[None, :])
    iu = np.triu_indices(n, k=1)
    prod = dx[iu] * dy[iu]
    concordant = int((prod > 0).sum())
    discordant = int((prod < 0).sum())
    ties_x = int((dx[iu] == 0).sum())
    ties_y = int((dy[iu] == 0).sum())
    n_pairs = n * (n - 1) // 2
    denom_x = n_pairs - ties_x
    denom_y = n_pairs - ties_y
    if denom_x == 0 or denom_y == 0:
        raise SketchRefError("all values tied in one input")
    value = (concordant - discordant) / np.sqrt(denom_x * denom_y)
    return float(min(1.0, max(-1.0, value)))


def correlate(
    metric_scores: Mapping[str, float], human_scores: Mapping[str, float]
) -> CorrelationResult:
    """Align two score maps on shared sketch ids and correlate them."""
    shared = sorted(set(metric_scores) & set(human_scores))
    if len(shared) < 2:
        raise SketchRefError(
            f"need at least 2 overlapping sketch ids, got {len(shared)}"
        )
    m = [metric_scores[k] for k in shared]
    h = [human_scores[k] for k in shared]
    return CorrelationResult(
        rho=spearman_rho(m, h), tau=kendall_tau(m, h), n=len(shared)
    )


# ---------------------------------------------------------------------------
# Response reduction and CSV ingestion
# ---------------------------------------------------------------------------


def reduce_responses(
    responses: Sequence[HumanResponse],
    min_responses: int = MIN_RESPONSES_PER_SKETCH,
) -> dict[str, float]:
    """One score per sketch: mean rating, or Average Rank Score.

    Every sketch must have at least ``min_responses`` responses and a
    single response mode.
    """
    by_sketch: dict[str, list[HumanResponse]] = {}
    for r in responses:
        by_sketch.setdefault(r.sketch_id, []).append(r)
    out: dict[str, float] = {}
    for sketch_id, group in by_sketch.items():
        if len(group) < min_responses:
            raise SketchRefError(
                f"sketch {sketch_id!r} has {len(group)} responses, "
                f"needs at least {min_responses}"
            )
        modes = {r.mode for r in group}
        if len(modes) > 1:
            raise SketchRefError(f"sketch {sketch_id!r} mixes response modes")
        mode = modes.pop()
        if mode is ResponseMode.RATING:
            out[sketch_id] = sum(r.value for r in group) / len(group)
        else:
            out[sketch_id] = average_rank_score(group)
    return out


def load_scores_csv(path: Path | str) -> dict[str, float]:
    """Read a 'sketch_id,score' CSV into a score map."""
    p = Path(path)
    try:
        with open(p, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or set(reader.fieldnames) != {
                "sketch_id", "score",
            }:
                raise LoadError(
                    f"{p}: expected header 'sketch_id,score', got {reader.fieldnames}"
                )
            out: dict[str, float] = {}
            for row in reader:
                sid = row["sketch_id"]
                if sid in out:
                    raise LoadError(f"{p}: duplicate sketch_id {sid!r}")
                try:
                    out[sid] = float(row["score"])
                except ValueError as exc:
                    raise LoadError(f"{p}: bad score for {sid!r}: {exc}") from exc
    except FileNotFoundError:
        raise LoadError(f"score file not found: {p}") from None
    if not out:
        raise LoadError(f"{p}: no data rows")
    return out


def load_responses_csv(path: Path | str) -> list[HumanResponse]:
    """Read a 'sketch_id,mode,value' CSV of raw responses."""
    p = Path(path)
    responses: list[HumanResponse] = []
    try:
        with open(p, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or set(reader.fieldnames) != {
                "sketch_id", "mode", "value",
            }:
                raise LoadError(
                    f"{p}: expected header 'sketch_id,mode,value', "
                    f"got {reader.fieldnames}"
                )
            for lineno, row in enumerate(reader, start=2):
                try:
                    responses.append(
                        HumanResponse(
                            sketch_id=row["sketch_id"],
                            mode=ResponseMode(row["mode"]),
                            value=int(row["value"]),
                        )
                    )
                except (ValueError, SketchRefError) as exc:
                    raise LoadError(f"{p}:{lineno}: {exc}") from exc
    except FileNotFoundError:
        raise LoadError(f"response file not found: {p}") from None
    if not responses:
        raise LoadError(f"{p}: no data rows")
    return responses


def correlation_to_dict(res: CorrelationResult) -> dict[str, Any]:
    return {"rho": res.rho, "tau": res.tau, "n": res.n}
