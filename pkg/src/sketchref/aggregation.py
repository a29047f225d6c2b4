"""mRS@alpha aggregation and benchmark-report assembly.

mRS@alpha is the mean recognizability over a sketch set where only
sketches with SR strictly above alpha contribute to the numerator while
every sketch stays in the denominator: raising alpha demands simpler
sketches and can only lower the score. Reports lay the metric out as a
method x (task, domain) grid with per-method averages, the shape used
to compare synthesis methods.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from sketchref.core import Domain, SketchRefError, Task

#: Canonical column order of the report grid.
REPORT_CELLS: tuple[tuple[Task, Domain], ...] = (
    (Task.STRUCTURE, Domain.HUMAN),
    (Task.STRUCTURE, Domain.FACE),
    (Task.STRUCTURE, Domain.ANIMAL),
    (Task.CATEGORY, Domain.ANIMAL),
    (Task.CATEGORY, Domain.THINGS),
)


@dataclass(frozen=True)
class MetricRecord:
    """Per-sketch results: recognizability r, simplicity ratio sr, tags."""

    item_id: str
    method: str
    domain: Domain
    task: Task
    r: float
    sr: float
    complexity_method: str

    def __post_init__(self) -> None:
        if self.sr <= 0:
            raise SketchRefError(
                f"record {self.item_id!r}: sr must be positive, got {self.sr}"
            )
        if self.task is Task.STRUCTURE and not 0.0 <= self.r <= 1.0:
            raise SketchRefError(
                f"record {self.item_id!r}: structure r must be in [0, 1], "
                f"got {self.r}"
            )


def record_to_dict(rec: MetricRecord) -> dict[str, Any]:
    return {
        "item_id": rec.item_id,
        "method": rec.method,
        "domain": rec.domain.value,
        "task": rec.task.value,
        "r": rec.r,
        "sr": rec.sr,
        "complexity_method": rec.complexity_method,
    }


def record_from_dict(d: dict[str, Any]) -> MetricRecord:
    try:
        return MetricRecord(
            item_id=str(d["item_id"]),
            method=str(d["method"]),
            domain=Domain(d["domain"]),
            task=Task(d["task"]),
            r=float(d["r"]),
            sr=float(d["sr"]),
            complexity_method=str(d["complexity_method"]),
        )
    except KeyError as exc:
        raise SketchRefError(f"metric record missing field {exc}") from exc
    except ValueError as exc:
        raise SketchRefError(f"malformed metric record: {exc}") from exc


def load_metric_records(path: Any) -> list[MetricRecord]:
    """Read a line-delimited JSON metrics file."""
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SketchRefError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            records.append(record_from_dict(d))
    return records


def mrs_at_alpha(records: Sequence[MetricRecord], alpha: float) -> float:
    """(1/N) sum r_i * [sr_i > alpha]; filtered records keep their
    denominator slot, and the inequality is strict."""
    if not records:
        raise SketchRefError("mrs_at_alpha requires at least one record")
    if alpha < 0:
        raise SketchRefError(f"alpha must be >= 0, got {alpha}")
    cells = {(r.method, r.task, r.domain) for r in records}
    if len(cells) > 1:
        raise SketchRefError(
            f"records must be homogeneous in (method, task, domain); got {sorted(str(c) for c in cells)}"
        )
    total = sum(r.r for r in records if r.sr > alpha)
    return total / len(records)


@dataclass(frozen=True)
class BenchmarkReport:
    """mRS@alpha per method and task cell, Table-style."""

    alphas: tuple[float, ...]
    # method -> (task, domain) -> alpha -> percentage
    rows: dict[str, dict[tuple[Task, Domain], dict[float, float]]]
    # method -> alpha -> percentage (mean over that method's cells)
    averages: dict[str, dict[float, float]]
    # row order: by average at the smallest alpha, descending
    method_order: tuple[str, ...]
    metadata: dict[str, Any]


def build_report(
    records: Sequence[MetricRecord],
    alphas: Iterable[float],
    metadata: dict[str, Any] | None = None,
) -> BenchmarkReport:
    """Aggregate records into the benchmark grid over the given alphas."""
    if not records:
        raise SketchRefError("build_report requires at least one record")
    alpha_list = tuple(sorted({float(a) for a in alphas}))
    if not alpha_list:
        raise SketchRefError("at least one alpha is required")
    if alpha_list[0] < 0:
        raise SketchRefError("alphas must be non-negative")

    # Sort before folding so upstream parallelism cannot reorder sums.
    # Ids are unique per manifest; r and sr break ties for degenerate inputs.
    ordered = sorted(records, key=lambda r: (r.item_id, r.r, r.sr))
    by_cell: dict[tuple[str, Task, Domain], list[MetricRecord]] = {}
    for rec in ordered:
        by_cell.setdefault((rec.method, rec.task, rec.domain), []).append(rec)

    rows: dict[str, dict[tuple[Task, Domain], dict[float, float]]] = {}
    for (method, task, domain), cell_records in by_cell.items():
        cell = rows.setdefault(method, {})
        cell[(task, domain)] = {
            a: 100.0 * mrs_at_alpha(cell_records, a) for a in alpha_list
        }

    averages: dict[str, dict[float, float]] = {}
    for method, cells in rows.items():
        averages[method] = {
            a: sum(vals[a] for vals in cells.values()) / len(cells)
            for a in alpha_list
        }

    smallest = alpha_list[0]
    method_order = tuple(
        sorted(rows, key=lambda m: (-averages[m][smallest], m))
    )

    meta = dict(metadata or {})
    meta.setdefault("average_weighting", "equal-per-task-cell")
    meta["alphas"] = list(alpha_list)
    return BenchmarkReport(
        alphas=alpha_list, rows=rows, averages=averages,
        method_order=method_order, metadata=meta,
    )


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _cell_label(task: Task, domain: Domain) -> str:
    return f"{task.value}:{domain.value}"


def report_to_dict(report: BenchmarkReport) -> dict[str, Any]:
    """Full-precision JSON form; cell keys are 'Task:Domain' strings."""
    return {
        "alphas": list(report.alphas),
        "method_order": list(report.method_order),
        "rows": {
            method: {
                _cell_label(task, domain): {str(a): v for a, v in per_alpha.items()}
                for (task, domain), per_alpha in sorted(
                    cells.items(), key=lambda kv: REPORT_CELLS.index(kv[0])
                )
            }
            for method, cells in report.rows.items()
        },
        "averages": {
            method: {str(a): v for a, v in per_alpha.items()}
            for method, per_alpha in report.averages.items()
        },
        "metadata": report.metadata,
    }


def render_report_json(report: BenchmarkReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"


def _fmt(value: float) -> str:
    # Zero renders as "-" in printed tables; JSON keeps the raw value.
    if value == 0.0:
        return "-"
    return f"{value:.2f}"


def _present_cells(report: BenchmarkReport) -> list[tuple[Task, Domain]]:
    used = {cell for cells in report.rows.values() for cell in cells}
    return [cell for cell in REPORT_CELLS if cell in used]


def render_report_markdown(report: BenchmarkReport) -> str:
    cells = _present_cells(report)
    out = io.StringIO()
    for alpha in report.alphas:
        label = f"{alpha:g}"
        out.write(f"### mRS@{label}\n\n")
        headers = ["Method"] + [_cell_label(t, d) for t, d in cells] + ["Average"]
        out.write("| " + " | ".join(headers) + " |\n")
        out.write("|" + "|".join(["---"] * len(headers)) + "|\n")
        for method in report.method_order:
            row = [method]
            for cell in cells:
                per_alpha = report.rows[method].get(cell)
                row.append(_fmt(per_alpha[alpha]) if per_alpha else "-")
            row.append(_fmt(report.averages[method][alpha]))
            out.write("| " + " | ".join(row) + " |\n")
        out.write("\n")
    return out.getvalue()


def render_report_csv(report: BenchmarkReport) -> str:
    cells = _present_cells(report)
    out = io.StringIO()
    headers = ["alpha", "method"] + [_cell_label(t, d) for t, d in cells] + ["average"]
    out.write(",".join(headers) + "\n")
    for alpha in report.alphas:
        for method in report.method_order:
            row = [f"{alpha:g}", method]
            for cell in cells:
                per_alpha = report.rows[method].get(cell)
                row.append(_fmt(per_alpha[alpha]) if per_alpha else "-")
            row.append(_fmt(report.averages[method][alpha]))
            out.write(",".join(row) + "\n")
    return out.getvalue()


RENDERERS = {
    "json": render_report_json,
    "md": render_report_markdown,
    "csv": render_report_csv,
}
