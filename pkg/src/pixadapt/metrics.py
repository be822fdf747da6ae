"""Evaluation metrics and report emission.

IoU and localization-accuracy-at-a-radius are the two quantities reported;
multi-label aggregation folds per-label binary predictions into one mask.
Reports are written as JSON, an aligned plain-text table, a CSV, and a
bar-chart figure rendered to PNG.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .formats import LabelMask


@dataclass(frozen=True)
class LocalizationCase:
    """One landmark prediction against ground truth; predicted may be absent."""

    predicted: tuple[int, int] | None
    ground_truth: tuple[int, int]
    label: int
    slice_id: str = ""


@dataclass(frozen=True)
class LabelMetrics:
    iou: float | None = None
    localization_accuracy: float | None = None
    cases: int = 0

    def __post_init__(self) -> None:
        for name, value in (("iou", self.iou), ("localization_accuracy", self.localization_accuracy)):
            if value is not None and not 0.0 <= value <= 1.0:
                raise DataError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class MetricReport:
    task: str
    adapter: str
    per_label: dict[int, LabelMetrics]
    aggregate: LabelMetrics
    radius: float
    seeds: dict[str, int] = field(default_factory=dict)
    config_hash: str = ""

    def __post_init__(self) -> None:
        if not self.per_label:
            raise DataError("report needs a non-empty per-label section")


def iou(pred: np.ndarray, gt: np.ndarray) -> float:
    """Intersection over union of two binary masks; 1.0 when both are empty."""
    pred = np.asarray(pred).astype(bool)
    gt = np.asarray(gt).astype(bool)
    if pred.shape != gt.shape:
        raise DataError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    union = np.logical_or(pred, gt).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(pred, gt).sum() / union)


def localization_accuracy(cases: list[LocalizationCase], radius: float) -> float:
    """Fraction of cases with a prediction strictly within `radius` pixels
    of ground truth (Euclidean); absent predictions count as misses."""
    if not cases:
        raise DataError("localization accuracy needs at least one case")
    if radius <= 0:
        raise DataError(f"radius must be > 0, got {radius}")
    hits = 0
    for case in cases:
        if case.predicted is None:
            continue
        if math.dist(case.predicted, case.ground_truth) < radius:
            hits += 1
    return hits / len(cases)


def aggregate_binary_multilabel(
    per_label: list[tuple[int, np.ndarray, np.ndarray]],
) -> LabelMask:
    """Fold binary per-label claims into one mask.

    Each entry is (label, binary mask, per-pixel score grid).  A pixel
    claimed by several labels goes to the one with the highest score there;
    ties break toward the lower label index.
    """
    if not per_label:
        raise DataError("need at least one per-label claim")
    labels = [lab for lab, _, _ in per_label]
    if len(set(labels)) != len(labels):
        raise DataError(f"duplicate labels in aggregation: {sorted(labels)}")
    shape = np.asarray(per_label[0][1]).shape
    out = np.zeros(shape, dtype=np.uint8)
    best = np.full(shape, -np.inf)
    for label, mask, scores in sorted(per_label, key=lambda t: t[0]):
        mask = np.asarray(mask).astype(bool)
        scores = np.asarray(scores, dtype=np.float64)
        if mask.shape != shape or scores.shape != shape:
            raise DataError(f"label {label}: mask/score shape differs from {shape}")
        claim = mask & (scores > best)
        out[claim] = label
        best[claim] = scores[claim]
    return LabelMask(out, max(labels))


def _metrics_dict(m: LabelMetrics) -> dict:
    return {
        "iou": m.iou,
        "localization_accuracy": m.localization_accuracy,
        "cases": m.cases,
    }


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.3f}"


def render_table(report: MetricReport) -> str:
    """Aligned plain-text table, ratios to three decimals."""
    rows = [("label", "iou", "loc_acc", "cases")]
    for label in sorted(report.per_label):
        m = report.per_label[label]
        rows.append((str(label), _fmt(m.iou), _fmt(m.localization_accuracy), str(m.cases)))
    m = report.aggregate
    rows.append(("all", _fmt(m.iou), _fmt(m.localization_accuracy), str(m.cases)))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = [
        f"task={report.task} adapter={report.adapter} radius={report.radius:g} "
        f"config={report.config_hash}"
    ]
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render_csv(report: MetricReport) -> str:
    lines = ["label,iou,localization_accuracy,cases"]
    for label in sorted(report.per_label):
        m = report.per_label[label]
        lines.append(f"{label},{_fmt(m.iou)},{_fmt(m.localization_accuracy)},{m.cases}")
    m = report.aggregate
    lines.append(f"all,{_fmt(m.iou)},{_fmt(m.localization_accuracy)},{m.cases}")
    return "\n".join(lines) + "\n"


def render_figure(report: MetricReport, path: str | Path) -> None:
    """Bar chart of per-label metrics, written as PNG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = sorted(report.per_label)
    names = [str(lab) for lab in labels] + ["all"]
    series = {
        "IoU": [report.per_label[lab].iou for lab in labels] + [report.aggregate.iou],
        "loc acc": [report.per_label[lab].localization_accuracy for lab in labels]
        + [report.aggregate.localization_accuracy],
    }
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(names)), 3.2))
    x = np.arange(len(names), dtype=float)
    width = 0.38
    for i, (name, values) in enumerate(series.items()):
        xs = [xv for xv, v in zip(x, values) if v is not None]
        vs = [v for v in values if v is not None]
        if vs:
            ax.bar(np.asarray(xs) + (i - 0.5) * width, vs, width, label=name)
    ax.set_xticks(x)
    ax.set_xticklabels(names)
    ax.set_ylim(0.0, 1.05)
    ax.set_xlabel("label")
    ax.set_ylabel("ratio")
    ax.set_title(f"{report.task} / {report.adapter}")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def emit_report(report: MetricReport, path: str | Path, figure: bool = True) -> dict[str, Path]:
    """Write report.json plus .txt/.csv siblings and the PNG figure.

    `path` names the JSON file; siblings replace its suffix.  Returns the
    mapping of artifact kind to path.
    """
    path = Path(path)
    payload = {
        "task": report.task,
        "adapter": report.adapter,
        "per_label": {str(k): _metrics_dict(v) for k, v in sorted(report.per_label.items())},
        "aggregate": _metrics_dict(report.aggregate),
        "radius": report.radius,
        "seeds": {k: int(v) for k, v in sorted(report.seeds.items())},
        "config_hash": report.config_hash,
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    txt = path.with_suffix(".txt")
    txt.write_text(render_table(report))
    csv = path.with_suffix(".csv")
    csv.write_text(render_csv(report))
    out = {"json": path, "txt": txt, "csv": csv}
    if figure:
        png = path.with_suffix(".png")
        render_figure(report, png)
        out["figure"] = png
    return out


def read_report(path: str | Path) -> MetricReport:
    """Read back a JSON report written by emit_report."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed report: {exc}") from exc
    try:
        per_label = {
            int(k): LabelMetrics(v["iou"], v["localization_accuracy"], v["cases"])
            for k, v in payload["per_label"].items()
        }
        agg = payload["aggregate"]
        return MetricReport(
            payload["task"],
            payload["adapter"],
            per_label,
            LabelMetrics(agg["iou"], agg["localization_accuracy"], agg["cases"]),
            payload["radius"],
            {k: int(v) for k, v in payload.get("seeds", {}).items()},
            payload.get("config_hash", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed report: {exc}") from exc
