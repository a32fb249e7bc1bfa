"""Binary-classification metrics and report emission.

Accepted answers are the positive class throughout.  Rates with a zero
denominator come back as 0.0 together with a defined/undefined flag, so
downstream tables can mark them rather than hide them.  All emitted
files are byte-deterministic for identical inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .features import format_value

METRICS_SCHEMA_VERSION = 1

# Full-corpus baseline (249,588 answers); desk-scale runs are not
# expected to land on these, they are printed alongside for context.
REFERENCE_RESULTS = {
    "random-forest": {
        "smote": {"accuracy": 0.717, "precision": 0.8825, "recall": 0.7329, "mcc": 0.39},
        "adasyn": {"accuracy": 0.706, "precision": 0.8504, "recall": 0.7107},
    },
    "mlp": {
        "smote": {"accuracy": 0.709, "precision": 0.8729, "recall": 0.7215, "mcc": 0.34},
        "adasyn": {"accuracy": 0.698, "precision": 0.8313, "recall": 0.6945},
    },
}


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise MetricsError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(y_true, y_pred) -> ConfusionMatrix:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise MetricsError("y_true and y_pred lengths differ")
    for arr in (y_true, y_pred):
        if not np.isin(arr, (0, 1)).all():
            raise MetricsError("labels must be 0/1")
    return ConfusionMatrix(
        tp=int(np.sum((y_true == 1) & (y_pred == 1))),
        fp=int(np.sum((y_true == 0) & (y_pred == 1))),
        tn=int(np.sum((y_true == 0) & (y_pred == 0))),
        fn=int(np.sum((y_true == 1) & (y_pred == 0))),
    )


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise MetricsError("empty confusion matrix")
    return (cm.tp + cm.tn) / cm.total


def precision(cm: ConfusionMatrix) -> float:
    denom = cm.tp + cm.fp
    return cm.tp / denom if denom else 0.0


def precision_defined(cm: ConfusionMatrix) -> bool:
    return cm.tp + cm.fp > 0


def recall(cm: ConfusionMatrix) -> float:
    denom = cm.tp + cm.fn
    return cm.tp / denom if denom else 0.0


def recall_defined(cm: ConfusionMatrix) -> bool:
    return cm.tp + cm.fn > 0


def mcc(cm: ConfusionMatrix) -> float:
    """(tp*tn - fp*fn) / sqrt of the four marginal products; 0 when any
    marginal is empty."""
    factors = (
        (cm.tp + cm.fp) * (cm.tp + cm.fn) * (cm.tn + cm.fp) * (cm.tn + cm.fn)
    )
    if factors == 0:
        return 0.0
    return (cm.tp * cm.tn - cm.fp * cm.fn) / math.sqrt(factors)


@dataclass(frozen=True)
class RocCurve:
    points: tuple  # (fpr, tpr, threshold), fpr ascending, ends at (1, 1)
    auc: float


def roc(y_true, scores) -> RocCurve:
    """Threshold sweep over the distinct scores, highest first.

    The curve starts at (0, 0) with an infinite threshold and gains one
    point per distinct score, so it always carries
    distinct-score-count + 1 points.  AUC is the trapezoid area, which
    equals the probability a random positive outscores a random
    negative with ties counted half.
    """
    y = np.asarray(y_true)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape:
        raise MetricsError("labels and scores lengths differ")
    if not np.isin(y, (0, 1)).all():
        raise MetricsError("labels must be 0/1")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("roc needs both classes present")

    order = np.argsort(-s, kind="stable")
    ys = y[order]
    ss = s[order]
    cum_pos = np.cumsum(ys)
    boundaries = np.nonzero(np.append(ss[1:] != ss[:-1], True))[0]

    points = [(0.0, 0.0, math.inf)]
    for i in boundaries:
        tp = int(cum_pos[i])
        fp = int(i + 1 - tp)
        points.append((fp / n_neg, tp / n_pos, float(ss[i])))

    area = 0.0
    for (fpr0, tpr0, _), (fpr1, tpr1, _) in zip(points, points[1:]):
        area += (fpr1 - fpr0) * (tpr0 + tpr1) / 2.0
    return RocCurve(points=tuple(points), auc=area)


@dataclass(frozen=True)
class ModelEval:
    """Metrics of one model under one sampling method."""

    model: str
    sampler: str
    cm: ConfusionMatrix
    roc: RocCurve

    @property
    def accuracy(self) -> float:
        return accuracy(self.cm)

    @property
    def precision(self) -> float:
        return precision(self.cm)

    @property
    def recall(self) -> float:
        return recall(self.cm)

    @property
    def mcc(self) -> float:
        return mcc(self.cm)


def evaluate_model(model: str, sampler: str, y_true, scores, threshold: float = 0.5):
    y_pred = (np.asarray(scores, dtype=np.float64) >= threshold).astype(np.int64)
    return ModelEval(
        model=model,
        sampler=sampler,
        cm=confusion(y_true, y_pred),
        roc=roc(y_true, scores),
    )


@dataclass
class EvalReport:
    evals: tuple  # ModelEval entries
    importance: object = None  # learners.ImportanceReport or None
    info_gain_bits: dict | None = None  # feature -> bits, optional
    meta: dict | None = None  # split sizes and similar context


_SAMPLER_COLORS = {"none": "#7f7f7f", "smote": "#1f77b4", "adasyn": "#2ca02c"}
_FALLBACK_COLORS = ("#d62728", "#9467bd", "#8c564b", "#e377c2")


def _pct(v: float) -> str:
    return f"{100.0 * v:.2f}%"


def _metrics_table(report: EvalReport) -> list:
    lines = [
        "| Model | Sampler | Accuracy | Precision | Recall | MCC | AUC |",
        "| --- | --- | --- | --- | --- | --- | --- |",
    ]
    for ev in report.evals:
        prec = _pct(ev.precision) if precision_defined(ev.cm) else "undefined"
        rec = _pct(ev.recall) if recall_defined(ev.cm) else "undefined"
        lines.append(
            f"| {ev.model} | {ev.sampler} | {_pct(ev.accuracy)} | {prec} | {rec} "
            f"| {ev.mcc:.3f} | {ev.roc.auc:.3f} |"
        )
    return lines


def _report_markdown(report: EvalReport) -> str:
    lines = ["# Evaluation report", ""]
    if report.meta:
        for key in sorted(report.meta):
            lines.append(f"- {key}: {report.meta[key]}")
        lines.append("")
    lines.append("## Test-split metrics")
    lines.append("")
    lines.extend(_metrics_table(report))
    lines.append("")
    lines.append("## Confusion matrices")
    lines.append("")
    lines.append("| Model | Sampler | TP | FP | TN | FN |")
    lines.append("| --- | --- | --- | --- | --- | --- |")
    for ev in report.evals:
        cm = ev.cm
        lines.append(
            f"| {ev.model} | {ev.sampler} | {cm.tp} | {cm.fp} | {cm.tn} | {cm.fn} |"
        )
    lines.append("")
    if report.info_gain_bits:
        lines.append("## Information gain of candidate features (bits)")
        lines.append("")
        lines.append("| Feature | Info gain |")
        lines.append("| --- | --- |")
        ranked = sorted(report.info_gain_bits.items(), key=lambda kv: (-kv[1], kv[0]))
        for name, bits in ranked:
            lines.append(f"| {name} | {bits:.3f} |")
        lines.append("")
    if report.importance is not None:
        imp = report.importance
        lines.append("## Feature weights of the trained models")
        lines.append("")
        lines.append("| Feature | Forest | Network |")
        lines.append("| --- | --- | --- |")
        order = sorted(range(len(imp.names)),
                       key=lambda i: (-imp.forest[i], imp.names[i]))
        for i in order:
            lines.append(
                f"| {imp.names[i]} | {imp.forest[i]:.3f} | {imp.mlp[i]:.3f} |"
            )
        lines.append("")
    lines.append("## Full-corpus reference baseline")
    lines.append("")
    lines.append(
        "Results originally reported for the 249,588-answer corpus; small "
        "fixture runs are not expected to match them."
    )
    lines.append("")
    lines.append("| Model | Sampler | Accuracy | Precision | Recall | MCC |")
    lines.append("| --- | --- | --- | --- | --- | --- |")
    for model in sorted(REFERENCE_RESULTS):
        for sampler in sorted(REFERENCE_RESULTS[model]):
            ref = REFERENCE_RESULTS[model][sampler]
            mcc_cell = f"{ref['mcc']:.2f}" if "mcc" in ref else "-"
            lines.append(
                f"| {model} | {sampler} | {_pct(ref['accuracy'])} "
                f"| {_pct(ref['precision'])} | {_pct(ref['recall'])} | {mcc_cell} |"
            )
    lines.append("")
    return "\n".join(lines)


def _roc_csv(report: EvalReport) -> str:
    rows = ["model,sampler,fpr,tpr,threshold"]
    for ev in report.evals:
        for fpr, tpr, thr in ev.roc.points:
            rows.append(
                f"{ev.model},{ev.sampler},{format_value(fpr)},"
                f"{format_value(tpr)},{format_value(thr)}"
            )
    return "\n".join(rows) + "\n"


def _svg_path(points, width, height, margin):
    coords = []
    for fpr, tpr, _ in points:
        px = margin + fpr * width
        py = margin + (1.0 - tpr) * height
        coords.append(f"{px:.1f},{py:.1f}")
    return " ".join(coords)


def _roc_svg(report: EvalReport) -> str:
    size, margin = 560, 50
    plot = size - 2 * margin
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {size} {size + 30}" '
        f'font-family="sans-serif" font-size="13">',
        f'<rect x="{margin}" y="{margin}" width="{plot}" height="{plot}" '
        'fill="white" stroke="black"/>',
    ]
    for i in range(6):
        frac = i / 5.0
        x = margin + frac * plot
        y = margin + plot - frac * plot
        parts.append(
            f'<text x="{x:.1f}" y="{margin + plot + 18}" text-anchor="middle">'
            f"{frac:.1f}</text>"
        )
        parts.append(
            f'<text x="{margin - 8}" y="{y:.1f}" text-anchor="end" '
            f'dominant-baseline="middle">{frac:.1f}</text>'
        )
    parts.append(
        f'<text x="{margin + plot / 2:.1f}" y="{size + 20}" text-anchor="middle">'
        "False positive rate</text>"
    )
    parts.append(
        f'<text x="14" y="{margin + plot / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {margin + plot / 2:.1f})">True positive rate</text>'
    )
    parts.append(
        f'<line x1="{margin}" y1="{margin + plot}" x2="{margin + plot}" y2="{margin}" '
        'stroke="#d62728" stroke-dasharray="6,4"/>'
    )
    fallback = 0
    for idx, ev in enumerate(report.evals):
        color = _SAMPLER_COLORS.get(ev.sampler)
        if color is None:
            color = _FALLBACK_COLORS[fallback % len(_FALLBACK_COLORS)]
            fallback += 1
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="2" '
            f'points="{_svg_path(ev.roc.points, plot, plot, margin)}"/>'
        )
        ly = margin + 16 + 18 * idx
        parts.append(
            f'<rect x="{margin + plot - 190}" y="{ly - 10}" width="24" height="4" '
            f'fill="{color}"/>'
        )
        parts.append(
            f'<text x="{margin + plot - 160}" y="{ly}">'
            f"{ev.model} / {ev.sampler} (AUC {ev.roc.auc:.3f})</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def report_to_dict(report: EvalReport) -> dict:
    payload = {
        "schema_version": METRICS_SCHEMA_VERSION,
        "evals": [
            {
                "model": ev.model,
                "sampler": ev.sampler,
                "confusion": {"tp": ev.cm.tp, "fp": ev.cm.fp,
                              "tn": ev.cm.tn, "fn": ev.cm.fn},
                "accuracy": ev.accuracy,
                "precision": ev.precision,
                "precision_defined": precision_defined(ev.cm),
                "recall": ev.recall,
                "recall_defined": recall_defined(ev.cm),
                "mcc": ev.mcc,
                "auc": ev.roc.auc,
                "n_test_rows": ev.cm.total,
            }
            for ev in report.evals
        ],
        "reference": REFERENCE_RESULTS,
        "importance": None,
        "info_gain_bits": report.info_gain_bits,
        "meta": report.meta or {},
    }
    if report.importance is not None:
        payload["importance"] = {
            "names": list(report.importance.names),
            "forest": list(report.importance.forest),
            "mlp": list(report.importance.mlp),
        }
    return payload


def emit_report(report: EvalReport, out_dir) -> list:
    """Write report.md, roc.csv, roc.svg, and metrics.json into out_dir."""
    if not report.evals:
        raise MetricsError("report has no model evaluations to emit")
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "report.md": _report_markdown(report),
        "roc.csv": _roc_csv(report),
        "roc.svg": _roc_svg(report),
        "metrics.json": json.dumps(report_to_dict(report), indent=2,
                                   sort_keys=True, ensure_ascii=False) + "\n",
    }
    written = []
    for name in sorted(files):
        path = out / name
        path.write_text(files[name], encoding="utf-8")
        written.append(path)
    return written
