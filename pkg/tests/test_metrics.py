import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from soaccept.learners import ImportanceReport
from soaccept.metrics import (
    REFERENCE_RESULTS,
    ConfusionMatrix,
    EvalReport,
    MetricsError,
    accuracy,
    confusion,
    emit_report,
    evaluate_model,
    mcc,
    precision,
    precision_defined,
    recall,
    recall_defined,
    roc,
)


def test_perfect_predictions():
    y = [0, 1, 1, 0, 1]
    cm = confusion(y, y)
    assert accuracy(cm) == 1.0
    assert precision(cm) == 1.0
    assert recall(cm) == 1.0
    assert mcc(cm) == 1.0


def test_hand_computed_rates():
    cm = ConfusionMatrix(tp=3, fp=1, tn=4, fn=2)
    assert precision(cm) == 0.75
    assert recall(cm) == 0.6
    assert accuracy(cm) == 0.7


def test_all_negative_predictions_zero_with_flag():
    y_true = [1, 0, 1, 0]
    y_pred = [0, 0, 0, 0]
    cm = confusion(y_true, y_pred)
    assert precision(cm) == 0.0
    assert not precision_defined(cm)
    assert recall(cm) == 0.0
    assert recall_defined(cm)


def test_confusion_validation():
    with pytest.raises(MetricsError, match="lengths"):
        confusion([0, 1], [0, 1, 1])
    with pytest.raises(MetricsError, match="0/1"):
        confusion([0, 2], [0, 1])
    with pytest.raises(MetricsError):
        ConfusionMatrix(tp=-1, fp=0, tn=0, fn=0)


def test_mcc_balanced_mistakes_is_zero():
    assert mcc(ConfusionMatrix(tp=4, fp=4, tn=4, fn=4)) == 0.0


def test_mcc_zero_factor_is_zero():
    assert mcc(ConfusionMatrix(tp=0, fp=0, tn=5, fn=3)) == 0.0


def test_reference_constants_frozen():
    rf = REFERENCE_RESULTS["random-forest"]
    nn = REFERENCE_RESULTS["mlp"]
    assert rf["smote"]["accuracy"] == 0.717
    assert rf["adasyn"]["accuracy"] == 0.706
    assert nn["smote"]["accuracy"] == 0.709
    assert nn["adasyn"]["accuracy"] == 0.698
    assert rf["smote"]["precision"] == 0.8825
    assert rf["smote"]["recall"] == 0.7329
    assert rf["smote"]["mcc"] == 0.39
    assert nn["smote"]["mcc"] == 0.34


counts = st.integers(min_value=0, max_value=40)


@given(tp=counts, fp=counts, tn=counts, fn=counts)
def test_mcc_class_swap_symmetry(tp, fp, tn, fn):
    a = mcc(ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn))
    b = mcc(ConfusionMatrix(tp=tn, fp=fn, tn=tp, fn=fp))
    assert math.isclose(a, b, rel_tol=0, abs_tol=1e-12)


@given(tp=counts, fp=counts, tn=counts, fn=counts)
def test_accuracy_identity(tp, fp, tn, fn):
    if tp + fp + tn + fn == 0:
        return
    cm = ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)
    assert accuracy(cm) == (tp + tn) / cm.total
    # complement form only agrees to rounding (1 - 2/3 != 1/3 exactly)
    assert math.isclose(accuracy(cm), 1.0 - (fp + fn) / cm.total, abs_tol=1e-15)


def _auc_by_pairs(y, s):
    pos = [sv for yv, sv in zip(y, s) if yv == 1]
    neg = [sv for yv, sv in zip(y, s) if yv == 0]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


def test_roc_perfect_ranking():
    curve = roc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9])
    assert curve.auc == 1.0
    assert curve.points[0] == (0.0, 0.0, math.inf)
    assert curve.points[-1][:2] == (1.0, 1.0)


def test_roc_constant_scores():
    curve = roc([0, 1, 0, 1], [0.4, 0.4, 0.4, 0.4])
    assert curve.auc == 0.5
    assert len(curve.points) == 2  # (0,0) plus the single threshold


def test_roc_three_sample_example():
    curve = roc([1, 0, 1], [0.9, 0.8, 0.7])
    assert curve.auc == 0.5
    assert len(curve.points) == 4


def test_roc_rejects_single_class():
    with pytest.raises(MetricsError, match="both classes"):
        roc([1, 1, 1], [0.1, 0.5, 0.9])


def test_roc_point_count_is_distinct_scores_plus_one():
    y = [0, 1, 0, 1, 1, 0]
    s = [0.1, 0.9, 0.1, 0.5, 0.9, 0.3]
    curve = roc(y, s)
    assert len(curve.points) == len(set(s)) + 1


@settings(deadline=None, max_examples=120)
@given(st.lists(st.tuples(st.integers(0, 1),
                          st.floats(0, 1, allow_nan=False, width=32)),
                min_size=2, max_size=60).filter(
                    lambda ps: 0 < sum(y for y, _ in ps) < len(ps)))
def test_roc_matches_pair_counting_oracle(pairs):
    y = [p[0] for p in pairs]
    s = [float(p[1]) for p in pairs]
    curve = roc(y, s)
    fprs = [p[0] for p in curve.points]
    tprs = [p[1] for p in curve.points]
    assert fprs == sorted(fprs)
    assert tprs == sorted(tprs)
    assert curve.points[0][:2] == (0.0, 0.0)
    assert curve.points[-1][:2] == (1.0, 1.0)
    assert abs(curve.auc - _auc_by_pairs(y, s)) < 1e-12


def _toy_report():
    rng = np.random.default_rng(3)
    y = (rng.random(40) < 0.4).astype(np.int64)
    noisy = np.clip(0.55 * y + 0.3 * rng.random(40), 0.0, 1.0)
    evals = (
        evaluate_model("random-forest", "smote", y, noisy),
        evaluate_model("mlp", "adasyn", y, 1.0 - noisy * 0.5),
    )
    importance = ImportanceReport(
        names=("Score", "Reputation"), forest=(0.7, 0.3), mlp=(0.4, 0.6))
    return EvalReport(
        evals=evals,
        importance=importance,
        info_gain_bits={"Score": 0.51, "Reputation": 0.42},
        meta={"test_rows": 40},
    )


def test_evaluate_model_threshold():
    ev = evaluate_model("random-forest", "none", [0, 1, 1], [0.4, 0.5, 0.9])
    assert ev.cm == ConfusionMatrix(tp=2, fp=0, tn=1, fn=0)


def test_emit_report_writes_all_files(tmp_path):
    report = _toy_report()
    written = emit_report(report, tmp_path)
    names = sorted(p.name for p in written)
    assert names == ["metrics.json", "report.md", "roc.csv", "roc.svg"]
    payload = json.loads((tmp_path / "metrics.json").read_text())
    assert payload["schema_version"] == 1
    assert len(payload["evals"]) == 2
    assert payload["reference"] == REFERENCE_RESULTS
    md = (tmp_path / "report.md").read_text()
    assert "| Model | Sampler | Accuracy |" in md
    assert "Full-corpus reference baseline" in md
    assert "| Score |" in md
    svg = (tmp_path / "roc.svg").read_text()
    assert svg.startswith("<svg")
    assert "polyline" in svg


def test_emit_report_is_byte_deterministic(tmp_path):
    report = _toy_report()
    emit_report(report, tmp_path / "a")
    emit_report(report, tmp_path / "b")
    for name in ("report.md", "roc.csv", "roc.svg", "metrics.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_roc_csv_rows(tmp_path):
    report = _toy_report()
    emit_report(report, tmp_path)
    lines = (tmp_path / "roc.csv").read_text().splitlines()
    assert lines[0] == "model,sampler,fpr,tpr,threshold"
    expected = sum(len(ev.roc.points) for ev in report.evals)
    assert len(lines) == 1 + expected


def test_emit_report_requires_evals(tmp_path):
    with pytest.raises(MetricsError, match="no model evaluations"):
        emit_report(EvalReport(evals=()), tmp_path)
