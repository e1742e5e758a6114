"""Confusion-matrix metric tests: golden values, oracles, report output."""

from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest

from canine_lab import metrics
from canine_lab.errors import EmptyMatrix, LabelOutOfRange, LengthMismatch
from conftest import REFERENCE_COUNTS, REFERENCE_METRICS


def _brute_force(counts: np.ndarray, values: list[int]) -> dict:
    """Independent exact recomputation of every summary metric."""
    k = counts.shape[0]
    n = int(counts.sum())
    acc = Fraction(int(np.trace(counts)), n)
    recalls, precisions = {}, {}
    for i in range(k):
        support = int(counts[i].sum())
        predicted = int(counts[:, i].sum())
        if support:
            recalls[i] = Fraction(int(counts[i, i]), support)
        if predicted:
            precisions[i] = Fraction(int(counts[i, i]), predicted)
    mae = sum(
        Fraction(int(counts[i, j]) * abs(values[i] - values[j]), n)
        for i in range(k)
        for j in range(k)
    )
    mse = sum(
        Fraction(int(counts[i, j]) * (values[i] - values[j]) ** 2, n)
        for i in range(k)
        for j in range(k)
    )
    macro = sum(recalls.values(), Fraction(0)) / len(recalls)
    weighted = sum(
        Fraction(int(counts[i].sum()), n) * r for i, r in recalls.items()
    )
    return {
        "accuracy": acc,
        "recalls": recalls,
        "precisions": precisions,
        "mae": mae,
        "mse": mse,
        "macro_recall": macro,
        "weighted_recall": weighted,
    }


def test_reference_matrix_golden(reference_counts):
    cm = metrics.ConfusionMatrix(reference_counts, class_names=("1", "2", "3"))
    rep = metrics.evaluate(cm)
    assert rep.accuracy == pytest.approx(REFERENCE_METRICS["accuracy"], abs=1e-4)
    for c, want in zip(rep.per_class, REFERENCE_METRICS["recalls"]):
        assert c.recall == pytest.approx(want, abs=1e-4)
    for c, want in zip(rep.per_class, REFERENCE_METRICS["precisions"]):
        assert c.precision == pytest.approx(want, abs=1e-4)
    assert rep.mae == pytest.approx(REFERENCE_METRICS["mae"], abs=1e-4)
    assert rep.mse == pytest.approx(REFERENCE_METRICS["mse"], abs=1e-4)
    assert rep.rmse == pytest.approx(REFERENCE_METRICS["rmse"], abs=1e-4)
    assert rep.macro_recall == pytest.approx(REFERENCE_METRICS["macro_recall"], abs=1e-4)
    assert rep.weighted_recall == rep.accuracy


def test_reference_matrix_discrepancy_note(reference_counts):
    rep = metrics.evaluate(metrics.ConfusionMatrix(reference_counts, ("1", "2", "3")))
    found = rep.compare({"precision": {"3": 0.7619}})
    assert len(found) == 1
    assert found[0]["metric"] == "precision[3]"
    assert rep.notes and "0.78049" in rep.notes[0] and "0.76190" in rep.notes[0]
    assert "NOTE:" in rep.to_text()
    # values that agree within tolerance add no note
    assert rep.compare({"accuracy": 0.7647}) == []


def test_property_random_matrices_match_brute_force():
    rng = np.random.default_rng(99)
    for _ in range(200):
        k = int(rng.integers(2, 6))
        counts = rng.integers(0, 30, size=(k, k))
        counts[rng.integers(0, k), rng.integers(0, k)] += 1  # never all-zero
        # occasionally zero out a row or column to exercise undefined cells
        if rng.random() < 0.3:
            counts[int(rng.integers(0, k))] = 0
        if rng.random() < 0.3:
            counts[:, int(rng.integers(0, k))] = 0
        if not counts.sum():
            continue
        values = list(range(k))
        rep = metrics.evaluate(metrics.ConfusionMatrix(counts.astype(np.int64)))
        want = _brute_force(counts, values)
        assert rep.accuracy == pytest.approx(float(want["accuracy"]), abs=1e-12)
        assert rep.mae == pytest.approx(float(want["mae"]), abs=1e-12)
        assert rep.mse == pytest.approx(float(want["mse"]), abs=1e-12)
        assert rep.rmse == pytest.approx(float(want["mse"]) ** 0.5, abs=1e-12)
        assert rep.macro_recall == pytest.approx(float(want["macro_recall"]), abs=1e-12)
        assert rep.weighted_recall == pytest.approx(float(want["weighted_recall"]), abs=1e-12)
        for i, c in enumerate(rep.per_class):
            if i in want["recalls"]:
                assert c.recall_defined
                assert c.recall == pytest.approx(float(want["recalls"][i]), abs=1e-12)
            else:
                assert not c.recall_defined
            if i in want["precisions"]:
                assert c.precision_defined
                assert c.precision == pytest.approx(float(want["precisions"][i]), abs=1e-12)
            else:
                assert not c.precision_defined
            tp = int(counts[i, i])
            fp = int(counts[:, i].sum()) - tp
            fn = int(counts[i].sum()) - tp
            tn = int(counts.sum()) - tp - fp - fn
            assert (c.tp, c.fp, c.fn, c.tn) == (tp, fp, fn, tn)
            assert c.ovr_accuracy == pytest.approx((tp + tn) / counts.sum(), abs=1e-12)


def test_transpose_swaps_recall_and_precision():
    rng = np.random.default_rng(5)
    counts = rng.integers(1, 40, size=(4, 4)).astype(np.int64)
    rep = metrics.evaluate(metrics.ConfusionMatrix(counts))
    rep_t = metrics.evaluate(metrics.ConfusionMatrix(counts.T.copy()))
    assert rep_t.accuracy == rep.accuracy
    assert rep_t.mae == rep.mae and rep_t.mse == rep.mse
    for c, ct in zip(rep.per_class, rep_t.per_class):
        assert ct.recall == pytest.approx(c.precision, abs=1e-15)
        assert ct.precision == pytest.approx(c.recall, abs=1e-15)


def test_custom_class_values_scale_ordinal_errors():
    counts = np.array([[0, 1], [0, 0]], dtype=np.int64)
    rep = metrics.evaluate(metrics.ConfusionMatrix(counts), class_values=(0.0, 3.0))
    assert rep.mae == 3.0
    assert rep.mse == 9.0
    assert rep.rmse == 3.0


def test_confusion_tally_and_validation():
    cm = metrics.confusion([0, 1, 2, 2], [0, 2, 2, 1], k=3)
    assert cm.counts.tolist() == [[1, 0, 0], [0, 0, 1], [0, 1, 1]]
    assert cm.total == 4
    assert cm.support().tolist() == [1, 1, 2]
    assert cm.predicted_totals().tolist() == [1, 1, 2]
    with pytest.raises(LengthMismatch):
        metrics.confusion([0, 1], [0], k=2)
    with pytest.raises(LabelOutOfRange):
        metrics.confusion([0, 3], [0, 1], k=3)
    with pytest.raises(EmptyMatrix):
        metrics.evaluate(metrics.ConfusionMatrix(np.zeros((2, 2), dtype=np.int64)))


def test_evaluate_labels_and_prediction_io(tmp_path):
    path = tmp_path / "preds.jsonl"
    rows = [
        {"case": "c1", "true": "A", "pred": "A"},
        {"case": "c2", "true": "B", "pred": "C"},
        {"case": "c3", "true": "C", "pred": "C"},
    ]
    path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))
    cases, true, pred = metrics.load_predictions(path)
    assert cases == ["c1", "c2", "c3"]
    ti, order = metrics.labels_to_indices(true + pred)
    assert order == ("A", "B", "C")
    rep = metrics.evaluate_labels(ti[:3], ti[3:], k=3, class_names=order)
    assert rep.accuracy == pytest.approx(2.0 / 3.0)


def test_labels_to_indices_known_vocabularies():
    assert metrics.labels_to_indices(["S5", "S1"])[1] == ("S1", "S2", "S3", "S4", "S5")
    assert metrics.labels_to_indices(["IV", "I"])[1] == ("I", "II", "III", "IV")
    assert metrics.labels_to_indices(["C", "A"])[1] == ("A", "B", "C")
    idx, order = metrics.labels_to_indices(["z", "x", "z"])
    assert order == ("x", "z") and idx == [1, 0, 1]


def test_report_serialization_roundtrip(reference_counts):
    rep = metrics.evaluate(metrics.ConfusionMatrix(reference_counts, ("1", "2", "3")))
    doc = json.loads(rep.to_json())
    assert doc["counts"] == REFERENCE_COUNTS
    assert doc["accuracy"] == rep.accuracy
    text = rep.to_text()
    assert "Overall accuracy: 76.47%" in text
    assert "- Class 1: recall 96.61% (114/118)" in text
    assert "Macro recall: 77.17%" in text
