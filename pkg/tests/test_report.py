"""Figure rendering: files come out as valid non-empty PNGs and empty
inputs are rejected."""

import pytest

from seqtag.evaluate import MetricsReport, TagMetrics
from seqtag.model import TrainingReport
from seqtag.report import save_comparison_chart, save_training_curves

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def fake_training_report(epochs=5):
    report = TrainingReport()
    for e in range(epochs):
        report.epoch_losses.append(10.0 / (e + 1))
        report.val_f1.append(60.0 + 7.0 * e)
        report.val_accuracy.append(70.0 + 5.0 * e)
    report.best_epoch = epochs
    return report


def fake_metrics(p, r, f1):
    per_tag = {"X": TagMetrics(p, r, f1, 10)}
    return MetricsReport(per_tag, p, r, f1, 95.0)


class TestTrainingCurves:
    def test_writes_png(self, tmp_path):
        out = save_training_curves(fake_training_report(), tmp_path / "curves.png")
        blob = out.read_bytes()
        assert blob.startswith(PNG_MAGIC)
        assert len(blob) > 1000

    def test_single_epoch(self, tmp_path):
        out = save_training_curves(fake_training_report(epochs=1), tmp_path / "one.png")
        assert out.read_bytes().startswith(PNG_MAGIC)

    def test_title_accepted(self, tmp_path):
        out = save_training_curves(
            fake_training_report(), tmp_path / "t.png", title="gru_crf run"
        )
        assert out.exists()

    def test_empty_report_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            save_training_curves(TrainingReport(), tmp_path / "x.png")


class TestComparisonChart:
    def test_writes_png(self, tmp_path):
        rows = [
            ("crf_only", fake_metrics(82.4, 83.3, 82.8)),
            ("gru_crf", fake_metrics(86.5, 95.7, 90.9)),
            ("bigru_cnn_crf", fake_metrics(90.8, 96.2, 93.4)),
        ]
        out = save_comparison_chart(rows, tmp_path / "cmp.png")
        blob = out.read_bytes()
        assert blob.startswith(PNG_MAGIC)
        assert len(blob) > 1000

    def test_single_row(self, tmp_path):
        out = save_comparison_chart(
            [("only", fake_metrics(50.0, 50.0, 50.0))], tmp_path / "one.png"
        )
        assert out.read_bytes().startswith(PNG_MAGIC)

    def test_empty_rows_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            save_comparison_chart([], tmp_path / "x.png")
