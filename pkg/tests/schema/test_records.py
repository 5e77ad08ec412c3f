"""Tests for metric reports, run records and manifest lines."""

import json

import pytest
from pydantic import ValidationError

from schema.models import Split
from schema.records import (
    EpochRecord,
    LossBreakdown,
    MacroReport,
    ManifestRecord,
    MetricsReport,
    RunRecord,
)


def _epoch(n: int) -> EpochRecord:
    return EpochRecord(
        epoch=n,
        lr=0.01,
        loss=LossBreakdown(final=1.0, quarter=1.0, masks=1.0, total=3.0),
        wall_time=0.5,
    )


class TestMetricsReport:
    """Tests for pooled confusion counts."""

    def test_derived_metrics(self):
        """Should derive every metric from the counts."""
        report = MetricsReport(tp=6, fp=2, fn=4, tn=8)
        assert report.oa == pytest.approx(14 / 20)
        assert report.precision == pytest.approx(6 / 8)
        assert report.recall == pytest.approx(6 / 10)
        assert report.iou == pytest.approx(6 / 12)
        assert report.f1 == pytest.approx(2 * 0.75 * 0.6 / 1.35)
        assert report.undefined == []

    def test_zero_denominators(self):
        """Should report 0.0 and list undefined metrics for an all-negative image."""
        report = MetricsReport(tn=16)
        assert report.oa == 1.0
        assert report.precision == 0.0
        assert report.iou == 0.0
        assert set(report.undefined) == {"precision", "recall", "f1", "iou"}

    def test_merge_adds_counts(self):
        """Should pool counts when merging."""
        merged = MetricsReport(tp=1, fp=2) + MetricsReport(fn=3, tn=4)
        assert (merged.tp, merged.fp, merged.fn, merged.tn) == (1, 2, 3, 4)

    def test_json_and_csv(self):
        """Should serialise counts and derived metrics."""
        report = MetricsReport(tp=1, fp=1, fn=0, tn=2)
        payload = json.loads(report.to_json())
        assert payload["tp"] == 1
        assert payload["precision"] == 0.5
        lines = report.to_csv_row(header=True).splitlines()
        assert lines[0] == "tp,fp,fn,tn,oa,precision,recall,f1,iou"
        assert lines[1].startswith("1,1,0,2,0.75,0.5,1.0")

    def test_percentages(self):
        """Should format derived metrics with two decimals."""
        assert MetricsReport(tp=1, fp=2).percentages()["precision"] == "33.33"

    def test_rejects_negative_counts(self):
        """Should reject negative counts."""
        with pytest.raises(ValidationError):
            MetricsReport(tp=-1)


class TestMacroReport:
    """Tests for per-image averages."""

    def test_from_reports(self):
        """Should average derived metrics and pool counts."""
        reports = [MetricsReport(tp=1, tn=1), MetricsReport(fp=1, fn=1)]
        macro = MacroReport.from_reports(reports)
        assert macro.images == 2
        assert macro.iou == pytest.approx(0.5)
        assert macro.pooled.tp == 1
        assert macro.pooled.total == 4

    def test_empty(self):
        """Should return zeros when no images were seen."""
        macro = MacroReport.from_reports([])
        assert macro.images == 0
        assert macro.iou == 0.0


class TestRunRecord:
    """Tests for the append-only run history."""

    def test_append_in_order(self, tmp_path):
        """Should append increasing epochs and round-trip through JSON."""
        record = RunRecord(run_dir=tmp_path, seed=3)
        record.append(_epoch(1))
        record.append(_epoch(2))
        assert record.last_epoch == 2
        path = tmp_path / "run.json"
        record.save(path)
        assert RunRecord.model_validate_json(path.read_text()) == record

    def test_rejects_out_of_order_append(self, tmp_path):
        """Should refuse an epoch that does not follow the last one."""
        record = RunRecord(run_dir=tmp_path, seed=0, epochs=[_epoch(2)])
        with pytest.raises(ValueError, match="does not follow"):
            record.append(_epoch(2))

    def test_rejects_unsorted_history(self, tmp_path):
        """Should reject a history that is not strictly increasing."""
        with pytest.raises(ValidationError, match="strictly increasing"):
            RunRecord(run_dir=tmp_path, seed=0, epochs=[_epoch(2), _epoch(1)])

    def test_last_checkpoint(self, tmp_path):
        """Should return the newest recorded checkpoint."""
        first = _epoch(1).model_copy(update={"checkpoint": tmp_path / "epoch_0001"})
        record = RunRecord(run_dir=tmp_path, seed=0, epochs=[first, _epoch(2)])
        assert record.last_checkpoint == tmp_path / "epoch_0001"
        assert RunRecord(run_dir=tmp_path, seed=0).last_checkpoint is None


class TestManifestRecord:
    """Tests for manifest lines."""

    def test_line_round_trip(self, tmp_path):
        """Should parse its own line and resolve paths against a root."""
        record = ManifestRecord(image="images/a.png", mask="masks/a.png", split=Split.TEST)
        parsed = ManifestRecord.from_line(record.to_line())
        assert parsed == record
        image, mask = parsed.resolve(tmp_path)
        assert image == tmp_path / "images" / "a.png"
        assert mask == tmp_path / "masks" / "a.png"

    def test_defaults(self):
        """Should default to the train split without a mask."""
        record = ManifestRecord.from_line('{"image": "x.png"}')
        assert record.split == Split.TRAIN
        assert record.mask is None
