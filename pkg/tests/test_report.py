import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from noiselab.errors import ConfigError, IngestionError
from noiselab.harness import RunRecord
from noiselab.report import (
    ComparisonRow,
    emit_metrics_csv,
    emit_summary,
    emit_svg_curves,
    load_run,
    read_metrics_csv,
    read_summary,
    save_run,
)

SVG = "{http://www.w3.org/2000/svg}"


def record(epochs=3, method="standard", noise_type="pseudo", tau=0.2, test=None, lr_noisy=None):
    rng = np.random.default_rng(epochs)
    test = np.array(test if test is not None else np.linspace(0.5, 0.8, epochs))
    lrn = np.array(lr_noisy) if lr_noisy is not None else rng.random(epochs)
    return RunRecord(
        method, noise_type, tau, np.ones(epochs), rng.random(epochs), test, rng.random(epochs), lrn
    )


class TestMetricsCsv:
    def test_rows(self, tmp_path):
        emit_metrics_csv(record(3), tmp_path / "m.csv")
        lines = (tmp_path / "m.csv").read_text().splitlines()
        assert len(lines) == 4
        assert lines[0] == "epoch,lr_mult,train_acc,test_acc,lr_clean,lr_noisy"
        assert [ln.split(",")[0] for ln in lines[1:]] == ["1", "2", "3"]

    def test_parse_back(self, tmp_path):
        rec = record(5)
        emit_metrics_csv(rec, tmp_path / "m.csv")
        back = read_metrics_csv(tmp_path / "m.csv")
        for k in ("lr_mult", "train_acc", "test_acc", "lr_clean", "lr_noisy"):
            np.testing.assert_array_equal(getattr(back, k), getattr(rec, k))

    def test_empty_noisy_column(self, tmp_path):
        emit_metrics_csv(record(4, tau=0.0, lr_noisy=[np.nan] * 4), tmp_path / "m.csv")
        rows = (tmp_path / "m.csv").read_text().splitlines()[1:]
        assert all(r.split(",")[5] == "" for r in rows)
        assert np.all(np.isnan(read_metrics_csv(tmp_path / "m.csv").lr_noisy))

    def test_run_directory(self, tmp_path):
        rec = record(3, method="gce", noise_type="randomized", tau=0.25)
        save_run(rec, tmp_path)
        back = load_run(tmp_path)
        assert (back.method, back.noise_type, back.tau) == ("gce", "randomized", 0.25)

    def test_incomplete_run(self, tmp_path):
        emit_metrics_csv(record(2), tmp_path / "metrics.csv")
        with pytest.raises(IngestionError, match="run.json"):
            load_run(tmp_path)

    def test_bad_row(self, tmp_path):
        (tmp_path / "m.csv").write_text("epoch,lr_mult,train_acc,test_acc,lr_clean,lr_noisy\n1,1.0,0.5\n")
        with pytest.raises(IngestionError, match=":2"):
            read_metrics_csv(tmp_path / "m.csv")


class TestSummary:
    def test_single_row(self, tmp_path):
        emit_summary([ComparisonRow.from_record(record(3))], tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert len(lines) == 2
        assert lines[0] == "method,noise_type,tau,acc_mota,acc_final,lrn_mota,lrn_final"
        fields = lines[1].split(",")
        assert len(fields) == 7
        for f in fields[2:]:
            assert len(f.split(".")[1]) == 4

    def test_sort_order_and_parse(self, tmp_path):
        rows = [
            ComparisonRow("standard", "randomized", 0.2, 0.8, 0.7, 0.3, 0.4),
            ComparisonRow("gce", "pseudo", 0.4, 0.6, 0.5),
            ComparisonRow("coteaching", "pseudo", 0.2, 0.9, 0.9, 0.1, 0.1),
            ComparisonRow("standard", "pseudo", 0.2, 0.9, 0.8, 0.2, 0.3),
        ]
        emit_summary(rows, tmp_path / "s.csv")
        back = read_summary(tmp_path / "s.csv")
        expected = sorted(rows, key=lambda r: (r.noise_type, r.tau, r.method))
        assert [(r.method, r.noise_type, r.tau) for r in back] == [(r.method, r.noise_type, r.tau) for r in expected]
        emit_summary(list(reversed(rows)), tmp_path / "t.csv")
        assert (tmp_path / "s.csv").read_bytes() == (tmp_path / "t.csv").read_bytes()
        assert back[2].method == "gce" and back[2].lrn_mota is None

    def test_row_validation(self):
        with pytest.raises(ConfigError):
            ComparisonRow("standard", "pseudo", 0.2, 0.7, 0.8)
        with pytest.raises(ConfigError):
            ComparisonRow("standard", "pseudo", 0.2, 1.2, 0.8)


class TestSvg:
    def parse(self, path):
        return ET.parse(path).getroot()

    def test_accuracy_panel(self, tmp_path):
        emit_svg_curves([("run", record(6))], "accuracy", tmp_path / "a.svg")
        root = self.parse(tmp_path / "a.svg")
        polylines = root.findall(f".//{SVG}polyline")
        assert len(polylines) == 2
        assert len(root.findall(f".//{SVG}line[@class='mota']")) == 1
        for pl in polylines:
            assert len(pl.get("points").split()) == 6
        assert {pl.get("data-series") for pl in polylines} == {"run:train", "run:test"}

    def test_constant_half_is_mid_axis(self, tmp_path):
        rec = record(5, test=[0.5] * 5)
        emit_svg_curves([("r", rec)], "accuracy", tmp_path / "a.svg")
        root = self.parse(tmp_path / "a.svg")
        test_line = [p for p in root.iter(f"{SVG}polyline") if p.get("data-series") == "r:test"][0]
        ys = {float(pt.split(",")[1]) for pt in test_line.get("points").split()}
        assert ys == {250.0}

    def test_mota_marker_position(self, tmp_path):
        rec = record(4, test=[0.5, 0.9, 0.9, 0.7])
        emit_svg_curves([("r", rec)], "accuracy", tmp_path / "a.svg")
        line = self.parse(tmp_path / "a.svg").find(f".//{SVG}line[@class='mota']")
        assert math.isclose(float(line.get("x1")), 80 + 2 / 4 * 640)

    def test_undefined_series_skipped(self, tmp_path):
        rec = record(3, tau=0.0, lr_noisy=[np.nan] * 3)
        emit_svg_curves([("r", rec)], "label_recall", tmp_path / "l.svg")
        root = self.parse(tmp_path / "l.svg")
        assert [p.get("data-series") for p in root.iter(f"{SVG}polyline")] == ["r:LR_clean"]

    def test_mismatched_epochs(self, tmp_path):
        with pytest.raises(ConfigError):
            emit_svg_curves([("a", record(3)), ("b", record(4))], "accuracy", tmp_path / "x.svg")

    def test_unknown_panel(self, tmp_path):
        with pytest.raises(ConfigError):
            emit_svg_curves([("a", record(3))], "loss", tmp_path / "x.svg")

    def test_deterministic_and_escaped(self, tmp_path):
        recs = [("a<&>", record(5)), ("b", record(5, noise_type="randomized"))]
        emit_svg_curves(recs, "label_recall", tmp_path / "1.svg")
        emit_svg_curves(recs, "label_recall", tmp_path / "2.svg")
        assert (tmp_path / "1.svg").read_bytes() == (tmp_path / "2.svg").read_bytes()
        root = self.parse(tmp_path / "1.svg")
        assert len(root.findall(f".//{SVG}polyline")) == 4
        assert len(root.findall(f".//{SVG}line[@class='mota']")) == 2
