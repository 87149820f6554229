"""Metrics CSV, comparison summaries, and SVG learning-curve panels."""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from noiselab.errors import ConfigError, IngestionError
from noiselab.harness.train import RunRecord

METRICS_HEADER = ("epoch", "lr_mult", "train_acc", "test_acc", "lr_clean", "lr_noisy")
SUMMARY_HEADER = ("method", "noise_type", "tau", "acc_mota", "acc_final", "lrn_mota", "lrn_final")

WIDTH, HEIGHT = 800, 500
LEFT, RIGHT = 0.1 * WIDTH, 0.9 * WIDTH
TOP, BOTTOM = 0.1 * HEIGHT, 0.9 * HEIGHT
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
PANELS = {
    "label_recall": (("LR_clean", "lr_clean"), ("LR_noisy", "lr_noisy")),
    "accuracy": (("train", "train_acc"), ("test", "test_acc")),
}


def _full(v) -> str:
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def _parse_optional(text: str) -> float:
    return float("nan") if text == "" else float(text)


def _write(path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_metrics_csv(record: RunRecord, path) -> None:
    """One row per epoch (1-based); undefined recalls become empty fields."""
    lines = [",".join(METRICS_HEADER)]
    for e in range(record.epochs):
        lines.append(
            ",".join(
                [
                    str(e + 1),
                    _full(record.lr_mult[e]),
                    _full(record.train_acc[e]),
                    _full(record.test_acc[e]),
                    _full(record.lr_clean[e]),
                    _full(record.lr_noisy[e]),
                ]
            )
        )
    _write(path, "\n".join(lines) + "\n")


def read_metrics_csv(path, method: str = "", noise_type: str = "", tau: float = float("nan")) -> RunRecord:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IngestionError(f"{path}: {exc}") from exc
    if not lines or tuple(lines[0].split(",")) != METRICS_HEADER:
        raise IngestionError(f"{path}:1: expected header {','.join(METRICS_HEADER)}")
    cols = {k: [] for k in METRICS_HEADER[1:]}
    for no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(METRICS_HEADER):
            raise IngestionError(f"{path}:{no}: expected {len(METRICS_HEADER)} fields, got {len(parts)}")
        try:
            if int(parts[0]) != no - 1:
                raise IngestionError(f"{path}:{no}: epoch {parts[0]} out of sequence")
            for key, text in zip(METRICS_HEADER[1:], parts[1:]):
                cols[key].append(_parse_optional(text))
        except ValueError as exc:
            raise IngestionError(f"{path}:{no}: {exc}") from exc
    if not cols["test_acc"]:
        raise IngestionError(f"{path}: no epochs recorded")
    return RunRecord(method, noise_type, tau, **{k: np.array(v) for k, v in cols.items()})


def save_run(record: RunRecord, directory) -> None:
    """``metrics.csv`` plus ``run.json`` holding the run's labels."""
    directory = Path(directory)
    emit_metrics_csv(record, directory / "metrics.csv")
    meta = {"method": record.method, "noise_type": record.noise_type, "tau": record.tau, "epochs": record.epochs}
    _write(directory / "run.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_run(directory) -> RunRecord:
    directory = Path(directory)
    meta_path, metrics_path = directory / "run.json", directory / "metrics.csv"
    for p in (meta_path, metrics_path):
        if not p.exists():
            raise IngestionError(f"{directory}: incomplete run, missing {p.name}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        record = read_metrics_csv(metrics_path, meta["method"], meta["noise_type"], float(meta["tau"]))
    except (ValueError, KeyError) as exc:
        raise IngestionError(f"{meta_path}: {exc}") from exc
    if record.epochs != meta.get("epochs", record.epochs):
        raise IngestionError(f"{directory}: metrics has {record.epochs} epochs, run.json says {meta['epochs']}")
    return record


# -- summary ------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    method: str
    noise_type: str
    tau: float
    acc_mota: float
    acc_final: float
    lrn_mota: Optional[float] = None
    lrn_final: Optional[float] = None

    def __post_init__(self):
        for v in (self.acc_mota, self.acc_final):
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"accuracy {v} outside [0, 1]")
        if self.acc_final > self.acc_mota:
            raise ConfigError("final accuracy exceeds the maximum")

    @classmethod
    def from_record(cls, record: RunRecord) -> "ComparisonRow":
        def opt(v):
            return None if math.isnan(v) else v

        return cls(
            record.method,
            record.noise_type,
            record.tau,
            record.acc_mota,
            record.acc_final,
            opt(record.lrn_mota),
            opt(record.lrn_final),
        )


def _fmt4(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{v:.4f}"


def emit_summary(rows: Sequence[ComparisonRow], path) -> None:
    """Table rows sorted by (noise_type, tau, method), 4-decimal values."""
    if not rows:
        raise ConfigError("summary needs at least one row")
    ordered = sorted(rows, key=lambda r: (r.noise_type, r.tau, r.method))
    lines = [",".join(SUMMARY_HEADER)]
    for r in ordered:
        lines.append(
            ",".join(
                [r.method, r.noise_type, _fmt4(r.tau), _fmt4(r.acc_mota), _fmt4(r.acc_final), _fmt4(r.lrn_mota), _fmt4(r.lrn_final)]
            )
        )
    _write(path, "\n".join(lines) + "\n")


def read_summary(path) -> List[ComparisonRow]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or tuple(lines[0].split(",")) != SUMMARY_HEADER:
        raise IngestionError(f"{path}:1: expected header {','.join(SUMMARY_HEADER)}")
    rows = []
    for line in lines[1:]:
        m, nt, tau, am, af, lm, lf = line.split(",")
        rows.append(
            ComparisonRow(m, nt, float(tau), float(am), float(af), float(lm) if lm else None, float(lf) if lf else None)
        )
    return rows


# -- SVG ----------------------------------------------------------------------


def _x(epoch: float, epochs: int) -> float:
    return LEFT + epoch / epochs * (RIGHT - LEFT)


def _y(value: float) -> float:
    return BOTTOM - value * (BOTTOM - TOP)


def emit_svg_curves(records: Sequence[Tuple[str, RunRecord]], panel: str, path) -> None:
    """Curves of every named record on shared axes [0, epochs] x [0, 1].

    Each series is one ``<polyline>`` with one point per epoch; series that
    are undefined throughout (e.g. noisy recall at tau = 0) are skipped.
    Each record gets a dashed vertical ``<line class="mota">`` at its MOTA.
    """
    if panel not in PANELS:
        raise ConfigError(f"unknown panel {panel!r}; expected one of {sorted(PANELS)}")
    if not records:
        raise ConfigError("no records to plot")
    epochs = {rec.epochs for _, rec in records}
    if len(epochs) != 1:
        raise ConfigError(f"records differ in epoch count: {sorted(epochs)}")
    n_ep = epochs.pop()
    title = "Label recall" if panel == "label_recall" else "Accuracy"
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.2f}" y="{TOP / 2:.2f}" text-anchor="middle" font-size="16">{title}</text>',
        f'<path class="axis" d="M{LEFT:.2f},{TOP:.2f} V{BOTTOM:.2f} H{RIGHT:.2f}" fill="none" stroke="black"/>',
    ]
    ticks = []
    for v in (0.0, 0.25, 0.5, 0.75, 1.0):
        ticks.append(f"M{LEFT - 5:.2f},{_y(v):.2f} H{LEFT:.2f}")
        out.append(f'<text x="{LEFT - 8:.2f}" y="{_y(v) + 4:.2f}" text-anchor="end" font-size="12">{v:.2f}</text>')
    for e in (0, n_ep // 2, n_ep):
        ticks.append(f"M{_x(e, n_ep):.2f},{BOTTOM:.2f} V{BOTTOM + 5:.2f}")
        out.append(f'<text x="{_x(e, n_ep):.2f}" y="{BOTTOM + 20:.2f}" text-anchor="middle" font-size="12">{e}</text>')
    out.append(f'<path class="ticks" d="{" ".join(ticks)}" fill="none" stroke="black"/>')
    out.append(f'<text x="{WIDTH / 2:.2f}" y="{HEIGHT - 10:.2f}" text-anchor="middle" font-size="12">epoch</text>')
    legend = []
    colour = 0
    for name, rec in records:
        for label, attr in PANELS[panel]:
            values = getattr(rec, attr)
            if np.all(np.isnan(values)):
                continue
            stroke = PALETTE[colour % len(PALETTE)]
            colour += 1
            pts = " ".join(
                f"{_x(e + 1, n_ep):.2f},{_y(0.0 if math.isnan(v) else v):.2f}" for e, v in enumerate(values)
            )
            series = f"{name}:{label}"
            out.append(
                f"<polyline class=\"series\" data-series={quoteattr(series)} points=\"{pts}\" "
                f'fill="none" stroke="{stroke}" stroke-width="1.5"/>'
            )
            legend.append((series, stroke))
        mx = _x(rec.mota_epoch, n_ep)
        out.append(
            f"<line class=\"mota\" data-series={quoteattr(name)} x1=\"{mx:.2f}\" y1=\"{TOP:.2f}\" "
            f'x2="{mx:.2f}" y2="{BOTTOM:.2f}" stroke="green" stroke-dasharray="4,3"/>'
        )
    out.append('<g class="legend" font-size="12">')
    for k, (series, stroke) in enumerate(legend):
        ly = BOTTOM - 12 - 16 * (len(legend) - 1 - k)
        out.append(f'<rect x="{RIGHT - 200:.2f}" y="{ly - 8:.2f}" width="10" height="10" fill="{stroke}"/>')
        out.append(f'<text x="{RIGHT - 186:.2f}" y="{ly + 1:.2f}">{escape(series)}</text>')
    out.append("</g>")
    out.append("</svg>")
    _write(path, "\n".join(out) + "\n")
