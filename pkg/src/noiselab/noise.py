"""Noise transition matrices, their spread statistics, and label-noise generators."""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from noiselab.datasets import LabeledDataset
from noiselab.errors import ConfigError, IngestionError, SelectionError, StatisticsError

DEFAULT_TOLERANCE = 0.02
# Absorbs float error in |acc - (1 - tau)| <= tolerance, e.g. |0.78 - 0.8| > 0.02.
_TOL_SLACK = 1e-12


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic ``P(observed = j | true = i)`` with per-true-class counts.

    Rows of classes with no examples are all zero and listed in ``undefined``.
    """

    matrix: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        counts = np.array(self.counts, dtype=np.int64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigError(f"transition matrix must be square, got {m.shape}")
        if counts.shape != (m.shape[0],):
            raise ConfigError("one count per true class required")
        if np.any(m < -1e-12) or np.any(m > 1 + 1e-12):
            raise ConfigError("transition entries must lie in [0, 1]")
        sums = m.sum(axis=1)
        for i in range(m.shape[0]):
            if counts[i] > 0 and abs(sums[i] - 1.0) > 1e-9:
                raise ConfigError(f"row {i} sums to {sums[i]!r}, not 1")
        m.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "counts", counts)

    @property
    def n_classes(self) -> int:
        return self.matrix.shape[0]

    @property
    def undefined(self) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.counts == 0))

    @property
    def noise_rate(self) -> float:
        n = self.counts.sum()
        if n == 0:
            return 0.0
        return float(1.0 - np.sum(self.counts / n * np.diag(self.matrix)))


@dataclass(frozen=True)
class NoiseStats:
    alpha: float
    beta: float
    column_sums: np.ndarray = field(repr=False)
    tau: float


@dataclass(frozen=True, eq=False)
class PredictionSnapshot:
    epoch: int
    train_acc: float
    predictions: np.ndarray
    alpha: float = float("nan")
    beta: float = float("nan")


def estimate_transition(true_labels, observed_labels, n_classes: int) -> TransitionMatrix:
    true = np.asarray(true_labels, dtype=np.int64)
    obs = np.asarray(observed_labels, dtype=np.int64)
    if true.shape != obs.shape or true.ndim != 1:
        raise ConfigError(f"label vectors differ in shape: {true.shape} vs {obs.shape}")
    for labels in (true, obs):
        if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
            raise ConfigError(f"labels outside [0, {n_classes})")
    joint = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(joint, (true, obs), 1)
    counts = joint.sum(axis=1)
    safe = np.where(counts > 0, counts, 1)
    return TransitionMatrix(joint / safe[:, None], counts)


def dataset_transition(dataset: LabeledDataset) -> TransitionMatrix:
    return estimate_transition(dataset.true_labels, dataset.observed_labels, dataset.n_classes)


def alpha_beta(transition: TransitionMatrix) -> NoiseStats:
    """Spread of the diagonal (alpha) and of the column sums (beta).

    Both are population standard deviations over the C classes; the column
    sums are raw sums of the row-stochastic matrix, so they average to 1.
    """
    if transition.undefined:
        raise StatisticsError(
            f"transition rows undefined for empty classes {list(transition.undefined)}",
            transition.undefined,
        )
    m = transition.matrix
    col = m.sum(axis=0)
    return NoiseStats(
        alpha=float(np.std(np.diag(m))),
        beta=float(np.std(col)),
        column_sums=col,
        tau=transition.noise_rate,
    )


# -- generators ---------------------------------------------------------------


def symmetric_noise(dataset: LabeledDataset, tau: float, seed: int = 0) -> LabeledDataset:
    """Flip exactly round(tau * n) uniformly chosen labels to a uniformly drawn other class."""
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"tau must lie in [0, 1], got {tau}")
    rng = np.random.default_rng(seed)
    n, c = len(dataset), dataset.n_classes
    k = _round_half_up(tau * n)
    chosen = rng.choice(n, size=k, replace=False)
    observed = dataset.true_labels.copy()
    observed[chosen] = (observed[chosen] + rng.integers(1, c, size=k)) % c
    return dataset.relabel(observed, "symmetric")


def asymmetric_noise(dataset: LabeledDataset, tau: float, seed: int = 0) -> LabeledDataset:
    """Per class i, move exactly round(tau * n_i) examples to class (i + 1) mod C."""
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"tau must lie in [0, 1], got {tau}")
    rng = np.random.default_rng(seed)
    c = dataset.n_classes
    observed = dataset.true_labels.copy()
    for i in range(c):
        members = np.flatnonzero(dataset.true_labels == i)
        k = _round_half_up(tau * members.size)
        chosen = rng.choice(members, size=k, replace=False)
        observed[chosen] = (i + 1) % c
    return dataset.relabel(observed, "asymmetric")


def largest_remainder(total: int, weights: np.ndarray) -> np.ndarray:
    """Integer counts summing to ``total`` closest to ``total * weights``.

    Floors first, then hands the leftover units to the largest fractional
    parts (lower index first on ties).
    """
    exact = total * np.asarray(weights, dtype=np.float64)
    base = np.floor(exact + 1e-9).astype(np.int64)
    base = np.minimum(base, total)
    short = total - int(base.sum())
    if short > 0:
        rema = exact - base
        order = sorted(range(len(rema)), key=lambda j: (-rema[j], j))
        for j in order[:short]:
            base[j] += 1
    elif short < 0:
        raise ConfigError("row weights sum above 1")
    return base


def randomized_noise(dataset: LabeledDataset, transition: TransitionMatrix, seed: int = 0) -> LabeledDataset:
    """Relabel so each true class follows ``transition`` with exact per-cell counts.

    Class-i examples are shuffled and cut into groups of sizes
    ``largest_remainder(n_i, N_i.)``; group j is labeled j.
    """
    c = dataset.n_classes
    if transition.n_classes != c:
        raise ConfigError(f"transition is {transition.n_classes}x{transition.n_classes}, dataset has C={c}")
    rng = np.random.default_rng(seed)
    observed = dataset.true_labels.copy()
    for i in range(c):
        members = np.flatnonzero(dataset.true_labels == i)
        if members.size == 0:
            continue
        if i in transition.undefined:
            raise ConfigError(f"transition row {i} is undefined but the dataset has class {i} examples")
        cells = largest_remainder(members.size, transition.matrix[i])
        shuffled = rng.permutation(members)
        observed[shuffled] = np.repeat(np.arange(c), cells)
    return dataset.relabel(observed, "randomized")


def select_snapshot(
    snapshots: Sequence[PredictionSnapshot],
    tau: float,
    tolerance: float = DEFAULT_TOLERANCE,
    target: Optional[Tuple[float, float]] = None,
) -> PredictionSnapshot:
    """Snapshot whose training accuracy is within ``tolerance`` of 1 - tau.

    With a ``(alpha, beta)`` target the closest candidate in that plane wins,
    otherwise the closest in accuracy.  Ties go to the earliest epoch.
    """
    if not snapshots:
        raise SelectionError("no snapshots to select from")
    if tolerance < 0:
        raise ConfigError("tolerance must be >= 0")
    goal = 1.0 - tau
    ordered = sorted(snapshots, key=lambda s: s.epoch)
    candidates = [s for s in ordered if abs(s.train_acc - goal) <= tolerance + _TOL_SLACK]
    if not candidates:
        nearest = min(ordered, key=lambda s: abs(s.train_acc - goal))
        raise SelectionError(
            f"no snapshot within {tolerance} of accuracy {goal:.4f}; nearest is epoch {nearest.epoch} "
            f"with accuracy {nearest.train_acc:.4f} (noise rate {1 - nearest.train_acc:.4f})",
            nearest.train_acc,
        )
    if target is None:
        key = lambda s: abs(s.train_acc - goal)  # noqa: E731
    else:
        a, b = target
        key = lambda s: math.hypot(s.alpha - a, s.beta - b)  # noqa: E731
    # min() keeps the first minimum, i.e. the earliest epoch.
    return min(candidates, key=key)


def pseudo_noise(dataset: LabeledDataset, snapshot: PredictionSnapshot) -> LabeledDataset:
    """Use the snapshot's predictions verbatim as the observed labels."""
    preds = np.asarray(snapshot.predictions, dtype=np.int64)
    if preds.shape != (len(dataset),):
        raise ConfigError(f"snapshot has {preds.size} predictions for {len(dataset)} examples")
    return dataset.relabel(preds, "pseudo")


def make_snapshot(epoch: int, predictions, true_labels, n_classes: int) -> PredictionSnapshot:
    preds = np.asarray(predictions, dtype=np.int64).copy()
    true = np.asarray(true_labels, dtype=np.int64)
    acc = float(np.mean(preds == true))
    try:
        stats = alpha_beta(estimate_transition(true, preds, n_classes))
        alpha, beta = stats.alpha, stats.beta
    except StatisticsError:
        alpha = beta = float("nan")
    preds.setflags(write=False)
    return PredictionSnapshot(epoch, acc, preds, alpha, beta)


# -- files --------------------------------------------------------------------


def save_transition(transition: TransitionMatrix, path) -> None:
    lines = ["# n_i=" + ",".join(str(int(c)) for c in transition.counts)]
    for row in transition.matrix:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_transition(path) -> TransitionMatrix:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IngestionError(f"{path}: {exc}") from exc
    counts = None
    rows: List[List[float]] = []
    for no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("n_i="):
                try:
                    counts = [int(v) for v in body[4:].split(",")]
                except ValueError as exc:
                    raise IngestionError(f"{path}:{no}: bad n_i comment: {exc}") from exc
            continue
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError as exc:
            raise IngestionError(f"{path}:{no}: {exc}") from exc
        if len(rows[-1]) != len(rows[0]):
            raise IngestionError(f"{path}:{no}: row has {len(rows[-1])} columns, expected {len(rows[0])}")
    if not rows or len(rows) != len(rows[0]):
        raise IngestionError(f"{path}: expected a square C x C matrix, got {len(rows)} rows")
    if counts is None:
        # Without counts every row is treated as populated.
        counts = [1] * len(rows)
    if len(counts) != len(rows):
        raise IngestionError(f"{path}: n_i lists {len(counts)} classes for a {len(rows)}-row matrix")
    try:
        return TransitionMatrix(np.array(rows), np.array(counts))
    except ConfigError as exc:
        raise IngestionError(f"{path}: {exc}") from exc


def save_stats(stats: NoiseStats, path) -> None:
    text = "tau,alpha,beta\n" + ",".join(repr(float(v)) for v in (stats.tau, stats.alpha, stats.beta)) + "\n"
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def load_stats(path) -> NoiseStats:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) < 2 or lines[0] != "tau,alpha,beta":
        raise IngestionError(f"{path}: expected header tau,alpha,beta")
    tau, alpha, beta = (float(v) for v in lines[1].split(","))
    return NoiseStats(alpha, beta, np.array([]), tau)


def save_snapshots(snapshots: Sequence[PredictionSnapshot], directory, wide: bool = False) -> None:
    """Write ``snapshots.csv`` plus per-epoch ``pred_<epoch>.csv`` files,
    or a single wide ``predictions.csv`` when ``wide`` is set."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = ["epoch,train_acc,alpha,beta"]
    for s in snapshots:
        index.append(f"{s.epoch},{float(s.train_acc)!r},{float(s.alpha)!r},{float(s.beta)!r}")
    (directory / "snapshots.csv").write_text("\n".join(index) + "\n", encoding="utf-8", newline="\n")
    if wide:
        header = "index," + ",".join(str(s.epoch) for s in snapshots)
        mat = np.stack([s.predictions for s in snapshots], axis=1) if snapshots else np.zeros((0, 0), int)
        body = [f"{i}," + ",".join(str(int(v)) for v in row) for i, row in enumerate(mat)]
        (directory / "predictions.csv").write_text("\n".join([header] + body) + "\n", encoding="utf-8", newline="\n")
        return
    for s in snapshots:
        body = ["index,predicted_label"] + [f"{i},{int(p)}" for i, p in enumerate(s.predictions)]
        (directory / f"pred_{s.epoch}.csv").write_text("\n".join(body) + "\n", encoding="utf-8", newline="\n")


def _read_int_table(path, expected_header: Optional[List[str]] = None):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise IngestionError(f"{path}:1: empty file")
    header = lines[0].split(",")
    if expected_header is not None and header != expected_header:
        raise IngestionError(f"{path}:1: expected header {','.join(expected_header)}")
    rows = []
    for no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise IngestionError(f"{path}:{no}: expected {len(header)} fields, got {len(parts)}")
        try:
            rows.append([int(v) for v in parts])
        except ValueError as exc:
            raise IngestionError(f"{path}:{no}: {exc}") from exc
        if rows[-1][0] != no - 2:
            raise IngestionError(f"{path}:{no}: index {rows[-1][0]} out of sequence")
    return header, np.array(rows, dtype=np.int64).reshape(len(rows), len(header))


def load_snapshots(directory, true_labels=None, n_classes: Optional[int] = None) -> List[PredictionSnapshot]:
    """Read snapshots in either layout.

    With ``true_labels`` (and ``n_classes``) accuracy and alpha/beta are
    recomputed from the predictions and checked against ``snapshots.csv``
    when it exists; without them the stored index values are used.
    """
    directory = Path(directory)
    index_path = directory / "snapshots.csv"
    wide_path = directory / "predictions.csv"
    stored = {}
    if index_path.exists():
        lines = index_path.read_text(encoding="utf-8").splitlines()
        if not lines or lines[0].split(",")[:2] != ["epoch", "train_acc"]:
            raise IngestionError(f"{index_path}:1: header must start with epoch,train_acc")
        cols = lines[0].split(",")
        for no, line in enumerate(lines[1:], start=2):
            parts = line.split(",")
            if len(parts) != len(cols):
                raise IngestionError(f"{index_path}:{no}: expected {len(cols)} fields, got {len(parts)}")
            try:
                rec = dict(zip(cols, parts))
                stored[int(rec["epoch"])] = (
                    float(rec["train_acc"]),
                    float(rec.get("alpha", "nan")),
                    float(rec.get("beta", "nan")),
                )
            except ValueError as exc:
                raise IngestionError(f"{index_path}:{no}: {exc}") from exc
    preds = {}
    if wide_path.exists():
        header, table = _read_int_table(wide_path)
        if header[0] != "index":
            raise IngestionError(f"{wide_path}:1: first column must be index")
        try:
            epochs = [int(h) for h in header[1:]]
        except ValueError as exc:
            raise IngestionError(f"{wide_path}:1: epoch columns must be integers: {exc}") from exc
        for k, e in enumerate(epochs):
            preds[e] = table[:, k + 1]
    elif stored:
        for e in stored:
            path = directory / f"pred_{e}.csv"
            if not path.exists():
                raise IngestionError(f"{path}: missing prediction file for epoch {e}")
            _, table = _read_int_table(path, ["index", "predicted_label"])
            preds[e] = table[:, 1]
    else:
        raise IngestionError(f"{directory}: neither snapshots.csv nor predictions.csv found")
    if not preds:
        raise IngestionError(f"{directory}: no snapshots recorded")
    lengths = {p.size for p in preds.values()}
    if len(lengths) != 1:
        raise IngestionError(f"{directory}: prediction vectors differ in length {sorted(lengths)}")
    out = []
    for e in sorted(preds):
        if true_labels is not None:
            if n_classes is None:
                raise ConfigError("n_classes required with true_labels")
            if np.asarray(true_labels).shape != preds[e].shape:
                raise IngestionError(f"{directory}: epoch {e} has {preds[e].size} predictions for {len(true_labels)} examples")
            snap = make_snapshot(e, preds[e], true_labels, n_classes)
            if e in stored and abs(stored[e][0] - snap.train_acc) > 1e-12:
                raise IngestionError(
                    f"{directory}: epoch {e} stored accuracy {stored[e][0]} disagrees with predictions ({snap.train_acc})"
                )
        else:
            if e not in stored:
                raise IngestionError(f"{directory}: epoch {e} has no accuracy; pass true labels to recompute")
            acc, a, b = stored[e]
            p = preds[e].copy()
            p.setflags(write=False)
            snap = PredictionSnapshot(e, acc, p, a, b)
        out.append(snap)
    return out
