"""Labeled datasets: synthetic generation, ingestion, splitting and persistence."""

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from statistics import NormalDist
from typing import Optional, Tuple

import numpy as np

from noiselab.errors import ConfigError, IngestionError

PROVENANCES = ("clean", "symmetric", "asymmetric", "randomized", "pseudo")
FORMAT_TAG = "noiselab"
FORMAT_VERSION = "v1"

# Separation used for confusability 0: pair members 12 standard deviations apart.
MAX_PAIR_SEPARATION = 12.0
# Distance of each pair centre from the origin, on its own axis.  Small enough
# that cross-pair confusion is non-negligible early in training.
PAIR_SPACING = 2.0


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Features with both the ground-truth and the observed (training) labels.

    Arrays are made read-only on construction; derive new datasets with
    :meth:`relabel` instead of mutating.
    """

    features: np.ndarray
    true_labels: np.ndarray
    observed_labels: np.ndarray
    n_classes: int
    provenance: str = "clean"

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64)
        true = np.array(self.true_labels, dtype=np.int64)
        obs = np.array(self.observed_labels, dtype=np.int64)
        if feats.ndim < 2:
            raise ConfigError("features must have one row per example")
        if not (feats.shape[0] == true.shape[0] == obs.shape[0]):
            raise ConfigError(
                f"length mismatch: {feats.shape[0]} rows, {true.shape[0]} true, {obs.shape[0]} observed labels"
            )
        if self.n_classes < 2:
            raise ConfigError(f"class count must be >= 2, got {self.n_classes}")
        for name, labels in (("true", true), ("observed", obs)):
            if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
                raise ConfigError(f"{name} labels outside [0, {self.n_classes})")
        if self.provenance not in PROVENANCES:
            raise ConfigError(f"unknown provenance {self.provenance!r}")
        if self.provenance == "clean" and not np.array_equal(true, obs):
            raise ConfigError("clean dataset must have observed == true labels")
        for arr in (feats, true, obs):
            arr.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "true_labels", true)
        object.__setattr__(self, "observed_labels", obs)
        object.__setattr__(self, "n_classes", int(self.n_classes))

    def __len__(self):
        return self.features.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.n_classes == other.n_classes
            and self.provenance == other.provenance
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.true_labels, other.true_labels)
            and np.array_equal(self.observed_labels, other.observed_labels)
        )

    @property
    def clean_mask(self) -> np.ndarray:
        return self.observed_labels == self.true_labels

    @property
    def noisy_mask(self) -> np.ndarray:
        return ~self.clean_mask

    @property
    def noise_rate(self) -> float:
        return float(self.noisy_mask.mean()) if len(self) else 0.0

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.true_labels, minlength=self.n_classes)

    def relabel(self, observed_labels, provenance: str) -> "LabeledDataset":
        return LabeledDataset(self.features, self.true_labels, observed_labels, self.n_classes, provenance)

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            self.features[idx], self.true_labels[idx], self.observed_labels[idx], self.n_classes, self.provenance
        )


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test fraction must lie in (0, 1), got {self.test_fraction}")


def pair_separation(confusability: float) -> float:
    """Distance between the means of two paired classes.

    Chosen so the Bayes error between the pair (unit-variance isotropic
    clusters) is ``confusability**2 / 2``: zero overlap at 0, full overlap
    at 1.  Capped at :data:`MAX_PAIR_SEPARATION`.
    """
    err = confusability ** 2 / 2.0
    if err <= 0.0:
        return MAX_PAIR_SEPARATION
    return min(MAX_PAIR_SEPARATION, 2.0 * NormalDist().inv_cdf(1.0 - err))


def gen_confusable_blobs(n_classes, n_per_class, dim, confusability=0.5, seed=0) -> LabeledDataset:
    """Gaussian clusters arranged in confusable pairs (0, 1), (2, 3), ...

    Pair centres sit on distinct axes; within a pair the two class means
    straddle the centre along the next axis, closer together as
    ``confusability`` grows.  An odd last class sits alone.  The layout is
    rotated by a seed-derived orthogonal matrix.
    """
    if n_classes < 2:
        raise ConfigError(f"need at least 2 classes, got {n_classes}")
    if dim < 2:
        raise ConfigError(f"need dim >= 2, got {dim}")
    if n_per_class < 1:
        raise ConfigError("n_per_class must be >= 1")
    if not 0.0 <= confusability < 1.0:
        raise ConfigError(f"confusability must lie in [0, 1), got {confusability}")
    rng = np.random.default_rng(seed)
    half = pair_separation(confusability) / 2.0
    means = np.zeros((n_classes, dim))
    for c in range(n_classes):
        pair = c // 2
        axis = pair % dim
        # Wrap-around pairs are pushed further out so centres stay distinct.
        centre = np.zeros(dim)
        centre[axis] = PAIR_SPACING * (1 + pair // dim)
        offset_axis = (axis + 1) % dim
        sign = -1.0 if c % 2 == 0 else 1.0
        if c == n_classes - 1 and n_classes % 2 == 1:
            sign = 0.0
        means[c] = centre
        means[c, offset_axis] += sign * half
    rotation, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    labels = np.repeat(np.arange(n_classes), n_per_class)
    noise = rng.normal(size=(labels.size, dim))
    feats = (means[labels] + noise) @ rotation.T
    return LabeledDataset(feats, labels, labels, n_classes, "clean")


def split_indices(n: int, spec: SplitSpec) -> Tuple[np.ndarray, np.ndarray]:
    if n < 1:
        raise ConfigError("cannot split an empty dataset")
    n_test = int(math.floor(spec.test_fraction * n + 0.5))
    perm = np.random.default_rng(spec.seed).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def split(dataset: LabeledDataset, spec: SplitSpec) -> Tuple[LabeledDataset, LabeledDataset]:
    train_idx, test_idx = split_indices(len(dataset), spec)
    return dataset.subset(train_idx), dataset.subset(test_idx)


def standardize(train: LabeledDataset, *others: LabeledDataset):
    """Zero-mean unit-variance features using statistics of ``train`` only."""
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    out = []
    for ds in (train, *others):
        out.append(
            LabeledDataset((ds.features - mean) / std, ds.true_labels, ds.observed_labels, ds.n_classes, ds.provenance)
        )
    return tuple(out)


# -- IDX ----------------------------------------------------------------------

_IDX_DTYPES = {0x08: ">u1", 0x09: ">i1", 0x0B: ">i2", 0x0C: ">i4", 0x0D: ">f4", 0x0E: ">f8"}


def read_idx(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise IngestionError(f"{path}: truncated IDX header at byte {len(data)}")
    if data[0] != 0 or data[1] != 0:
        raise IngestionError(f"{path}: bad IDX magic at byte 0")
    code, ndim = data[2], data[3]
    if code not in _IDX_DTYPES:
        raise IngestionError(f"{path}: unknown IDX element type 0x{code:02x} at byte 2")
    if ndim < 1:
        raise IngestionError(f"{path}: IDX dimension count 0 at byte 3")
    header_end = 4 + 4 * ndim
    if len(data) < header_end:
        raise IngestionError(f"{path}: truncated IDX dimensions at byte {len(data)}")
    dims = struct.unpack(f">{ndim}I", data[4:header_end])
    dtype = np.dtype(_IDX_DTYPES[code])
    expected = int(np.prod(dims)) * dtype.itemsize
    available = len(data) - header_end
    if available != expected:
        raise IngestionError(
            f"{path}: IDX payload has {available} bytes after header (byte {header_end}), dims {dims} need {expected}"
        )
    return np.frombuffer(data, dtype=dtype, offset=header_end).reshape(dims)


def load_idx(images_path, labels_path, n_classes: Optional[int] = None) -> LabeledDataset:
    """Image/label IDX pair as a clean dataset; byte images are scaled to [0, 1]."""
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if labels.ndim != 1:
        raise IngestionError(f"{labels_path}: label file must be 1-D, got dims {labels.shape}")
    if images.shape[0] != labels.shape[0]:
        raise IngestionError(f"{images_path}: {images.shape[0]} images but {labels.shape[0]} labels")
    feats = images.astype(np.float64)
    if images.dtype == np.dtype(">u1"):
        feats = feats / 255.0
    if feats.ndim == 3:
        feats = feats[..., None]
    labels = labels.astype(np.int64)
    if labels.size and labels.min() < 0:
        raise IngestionError(f"{labels_path}: negative label")
    c = int(n_classes) if n_classes is not None else int(labels.max()) + 1
    if labels.size and labels.max() >= c:
        bad = int(np.argmax(labels >= c))
        raise IngestionError(f"{labels_path}: label {labels[bad]} >= C={c} at record {bad}")
    return LabeledDataset(feats, labels, labels, max(c, 2), "clean")


# -- CSV ------------------------------------------------------------------------


def _header_line(dataset: LabeledDataset) -> str:
    line = f"# {FORMAT_TAG} {FORMAT_VERSION} provenance={dataset.provenance} C={dataset.n_classes}"
    if dataset.features.ndim > 2:
        line += " shape=" + "x".join(str(s) for s in dataset.features.shape[1:])
    return line


def save_csv(dataset: LabeledDataset, path) -> None:
    """Write the dataset CSV; floats use shortest round-trip repr."""
    flat = dataset.features.reshape(len(dataset), -1)
    d = flat.shape[1]
    lines = [_header_line(dataset), ",".join(["index", "true_label", "observed_label"] + [f"f{k}" for k in range(d)])]
    for i in range(len(dataset)):
        vals = ",".join(repr(float(v)) for v in flat[i])
        lines.append(f"{i},{dataset.true_labels[i]},{dataset.observed_labels[i]},{vals}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


save_noisy = save_csv


def _parse_meta(line: str, path) -> dict:
    parts = line[1:].split()
    if len(parts) < 2 or parts[0] != FORMAT_TAG:
        raise IngestionError(f"{path}:1: not a {FORMAT_TAG} dataset comment")
    if parts[1] != FORMAT_VERSION:
        raise IngestionError(f"{path}:1: unsupported version {parts[1]!r}, expected {FORMAT_VERSION}")
    meta = {}
    for token in parts[2:]:
        key, sep, value = token.partition("=")
        if not sep:
            raise IngestionError(f"{path}:1: malformed field {token!r}")
        meta[key] = value
    for key in ("provenance", "C"):
        if key not in meta:
            raise IngestionError(f"{path}:1: missing field {key!r}")
    return meta


def _read_csv(path, require_meta: bool) -> LabeledDataset:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestionError(f"{path}: {exc}") from exc
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    line_no = 0
    meta = None
    if lines and lines[0].startswith("#"):
        meta = _parse_meta(lines[0], path)
        line_no = 1
    elif require_meta:
        raise IngestionError(f"{path}:1: missing '# {FORMAT_TAG} {FORMAT_VERSION}' comment line")
    if line_no >= len(lines):
        raise IngestionError(f"{path}:{line_no + 1}: missing column header")
    header = next(csv.reader([lines[line_no]]))
    if header[:3] != ["index", "true_label", "observed_label"]:
        raise IngestionError(f"{path}:{line_no + 1}: header must start with index,true_label,observed_label")
    d = len(header) - 3
    if header[3:] != [f"f{k}" for k in range(d)]:
        raise IngestionError(f"{path}:{line_no + 1}: feature columns must be f0..f{d - 1}")
    body = lines[line_no + 1:]
    n_classes = int(meta["C"]) if meta else None
    true = np.empty(len(body), dtype=np.int64)
    obs = np.empty(len(body), dtype=np.int64)
    feats = np.empty((len(body), d))
    for r, row in enumerate(csv.reader(body)):
        pos = line_no + 2 + r
        if len(row) != len(header):
            raise IngestionError(f"{path}:{pos}: expected {len(header)} fields, got {len(row)}")
        try:
            idx = int(row[0])
            true[r], obs[r] = int(row[1]), int(row[2])
            feats[r] = [float(v) for v in row[3:]]
        except ValueError as exc:
            raise IngestionError(f"{path}:{pos}: {exc}") from exc
        if idx != r:
            raise IngestionError(f"{path}:{pos}: index {idx} out of sequence, expected {r}")
        for label in (true[r], obs[r]):
            if label < 0 or (n_classes is not None and label >= n_classes):
                raise IngestionError(f"{path}:{pos}: label {label} outside [0, {n_classes})")
    if n_classes is None:
        n_classes = max(2, int(max(true.max(initial=0), obs.max(initial=0))) + 1)
        provenance = "clean" if np.array_equal(true, obs) else "randomized"
    else:
        provenance = meta["provenance"]
    if meta and "shape" in meta:
        shape = tuple(int(s) for s in meta["shape"].split("x"))
        if int(np.prod(shape)) != d:
            raise IngestionError(f"{path}:1: shape {shape} does not match {d} feature columns")
        feats = feats.reshape((len(body),) + shape)
    try:
        return LabeledDataset(feats, true, obs, n_classes, provenance)
    except ConfigError as exc:
        raise IngestionError(f"{path}: {exc}") from exc


def load_csv(path) -> LabeledDataset:
    """Dataset CSV; the leading comment line is optional here (C is then inferred)."""
    return _read_csv(path, require_meta=False)


def load_noisy(path) -> LabeledDataset:
    return _read_csv(path, require_meta=True)
