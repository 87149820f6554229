"""Clean training with snapshot capture and noisy training under robust methods."""

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from noiselab.datasets import LabeledDataset
from noiselab.errors import ConfigError, NumericError, RunError
from noiselab.harness.coteach import coteach_select, keep_fraction_schedule
from noiselab.harness.losses import SCE_LOG_ZERO, bootsoft_terms, ce_terms, gce_terms, sce_terms
from noiselab.harness.metrics import label_recall, mota_epoch
from noiselab.noise import PredictionSnapshot, make_snapshot
from noiselab.numerics import AdamState, ModelSpec, ScheduleSpec, adam_step, backward, forward, init_params, predict
from noiselab.numerics import lr_multiplier

METHODS = ("standard", "coteaching", "sce", "gce", "bootsoft")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 32
    lr: float = 1e-3
    schedule: ScheduleSpec = field(default_factory=lambda: ScheduleSpec.preset("decay1"))
    shuffle_seed: int = 0
    method: str = "standard"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    sce_a: float = 0.1
    sce_b: float = 1.0
    sce_log_zero: float = SCE_LOG_ZERO
    gce_q: float = 0.7
    boot_beta: float = 0.95
    coteach_tau: float = 0.2
    coteach_ramp: int = 10

    def __post_init__(self):
        if isinstance(self.schedule, str):
            object.__setattr__(self, "schedule", ScheduleSpec.preset(self.schedule))
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not 0.0 < self.gce_q <= 1.0:
            raise ConfigError("gce_q must lie in (0, 1]")
        if not 0.0 <= self.boot_beta <= 1.0:
            raise ConfigError("boot_beta must lie in [0, 1]")
        if self.sce_a < 0 or self.sce_b < 0:
            raise ConfigError("SCE weights must be non-negative")
        if not 0.0 <= self.coteach_tau < 1.0:
            raise ConfigError("coteach_tau must lie in [0, 1)")
        if self.coteach_ramp < 1:
            raise ConfigError("coteach_ramp must be >= 1")

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class RunRecord:
    """Per-epoch curves of one run. Undefined recalls are NaN."""

    method: str
    noise_type: str
    tau: float
    lr_mult: np.ndarray
    train_acc: np.ndarray
    test_acc: np.ndarray
    lr_clean: np.ndarray
    lr_noisy: np.ndarray

    @property
    def epochs(self) -> int:
        return int(self.test_acc.size)

    @property
    def mota_epoch(self) -> int:
        return mota_epoch(self.test_acc)

    @property
    def acc_mota(self) -> float:
        return float(self.test_acc[self.mota_epoch - 1])

    @property
    def acc_final(self) -> float:
        return float(self.test_acc[-1])

    @property
    def lrn_mota(self) -> float:
        return float(self.lr_noisy[self.mota_epoch - 1])

    @property
    def lrn_final(self) -> float:
        return float(self.lr_noisy[-1])


@dataclass
class SnapshotSet:
    snapshots: List[PredictionSnapshot]
    model: ModelSpec
    config: TrainConfig
    test_acc: Optional[np.ndarray] = None

    def __iter__(self):
        return iter(self.snapshots)

    def __len__(self):
        return len(self.snapshots)

    def __getitem__(self, k):
        return self.snapshots[k]


def _loss_fn(config: TrainConfig) -> Callable:
    if config.method == "sce":
        return lambda z, y: sce_terms(z, y, config.sce_a, config.sce_b, config.sce_log_zero)
    if config.method == "gce":
        return lambda z, y: gce_terms(z, y, config.gce_q)
    if config.method == "bootsoft":
        return lambda z, y: bootsoft_terms(z, y, config.boot_beta)
    return ce_terms


class _Net:
    """Parameters plus optimizer state of one network."""

    def __init__(self, spec: ModelSpec, config: TrainConfig):
        self.spec = spec
        self.params = init_params(spec)
        self.opt = AdamState.for_params(self.params, lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)

    def logits(self, xb):
        return forward(self.spec, self.params, xb, return_cache=True)

    def step(self, cache, per_example_grad, selected, mult):
        m = per_example_grad.shape[0]
        if selected is None or selected.size == m:
            dlogits = per_example_grad / m
        else:
            dlogits = np.zeros_like(per_example_grad)
            dlogits[selected] = per_example_grad[selected] / selected.size
        grads = backward(self.spec, self.params, cache, dlogits)
        self.params = adam_step(self.params, grads, self.opt, mult)


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _check_finite(losses, net: _Net, epoch: int):
    if not np.all(np.isfinite(losses)) or not all(np.all(np.isfinite(p)) for p in net.params):
        raise RunError(f"training diverged (non-finite loss or parameters) in epoch {epoch}", epoch)


def _run(train: LabeledDataset, spec: ModelSpec, config: TrainConfig, on_epoch, peer: bool):
    # Overflow surfaces through the explicit finiteness checks, so numpy's warnings are noise.
    with np.errstate(over="ignore", invalid="ignore"):
        _epochs(train, spec, config, on_epoch, peer)


def _epochs(train: LabeledDataset, spec: ModelSpec, config: TrainConfig, on_epoch, peer: bool):
    x = train.features
    y = train.observed_labels
    loss_fn = _loss_fn(config)
    rng = np.random.default_rng(config.shuffle_seed)
    net_a = _Net(spec, config)
    net_b = _Net(dataclasses.replace(spec, seed=spec.seed + 1), config) if peer else None
    for epoch in range(1, config.epochs + 1):
        mult = lr_multiplier(config.schedule, epoch - 1)
        keep = keep_fraction_schedule(epoch - 1, config.coteach_tau, config.coteach_ramp) if peer else 1.0
        for idx in _batches(len(train), config.batch_size, rng):
            xb, yb = x[idx], y[idx]
            try:
                logits_a, cache_a = net_a.logits(xb)
                losses_a, g_a = loss_fn(logits_a, yb)
                _check_finite(losses_a, net_a, epoch)
                if net_b is None:
                    net_a.step(cache_a, g_a, None, mult)
                    continue
                logits_b, cache_b = net_b.logits(xb)
                losses_b, g_b = loss_fn(logits_b, yb)
                _check_finite(losses_b, net_b, epoch)
                sel_a, sel_b = coteach_select(losses_a, losses_b, keep)
                net_a.step(cache_a, g_a, sel_a, mult)
                net_b.step(cache_b, g_b, sel_b, mult)
            except NumericError as exc:
                if isinstance(exc, RunError):
                    raise
                raise RunError(f"training diverged in epoch {epoch}: {exc}", epoch) from exc
        _check_finite(np.zeros(1), net_a, epoch)
        on_epoch(epoch, mult, net_a)


def train_clean(
    train: LabeledDataset, spec: ModelSpec, config: TrainConfig, test: Optional[LabeledDataset] = None
) -> SnapshotSet:
    """Standard training that records full-training-set argmax predictions after every epoch."""
    if train.provenance != "clean":
        raise ConfigError(f"clean training needs a clean dataset, got provenance {train.provenance!r}")
    if spec.n_classes != train.n_classes:
        raise ConfigError(f"model has {spec.n_classes} classes, dataset {train.n_classes}")
    config = config.replace(method="standard")
    snaps: List[PredictionSnapshot] = []
    test_acc = []

    def record(epoch, mult, net):
        preds = predict(net.spec, net.params, train.features)
        snaps.append(make_snapshot(epoch, preds, train.true_labels, train.n_classes))
        if test is not None:
            test_acc.append(float(np.mean(predict(net.spec, net.params, test.features) == test.true_labels)))

    _run(train, spec, config, record, peer=False)
    return SnapshotSet(snaps, spec, config, np.array(test_acc) if test is not None else None)


def train_noisy(train: LabeledDataset, test: LabeledDataset, spec: ModelSpec, config: TrainConfig) -> RunRecord:
    """Train on observed labels; true labels only feed the recall metrics.

    Co-teaching trains two networks and reports the first.
    """
    if spec.n_classes != train.n_classes or test.n_classes != train.n_classes:
        raise ConfigError("model, train and test class counts differ")
    clean_mask = train.clean_mask
    cols = {k: [] for k in ("lr_mult", "train_acc", "test_acc", "lr_clean", "lr_noisy")}

    def record(epoch, mult, net):
        pred_train = predict(net.spec, net.params, train.features)
        pred_test = predict(net.spec, net.params, test.features)
        lr_c, lr_n = label_recall(pred_train, train.observed_labels, clean_mask)
        cols["lr_mult"].append(mult)
        cols["train_acc"].append(float(np.mean(pred_train == train.observed_labels)))
        cols["test_acc"].append(float(np.mean(pred_test == test.true_labels)))
        cols["lr_clean"].append(np.nan if lr_c is None else lr_c)
        cols["lr_noisy"].append(np.nan if lr_n is None else lr_n)

    _run(train, spec, config, record, peer=config.method == "coteaching")
    return RunRecord(
        method=config.method,
        noise_type=train.provenance,
        tau=train.noise_rate,
        **{k: np.array(v, dtype=np.float64) for k, v in cols.items()},
    )
