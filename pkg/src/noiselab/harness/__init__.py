from noiselab.harness.coteach import coteach_select, keep_fraction_schedule
from noiselab.harness.losses import (
    bootsoft_loss,
    bootsoft_terms,
    ce_terms,
    cross_entropy_loss,
    gce_loss,
    gce_terms,
    sce_loss,
    sce_terms,
)
from noiselab.harness.metrics import label_recall, mota, mota_epoch
from noiselab.harness.train import METHODS, RunRecord, SnapshotSet, TrainConfig, train_clean, train_noisy

__all__ = [
    "METHODS",
    "RunRecord",
    "SnapshotSet",
    "TrainConfig",
    "bootsoft_loss",
    "bootsoft_terms",
    "ce_terms",
    "coteach_select",
    "cross_entropy_loss",
    "gce_loss",
    "gce_terms",
    "keep_fraction_schedule",
    "label_recall",
    "mota",
    "mota_epoch",
    "sce_loss",
    "sce_terms",
    "train_clean",
    "train_noisy",
]
