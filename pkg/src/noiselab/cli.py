"""``noiselab`` command line: train-clean, make-noise, train-noisy, report, analyze.

Exit codes: 0 success, 2 configuration error, 3 numeric divergence,
4 snapshot selection failure, 5 missing or malformed input.
"""

import argparse
import json
import os
import shutil
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from noiselab import __version__
from noiselab.config import dump_config, int_tuple, load_config
from noiselab.datasets import (
    LabeledDataset,
    SplitSpec,
    gen_confusable_blobs,
    load_csv,
    load_idx,
    load_noisy,
    save_csv,
    split,
    standardize,
)
from noiselab.errors import ConfigError, IngestionError, NoiselabError
from noiselab.harness import TrainConfig, train_clean, train_noisy
from noiselab.noise import (
    DEFAULT_TOLERANCE,
    alpha_beta,
    asymmetric_noise,
    dataset_transition,
    load_snapshots,
    load_transition,
    pseudo_noise,
    randomized_noise,
    save_snapshots,
    save_stats,
    save_transition,
    select_snapshot,
    symmetric_noise,
)
from noiselab.numerics import ModelSpec, ScheduleSpec
from noiselab.report import ComparisonRow, emit_summary, emit_svg_curves, load_run, save_run

NOISE_KINDS = ("pseudo", "randomized", "symmetric", "asymmetric")


class Manifest:
    """Run record written to ``manifest.json`` on success and on failure."""

    def __init__(self, command, argv):
        self.data = {
            "command": command,
            "argv": list(argv),
            "version": __version__,
            "config": None,
            "seeds": {},
            "inputs": [],
            "outputs": [],
        }
        self._start = time.perf_counter()

    def write(self, out_dir, status, exit_code, error=None):
        if out_dir is None:
            return
        self.data.update(
            status=status,
            exit_code=exit_code,
            error=error,
            duration_s=round(time.perf_counter() - self._start, 3),
        )
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "manifest.json").write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _require_file(path: Path, what: str) -> Path:
    if not path.is_file():
        raise IngestionError(f"{what} not found: {path}")
    return path


def _load_run_config(args, manifest):
    if args.config is None:
        raise ConfigError("--config is required")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["model"]["seed"] = args.seed
        cfg["train"]["shuffle_seed"] = args.seed
    manifest.data["config"] = cfg
    manifest.data["seeds"] = {
        "data": cfg["data"]["seed"],
        "split": cfg["data"]["split_seed"],
        "model": cfg["model"]["seed"],
        "shuffle": cfg["train"]["shuffle_seed"],
    }
    manifest.data["inputs"].append(str(args.config))
    return cfg


def _model_spec(cfg, dataset: LabeledDataset) -> ModelSpec:
    m = cfg["model"]
    kind = m["kind"]
    shape = dataset.features.shape[1:]
    if kind == "mlp":
        shape = (int(np.prod(shape)),)
    return ModelSpec(
        kind=kind,
        input_shape=shape,
        n_classes=dataset.n_classes,
        hidden=int_tuple(m["hidden"], "[model] hidden"),
        conv_channels=int_tuple(m["conv_channels"], "[model] conv_channels"),
        seed=m["seed"],
    )


def _train_config(cfg) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        epochs=t["epochs"],
        batch_size=t["batch_size"],
        lr=t["lr"],
        schedule=ScheduleSpec.preset(t["schedule"]),
        shuffle_seed=t["shuffle_seed"],
        method=t["method"],
        beta1=t["beta1"],
        beta2=t["beta2"],
        eps=t["eps"],
        sce_a=t["sce_a"],
        sce_b=t["sce_b"],
        sce_log_zero=t["sce_log_zero"],
        gce_q=t["gce_q"],
        boot_beta=t["boot_beta"],
        coteach_tau=t["coteach_tau"],
        coteach_ramp=t["coteach_ramp"],
    )


def _flatten_for_mlp(cfg, ds: LabeledDataset) -> LabeledDataset:
    if cfg["model"]["kind"] == "mlp" and ds.features.ndim > 2:
        return LabeledDataset(ds.features.reshape(len(ds), -1), ds.true_labels, ds.observed_labels, ds.n_classes, ds.provenance)
    return ds


def _write_config_copy(cfg, out: Path, manifest):
    (out / "config.ini").write_text(dump_config(cfg), encoding="utf-8", newline="\n")
    manifest.data["outputs"].append(str(out / "config.ini"))


def cmd_train_clean(args, manifest):
    cfg = _load_run_config(args, manifest)
    base = Path(args.config).parent
    d = cfg["data"]
    if d["source"] == "blobs":
        full = gen_confusable_blobs(d["classes"], d["n_per_class"], d["dim"], d["confusability"], d["seed"])
    elif d["source"] == "csv":
        path = _require_file(_resolve(base, d["csv"]), "[data] csv")
        manifest.data["inputs"].append(str(path))
        full = load_csv(path)
    elif d["source"] == "idx":
        images = _require_file(_resolve(base, d["idx_images"]), "[data] idx_images")
        labels = _require_file(_resolve(base, d["idx_labels"]), "[data] idx_labels")
        manifest.data["inputs"] += [str(images), str(labels)]
        full = load_idx(images, labels)
    else:
        raise ConfigError(f"[data] source must be blobs, csv or idx, got {d['source']!r}")
    if full.provenance != "clean":
        full = full.relabel(full.true_labels, "clean")
    train, test = split(full, SplitSpec(d["test_fraction"], d["split_seed"]))
    if d["standardize"]:
        train, test = standardize(train, test)
    spec = _model_spec(cfg, train)
    train, test = _flatten_for_mlp(cfg, train), _flatten_for_mlp(cfg, test)
    snaps = train_clean(train, spec, _train_config(cfg), test)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_csv(train, out / "train.csv")
    save_csv(test, out / "test.csv")
    save_snapshots(snaps.snapshots, out)
    _write_config_copy(cfg, out, manifest)
    manifest.data["outputs"] += [str(out / n) for n in ("train.csv", "test.csv", "snapshots.csv")]
    manifest.data["outputs"] += [str(out / f"pred_{s.epoch}.csv") for s in snaps]
    final = snaps[-1]
    print(f"trained {len(snaps)} epochs; final train accuracy {final.train_acc:.4f}")
    accs = ", ".join(f"{s.epoch}:{s.train_acc:.3f}" for s in snaps)
    print(f"snapshot accuracies: {accs}")


def cmd_make_noise(args, manifest):
    manifest.data["config"] = {k: v for k, v in vars(args).items() if k != "func"}
    manifest.data["seeds"] = {"noise": args.seed if args.seed is not None else 0}
    seed = args.seed if args.seed is not None else 0
    if args.dataset is not None:
        dataset_path = Path(args.dataset)
    elif args.kind == "pseudo" and args.snapshots is not None:
        dataset_path = Path(args.snapshots) / "train.csv"
    else:
        raise ConfigError(f"make-noise {args.kind} needs --dataset")
    _require_file(dataset_path, "dataset")
    manifest.data["inputs"].append(str(dataset_path))
    # Generators always start from the ground truth of the given file.
    source = load_noisy(dataset_path)
    clean = source.relabel(source.true_labels, "clean")

    if args.kind == "pseudo":
        if args.snapshots is None or args.tau is None:
            raise ConfigError("make-noise pseudo needs --snapshots and --tau")
        manifest.data["inputs"].append(str(args.snapshots))
        if not Path(args.snapshots).is_dir():
            raise IngestionError(f"snapshot directory not found: {args.snapshots}")
        snaps = load_snapshots(args.snapshots, clean.true_labels, clean.n_classes)
        target = None
        if (args.alpha is None) != (args.beta is None):
            raise ConfigError("--alpha and --beta must be given together")
        if args.alpha is not None:
            target = (args.alpha, args.beta)
        snap = select_snapshot(snaps, args.tau, args.tolerance, target)
        noisy = pseudo_noise(clean, snap)
        print(f"selected epoch {snap.epoch} (train accuracy {snap.train_acc:.4f})")
    elif args.kind == "randomized":
        if args.matrix is None:
            raise ConfigError("make-noise randomized needs --matrix")
        matrix_path = _require_file(Path(args.matrix), "transition matrix")
        manifest.data["inputs"].append(str(matrix_path))
        noisy = randomized_noise(clean, load_transition(matrix_path), seed)
    else:
        if args.tau is None:
            raise ConfigError(f"make-noise {args.kind} needs --tau")
        gen = symmetric_noise if args.kind == "symmetric" else asymmetric_noise
        noisy = gen(clean, args.tau, seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    transition = dataset_transition(noisy)
    stats = alpha_beta(transition)
    save_csv(noisy, out / "train.csv")
    save_transition(transition, out / "transition.csv")
    save_stats(stats, out / "stats.csv")
    manifest.data["outputs"] += [str(out / n) for n in ("train.csv", "transition.csv", "stats.csv")]
    test_src = dataset_path.parent / "test.csv"
    if test_src.is_file() and test_src.resolve() != (out / "test.csv").resolve():
        shutil.copyfile(test_src, out / "test.csv")
        manifest.data["outputs"].append(str(out / "test.csv"))
    print(f"{args.kind} noise: tau={stats.tau:.4f} alpha={stats.alpha:.6f} beta={stats.beta:.6f}")


def cmd_train_noisy(args, manifest):
    cfg = _load_run_config(args, manifest)
    base = Path(args.config).parent
    d = cfg["data"]
    if not d["train"] or not d["test"]:
        raise ConfigError("train-noisy needs [data] train and [data] test")
    train_path = _require_file(_resolve(base, d["train"]), "[data] train")
    test_path = _require_file(_resolve(base, d["test"]), "[data] test")
    manifest.data["inputs"] += [str(train_path), str(test_path)]
    train, test = load_noisy(train_path), load_noisy(test_path)
    spec = _model_spec(cfg, train)
    train, test = _flatten_for_mlp(cfg, train), _flatten_for_mlp(cfg, test)
    record = train_noisy(train, test, spec, _train_config(cfg))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_run(record, out)
    _write_config_copy(cfg, out, manifest)
    manifest.data["outputs"] += [str(out / "metrics.csv"), str(out / "run.json")]
    print(
        f"{record.method} on {record.noise_type} (tau={record.tau:.4f}): "
        f"MOTA epoch {record.mota_epoch}, accuracy {record.acc_mota:.4f}/{record.acc_final:.4f}"
    )


def cmd_report(args, manifest):
    if not args.runs:
        raise ConfigError("report needs at least one run directory")
    manifest.data["config"] = {"runs": list(args.runs)}
    records = []
    for run_dir in args.runs:
        path = Path(run_dir)
        if not path.is_dir():
            raise IngestionError(f"run directory not found: {path}")
        manifest.data["inputs"].append(str(path))
        records.append((path.resolve().name, load_run(path)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_summary([ComparisonRow.from_record(r) for _, r in records], out / "summary.csv")
    for panel in ("label_recall", "accuracy"):
        emit_svg_curves(records, panel, out / f"{panel}.svg")
    manifest.data["outputs"] += [str(out / n) for n in ("summary.csv", "label_recall.svg", "accuracy.svg")]
    print((out / "summary.csv").read_text(encoding="utf-8"), end="")


def cmd_analyze(args, manifest):
    path = Path(args.dataset_path or args.dataset or "")
    if not args.dataset_path and not args.dataset:
        raise ConfigError("analyze needs a dataset path")
    _require_file(path, "dataset")
    manifest.data["inputs"].append(str(path))
    ds = load_csv(path)
    transition = dataset_transition(ds)
    print(f"n={len(ds)} C={ds.n_classes} provenance={ds.provenance}")
    print(f"tau={ds.noise_rate:.6f}")
    try:
        stats = alpha_beta(transition)
        print(f"alpha={stats.alpha:.6f}")
        print(f"beta={stats.beta:.6f}")
        print("N_j=" + ",".join(f"{v:.4f}" for v in stats.column_sums))
    except NoiselabError as exc:
        print(f"alpha/beta undefined: {exc}")
    print("N_ij (rows: true class, columns: observed class)")
    for i, row in enumerate(transition.matrix):
        print(f"{i}: " + " ".join(f"{v:.4f}" for v in row) + f"  (n_i={transition.counts[i]})")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="overrides model/shuffle seeds (noise seed for make-noise)")

    parser = argparse.ArgumentParser(prog="noiselab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"noiselab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-clean", parents=[common], help="train on clean data and store per-epoch snapshots")
    p.set_defaults(func=cmd_train_clean, needs_out=True)

    p = sub.add_parser("make-noise", parents=[common], help="write a noisy dataset with its transition matrix and stats")
    p.add_argument("kind", choices=NOISE_KINDS)
    p.add_argument("--dataset", help="dataset CSV (its true labels are used)")
    p.add_argument("--snapshots", help="pseudo: snapshot directory from train-clean")
    p.add_argument("--tau", type=float, help="noise rate")
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE, help="pseudo: accuracy tolerance")
    p.add_argument("--alpha", type=float, help="pseudo: target alpha")
    p.add_argument("--beta", type=float, help="pseudo: target beta")
    p.add_argument("--matrix", help="randomized: transition matrix CSV")
    p.set_defaults(func=cmd_make_noise, needs_out=True)

    p = sub.add_parser("train-noisy", parents=[common], help="train on a noisy dataset and record metrics")
    p.set_defaults(func=cmd_train_noisy, needs_out=True)

    p = sub.add_parser("report", parents=[common], help="summary CSV and SVG panels for run directories")
    p.add_argument("runs", nargs="*", help="run directories written by train-noisy")
    p.set_defaults(func=cmd_report, needs_out=True)

    p = sub.add_parser("analyze", parents=[common], help="print tau, alpha, beta and N_ij of a dataset")
    p.add_argument("dataset_path", nargs="?", help="dataset CSV")
    p.add_argument("--dataset", help="dataset CSV")
    p.set_defaults(func=cmd_analyze, needs_out=False)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.needs_out and not args.out:
        parser.error(f"{args.command} requires --out")
    manifest = Manifest(args.command, argv)
    try:
        threads = int(os.environ.get("NOISELAB_THREADS", "1"))
    except ValueError:
        threads = 1
    try:
        with threadpool_limits(limits=max(1, threads)):
            args.func(args, manifest)
    except NoiselabError as exc:
        print(f"noiselab {args.command}: error: {exc}", file=sys.stderr)
        manifest.write(args.out, "failed", exc.exit_code, str(exc))
        return exc.exit_code
    except OSError as exc:
        print(f"noiselab {args.command}: error: {exc}", file=sys.stderr)
        manifest.write(args.out, "failed", 5, str(exc))
        return 5
    manifest.write(args.out, "ok", 0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
